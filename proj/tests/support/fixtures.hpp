#ifndef CSPACE_TEST_FIXTURES_HPP
#define CSPACE_TEST_FIXTURES_HPP

#include "cspace/conceptgen.hpp"
#include "cspace/corpus.hpp"
#include "cspace/embeddings.hpp"
#include "cspace/geometry.hpp"
#include "cspace/hierarchy.hpp"
#include "cspace/quadtree.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace cspace::fixtures {

/// Unit vectors from named shared axes; whatever norm is left goes to a private axis per word.
class VectorBuilder {
public:
    void add(const std::string& word, const std::vector<std::pair<std::string, double>>& parts = {});
    EmbeddingStore build() const;

private:
    std::vector<std::string> axes_;
    std::vector<std::pair<std::string, std::vector<std::pair<std::string, double>>>> words_;
};

/// Documents "d0", "d1", ... built unstemmed with unigrams only.
Corpus small_corpus(const std::vector<std::string>& texts, ScoringFunction scoring = ScoringFunction::G2);

/// Everything a hierarchy-level test needs, on the 100 x 100 canvas.
struct Scene {
    Corpus corpus;
    EmbeddingStore store;
    Projection2D canvas;
    QuadTree qt;
    ConceptHierarchy hierarchy;
    std::map<std::string, double> scores;
    AbstractionParams params;
};

/// Healthcare/taxes walkthrough: hand-built concept vectors, user edit, keyword
/// insertion, anchored projection and build_hierarchy.
struct ToyResult {
    Scene scene;
    std::vector<ConceptVector> initial;
    std::vector<ConceptVector> gathered;
};
ToyResult toy();

/// energy and health clusters; with the defect, "medicare" sits under energy
/// while its vector and position belong to health.
Scene planted(bool with_defect = true);

/// One concept "economy" whose descriptor "jobs" is more central than the concept word.
Scene swap_scene();

/// Concepts budget (descriptor deficit) and school (descriptor teacher);
/// document d2 mentions budget, deficit and teacher twice. TF scoring.
Scene teach();

/// Positions a scene directly, then fills the quadtree, base words and super concepts.
Scene make_scene(Corpus corpus, EmbeddingStore store, std::map<std::string, Vec2> positions,
                 const std::map<std::string, std::vector<std::string>>& concepts);

}  // namespace cspace::fixtures

#endif
