#ifndef CSPACE_SPATIALIZATION_HPP
#define CSPACE_SPATIALIZATION_HPP

#include "cspace/conceptgen.hpp"
#include "cspace/corpus.hpp"
#include "cspace/embeddings.hpp"
#include "cspace/geometry.hpp"
#include "cspace/tsne.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cspace {

struct ProjectionInput {
    /// Concept vectors extended with the assigned document keywords.
    std::vector<ConceptVector> concepts;
    /// Every word to place, sorted.
    std::vector<std::string> words;
};

struct GatherOptions {
    /// Document keywords inserted into their closest concept vector.
    std::size_t doc_keywords = 20;
    /// Document keywords that join the projection input.
    std::size_t corpus_keywords = 15;
};

/**
 * Collects concept words, descriptors, topic keywords and each document's top
 * keywords. Each document's top `doc_keywords` words that no concept owns yet
 * become TOPIC_DESCRIPTOR entries of their most similar concept (cosine against
 * the concept word, lexicographically earlier concept on ties). Words absent
 * from `store` are skipped.
 */
ProjectionInput gather_projection_input(std::vector<ConceptVector> concepts,
                                        const std::vector<std::vector<std::string>>& topic_keywords,
                                        const Corpus& corpus, const EmbeddingStore& store,
                                        const GatherOptions& options = {});

/// Row-major vectors of `words` in order.
std::vector<double> stack_vectors(const EmbeddingStore& store, const std::vector<std::string>& words);

/// Free t-SNE run over `words`; only the positions of `concepts` are kept.
std::map<std::string, Vec2> initial_anchor_pass(const std::vector<std::string>& words,
                                                const std::vector<std::string>& concepts,
                                                const EmbeddingStore& store, const TsneParams& params,
                                                const TsneCallback& callback = {});

/**
 * t-SNE with `anchors` clamped after every update. Free words start at the
 * position of their most similar anchor plus seeded jitter, or from the seeded
 * Gaussian layout when there are no anchors.
 */
Projection2D tsne_project(const std::vector<std::string>& words, const std::map<std::string, Vec2>& anchors,
                          const EmbeddingStore& store, const TsneParams& params, const TsneCallback& callback = {},
                          TsneResult* trace = nullptr);

/// {word: [x, y]} with coordinates divided by the viewport extent.
nlohmann::json projection_to_json(const Projection2D& canvas, const Viewport& viewport);
/// Inverse of projection_to_json; anchors are not restored.
Projection2D projection_from_json(const nlohmann::json& j, const Viewport& viewport);

}  // namespace cspace

#endif
