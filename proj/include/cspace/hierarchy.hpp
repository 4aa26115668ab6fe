#ifndef CSPACE_HIERARCHY_HPP
#define CSPACE_HIERARCHY_HPP

#include "cspace/conceptgen.hpp"
#include "cspace/embeddings.hpp"
#include "cspace/geometry.hpp"
#include "cspace/quadtree.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace cspace {

constexpr int kMinLevel = -2;
constexpr int kMaxLevel = 2;

/// round(base * growth^level) for level in [-2, 2]; throws LevelOutOfRange.
int effective_neighborhood(int level, int base = 6, double growth = 1.5);

struct AbstractionParams {
    double eps_similarity = 0.4;
    /// Neighbourhood size at level 0.
    int eps_neighborhood = 6;
    double super_factor = 1.5;
    int level = 0;

    void validate() const;
    int neighborhood() const { return effective_neighborhood(level, eps_neighborhood); }
    int super_neighborhood() const;
    /// eps_similarity * (1 + 0.1 * level)
    double coherence_threshold() const { return eps_similarity * (1.0 + 0.1 * level); }
};

struct Cluster {
    std::string head;
    /// Non-candidate words gathered around the head.
    std::set<std::string> members;
    /// Candidates merged into this cluster; they become descriptors of the head.
    std::vector<std::string> absorbed;
};

struct ClusterSet {
    std::vector<Cluster> clusters;
    std::vector<std::string> unclustered;
};

/**
 * Density pass over `candidates`. A candidate forms a cluster when all of its
 * neighborhood() nearest spatial neighbours (candidates and `excluded` words
 * are skipped) have cosine >= eps_similarity with it. Overlapping clusters
 * merge under the higher-scoring head when the mean pairwise cosine of the
 * union reaches the coherence threshold; otherwise each shared member stays
 * with the head it is most similar to.
 *
 * Throws StaleIndex when `qt` was built from another projection.
 */
ClusterSet cluster_level(const std::vector<std::string>& candidates, const Projection2D& proj, const QuadTree& qt,
                         const EmbeddingStore& store, const AbstractionParams& params,
                         const std::map<std::string, double>& scores, const std::set<std::string>& excluded = {});

struct ConceptNode {
    std::string word;
    double score = 0.0;
    std::vector<Descriptor> descriptors;
    int super_id = -1;

    bool has(std::string_view w) const;
    friend bool operator==(const ConceptNode&, const ConceptNode&) = default;
};

struct SuperConcept {
    int id = 0;
    std::string label;
    std::vector<std::string> concepts;
    friend bool operator==(const SuperConcept&, const SuperConcept&) = default;
};

struct ConceptHierarchy {
    std::map<std::string, ConceptNode, std::less<>> concepts;
    std::vector<SuperConcept> super_concepts;
    std::set<std::string, std::less<>> base_words;
    /// Words the user removed; a subset of base_words.
    std::set<std::string, std::less<>> demoted;
    int level = 0;

    bool is_concept(std::string_view w) const { return concepts.find(w) != concepts.end(); }
    bool is_base(std::string_view w) const { return base_words.find(w) != base_words.end(); }
    std::optional<std::string> parent_of(std::string_view w) const;
    bool is_descriptor(std::string_view w) const { return parent_of(w).has_value(); }
    bool contains(std::string_view w) const { return is_concept(w) || is_base(w) || is_descriptor(w); }
    /// Level used for topic-model weighting; super-concept labels rank above plain concepts.
    Level level_of(std::string_view w) const;
    const SuperConcept* super_of(std::string_view concept_word) const;

    std::set<std::string> words() const;
    std::size_t word_count() const;
    /// Descriptor -> owning concept.
    std::map<std::string, std::string> owners() const;
    /// Human-readable violations of the structural invariants; empty when consistent.
    std::vector<std::string> violations() const;

    friend bool operator==(const ConceptHierarchy&, const ConceptHierarchy&) = default;
};

/**
 * Concept pass over the current concept words, then descriptors that no
 * cluster took join their most similar concept when the cosine reaches
 * eps_similarity; USER_DEFINED descriptors stay with their concept. Remaining
 * projection words are base words. Finishes with rebuild_super_concepts.
 *
 * Throws NoConcepts when no concept word has coordinates.
 */
ConceptHierarchy build_hierarchy(const std::vector<ConceptVector>& concepts, const Projection2D& proj,
                                 const QuadTree& qt, const EmbeddingStore& store, const AbstractionParams& params,
                                 const std::map<std::string, double>& scores,
                                 const std::set<std::string>& demoted = {});

/**
 * Replaces only the super-concept layer. Concepts a and b are linked when one
 * is among the other's super_neighborhood() nearest concepts and the cosine of
 * their member centroids reaches eps_similarity; connected components become
 * super concepts labelled by their highest-scoring concept.
 */
ConceptHierarchy rebuild_super_concepts(ConceptHierarchy h, const Projection2D& proj, const EmbeddingStore& store,
                                        const AbstractionParams& params);

/// Concept vectors that rebuild the same concept layer.
std::vector<ConceptVector> to_concept_vectors(const ConceptHierarchy& h);

nlohmann::json hierarchy_to_json(const ConceptHierarchy& h);
/// Accepts the export format; base_words and demoted are optional.
ConceptHierarchy hierarchy_from_json(const nlohmann::json& j);
/// FNV-1a over the canonical JSON export, as 16 hex digits.
std::string hierarchy_hash(const ConceptHierarchy& h);

}  // namespace cspace

#endif
