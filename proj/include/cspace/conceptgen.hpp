#ifndef CSPACE_CONCEPTGEN_HPP
#define CSPACE_CONCEPTGEN_HPP

#include "cspace/corpus.hpp"
#include "cspace/embeddings.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cspace {

enum class Provenance { CONCEPT_DESCRIPTOR, TOPIC_DESCRIPTOR, USER_DEFINED };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view name);

struct Descriptor {
    std::string word;
    double score = 0.0;
    Provenance provenance = Provenance::CONCEPT_DESCRIPTOR;

    friend bool operator==(const Descriptor&, const Descriptor&) = default;
};

struct ConceptVector {
    std::string concept_word;
    std::vector<Descriptor> descriptors;

    bool has(std::string_view word) const;
    friend bool operator==(const ConceptVector&, const ConceptVector&) = default;
};

struct ConceptGenOptions {
    std::size_t n_seeds = 10;
    std::size_t expansion_k = 30;
};

/// Borda merge of the corpus-level G2 and tf-idf rankings. Ties resolve lexicographically.
std::vector<std::string> extract_seed_concepts(const Corpus& corpus, std::size_t n_seeds);

/// The k nearest neighbours of `seed`, keeping only corpus vocabulary words.
ConceptVector expand_concept_vector(std::string_view seed, const EmbeddingStore& store,
                                    const CorpusStats& stats, std::size_t k);

struct ConceptEdit {
    enum class Op { ADD, REMOVE, NEW_CONCEPT };
    Op op = Op::ADD;
    std::string concept_word;
    std::string word;
};

/// JSON list of {op: "add"|"remove"|"new_concept", concept, word}.
std::vector<ConceptEdit> parse_edit_script(const nlohmann::json& j);

std::vector<ConceptVector> apply_user_edits(std::vector<ConceptVector> vectors, const std::vector<ConceptEdit>& edits);

/// Rescores every descriptor from the corpus and sorts descending. A descriptor
/// hosted by several concept vectors has its score divided by the host count.
std::vector<ConceptVector> rank_descriptors(std::vector<ConceptVector> vectors, const Corpus& corpus, ScoringFunction f);

}  // namespace cspace

#endif
