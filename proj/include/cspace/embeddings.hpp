#ifndef CSPACE_EMBEDDINGS_HPP
#define CSPACE_EMBEDDINGS_HPP

#include <cstddef>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace cspace {

/// Hierarchy level of a word, ordered by influence on topic-model weighting.
enum class Level { DEMOTED, BASE, DESCRIPTOR, CONCEPT, SUPER_CONCEPT };

std::string_view to_string(Level level);
Level parse_level(std::string_view name);

struct LevelLadder {
    double demoted = 0.25;
    double base = 1.0;
    double descriptor = 1.5;
    double concept_ = 2.5;
    double super_concept = 4.0;

    double multiplier(Level level) const;
    /// True when DEMOTED < BASE < DESCRIPTOR < CONCEPT < SUPER_CONCEPT.
    bool strictly_monotone() const;
};

/// Unit-normalized word vectors of a single dimensionality. Immutable once
/// handed to a session; all queries are const and thread-safe.
class EmbeddingStore {
public:
    explicit EmbeddingStore(std::size_t dim = 0) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return words_.size(); }
    bool empty() const { return words_.empty(); }
    bool contains(std::string_view word) const;
    const std::vector<std::string>& words() const { return words_; }

    /// Stores `values / ||values||`. An existing entry is left untouched and false returned.
    bool add(std::string word, std::span<const double> values);

    /// Adds the deterministic pseudo-random vector for `word` if it is absent.
    void ensure(std::string_view word);

    std::span<const double> vector(std::string_view word) const;

    double cosine(std::string_view a, std::string_view b) const;

    /// k most similar other words, similarity descending, word ascending on ties.
    std::vector<std::pair<std::string, double>> nearest_neighbors(
        std::string_view word, std::size_t k,
        const std::function<bool(const std::string&)>& accept = {}) const;

    std::vector<std::pair<std::string, double>> nearest_to(
        std::span<const double> query, std::size_t k,
        const std::function<bool(const std::string&)>& accept = {}) const;

    /// Keeps `vocabulary` words plus, for each of them, its `expansion_k`
    /// nearest neighbours from the full store.
    EmbeddingStore restrict_to(const std::set<std::string>& vocabulary, std::size_t expansion_k) const;

private:
    std::size_t index_of(std::string_view word) const;

    std::size_t dim_;
    std::vector<std::string> words_;
    std::vector<double> data_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Text format: `word f1 ... fd` per line; an optional `count dim` header is skipped.
/// When `normalize_keys` is set every word passes through normalize_word and the
/// first row wins on collisions.
EmbeddingStore read_embeddings(std::istream& in, bool normalize_keys = false);
EmbeddingStore load_embeddings(const std::filesystem::path& path, bool normalize_keys = false);

std::vector<double> pseudo_random_unit_vector(std::string_view word, std::size_t dim);

double dot(std::span<const double> a, std::span<const double> b);
/// Normalized mean of the given words' vectors (zero vector when none is known).
std::vector<double> centroid(const EmbeddingStore& store, const std::vector<std::string>& words);
double cosine(std::span<const double> a, std::span<const double> b);

struct WeightedWordVector {
    std::string word;
    double base_score = 1.0;
    Level level = Level::BASE;
    double level_multiplier = 1.0;
    /// Keys: "CORPUS", "GLOBAL", "concept:<id>", "topic:<id>", "doc:<id>".
    std::map<std::string, double> relevance;

    double effective_weight() const { return base_score * level_multiplier; }
};

/// Per-word weights shared by both hierarchies. Mutated only by the session writer.
class WeightTable {
public:
    explicit WeightTable(LevelLadder ladder = {}) : ladder_(ladder) {}

    const LevelLadder& ladder() const { return ladder_; }
    bool contains(std::string_view word) const;
    WeightedWordVector& insert(std::string word, double base_score);
    const WeightedWordVector& at(std::string_view word) const;

    /// Throws UnknownWord.
    const WeightedWordVector& set_level_multiplier(std::string_view word, Level level);
    void set_multiplier_value(std::string_view word, double multiplier);

    double multiplier(std::string_view word) const;

    const std::map<std::string, WeightedWordVector, std::less<>>& entries() const { return entries_; }

    /// {word: {global_relevance, level_multiplier}}
    nlohmann::json export_learned() const;
    /// Applies imported values to known words; unknown words are kept for GLOBAL export only.
    void import_learned(const nlohmann::json& j);

private:
    LevelLadder ladder_;
    std::map<std::string, WeightedWordVector, std::less<>> entries_;
    std::map<std::string, std::pair<double, double>, std::less<>> foreign_;
};

}  // namespace cspace

#endif
