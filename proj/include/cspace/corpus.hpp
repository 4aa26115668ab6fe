#ifndef CSPACE_CORPUS_HPP
#define CSPACE_CORPUS_HPP

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

/**
 * @file corpus.hpp
 * @brief Document ingestion, normalization and keyword scoring.
 */

namespace cspace {

enum class ScoringFunction { TF, TFIDF, LOG_LIKELIHOOD_RATIO, G2 };

std::string_view to_string(ScoringFunction f);

/// Accepts "tf", "tfidf", "llr"/"log_likelihood_ratio" and "g2" (case-insensitive).
ScoringFunction parse_scoring_function(std::string_view name);

struct RawDocument {
    std::string id;
    std::optional<std::string> speaker;
    std::string text;
};

struct Document {
    std::string id;
    std::optional<std::string> speaker;
    std::string text;
    /// Normalized unigrams in reading order, followed by every admitted n-gram occurrence.
    std::vector<std::string> tokens;
    std::map<std::string, int> counts;
    std::map<std::string, double> keyword_vector;

    bool modeled() const { return !tokens.empty(); }
};

struct CorpusStats {
    std::set<std::string> vocabulary;
    std::map<std::string, int> doc_freq;
    std::map<std::string, int> term_freq;
    std::size_t n_docs = 0;
    std::size_t total_tokens = 0;
    /// Most frequent lowercase surface form observed for each normalized token.
    std::map<std::string, std::string> surface;
};

struct CorpusOptions {
    bool stem = true;
    /// Replaces the embedded English list when set.
    std::optional<std::set<std::string>> stopwords;
    int max_ngram = 3;
    /// N-grams must exceed this percentile of unigram keyness to be admitted.
    double ngram_percentile = 0.95;
    int ngram_min_count = 2;
    ScoringFunction scoring = ScoringFunction::G2;
};

struct Corpus {
    std::vector<Document> documents;
    CorpusStats stats;
    ScoringFunction scoring = ScoringFunction::G2;

    const Document* find(std::string_view id) const;
};

const std::set<std::string>& default_stopwords();
std::set<std::string> read_stopwords(const std::filesystem::path& path);

/// Lowercases, strips punctuation, drops stop words and (optionally) stems.
std::vector<std::string> tokenize(std::string_view text, const std::set<std::string>& stopwords, bool stem);

/// Normalization applied to a single external word (embedding rows, search queries).
std::string normalize_word(std::string_view word, bool stem = true);

/// Parses JSON-lines records {"id", "speaker", "text"}. Throws MalformedRecord(line).
std::vector<RawDocument> parse_jsonl(std::istream& in);

std::vector<RawDocument> read_documents(const std::filesystem::path& source);

/// Tokenizes, extracts n-grams, accumulates statistics and fills every keyword_vector.
Corpus build_corpus(std::vector<RawDocument> raw, const CorpusOptions& options = {});

/// Reads a directory of .txt files or a JSON-lines file.
Corpus load_corpus(const std::filesystem::path& source, const CorpusOptions& options = {});

/// Per-document scores for every distinct token of `doc`. All scores are finite and >= 0.
std::map<std::string, double> score_keywords(const Document& doc, const CorpusStats& stats, ScoringFunction f);

double idf(const CorpusStats& stats, std::string_view word);

/// term_freq(w) * ln(n_docs / doc_freq(w)).
double corpus_tfidf(const CorpusStats& stats, std::string_view word);

/// Sum over documents of the per-document score.
std::map<std::string, double> corpus_scores(const Corpus& corpus, ScoringFunction f);

using ScoredWord = std::pair<std::string, double>;

/// Descending by score, ascending by word on ties.
std::vector<ScoredWord> rank_scores(const std::map<std::string, double>& scores);

std::vector<std::string> top_keywords(const Document& doc, std::size_t n = 15);
std::vector<std::string> top_keywords(const std::map<std::string, double>& scores, std::size_t n);

/// Corpus vocabulary ordered by corpus_tfidf, descending.
std::vector<ScoredWord> rank_by_corpus_tfidf(const CorpusStats& stats);

}  // namespace cspace

#endif
