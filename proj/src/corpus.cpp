#include "cspace/corpus.hpp"

#include "cspace/error.hpp"
#include "cspace/stemmer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cspace {

using json = nlohmann::json;

std::string_view to_string(ScoringFunction f) {
    switch (f) {
    case ScoringFunction::TF: return "tf";
    case ScoringFunction::TFIDF: return "tfidf";
    case ScoringFunction::LOG_LIKELIHOOD_RATIO: return "llr";
    case ScoringFunction::G2: return "g2";
    }
    return "unknown";
}

ScoringFunction parse_scoring_function(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "tf") return ScoringFunction::TF;
    if (lower == "tfidf" || lower == "tf-idf") return ScoringFunction::TFIDF;
    if (lower == "llr" || lower == "log_likelihood_ratio") return ScoringFunction::LOG_LIKELIHOOD_RATIO;
    if (lower == "g2") return ScoringFunction::G2;
    throw Error(ErrorKind::UnknownScoringKind, std::string(name));
}

const Document* Corpus::find(std::string_view id) const {
    for (const auto& doc : documents) {
        if (doc.id == id) return &doc;
    }
    return nullptr;
}

const std::set<std::string>& default_stopwords() {
    static const std::set<std::string> words = {
        "a", "about", "above", "after", "again", "against", "ain", "all", "am", "an", "and", "any", "are",
        "aren", "arent", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
        "but", "by", "can", "cant", "couldn", "couldnt", "could", "d", "did", "didn", "didnt", "do", "does",
        "doesn", "doesnt", "doing", "don", "dont", "down", "during", "each", "few", "for", "from", "further",
        "had", "hadn", "hadnt", "has", "hasn", "hasnt", "have", "haven", "havent", "having", "he", "hed",
        "hell", "her", "here", "hers", "herself", "hes", "him", "himself", "his", "how", "i", "id", "if",
        "ill", "im", "in", "into", "is", "isn", "isnt", "it", "its", "itself", "ive", "just", "ll", "m", "ma",
        "me", "mightn", "more", "most", "mustn", "my", "myself", "needn", "no", "nor", "not", "now", "o", "of",
        "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "re",
        "s", "same", "shan", "she", "shes", "should", "shouldn", "shouldnt", "so", "some", "such", "t", "than",
        "that", "thats", "the", "their", "theirs", "them", "themselves", "then", "there", "theres", "these",
        "they", "theyll", "theyre", "theyve", "this", "those", "through", "to", "too", "under", "until", "up",
        "ve", "very", "was", "wasn", "wasnt", "we", "wed", "well", "were", "weren", "werent", "weve", "what",
        "whats", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "won", "wont",
        "would", "wouldn", "wouldnt", "y", "you", "youd", "youll", "your", "youre", "yours", "yourself",
        "yourselves", "youve"};
    return words;
}

std::set<std::string> read_stopwords(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingFile, path.string());
    std::set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        std::string w;
        for (const char c : line) {
            if (!std::isspace(static_cast<unsigned char>(c))) w += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
        if (!w.empty()) words.insert(std::move(w));
    }
    return words;
}

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

bool all_digits(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// Splits into lowercase raw words. Apostrophes inside a word are dropped and a
// trailing possessive "'s" is removed ("romney's" -> "romney").
std::vector<std::string> raw_words(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&]() {
        if (cur.size() > 2 && cur.ends_with("'s")) cur.resize(cur.size() - 2);
        std::erase(cur, '\'');
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_word_byte(c)) {
            cur += static_cast<char>(std::tolower(c));
        } else if (c == '\'' && !cur.empty() && i + 1 < text.size() &&
                   is_word_byte(static_cast<unsigned char>(text[i + 1]))) {
            cur += '\'';
        } else {
            flush();
        }
    }
    flush();
    return out;
}

// Keyness of `count` occurrences in a segment of `seg_size` tokens against the
// rest of the corpus. Only over-representation scores; everything else is 0.
double g2_two_cell(double a, double seg_size, double b, double rest_size) {
    if (a <= 0.0 || seg_size <= 0.0 || rest_size <= 0.0) return 0.0;
    if (a / seg_size <= b / rest_size) return 0.0;
    const double total = seg_size + rest_size;
    const double e1 = seg_size * (a + b) / total;
    const double e2 = rest_size * (a + b) / total;
    double g = a * std::log(a / e1);
    if (b > 0.0) g += b * std::log(b / e2);
    return std::max(0.0, 2.0 * g);
}

double llr_contingency(double a, double seg_size, double b, double rest_size) {
    if (a <= 0.0 || seg_size <= 0.0 || rest_size <= 0.0) return 0.0;
    if (a / seg_size <= b / rest_size) return 0.0;
    const double n = seg_size + rest_size;
    const double obs[2][2] = {{a, seg_size - a}, {b, rest_size - b}};
    const double rows[2] = {seg_size, rest_size};
    const double cols[2] = {a + b, n - a - b};
    double g = 0.0;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double o = obs[i][j];
            if (o <= 0.0) continue;
            const double e = rows[i] * cols[j] / n;
            g += o * std::log(o / e);
        }
    }
    return std::max(0.0, 2.0 * g);
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(values.size())));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, const std::set<std::string>& stopwords, bool stem) {
    std::vector<std::string> out;
    for (auto& w : raw_words(text)) {
        if (w.size() < 2 || all_digits(w) || stopwords.count(w)) continue;
        out.push_back(stem ? porter_stem(w) : w);
    }
    return out;
}

std::string normalize_word(std::string_view word, bool stem) {
    std::string lower;
    for (const char c : word) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    // n-gram keys keep their separator; each part is normalized on its own
    if (lower.find('_') != std::string::npos) {
        std::string out;
        std::stringstream ss(lower);
        std::string part;
        while (std::getline(ss, part, '_')) {
            if (!out.empty()) out += '_';
            out += stem ? porter_stem(part) : part;
        }
        return out;
    }
    return stem ? porter_stem(lower) : lower;
}

std::vector<RawDocument> parse_jsonl(std::istream& in) {
    std::vector<RawDocument> docs;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception&) {
            throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(line_no));
        }
        if (!rec.is_object() || !rec.contains("text") || !rec["text"].is_string() || !rec.contains("id")) {
            throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(line_no));
        }
        RawDocument doc;
        const auto& id = rec["id"];
        if (id.is_string()) {
            doc.id = id.get<std::string>();
        } else if (id.is_number_integer()) {
            doc.id = std::to_string(id.get<long long>());
        } else {
            throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(line_no));
        }
        if (!seen.insert(doc.id).second) {
            throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(line_no) + ": duplicate id " + doc.id);
        }
        if (rec.contains("speaker") && rec["speaker"].is_string()) doc.speaker = rec["speaker"].get<std::string>();
        doc.text = rec["text"].get<std::string>();
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<RawDocument> read_documents(const std::filesystem::path& source) {
    namespace fs = std::filesystem;
    if (!fs::exists(source)) throw Error(ErrorKind::MissingFile, source.string());
    std::vector<RawDocument> docs;
    if (fs::is_directory(source)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(source)) {
            if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            std::ifstream in(f, std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            docs.push_back({f.filename().string(), std::nullopt, ss.str()});
        }
    } else {
        std::ifstream in(source);
        if (!in) throw Error(ErrorKind::MissingFile, source.string());
        docs = parse_jsonl(in);
    }
    return docs;
}

Corpus build_corpus(std::vector<RawDocument> raw, const CorpusOptions& options) {
    if (raw.empty()) throw Error(ErrorKind::EmptyCorpus, "no documents");
    const auto& stopwords = options.stopwords ? *options.stopwords : default_stopwords();

    Corpus corpus;
    corpus.scoring = options.scoring;
    std::map<std::string, std::map<std::string, int>> surface_counts;
    std::vector<std::vector<std::string>> unigrams;
    unigrams.reserve(raw.size());
    for (auto& r : raw) {
        std::vector<std::string> toks;
        for (auto& w : raw_words(r.text)) {
            if (w.size() < 2 || all_digits(w) || stopwords.count(w)) continue;
            std::string t = options.stem ? porter_stem(w) : w;
            ++surface_counts[t][w];
            toks.push_back(std::move(t));
        }
        unigrams.push_back(std::move(toks));
        Document doc;
        doc.id = std::move(r.id);
        doc.speaker = std::move(r.speaker);
        doc.text = std::move(r.text);
        corpus.documents.push_back(std::move(doc));
    }

    // Unigram keyness sets the admission bar for n-grams.
    const std::size_t n = unigrams.size();
    std::vector<std::map<std::string, int>> uni_counts(n);
    std::map<std::string, int> uni_total;
    double total_tokens = 0.0;
    for (std::size_t d = 0; d < n; ++d) {
        for (const auto& t : unigrams[d]) {
            ++uni_counts[d][t];
            ++uni_total[t];
        }
        total_tokens += static_cast<double>(unigrams[d].size());
    }
    auto keyness = [&](const std::vector<std::map<std::string, int>>& per_doc, const std::map<std::string, int>& totals) {
        std::map<std::string, double> best;
        for (std::size_t d = 0; d < n; ++d) {
            const double seg = static_cast<double>(unigrams[d].size());
            for (const auto& [w, c] : per_doc[d]) {
                const double g = g2_two_cell(c, seg, totals.at(w) - c, total_tokens - seg);
                auto& slot = best[w];
                slot = std::max(slot, g);
            }
        }
        return best;
    };

    std::set<std::string> admitted;
    if (options.max_ngram >= 2) {
        std::vector<double> uni_keyness;
        for (const auto& [w, g] : keyness(uni_counts, uni_total)) uni_keyness.push_back(g);
        const double bar = percentile(uni_keyness, options.ngram_percentile);

        std::vector<std::map<std::string, int>> ng_counts(n);
        std::map<std::string, int> ng_total;
        for (std::size_t d = 0; d < n; ++d) {
            const auto& toks = unigrams[d];
            for (int len = 2; len <= options.max_ngram; ++len) {
                for (std::size_t i = 0; i + static_cast<std::size_t>(len) <= toks.size(); ++i) {
                    std::string g = toks[i];
                    for (int k = 1; k < len; ++k) g += "_" + toks[i + static_cast<std::size_t>(k)];
                    ++ng_counts[d][g];
                    ++ng_total[g];
                }
            }
        }
        for (const auto& [g, k] : keyness(ng_counts, ng_total)) {
            if (ng_total[g] >= options.ngram_min_count && k > bar) admitted.insert(g);
        }
    }

    auto& stats = corpus.stats;
    stats.n_docs = n;
    for (std::size_t d = 0; d < n; ++d) {
        auto& doc = corpus.documents[d];
        const auto& toks = unigrams[d];
        doc.tokens = toks;
        if (!admitted.empty()) {
            for (int len = 2; len <= options.max_ngram; ++len) {
                for (std::size_t i = 0; i + static_cast<std::size_t>(len) <= toks.size(); ++i) {
                    std::string g = toks[i];
                    for (int k = 1; k < len; ++k) g += "_" + toks[i + static_cast<std::size_t>(k)];
                    if (admitted.count(g)) doc.tokens.push_back(std::move(g));
                }
            }
        }
        for (const auto& t : doc.tokens) ++doc.counts[t];
        for (const auto& [w, c] : doc.counts) {
            stats.vocabulary.insert(w);
            ++stats.doc_freq[w];
            stats.term_freq[w] += c;
        }
        stats.total_tokens += doc.tokens.size();
    }
    for (const auto& [stem, forms] : surface_counts) {
        const auto best = std::max_element(forms.begin(), forms.end(), [](const auto& a, const auto& b) {
            return a.second < b.second || (a.second == b.second && a.first > b.first);
        });
        stats.surface[stem] = best->first;
    }
    for (const auto& g : admitted) {
        std::string s;
        std::stringstream ss(g);
        std::string part;
        while (std::getline(ss, part, '_')) {
            if (!s.empty()) s += ' ';
            auto it = stats.surface.find(part);
            s += it != stats.surface.end() ? it->second : part;
        }
        stats.surface[g] = s;
    }

    for (auto& doc : corpus.documents) doc.keyword_vector = score_keywords(doc, stats, options.scoring);
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& source, const CorpusOptions& options) {
    return build_corpus(read_documents(source), options);
}

double idf(const CorpusStats& stats, std::string_view word) {
    const auto it = stats.doc_freq.find(std::string(word));
    if (it == stats.doc_freq.end() || it->second == 0) return 0.0;
    return std::log(static_cast<double>(stats.n_docs) / static_cast<double>(it->second));
}

double corpus_tfidf(const CorpusStats& stats, std::string_view word) {
    const auto it = stats.term_freq.find(std::string(word));
    if (it == stats.term_freq.end()) return 0.0;
    return static_cast<double>(it->second) * idf(stats, word);
}

std::map<std::string, double> score_keywords(const Document& doc, const CorpusStats& stats, ScoringFunction f) {
    std::map<std::string, double> out;
    const double seg = static_cast<double>(doc.tokens.size());
    const double rest = static_cast<double>(stats.total_tokens) - seg;
    for (const auto& [w, c] : doc.counts) {
        const auto tf_it = stats.term_freq.find(w);
        const double total = tf_it == stats.term_freq.end() ? c : tf_it->second;
        double s = 0.0;
        switch (f) {
        case ScoringFunction::TF:
            s = c;
            break;
        case ScoringFunction::TFIDF:
            s = c * idf(stats, w);
            break;
        case ScoringFunction::G2:
            s = g2_two_cell(c, seg, total - c, rest);
            break;
        case ScoringFunction::LOG_LIKELIHOOD_RATIO:
            s = llr_contingency(c, seg, total - c, rest);
            break;
        }
        out[w] = std::isfinite(s) ? std::max(0.0, s) : 0.0;
    }
    return out;
}

std::map<std::string, double> corpus_scores(const Corpus& corpus, ScoringFunction f) {
    std::map<std::string, double> out;
    for (const auto& doc : corpus.documents) {
        for (const auto& [w, s] : score_keywords(doc, corpus.stats, f)) out[w] += s;
    }
    return out;
}

std::vector<ScoredWord> rank_scores(const std::map<std::string, double>& scores) {
    std::vector<ScoredWord> out(scores.begin(), scores.end());
    std::stable_sort(out.begin(), out.end(), [](const ScoredWord& a, const ScoredWord& b) { return a.second > b.second; });
    return out;
}

std::vector<std::string> top_keywords(const std::map<std::string, double>& scores, std::size_t n) {
    auto ranked = rank_scores(scores);
    if (ranked.size() > n) ranked.resize(n);
    std::vector<std::string> out;
    out.reserve(ranked.size());
    for (auto& [w, s] : ranked) out.push_back(std::move(w));
    return out;
}

std::vector<std::string> top_keywords(const Document& doc, std::size_t n) { return top_keywords(doc.keyword_vector, n); }

std::vector<ScoredWord> rank_by_corpus_tfidf(const CorpusStats& stats) {
    std::map<std::string, double> scores;
    for (const auto& w : stats.vocabulary) scores[w] = corpus_tfidf(stats, w);
    return rank_scores(scores);
}

}  // namespace cspace
