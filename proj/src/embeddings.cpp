#include "cspace/embeddings.hpp"

#include "cspace/corpus.hpp"
#include "cspace/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>

namespace cspace {

using json = nlohmann::json;

std::string_view to_string(Level level) {
    switch (level) {
    case Level::DEMOTED: return "DEMOTED";
    case Level::BASE: return "BASE";
    case Level::DESCRIPTOR: return "DESCRIPTOR";
    case Level::CONCEPT: return "CONCEPT";
    case Level::SUPER_CONCEPT: return "SUPER_CONCEPT";
    }
    return "UNKNOWN";
}

Level parse_level(std::string_view name) {
    for (const Level l : {Level::DEMOTED, Level::BASE, Level::DESCRIPTOR, Level::CONCEPT, Level::SUPER_CONCEPT}) {
        if (to_string(l) == name) return l;
    }
    throw Error(ErrorKind::InvalidArgument, "unknown level " + std::string(name));
}

double LevelLadder::multiplier(Level level) const {
    switch (level) {
    case Level::DEMOTED: return demoted;
    case Level::BASE: return base;
    case Level::DESCRIPTOR: return descriptor;
    case Level::CONCEPT: return concept_;
    case Level::SUPER_CONCEPT: return super_concept;
    }
    return base;
}

bool LevelLadder::strictly_monotone() const {
    return 0.0 < demoted && demoted < base && base < descriptor && descriptor < concept_ && concept_ < super_concept;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = std::sqrt(dot(a, a));
    const double nb = std::sqrt(dot(b, b));
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

bool EmbeddingStore::contains(std::string_view word) const { return index_.count(std::string(word)) > 0; }

std::size_t EmbeddingStore::index_of(std::string_view word) const {
    const auto it = index_.find(std::string(word));
    if (it == index_.end()) throw Error(ErrorKind::UnknownWord, std::string(word));
    return it->second;
}

bool EmbeddingStore::add(std::string word, std::span<const double> values) {
    if (dim_ == 0) dim_ = values.size();
    if (values.size() != dim_) {
        throw Error(ErrorKind::DimensionMismatch,
                    word + ": expected " + std::to_string(dim_) + " values, got " + std::to_string(values.size()));
    }
    if (index_.count(word)) return false;
    double norm = std::sqrt(dot(values, values));
    index_.emplace(word, words_.size());
    words_.push_back(std::move(word));
    for (const double v : values) data_.push_back(norm > 0.0 ? v / norm : 0.0);
    return true;
}

std::vector<double> pseudo_random_unit_vector(std::string_view word, std::size_t dim) {
    // FNV-1a over the word bytes seeds the generator.
    std::uint64_t h = 1469598103934665603ULL;
    for (const char c : word) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    std::mt19937_64 rng(h);
    std::vector<double> v(dim);
    double norm2 = 0.0;
    while (norm2 == 0.0) {
        norm2 = 0.0;
        for (auto& x : v) {
            // Uniform in [-1, 1) from the top 53 bits; portable across standard libraries.
            x = static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0;
            norm2 += x * x;
        }
    }
    const double norm = std::sqrt(norm2);
    for (auto& x : v) x /= norm;
    return v;
}

void EmbeddingStore::ensure(std::string_view word) {
    if (contains(word)) return;
    if (dim_ == 0) throw Error(ErrorKind::DimensionMismatch, "store has no dimensionality");
    const auto v = pseudo_random_unit_vector(word, dim_);
    add(std::string(word), v);
}

std::span<const double> EmbeddingStore::vector(std::string_view word) const {
    const std::size_t i = index_of(word);
    return {data_.data() + i * dim_, dim_};
}

double EmbeddingStore::cosine(std::string_view a, std::string_view b) const {
    if (a == b) {
        index_of(a);
        return 1.0;
    }
    return std::clamp(dot(vector(a), vector(b)), -1.0, 1.0);
}

std::vector<std::pair<std::string, double>> EmbeddingStore::nearest_to(
    std::span<const double> query, std::size_t k, const std::function<bool(const std::string&)>& accept) const {
    std::vector<std::pair<std::string, double>> all;
    all.reserve(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i) {
        if (accept && !accept(words_[i])) continue;
        const double s = std::clamp(dot(query, {data_.data() + i * dim_, dim_}), -1.0, 1.0);
        all.emplace_back(words_[i], s);
    }
    const auto cmp = [](const auto& a, const auto& b) { return a.second > b.second || (a.second == b.second && a.first < b.first); };
    const std::size_t m = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m), all.end(), cmp);
    all.resize(m);
    return all;
}

std::vector<std::pair<std::string, double>> EmbeddingStore::nearest_neighbors(
    std::string_view word, std::size_t k, const std::function<bool(const std::string&)>& accept) const {
    const auto q = vector(word);
    const std::string self(word);
    return nearest_to(q, k, [&](const std::string& w) { return w != self && (!accept || accept(w)); });
}

EmbeddingStore EmbeddingStore::restrict_to(const std::set<std::string>& vocabulary, std::size_t expansion_k) const {
    std::set<std::string> keep;
    for (const auto& w : vocabulary) {
        if (!contains(w)) continue;
        keep.insert(w);
        if (expansion_k > 0) {
            for (auto& [n, s] : nearest_neighbors(w, expansion_k)) keep.insert(n);
        }
    }
    EmbeddingStore out(dim_);
    // Preserve file order.
    for (const auto& w : words_) {
        if (keep.count(w)) out.add(w, vector(w));
    }
    return out;
}

EmbeddingStore read_embeddings(std::istream& in, bool normalize_keys) {
    EmbeddingStore store;
    std::string line;
    std::size_t row = 0;
    bool first = true;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string word;
        if (!(ss >> word)) continue;
        values.clear();
        std::string tok;
        bool numeric = true;
        while (ss >> tok) {
            char* end = nullptr;
            const double v = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str() || *end != '\0') {
                numeric = false;
                break;
            }
            values.push_back(v);
        }
        if (first) {
            first = false;
            // `count dim` header
            const bool header = values.size() == 1 && word.find_first_not_of("0123456789") == std::string::npos &&
                                std::floor(values[0]) == values[0];
            if (header) continue;
        }
        if (!numeric || values.empty()) {
            throw Error(ErrorKind::DimensionMismatch, "row " + std::to_string(row) + ": non-numeric or empty vector");
        }
        if (store.dim() != 0 && values.size() != store.dim()) {
            throw Error(ErrorKind::DimensionMismatch, "row " + std::to_string(row) + ": expected " +
                                                          std::to_string(store.dim()) + " values, got " +
                                                          std::to_string(values.size()));
        }
        store.add(normalize_keys ? normalize_word(word) : word, values);
    }
    return store;
}

EmbeddingStore load_embeddings(const std::filesystem::path& path, bool normalize_keys) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingFile, path.string());
    return read_embeddings(in, normalize_keys);
}

std::vector<double> centroid(const EmbeddingStore& store, const std::vector<std::string>& words) {
    std::vector<double> c(store.dim(), 0.0);
    for (const auto& w : words) {
        if (!store.contains(w)) continue;
        const auto v = store.vector(w);
        for (std::size_t i = 0; i < c.size(); ++i) c[i] += v[i];
    }
    const double n = std::sqrt(dot(c, c));
    if (n > 0.0) {
        for (auto& x : c) x /= n;
    }
    return c;
}

bool WeightTable::contains(std::string_view word) const { return entries_.find(word) != entries_.end(); }

WeightedWordVector& WeightTable::insert(std::string word, double base_score) {
    auto [it, inserted] = entries_.try_emplace(word);
    auto& e = it->second;
    if (inserted) {
        e.word = word;
        e.level = Level::BASE;
        e.level_multiplier = ladder_.multiplier(Level::BASE);
        e.relevance["GLOBAL"] = e.level_multiplier;
        const auto f = foreign_.find(word);
        if (f != foreign_.end()) {
            e.relevance["GLOBAL"] = f->second.first;
            e.level_multiplier = f->second.second;
            foreign_.erase(f);
        }
    }
    e.base_score = base_score;
    e.relevance["CORPUS"] = base_score;
    return e;
}

const WeightedWordVector& WeightTable::at(std::string_view word) const {
    const auto it = entries_.find(word);
    if (it == entries_.end()) throw Error(ErrorKind::UnknownWord, std::string(word));
    return it->second;
}

const WeightedWordVector& WeightTable::set_level_multiplier(std::string_view word, Level level) {
    const auto it = entries_.find(word);
    if (it == entries_.end()) throw Error(ErrorKind::UnknownWord, std::string(word));
    it->second.level = level;
    it->second.level_multiplier = ladder_.multiplier(level);
    it->second.relevance["GLOBAL"] = it->second.level_multiplier;
    return it->second;
}

void WeightTable::set_multiplier_value(std::string_view word, double multiplier) {
    const auto it = entries_.find(word);
    if (it == entries_.end()) throw Error(ErrorKind::UnknownWord, std::string(word));
    if (!(multiplier > 0.0)) throw Error(ErrorKind::InvalidArgument, "multiplier must be positive");
    it->second.level_multiplier = multiplier;
}

double WeightTable::multiplier(std::string_view word) const {
    const auto it = entries_.find(word);
    return it == entries_.end() ? ladder_.base : it->second.level_multiplier;
}

json WeightTable::export_learned() const {
    json j = json::object();
    for (const auto& [w, e] : entries_) {
        const auto g = e.relevance.find("GLOBAL");
        j[w] = {{"global_relevance", g == e.relevance.end() ? e.level_multiplier : g->second},
                {"level_multiplier", e.level_multiplier}};
    }
    for (const auto& [w, v] : foreign_) j[w] = {{"global_relevance", v.first}, {"level_multiplier", v.second}};
    return j;
}

void WeightTable::import_learned(const json& j) {
    if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "learned weights must be a JSON object");
    for (const auto& [w, v] : j.items()) {
        const double mult = v.value("level_multiplier", ladder_.base);
        const double global = v.value("global_relevance", mult);
        if (!(mult > 0.0) || !std::isfinite(global)) {
            throw Error(ErrorKind::InvalidArgument, "invalid learned weight for " + w);
        }
        const auto it = entries_.find(w);
        if (it == entries_.end()) {
            foreign_[w] = {global, mult};
            continue;
        }
        it->second.level_multiplier = mult;
        it->second.relevance["GLOBAL"] = global;
    }
}

}  // namespace cspace
