#include "cspace/conceptgen.hpp"

#include "cspace/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>

namespace cspace {

using json = nlohmann::json;

std::string_view to_string(Provenance p) {
    switch (p) {
    case Provenance::CONCEPT_DESCRIPTOR: return "CONCEPT_DESCRIPTOR";
    case Provenance::TOPIC_DESCRIPTOR: return "TOPIC_DESCRIPTOR";
    case Provenance::USER_DEFINED: return "USER_DEFINED";
    }
    return "UNKNOWN";
}

Provenance parse_provenance(std::string_view name) {
    for (const auto p : {Provenance::CONCEPT_DESCRIPTOR, Provenance::TOPIC_DESCRIPTOR, Provenance::USER_DEFINED}) {
        if (to_string(p) == name) return p;
    }
    throw Error(ErrorKind::InvalidArgument, "unknown provenance " + std::string(name));
}

bool ConceptVector::has(std::string_view word) const {
    return std::any_of(descriptors.begin(), descriptors.end(), [&](const Descriptor& d) { return d.word == word; });
}

std::vector<std::string> extract_seed_concepts(const Corpus& corpus, std::size_t n_seeds) {
    if (corpus.documents.empty() || corpus.stats.vocabulary.empty()) {
        throw Error(ErrorKind::EmptyCorpus, "no vocabulary to seed concepts from");
    }
    const auto g2 = rank_scores(corpus_scores(corpus, ScoringFunction::G2));
    const auto tfidf = rank_by_corpus_tfidf(corpus.stats);
    const auto v = static_cast<long>(corpus.stats.vocabulary.size());
    std::map<std::string, long> points;
    for (std::size_t r = 0; r < g2.size(); ++r) points[g2[r].first] += v - static_cast<long>(r);
    for (std::size_t r = 0; r < tfidf.size(); ++r) points[tfidf[r].first] += v - static_cast<long>(r);

    std::vector<std::pair<std::string, long>> merged(points.begin(), points.end());
    std::stable_sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (merged.size() > n_seeds) merged.resize(n_seeds);
    std::vector<std::string> out;
    for (auto& [w, p] : merged) out.push_back(std::move(w));
    return out;
}

ConceptVector expand_concept_vector(std::string_view seed, const EmbeddingStore& store, const CorpusStats& stats,
                                    std::size_t k) {
    ConceptVector v;
    v.concept_word = std::string(seed);
    const auto neighbors =
        store.nearest_neighbors(seed, k, [&](const std::string& w) { return stats.vocabulary.count(w) > 0; });
    for (const auto& [w, s] : neighbors) v.descriptors.push_back({w, s, Provenance::CONCEPT_DESCRIPTOR});
    return v;
}

std::vector<ConceptEdit> parse_edit_script(const json& j) {
    if (!j.is_array()) throw Error(ErrorKind::InvalidArgument, "edit script must be a JSON list");
    std::vector<ConceptEdit> edits;
    for (const auto& e : j) {
        ConceptEdit edit;
        const auto op = e.at("op").get<std::string>();
        if (op == "add") {
            edit.op = ConceptEdit::Op::ADD;
        } else if (op == "remove") {
            edit.op = ConceptEdit::Op::REMOVE;
        } else if (op == "new_concept") {
            edit.op = ConceptEdit::Op::NEW_CONCEPT;
        } else {
            throw Error(ErrorKind::InvalidArgument, "unknown edit op " + op);
        }
        edit.concept_word = e.at("concept").get<std::string>();
        edit.word = e.value("word", std::string());
        edits.push_back(std::move(edit));
    }
    return edits;
}

std::vector<ConceptVector> apply_user_edits(std::vector<ConceptVector> vectors, const std::vector<ConceptEdit>& edits) {
    auto find = [&](const std::string& c) {
        return std::find_if(vectors.begin(), vectors.end(), [&](const ConceptVector& v) { return v.concept_word == c; });
    };
    for (const auto& e : edits) {
        if (e.op == ConceptEdit::Op::NEW_CONCEPT) {
            if (find(e.concept_word) != vectors.end()) {
                throw Error(ErrorKind::DuplicateDescriptor, "concept " + e.concept_word + " already exists");
            }
            ConceptVector v;
            v.concept_word = e.concept_word;
            if (!e.word.empty() && e.word != e.concept_word) {
                v.descriptors.push_back({e.word, 0.0, Provenance::USER_DEFINED});
            }
            vectors.push_back(std::move(v));
            continue;
        }
        auto it = find(e.concept_word);
        if (it == vectors.end()) throw Error(ErrorKind::UnknownConcept, e.concept_word);
        if (e.op == ConceptEdit::Op::ADD) {
            if (e.word == it->concept_word || it->has(e.word)) {
                throw Error(ErrorKind::DuplicateDescriptor, e.word + " already describes " + e.concept_word);
            }
            it->descriptors.push_back({e.word, 0.0, Provenance::USER_DEFINED});
        } else {
            auto& ds = it->descriptors;
            const auto before = ds.size();
            std::erase_if(ds, [&](const Descriptor& d) { return d.word == e.word; });
            if (ds.size() == before) throw Error(ErrorKind::UnknownTarget, e.word + " is not a descriptor of " + e.concept_word);
        }
    }
    return vectors;
}

std::vector<ConceptVector> rank_descriptors(std::vector<ConceptVector> vectors, const Corpus& corpus, ScoringFunction f) {
    const auto scores = corpus_scores(corpus, f);
    std::map<std::string, int> hosts;
    for (const auto& v : vectors) {
        for (const auto& d : v.descriptors) ++hosts[d.word];
    }
    for (auto& v : vectors) {
        for (auto& d : v.descriptors) {
            const auto it = scores.find(d.word);
            const double s = it == scores.end() ? 0.0 : it->second;
            d.score = s / hosts[d.word];
        }
        std::stable_sort(v.descriptors.begin(), v.descriptors.end(), [](const Descriptor& a, const Descriptor& b) {
            return a.score > b.score || (a.score == b.score && a.word < b.word);
        });
    }
    return vectors;
}

}  // namespace cspace
