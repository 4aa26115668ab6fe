#include "fixtures.hpp"

#include "cspace/layout.hpp"
#include "cspace/spatialization.hpp"
#include "cspace/tsne.hpp"

#include <algorithm>
#include <cmath>

namespace cspace::fixtures {

void VectorBuilder::add(const std::string& word, const std::vector<std::pair<std::string, double>>& parts) {
    for (const auto& [axis, v] : parts) {
        if (std::find(axes_.begin(), axes_.end(), axis) == axes_.end()) axes_.push_back(axis);
    }
    words_.emplace_back(word, parts);
}

EmbeddingStore VectorBuilder::build() const {
    const std::size_t dim = axes_.size() + words_.size();
    EmbeddingStore store(dim);
    for (std::size_t i = 0; i < words_.size(); ++i) {
        std::vector<double> v(dim, 0.0);
        double used = 0.0;
        for (const auto& [axis, c] : words_[i].second) {
            const auto a = static_cast<std::size_t>(std::find(axes_.begin(), axes_.end(), axis) - axes_.begin());
            v[a] = c;
            used += c * c;
        }
        v[axes_.size() + i] = std::sqrt(std::max(0.0, 1.0 - used));
        store.add(words_[i].first, v);
    }
    return store;
}

Corpus small_corpus(const std::vector<std::string>& texts, ScoringFunction scoring) {
    std::vector<RawDocument> raw;
    for (std::size_t i = 0; i < texts.size(); ++i) raw.push_back({"d" + std::to_string(i), std::nullopt, texts[i]});
    CorpusOptions opt;
    opt.stem = false;
    opt.max_ngram = 1;
    opt.scoring = scoring;
    return build_corpus(std::move(raw), opt);
}

namespace {

std::map<std::string, double> tfidf_scores(const Corpus& c) {
    std::map<std::string, double> s;
    for (const auto& w : c.stats.vocabulary) s[w] = corpus_tfidf(c.stats, w);
    return s;
}

}  // namespace

Scene make_scene(Corpus corpus, EmbeddingStore store, std::map<std::string, Vec2> positions,
                 const std::map<std::string, std::vector<std::string>>& concepts) {
    Scene s;
    s.corpus = std::move(corpus);
    s.store = std::move(store);
    for (const auto& [w, p] : positions) s.canvas.coords[w] = p;
    s.qt = QuadTree(s.canvas);
    s.scores = tfidf_scores(s.corpus);
    ConceptHierarchy h;
    for (const auto& [c, ds] : concepts) {
        ConceptNode node;
        node.word = c;
        node.score = s.scores.count(c) ? s.scores.at(c) : 0.0;
        for (const auto& d : ds) node.descriptors.push_back({d, s.store.cosine(c, d), Provenance::CONCEPT_DESCRIPTOR});
        h.concepts.emplace(c, std::move(node));
    }
    for (const auto& [w, p] : s.canvas.coords) {
        if (!h.contains(w)) h.base_words.insert(w);
    }
    s.hierarchy = rebuild_super_concepts(std::move(h), s.canvas, s.store, s.params);
    return s;
}

ToyResult toy() {
    VectorBuilder vb;
    vb.add("medical", {{"M", 1.0}});
    vb.add("taxes", {{"T", 1.0}});
    vb.add("healthcare", {{"M", 0.8}});
    vb.add("health", {{"M", 0.75}});
    vb.add("care", {{"M", 0.7}});
    vb.add("affordable", {{"M", 0.65}});
    vb.add("system", {{"M", 0.3}});
    vb.add("cuts", {{"T", 0.8}});
    vb.add("deductions", {{"T", 0.75}});
    vb.add("spending", {{"T", 0.7}});
    vb.add("company", {{"T", 0.65}});
    vb.add("money", {{"T", 0.38}});
    vb.add("relief", {{"M", 0.35}, {"T", 0.35}});
    for (const char* w : {"debate", "tonight", "question", "answer", "people", "country", "president", "governor",
                          "plan", "years", "number", "million", "percent", "federal", "state", "government",
                          "believe", "america"}) {
        vb.add(w);
    }

    ToyResult r;
    Scene& s = r.scene;
    s.store = vb.build();
    s.corpus = small_corpus({
        "the company wants spending cuts and taxes deductions",
        "affordable care matters for health and the medical system",
        "money and relief for the country",
        "tonight the president answers a question from the debate",
        "the governor has a plan for america",
        "million people in every state believe",
        "federal government percent number years",
        "an answer about healthcare",
    });
    s.scores = tfidf_scores(s.corpus);

    auto cv = [&](const std::string& c, const std::vector<std::string>& ds) {
        ConceptVector v;
        v.concept_word = c;
        for (const auto& d : ds) v.descriptors.push_back({d, s.store.cosine(c, d), Provenance::CONCEPT_DESCRIPTOR});
        return v;
    };
    r.initial = {cv("medical", {"system", "health", "relief", "care"}), cv("taxes", {"deductions", "money", "cuts", "relief"})};
    const auto edited = apply_user_edits(r.initial, {{ConceptEdit::Op::ADD, "medical", "healthcare"}});
    const auto input = gather_projection_input(edited, {}, s.corpus, s.store);
    r.gathered = input.concepts;

    TsneParams tp;
    std::vector<std::string> concept_words;
    for (const auto& c : input.concepts) concept_words.push_back(c.concept_word);
    const auto anchors = initial_anchor_pass(input.words, concept_words, s.store, tp);
    const auto raw = tsne_project(input.words, anchors, s.store, tp);
    const Viewport vp;
    s.canvas = rescale(raw, vp.rect());
    s.qt = QuadTree(s.canvas);
    s.hierarchy = build_hierarchy(r.gathered, s.canvas, s.qt, s.store, s.params, s.scores);
    return r;
}

Scene planted(bool with_defect) {
    VectorBuilder vb;
    vb.add("energy", {{"E", 1.0}});
    for (const char* w : {"oil", "gas", "coal", "drilling"}) vb.add(w, {{"E", 0.8}});
    vb.add("health", {{"H", 1.0}});
    for (const char* w : {"insurance", "doctors", "hospital", "patients"}) vb.add(w, {{"H", 0.8}});
    if (with_defect) vb.add("medicare", {{"E", 0.1}, {"H", 0.8}});

    std::map<std::string, Vec2> pos{{"energy", {25, 25}},   {"oil", {22, 27}},      {"gas", {28, 23}},
                                    {"coal", {23, 21}},     {"drilling", {27, 29}}, {"health", {75, 75}},
                                    {"insurance", {72, 72}}, {"doctors", {78, 73}}, {"hospital", {73, 79}},
                                    {"patients", {77, 77}}};
    std::vector<std::string> energy{"oil", "gas", "coal", "drilling"};
    if (with_defect) {
        pos["medicare"] = {72, 78};
        energy.push_back("medicare");
    }
    auto corpus = small_corpus({
        "oil gas coal drilling energy",
        "energy oil drilling",
        "coal gas energy prices",
        "health insurance doctors hospital patients",
        "doctors hospital insurance",
        "medicare patients health",
        "medicare for seniors",
        "tonight debate question",
    });
    return make_scene(std::move(corpus), vb.build(), std::move(pos),
                      {{"energy", energy}, {"health", {"insurance", "doctors", "hospital", "patients"}}});
}

Scene swap_scene() {
    VectorBuilder vb;
    vb.add("economy", {{"X", 0.5}});
    vb.add("jobs", {{"X", 0.95}});
    for (const char* w : {"growth", "wages", "market", "trade"}) vb.add(w, {{"X", 0.6}});
    std::map<std::string, Vec2> pos{{"economy", {50, 50}}, {"jobs", {52, 50}},  {"growth", {47, 53}},
                                    {"wages", {53, 54}},   {"market", {46, 47}}, {"trade", {54, 46}}};
    auto corpus = small_corpus({
        "economy jobs growth",
        "jobs wages market",
        "trade growth jobs",
        "economy market trade wages",
        "tonight debate question",
    });
    return make_scene(std::move(corpus), vb.build(), std::move(pos),
                      {{"economy", {"jobs", "growth", "wages", "market", "trade"}}});
}

Scene teach() {
    VectorBuilder vb;
    vb.add("budget", {{"A", 1.0}});
    vb.add("deficit", {{"A", 0.8}});
    vb.add("school");
    vb.add("teacher");
    std::map<std::string, Vec2> pos{{"budget", {20, 50}}, {"deficit", {25, 50}}, {"school", {80, 50}}, {"teacher", {75, 50}}};
    auto corpus = small_corpus({"budget deficit budget deficit", "teacher school teacher school", "budget deficit teacher teacher"},
                               ScoringFunction::TF);
    return make_scene(std::move(corpus), vb.build(), std::move(pos), {{"budget", {"deficit"}}, {"school", {"teacher"}}});
}

}  // namespace cspace::fixtures
