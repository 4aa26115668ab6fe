#include "cspace/spatialization.hpp"

#include "cspace/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <optional>

namespace cspace {

using json = nlohmann::json;

ProjectionInput gather_projection_input(std::vector<ConceptVector> concepts,
                                        const std::vector<std::vector<std::string>>& topic_keywords,
                                        const Corpus& corpus, const EmbeddingStore& store,
                                        const GatherOptions& options) {
    std::set<std::string> words;
    std::set<std::string> owned;
    for (const auto& c : concepts) {
        owned.insert(c.concept_word);
        for (const auto& d : c.descriptors) owned.insert(d.word);
    }
    for (const auto& w : owned) {
        if (store.contains(w)) words.insert(w);
    }
    for (const auto& t : topic_keywords) {
        for (const auto& w : t) {
            if (store.contains(w)) words.insert(w);
        }
    }

    std::vector<std::size_t> order(concepts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return concepts[a].concept_word < concepts[b].concept_word; });

    for (const auto& doc : corpus.documents) {
        if (!doc.modeled()) continue;
        const auto ranked = top_keywords(doc, std::max(options.doc_keywords, options.corpus_keywords));
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            const auto& w = ranked[r];
            if (!store.contains(w)) continue;
            if (r < options.corpus_keywords) words.insert(w);
            if (r >= options.doc_keywords || owned.count(w)) continue;
            std::optional<std::size_t> best;
            double best_sim = 0.0;
            for (const std::size_t i : order) {
                if (!store.contains(concepts[i].concept_word)) continue;
                const double s = store.cosine(w, concepts[i].concept_word);
                if (!best || s > best_sim) {
                    best = i;
                    best_sim = s;
                }
            }
            if (!best) continue;
            concepts[*best].descriptors.push_back({w, doc.keyword_vector.at(w), Provenance::TOPIC_DESCRIPTOR});
            owned.insert(w);
            words.insert(w);
        }
    }
    return {std::move(concepts), std::vector<std::string>(words.begin(), words.end())};
}

std::vector<double> stack_vectors(const EmbeddingStore& store, const std::vector<std::string>& words) {
    std::vector<double> data;
    data.reserve(words.size() * store.dim());
    for (const auto& w : words) {
        const auto v = store.vector(w);
        data.insert(data.end(), v.begin(), v.end());
    }
    return data;
}

std::map<std::string, Vec2> initial_anchor_pass(const std::vector<std::string>& words,
                                                const std::vector<std::string>& concepts,
                                                const EmbeddingStore& store, const TsneParams& params,
                                                const TsneCallback& callback) {
    const auto data = stack_vectors(store, words);
    const auto result = run_tsne(data, words.size(), store.dim(), params, {}, {}, callback);
    const std::set<std::string> wanted(concepts.begin(), concepts.end());
    std::map<std::string, Vec2> anchors;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (wanted.count(words[i])) anchors[words[i]] = {result.coords[2 * i], result.coords[2 * i + 1]};
    }
    return anchors;
}

Projection2D tsne_project(const std::vector<std::string>& words, const std::map<std::string, Vec2>& anchors,
                          const EmbeddingStore& store, const TsneParams& params, const TsneCallback& callback,
                          TsneResult* trace) {
    const std::size_t n = words.size();
    for (const auto& [a, p] : anchors) {
        if (std::find(words.begin(), words.end(), a) == words.end()) {
            throw Error(ErrorKind::UnknownWord, "anchor " + a + " is not among the projected words");
        }
    }
    const auto data = stack_vectors(store, words);
    std::vector<std::optional<std::pair<double, double>>> fixed;
    std::vector<double> init;
    if (!anchors.empty()) {
        fixed.resize(n);
        init.resize(2 * n);
        PortableGaussian jitter(params.seed + 1);
        for (std::size_t i = 0; i < n; ++i) {
            const auto it = anchors.find(words[i]);
            if (it != anchors.end()) {
                fixed[i] = std::pair{it->second.x, it->second.y};
                init[2 * i] = it->second.x;
                init[2 * i + 1] = it->second.y;
                continue;
            }
            const std::string* best = nullptr;
            double best_sim = 0.0;
            for (const auto& [a, p] : anchors) {
                const double s = store.cosine(words[i], a);
                if (!best || s > best_sim) {
                    best = &a;
                    best_sim = s;
                }
            }
            const Vec2 base = anchors.at(*best);
            init[2 * i] = base.x + jitter() * 1e-4;
            init[2 * i + 1] = base.y + jitter() * 1e-4;
        }
    }
    auto result = run_tsne(data, n, store.dim(), params, fixed, std::move(init), callback);
    Projection2D p;
    for (std::size_t i = 0; i < n; ++i) p.coords[words[i]] = {result.coords[2 * i], result.coords[2 * i + 1]};
    for (const auto& [a, pos] : anchors) p.anchors[a] = pos;
    if (trace) *trace = std::move(result);
    return p;
}

json projection_to_json(const Projection2D& canvas, const Viewport& viewport) {
    json j = json::object();
    for (const auto& [w, p] : canvas.coords) j[w] = {p.x / viewport.width, p.y / viewport.height};
    return j;
}

Projection2D projection_from_json(const json& j, const Viewport& viewport) {
    Projection2D p;
    for (const auto& [w, xy] : j.items()) {
        p.coords[w] = {xy.at(0).get<double>() * viewport.width, xy.at(1).get<double>() * viewport.height};
    }
    return p;
}

}  // namespace cspace
