#include "cspace/topicmodel.hpp"

#include "cspace/error.hpp"
#include "cspace/hash.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace cspace {

using json = nlohmann::json;

double sparse_dot(const KeywordVector& a, const KeywordVector& b) {
    const auto& small = a.size() <= b.size() ? a : b;
    const auto& large = a.size() <= b.size() ? b : a;
    double s = 0.0;
    for (const auto& [w, v] : small) {
        const auto it = large.find(w);
        if (it != large.end()) s += v * it->second;
    }
    return s;
}

double sparse_cosine(const KeywordVector& a, const KeywordVector& b) {
    const double na = std::sqrt(sparse_dot(a, a)), nb = std::sqrt(sparse_dot(b, b));
    if (na == 0.0 || nb == 0.0) return 0.0;
    return sparse_dot(a, b) / (na * nb);
}

void TopicOptions::validate() const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw Error(ErrorKind::InvalidArgument, "tau must lie in [0, 1]");
    if (doc_keywords == 0 || top_keywords == 0) throw Error(ErrorKind::InvalidArgument, "keyword counts must be positive");
}

namespace {

std::vector<std::pair<std::string, double>> top_entries(const std::map<std::string, double>& m, std::size_t n) {
    std::vector<std::pair<std::string, double>> v;
    for (const auto& [w, s] : m) {
        if (s > 0.0) v.emplace_back(w, s);
    }
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        return a.second > b.second || (a.second == b.second && a.first < b.first);
    });
    if (v.size() > n) v.resize(n);
    return v;
}

}  // namespace

KeywordVector doc_vector(const Document& doc, const WeightTable& weights, std::size_t n) {
    auto top = top_entries(doc.keyword_vector, n);
    if (top.empty()) {
        std::map<std::string, double> counts;
        for (const auto& [w, c] : doc.counts) counts[w] = c;
        top = top_entries(counts, n);
    }
    KeywordVector v;
    for (const auto& [w, s] : top) v[w] = s * weights.multiplier(w);
    return v;
}

const Topic& TopicHierarchy::topic(int id) const {
    for (const auto& t : topics) {
        if (t.id == id) return t;
    }
    throw Error(ErrorKind::UnknownTarget, "no topic " + std::to_string(id));
}

std::set<std::string> TopicHierarchy::keywords() const {
    std::set<std::string> out;
    for (const auto& [d, v] : doc_vectors) {
        for (const auto& [w, x] : v) out.insert(w);
    }
    return out;
}

TopicHierarchy train(const Corpus& corpus, const WeightTable& weights, const TopicOptions& options,
                     const TrainCallback& callback) {
    options.validate();
    TopicHierarchy tm;
    const std::size_t total = corpus.documents.size();
    std::size_t processed = 0;
    for (const auto& doc : corpus.documents) {
        ++processed;
        if (doc.modeled()) {
            auto v = doc_vector(doc, weights, options.doc_keywords);
            int best = -1;
            double best_sim = 0.0;
            for (const auto& t : tm.topics) {
                const double s = sparse_cosine(v, t.centroid);
                if (best < 0 || s > best_sim) {
                    best = t.id;
                    best_sim = s;
                }
            }
            if (best < 0 || best_sim < options.tau) {
                Topic t;
                t.id = static_cast<int>(tm.topics.size());
                tm.topics.push_back(std::move(t));
                best = tm.topics.back().id;
            }
            auto& t = tm.topics[static_cast<std::size_t>(best)];
            t.docs.push_back(doc.id);
            for (const auto& [w, x] : v) t.centroid[w] += x;
            tm.assignment[doc.id] = best;
            tm.doc_vectors[doc.id] = std::move(v);
        }
        if (callback && !callback({processed, total})) throw Error(ErrorKind::Cancelled, "topic training cancelled");
    }
    for (auto& t : tm.topics) t.top_keywords = top_entries(t.centroid, options.top_keywords);
    for (const auto& [d, v] : tm.doc_vectors) {
        double best = 0.0, second = 0.0;
        for (const auto& t : tm.topics) {
            const double s = sparse_cosine(v, t.centroid);
            if (s > best) {
                second = best;
                best = s;
            } else if (s > second) {
                second = s;
            }
        }
        tm.certainty[d] = best - second;
    }
    return tm;
}

WeightTable reweight_from_concepts(const ConceptHierarchy& h, WeightTable weights) {
    auto words = h.words();
    words.insert(h.demoted.begin(), h.demoted.end());
    for (const auto& w : words) {
        if (!weights.contains(w)) weights.insert(w, 1.0);
        weights.set_level_multiplier(w, h.level_of(w));
    }
    return weights;
}

std::optional<Vec2> owner_position(const KeywordVector& v, const Projection2D& canvas) {
    double wsum = 0.0;
    Vec2 acc;
    for (const auto& [w, x] : v) {
        if (!canvas.contains(w) || !(x > 0.0)) continue;
        acc = acc + x * canvas.at(w);
        wsum += x;
    }
    if (wsum == 0.0) return std::nullopt;
    return (1.0 / wsum) * acc;
}

Spike make_spike(Vec2 owner, Vec2 concept_position, double similarity) {
    Spike s;
    s.concept_position = concept_position;
    s.similarity = similarity;
    s.opacity = similarity;
    s.distance = distance(owner, concept_position);
    s.endpoint_distance = similarity * s.distance;
    s.endpoint = owner + similarity * (concept_position - owner);
    if (s.distance > 0.0) s.direction = (1.0 / s.distance) * (concept_position - owner);
    return s;
}

TopicGlyph glyph(const std::string& owner, const KeywordVector& v, Vec2 position, const ConceptHierarchy& h,
                 const Projection2D& canvas, const EmbeddingStore& store,
                 const std::map<std::string, std::string>& colors) {
    TopicGlyph g;
    g.owner = owner;
    g.position = position;
    std::vector<double> ov(store.dim(), 0.0);
    for (const auto& [w, x] : v) {
        if (!store.contains(w)) continue;
        const auto e = store.vector(w);
        for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += x * e[i];
    }
    for (const auto& [c, node] : h.concepts) {
        if (!canvas.contains(c)) continue;
        std::vector<std::string> members;
        if (store.contains(c)) members.push_back(c);
        for (const auto& d : node.descriptors) {
            if (store.contains(d.word)) members.push_back(d.word);
        }
        double sim = 0.0;
        if (!members.empty()) sim = std::max(0.0, cosine(centroid(store, members), ov));
        auto s = make_spike(position, canvas.at(c), sim);
        s.concept_word = c;
        if (const auto it = colors.find(c); it != colors.end()) s.color = it->second;
        g.spikes.push_back(std::move(s));
    }
    return g;
}

std::string_view to_string(TopicCase c) {
    switch (c) {
    case TopicCase::SINGLE_CONCEPT: return "SINGLE_CONCEPT";
    case TopicCase::UNREPRESENTED: return "UNREPRESENTED";
    case TopicCase::MULTI_CONCEPT: return "MULTI_CONCEPT";
    case TopicCase::CONCEPT_INCOHERENT: return "CONCEPT_INCOHERENT";
    }
    return "UNREPRESENTED";
}

TopicCase classify(const TopicGlyph& g, const Viewport& viewport, const ClassifyOptions& options) {
    std::vector<Vec2> related;
    for (const auto& s : g.spikes) {
        if (s.similarity >= options.sigma_related) related.push_back(s.concept_position);
    }
    if (related.empty()) return TopicCase::UNREPRESENTED;
    if (related.size() == 1) return TopicCase::SINGLE_CONCEPT;
    double spread = 0.0;
    for (std::size_t i = 0; i < related.size(); ++i) {
        for (std::size_t j = i + 1; j < related.size(); ++j) spread = std::max(spread, distance(related[i], related[j]));
    }
    return spread <= options.rho_fraction * viewport.diagonal() ? TopicCase::MULTI_CONCEPT
                                                                 : TopicCase::CONCEPT_INCOHERENT;
}

json QualityMetrics::to_json() const {
    return {{"coherence", coherence},   {"separation", separation},
            {"distinctiveness", distinctiveness}, {"pmi", pmi},
            {"certainty", certainty},   {"branching_factor", branching_factor},
            {"compactness", compactness}, {"topic_size", topic_size}};
}

QualityMetrics quality_metrics(const TopicHierarchy& tm, const Corpus& corpus, const EmbeddingStore& store) {
    if (!tm.trained()) throw Error(ErrorKind::UntrainedModel, "topic model has not been trained");
    QualityMetrics q;
    const auto n_topics = static_cast<double>(tm.topics.size());
    const auto n_docs = static_cast<double>(tm.assignment.size());

    double coh = 0.0;
    std::size_t coh_topics = 0;
    for (const auto& t : tm.topics) {
        std::vector<std::string> ws;
        for (const auto& [w, x] : t.top_keywords) {
            if (store.contains(w)) ws.push_back(w);
        }
        if (ws.size() < 2) continue;
        double s = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < ws.size(); ++i) {
            for (std::size_t j = i + 1; j < ws.size(); ++j, ++n) s += store.cosine(ws[i], ws[j]);
        }
        coh += s / static_cast<double>(n);
        ++coh_topics;
    }
    q.coherence = coh_topics ? coh / static_cast<double>(coh_topics) : 0.0;

    if (tm.topics.size() > 1) {
        double s = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < tm.topics.size(); ++i) {
            for (std::size_t j = i + 1; j < tm.topics.size(); ++j, ++n) {
                s += 1.0 - sparse_cosine(tm.topics[i].centroid, tm.topics[j].centroid);
            }
        }
        q.separation = s / static_cast<double>(n);
    }

    std::map<std::string, int> listed;
    for (const auto& t : tm.topics) {
        for (const auto& [w, x] : t.top_keywords) ++listed[w];
    }
    if (!listed.empty()) {
        const auto unique = std::count_if(listed.begin(), listed.end(), [](const auto& e) { return e.second == 1; });
        q.distinctiveness = static_cast<double>(unique) / static_cast<double>(listed.size());
    }

    std::vector<const Document*> docs;
    for (const auto& d : corpus.documents) {
        if (d.modeled()) docs.push_back(&d);
    }
    double pmi = 0.0;
    std::size_t pairs = 0;
    if (!docs.empty()) {
        const auto nd = static_cast<double>(docs.size());
        auto p_of = [&](const std::string& a, const std::string* b) {
            double c = 0.0;
            for (const auto* d : docs) {
                if (d->counts.count(a) && (!b || d->counts.count(*b))) c += 1.0;
            }
            return c / nd;
        };
        for (const auto& t : tm.topics) {
            for (std::size_t i = 0; i < t.top_keywords.size(); ++i) {
                for (std::size_t j = i + 1; j < t.top_keywords.size(); ++j) {
                    const auto& a = t.top_keywords[i].first;
                    const auto& b = t.top_keywords[j].first;
                    const double pab = p_of(a, &b);
                    if (pab == 0.0) continue;
                    pmi += std::log(pab / (p_of(a, nullptr) * p_of(b, nullptr)));
                    ++pairs;
                }
            }
        }
    }
    q.pmi = pairs ? pmi / static_cast<double>(pairs) : 0.0;

    double cert = 0.0, comp = 0.0;
    for (const auto& [d, v] : tm.doc_vectors) {
        cert += tm.certainty.at(d);
        comp += sparse_cosine(v, tm.topic(tm.assignment.at(d)).centroid);
    }
    q.certainty = n_docs > 0 ? cert / n_docs : 0.0;
    q.compactness = n_docs > 0 ? comp / n_docs : 0.0;
    // Root plus topic nodes are the internal nodes of the two-level tree.
    q.branching_factor = (n_topics + n_docs) / (n_topics + 1.0);
    q.topic_size = n_docs / n_topics;
    return q;
}

json topics_to_json(const TopicHierarchy& tm, const std::map<int, TopicCase>& cases) {
    json topics = json::array();
    for (const auto& t : tm.topics) {
        json kws = json::array();
        for (const auto& [w, x] : t.top_keywords) kws.push_back({{"word", w}, {"weight", x}});
        json o = {{"id", t.id}, {"top_keywords", std::move(kws)}, {"docs", t.docs}};
        if (const auto it = cases.find(t.id); it != cases.end()) o["case"] = std::string(to_string(it->second));
        topics.push_back(std::move(o));
    }
    return {{"topics", std::move(topics)}};
}

std::string topic_hash(const TopicHierarchy& tm) {
    json j = topics_to_json(tm);
    json centroids = json::array();
    for (const auto& t : tm.topics) centroids.push_back(t.centroid);
    j["centroids"] = std::move(centroids);
    j["assignment"] = tm.assignment;
    j["certainty"] = tm.certainty;
    return to_hex(fnv1a(j.dump()));
}

}  // namespace cspace
