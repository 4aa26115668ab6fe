#include "cspace/refinement.hpp"

#include "cspace/error.hpp"
#include "cspace/layout.hpp"
#include "cspace/quadtree.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <istream>
#include <ostream>

namespace cspace {

using json = nlohmann::json;

namespace {

constexpr ActionKind kAllKinds[] = {ActionKind::PROMOTE,
                                    ActionKind::DEMOTE,
                                    ActionKind::REASSIGN_CHILDREN,
                                    ActionKind::REASSIGN_PARENT,
                                    ActionKind::SPLIT,
                                    ActionKind::MERGE,
                                    ActionKind::SWAP,
                                    ActionKind::DELETE,
                                    ActionKind::ADD_WORD,
                                    ActionKind::CREATE_CONCEPT_FROM_SELECTION};

}  // namespace

std::string_view to_string(ActionKind k) {
    switch (k) {
    case ActionKind::PROMOTE: return "PROMOTE";
    case ActionKind::DEMOTE: return "DEMOTE";
    case ActionKind::REASSIGN_CHILDREN: return "REASSIGN_CHILDREN";
    case ActionKind::REASSIGN_PARENT: return "REASSIGN_PARENT";
    case ActionKind::SPLIT: return "SPLIT";
    case ActionKind::MERGE: return "MERGE";
    case ActionKind::SWAP: return "SWAP";
    case ActionKind::DELETE: return "DELETE";
    case ActionKind::ADD_WORD: return "ADD_WORD";
    case ActionKind::CREATE_CONCEPT_FROM_SELECTION: return "CREATE_CONCEPT_FROM_SELECTION";
    }
    return "PROMOTE";
}

ActionKind parse_action_kind(std::string_view name) {
    for (const auto k : kAllKinds) {
        if (to_string(k) == name) return k;
    }
    throw Error(ErrorKind::InvalidArgument, "unknown action kind " + std::string(name));
}

std::string_view to_string(Role r) {
    switch (r) {
    case Role::SUPER_CONCEPT: return "super_concept";
    case Role::CONCEPT: return "concept";
    case Role::DESCRIPTOR: return "descriptor";
    case Role::BASE: return "base_word";
    }
    return "base_word";
}

std::optional<Role> role_of(const ConceptHierarchy& h, std::string_view target) {
    constexpr std::string_view prefix = "super:";
    if (target.substr(0, prefix.size()) == prefix) {
        const auto label = target.substr(prefix.size());
        for (const auto& s : h.super_concepts) {
            if (s.label == label) return Role::SUPER_CONCEPT;
        }
        return std::nullopt;
    }
    if (h.is_concept(target)) return Role::CONCEPT;
    if (h.is_descriptor(target)) return Role::DESCRIPTOR;
    if (h.is_base(target)) return Role::BASE;
    return std::nullopt;
}

bool permitted(Role role, ActionKind kind) {
    switch (role) {
    case Role::SUPER_CONCEPT: return false;
    case Role::CONCEPT:
        return kind == ActionKind::DEMOTE || kind == ActionKind::DELETE || kind == ActionKind::REASSIGN_CHILDREN ||
               kind == ActionKind::SWAP || kind == ActionKind::MERGE || kind == ActionKind::SPLIT;
    case Role::DESCRIPTOR:
        return kind == ActionKind::PROMOTE || kind == ActionKind::DEMOTE || kind == ActionKind::DELETE ||
               kind == ActionKind::REASSIGN_PARENT || kind == ActionKind::SWAP ||
               kind == ActionKind::CREATE_CONCEPT_FROM_SELECTION;
    case Role::BASE: return kind == ActionKind::PROMOTE || kind == ActionKind::ADD_WORD;
    }
    return false;
}

std::vector<ActionKind> permitted_actions(Role role) {
    std::vector<ActionKind> out;
    for (const auto k : kAllKinds) {
        if (permitted(role, k)) out.push_back(k);
    }
    return out;
}

json RefinementAction::to_json() const {
    json j = {{"kind", std::string(cspace::to_string(kind))}, {"targets", targets}};
    if (destination) j["destination"] = *destination;
    return j;
}

RefinementAction RefinementAction::from_json(const json& j) {
    RefinementAction a;
    try {
        a.kind = parse_action_kind(j.at("kind").get<std::string>());
        a.targets = j.at("targets").get<std::vector<std::string>>();
        if (j.contains("destination") && !j.at("destination").is_null()) {
            a.destination = j.at("destination").get<std::string>();
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("malformed action: ") + e.what());
    }
    return a;
}

double RefinementEnv::similarity(const std::string& a, const std::string& b) const {
    if (!store || !store->contains(a) || !store->contains(b)) return 0.0;
    return store->cosine(a, b);
}

double RefinementEnv::corpus_score(const std::string& w) const { return stats ? corpus_tfidf(*stats, w) : 0.0; }

namespace {

[[noreturn]] void unknown(const std::string& w) { throw Error(ErrorKind::UnknownTarget, w); }

Descriptor take_descriptor(ConceptHierarchy& h, const std::string& w) {
    for (auto& [c, node] : h.concepts) {
        const auto it = std::find_if(node.descriptors.begin(), node.descriptors.end(),
                                     [&](const Descriptor& d) { return d.word == w; });
        if (it != node.descriptors.end()) {
            Descriptor d = *it;
            node.descriptors.erase(it);
            return d;
        }
    }
    unknown(w);
}

void add_descriptor(ConceptHierarchy& h, const std::string& concept_word, Descriptor d) {
    auto& ds = h.concepts.at(concept_word).descriptors;
    ds.push_back(std::move(d));
    std::sort(ds.begin(), ds.end(), [](const Descriptor& a, const Descriptor& b) {
        return a.score > b.score || (a.score == b.score && a.word < b.word);
    });
}

void to_base(ConceptHierarchy& h, const std::string& w, bool mark_demoted) {
    h.base_words.insert(w);
    if (mark_demoted) h.demoted.insert(w);
}

void take_base(ConceptHierarchy& h, const std::string& w) {
    if (h.base_words.erase(w) == 0) unknown(w);
    h.demoted.erase(w);
}

ConceptNode take_concept(ConceptHierarchy& h, const std::string& c) {
    const auto it = h.concepts.find(c);
    if (it == h.concepts.end()) unknown(c);
    ConceptNode node = std::move(it->second);
    h.concepts.erase(it);
    return node;
}

void make_concept(ConceptHierarchy& h, const std::string& w, double score, std::vector<Descriptor> ds = {}) {
    ConceptNode node;
    node.word = w;
    node.score = score;
    node.descriptors = std::move(ds);
    h.concepts.emplace(w, std::move(node));
}

std::string require_concept(const ConceptHierarchy& h, const std::optional<std::string>& c) {
    if (!c) throw Error(ErrorKind::InvalidArgument, "action needs a destination concept");
    if (!h.is_concept(*c)) unknown(*c);
    return *c;
}

std::optional<std::string> most_similar_concept(const ConceptHierarchy& h, const RefinementEnv& env,
                                                const std::string& w, const std::set<std::string>& exclude = {}) {
    std::optional<std::string> best;
    double best_sim = 0.0;
    for (const auto& [c, node] : h.concepts) {
        if (c == w || exclude.count(c)) continue;
        const double s = env.similarity(w, c);
        if (!best || s > best_sim) {
            best = c;
            best_sim = s;
        }
    }
    return best;
}
}  // namespace

ConceptHierarchy apply(const RefinementAction& a, const ConceptHierarchy& h0, const RefinementEnv& env) {
    if (a.targets.empty()) throw Error(ErrorKind::InvalidArgument, "action has no targets");
    const std::set<std::string> distinct(a.targets.begin(), a.targets.end());
    if (distinct.size() != a.targets.size()) throw Error(ErrorKind::InvalidArgument, "duplicate targets");
    const std::string& t = a.targets[0];
    const auto role = role_of(h0, t);
    if (!role) unknown(t);
    if (!permitted(*role, a.kind)) {
        throw Error(ErrorKind::ForbiddenAction,
                    std::string(to_string(*role)) + " does not support " + std::string(to_string(a.kind)));
    }

    ConceptHierarchy h = h0;
    switch (a.kind) {
    case ActionKind::PROMOTE:
        if (*role == Role::DESCRIPTOR) {
            const auto d = take_descriptor(h, t);
            make_concept(h, t, d.score);
        } else {
            const std::string dest =
                a.destination ? require_concept(h, a.destination) : *most_similar_concept(h, env, t);
            take_base(h, t);
            add_descriptor(h, dest, {t, env.corpus_score(t), Provenance::USER_DEFINED});
        }
        break;
    case ActionKind::ADD_WORD: {
        const auto dest = require_concept(h, a.destination);
        take_base(h, t);
        add_descriptor(h, dest, {t, env.corpus_score(t), Provenance::USER_DEFINED});
        break;
    }
    case ActionKind::DEMOTE:
        if (*role == Role::DESCRIPTOR) {
            take_descriptor(h, t);
            to_base(h, t, false);
        } else {
            if (h.concepts.size() == 1) throw Error(ErrorKind::LastConcept, "cannot demote the only concept " + t);
            std::string dest;
            if (a.destination) {
                dest = require_concept(h, a.destination);
                if (dest == t) throw Error(ErrorKind::InvalidArgument, "a concept cannot become its own descriptor");
            } else {
                dest = *most_similar_concept(h, env, t);
            }
            auto node = take_concept(h, t);
            add_descriptor(h, dest, {t, node.score, Provenance::USER_DEFINED});
            for (auto& d : node.descriptors) add_descriptor(h, *most_similar_concept(h, env, d.word), std::move(d));
        }
        break;
    case ActionKind::DELETE:
        if (*role == Role::DESCRIPTOR) {
            take_descriptor(h, t);
            to_base(h, t, true);
        } else {
            if (h.concepts.size() == 1) throw Error(ErrorKind::LastConcept, "cannot delete the only concept " + t);
            const auto node = take_concept(h, t);
            to_base(h, t, true);
            for (const auto& d : node.descriptors) to_base(h, d.word, true);
        }
        break;
    case ActionKind::REASSIGN_CHILDREN: {
        const auto dest = require_concept(h, a.destination);
        if (dest == t) throw Error(ErrorKind::InvalidArgument, "destination equals the source concept");
        std::vector<std::string> children(a.targets.begin() + 1, a.targets.end());
        if (children.empty()) {
            for (const auto& d : h.concepts.at(t).descriptors) children.push_back(d.word);
        }
        for (const auto& c : children) {
            if (!h.concepts.at(t).has(c)) unknown(c);
            auto d = take_descriptor(h, c);
            d.provenance = Provenance::USER_DEFINED;
            add_descriptor(h, dest, std::move(d));
        }
        break;
    }
    case ActionKind::REASSIGN_PARENT: {
        const auto dest = require_concept(h, a.destination);
        auto d = take_descriptor(h, t);
        d.provenance = Provenance::USER_DEFINED;
        add_descriptor(h, dest, std::move(d));
        break;
    }
    case ActionKind::SPLIT: {
        if (a.targets.size() < 2) throw Error(ErrorKind::InvalidArgument, "SPLIT needs a new head");
        const auto& head = a.targets[1];
        for (std::size_t i = 1; i < a.targets.size(); ++i) {
            if (!h.concepts.at(t).has(a.targets[i])) unknown(a.targets[i]);
        }
        const auto hd = take_descriptor(h, head);
        std::vector<Descriptor> moved;
        for (std::size_t i = 2; i < a.targets.size(); ++i) {
            auto d = take_descriptor(h, a.targets[i]);
            d.provenance = Provenance::USER_DEFINED;
            moved.push_back(std::move(d));
        }
        make_concept(h, head, hd.score);
        for (auto& d : moved) add_descriptor(h, head, std::move(d));
        break;
    }
    case ActionKind::MERGE: {
        if (a.targets.size() < 2) throw Error(ErrorKind::InvalidArgument, "MERGE needs two or more concepts");
        for (const auto& c : a.targets) {
            const auto r = role_of(h, c);
            if (!r) unknown(c);
            if (*r != Role::CONCEPT) throw Error(ErrorKind::ForbiddenAction, c + " is not a concept");
        }
        const auto survivor = *std::min_element(a.targets.begin(), a.targets.end(), [&](const auto& x, const auto& y) {
            const double sx = h.concepts.at(x).score, sy = h.concepts.at(y).score;
            return sx > sy || (sx == sy && x < y);
        });
        for (const auto& c : a.targets) {
            if (c == survivor) continue;
            auto node = take_concept(h, c);
            add_descriptor(h, survivor, {c, node.score, Provenance::USER_DEFINED});
            for (auto& d : node.descriptors) add_descriptor(h, survivor, std::move(d));
        }
        break;
    }
    case ActionKind::SWAP: {
        std::string concept_word, descriptor;
        if (*role == Role::CONCEPT) {
            concept_word = t;
            if (!a.destination) throw Error(ErrorKind::InvalidArgument, "SWAP of a concept needs the descriptor");
            descriptor = *a.destination;
            if (!h.concepts.at(t).has(descriptor)) unknown(descriptor);
        } else {
            descriptor = t;
            concept_word = *h.parent_of(t);
        }
        auto node = take_concept(h, concept_word);
        const auto it = std::find_if(node.descriptors.begin(), node.descriptors.end(),
                                     [&](const Descriptor& d) { return d.word == descriptor; });
        const Descriptor old = *it;
        node.descriptors.erase(it);
        node.descriptors.push_back({concept_word, old.score, old.provenance});
        make_concept(h, descriptor, node.score);
        for (auto& d : node.descriptors) add_descriptor(h, descriptor, std::move(d));
        break;
    }
    case ActionKind::CREATE_CONCEPT_FROM_SELECTION: {
        for (std::size_t i = 1; i < a.targets.size(); ++i) {
            const auto r = role_of(h, a.targets[i]);
            if (!r) unknown(a.targets[i]);
            if (*r != Role::DESCRIPTOR && *r != Role::BASE) {
                throw Error(ErrorKind::ForbiddenAction, a.targets[i] + " cannot join a new concept as a " +
                                                            std::string(to_string(*r)));
            }
        }
        const auto d = take_descriptor(h, t);
        make_concept(h, t, d.score);
        for (std::size_t i = 1; i < a.targets.size(); ++i) {
            const auto& w = a.targets[i];
            const bool base = h.is_base(w);
            double score = env.corpus_score(w);
            if (base) {
                take_base(h, w);
            } else {
                score = take_descriptor(h, w).score;
            }
            add_descriptor(h, t, {w, score, Provenance::USER_DEFINED});
        }
        break;
    }
    }
    if (h.concepts.empty()) throw Error(ErrorKind::LastConcept, "action would remove every concept");
    static const Projection2D empty;
    return rebuild_super_concepts(std::move(h), env.canvas ? *env.canvas : empty,
                                  env.store ? *env.store : EmbeddingStore{}, env.params);
}

namespace {

Vec2 mean_of(const std::vector<Vec2>& pts) {
    Vec2 m;
    for (const auto& p : pts) m = m + p;
    return pts.empty() ? m : (1.0 / static_cast<double>(pts.size())) * m;
}

// Per-axis population variance.
Vec2 variance_of(const std::vector<Vec2>& pts) {
    const Vec2 m = mean_of(pts);
    Vec2 v;
    for (const auto& p : pts) v = v + Vec2{(p.x - m.x) * (p.x - m.x), (p.y - m.y) * (p.y - m.y)};
    return pts.empty() ? v : (1.0 / static_cast<double>(pts.size())) * v;
}

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

}  // namespace

double rmsstd(const std::vector<std::vector<Vec2>>& clusters) {
    double ss = 0.0, dof = 0.0;
    for (const auto& c : clusters) {
        if (c.empty()) continue;
        const Vec2 m = mean_of(c);
        for (const auto& p : c) ss += squared_distance(p, m);
        dof += static_cast<double>(c.size()) - 1.0;
    }
    if (dof <= 0.0 || ss == 0.0) return 0.0;
    return std::sqrt(ss / (2.0 * dof));
}

double s_dbw(const std::vector<std::vector<Vec2>>& input) {
    std::vector<std::vector<Vec2>> clusters;
    for (const auto& c : input) {
        if (!c.empty()) clusters.push_back(c);
    }
    const std::size_t n = clusters.size();
    if (n == 0) return 0.0;
    std::vector<Vec2> all;
    for (const auto& c : clusters) all.insert(all.end(), c.begin(), c.end());
    const double sigma_x = norm(variance_of(all));
    std::vector<Vec2> centres;
    std::vector<double> sigmas;
    double scat = 0.0, sigma_sum = 0.0;
    for (const auto& c : clusters) {
        centres.push_back(mean_of(c));
        sigmas.push_back(norm(variance_of(c)));
        sigma_sum += sigmas.back();
        if (sigma_x > 0.0) scat += sigmas.back() / sigma_x;
    }
    scat /= static_cast<double>(n);
    if (n < 2) return scat;
    const double stdev = std::sqrt(sigma_sum) / static_cast<double>(n);
    auto density = [&](Vec2 u, std::size_t i, std::size_t j) {
        double count = 0.0;
        for (const std::size_t k : {i, j}) {
            for (const auto& p : clusters[k]) {
                if (distance(p, u) <= stdev) count += 1.0;
            }
        }
        return count;
    };
    double dens = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const Vec2 mid = 0.5 * (centres[i] + centres[j]);
            const double denom = std::max(density(centres[i], i, j), density(centres[j], i, j));
            if (denom > 0.0) dens += density(mid, i, j) / denom;
        }
    }
    dens /= static_cast<double>(n * (n - 1));
    return scat + dens;
}

json QualityReport::to_json() const {
    json cs = json::array();
    for (const auto& c : clusters) {
        cs.push_back({{"concept", c.concept_word},
                      {"size", c.size},
                      {"centroid", {c.centroid.x, c.centroid.y}},
                      {"density", c.density},
                      {"intra_variance", c.intra_variance},
                      {"inter_variance", c.inter_variance}});
    }
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json ws = json::object();
    for (const auto& [w, m] : words) {
        ws[w] = {{"level", std::string(cspace::to_string(m.level))},
                 {"parent", m.parent ? json(*m.parent) : json(nullptr)},
                 {"neighborhood_count", m.neighborhood_count},
                 {"sim_to_parent", opt(m.sim_to_parent)},
                 {"sim_to_children_mean", opt(m.sim_to_children_mean)},
                 {"spatial_dist_to_parent", opt(m.spatial_dist_to_parent)},
                 {"member_mean_sim", opt(m.member_mean_sim)},
                 {"color_conflict", m.color_conflict}};
    }
    json j = {{"clusters", std::move(cs)}, {"rmsstd", rmsstd}, {"s_dbw", s_dbw}, {"words", std::move(ws)}};
    j["topic_quality"] = topic_quality ? topic_quality->to_json() : json(nullptr);
    return j;
}

QualityReport monitor(const ConceptHierarchy& h, const RefinementEnv& env, const TopicHierarchy* tm,
                      const Corpus* corpus) {
    QualityReport r;
    static const Projection2D empty_canvas;
    const Projection2D& canvas = env.canvas ? *env.canvas : empty_canvas;

    std::vector<std::vector<Vec2>> clusters;
    for (const auto& [c, node] : h.concepts) {
        std::vector<Vec2> pts;
        if (canvas.contains(c)) pts.push_back(canvas.at(c));
        for (const auto& d : node.descriptors) {
            if (canvas.contains(d.word)) pts.push_back(canvas.at(d.word));
        }
        ClusterQuality q;
        q.concept_word = c;
        q.size = pts.size();
        q.centroid = mean_of(pts);
        for (const auto& p : pts) q.intra_variance += squared_distance(p, q.centroid);
        if (!pts.empty()) q.intra_variance /= static_cast<double>(pts.size());
        const double radius = std::sqrt(q.intra_variance);
        for (const auto& p : pts) {
            if (distance(p, q.centroid) <= radius) q.density += 1.0;
        }
        r.clusters.push_back(q);
        clusters.push_back(std::move(pts));
    }
    for (auto& q : r.clusters) {
        double s = 0.0;
        std::size_t n = 0;
        for (const auto& o : r.clusters) {
            if (&o == &q || o.size == 0) continue;
            s += squared_distance(q.centroid, o.centroid);
            ++n;
        }
        q.inter_variance = n ? s / static_cast<double>(n) : 0.0;
    }
    r.rmsstd = rmsstd(clusters);
    r.s_dbw = s_dbw(clusters);

    const auto colors = assign_colors(h, canvas, env.viewport);
    const auto conflicts = color_conflicts(h, canvas, colors);
    const QuadTree qt(canvas);
    const auto k = static_cast<std::size_t>(env.params.neighborhood());
    for (const auto& w : h.words()) {
        WordMetrics m;
        m.word = w;
        m.level = h.level_of(w);
        if (const auto c = conflicts.find(w); c != conflicts.end()) m.color_conflict = c->second;
        if (canvas.contains(w) && !qt.empty()) {
            const Vec2 p = canvas.at(w);
            for (const auto& n : qt.knn(p, k, [&](const std::string& o) { return o != w; })) {
                if (env.similarity(w, n.word) >= env.params.eps_similarity) ++m.neighborhood_count;
            }
            for (const auto& n : qt.knn(p, 2 * k, [&](const std::string& o) { return o != w; })) {
                if (h.is_base(n.word) && env.similarity(w, n.word) >= env.params.eps_similarity) {
                    m.unowned_similar.push_back(n.word);
                }
            }
        }
        if (h.is_concept(w)) {
            const auto& node = h.concepts.at(w);
            if (!node.descriptors.empty()) {
                double s = 0.0;
                for (const auto& d : node.descriptors) s += env.similarity(w, d.word);
                m.sim_to_children_mean = s / static_cast<double>(node.descriptors.size());
                m.member_mean_sim = m.sim_to_children_mean;
            }
        } else if (const auto parent = h.parent_of(w)) {
            m.parent = *parent;
            m.sim_to_parent = env.similarity(w, *parent);
            if (canvas.contains(w) && canvas.contains(*parent)) {
                m.spatial_dist_to_parent = distance(canvas.at(w), canvas.at(*parent));
            }
            double s = env.similarity(w, *parent);
            std::size_t n = 1;
            for (const auto& d : h.concepts.at(*parent).descriptors) {
                if (d.word == w) continue;
                s += env.similarity(w, d.word);
                ++n;
            }
            m.member_mean_sim = s / static_cast<double>(n);
        }
        std::set<std::string> exclude;
        if (m.parent) exclude.insert(*m.parent);
        if (const auto alt = most_similar_concept(h, env, w, exclude)) {
            m.best_alternative = *alt;
            m.best_alternative_sim = env.similarity(w, *alt);
        }
        r.words.emplace(w, std::move(m));
    }
    if (tm && corpus && tm->trained() && env.store) r.topic_quality = quality_metrics(*tm, *corpus, *env.store);
    return r;
}

json Recommendation::to_json() const {
    return {{"word", word},
            {"action", action.to_json()},
            {"badness", badness},
            {"impact", impact},
            {"rationale", rationale},
            {"focus", {{"x0", focus.x0}, {"y0", focus.y0}, {"x1", focus.x1}, {"y1", focus.y1}}}};
}

std::string suppression_key(const Recommendation& r) { return r.word + "|" + std::string(to_string(r.action.kind)); }

std::vector<Recommendation> build_queue(const QualityReport& report, const ConceptHierarchy& h,
                                        const RefinementEnv& env, const std::set<std::string>& suppressed) {
    const auto& opt = env.queue;
    std::vector<std::pair<std::string, double>> pool;
    if (env.stats) {
        for (const auto& [w, s] : rank_by_corpus_tfidf(*env.stats)) {
            if (pool.size() >= opt.candidate_pool) break;
            pool.emplace_back(w, s);
        }
    }
    double q1 = 0.0, q3 = 0.0;
    if (!pool.empty()) {
        // Pool is sorted by descending tf-idf.
        q3 = pool[(pool.size() - 1) / 4].second;
        q1 = pool[(3 * (pool.size() - 1)) / 4].second;
    }
    static const Projection2D empty_canvas;
    const Projection2D& canvas = env.canvas ? *env.canvas : empty_canvas;

    std::vector<Recommendation> out;
    for (const auto& [w, tfidf] : pool) {
        const auto it = report.words.find(w);
        if (it == report.words.end()) continue;
        const auto& m = it->second;
        Recommendation r;
        r.word = w;
        bool chosen = false;
        auto choose = [&](ActionKind k, std::vector<std::string> targets, std::optional<std::string> dest,
                          const char* why) {
            r.action = {k, std::move(targets), std::move(dest)};
            r.rationale = why;
            chosen = true;
        };
        const bool is_descriptor = m.parent.has_value();
        const bool is_concept = h.is_concept(w);
        if (is_descriptor && m.best_alternative && m.best_alternative_sim - *m.sim_to_parent > opt.reassign_gap) {
            choose(ActionKind::REASSIGN_PARENT, {w}, m.best_alternative, "better_parent");
        } else if (is_descriptor && m.member_mean_sim &&
                   report.words.count(*m.parent) && report.words.at(*m.parent).member_mean_sim &&
                   *m.member_mean_sim - *report.words.at(*m.parent).member_mean_sim > opt.swap_margin) {
            choose(ActionKind::SWAP, {w}, std::nullopt, "more_central_than_concept");
        } else if (is_concept && h.concepts.at(w).descriptors.size() < static_cast<std::size_t>(env.params.eps_neighborhood) &&
                   m.best_alternative && m.best_alternative_sim >= opt.merge_similarity) {
            choose(ActionKind::MERGE, {w, *m.best_alternative}, std::nullopt, "small_similar_neighbor");
        } else if (!is_concept && m.unowned_similar.size() >= static_cast<std::size_t>(env.params.eps_neighborhood)) {
            if (is_descriptor) {
                std::vector<std::string> targets{w};
                targets.insert(targets.end(), m.unowned_similar.begin(), m.unowned_similar.end());
                choose(ActionKind::CREATE_CONCEPT_FROM_SELECTION, std::move(targets), std::nullopt, "dense_unowned");
            } else if (!h.concepts.empty()) {
                choose(ActionKind::PROMOTE, {w}, std::nullopt, "dense_unowned");
            }
        } else if (is_descriptor && *m.sim_to_parent < opt.weak_similarity) {
            choose(ActionKind::DEMOTE, {w}, std::nullopt, "weak_parent_link");
        } else if (is_concept && h.concepts.size() > 1 && m.sim_to_children_mean &&
                   *m.sim_to_children_mean < opt.weak_similarity) {
            choose(ActionKind::DELETE, {w}, std::nullopt, "weak_children");
        }
        if (!chosen) continue;
        if (suppressed.count(suppression_key(r))) continue;

        double sim = 1.0, dist = 0.0;
        if (is_descriptor) {
            sim = *m.sim_to_parent;
            dist = m.spatial_dist_to_parent.value_or(0.0);
        } else if (is_concept) {
            sim = m.sim_to_children_mean.value_or(1.0);
        }
        r.badness = opt.weight_similarity * (1.0 - sim) + opt.weight_distance * (dist / env.viewport.diagonal()) +
                    opt.weight_conflict * (m.color_conflict ? 1.0 : 0.0);
        const bool contradicts = (tfidf >= q3 && !is_concept) || (tfidf <= q1 && is_concept && q1 < q3);
        if (contradicts) r.badness += opt.quartile_penalty;
        r.impact = r.badness * tfidf;

        std::vector<std::string> involved = r.action.targets;
        if (r.action.destination) involved.push_back(*r.action.destination);
        if (m.parent) involved.push_back(*m.parent);
        Rect box{1e300, 1e300, -1e300, -1e300};
        bool any = false;
        for (const auto& x : involved) {
            if (!canvas.contains(x)) continue;
            const Vec2 p = canvas.at(x);
            box = {std::min(box.x0, p.x), std::min(box.y0, p.y), std::max(box.x1, p.x), std::max(box.y1, p.y)};
            any = true;
        }
        const Rect vr = env.viewport.rect();
        if (any) {
            const double pad = opt.focus_padding;
            r.focus = {std::max(vr.x0, box.x0 - pad), std::max(vr.y0, box.y0 - pad), std::min(vr.x1, box.x1 + pad),
                       std::min(vr.y1, box.y1 + pad)};
        } else {
            r.focus = vr;
        }
        out.push_back(std::move(r));
    }
    std::sort(out.begin(), out.end(), [](const Recommendation& a, const Recommendation& b) {
        return a.impact > b.impact || (a.impact == b.impact && a.word < b.word);
    });
    if (out.size() > opt.max_items) out.resize(opt.max_items);
    return out;
}

Verdict parse_verdict(std::string_view name) {
    if (name == "accept") return Verdict::ACCEPT;
    if (name == "reject") return Verdict::REJECT;
    if (name == "alternative") return Verdict::ALTERNATIVE;
    throw Error(ErrorKind::InvalidArgument, "unknown verdict " + std::string(name));
}

TourState start_tour(const ConceptHierarchy& h, const RefinementEnv& env) {
    TourState s;
    s.queue = build_queue(monitor(h, env), h, env);
    return s;
}

TourStep step_tour(TourState& state, ConceptHierarchy& h, Verdict verdict, const RefinementEnv& env,
                   const std::optional<RefinementAction>& alternative) {
    if (state.queue.empty()) throw Error(ErrorKind::EmptyQueue, "no recommendations left");
    TourStep step;
    const Recommendation head = state.queue.front();
    switch (verdict) {
    case Verdict::ACCEPT:
        h = apply(head.action, h, env);
        step.applied = head.action;
        step.changed = true;
        state.queue = build_queue(monitor(h, env), h, env, state.suppressed);
        break;
    case Verdict::REJECT:
        state.suppressed.insert(suppression_key(head));
        state.queue.erase(state.queue.begin());
        break;
    case Verdict::ALTERNATIVE:
        if (!alternative) throw Error(ErrorKind::InvalidArgument, "alternative verdict needs an action");
        h = apply(*alternative, h, env);
        state.suppressed.insert(suppression_key(head));
        step.applied = *alternative;
        step.changed = true;
        state.queue = build_queue(monitor(h, env), h, env, state.suppressed);
        break;
    }
    if (!state.queue.empty()) step.next = state.queue.front();
    return step;
}

json LogEntry::to_json() const {
    return {{"timestamp", timestamp}, {"action", action.to_json()}, {"pre_hash", pre_hash}, {"post_hash", post_hash}};
}

LogEntry LogEntry::from_json(const json& j) {
    LogEntry e;
    try {
        e.timestamp = j.value("timestamp", std::string());
        e.action = RefinementAction::from_json(j.at("action"));
        e.pre_hash = j.at("pre_hash").get<std::string>();
        e.post_hash = j.at("post_hash").get<std::string>();
    } catch (const json::exception& ex) {
        throw Error(ErrorKind::MalformedRecord, ex.what());
    }
    return e;
}

std::string now_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

void write_log_line(std::ostream& out, const LogEntry& e) { out << e.to_json().dump() << '\n'; }

std::vector<LogEntry> read_log(std::istream& in) {
    std::vector<LogEntry> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(LogEntry::from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(n) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

ConceptHierarchy replay(const ConceptHierarchy& initial, const std::vector<LogEntry>& log, const RefinementEnv& env) {
    ConceptHierarchy h = initial;
    for (std::size_t i = 0; i < log.size(); ++i) {
        const auto& e = log[i];
        if (hierarchy_hash(h) != e.pre_hash) {
            throw Error(ErrorKind::ReplayDivergence, "entry " + std::to_string(i + 1) + ": pre-state differs");
        }
        h = apply(e.action, h, env);
        if (hierarchy_hash(h) != e.post_hash) {
            throw Error(ErrorKind::ReplayDivergence, "entry " + std::to_string(i + 1) + ": post-state differs");
        }
    }
    return h;
}

}  // namespace cspace
