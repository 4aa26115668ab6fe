// Headless acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "../support/fixtures.hpp"
#include "cspace/error.hpp"
#include "cspace/layout.hpp"
#include "cspace/quadtree.hpp"
#include "cspace/refinement.hpp"
#include "cspace/service.hpp"
#include "cspace/topicmodel.hpp"
#include "cspace/tsne.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace cspace;
using nlohmann::json;

namespace {

// Tolerances and budgets.
constexpr double kGlyphTol = 1e-9;
constexpr double kVoronoiTie = 1e-9;
constexpr double kTsneBudget = 60.0;
constexpr double kVoronoiBudget = 5.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o.ok = false;
        o.detail = std::string("exception: ") + e.what();
    }
    if (!o.ok) ++failures;
    std::printf("%s %s%s%s\n", o.ok ? "PASS" : "FAIL", name, o.detail.empty() ? "" : ": ", o.detail.c_str());
    std::fflush(stdout);
}

RefinementEnv env_of(const fixtures::Scene& s) {
    RefinementEnv env;
    env.store = &s.store;
    env.canvas = &s.canvas;
    env.stats = &s.corpus.stats;
    env.params = s.params;
    return env;
}

std::set<std::string> descriptor_set(const ConceptHierarchy& h, const std::string& c) {
    std::set<std::string> out;
    for (const auto& d : h.concepts.at(c).descriptors) out.insert(d.word);
    return out;
}

Outcome parameter_fidelity() {
    Outcome o;
    const json j = SessionConfig{}.to_json();
    o.require(j["abstraction"]["eps_similarity"] == 0.4, "eps_similarity");
    o.require(j["abstraction"]["eps_neighborhood"] == 6, "eps_neighborhood");
    o.require(j["abstraction"]["super_factor"] == 1.5, "super_factor");
    o.require(effective_neighborhood(0) == 6, "effective neighbourhood at level 0");
    o.require(j["tsne"]["perplexity"] == 5.0, "perplexity");
    o.require(j["tsne"]["theta"] == 0.5, "theta");
    o.require(j["tsne"]["iterations"] == 5000, "iterations");
    o.require(j["topics"]["doc_keywords"] == 15, "document keywords");
    o.require(j["topics"]["top_keywords"] == 15, "topic keywords");
    o.require(j["gather"]["doc_keywords"] == 20, "insertion keywords");
    o.require(j["queue"]["candidate_pool"] == 50, "candidate pool");
    if (o.ok) {
        o.detail = "eps_similarity 0.4, eps_neighborhood 6, super_factor 1.5, perplexity 5, theta 0.5, "
                   "iterations 5000, keywords 15/15/20, candidate_pool 50";
    }
    return o;
}

Outcome anchored_tsne() {
    Outcome o;
    // 100 words in five semantic groups of 20.
    const std::size_t n = 100;
    fixtures::VectorBuilder vb;
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.55, 0.9);
    std::vector<std::string> words;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string w = "w" + std::to_string(i);
        vb.add(w, {{"g" + std::to_string(i % 5), u(rng)}});
        words.push_back(w);
    }
    const auto store = vb.build();
    std::vector<double> data;
    for (const auto& w : words) {
        const auto v = store.vector(w);
        data.insert(data.end(), v.begin(), v.end());
    }
    const std::size_t dim = store.dim();
    std::vector<std::optional<std::pair<double, double>>> fixed(n);
    fixed[0] = std::pair{-12.5, 7.0};
    fixed[1] = std::pair{13.0, -1.0 / 3.0};
    fixed[2] = std::pair{0.1, 0.2};
    fixed[3] = std::pair{-4.0, -9.75};
    fixed[4] = std::pair{6.0, 11.0};
    const TsneParams params;
    const auto t0 = Clock::now();
    const auto a = run_tsne(data, n, dim, params, fixed);
    const double secs = seconds_since(t0);
    const auto b = run_tsne(data, n, dim, params, fixed);
    for (std::size_t i = 0; i < n; ++i) {
        if (!fixed[i]) continue;
        o.require(a.coords[2 * i] == fixed[i]->first && a.coords[2 * i + 1] == fixed[i]->second,
                  "anchor " + std::to_string(i) + " moved");
    }
    o.require(a.final_kl() < a.kl_at(50), "final KL not below KL at iteration 50");
    o.require(a.coords.size() == b.coords.size() &&
                  std::memcmp(a.coords.data(), b.coords.data(), a.coords.size() * sizeof(double)) == 0,
              "same seed gave different coordinates");
    o.require(secs < kTsneBudget, "runtime " + std::to_string(secs) + " s");
    char buf[160];
    std::snprintf(buf, sizeof buf, "KL@50 %.4f final %.4f, %d iterations in %.2f s", a.kl_at(50), a.final_kl(),
                  params.iterations, secs);
    if (o.ok) o.detail = buf;
    return o;
}

Outcome quadtree_oracle() {
    Outcome o;
    int queries = 0;
    for (const bool lattice : {false, true}) {
        std::mt19937_64 rng(lattice ? 3 : 1);
        std::uniform_real_distribution<double> u(0.0, 100.0);
        std::uniform_int_distribution<int> cell(0, 20);
        Projection2D p;
        for (int i = 0; i < 1000; ++i) {
            p.coords["p" + std::to_string(i)] = lattice ? Vec2{5.0 * cell(rng), 5.0 * cell(rng)} : Vec2{u(rng), u(rng)};
        }
        const QuadTree qt(p);
        std::uniform_real_distribution<double> qu(-10.0, 110.0);
        for (int t = 0; t < 100; ++t) {
            const Vec2 q{qu(rng), qu(rng)};
            std::vector<std::pair<double, std::string>> all;
            for (const auto& [w, v] : p.coords) all.emplace_back(squared_distance(v, q), w);
            std::sort(all.begin(), all.end());
            for (const std::size_t k : {1u, 6u, 15u}) {
                const auto got = qt.knn(q, k);
                bool same = got.size() == k;
                for (std::size_t i = 0; same && i < k; ++i) {
                    same = got[i].word == all[i].second && got[i].distance == std::sqrt(all[i].first);
                }
                o.require(same, "knn mismatch, k=" + std::to_string(k));
            }
            const double a = qu(rng), b = qu(rng), c = qu(rng), d = qu(rng);
            const Rect r{std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d)};
            std::vector<std::string> want;
            for (const auto& [w, v] : p.coords) {
                if (v.x >= r.x0 && v.x <= r.x1 && v.y >= r.y0 && v.y <= r.y1) want.push_back(w);
            }
            std::sort(want.begin(), want.end());
            o.require(qt.region_query(r) == want, "region mismatch");
            ++queries;
        }
    }
    if (o.ok) o.detail = std::to_string(queries) + " queries on 1000 points (uniform and lattice), k in {1, 6, 15}";
    return o;
}

Outcome voronoi_oracle() {
    Outcome o;
    const Viewport vp;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    std::vector<std::pair<std::string, Vec2>> sites;
    for (int i = 0; i < 200; ++i) sites.emplace_back("s" + std::to_string(i), Vec2{u(rng), u(rng)});
    const auto t0 = Clock::now();
    const auto d = voronoi(sites, vp);
    int mismatches = 0, checked = 0;
    for (int q = 0; q < 10000; ++q) {
        const Vec2 p{u(rng), u(rng)};
        double best = 1e300, second = 1e300;
        int arg = -1;
        for (std::size_t i = 0; i < sites.size(); ++i) {
            const double dd = distance(p, sites[i].second);
            if (dd < best) {
                second = best;
                best = dd;
                arg = static_cast<int>(i);
            } else if (dd < second) {
                second = dd;
            }
        }
        if (second - best < kVoronoiTie) continue;
        ++checked;
        if (d.locate(p) != arg) ++mismatches;
    }
    const double secs = seconds_since(t0);
    o.require(!d.fallback, "sweep fell back");
    o.require(mismatches == 0, std::to_string(mismatches) + " of " + std::to_string(checked) + " queries in the wrong cell");
    o.require(secs < kVoronoiBudget, "runtime " + std::to_string(secs) + " s");
    char buf[120];
    std::snprintf(buf, sizeof buf, "%d/%d non-tie queries matched in %.3f s", checked - mismatches, checked, secs);
    if (o.ok) o.detail = buf;
    return o;
}

std::optional<RefinementAction> random_action(const ConceptHierarchy& h, std::mt19937_64& rng) {
    const auto all = h.words();
    const std::vector<std::string> targets(all.begin(), all.end());
    auto pick = [&](const auto& v) -> const auto& { return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)]; };
    const auto t = pick(targets);
    const auto role = *role_of(h, t);
    const auto kinds = permitted_actions(role);
    const auto kind = pick(kinds);
    std::vector<std::string> concepts;
    for (const auto& [c, n] : h.concepts) concepts.push_back(c);
    std::vector<std::string> others;
    for (const auto& w : h.words()) {
        if (w != t) others.push_back(w);
    }
    RefinementAction a{kind, {t}, {}};
    if (std::bernoulli_distribution(0.7)(rng)) a.destination = pick(concepts);
    switch (kind) {
    case ActionKind::SPLIT:
    case ActionKind::REASSIGN_CHILDREN:
    case ActionKind::CREATE_CONCEPT_FROM_SELECTION:
    case ActionKind::MERGE: {
        const int extra = std::uniform_int_distribution<int>(kind == ActionKind::MERGE ? 1 : 0, 3)(rng);
        const auto& pool = kind == ActionKind::MERGE ? concepts : others;
        for (int i = 0; i < extra && !pool.empty(); ++i) {
            const auto& w = pick(pool);
            if (std::find(a.targets.begin(), a.targets.end(), w) == a.targets.end()) a.targets.push_back(w);
        }
        break;
    }
    case ActionKind::SWAP:
        if (role == Role::CONCEPT && !h.concepts.at(t).descriptors.empty()) {
            a.destination = pick(h.concepts.at(t).descriptors).word;
        }
        break;
    default: break;
    }
    return a;
}

std::string invariant_violation(const ConceptHierarchy& h, const std::set<std::string>& words) {
    if (!h.violations().empty()) return "violations() non-empty";
    std::map<std::string, int> owners;
    for (const auto& [c, node] : h.concepts) {
        if (h.base_words.count(c)) return c + " is both concept and base";
        for (const auto& d : node.descriptors) {
            ++owners[d.word];
            if (h.concepts.count(d.word)) return d.word + " is both concept and descriptor";
            if (h.base_words.count(d.word)) return d.word + " is both descriptor and base";
        }
    }
    for (const auto& [w, n] : owners) {
        if (n != 1) return w + " has " + std::to_string(n) + " parents";
    }
    std::map<std::string, int> supers;
    for (const auto& s : h.super_concepts) {
        for (const auto& c : s.concepts) ++supers[c];
    }
    for (const auto& [c, node] : h.concepts) {
        if (supers[c] != 1) return c + " has " + std::to_string(supers[c]) + " super concepts";
    }
    if (h.words() != words || h.word_count() != words.size()) return "word count not conserved";
    return {};
}

Outcome hierarchy_invariants() {
    Outcome o;
    const auto t = fixtures::toy();
    const auto env = env_of(t.scene);
    const auto words = t.scene.hierarchy.words();
    int total = 0, rejected = 0;
    for (std::uint64_t seed = 1; seed <= 50 && o.ok; ++seed) {
        std::mt19937_64 rng(seed);
        auto h = t.scene.hierarchy;
        int applied = 0, attempts = 0;
        while (applied < 200 && attempts < 20000 && o.ok) {
            ++attempts;
            const auto a = random_action(h, rng);
            const auto before = h;
            try {
                h = apply(*a, h, env);
            } catch (const Error&) {
                ++rejected;
                o.require(h == before, "rejected action mutated the hierarchy");
                continue;
            }
            ++applied;
            const auto why = invariant_violation(h, words);
            o.require(why.empty(), "seed " + std::to_string(seed) + " action " + std::to_string(applied) + ": " + why);
        }
        o.require(applied == 200, "seed " + std::to_string(seed) + " applied only " + std::to_string(applied));
        total += applied;
    }
    if (o.ok) o.detail = std::to_string(total) + " valid actions over 50 seeds, " + std::to_string(rejected) + " invalid rejected";
    return o;
}

Outcome toy_reproduction() {
    Outcome o;
    const auto toy = fixtures::toy();
    const auto& h = toy.scene.hierarchy;
    o.require(h.concepts.count("taxes") && h.concepts.count("medical"), "missing taxes or medical concept");
    if (!o.ok) return o;
    const std::set<std::string> taxes{"cuts", "deductions", "spending", "company"};
    const std::set<std::string> medical{"healthcare", "health", "care", "affordable"};
    o.require(descriptor_set(h, "taxes") == taxes, "taxes descriptors differ");
    o.require(descriptor_set(h, "medical") == medical, "medical descriptors differ");
    o.require(!h.concepts.at("medical").has("system"), "system under medical");
    if (o.ok) o.detail = "taxes {company, cuts, deductions, spending}, medical {affordable, care, health, healthcare}";
    return o;
}

Outcome glyph_formula() {
    Outcome o;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1), pos(0, 100), ang(0, 6.283185307179586);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double sim = u(rng), dist = pos(rng), a = ang(rng);
        const Vec2 owner{pos(rng), pos(rng)};
        const Vec2 c = owner + Vec2{dist * std::cos(a), dist * std::sin(a)};
        const auto s = make_spike(owner, c, sim);
        // measured distance between the actual points, not the requested one
        const double expected = sim * distance(owner, c);
        worst = std::max({worst, std::abs(s.endpoint_distance - expected), std::abs(distance(owner, s.endpoint) - expected)});
        o.require(s.opacity == sim, "opacity differs from similarity");
    }
    o.require(worst <= kGlyphTol, "max endpoint error " + std::to_string(worst));

    auto make = [](std::vector<std::pair<Vec2, double>> spikes) {
        TopicGlyph g;
        g.position = {50, 50};
        for (const auto& [p, sim] : spikes) g.spikes.push_back(make_spike(g.position, p, sim));
        return g;
    };
    const Viewport vp;
    o.require(classify(make({{{10, 10}, 0.0}, {{90, 90}, 0.0}}), vp) == TopicCase::UNREPRESENTED, "unrepresented");
    o.require(classify(make({{{10, 10}, 0.9}, {{90, 90}, 0.0}}), vp) == TopicCase::SINGLE_CONCEPT, "single concept");
    o.require(classify(make({{{40, 40}, 0.8}, {{45, 48}, 0.7}, {{90, 10}, 0.1}}), vp) == TopicCase::MULTI_CONCEPT,
              "multi concept");
    o.require(classify(make({{{0, 0}, 0.8}, {{100, 100}, 0.7}}), vp) == TopicCase::CONCEPT_INCOHERENT, "concept incoherent");
    char buf[120];
    std::snprintf(buf, sizeof buf, "max |endpoint - sim*dist| %.3g over 1000 pairs; four cases classified", worst);
    if (o.ok) o.detail = buf;
    return o;
}

Outcome guided_refinement() {
    Outcome o;
    const auto s = fixtures::planted(true);
    const auto env = env_of(s);
    const auto before = monitor(s.hierarchy, env);
    const auto q = build_queue(before, s.hierarchy, env);
    o.require(!q.empty(), "empty queue");
    if (!o.ok) return o;
    const auto& top = q.front();
    const bool corrective = top.word == "medicare" &&
                            ((top.action.kind == ActionKind::REASSIGN_PARENT && top.action.destination == "health") ||
                             top.action.kind == ActionKind::SWAP);
    o.require(corrective, "top recommendation is " + top.to_json().dump());
    const auto after = monitor(apply(top.action, s.hierarchy, env), env);
    o.require(after.s_dbw < before.s_dbw, "S_Dbw did not decrease");
    char buf[160];
    std::snprintf(buf, sizeof buf, "top %s %s -> %s, S_Dbw %.4f -> %.4f", std::string(to_string(top.action.kind)).c_str(),
                  top.word.c_str(), top.action.destination.value_or("").c_str(), before.s_dbw, after.s_dbw);
    if (o.ok) o.detail = buf;
    return o;
}

Outcome teach_loop() {
    Outcome o;
    const auto s = fixtures::teach();
    const auto env = env_of(s);
    const TopicOptions opt;
    auto run = [&] {
        const auto w0 = reweight_from_concepts(s.hierarchy, WeightTable{});
        const auto tm0 = train(s.corpus, w0, opt);
        const auto promoted = apply({ActionKind::PROMOTE, {"teacher"}, {}}, s.hierarchy, env);
        const auto tm1 = train(s.corpus, reweight_from_concepts(promoted, w0), opt);
        return std::pair{tm0, tm1};
    };
    const auto [tm0, tm1] = run();
    o.require(tm0.assignment.at("d2") == tm0.assignment.at("d0"), "ambiguous document did not start with the budget topic");
    o.require(tm1.assignment.at("d2") == tm1.assignment.at("d1"), "ambiguous document did not move to the teacher topic");
    o.require(tm1.assignment.at("d2") != tm1.assignment.at("d0"), "ambiguous document still with the budget topic");
    const auto [again0, again1] = run();
    o.require(topic_hash(again0) == topic_hash(tm0) && topic_hash(again1) == topic_hash(tm1), "retraining not deterministic");
    if (o.ok) o.detail = "d2 moved from the budget topic to the teacher topic; repeat run identical";
    return o;
}

Outcome determinism_and_replay(const std::string& data) {
    Outcome o;
    SessionSources src;
    src.corpus_path = data + "/debate.jsonl";
    src.embeddings_path = data + "/debate_vectors.txt";
    Session a("a", src, SessionConfig{});
    Session b("b", src, SessionConfig{});
    o.require(a.snapshot()->topic_hash == b.snapshot()->topic_hash, "topic hashes differ across identical sessions");
    o.require(a.snapshot()->hierarchy_hash == b.snapshot()->hierarchy_hash, "hierarchy hashes differ across identical sessions");
    const auto tm = train(a.corpus(), a.snapshot()->weights, a.config().topics);
    o.require(topic_hash(tm) == a.snapshot()->topic_hash, "retraining on the same weights gave another hash");

    // A few recommended and hand-picked actions, then replay the persisted log.
    for (int i = 0; i < 3 && !a.snapshot()->queue.empty(); ++i) a.accept_recommendation(0);
    const auto snap = a.snapshot();
    for (const auto& [c, node] : snap->hierarchy.concepts) {
        if (!node.descriptors.empty()) {
            a.apply_action({ActionKind::PROMOTE, {node.descriptors.front().word}, {}});
            break;
        }
    }
    if (!a.snapshot()->hierarchy.base_words.empty()) {
        a.apply_action({ActionKind::PROMOTE, {*a.snapshot()->hierarchy.base_words.begin()}, {}});
    }
    const auto dir = std::filesystem::temp_directory_path() / "cspace_acceptance_replay";
    std::filesystem::remove_all(dir);
    a.save(dir);
    std::ifstream in(dir / "actions.jsonl");
    const auto entries = read_log(in);
    const auto final_snap = a.snapshot();
    RefinementEnv env;
    env.store = &a.store();
    env.canvas = &final_snap->canvas;
    env.stats = &a.corpus().stats;
    env.params = a.config().abstraction;
    env.params.level = final_snap->hierarchy.level;
    const auto replayed = replay(a.initial_hierarchy(), entries, env);
    o.require(!entries.empty(), "empty log");
    o.require(hierarchy_hash(replayed) == final_snap->hierarchy_hash, "replayed hash differs");
    std::filesystem::remove_all(dir);
    if (o.ok) {
        o.detail = "topic hash " + final_snap->topic_hash.substr(0, 12) + "..., " + std::to_string(entries.size()) +
                   " logged actions replayed to " + final_snap->hierarchy_hash.substr(0, 12) + "...";
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const std::string data = argc > 1 ? argv[1] : CSPACE_TEST_DATA;
    report("parameter_fidelity", parameter_fidelity);
    report("anchored_tsne", anchored_tsne);
    report("quadtree_oracle", quadtree_oracle);
    report("voronoi_oracle", voronoi_oracle);
    report("hierarchy_invariants", hierarchy_invariants);
    report("toy_reproduction", toy_reproduction);
    report("glyph_formula", glyph_formula);
    report("guided_refinement", guided_refinement);
    report("teach_the_model", teach_loop);
    report("determinism_and_replay", [&] { return determinism_and_replay(data); });
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
