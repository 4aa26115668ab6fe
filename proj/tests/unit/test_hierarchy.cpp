#include "doctest.h"

#include "../support/fixtures.hpp"
#include "cspace/error.hpp"
#include "cspace/hierarchy.hpp"

#include <nlohmann/json.hpp>

#include <random>

using namespace cspace;
using fixtures::VectorBuilder;

namespace {

std::set<std::string> descriptor_set(const ConceptHierarchy& h, const std::string& c) {
    std::set<std::string> out;
    for (const auto& d : h.concepts.at(c).descriptors) out.insert(d.word);
    return out;
}

Projection2D make_projection(const std::map<std::string, Vec2>& pos) {
    Projection2D p;
    for (const auto& [w, v] : pos) p.coords[w] = v;
    return p;
}

// alpha and beta, each with four private neighbours and two shared ones.
struct TwoClusters {
    EmbeddingStore store;
    Projection2D proj;
};

TwoClusters two_clusters(double shared_alpha, double shared_beta, double private_sim, bool shared_axis) {
    VectorBuilder vb;
    const std::string b_axis = shared_axis ? "A" : "B";
    vb.add("alpha", {{"A", 1.0}});
    vb.add("beta", {{b_axis, 1.0}});
    for (int i = 0; i < 4; ++i) {
        vb.add("a" + std::string(1, char('p' + i)), {{"A", private_sim}});
        vb.add("b" + std::string(1, char('p' + i)), {{b_axis, private_sim}});
    }
    vb.add("shared_one", {{"A", shared_alpha}, {"B", shared_beta}});
    vb.add("shared_two", {{"A", shared_alpha}, {"B", shared_beta}});
    std::map<std::string, Vec2> pos{{"alpha", {20, 50}}, {"beta", {80, 50}}, {"shared_one", {50, 51}}, {"shared_two", {50, 49}}};
    for (int i = 0; i < 4; ++i) {
        pos["a" + std::string(1, char('p' + i))] = {16.0 + i, 48.0 + i};
        pos["b" + std::string(1, char('p' + i))] = {81.0 + i, 48.0 + i};
    }
    return {vb.build(), make_projection(pos)};
}

}  // namespace

TEST_CASE("effective neighbourhood follows the abstraction ladder") {
    CHECK(effective_neighborhood(0) == 6);
    CHECK(effective_neighborhood(2) == 14);
    CHECK(effective_neighborhood(-2) == 3);
    CHECK(effective_neighborhood(1) == 9);
    CHECK(effective_neighborhood(-1) == 4);
    for (int l = kMinLevel; l < kMaxLevel; ++l) CHECK(effective_neighborhood(l) < effective_neighborhood(l + 1));
    CHECK_THROWS_AS(effective_neighborhood(3), Error);
    try {
        effective_neighborhood(-3);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::LevelOutOfRange);
    }
}

TEST_CASE("abstraction parameters") {
    AbstractionParams p;
    CHECK(p.eps_similarity == 0.4);
    CHECK(p.eps_neighborhood == 6);
    CHECK(p.super_factor == 1.5);
    CHECK(p.super_neighborhood() == 9);
    CHECK(p.coherence_threshold() == doctest::Approx(0.4));
    p.level = 2;
    CHECK(p.coherence_threshold() == doctest::Approx(0.48));
    p.eps_similarity = 0.0;
    CHECK_THROWS_AS(p.validate(), Error);
    p.eps_similarity = 0.4;
    p.eps_neighborhood = 0;
    CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("toy walkthrough yields the expected concept sets") {
    const auto toy = fixtures::toy();
    const auto& h = toy.scene.hierarchy;
    REQUIRE(h.concepts.size() == 2);
    CHECK(descriptor_set(h, "taxes") == std::set<std::string>{"cuts", "deductions", "spending", "company"});
    CHECK(descriptor_set(h, "medical") == std::set<std::string>{"healthcare", "health", "care", "affordable"});
    CHECK_FALSE(h.concepts.at("medical").has("system"));
    CHECK(h.is_base("system"));
    CHECK(h.is_base("relief"));
    CHECK(h.violations().empty());
    for (const auto& d : h.concepts.at("medical").descriptors) {
        if (d.word == "healthcare") CHECK(d.provenance == Provenance::USER_DEFINED);
        if (d.word == "affordable") CHECK(d.provenance == Provenance::TOPIC_DESCRIPTOR);
    }
    // Keyword insertion put the document keywords under the closest concept.
    const auto taxes = std::find_if(toy.gathered.begin(), toy.gathered.end(),
                                    [](const ConceptVector& v) { return v.concept_word == "taxes"; });
    REQUIRE(taxes != toy.gathered.end());
    CHECK(taxes->has("company"));
    CHECK(taxes->has("spending"));
}

TEST_CASE("a dense neighbourhood forms a cluster that gains its neighbours") {
    VectorBuilder vb;
    vb.add("medical", {{"M", 1.0}});
    const std::vector<std::string> near{"health", "care", "clinic", "doctor", "nurse", "hospital"};
    for (const auto& w : near) vb.add(w, {{"M", 0.8}});
    vb.add("tonight");
    const auto store = vb.build();
    std::map<std::string, Vec2> pos{{"medical", {50, 50}}, {"tonight", {90, 90}}};
    for (std::size_t i = 0; i < near.size(); ++i) pos[near[i]] = {48.0 + static_cast<double>(i), 52.0};
    const auto proj = make_projection(pos);
    const QuadTree qt(proj);
    const auto cs = cluster_level({"medical"}, proj, qt, store, {}, {});
    REQUIRE(cs.clusters.size() == 1);
    CHECK(cs.clusters[0].head == "medical");
    CHECK(cs.clusters[0].members.count("health") == 1);
    CHECK(cs.clusters[0].members.size() == 6);
    CHECK(cs.unclustered.empty());
}

TEST_CASE("an isolated candidate forms no cluster") {
    VectorBuilder vb;
    vb.add("lonely");
    for (int i = 0; i < 8; ++i) vb.add("w" + std::to_string(i));
    const auto store = vb.build();
    std::map<std::string, Vec2> pos{{"lonely", {0, 0}}};
    for (int i = 0; i < 8; ++i) pos["w" + std::to_string(i)] = {1.0 + i, 1.0};
    const auto proj = make_projection(pos);
    const auto cs = cluster_level({"lonely"}, proj, QuadTree(proj), store, {}, {});
    CHECK(cs.clusters.empty());
    CHECK(cs.unclustered == std::vector<std::string>{"lonely"});
}

TEST_CASE("incoherent overlapping clusters redistribute without losing members") {
    const auto f = two_clusters(0.5, 0.6, 0.7, false);
    const QuadTree qt(f.proj);
    std::set<std::string> before;
    for (const char* head : {"alpha", "beta"}) {
        const auto alone = cluster_level({head}, f.proj, qt, f.store, {}, {});
        REQUIRE(alone.clusters.size() == 1);
        before.insert(alone.clusters[0].members.begin(), alone.clusters[0].members.end());
    }
    const auto cs = cluster_level({"alpha", "beta"}, f.proj, qt, f.store, {}, {});
    REQUIRE(cs.clusters.size() == 2);
    std::set<std::string> after;
    std::size_t total = 0;
    for (const auto& c : cs.clusters) {
        after.insert(c.members.begin(), c.members.end());
        total += c.members.size();
        CHECK(c.absorbed.empty());
    }
    CHECK(after == before);
    CHECK(total == after.size());
    // Shared members lean towards beta.
    const auto& beta = cs.clusters[0].head == "beta" ? cs.clusters[0] : cs.clusters[1];
    CHECK(beta.members.count("shared_one") == 1);
    CHECK(beta.members.count("shared_two") == 1);
}

TEST_CASE("coherent overlapping clusters merge under the higher-ranked head") {
    const auto f = two_clusters(0.9, 0.0, 0.9, true);
    const QuadTree qt(f.proj);
    const std::map<std::string, double> scores{{"alpha", 1.0}, {"beta", 2.0}};
    const auto cs = cluster_level({"alpha", "beta"}, f.proj, qt, f.store, {}, scores);
    REQUIRE(cs.clusters.size() == 1);
    CHECK(cs.clusters[0].head == "beta");
    CHECK(cs.clusters[0].absorbed == std::vector<std::string>{"alpha"});
    std::set<std::string> seen;
    for (const auto& c : cs.clusters) {
        seen.insert(c.head);
        seen.insert(c.absorbed.begin(), c.absorbed.end());
    }
    seen.insert(cs.unclustered.begin(), cs.unclustered.end());
    CHECK(seen == std::set<std::string>{"alpha", "beta"});
}

TEST_CASE("a quadtree from another projection is rejected") {
    const auto f = two_clusters(0.5, 0.6, 0.7, false);
    auto moved = f.proj;
    moved.coords["alpha"].x += 1.0;
    try {
        cluster_level({"alpha"}, moved, QuadTree(f.proj), f.store, {}, {});
        FAIL("expected StaleIndex");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::StaleIndex);
    }
}

TEST_CASE("build_hierarchy needs a placed concept") {
    const auto s = fixtures::planted(false);
    ConceptVector v;
    v.concept_word = "nowhere";
    try {
        build_hierarchy({v}, s.canvas, s.qt, s.store, s.params, s.scores);
        FAIL("expected NoConcepts");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NoConcepts);
    }
}

TEST_CASE("a single concept gets its own super concept") {
    const auto s = fixtures::swap_scene();
    REQUIRE(s.hierarchy.super_concepts.size() == 1);
    CHECK(s.hierarchy.super_concepts[0].concepts == std::vector<std::string>{"economy"});
    CHECK(s.hierarchy.super_concepts[0].label == "economy");
    CHECK(s.hierarchy.level_of("economy") == Level::CONCEPT);
    CHECK(s.hierarchy.violations().empty());
}

TEST_CASE("isolated concepts stay separate super concepts") {
    const auto s = fixtures::planted(false);
    CHECK(s.hierarchy.super_concepts.size() == 2);
    for (const auto& sc : s.hierarchy.super_concepts) CHECK(sc.concepts.size() == 1);
}

namespace {

fixtures::Scene themed_scene(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    VectorBuilder vb;
    std::map<std::string, Vec2> pos;
    std::map<std::string, std::vector<std::string>> concepts;
    for (int t = 0; t < 4; ++t) {
        const std::string axis = "t" + std::to_string(t);
        for (int c = 0; c < 3; ++c) {
            const std::string cw = "c" + std::to_string(t) + std::to_string(c);
            vb.add(cw, {{axis, 0.75}});
            pos[cw] = {u(rng), u(rng)};
            for (int d = 0; d < 3; ++d) {
                const std::string dw = cw + "d" + std::to_string(d);
                vb.add(dw, {{axis, 0.7}});
                pos[dw] = pos[cw] + Vec2{d + 1.0, 1.0};
                concepts[cw].push_back(dw);
            }
        }
    }
    std::vector<std::string> texts;
    for (const auto& [c, ds] : concepts) texts.push_back(c + " " + ds[0]);
    return fixtures::make_scene(fixtures::small_corpus(texts), vb.build(), pos, concepts);
}

}  // namespace

TEST_CASE("super concepts: idempotent, layer-local, and coarser at higher levels") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto s = themed_scene(seed);
        const auto again = rebuild_super_concepts(s.hierarchy, s.canvas, s.store, s.params);
        CHECK(again == s.hierarchy);
        std::size_t prev = s.hierarchy.concepts.size() + 1;
        for (int level = kMinLevel; level <= kMaxLevel; ++level) {
            auto p = s.params;
            p.level = level;
            const auto h = rebuild_super_concepts(s.hierarchy, s.canvas, s.store, p);
            CHECK(h.super_concepts.size() <= prev);
            prev = h.super_concepts.size();
            CHECK(h.violations().empty());
            CHECK(h.base_words == s.hierarchy.base_words);
            for (const auto& [c, node] : h.concepts) {
                CHECK(node.descriptors == s.hierarchy.concepts.at(c).descriptors);
                // The label is the highest-scoring member.
                const auto* sc = h.super_of(c);
                REQUIRE(sc);
                CHECK(h.concepts.at(sc->label).score >= node.score);
            }
        }
    }
}

TEST_CASE("level_of ranks super-concept labels above plain concepts") {
    const auto s = themed_scene(3);
    const auto& h = s.hierarchy;
    for (const auto& sc : h.super_concepts) {
        for (const auto& c : sc.concepts) {
            if (c == sc.label && sc.concepts.size() > 1) {
                CHECK(h.level_of(c) == Level::SUPER_CONCEPT);
            } else {
                CHECK(h.level_of(c) == Level::CONCEPT);
            }
        }
    }
    CHECK(h.level_of("c00d0") == Level::DESCRIPTOR);
    auto demoted = h;
    demoted.concepts.at("c00").descriptors.erase(demoted.concepts.at("c00").descriptors.begin());
    demoted.base_words.insert("c00d0");
    demoted.demoted.insert("c00d0");
    CHECK(demoted.level_of("c00d0") == Level::DEMOTED);
    CHECK(demoted.level_of("unknown") == Level::BASE);
}

TEST_CASE("hierarchy JSON round trip and hash") {
    const auto toy = fixtures::toy();
    const auto& h = toy.scene.hierarchy;
    const auto j = hierarchy_to_json(h);
    CHECK(j.at("super_concepts").is_array());
    const auto back = hierarchy_from_json(j);
    CHECK(back == h);
    CHECK(hierarchy_hash(back) == hierarchy_hash(h));
    CHECK(hierarchy_hash(h).size() == 16);
    auto changed = h;
    changed.base_words.insert("extra");
    CHECK(hierarchy_hash(changed) != hierarchy_hash(h));
    CHECK_THROWS_AS(hierarchy_from_json(nlohmann::json::parse(R"({"super_concepts": 3})")), Error);
    CHECK_THROWS_AS(hierarchy_from_json(nlohmann::json::parse(R"([1, 2])")), Error);
}

TEST_CASE("to_concept_vectors rebuilds the same concept layer") {
    const auto s = fixtures::planted(true);
    const auto vectors = to_concept_vectors(s.hierarchy);
    REQUIRE(vectors.size() == s.hierarchy.concepts.size());
    for (const auto& v : vectors) CHECK(v.descriptors == s.hierarchy.concepts.at(v.concept_word).descriptors);
}
