#include "doctest.h"

#include "../support/fixtures.hpp"
#include "cspace/error.hpp"
#include "cspace/layout.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <random>

using namespace cspace;

namespace {

std::size_t brute_overlap_count(const std::vector<CanvasObject>& objs) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < objs.size(); ++i) {
        for (std::size_t j = i + 1; j < objs.size(); ++j) {
            const Rect a = objs[i].box(), b = objs[j].box();
            const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
            const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
            if (w > 0 && h > 0) ++n;
        }
    }
    return n;
}

std::vector<std::pair<std::string, Vec2>> random_sites(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    std::vector<std::pair<std::string, Vec2>> sites;
    for (std::size_t i = 0; i < n; ++i) sites.emplace_back("s" + std::to_string(i), Vec2{u(rng), u(rng)});
    return sites;
}

}  // namespace

TEST_CASE("rescale maps the bounding box onto the target") {
    Projection2D unit;
    unit.coords = {{"a", {0, 0}}, {"b", {1, 1}}, {"c", {0.25, 0.75}}};
    const auto same = rescale(unit, {0, 0, 1, 1});
    for (const auto& [w, p] : unit.coords) {
        CHECK(same.at(w).x == doctest::Approx(p.x));
        CHECK(same.at(w).y == doctest::Approx(p.y));
    }
    Projection2D half;
    half.coords = {{"a", {0, 0}}, {"b", {0.5, 0.5}}, {"c", {0.1, 0.3}}};
    const auto doubled = rescale(half, {0, 0, 1, 1});
    CHECK(doubled.at("b").x == doctest::Approx(1.0));
    CHECK(doubled.at("c").x == doctest::Approx(0.2));
    CHECK(doubled.at("c").y == doctest::Approx(0.6));

    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(3.0, 10.0);
    Projection2D cloud;
    for (int i = 0; i < 200; ++i) cloud.coords["w" + std::to_string(i)] = {g(rng), g(rng)};
    cloud.anchors["w0"] = cloud.coords["w0"];
    const auto r = rescale(cloud, {0, 0, 100, 100});
    const auto b = r.bounds();
    CHECK(b.x0 == doctest::Approx(0.0));
    CHECK(b.x1 == doctest::Approx(100.0));
    CHECK(b.y0 == doctest::Approx(0.0));
    CHECK(b.y1 == doctest::Approx(100.0));
    CHECK(r.anchors.at("w0") == r.at("w0"));
    bool ordered = true;
    for (const auto& [w1, p1] : cloud.coords) {
        for (const auto& [w2, p2] : cloud.coords) {
            if (p1.x < p2.x && !(r.at(w1).x < r.at(w2).x)) ordered = false;
            if (p1.y < p2.y && !(r.at(w1).y < r.at(w2).y)) ordered = false;
        }
    }
    CHECK(ordered);
}

TEST_CASE("rescale edge cases") {
    Projection2D line;
    line.coords = {{"a", {0, 5}}, {"b", {2, 5}}};
    const auto r = rescale(line, {0, 0, 100, 100});
    CHECK(r.at("a").y == doctest::Approx(50.0));
    CHECK(r.at("b").x == doctest::Approx(100.0));
    Projection2D same;
    same.coords = {{"a", {1, 1}}, {"b", {1, 1}}};
    try {
        rescale(same, {0, 0, 1, 1});
        FAIL("expected DegenerateExtent");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateExtent);
    }
    CHECK_THROWS_AS(rescale(Projection2D{}, {0, 0, 1, 1}), Error);
}

TEST_CASE("objects are sized by layer and label length") {
    CHECK(size_class(Layer::KEYWORD) == 1);
    CHECK(size_class(Layer::DESCRIPTOR) == 2 * size_class(Layer::KEYWORD));
    CHECK(size_class(Layer::CONCEPT) == 2 * size_class(Layer::DESCRIPTOR));
    CHECK(size_class(Layer::SUPER_CONCEPT) == 2 * size_class(Layer::CONCEPT));
    const auto o = make_object("taxes", "taxes", Layer::CONCEPT, {10, 10});
    CHECK(o.height == 4.0);
    CHECK(o.width == doctest::Approx(0.6 * 4 * 5));
    for (const Layer l : {Layer::SUPER_CONCEPT, Layer::CONCEPT, Layer::DESCRIPTOR, Layer::TOPIC, Layer::DOCUMENT,
                          Layer::KEYWORD}) {
        CHECK(parse_layer(to_string(l)) == l);
    }
    CHECK_THROWS_AS(parse_layer("nope"), Error);
}

TEST_CASE("overlap reduction") {
    const Viewport vp;
    SUBCASE("disjoint boxes stay put") {
        std::vector<CanvasObject> objs{make_object("a", "ab", Layer::KEYWORD, {10, 10}),
                                       make_object("b", "cd", Layer::KEYWORD, {50, 50})};
        const auto r = reduce_overlap(objs, vp);
        CHECK(r.objects[0].position == objs[0].position);
        CHECK(r.objects[1].position == objs[1].position);
        CHECK(r.iterations == 0);
    }
    SUBCASE("coincident boxes separate along x") {
        std::vector<CanvasObject> objs{make_object("a", "word", Layer::DESCRIPTOR, {50, 50}),
                                       make_object("b", "word", Layer::DESCRIPTOR, {50, 50})};
        const auto r = reduce_overlap(objs, vp);
        CHECK(total_overlap(r.objects) == 0.0);
        CHECK(r.objects[0].position.y == 50.0);
        CHECK(r.objects[1].position.y == 50.0);
        CHECK(r.objects[0].position.x < r.objects[1].position.x);
        CHECK(r.objects[0].position.x + r.objects[1].position.x == doctest::Approx(100.0));
    }
    SUBCASE("200 objects") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(5.0, 95.0);
        std::uniform_int_distribution<int> len(3, 9);
        const Layer layers[] = {Layer::KEYWORD, Layer::DESCRIPTOR, Layer::CONCEPT, Layer::SUPER_CONCEPT};
        std::vector<CanvasObject> objs;
        for (int i = 0; i < 200; ++i) {
            objs.push_back(make_object("o" + std::to_string(i), std::string(static_cast<std::size_t>(len(rng)), 'x'),
                                       layers[i % 4 == 3 && i % 20 != 3 ? 0 : i % 4], {u(rng), u(rng)}));
        }
        const auto before = brute_overlap_count(objs);
        CHECK(overlap_count(objs) == before);
        const auto r = reduce_overlap(objs, vp);
        CHECK(brute_overlap_count(r.objects) < before);
        for (std::size_t i = 1; i < r.overlap_trace.size(); ++i) CHECK(r.overlap_trace[i] < r.overlap_trace[i - 1]);
        CHECK(r.iterations <= 50);
        for (const auto& o : r.objects) {
            const Rect b = o.box();
            if (o.width <= vp.width) {
                CHECK(b.x0 >= -1e-9);
                CHECK(b.x1 <= vp.width + 1e-9);
            }
            CHECK(b.y0 >= -1e-9);
            CHECK(b.y1 <= vp.height + 1e-9);
        }
    }
}

TEST_CASE("position colours") {
    const Viewport vp;
    const auto centre = position_to_lab({50, 50}, vp);
    CHECK(centre.l == 60.0);
    CHECK(centre.a == doctest::Approx(0.0));
    CHECK(centre.b == doctest::Approx(0.0));
    const auto hex = lab_to_hex(centre);
    REQUIRE(hex.size() == 7);
    CHECK(hex.substr(1, 2) == hex.substr(3, 2));
    CHECK(hex.substr(3, 2) == hex.substr(5, 2));
    const auto corner = position_to_lab({0, 100}, vp);
    CHECK(corner.a == doctest::Approx(-80.0));
    CHECK(corner.b == doctest::Approx(80.0));
    CHECK(lab_to_hex({100, 0, 0}) == "#ffffff");
    CHECK(lab_to_hex({0, 0, 0}) == "#000000");
    CHECK(lab_to_hex(position_to_lab({10, 20}, vp)) == lab_to_hex(position_to_lab({10, 20}, vp)));
}

TEST_CASE("descriptors inherit their concept's colour") {
    const auto toy = fixtures::toy();
    const auto& s = toy.scene;
    const auto colors = assign_colors(s.hierarchy, s.canvas, Viewport{});
    for (const auto& [c, node] : s.hierarchy.concepts) {
        for (const auto& d : node.descriptors) CHECK(colors.words.at(d.word) == colors.concepts.at(c));
    }
    CHECK(colors.color_of("system") == nullptr);
    auto twin = s.hierarchy;
    auto canvas = s.canvas;
    canvas.coords["taxes"] = canvas.coords["medical"];
    const auto same = assign_colors(twin, canvas, Viewport{});
    CHECK(same.concepts.at("taxes") == same.concepts.at("medical"));
}

TEST_CASE("colour conflicts fire exactly when the local modal colour differs") {
    for (const bool defect : {true, false}) {
        const auto s = fixtures::planted(defect);
        const auto colors = assign_colors(s.hierarchy, s.canvas, Viewport{});
        const auto flags = color_conflicts(s.hierarchy, s.canvas, colors);
        for (const auto& [w, hex] : colors.words) {
            // Brute-force modal colour of the six nearest coloured neighbours.
            std::vector<std::pair<double, std::string>> near;
            for (const auto& [o, p] : s.canvas.coords) {
                if (o != w && colors.color_of(o)) near.emplace_back(squared_distance(p, s.canvas.at(w)), o);
            }
            std::sort(near.begin(), near.end());
            if (near.size() > 6) near.resize(6);
            std::map<std::string, int> votes;
            for (const auto& [d, o] : near) ++votes[*colors.color_of(o)];
            std::string modal;
            int best = 0;
            for (const auto& [c, n] : votes) {
                if (n > best) {
                    best = n;
                    modal = c;
                }
            }
            CHECK(flags.at(w) == (modal != hex));
        }
        if (defect) {
            CHECK(flags.at("medicare"));
        }
        CHECK_FALSE(flags.at("oil"));
    }
}

TEST_CASE("voronoi basics") {
    const Viewport vp;
    SUBCASE("one site") {
        const auto d = voronoi({{"a", {30, 40}}}, vp);
        REQUIRE(d.cells.size() == 1);
        CHECK(polygon_area(d.cells[0]) == doctest::Approx(vp.width * vp.height));
        CHECK(d.locate({99, 1}) == 0);
    }
    SUBCASE("two sites split on the bisector") {
        const auto d = voronoi({{"a", {20, 30}}, {"b", {70, 60}}}, vp);
        REQUIRE(d.cells.size() == 2);
        CHECK_FALSE(d.fallback);
        CHECK(polygon_area(d.cells[0]) + polygon_area(d.cells[1]) == doctest::Approx(1e4));
        int on_bisector = 0;
        for (const auto& p : d.cells[0]) {
            const double da = distance(p, {20, 30}), db = distance(p, {70, 60});
            if (std::abs(da - db) < 1e-9) ++on_bisector;
            CHECK(da <= db + 1e-9);
        }
        CHECK(on_bisector == 2);
    }
    SUBCASE("no sites") { CHECK(voronoi({}, vp).cells.empty()); }
    SUBCASE("coincident sites are separated") {
        const auto d = voronoi({{"a", {50, 50}}, {"b", {50, 50}}, {"c", {10, 10}}}, vp);
        CHECK(d.sites[0] != d.sites[1]);
        double area = 0;
        for (const auto& c : d.cells) area += polygon_area(c);
        CHECK(area == doctest::Approx(1e4));
    }
    SUBCASE("collinear sites") {
        std::vector<std::pair<std::string, Vec2>> sites;
        for (int i = 0; i < 10; ++i) sites.emplace_back("v" + std::to_string(i), Vec2{50, 5.0 + 10 * i});
        for (int i = 0; i < 10; ++i) sites.emplace_back("h" + std::to_string(i), Vec2{5.0 + 10 * i, 3});
        const auto d = voronoi(sites, vp);
        double area = 0;
        for (const auto& c : d.cells) area += polygon_area(c);
        CHECK(area == doctest::Approx(1e4).epsilon(1e-6));
    }
}

TEST_CASE("voronoi cells match the nearest-site oracle") {
    const Viewport vp;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto sites = random_sites(200, seed);
        const auto t0 = std::chrono::steady_clock::now();
        const auto d = voronoi(sites, vp);
        CHECK_FALSE(d.fallback);
        double area = 0;
        for (const auto& c : d.cells) area += polygon_area(c);
        CHECK(std::abs(area - 1e4) <= 1e-6 * 1e4);

        std::mt19937_64 rng(seed + 1000);
        std::uniform_real_distribution<double> u(0.0, 100.0);
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
            if (second - best < 1e-9) continue;
            ++checked;
            if (d.locate(p) != arg) ++mismatches;
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        CHECK(mismatches == 0);
        CHECK(checked > 9900);
        CHECK(secs < 5.0);
    }
}

TEST_CASE("super-concept regions and layout export") {
    const auto toy = fixtures::toy();
    const auto& s = toy.scene;
    const auto d = super_concept_voronoi(s.hierarchy, s.canvas, Viewport{});
    CHECK(d.cells.size() == s.hierarchy.super_concepts.size());
    CanvasLayout layout;
    layout.objects.push_back(make_object("medical", "medical", Layer::CONCEPT, s.canvas.at("medical")));
    layout.objects.back().color = "#808080";
    layout.voronoi = d;
    const auto j = layout_to_json(layout);
    REQUIRE(j.at("objects").size() == 1);
    const auto& o = j.at("objects")[0];
    CHECK(o.at("id") == "medical");
    CHECK(o.at("layer") == "concept");
    CHECK(o.at("w").get<double>() == doctest::Approx(0.6 * 4 * 7));
    CHECK(o.at("h").get<double>() == 4.0);
    CHECK(o.at("color") == "#808080");
    CHECK(j.at("voronoi").size() == d.cells.size());
    CHECK(j.at("voronoi")[0].contains("site"));
    CHECK(j.at("voronoi")[0].at("polygon").is_array());
}
