#include "cspace/quadtree.hpp"

#include <algorithm>
#include <queue>
#include <tuple>

namespace cspace {

namespace {

constexpr int kMaxDepth = 64;

}  // namespace

QuadTree::QuadTree(const Projection2D& projection) : fingerprint_(projection.fingerprint()) {
    if (projection.empty()) return;
    const Rect b = projection.bounds();
    double side = std::max(b.width(), b.height());
    if (side <= 0.0) side = 1.0;
    side *= 1.0 + 1e-9;
    nodes_.emplace_back();
    nodes_.back().box = Rect{b.x0, b.y0, b.x0 + side, b.y0 + side};
    points_.reserve(projection.size());
    for (const auto& [w, p] : projection.coords) {
        points_.push_back({w, p});
        insert(0, points_.size() - 1, 0);
    }
}

int QuadTree::quadrant(const Node& node, Vec2 p) const {
    const Vec2 c = node.box.center();
    return (p.x >= c.x ? 1 : 0) + (p.y >= c.y ? 2 : 0);
}

void QuadTree::insert(std::size_t node, std::size_t point, int depth) {
    if (nodes_[node].leaf) {
        auto& chain = nodes_[node].chain;
        if (chain.empty() || points_[chain.front()].pos == points_[point].pos || depth >= kMaxDepth) {
            chain.push_back(point);
            return;
        }
        // Split: the resident chain moves down one level.
        const Rect box = nodes_[node].box;
        const Vec2 c = box.center();
        const Rect quads[4] = {{box.x0, box.y0, c.x, c.y},
                               {c.x, box.y0, box.x1, c.y},
                               {box.x0, c.y, c.x, box.y1},
                               {c.x, c.y, box.x1, box.y1}};
        for (int q = 0; q < 4; ++q) {
            nodes_.emplace_back();
            nodes_.back().box = quads[q];
            nodes_[node].child[q] = static_cast<int>(nodes_.size() - 1);
        }
        nodes_[node].leaf = false;
        auto resident = std::move(nodes_[node].chain);
        nodes_[node].chain.clear();
        const int rq = quadrant(nodes_[node], points_[resident.front()].pos);
        const auto target = static_cast<std::size_t>(nodes_[node].child[rq]);
        nodes_[target].chain = std::move(resident);
    }
    const int q = quadrant(nodes_[node], points_[point].pos);
    insert(static_cast<std::size_t>(nodes_[node].child[q]), point, depth + 1);
}

std::size_t QuadTree::depth_of(std::size_t node) const {
    if (nodes_[node].leaf) return 0;
    std::size_t d = 0;
    for (const int c : nodes_[node].child) d = std::max(d, depth_of(static_cast<std::size_t>(c)));
    return d + 1;
}

std::size_t QuadTree::depth() const { return nodes_.empty() ? 0 : depth_of(0); }

std::vector<Neighbor> QuadTree::knn(Vec2 q, std::size_t k, const std::function<bool(const std::string&)>& accept) const {
    std::vector<Neighbor> out;
    if (nodes_.empty() || k == 0) return out;

    using Cand = std::pair<double, std::size_t>;  // (squared distance, point index)
    const auto worse = [&](const Cand& a, const Cand& b) {
        return a.first < b.first || (a.first == b.first && points_[a.second].word < points_[b.second].word);
    };
    std::priority_queue<Cand, std::vector<Cand>, decltype(worse)> best(worse);

    using Frontier = std::pair<double, std::size_t>;  // (min squared distance, node)
    std::priority_queue<Frontier, std::vector<Frontier>, std::greater<>> frontier;
    frontier.push({nodes_[0].box.min_squared_distance(q), 0});
    while (!frontier.empty()) {
        const auto [mind, node] = frontier.top();
        frontier.pop();
        if (best.size() == k && mind > best.top().first) break;
        const Node& nd = nodes_[node];
        if (nd.leaf) {
            for (const std::size_t p : nd.chain) {
                if (accept && !accept(points_[p].word)) continue;
                const Cand c{squared_distance(points_[p].pos, q), p};
                if (best.size() < k) {
                    best.push(c);
                } else if (worse(c, best.top())) {
                    best.pop();
                    best.push(c);
                }
            }
            continue;
        }
        for (const int c : nd.child) {
            const auto ci = static_cast<std::size_t>(c);
            frontier.push({nodes_[ci].box.min_squared_distance(q), ci});
        }
    }
    out.resize(best.size());
    for (std::size_t i = out.size(); i-- > 0;) {
        const auto [d2, p] = best.top();
        best.pop();
        out[i] = {points_[p].word, std::sqrt(d2)};
    }
    return out;
}

std::vector<std::string> QuadTree::region_query(const Rect& r) const {
    std::vector<std::string> out;
    if (nodes_.empty()) return out;
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
        const std::size_t node = stack.back();
        stack.pop_back();
        const Node& nd = nodes_[node];
        if (!nd.box.intersects(r)) continue;
        if (nd.leaf) {
            for (const std::size_t p : nd.chain) {
                if (r.contains(points_[p].pos)) out.push_back(points_[p].word);
            }
            continue;
        }
        for (const int c : nd.child) stack.push_back(static_cast<std::size_t>(c));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Neighbor> QuadTree::radius_query(Vec2 center, double radius) const {
    std::vector<std::pair<double, std::size_t>> hits;
    if (!nodes_.empty() && radius >= 0.0) {
        const double r2 = radius * radius;
        std::vector<std::size_t> stack{0};
        while (!stack.empty()) {
            const std::size_t node = stack.back();
            stack.pop_back();
            const Node& nd = nodes_[node];
            if (nd.box.min_squared_distance(center) > r2) continue;
            if (nd.leaf) {
                for (const std::size_t p : nd.chain) {
                    const double d2 = squared_distance(points_[p].pos, center);
                    if (d2 <= r2) hits.emplace_back(d2, p);
                }
                continue;
            }
            for (const int c : nd.child) stack.push_back(static_cast<std::size_t>(c));
        }
    }
    std::sort(hits.begin(), hits.end(), [&](const auto& a, const auto& b) {
        return a.first < b.first || (a.first == b.first && points_[a.second].word < points_[b.second].word);
    });
    std::vector<Neighbor> out;
    out.reserve(hits.size());
    for (const auto& [d2, p] : hits) out.push_back({points_[p].word, std::sqrt(d2)});
    return out;
}

std::vector<std::string> QuadTree::at(Vec2 p) const {
    std::vector<std::string> out;
    for (const auto& n : radius_query(p, 0.0)) out.push_back(n.word);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace cspace
