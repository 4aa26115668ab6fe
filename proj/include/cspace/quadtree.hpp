#ifndef CSPACE_QUADTREE_HPP
#define CSPACE_QUADTREE_HPP

#include "cspace/geometry.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cspace {

struct Neighbor {
    std::string word;
    double distance = 0.0;
};

/**
 * Point quadtree over named 2D points. Every non-empty square is split into
 * four equal squares until each leaf holds a single position; points sharing a
 * position stay together in the leaf's coincident chain.
 *
 * Query results are exact and ordered by (distance, word), so they agree with
 * a brute-force scan under the same lexicographic tie-break.
 */
class QuadTree {
public:
    QuadTree() = default;
    explicit QuadTree(const Projection2D& projection);

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    /// Fingerprint of the projection the tree was built from.
    std::uint64_t source_fingerprint() const { return fingerprint_; }
    std::size_t depth() const;

    /// k nearest points to q; `accept` filters candidates before ranking.
    std::vector<Neighbor> knn(Vec2 q, std::size_t k, const std::function<bool(const std::string&)>& accept = {}) const;

    /// Points inside the closed rectangle, sorted by word.
    std::vector<std::string> region_query(const Rect& r) const;

    /// Points within distance `radius` (inclusive) of `center`, ordered by (distance, word).
    std::vector<Neighbor> radius_query(Vec2 center, double radius) const;

    /// Words stored at exactly `p` (the coincident chain), sorted.
    std::vector<std::string> at(Vec2 p) const;

private:
    struct Point {
        std::string word;
        Vec2 pos;
    };
    struct Node {
        Rect box;
        std::array<int, 4> child{-1, -1, -1, -1};
        std::vector<std::size_t> chain;
        bool leaf = true;
    };

    void insert(std::size_t node, std::size_t point, int depth);
    int quadrant(const Node& node, Vec2 p) const;
    std::size_t depth_of(std::size_t node) const;

    std::vector<Point> points_;
    std::vector<Node> nodes_;
    std::uint64_t fingerprint_ = 0;
};

}  // namespace cspace

#endif
