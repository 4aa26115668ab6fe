#ifndef CSPACE_GEOMETRY_HPP
#define CSPACE_GEOMETRY_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace cspace {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Vec2&, const Vec2&) = default;
    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
};

inline double squared_distance(Vec2 a, Vec2 b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

inline double distance(Vec2 a, Vec2 b) { return std::sqrt(squared_distance(a, b)); }

/// Closed axis-aligned rectangle.
struct Rect {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;

    bool contains(Vec2 p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
    double diagonal() const { return std::hypot(width(), height()); }
    Vec2 center() const { return {(x0 + x1) / 2.0, (y0 + y1) / 2.0}; }
    /// Squared distance from p to the nearest point of the rectangle.
    double min_squared_distance(Vec2 p) const {
        const double dx = p.x < x0 ? x0 - p.x : (p.x > x1 ? p.x - x1 : 0.0);
        const double dy = p.y < y0 ? y0 - p.y : (p.y > y1 ? p.y - y1 : 0.0);
        return dx * dx + dy * dy;
    }
    bool intersects(const Rect& o) const { return x0 <= o.x1 && o.x0 <= x1 && y0 <= o.y1 && o.y0 <= y1; }

    friend bool operator==(const Rect&, const Rect&) = default;
};

/// Canvas extent in canvas units.
struct Viewport {
    double width = 100.0;
    double height = 100.0;

    Rect rect() const { return {0.0, 0.0, width, height}; }
    double diagonal() const { return std::hypot(width, height); }
};

/// Per-word 2D coordinates plus the anchored subset.
struct Projection2D {
    std::map<std::string, Vec2, std::less<>> coords;
    std::map<std::string, Vec2, std::less<>> anchors;

    bool contains(std::string_view word) const { return coords.find(word) != coords.end(); }
    /// Throws UnknownWord.
    Vec2 at(std::string_view word) const;
    bool empty() const { return coords.empty(); }
    std::size_t size() const { return coords.size(); }
    Rect bounds() const;

    /// FNV-1a over words and coordinate bit patterns; any change in position changes it.
    std::uint64_t fingerprint() const;
};

}  // namespace cspace

#endif
