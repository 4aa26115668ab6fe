#include "cspace/geometry.hpp"

#include "cspace/error.hpp"

#include <algorithm>
#include <bit>
#include <limits>

namespace cspace {

Vec2 Projection2D::at(std::string_view word) const {
    const auto it = coords.find(word);
    if (it == coords.end()) throw Error(ErrorKind::UnknownWord, std::string(word));
    return it->second;
}

Rect Projection2D::bounds() const {
    if (coords.empty()) return {};
    Rect r{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& [w, p] : coords) {
        r.x0 = std::min(r.x0, p.x);
        r.y0 = std::min(r.y0, p.y);
        r.x1 = std::max(r.x1, p.x);
        r.y1 = std::max(r.y1, p.y);
    }
    return r;
}

std::uint64_t Projection2D::fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xffU;
            h *= 1099511628211ULL;
        }
    };
    for (const auto& [w, p] : coords) {
        for (const char c : w) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        mix(std::bit_cast<std::uint64_t>(p.x));
        mix(std::bit_cast<std::uint64_t>(p.y));
    }
    return h;
}

}  // namespace cspace
