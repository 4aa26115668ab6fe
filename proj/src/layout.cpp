#include "cspace/layout.hpp"

#include "cspace/error.hpp"
#include "cspace/quadtree.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <memory>
#include <queue>
#include <set>

namespace cspace {

using json = nlohmann::json;

Projection2D rescale(const Projection2D& p, const Rect& target) {
    if (p.empty()) throw Error(ErrorKind::DegenerateExtent, "empty projection");
    const Rect b = p.bounds();
    if (b.width() == 0.0 && b.height() == 0.0) throw Error(ErrorKind::DegenerateExtent, "all points coincide");
    auto map_x = [&](double x) {
        return b.width() == 0.0 ? target.center().x : target.x0 + (x - b.x0) / b.width() * target.width();
    };
    auto map_y = [&](double y) {
        return b.height() == 0.0 ? target.center().y : target.y0 + (y - b.y0) / b.height() * target.height();
    };
    Projection2D out;
    for (const auto& [w, v] : p.coords) out.coords[w] = {map_x(v.x), map_y(v.y)};
    for (const auto& [w, v] : p.anchors) out.anchors[w] = {map_x(v.x), map_y(v.y)};
    return out;
}

std::string_view to_string(Layer layer) {
    switch (layer) {
    case Layer::SUPER_CONCEPT: return "super_concept";
    case Layer::CONCEPT: return "concept";
    case Layer::DESCRIPTOR: return "descriptor";
    case Layer::TOPIC: return "topic";
    case Layer::DOCUMENT: return "document";
    case Layer::KEYWORD: return "keyword";
    }
    return "keyword";
}

Layer parse_layer(std::string_view name) {
    for (const Layer l : {Layer::SUPER_CONCEPT, Layer::CONCEPT, Layer::DESCRIPTOR, Layer::TOPIC, Layer::DOCUMENT,
                          Layer::KEYWORD}) {
        if (to_string(l) == name) return l;
    }
    throw Error(ErrorKind::InvalidArgument, "unknown layer " + std::string(name));
}

double size_class(Layer layer) {
    switch (layer) {
    case Layer::SUPER_CONCEPT: return 8.0;
    case Layer::CONCEPT:
    case Layer::TOPIC: return 4.0;
    case Layer::DESCRIPTOR:
    case Layer::DOCUMENT: return 2.0;
    case Layer::KEYWORD: return 1.0;
    }
    return 1.0;
}

CanvasObject make_object(std::string id, std::string label, Layer layer, Vec2 position) {
    CanvasObject o;
    o.id = std::move(id);
    o.label = std::move(label);
    o.layer = layer;
    o.position = position;
    o.height = size_class(layer);
    o.width = 0.6 * o.height * static_cast<double>(o.label.size());
    return o;
}

namespace {

double intersection_area(const Rect& a, const Rect& b) {
    const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
    return w > 0.0 && h > 0.0 ? w * h : 0.0;
}

std::string index_key(std::size_t i) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%012zu", i);
    return buf;
}

// Pairs (i < j) with positive intersection area.
std::vector<std::pair<std::size_t, std::size_t>> overlapping_pairs(const std::vector<CanvasObject>& objects) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (objects.size() < 2) return out;
    Projection2D centres;
    double max_w = 0.0, max_h = 0.0;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        centres.coords[index_key(i)] = objects[i].position;
        max_w = std::max(max_w, objects[i].width);
        max_h = std::max(max_h, objects[i].height);
    }
    const QuadTree qt(centres);
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const auto& o = objects[i];
        const double rx = (o.width + max_w) / 2.0, ry = (o.height + max_h) / 2.0;
        const Rect search{o.position.x - rx, o.position.y - ry, o.position.x + rx, o.position.y + ry};
        const Rect bi = o.box();
        for (const auto& key : qt.region_query(search)) {
            const auto j = static_cast<std::size_t>(std::stoull(key));
            if (j <= i) continue;
            if (intersection_area(bi, objects[j].box()) > 0.0) out.emplace_back(i, j);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void clamp_into(CanvasObject& o, const Viewport& v) {
    auto clamp_axis = [](double c, double half, double extent) {
        if (2.0 * half >= extent) return extent / 2.0;
        return std::clamp(c, half, extent - half);
    };
    o.position.x = clamp_axis(o.position.x, o.width / 2.0, v.width);
    o.position.y = clamp_axis(o.position.y, o.height / 2.0, v.height);
}

}  // namespace

double total_overlap(const std::vector<CanvasObject>& objects) {
    double sum = 0.0;
    for (const auto& [i, j] : overlapping_pairs(objects)) sum += intersection_area(objects[i].box(), objects[j].box());
    return sum;
}

std::size_t overlap_count(const std::vector<CanvasObject>& objects) { return overlapping_pairs(objects).size(); }

OverlapResult reduce_overlap(std::vector<CanvasObject> objects, const Viewport& viewport, const OverlapOptions& options) {
    OverlapResult r;
    for (auto& o : objects) clamp_into(o, viewport);
    double current = total_overlap(objects);
    r.overlap_trace.push_back(current);
    for (int it = 0; it < options.max_iterations && current > 0.0; ++it) {
        std::vector<Vec2> disp(objects.size());
        for (const auto& [i, j] : overlapping_pairs(objects)) {
            Vec2 dir = objects[j].position - objects[i].position;
            const double len = std::hypot(dir.x, dir.y);
            dir = len > 0.0 ? (1.0 / len) * dir : Vec2{1.0, 0.0};
            const Rect a = objects[i].box(), b = objects[j].box();
            const double ox = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
            const double oy = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
            const double inf = std::numeric_limits<double>::infinity();
            const double mx = dir.x != 0.0 ? ox / std::abs(dir.x) : inf;
            const double my = dir.y != 0.0 ? oy / std::abs(dir.y) : inf;
            const double m = std::min(mx, my) / 2.0;
            disp[i] = disp[i] - m * dir;
            disp[j] = disp[j] + m * dir;
        }
        bool accepted = false;
        for (double step = 1.0; step > 1.0 / 256.0; step /= 2.0) {
            auto trial = objects;
            for (std::size_t k = 0; k < trial.size(); ++k) {
                trial[k].position = trial[k].position + step * disp[k];
                clamp_into(trial[k], viewport);
            }
            const double next = total_overlap(trial);
            if (next < current) {
                objects = std::move(trial);
                current = next;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        r.overlap_trace.push_back(current);
        ++r.iterations;
    }
    r.objects = std::move(objects);
    return r;
}

Lab position_to_lab(Vec2 p, const Viewport& viewport, const ColorOptions& options) {
    const double span = options.channel_max - options.channel_min;
    const double tx = std::clamp(p.x / viewport.width, 0.0, 1.0);
    const double ty = std::clamp(p.y / viewport.height, 0.0, 1.0);
    return {options.lightness, options.channel_min + span * tx, options.channel_min + span * ty};
}

std::string lab_to_hex(const Lab& lab) {
    const double fy = (lab.l + 16.0) / 116.0;
    const double fx = fy + lab.a / 500.0;
    const double fz = fy - lab.b / 200.0;
    constexpr double delta = 6.0 / 29.0;
    auto finv = [&](double t) { return t > delta ? t * t * t : 3.0 * delta * delta * (t - 4.0 / 29.0); };
    const double x = 0.95047 * finv(fx), y = 1.0 * finv(fy), z = 1.08883 * finv(fz);
    const double lin[3] = {3.2404542 * x - 1.5371385 * y - 0.4985314 * z,
                           -0.9692660 * x + 1.8760108 * y + 0.0415560 * z,
                           0.0556434 * x - 0.2040259 * y + 1.0572252 * z};
    char buf[8];
    int rgb[3];
    for (int i = 0; i < 3; ++i) {
        const double c = lin[i] <= 0.0031308 ? 12.92 * lin[i] : 1.055 * std::pow(lin[i], 1.0 / 2.4) - 0.055;
        rgb[i] = static_cast<int>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
    }
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
    return buf;
}

const std::string* ColorAssignment::color_of(const std::string& w) const {
    if (const auto it = concepts.find(w); it != concepts.end()) return &it->second;
    if (const auto it = words.find(w); it != words.end()) return &it->second;
    return nullptr;
}

ColorAssignment assign_colors(const ConceptHierarchy& h, const Projection2D& canvas, const Viewport& viewport,
                              const ColorOptions& options) {
    ColorAssignment out;
    for (const auto& [c, node] : h.concepts) {
        if (!canvas.contains(c)) continue;
        const auto hex = lab_to_hex(position_to_lab(canvas.at(c), viewport, options));
        out.concepts[c] = hex;
        for (const auto& d : node.descriptors) out.words[d.word] = hex;
    }
    return out;
}

std::map<std::string, bool> color_conflicts(const ConceptHierarchy& h, const Projection2D& canvas,
                                            const ColorAssignment& colors, std::size_t k) {
    std::map<std::string, bool> out;
    const QuadTree qt(canvas);
    for (const auto& [w, hex] : colors.words) {
        if (!canvas.contains(w)) continue;
        const auto nn = qt.knn(canvas.at(w), k, [&](const std::string& n) { return n != w && colors.color_of(n); });
        std::map<std::string, int> votes;
        for (const auto& n : nn) ++votes[*colors.color_of(n.word)];
        if (votes.empty()) {
            out[w] = false;
            continue;
        }
        const auto modal = std::max_element(votes.begin(), votes.end(), [](const auto& a, const auto& b) {
            return a.second < b.second || (a.second == b.second && a.first > b.first);
        });
        out[w] = modal->first != hex;
    }
    (void)h;
    return out;
}

double polygon_area(const std::vector<Vec2>& poly) {
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2 p = poly[i], q = poly[(i + 1) % poly.size()];
        a += p.x * q.y - q.x * p.y;
    }
    return std::abs(a) / 2.0;
}

int VoronoiDiagram::locate(Vec2 p) const {
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& poly = cells[c];
        if (poly.size() < 3) continue;
        bool inside = true;
        for (std::size_t i = 0; i < poly.size() && inside; ++i) {
            const Vec2 a = poly[i], b = poly[(i + 1) % poly.size()];
            inside = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= -1e-12;
        }
        if (inside) return static_cast<int>(c);
    }
    return -1;
}

namespace {

// Keeps the part of a convex polygon where n . p <= c.
std::vector<Vec2> clip(const std::vector<Vec2>& poly, Vec2 n, double c) {
    std::vector<Vec2> out;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2 p = poly[i], q = poly[(i + 1) % poly.size()];
        const double dp = n.x * p.x + n.y * p.y - c;
        const double dq = n.x * q.x + n.y * q.y - c;
        if (dp <= 0.0) out.push_back(p);
        if ((dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0)) {
            const double t = dp / (dp - dq);
            out.push_back(p + t * (q - p));
        }
    }
    return out;
}

std::vector<Vec2> cell_for(std::size_t i, const std::vector<Vec2>& sites, const std::vector<std::size_t>& others,
                           const Rect& box) {
    std::vector<Vec2> poly{{box.x0, box.y0}, {box.x1, box.y0}, {box.x1, box.y1}, {box.x0, box.y1}};
    const Vec2 s = sites[i];
    for (const std::size_t j : others) {
        const Vec2 t = sites[j];
        const Vec2 n = t - s;
        const double c = (t.x * t.x + t.y * t.y - s.x * s.x - s.y * s.y) / 2.0;
        poly = clip(poly, n, c);
        if (poly.empty()) break;
    }
    return poly;
}

// Fortune's sweep with the line moving in +x and a linked-list beach line
// ordered by y. Only the adjacency of arcs is collected.
class FortuneSweep {
public:
    explicit FortuneSweep(const std::vector<Vec2>& sites) : sites_(sites) {}

    std::set<std::pair<std::size_t, std::size_t>> run() {
        std::vector<std::size_t> order(sites_.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return sites_[a].x < sites_[b].x || (sites_[a].x == sites_[b].x && sites_[a].y < sites_[b].y);
        });
        std::size_t next = 0;
        while (next < order.size()) {
            if (!events_.empty() && events_.top()->x <= sites_[order[next]].x) {
                process_event();
            } else {
                insert_site(order[next++]);
            }
        }
        while (!events_.empty()) process_event();
        return pairs_;
    }

private:
    struct Event;
    struct Arc {
        std::size_t site;
        Arc* prev = nullptr;
        Arc* next = nullptr;
        Event* event = nullptr;
    };
    struct Event {
        double x;
        Arc* arc;
        bool valid = true;
    };
    struct Later {
        bool operator()(const Event* a, const Event* b) const { return a->x > b->x; }
    };

    Arc* new_arc(std::size_t site, Arc* prev, Arc* next) {
        arcs_.push_back(std::make_unique<Arc>(Arc{site, prev, next, nullptr}));
        return arcs_.back().get();
    }

    void link(const Arc* a, const Arc* b) {
        if (!a || !b || a->site == b->site) return;
        pairs_.insert(std::minmax(a->site, b->site));
    }

    // Breakpoint y of the parabolas for sites p0 (below) and p1 (above) at sweep position l.
    Vec2 breakpoint(Vec2 p0, Vec2 p1, double l) const {
        Vec2 res;
        Vec2 p = p0;
        if (p0.x == p1.x) {
            res.y = (p0.y + p1.y) / 2.0;
        } else if (p1.x == l) {
            res.y = p1.y;
        } else if (p0.x == l) {
            res.y = p0.y;
            p = p1;
        } else {
            const double z0 = 2.0 * (p0.x - l);
            const double z1 = 2.0 * (p1.x - l);
            const double a = 1.0 / z0 - 1.0 / z1;
            const double b = -2.0 * (p0.y / z0 - p1.y / z1);
            const double c = (p0.y * p0.y + p0.x * p0.x - l * l) / z0 - (p1.y * p1.y + p1.x * p1.x - l * l) / z1;
            res.y = (-b - std::sqrt(std::max(0.0, b * b - 4.0 * a * c))) / (2.0 * a);
        }
        res.x = (p.x * p.x + (p.y - res.y) * (p.y - res.y) - l * l) / (2.0 * p.x - 2.0 * l);
        return res;
    }

    bool hits(Vec2 p, const Arc* arc) const {
        const Vec2 f = sites_[arc->site];
        if (f.x == p.x) return false;
        double lo = 0.0, hi = 0.0;
        if (arc->prev) lo = breakpoint(sites_[arc->prev->site], f, p.x).y;
        if (arc->next) hi = breakpoint(f, sites_[arc->next->site], p.x).y;
        return (!arc->prev || lo <= p.y) && (!arc->next || p.y <= hi);
    }

    void insert_site(std::size_t s) {
        const Vec2 p = sites_[s];
        if (!root_) {
            root_ = new_arc(s, nullptr, nullptr);
            return;
        }
        for (Arc* i = root_; i; i = i->next) {
            if (!hits(p, i)) continue;
            if (i->next && !hits(p, i->next)) {
                i->next->prev = new_arc(i->site, i, i->next);
                i->next = i->next->prev;
            } else {
                i->next = new_arc(i->site, i, i->next);
                if (i->next->next) i->next->next->prev = i->next;
            }
            Arc* mid = new_arc(s, i, i->next);
            i->next->prev = mid;
            i->next = mid;
            link(mid->prev, mid);
            link(mid, mid->next);
            check_circle(mid, p.x);
            check_circle(mid->prev, p.x);
            check_circle(mid->next, p.x);
            return;
        }
        Arc* last = root_;
        while (last->next) last = last->next;
        last->next = new_arc(s, last, nullptr);
        link(last, last->next);
    }

    void process_event() {
        Event* e = events_.top();
        events_.pop();
        if (!e->valid) return;
        Arc* a = e->arc;
        a->event = nullptr;
        if (a->prev) a->prev->next = a->next;
        if (a->next) a->next->prev = a->prev;
        if (a == root_) root_ = a->next;
        link(a->prev, a->next);
        if (a->prev) check_circle(a->prev, e->x);
        if (a->next) check_circle(a->next, e->x);
    }

    void check_circle(Arc* i, double x0) {
        if (i->event) i->event->valid = false;
        i->event = nullptr;
        if (!i->prev || !i->next) return;
        const Vec2 a = sites_[i->prev->site], b = sites_[i->site], c = sites_[i->next->site];
        if ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y) > 0.0) return;
        const double A = b.x - a.x, B = b.y - a.y, C = c.x - a.x, D = c.y - a.y;
        const double E = A * (a.x + b.x) + B * (a.y + b.y);
        const double F = C * (a.x + c.x) + D * (a.y + c.y);
        const double G = 2.0 * (A * (c.y - b.y) - B * (c.x - b.x));
        if (G == 0.0) return;
        const Vec2 o{(D * E - B * F) / G, (A * F - C * E) / G};
        const double x = o.x + std::hypot(a.x - o.x, a.y - o.y);
        if (!(x > x0)) return;
        events_store_.push_back(std::make_unique<Event>(Event{x, i}));
        i->event = events_store_.back().get();
        events_.push(i->event);
    }

    const std::vector<Vec2>& sites_;
    Arc* root_ = nullptr;
    std::vector<std::unique_ptr<Arc>> arcs_;
    std::vector<std::unique_ptr<Event>> events_store_;
    std::priority_queue<Event*, std::vector<Event*>, Later> events_;
    std::set<std::pair<std::size_t, std::size_t>> pairs_;
};

}  // namespace

VoronoiDiagram voronoi(const std::vector<std::pair<std::string, Vec2>>& sites, const Viewport& viewport) {
    VoronoiDiagram d;
    const Rect box = viewport.rect();
    for (const auto& [label, p] : sites) {
        d.labels.push_back(label);
        d.sites.push_back(p);
    }
    // Separate coincident sites deterministically.
    std::vector<std::size_t> order(d.sites.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return d.sites[a].x < d.sites[b].x || (d.sites[a].x == d.sites[b].x && d.sites[a].y < d.sites[b].y);
    });
    for (std::size_t r = 1, run = 0; r < order.size(); ++r) {
        const Vec2 prev = sites[order[r - 1]].second;
        if (sites[order[r]].second == prev) {
            ++run;
            d.sites[order[r]] = prev + Vec2{1e-9 * static_cast<double>(run), 1e-9 * static_cast<double>(run)};
        } else {
            run = 0;
        }
    }

    const std::size_t n = d.sites.size();
    if (n == 0) return d;
    const auto pairs = FortuneSweep(d.sites).run();
    d.neighbors.assign(pairs.begin(), pairs.end());
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& [a, b] : pairs) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    double area = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        d.cells.push_back(cell_for(i, d.sites, adj[i], box));
        area += polygon_area(d.cells.back());
    }
    if (std::abs(area - box.area()) > 1e-6 * box.area()) {
        d.fallback = true;
        d.cells.clear();
        std::vector<std::size_t> all;
        for (std::size_t i = 0; i < n; ++i) {
            all.clear();
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) all.push_back(j);
            }
            d.cells.push_back(cell_for(i, d.sites, all, box));
        }
    }
    return d;
}

VoronoiDiagram super_concept_voronoi(const ConceptHierarchy& h, const Projection2D& canvas, const Viewport& viewport) {
    std::vector<std::pair<std::string, Vec2>> sites;
    for (const auto& s : h.super_concepts) {
        if (canvas.contains(s.label)) sites.emplace_back(s.label, canvas.at(s.label));
    }
    return voronoi(sites, viewport);
}

json layout_to_json(const CanvasLayout& layout) {
    json objects = json::array();
    for (const auto& o : layout.objects) {
        objects.push_back({{"id", o.id},
                           {"label", o.label},
                           {"layer", std::string(to_string(o.layer))},
                           {"x", o.position.x},
                           {"y", o.position.y},
                           {"w", o.width},
                           {"h", o.height},
                           {"color", o.color}});
    }
    json cells = json::array();
    for (std::size_t i = 0; i < layout.voronoi.cells.size(); ++i) {
        json poly = json::array();
        for (const auto& p : layout.voronoi.cells[i]) poly.push_back({p.x, p.y});
        cells.push_back({{"site", layout.voronoi.labels[i]},
                         {"x", layout.voronoi.sites[i].x},
                         {"y", layout.voronoi.sites[i].y},
                         {"polygon", std::move(poly)}});
    }
    return {{"objects", std::move(objects)}, {"voronoi", std::move(cells)}};
}

}  // namespace cspace
