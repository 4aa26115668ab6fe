#ifndef CSPACE_LAYOUT_HPP
#define CSPACE_LAYOUT_HPP

#include "cspace/geometry.hpp"
#include "cspace/hierarchy.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace cspace {

/// Per-axis affine map of the projection's bounding box onto `target`.
/// An axis without extent is centred. Throws DegenerateExtent when all points coincide.
Projection2D rescale(const Projection2D& p, const Rect& target);

enum class Layer { SUPER_CONCEPT, CONCEPT, DESCRIPTOR, TOPIC, DOCUMENT, KEYWORD };

std::string_view to_string(Layer layer);
Layer parse_layer(std::string_view name);
/// Canvas units tall: keyword 1, descriptor and document 2, concept and topic 4, super concept 8.
double size_class(Layer layer);

struct CanvasObject {
    std::string id;
    std::string label;
    Layer layer = Layer::KEYWORD;
    Vec2 position;
    double width = 0.0;
    double height = 0.0;
    std::string color;

    Rect box() const {
        return {position.x - width / 2, position.y - height / 2, position.x + width / 2, position.y + height / 2};
    }
};

/// Height = size_class, width = 0.6 * size_class * label length.
CanvasObject make_object(std::string id, std::string label, Layer layer, Vec2 position);

/// Sum of pairwise intersection areas.
double total_overlap(const std::vector<CanvasObject>& objects);
std::size_t overlap_count(const std::vector<CanvasObject>& objects);

struct OverlapOptions {
    int max_iterations = 50;
};

struct OverlapResult {
    std::vector<CanvasObject> objects;
    /// Total overlap before the first and after every accepted iteration.
    std::vector<double> overlap_trace;
    int iterations = 0;
};

/**
 * Pushes overlapping pairs apart symmetrically along the centre-to-centre
 * direction (the x axis for coincident centres), keeping every box inside the
 * viewport. A step that would raise the total overlap is halved until it does
 * not, and the loop stops at zero overlap, after max_iterations, or when no
 * step helps. Candidate pairs come from a quadtree over object centres.
 */
OverlapResult reduce_overlap(std::vector<CanvasObject> objects, const Viewport& viewport,
                             const OverlapOptions& options = {});

struct Lab {
    double l = 60.0;
    double a = 0.0;
    double b = 0.0;
};

struct ColorOptions {
    double lightness = 60.0;
    double channel_min = -80.0;
    double channel_max = 80.0;
};

/// a follows x and b follows y linearly across the viewport.
Lab position_to_lab(Vec2 p, const Viewport& viewport, const ColorOptions& options = {});
/// CIE LAB (D65) to gamut-clamped sRGB, as "#rrggbb".
std::string lab_to_hex(const Lab& lab);

struct ColorAssignment {
    std::map<std::string, std::string> concepts;
    /// Every descriptor carries its parent's colour.
    std::map<std::string, std::string> words;

    const std::string* color_of(const std::string& w) const;
};

ColorAssignment assign_colors(const ConceptHierarchy& h, const Projection2D& canvas, const Viewport& viewport,
                              const ColorOptions& options = {});

/// Descriptors whose colour differs from the modal colour of their k nearest coloured neighbours.
std::map<std::string, bool> color_conflicts(const ConceptHierarchy& h, const Projection2D& canvas,
                                            const ColorAssignment& colors, std::size_t k = 6);

struct VoronoiDiagram {
    std::vector<std::string> labels;
    /// Sites after the deterministic separation of coincident inputs.
    std::vector<Vec2> sites;
    /// Convex cells, counter-clockwise, clipped to the viewport.
    std::vector<std::vector<Vec2>> cells;
    /// Site index pairs adjacent on the beach line during the sweep.
    std::vector<std::pair<std::size_t, std::size_t>> neighbors;
    /// Set when the sweep result failed the area check and cells were clipped against every site.
    bool fallback = false;

    /// Index of the cell containing p, or -1.
    int locate(Vec2 p) const;
};

double polygon_area(const std::vector<Vec2>& poly);

/**
 * Fortune sweep over the sites; each cell is the viewport clipped by the
 * bisectors of the site's sweep neighbours. Coincident sites are separated by
 * 1e-9 before the sweep.
 */
VoronoiDiagram voronoi(const std::vector<std::pair<std::string, Vec2>>& sites, const Viewport& viewport);

/// Super-concept sites at their label concept's position.
VoronoiDiagram super_concept_voronoi(const ConceptHierarchy& h, const Projection2D& canvas, const Viewport& viewport);

struct CanvasLayout {
    std::vector<CanvasObject> objects;
    VoronoiDiagram voronoi;
};

/// {objects: [{id, layer, x, y, w, h, color}], voronoi: [{site, polygon}]}
nlohmann::json layout_to_json(const CanvasLayout& layout);

}  // namespace cspace

#endif
