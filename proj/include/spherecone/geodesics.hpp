#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spherecone/surface.hpp"

// Geodesic distance fields from marked points (Steiner-refined intrinsic
// Dijkstra with refinement-convergence stopping), the exact billiard-unfolding
// engine for doubled polygons, point-to-point geodesics and cone-based loops.

namespace spherecone {

// A point on the surface: triangle index + position in the triangle's
// canonical development.
struct SurfacePoint {
    int tri = -1;
    Vec3 pos;
};

struct RefinedMesh {
    const ConeSurface* surface = nullptr;
    int level = 0;

    std::vector<std::array<Vec3, 3>> dev; // canonical development per triangle

    struct Edge {
        SideRef a, b; // b invalid on the boundary
        double len = 0;
        int first_node = 0;
        int steiner = 0;
    };
    std::vector<Edge> edges;
    std::map<std::pair<int, int>, int> side_to_edge;

    int node_count = 0;
    std::vector<int> class_node;
    std::map<int, int> class_to_node;
    std::vector<int> node_class; // -1 for Steiner nodes

    std::vector<int> adj_off;
    std::vector<int> adj_node;
    std::vector<double> adj_w;

    std::vector<std::vector<int>> tri_nodes_cache;
    std::vector<std::vector<Vec3>> tri_node_pos_cache;

    Vec3 node_pos_in(int node, int tri) const;
    std::vector<int> boundary_nodes_of_tri(int tri) const;
    std::vector<int> tris_of_node(int node) const;

    double mesh_h() const { return h_; }
    double h_ = 0;
};

RefinedMesh build_mesh(const ConeSurface& s, double h,
                       const std::vector<int>* seg_override = nullptr);

struct DoubledPolygonGeometry; // below

// Multi-source distance field with a certified error bound.
struct DistanceField {
    std::shared_ptr<RefinedMesh> mesh;
    std::vector<int> sources;
    std::vector<std::vector<double>> dist; // dist[source slot][node]
    double tol = 1e-4;
    double err = 0;
    double h = 0;
    std::shared_ptr<std::optional<DoubledPolygonGeometry>> exact_geometry;

    int source_count() const { return static_cast<int>(sources.size()); }
    std::array<std::pair<int, double>, 2> two_smallest(int node) const;
    double value(int node) const;
    double max_value() const;
    double eval(int si, const SurfacePoint& p) const;
    double eval_min(const SurfacePoint& p) const;
};

// Field construction: refinement doubles until successive fields differ by
// less than tol/2 on the persistent node set; ConvergenceError past the
// refinement budget. Empty `sources` means all marked points.
DistanceField build_field(const ConeSurface& s, std::vector<int> sources, double tol,
                          int max_refinements = 8);

// Serial reference path (identical numbers, no OpenMP); kept for kernel
// equality tests and the benchmark.
DistanceField build_field_serial(const ConeSurface& s, std::vector<int> sources, double tol,
                                 int max_refinements = 8);

void write_field_csv(const DistanceField& f, const std::string& path);

// ---------------------------------------------------------------------------
// exact engine for doubled polygons

struct DoubledPolygonGeometry {
    const ConeSurface* surface = nullptr;
    int front_count = 0;
    std::vector<std::array<Vec3, 3>> front_dev;
    std::vector<std::pair<Vec3, Vec3>> boundary_arcs;
    std::vector<Vec3> marked_pos;

    // true when the boundary reflection group closes (then image minimization
    // is exact at every scale)
    bool has_tiling_group() const;

    double pair_distance(int i, int j, int max_reflections = 32) const;
    double point_distance(int i, const Vec3& p, bool back, int max_reflections = 32) const;
    double shortest_loop(int i, int max_reflections = 32) const;

    // front-chart position of a surface point (+ which copy it lies on)
    std::pair<Vec3, bool> to_front_chart(const SurfacePoint& p) const;
};

std::optional<DoubledPolygonGeometry> detect_doubled_polygon(const ConeSurface& s);

// Exact distance on a doubled polygon via billiard unfolding; a closed
// reflection group is used directly, otherwise a bounded admissible word
// search runs (BudgetExceeded when the budget is exhausted).
double exact_double_distance(const DoubledPolygonGeometry& g, const Vec3& p, bool p_back,
                             const Vec3& q, bool q_back, int max_reflections = 32);

// ---------------------------------------------------------------------------
// geodesic paths

struct GeodesicPath {
    std::vector<SurfacePoint> pts;
    double length = 0;
};

struct ConeArc {
    int i = 0, j = 0;
    double length = 0;
    GeodesicPath path;
};

struct ConeLoop {
    int i = 0;
    double length = 0;
    GeodesicPath path;
};

std::vector<ConeArc> shortest_arcs_between_cones(const ConeSurface& s, const DistanceField& f);

std::vector<ConeLoop> shortest_loops_at_cone(const ConeSurface& s, const DistanceField& f, int mi,
                                             double cap);

double straighten_path(const ConeSurface& s, const RefinedMesh& mesh,
                       std::vector<SurfacePoint>& pts, bool closed_at_endpoints,
                       double bend_tol = 1e-8, int max_iter = 2000);

bool diameter_upper_check(const ConeSurface& s, const DistanceField& f, double slack = 1e-6);
double sampled_diameter(const ConeSurface& s, const DistanceField& f);

// ---------------------------------------------------------------------------
// evaluator + radial machinery (shared with the Voronoi module)

struct DistanceEvaluator {
    const ConeSurface* surface = nullptr;
    const DistanceField* field = nullptr;
    const DoubledPolygonGeometry* exact = nullptr; // set when a tiling group exists

    double operator()(int si, const SurfacePoint& p, bool p_on_back_copy) const;
};

DistanceEvaluator make_evaluator(const ConeSurface& s, const DistanceField& f);

// Corner wedges of a vertex class in cyclic rotational order.
std::vector<std::pair<int, int>> cone_wedges_cyclic(const ConeSurface& s, int cls);

struct RadialProfile {
    int marked_index = 0;
    double cone_angle = 0;
    std::vector<double> phi;
    std::vector<double> rho;
};

// Per-cone radial cut profile rho_i(phi): distance from marked point mi to the
// Voronoi cell boundary along each radial direction.
RadialProfile radial_profile(const ConeSurface& s, const DistanceField& f, int mi, int samples,
                             double r_max = kPi);

std::optional<SurfacePoint> shoot_from_cone(const ConeSurface& s, int mi, double phi, double r,
                                            bool* on_back_copy = nullptr);

} // namespace spherecone
