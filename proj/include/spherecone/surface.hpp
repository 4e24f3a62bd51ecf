#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "spherecone/sphere.hpp"

// Closed oriented triangulated curvature-1 surfaces with marked cone vertices:
// gluing data, combinatorial/metric validation, Gauss-Bonnet accounting and
// the explicit constructors used by the verification harness.

namespace spherecone {

struct SideRef {
    int tri = -1;
    int side = -1; // side k joins corners k and k+1 (mod 3)
    bool valid() const { return tri >= 0; }
    bool operator==(const SideRef& o) const { return tri == o.tri && side == o.side; }
};

struct Tolerances {
    double metric = 1e-10;   // glued side lengths
    double angle_sum = 1e-9; // smooth-vertex angle defect
    double area = 1e-8;      // Gauss-Bonnet
};

struct MarkedVertex {
    int vertex_class = -1;
    std::string label;
};

class ConeSurface {
public:
    std::vector<TriangleGeom> tris;
    std::vector<std::array<SideRef, 3>> glue; // invalid SideRef = boundary side
    std::vector<MarkedVertex> marked;         // peripheral order as constructed
    Tolerances tol;

    int corner_count() const { return static_cast<int>(tris.size()) * 3; }
    int corner_id(int t, int c) const { return 3 * t + c; }

    // Union-find vertex classes, computed lazily; class id = smallest corner id.
    int vertex_class(int t, int c) const;
    int vertex_class_count() const;
    std::vector<int> class_representatives() const; // sorted class ids
    std::vector<std::pair<int, int>> corners_of_class(int cls) const; // (tri, corner)

    double corner_angle_sum(int cls) const;
    bool class_on_boundary(int cls) const;
    int marked_index_of_class(int cls) const; // -1 when unmarked

    // theta_i = cone angle / 2pi, in marked order
    std::vector<double> angle_vector() const;
    double theta_norm1() const;

    bool has_boundary() const;
    int genus() const;           // from V - E + F (closed surfaces)
    int euler_char_punctured() const; // chi(dot S) = 2 - 2g - n
    double chi_weighted() const;      // chi(dot S) + |theta|_1
    double area() const;              // sum of triangle excesses

    void validate() const; // throws TopologyError / DomainError on violation

    std::string to_json() const;
    static ConeSurface from_json(const std::string& text);

    void invalidate_cache() const;

private:
    mutable std::vector<int> uf_cache_;
    void build_classes() const;
};

// A triangulated geodesic polygon (disk): triangles plus internal gluings.
// Unglued sides form the boundary.
struct PolygonDisk {
    std::vector<TriangleGeom> tris;
    std::vector<std::pair<SideRef, SideRef>> internal_glue;
};

// Double of a triangulated polygon across its boundary; cone angle at a
// marked corner is twice the polygon angle there. marked = (tri, corner)
// references into the front copy, with labels.
ConeSurface double_polygon(const PolygonDisk& disk,
                           const std::vector<std::pair<std::pair<int, int>, std::string>>& marked);

// Double of a single triangle, all three corners marked x1, x2, x3.
ConeSurface double_triangle(const TriangleGeom& t);
ConeSurface double_triangle_angles(double alpha, double beta, double gamma);

// Genus-g surface with one cone point of angle 2*pi*(theta + 2g - 1):
// a lune with sides pi and angle pi*theta, side split into 2g segments,
// glued by the standard commutator pattern.
ConeSurface bigon_glue(int genus, double theta);

// Double of a lune of angle pi*theta: two cone points of angle 2*pi*theta.
ConeSurface lune_double(double theta);

// Analytic model of the standard cone disk D_theta(r).
struct StandardDisk {
    double theta = 1;
    double r = kPi / 2;

    double boundary_length() const { return 2 * kPi * theta * std::sin(r); }
    double area() const { return 2 * kPi * theta * (1 - std::cos(r)); }
    double level_length(double t) const { return 2 * kPi * theta * std::sin(t); }
    double sublevel_area(double t) const { return 2 * kPi * theta * (1 - std::cos(t)); }
    // modulus of the annulus r1 < dist < r2 in the cone metric (closed form)
    double annulus_modulus(double r1, double r2) const;
};

// Triangulated cone disk with boundary: wedge_count fan triangles around the
// apex, which is marked "x1".
ConeSurface standard_disk_surface(double theta, double r, int wedge_count = 64);

// Insert a marked smooth vertex (theta = 1) on a glued edge at arclength t
// from the side's first corner. Returns a new surface.
ConeSurface mark_smooth_point_on_edge(const ConeSurface& s, SideRef side, double t,
                                      const std::string& label);

// Same subdivision without marking (refinement; used for invariance tests).
ConeSurface subdivide_edge(const ConeSurface& s, SideRef side, double t);

// Arclength positions (and the resulting vertex classes) are reported by the
// constructors that place points on edges.
struct EdgePointInfo {
    SideRef on_side;
    double arclength = 0;
};

} // namespace spherecone
