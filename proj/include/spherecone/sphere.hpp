#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "spherecone/errors.hpp"

// Exact spherical trigonometry, SO(3) algebra and algebraic (winding-weighted)
// area of piecewise-geodesic loops on the unit sphere.

namespace spherecone {

inline constexpr double kPi = 3.14159265358979323846264338327950288;

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) {
    double n = norm(a);
    return {a.x / n, a.y / n, a.z / n};
}

// Arc distance on S^2, stable near 0 and pi (chord + asin instead of acos).
double geodesic_dist(const Vec3& u, const Vec3& v);

// Unit vector at arc distance t from a toward b along their great circle.
Vec3 slerp(const Vec3& a, const Vec3& b, double t);

// 3x3 rotation matrix, row-major.
struct Rotation {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Rotation identity() { return {}; }
    static Rotation about_axis(const Vec3& axis, double angle);
    // Frame map: sends (u1, u2-plane) onto (v1, v2-plane). u1,u2 (resp. v1,v2)
    // must be non-parallel unit vectors with equal pairwise angles.
    static Rotation frame_map(const Vec3& u1, const Vec3& u2, const Vec3& v1, const Vec3& v2);

    Vec3 apply(const Vec3& v) const;
    Rotation operator*(const Rotation& o) const; // this after o
    Rotation transpose() const;
    double trace() const { return m[0] + m[4] + m[8]; }
    bool is_orthogonal(double tol = 1e-10) const;
};

// Rotation number in [0, 1/2]: rotation angle over 2*pi. Trace clamped to
// [-1, 3] against orthogonality drift.
double rotation_number(const Rotation& q);

// Unit axis (eigenvector for eigenvalue 1), first nonzero coordinate positive;
// nullopt for the identity within tolerance.
std::optional<Vec3> rotation_axis(const Rotation& q, double tol = 1e-9);

// Spherical triangle given by side lengths; angles derived on demand.
struct TriangleGeom {
    double a = 0, b = 0, c = 0; // side k joins corners k, k+1 (mod 3)

    TriangleGeom() = default;
    TriangleGeom(double a_, double b_, double c_);

    // Corner k is opposite side k+1; angle via half-angle law of cosines,
    // stable for thin triangles.
    double angle(int corner) const;
    std::array<double, 3> angles() const;
    double side(int k) const { return k == 0 ? a : (k == 1 ? b : c); }

    static TriangleGeom from_angles(double alpha, double beta, double gamma);
};

// Angle excess = area (Girard). Throws DegenerateTriangle when excess <= tol.
double triangle_area(const TriangleGeom& t, double degenerate_tol = 1e-12);
double triangle_excess_from_sides(double a, double b, double c); // L'Huilier, no validation

// Napier: hypotenuse of the right spherical triangle with one leg `leg` and
// angle pi*half_angle between leg and hypotenuse. half_angle in [0, 1/2).
double solve_hypotenuse(double leg, double half_angle);

// Closed piecewise-geodesic loop: consecutive vertices joined by minor arcs.
struct SphereLoop {
    std::vector<Vec3> verts; // implicit closing edge verts.back() -> verts.front()

    double length() const;
    void validate(double arc_cap = kPi) const; // consecutive non-antipodal, arcs < cap
};

// Splits a loop with finitely many self-intersections into simple loops whose
// concatenation reparametrizes the input. Exact tangencies are broken by a
// deterministic 1e-9 perturbation.
std::vector<SphereLoop> decompose_simple(const SphereLoop& loop);

// Signed area of a simple loop relative to basepoint z: the area of the
// component of the complement not containing z, positive when the loop runs
// counterclockwise around that component.
double simple_loop_signed_area(const SphereLoop& loop, const Vec3& z);

// Algebraic area: integral of the winding-degree function against the area
// form, computed as the signed-area sum over the simple-loop decomposition.
double algebraic_area(const SphereLoop& loop, const Vec3& z);

// Isosceles triangle with equal sides r, apex angle 2*pi*theta and base
// shorter than r*lambda1: checks |Area - 4*pi*theta| < pi*lambda1 (and the
// right-triangle bound theta < lambda1/4 when r < pi/2).
bool isosceles_area_check(double r, double theta, double lambda1);

// Companion bound: apex half-angle of the isosceles triangle with equal sides
// r < pi/2 and base lambda1*r (paper route via the sine rule).
double isosceles_apex_theta(double r, double lambda1);

} // namespace spherecone
