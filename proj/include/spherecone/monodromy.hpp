#pragma once

#include <array>
#include <optional>
#include <vector>

#include "spherecone/voronoi.hpp"

// Monodromy of the developing map, standard sets for genus-0 doubled
// polygons, rotation-number constraints, coaxiality and the non-bubbling
// parameter.

namespace spherecone {

// Holonomy along a closed dual path (sequence of pairwise adjacent triangles;
// the last must be adjacent to the first). Dual paths avoid all vertices.
Rotation holonomy_along(const ConeSurface& s, const std::vector<int>& tri_loop);

// Closed dual path around a vertex class: tree path from base_tri to the fan,
// once around, and back.
std::vector<int> dual_loop_around_vertex(const ConeSurface& s, int vertex_class, int base_tri = 0);

struct MonodromyRep {
    std::vector<int> order;          // marked indices in peripheral order
    std::vector<Rotation> rotations; // aligned with `order`
    Rotation product() const;
    const Rotation& of_marked(int marked_index) const;
};

// Standard set for a genus-0 doubled polygon: one rotation per marked point
// about its developed boundary position, in boundary order; the product is
// the identity exactly (reflection telescoping).
MonodromyRep standard_set(const ConeSurface& s);

// When theta_i, theta_j are half-integers and the minimizing arc between them
// is realized on the developed boundary, Q_i Q_j rotates by 2 d(x_i, x_j).
struct HalfIntegerCheck {
    double rot = 0;       // rot(Q_i Q_j)
    double distance = 0;  // d(x_i, x_j)
    bool angle_matches = false; // |2 pi rot - min(2d, 2pi - 2d)| < 1e-6
    bool upper_bound_ok = false; // rot <= d / pi + tol
};
HalfIntegerCheck half_integer_distance_constraint(const ConeSurface& s, const MonodromyRep& rep,
                                                  int i, int j, double dij);

// Lemma-style constraint for a geodesic boundary loop: rot(Q) >= l/2pi >=
// |rot(Q) - d_R(phi - 1/2, Z)|.
bool geodesic_loop_monodromy_bound(const Rotation& q_beta, double loop_length, double phi,
                                   double tol = 1e-8);

bool is_coaxial(const MonodromyRep& rep, double tol = 1e-8);

double dist_to_half_integers(double x); // d_R(x, Z) helper

struct NBResult {
    double nb = 0;
    std::vector<int> witness_subset; // marked indices in I
    int witness_b = 0;
};

// Non-bubbling parameter by exhaustive enumeration over proper subsets I and
// the finite b window; TooManyPoints for n > 24. Also checks the equivalent
// ACrit route.
NBResult nb_parameter(const std::vector<double>& theta, int chi_dot);
NBResult nb_parameter_serial(const std::vector<double>& theta, int chi_dot); // reference

// L1 distance from theta - 1 to the odd-sum integer lattice.
double dist_to_odd_lattice(const std::vector<double>& theta);

struct GapReport {
    double eps = 0;
    int m_small = 0;
    bool regime_ok = false;
    bool pair_distance_gaps = true;  // (a)
    bool unique_closest = true;      // (b)
    bool saddle_arcs = true;         // (d)
    bool loop_dichotomy = true;
    bool all_ok() const {
        return regime_ok && pair_distance_gaps && unique_closest && saddle_arcs && loop_dichotomy;
    }
};

// Gap checks in the three-half-integer regime: xs = the three designated
// marked indices; every other marked point must have rot <= eps (WrongRegime
// otherwise).
GapReport rot_number_gap_checks(const VoronoiAnalysis& a, const MonodromyRep& rep,
                                const std::array<int, 3>& xs, double eps);

} // namespace spherecone
