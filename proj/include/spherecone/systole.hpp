#pragma once

#include <optional>
#include <vector>

#include "spherecone/voronoi.hpp"

// Systole, injectivity and immersion radii, closest-point predicates.

namespace spherecone {

struct SystoleReport {
    double sys = 0;
    bool realizer_is_loop = false;
    int realizer_i = -1, realizer_j = -1; // marked indices (equal for loops)
    double realizer_length = 0;
    double midpoint_value = 0; // V at the realizer midpoint
    struct PerCone {
        int marked_index = 0;
        double d_nearest = 0;      // distance to the nearest other cone
        double shortest_loop = 0;  // infinity when none found under the cap
        double r_inj = 0;          // min(d_nearest, shortest_loop / 2)
        double r_imm = 0;          // min(2 r_inj, d_nearest, pi)
    };
    std::vector<PerCone> cones;
    std::vector<ConeArc> arcs;
};

SystoleReport compute_systole(const ConeSurface& s, const DistanceField& f);

struct ClosestPairCheck {
    int i = -1, j = -1;
    double theta_i = 0, theta_j = 0;
    bool arc_shorter_than_loops = true; // (a): d(x_i, x_j) < 2 r_i for theta_i <= 2/3
    bool pair_sum_ok = true;            // (b): mutually closest => theta_i + theta_j > 2/3
    bool small_partner_ok = true;       // (c): theta_i <= 1/3 => theta_j > 1/3
};

struct ClosestPointReport {
    std::vector<ClosestPairCheck> checks;
    bool all_ok() const;
};

// Closest-point predicates for every cone with theta <= 2/3 (chi(dot S) < 0).
ClosestPointReport closest_point_checks(const ConeSurface& s, const DistanceField& f);

// Level-curve essential bound: the level curve bounding the given sublevel
// cluster at radius r must be essential (NotEssential otherwise); asserts
// sys < length/2 and returns the curve length.
double essential_curve_bound(const VoronoiAnalysis& a, const SystoleReport& sys,
                             const std::vector<int>& cluster_slots, double r);

} // namespace spherecone
