#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spherecone/geodesics.hpp"

// Voronoi graph extraction, critical-point classification, level/sublevel
// measurements, cylinders and caps, cores and bubbling decompositions. All of
// it is driven by per-cone radial cut profiles.

namespace spherecone {

enum class CritKind { Minimum, Saddle, IsolatedMax, PlateauEdge };

struct CriticalPoint {
    CritKind kind = CritKind::Minimum;
    double value = 0;
    SurfacePoint where;
    int cell_i = -1, cell_j = -1; // source slots; saddle loop when equal
    bool loop = false;
};

struct VoronoiComplex {
    int gamma_vertices = 0; // |Gamma_0|
    int gamma_edges = 0;    // |Gamma_1|
    std::vector<int> vertex_multiplicities;
    std::vector<CriticalPoint> criticals;
    int saddle_count = 0;
    int maxima_components = 0;
    double min_positive_critical = 0;
    bool plateau_flag = false; // near-pi/2 level edges detected

    std::vector<const CriticalPoint*> saddles() const;
};

struct VoronoiAnalysis {
    const ConeSurface* surface = nullptr;
    const DistanceField* field = nullptr;
    std::vector<RadialProfile> profiles; // one per source slot
    std::vector<std::vector<int>> beta;  // tie partner label per phi sample (-2 unknown,
                                         // slot index, or own slot for same-source cuts)
    VoronoiComplex complex;
    int nphi = 0;

    double cell_area(int slot, double r) const;     // truncated star area
    double cell_level_measure(int slot, double r) const; // angular measure of {rho > r}
};

// Builds profiles and extracts the complex; asserts the structural invariants
// (graph size bounds, saddle bounds, Euler count) and throws NeedsRefinement
// on ambiguous classifications.
VoronoiAnalysis analyze_voronoi(const ConeSurface& s, const DistanceField& f, int nphi = 512,
                                bool assert_invariants = true);

// Total length of the level set V^-1(r); throws NearCriticalLevel when r is
// within 10*tol of a detected critical value (unless check_critical = false).
double level_length(const VoronoiAnalysis& a, double r, bool check_critical = true);

// Area of the sublevel set V^-1([0, r]) by star-region truncation (exact
// co-area consistency with level_length by construction).
double sublevel_area(const VoronoiAnalysis& a, double r);

double max_voronoi(const VoronoiAnalysis& a);

// Connected components of the sublevel at a regular value r, as clusters of
// cells joined through saddles below r.
struct SublevelComponent {
    std::vector<int> slots;
    double area = 0;
    double boundary_length = 0;
    int boundary_curves = 0; // genus-0 count: 2 - |slots| + #internal saddles
    bool contains_saddle = false;
    double lowest_saddle = 0;
    double angle_sum = 0; // cone angles inside
};
std::vector<SublevelComponent> sublevel_components(const VoronoiAnalysis& a, double r);

struct CylinderRegion {
    enum Kind { Cylinder, Cap } kind = Cylinder;
    std::vector<int> inner_slots; // cluster on the sublevel side (cylinders)
    double modulus_quadrature = 0;
    double modulus_coarse = 0; // log(r2/r1) / (2*pi*|theta|_1)
    bool essential = false;
    int boundary_curves = 1;
    double max_value = 0; // for caps
};

// Components of V^-1([r1, r2]); throws SaddleInInterval when a saddle value
// lies inside and forbid_saddles is set.
std::vector<CylinderRegion> cylinder_regions(const VoronoiAnalysis& a, double r1, double r2,
                                             bool forbid_saddles = true);

struct VoronoiCore {
    std::vector<int> slots;
    double area = 0;
    double boundary_length = 0;
    double angle_sum = 0;
    struct Complement {
        std::vector<int> slots; // at most one cone
        double boundary_length = 0;
        bool is_cap = false; // no cones
    };
    std::vector<Complement> complement;
};

// The unique Voronoi r-core, or nullopt with a reason code.
enum class CoreFailure { None, BelowSystole, EssentialLevel, NoneFound };
std::optional<VoronoiCore> voronoi_core(const VoronoiAnalysis& a, double r,
                                        CoreFailure* why = nullptr, double sys_hint = -1);

struct DiskEstimate {
    int b = 0;
    double residual = 0; // |Area - 4*pi*(theta + b)| / 2*pi
    double bound = 0;    // lambda invariant
    bool ok = false;
};
// Disk without cones: requires boundary < 2*pi.
DiskEstimate disk_area_estimate_b0(double area, double boundary_length);
// Disk with one cone of angle 2*pi*theta: requires lambda1 < 1/2.
DiskEstimate disk_area_estimate_b1(double area, double boundary_length, double theta,
                                   double dist_cone_to_boundary);

struct BubblingDecomposition {
    VoronoiCore core;
    double r1 = 0, r2 = 0;
    double lambda0_sum = 0;
    double lambda1_sum = 0;
    double epsilon = 0; // Area(core)/2pi + sum lambda0 + sum lambda1
};

// Bubbling decomposition with the core taken at r1; preconditions: no saddle
// values in [r1, r2] and all level components at r1 non-essential.
BubblingDecomposition epsilon_bubbling(const VoronoiAnalysis& a, double r1, double r2);

struct SmallAngleReport {
    int marked_index = 0;
    double theta = 0;
    double d_nearest = 0; // d_i
    bool cell_inside_bmax = false;
    bool saddle_value_in_range = false;
    double saddle_value = 0;
    bool distance_inequality = false; // (b)
    bool boundary_in_ball = false;    // (c)
    bool boundary_in_half_ball = false; // (d), checked when theta < 1/7
    bool all_ok() const;
};

// Neighbourhood checks at a cone with theta <= 1/3.
SmallAngleReport small_angle_checks(const VoronoiAnalysis& a, int marked_index);

} // namespace spherecone
