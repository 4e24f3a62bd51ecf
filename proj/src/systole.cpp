#include "spherecone/systole.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spherecone/errors.hpp"

namespace spherecone {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

SystoleReport compute_systole(const ConeSurface& s, const DistanceField& f) {
    SystoleReport rep;
    rep.arcs = shortest_arcs_between_cones(s, f);

    const auto geom = (f.exact_geometry && f.exact_geometry->has_value() &&
                       f.exact_geometry->value().has_tiling_group())
                          ? &f.exact_geometry->value()
                          : nullptr;

    const int ns = f.source_count();
    rep.cones.resize(static_cast<std::size_t>(ns));
    for (int si = 0; si < ns; ++si) {
        auto& pc = rep.cones[static_cast<std::size_t>(si)];
        pc.marked_index = f.sources[static_cast<std::size_t>(si)];
        pc.d_nearest = kInf;
        pc.shortest_loop = kInf;
    }
    for (const auto& arc : rep.arcs) {
        for (auto& pc : rep.cones) {
            if (pc.marked_index == arc.i || pc.marked_index == arc.j)
                pc.d_nearest = std::min(pc.d_nearest, arc.length);
        }
    }
    for (int si = 0; si < ns; ++si) {
        auto& pc = rep.cones[static_cast<std::size_t>(si)];
        const auto loops = shortest_loops_at_cone(s, f, pc.marked_index, kPi);
        if (!loops.empty()) pc.shortest_loop = loops.front().length;
        if (geom) {
            const double exact_loop = geom->shortest_loop(pc.marked_index);
            pc.shortest_loop = std::min(pc.shortest_loop, exact_loop);
        }
        pc.r_inj = std::min(pc.d_nearest, pc.shortest_loop / 2);
        pc.r_imm = std::min({2 * pc.r_inj, pc.d_nearest, kPi});
    }

    // realizer
    double best_len = kInf;
    for (const auto& arc : rep.arcs)
        if (arc.length < best_len) {
            best_len = arc.length;
            rep.realizer_is_loop = false;
            rep.realizer_i = arc.i;
            rep.realizer_j = arc.j;
        }
    for (const auto& pc : rep.cones)
        if (pc.shortest_loop < best_len) {
            best_len = pc.shortest_loop;
            rep.realizer_is_loop = true;
            rep.realizer_i = rep.realizer_j = pc.marked_index;
        }
    rep.realizer_length = best_len;
    rep.sys = best_len / 2;

    // V at the realizer midpoint
    rep.midpoint_value = rep.sys;
    if (!rep.realizer_is_loop) {
        for (const auto& arc : rep.arcs) {
            if (arc.i != rep.realizer_i || arc.j != rep.realizer_j) continue;
            // walk the straightened path to half length
            const auto& pts = arc.path.pts;
            if (pts.size() >= 2) {
                double acc = 0;
                for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
                    const double seg = geodesic_dist(pts[k].pos, pts[k + 1].pos);
                    if (acc + seg >= arc.length / 2 && seg > 0) {
                        const double t = (arc.length / 2 - acc) / seg;
                        SurfacePoint mid;
                        mid.tri = pts[k].tri;
                        mid.pos = slerp(pts[k].pos, pts[k + 1].pos, t * seg);
                        if (pts[k].tri == pts[k + 1].tri) rep.midpoint_value = f.eval_min(mid);
                        break;
                    }
                    acc += seg;
                }
            }
        }
    }
    return rep;
}

bool ClosestPointReport::all_ok() const {
    for (const auto& c : checks)
        if (!(c.arc_shorter_than_loops && c.pair_sum_ok && c.small_partner_ok)) return false;
    return true;
}

ClosestPointReport closest_point_checks(const ConeSurface& s, const DistanceField& f) {
    ClosestPointReport rep;
    const SystoleReport sys = compute_systole(s, f);
    const auto theta = s.angle_vector();
    const int ns = f.source_count();
    for (int si = 0; si < ns; ++si) {
        const auto& pc = sys.cones[static_cast<std::size_t>(si)];
        const double ti = theta[static_cast<std::size_t>(pc.marked_index)];
        if (ti > 2.0 / 3 + 1e-12) continue;
        ClosestPairCheck c;
        c.i = pc.marked_index;
        c.theta_i = ti;
        // nearest cone j
        double best = kInf;
        for (const auto& arc : sys.arcs) {
            if (arc.i != c.i && arc.j != c.i) continue;
            if (arc.length < best) {
                best = arc.length;
                c.j = arc.i == c.i ? arc.j : arc.i;
            }
        }
        if (c.j < 0) continue;
        c.theta_j = theta[static_cast<std::size_t>(c.j)];
        // (a) d(x_i, x_j) < 2 r_i, i.e. the nearest-cone distance beats loops
        c.arc_shorter_than_loops = pc.d_nearest < pc.shortest_loop + 1e-9;
        // (b) mutually closest
        double best_j = kInf;
        int jj = -1;
        for (const auto& arc : sys.arcs) {
            if (arc.i != c.j && arc.j != c.j) continue;
            if (arc.length < best_j) {
                best_j = arc.length;
                jj = arc.i == c.j ? arc.j : arc.i;
            }
        }
        if (jj == c.i) c.pair_sum_ok = c.theta_i + c.theta_j > 2.0 / 3 - 1e-9;
        // (c)
        if (c.theta_i <= 1.0 / 3 + 1e-12) c.small_partner_ok = c.theta_j > 1.0 / 3 - 1e-9;
        rep.checks.push_back(c);
    }
    return rep;
}

double essential_curve_bound(const VoronoiAnalysis& a, const SystoleReport& sys,
                             const std::vector<int>& cluster_slots, double r) {
    const ConeSurface& s = *a.surface;
    if (s.genus() == 0) {
        const int inside = static_cast<int>(cluster_slots.size());
        const int outside = static_cast<int>(s.marked.size()) - inside;
        if (inside < 2 || outside < 2) throw NotEssential("level curve bounds a disk with <= 1 cone");
    }
    double len = 0;
    for (int si : cluster_slots) len += std::sin(r) * a.cell_level_measure(si, r);
    if (!(sys.sys < len / 2 + 1e-12))
        throw TopologyError("essential curve shorter than twice the systole");
    return len;
}

} // namespace spherecone
