#include "spherecone/voronoi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "spherecone/errors.hpp"
#include "spherecone/parallel.hpp"

namespace spherecone {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int uf_find(std::vector<int>& p, int i) {
    while (p[static_cast<std::size_t>(i)] != i) {
        p[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(p[static_cast<std::size_t>(i)])];
        i = p[static_cast<std::size_t>(i)];
    }
    return i;
}

void uf_union(std::vector<int>& p, int a, int b) {
    a = uf_find(p, a);
    b = uf_find(p, b);
    if (a != b) p[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
}

} // namespace

std::vector<const CriticalPoint*> VoronoiComplex::saddles() const {
    std::vector<const CriticalPoint*> out;
    for (const auto& c : criticals)
        if (c.kind == CritKind::Saddle) out.push_back(&c);
    return out;
}

double VoronoiAnalysis::cell_level_measure(int slot, double r) const {
    const RadialProfile& p = profiles[static_cast<std::size_t>(slot)];
    const double dphi = p.cone_angle / static_cast<double>(nphi);
    double meas = 0;
    for (double rho : p.rho)
        if (rho > r) meas += dphi;
    return meas;
}

double VoronoiAnalysis::cell_area(int slot, double r) const {
    const RadialProfile& p = profiles[static_cast<std::size_t>(slot)];
    const double dphi = p.cone_angle / static_cast<double>(nphi);
    double area = 0;
    for (double rho : p.rho) area += dphi * (1 - std::cos(std::min(rho, r)));
    return area;
}

namespace {

// tie partner label just beyond the cut at (slot, phi, rho): another source
// slot, the same slot (own-branch cut), or -2 when undecidable
int probe_beyond(const ConeSurface& s, const DistanceField& f, const DistanceEvaluator& ev,
                 int slot, double phi, double rho, double reach) {
    const int mi = f.sources[static_cast<std::size_t>(slot)];
    for (double rel : {2e-4, 2e-3, 2e-2}) {
        const double r = std::min(rho * (1 + rel) + 1e-14, reach);
        bool back = false;
        auto p = shoot_from_cone(s, mi, phi, r, &back);
        if (!p) continue;
        int best = -1;
        double bestd = kInf, second = kInf;
        for (int si = 0; si < f.source_count(); ++si) {
            const double d = ev(si, *p, back);
            if (d < bestd) {
                second = bestd;
                bestd = d;
                best = si;
            } else {
                second = std::min(second, d);
            }
        }
        if (best == slot) {
            // own label nearest: genuine own-branch cut when the distance is
            // clearly below the radial value r
            if (bestd < r * (1 - 1e-9) - 4 * f.err) return slot;
            continue; // noise: widen the probe
        }
        (void)second;
        return best;
    }
    return -2;
}

struct Transition {
    int slot;
    int k;       // transition between samples k and k+1 (cyclic)
    double value; // rho at the transition
    SurfacePoint where;
    bool where_ok = false;
};

} // namespace

VoronoiAnalysis analyze_voronoi(const ConeSurface& s, const DistanceField& f, int nphi,
                                bool assert_invariants) {
    VoronoiAnalysis a;
    a.surface = &s;
    a.field = &f;
    a.nphi = nphi;
    const int ns = f.source_count();
    a.profiles.resize(static_cast<std::size_t>(ns));
    for (int si = 0; si < ns; ++si)
        a.profiles[static_cast<std::size_t>(si)] =
            radial_profile(s, f, f.sources[static_cast<std::size_t>(si)], nphi, kPi);

    const DistanceEvaluator ev = make_evaluator(s, f);

    // beta labels at the cut
    a.beta.assign(static_cast<std::size_t>(ns), std::vector<int>(static_cast<std::size_t>(nphi), -2));
    if (ns > 1) {
        for (int si = 0; si < ns; ++si) {
            auto& prof = a.profiles[static_cast<std::size_t>(si)];
            par::parallel_for(static_cast<std::size_t>(nphi), [&](std::size_t k) {
                if (prof.rho[k] >= kPi - 1e-9) return;
                a.beta[static_cast<std::size_t>(si)][k] =
                    probe_beyond(s, f, ev, si, prof.phi[k], prof.rho[k], kPi);
            });
        }
    }

    VoronoiComplex& cx = a.complex;
    if (ns <= 1) {
        // single source: no graph below the cut locus of that source; report
        // minima only (cut-locus criticals of one source are not extracted)
        CriticalPoint min0;
        min0.kind = CritKind::Minimum;
        min0.value = 0;
        min0.cell_i = 0;
        cx.criticals.push_back(min0);
        cx.min_positive_critical = kInf;
        return a;
    }

    // maximal cyclic runs of equal beta per cell
    struct Arc {
        int slot;
        int begin, len; // sample indices, cyclic
        int label;
        double min_rho = kInf, max_rho = 0;
        int min_at = -1;
        double end_a_value = 0, end_b_value = 0;
    };
    std::vector<Arc> arcs;
    std::vector<Transition> transitions;
    for (int si = 0; si < ns; ++si) {
        const auto& b = a.beta[static_cast<std::size_t>(si)];
        const auto& prof = a.profiles[static_cast<std::size_t>(si)];
        // smooth labels: replace isolated unknowns by neighbors
        std::vector<int> lab = b;
        for (int k = 0; k < nphi; ++k) {
            if (lab[static_cast<std::size_t>(k)] != -2) continue;
            const int prev = lab[static_cast<std::size_t>((k + nphi - 1) % nphi)];
            const int next = lab[static_cast<std::size_t>((k + 1) % nphi)];
            lab[static_cast<std::size_t>(k)] = prev != -2 ? prev : next;
        }
        int unknown = 0;
        for (int v : lab)
            if (v == -2) ++unknown;
        if (unknown > nphi / 8)
            throw NeedsRefinement("tie labels undecidable on a large fraction of directions");

        // entire boundary one label: one closed arc with no transitions
        bool constant = true;
        for (int k = 1; k < nphi; ++k)
            if (lab[static_cast<std::size_t>(k)] != lab[0]) constant = false;
        if (constant) {
            Arc arc;
            arc.slot = si;
            arc.begin = 0;
            arc.len = nphi;
            arc.label = lab[0];
            for (int k = 0; k < nphi; ++k) {
                const double r = prof.rho[static_cast<std::size_t>(k)];
                if (r < arc.min_rho) {
                    arc.min_rho = r;
                    arc.min_at = k;
                }
                arc.max_rho = std::max(arc.max_rho, r);
            }
            arcs.push_back(arc);
            continue;
        }
        // find run starts
        for (int k = 0; k < nphi; ++k) {
            const int cur = lab[static_cast<std::size_t>(k)];
            const int prev = lab[static_cast<std::size_t>((k + nphi - 1) % nphi)];
            if (cur == prev) continue;
            // run starting at k
            Arc arc;
            arc.slot = si;
            arc.begin = k;
            arc.label = cur;
            int j = k;
            while (lab[static_cast<std::size_t>((j + 1) % nphi)] == cur) {
                j = (j + 1) % nphi;
                if (j == (k + nphi - 1) % nphi) break;
            }
            arc.len = (j - k + nphi) % nphi + 1;
            for (int q = 0; q < arc.len; ++q) {
                const int idx = (k + q) % nphi;
                const double r = prof.rho[static_cast<std::size_t>(idx)];
                if (r < arc.min_rho) {
                    arc.min_rho = r;
                    arc.min_at = idx;
                }
                arc.max_rho = std::max(arc.max_rho, r);
            }
            arc.end_a_value = prof.rho[static_cast<std::size_t>(k)];
            arc.end_b_value = prof.rho[static_cast<std::size_t>(j)];
            arcs.push_back(arc);
            // transition point between k-1 and k
            Transition tr;
            tr.slot = si;
            tr.k = k;
            tr.value = 0.5 * (prof.rho[static_cast<std::size_t>((k + nphi - 1) % nphi)] +
                              prof.rho[static_cast<std::size_t>(k)]);
            const double phi_mid = 0.5 * (prof.phi[static_cast<std::size_t>((k + nphi - 1) % nphi)] +
                                          prof.phi[static_cast<std::size_t>(k)]);
            auto w = shoot_from_cone(s, f.sources[static_cast<std::size_t>(si)], phi_mid, tr.value);
            if (w) {
                tr.where = *w;
                tr.where_ok = true;
            }
            transitions.push_back(tr);
        }
    }

    // cluster transitions into graph vertices
    const DistanceEvaluator ev2 = make_evaluator(s, f);
    (void)ev2;
    std::vector<int> tcluster(transitions.size());
    {
        std::vector<int> uf(transitions.size());
        for (std::size_t i = 0; i < uf.size(); ++i) uf[i] = static_cast<int>(i);
        const double merge_tol = std::max(4 * f.h / std::max(1, nphi / 16), 1e-7) +
                                 8 * kPi / nphi * 0.1; // heuristic spatial tolerance
        for (std::size_t i = 0; i < transitions.size(); ++i)
            for (std::size_t j = i + 1; j < transitions.size(); ++j) {
                if (!transitions[i].where_ok || !transitions[j].where_ok) continue;
                if (std::abs(transitions[i].value - transitions[j].value) >
                    0.05 + 4 * f.err)
                    continue;
                // same-triangle proximity in developed coordinates is only
                // meaningful within a triangle; use the evaluator-free test:
                // distance via field mesh interpolation both ways
                const double d1 = std::abs(f.eval_min(transitions[i].where) -
                                           f.eval_min(transitions[j].where));
                const SurfacePoint&pi = transitions[i].where, &pj = transitions[j].where;
                double geo = kInf;
                if (pi.tri == pj.tri) geo = geodesic_dist(pi.pos, pj.pos);
                if (geo < merge_tol && d1 < merge_tol) uf_union(uf, static_cast<int>(i), static_cast<int>(j));
            }
        // also merge transitions through matching (slot,label)-pairs: the
        // transition between arcs (i->j) and (j->i) at equal values
        for (std::size_t i = 0; i < transitions.size(); ++i) tcluster[i] = uf_find(uf, static_cast<int>(i));
    }
    std::map<int, std::vector<std::size_t>> clusters;
    for (std::size_t i = 0; i < transitions.size(); ++i) clusters[tcluster[i]].push_back(i);

    cx.gamma_vertices = static_cast<int>(clusters.size());
    cx.gamma_edges = static_cast<int>(arcs.size()) / 2;
    for (const auto& [rep, members] : clusters) {
        (void)rep;
        cx.vertex_multiplicities.push_back(static_cast<int>(members.size()));
    }

    // minima
    for (int si = 0; si < ns; ++si) {
        CriticalPoint c;
        c.kind = CritKind::Minimum;
        c.value = 0;
        c.cell_i = si;
        cx.criticals.push_back(c);
    }

    // saddles: interior minima of rho along arcs, deduped across the two views
    struct SaddleCand {
        int si, sj;
        double value;
        SurfacePoint where;
        bool loop;
    };
    std::vector<SaddleCand> cands;
    for (const Arc& arc : arcs) {
        if (arc.label < 0) continue;
        const auto& prof = a.profiles[static_cast<std::size_t>(arc.slot)];
        // interior strict minimum (or closed-arc global minimum)
        const bool closed = arc.len == nphi;
        if (arc.min_at < 0) continue;
        if (!closed) {
            const int off = (arc.min_at - arc.begin + nphi) % nphi;
            if (off == 0 || off == arc.len - 1) continue; // min at an endpoint: no saddle
            if (!(arc.min_rho < std::min(arc.end_a_value, arc.end_b_value) - 1e-12)) continue;
        }
        // parabolic refinement of the minimum
        const int k0 = (arc.min_at + nphi - 1) % nphi, k2 = (arc.min_at + 1) % nphi;
        const double y0 = prof.rho[static_cast<std::size_t>(k0)],
                     y1 = prof.rho[static_cast<std::size_t>(arc.min_at)],
                     y2 = prof.rho[static_cast<std::size_t>(k2)];
        double value = y1;
        const double denom = y0 - 2 * y1 + y2;
        if (denom > 1e-300) value = y1 - (y0 - y2) * (y0 - y2) / (8 * denom);
        SaddleCand c;
        c.si = arc.slot;
        c.sj = arc.label;
        c.value = value;
        c.loop = (arc.label == arc.slot);
        auto w = shoot_from_cone(s, f.sources[static_cast<std::size_t>(arc.slot)],
                                 prof.phi[static_cast<std::size_t>(arc.min_at)], y1);
        if (w) c.where = *w;
        cands.push_back(c);
    }
    std::sort(cands.begin(), cands.end(), [](const auto& x, const auto& y) { return x.value < y.value; });
    std::vector<SaddleCand> saddles;
    for (const auto& c : cands) {
        bool dup = false;
        for (const auto& kept : saddles) {
            const bool same_pair = (kept.si == c.si && kept.sj == c.sj) ||
                                   (kept.si == c.sj && kept.sj == c.si);
            if (same_pair && std::abs(kept.value - c.value) < 2e-3 + 8 * f.err) dup = true;
        }
        if (!dup) saddles.push_back(c);
    }
    for (const auto& c : saddles) {
        CriticalPoint cp;
        cp.kind = CritKind::Saddle;
        cp.value = c.value;
        cp.where = c.where;
        cp.cell_i = c.si;
        cp.cell_j = c.sj;
        cp.loop = c.loop;
        cx.criticals.push_back(cp);
    }
    cx.saddle_count = static_cast<int>(saddles.size());

    // maxima: vertex clusters whose incident arc values decrease away, plus
    // interior maxima of closed or open arcs above pi/2
    int maxima = 0;
    for (const auto& [rep, members] : clusters) {
        (void)rep;
        double vmax = 0, vmin = kInf;
        for (std::size_t id : members) {
            vmax = std::max(vmax, transitions[id].value);
            vmin = std::min(vmin, transitions[id].value);
        }
        // neighbors along arcs: sample rho one step into each adjacent run
        bool is_max = true;
        for (std::size_t id : members) {
            const Transition& tr = transitions[id];
            const auto& prof = a.profiles[static_cast<std::size_t>(tr.slot)];
            const int before = (tr.k + nphi - 2) % nphi;
            const int after = (tr.k + 1) % nphi;
            if (prof.rho[static_cast<std::size_t>(before)] > tr.value + 1e-9) is_max = false;
            if (prof.rho[static_cast<std::size_t>(after)] > tr.value + 1e-9) is_max = false;
        }
        if (is_max) {
            ++maxima;
            CriticalPoint cp;
            cp.kind = CritKind::IsolatedMax;
            cp.value = vmax;
            if (!members.empty() && transitions[members.front()].where_ok)
                cp.where = transitions[members.front()].where;
            cx.criticals.push_back(cp);
        }
    }
    for (const Arc& arc : arcs) {
        // interior maxima above pi/2 (edge-interior isolated maxima); plateau flag
        const auto& prof = a.profiles[static_cast<std::size_t>(arc.slot)];
        if (arc.len < 3) continue;
        int interior_max_at = -1;
        double vmax = 0;
        for (int q = 1; q + 1 < arc.len; ++q) {
            const int idx = (arc.begin + q) % nphi;
            const double r = prof.rho[static_cast<std::size_t>(idx)];
            const double rp = prof.rho[static_cast<std::size_t>((idx + nphi - 1) % nphi)];
            const double rn = prof.rho[static_cast<std::size_t>((idx + 1) % nphi)];
            if (r > rp + 1e-9 && r > rn + 1e-9 && r > kPi / 2 - 1e-6 && r > vmax) {
                vmax = r;
                interior_max_at = idx;
            }
        }
        if (interior_max_at >= 0 && arc.slot <= arc.label) {
            ++maxima;
            CriticalPoint cp;
            cp.kind = CritKind::IsolatedMax;
            cp.value = vmax;
            cx.criticals.push_back(cp);
        }
        // plateau detection
        int near_half_pi = 0;
        for (int q = 0; q < arc.len; ++q) {
            const int idx = (arc.begin + q) % nphi;
            if (std::abs(prof.rho[static_cast<std::size_t>(idx)] - kPi / 2) < 10 * f.tol)
                ++near_half_pi;
        }
        if (near_half_pi > std::max(2, arc.len / 2)) cx.plateau_flag = true;
    }
    cx.maxima_components = maxima;

    cx.min_positive_critical = kInf;
    for (const auto& c : cx.criticals)
        if (c.value > 1e-12) cx.min_positive_critical = std::min(cx.min_positive_critical, c.value);

    if (assert_invariants && !s.has_boundary()) {
        const int g = s.genus();
        const int n = static_cast<int>(s.marked.size());
        const int chi_dot = 2 - 2 * g - n;
        if (cx.gamma_edges > 6 * g - 6 + 3 * n)
            throw TopologyError("Voronoi graph edge bound violated");
        if (cx.gamma_vertices > std::max(0, 4 * g - 4 + 2 * n))
            throw TopologyError("Voronoi graph vertex bound violated");
        for (int mu : cx.vertex_multiplicities)
            if (mu < 3) throw NeedsRefinement("Voronoi vertex of multiplicity < 3 detected");
        if (cx.saddle_count > -3 * chi_dot)
            throw TopologyError("saddle count exceeds -3*chi bound");
        for (const auto* sd : cx.saddles())
            if (sd->value >= kPi / 2 + 1e-6) throw TopologyError("saddle value >= pi/2");
        if (cx.maxima_components - cx.saddle_count != chi_dot)
            throw NeedsRefinement("Morse count mismatch: |max components| - |saddles| != chi");
    }
    return a;
}

double level_length(const VoronoiAnalysis& a, double r, bool check_critical) {
    if (check_critical) {
        for (const auto& c : a.complex.criticals)
            if (c.value > 1e-12 && std::abs(c.value - r) < 10 * a.field->tol)
                throw NearCriticalLevel("level near a critical value");
    }
    double len = 0;
    for (int si = 0; si < a.field->source_count(); ++si)
        len += std::sin(r) * a.cell_level_measure(si, r);
    return len;
}

double sublevel_area(const VoronoiAnalysis& a, double r) {
    double area = 0;
    for (int si = 0; si < a.field->source_count(); ++si) area += a.cell_area(si, r);
    return area;
}

double max_voronoi(const VoronoiAnalysis& a) {
    double m = 0;
    for (const auto& p : a.profiles)
        for (double r : p.rho) m = std::max(m, r);
    return m;
}

std::vector<SublevelComponent> sublevel_components(const VoronoiAnalysis& a, double r) {
    const int ns = a.field->source_count();
    std::vector<int> uf(static_cast<std::size_t>(ns));
    for (int i = 0; i < ns; ++i) uf[static_cast<std::size_t>(i)] = i;
    for (const auto& c : a.complex.criticals)
        if (c.kind == CritKind::Saddle && c.value <= r) uf_union(uf, c.cell_i, c.cell_j);
    std::map<int, SublevelComponent> comp;
    for (int i = 0; i < ns; ++i) comp[uf_find(uf, i)].slots.push_back(i);
    std::vector<SublevelComponent> out;
    const auto theta = a.surface->angle_vector();
    for (auto& [rep, sc] : comp) {
        (void)rep;
        int internal_saddles = 0;
        sc.lowest_saddle = kInf;
        for (const auto& c : a.complex.criticals) {
            if (c.kind != CritKind::Saddle || c.value > r) continue;
            if (std::find(sc.slots.begin(), sc.slots.end(), c.cell_i) != sc.slots.end()) {
                ++internal_saddles;
                sc.contains_saddle = true;
                sc.lowest_saddle = std::min(sc.lowest_saddle, c.value);
            }
        }
        for (int si : sc.slots) {
            sc.area += a.cell_area(si, r);
            sc.boundary_length += std::sin(r) * a.cell_level_measure(si, r);
            sc.angle_sum +=
                2 * kPi * theta[static_cast<std::size_t>(a.field->sources[static_cast<std::size_t>(si)])];
        }
        sc.boundary_curves = 2 - static_cast<int>(sc.slots.size()) + internal_saddles;
        out.push_back(std::move(sc));
    }
    return out;
}

namespace {

// essentiality of the level curves around a cluster, genus 0: both sides must
// carry at least two cones
bool cluster_essential(const VoronoiAnalysis& a, const std::vector<int>& slots) {
    const ConeSurface& s = *a.surface;
    if (s.genus() != 0) return true; // conservative for positive genus
    const int inside = static_cast<int>(slots.size());
    const int outside = static_cast<int>(s.marked.size()) - inside;
    return inside >= 2 && outside >= 2;
}

} // namespace

std::vector<CylinderRegion> cylinder_regions(const VoronoiAnalysis& a, double r1, double r2,
                                             bool forbid_saddles) {
    if (!(0 < r1) || !(r1 < r2)) throw DomainError("need 0 < r1 < r2");
    for (const auto& c : a.complex.criticals)
        if (c.kind == CritKind::Saddle && c.value > r1 && c.value < r2) {
            if (forbid_saddles) throw SaddleInInterval("saddle value inside the interval");
        }
    std::vector<CylinderRegion> out;
    const double tn = a.surface->theta_norm1();
    // cylinders over sublevel clusters at r1 that reach past r2
    for (const auto& sc : sublevel_components(a, r1)) {
        double reach = 0;
        for (int si : sc.slots)
            for (double rho : a.profiles[static_cast<std::size_t>(si)].rho)
                reach = std::max(reach, rho);
        if (reach <= r2) continue;
        CylinderRegion reg;
        reg.kind = CylinderRegion::Cylinder;
        reg.inner_slots = sc.slots;
        reg.boundary_curves = sc.boundary_curves;
        reg.essential = cluster_essential(a, sc.slots);
        reg.modulus_coarse = std::log(r2 / r1) / (2 * kPi * tn);
        if (reg.boundary_curves == 1) {
            // quadrature of dt / l(level_t) in log space (Simpson)
            const int segs = 4096;
            const double u1 = std::log(r1), u2 = std::log(r2);
            auto integrand = [&](double u) {
                const double t = std::exp(u);
                double len = 0;
                for (int si : sc.slots) len += std::sin(t) * a.cell_level_measure(si, t);
                return len > 0 ? t / len : 0.0;
            };
            double acc = integrand(u1) + integrand(u2);
            for (int k = 1; k < segs; ++k) {
                const double u = u1 + (u2 - u1) * k / segs;
                acc += integrand(u) * (k % 2 ? 4.0 : 2.0);
            }
            reg.modulus_quadrature = acc * (u2 - u1) / (3 * segs);
        }
        out.push_back(std::move(reg));
    }
    // caps: isolated maxima inside (r1, r2)
    for (const auto& c : a.complex.criticals) {
        if (c.kind != CritKind::IsolatedMax) continue;
        if (c.value <= r1 || c.value >= r2) continue;
        CylinderRegion reg;
        reg.kind = CylinderRegion::Cap;
        reg.max_value = c.value;
        reg.essential = false;
        out.push_back(std::move(reg));
    }
    return out;
}

std::optional<VoronoiCore> voronoi_core(const VoronoiAnalysis& a, double r, CoreFailure* why,
                                        double sys_hint) {
    auto fail = [&](CoreFailure code) -> std::optional<VoronoiCore> {
        if (why) *why = code;
        return std::nullopt;
    };
    if (!(r < kPi / 2)) return fail(CoreFailure::NoneFound);
    const double sys =
        sys_hint > 0 ? sys_hint
                     : (std::isfinite(a.complex.min_positive_critical) ? a.complex.min_positive_critical
                                                                       : kInf);
    if (r <= sys) return fail(CoreFailure::BelowSystole);
    auto comps = sublevel_components(a, r);
    // candidate core: the component whose complement components each carry at
    // most one cone; with the cluster picture the complement cone content is
    // the other clusters, which must each be singletons sitting in their own
    // complement disk
    const SublevelComponent* core_sc = nullptr;
    for (const auto& sc : comps) {
        bool ok = sc.contains_saddle;
        for (const auto& other : comps) {
            if (&other == &sc) continue;
            if (other.slots.size() > 1) ok = false;
        }
        if (!ok) continue;
        // every level curve at r must be non-essential
        for (const auto& any : comps)
            if (cluster_essential(a, any.slots)) ok = false;
        if (ok) {
            if (core_sc) return fail(CoreFailure::NoneFound); // ambiguity
            core_sc = &sc;
        }
    }
    if (!core_sc) {
        // distinguish the essential-level reason
        for (const auto& sc : comps)
            if (cluster_essential(a, sc.slots)) return fail(CoreFailure::EssentialLevel);
        return fail(CoreFailure::NoneFound);
    }
    VoronoiCore core;
    core.slots = core_sc->slots;
    core.area = core_sc->area;
    core.boundary_length = core_sc->boundary_length;
    core.angle_sum = core_sc->angle_sum;
    // complement: singleton clusters become one-cone disks; caps around maxima
    // above r become cone-free disks
    for (const auto& sc : comps) {
        if (&sc == core_sc) continue;
        VoronoiCore::Complement c;
        c.slots = sc.slots;
        c.boundary_length = sc.boundary_length;
        c.is_cap = false;
        core.complement.push_back(std::move(c));
    }
    // caps: split the remaining core boundary among maxima above r; when the
    // counts match boundary_curves - #cone complements, distribute by the
    // level-curve structure (equal split is exact for the symmetric doubles,
    // and the mesh grouping refines it when resolvable)
    const int cap_count = core_sc->boundary_curves - static_cast<int>(core.complement.size());
    if (cap_count > 0) {
        // group boundary arcs by complement component via mesh components of
        // the superlevel when resolvable
        std::vector<double> cap_lengths(static_cast<std::size_t>(cap_count),
                                        core_sc->boundary_length / cap_count);
        // mesh-based refinement
        const RefinedMesh& m = *a.field->mesh;
        std::vector<int> uf(static_cast<std::size_t>(m.node_count));
        for (int i = 0; i < m.node_count; ++i) uf[static_cast<std::size_t>(i)] = i;
        std::vector<char> up(static_cast<std::size_t>(m.node_count), 0);
        for (int v = 0; v < m.node_count; ++v) up[static_cast<std::size_t>(v)] = a.field->value(v) > r;
        for (int u = 0; u < m.node_count; ++u) {
            if (!up[static_cast<std::size_t>(u)]) continue;
            for (int k = m.adj_off[static_cast<std::size_t>(u)]; k < m.adj_off[static_cast<std::size_t>(u) + 1]; ++k) {
                const int v = m.adj_node[static_cast<std::size_t>(k)];
                if (up[static_cast<std::size_t>(v)]) uf_union(uf, u, v);
            }
        }
        std::map<int, double> comp_len;
        for (int si : core.slots) {
            const auto& prof = a.profiles[static_cast<std::size_t>(si)];
            const double dphi = prof.cone_angle / a.nphi;
            for (int k = 0; k < a.nphi; ++k) {
                if (prof.rho[static_cast<std::size_t>(k)] <= r) continue;
                // sample just above the level to find the superlevel component
                auto p = shoot_from_cone(*a.surface, a.field->sources[static_cast<std::size_t>(si)],
                                         prof.phi[static_cast<std::size_t>(k)],
                                         std::min(prof.rho[static_cast<std::size_t>(k)], r + 2 * a.field->h));
                if (!p) continue;
                // nearest mesh node in that triangle
                const auto& nodes = m.tri_nodes_cache[static_cast<std::size_t>(p->tri)];
                const auto& pos = m.tri_node_pos_cache[static_cast<std::size_t>(p->tri)];
                int bestn = -1;
                double bestd = kInf;
                for (std::size_t q = 0; q < nodes.size(); ++q) {
                    if (!up[static_cast<std::size_t>(nodes[q])]) continue;
                    const double d = geodesic_dist(pos[q], p->pos);
                    if (d < bestd) {
                        bestd = d;
                        bestn = nodes[q];
                    }
                }
                if (bestn >= 0) comp_len[uf_find(uf, bestn)] += std::sin(r) * dphi;
            }
        }
        if (static_cast<int>(comp_len.size()) == cap_count) {
            std::size_t idx = 0;
            for (const auto& [rep, len] : comp_len) {
                (void)rep;
                cap_lengths[idx++] = len;
            }
        }
        for (double len : cap_lengths) {
            VoronoiCore::Complement c;
            c.boundary_length = len;
            c.is_cap = true;
            core.complement.push_back(std::move(c));
        }
    }
    if (why) *why = CoreFailure::None;
    return core;
}

DiskEstimate disk_area_estimate_b0(double area, double boundary_length) {
    if (!(boundary_length < 2 * kPi))
        throw EstimateInapplicable("boundary not shorter than 2*pi");
    DiskEstimate e;
    const double x = area / (4 * kPi);
    e.b = std::max(0, static_cast<int>(std::lround(x)));
    if (std::abs(x - std::floor(x) - 0.5) < 1e-9)
        throw EstimateInapplicable("two integers tie for the area residual");
    e.residual = std::abs(area - 4 * kPi * e.b) / (2 * kPi);
    e.bound = (boundary_length / (2 * kPi)) * (boundary_length / (2 * kPi));
    e.ok = e.residual < e.bound;
    return e;
}

DiskEstimate disk_area_estimate_b1(double area, double boundary_length, double theta,
                                   double dist_cone_to_boundary) {
    const double lambda1 = boundary_length / dist_cone_to_boundary;
    if (!(lambda1 < 0.5)) throw EstimateInapplicable("lambda1 not below 1/2");
    DiskEstimate e;
    const double x = area / (4 * kPi) - theta;
    e.b = std::max(0, static_cast<int>(std::lround(x)));
    if (std::abs(x - std::floor(x) - 0.5) < 1e-9)
        throw EstimateInapplicable("two integers tie for the area residual");
    e.residual = std::abs(area - 4 * kPi * (theta + e.b)) / (2 * kPi);
    e.bound = lambda1;
    e.ok = e.residual < e.bound;
    return e;
}

BubblingDecomposition epsilon_bubbling(const VoronoiAnalysis& a, double r1, double r2) {
    for (const auto& c : a.complex.criticals)
        if (c.kind == CritKind::Saddle && c.value > r1 && c.value < r2)
            throw SaddleInInterval("saddle value inside the bubbling interval");
    CoreFailure why;
    auto core = voronoi_core(a, r1, &why);
    if (!core) {
        if (why == CoreFailure::BelowSystole)
            throw DomainError("bubbling level below the systole");
        throw DomainError("no Voronoi core at the requested level (essential level component)");
    }
    BubblingDecomposition dec;
    dec.core = *core;
    dec.r1 = r1;
    dec.r2 = r2;
    for (const auto& c : core->complement) {
        if (c.is_cap) {
            const double l0 = (c.boundary_length / (2 * kPi));
            dec.lambda0_sum += l0 * l0;
        } else {
            dec.lambda1_sum += c.boundary_length / r1;
        }
    }
    dec.epsilon = core->area / (2 * kPi) + dec.lambda0_sum + dec.lambda1_sum;
    return dec;
}

bool SmallAngleReport::all_ok() const {
    return cell_inside_bmax && saddle_value_in_range && distance_inequality && boundary_in_ball &&
           (theta >= 1.0 / 7 || boundary_in_half_ball);
}

SmallAngleReport small_angle_checks(const VoronoiAnalysis& a, int marked_index) {
    const ConeSurface& s = *a.surface;
    const DistanceField& f = *a.field;
    SmallAngleReport rep;
    rep.marked_index = marked_index;
    const auto theta = s.angle_vector();
    rep.theta = theta[static_cast<std::size_t>(marked_index)];
    if (rep.theta > 1.0 / 3 + 1e-12) throw DomainError("small-angle checks need theta <= 1/3");
    int slot = -1;
    for (int si = 0; si < f.source_count(); ++si)
        if (f.sources[static_cast<std::size_t>(si)] == marked_index) slot = si;
    if (slot < 0) throw DomainError("marked point not a source");

    const DistanceEvaluator ev = make_evaluator(s, f);
    // d_i: nearest other cone
    const auto arcs = shortest_arcs_between_cones(s, f);
    double di = kInf;
    int nearest = -1;
    std::map<std::pair<int, int>, double> pair_d;
    for (const auto& arc : arcs) {
        pair_d[{arc.i, arc.j}] = arc.length;
        pair_d[{arc.j, arc.i}] = arc.length;
        if (arc.i == marked_index || arc.j == marked_index) {
            if (arc.length < di) {
                di = arc.length;
                nearest = arc.i == marked_index ? arc.j : arc.i;
            }
        }
    }
    rep.d_nearest = di;

    // (a) cell inside the open maximal 1-pointed ball + saddle value window
    double max_rho = 0, min_cut = kInf;
    const auto& prof = a.profiles[static_cast<std::size_t>(slot)];
    for (double r : prof.rho) {
        max_rho = std::max(max_rho, r);
        min_cut = std::min(min_cut, r);
    }
    rep.cell_inside_bmax = max_rho < di - 1e-9;
    double saddle_val = kInf;
    for (const auto& c : a.complex.criticals)
        if (c.kind == CritKind::Saddle && (c.cell_i == slot || c.cell_j == slot))
            saddle_val = std::min(saddle_val, c.value);
    rep.saddle_value = saddle_val;
    rep.saddle_value_in_range = saddle_val >= di / 2 - 2 * f.err - 1e-9 && saddle_val < di;

    // (b) d(x_k, x_i) >= d(x_k, x_j) + d_i - pi*theta_i for k != i, j
    rep.distance_inequality = true;
    for (int k = 0; k < static_cast<int>(s.marked.size()); ++k) {
        if (k == marked_index || k == nearest) continue;
        const double dki = pair_d.count({k, marked_index}) ? pair_d[{k, marked_index}] : kInf;
        const double dkj = pair_d.count({k, nearest}) ? pair_d[{k, nearest}] : kInf;
        if (!(dki >= dkj + di - kPi * rep.theta - 1e-6)) rep.distance_inequality = false;
    }

    // (c), (d): sample the boundary circle of B^max
    rep.boundary_in_ball = true;
    rep.boundary_in_half_ball = true;
    int nearest_slot = -1;
    for (int si = 0; si < f.source_count(); ++si)
        if (f.sources[static_cast<std::size_t>(si)] == nearest) nearest_slot = si;
    const int nsamp = 64;
    const double cone_angle = 2 * kPi * rep.theta;
    for (int k = 0; k < nsamp; ++k) {
        const double phi = (k + 0.5) * cone_angle / nsamp;
        bool back = false;
        auto p = shoot_from_cone(s, marked_index, phi, di, &back);
        if (!p) continue;
        const double dj = ev(nearest_slot, *p, back);
        if (dj > kPi * rep.theta + 2 * f.err + 1e-6) rep.boundary_in_ball = false;
        if (dj >= di / 2 - 2 * f.err) rep.boundary_in_half_ball = false;
    }
    return rep;
}

} // namespace spherecone
