#include "spherecone/geodesics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <set>

#include "spherecone/errors.hpp"
#include "spherecone/parallel.hpp"

namespace spherecone {

namespace {

// canonical development: corner0 at the pole, corner1 down meridian 0,
// corner2 at longitude +angle0 (counterclockwise orientation)
std::array<Vec3, 3> develop_triangle(const TriangleGeom& t) {
    const double a = t.side(0), c = t.side(2);
    const double A0 = t.angle(0);
    const Vec3 p0{0, 0, 1};
    const Vec3 p1{std::sin(a), 0, std::cos(a)};
    const Vec3 p2{std::sin(c) * std::cos(A0), std::sin(c) * std::sin(A0), std::cos(c)};
    return {p0, p1, p2};
}

// map from frame of triangle `from` into frame of triangle `to` across the
// glued side (from, e_from) ~ (to, e_to); corners match reversed
Rotation frame_transfer(const std::array<Vec3, 3>& dev_to, int e_to,
                        const std::array<Vec3, 3>& dev_from, int e_from) {
    const Vec3& u1 = dev_from[static_cast<std::size_t>(e_from)];
    const Vec3& u2 = dev_from[static_cast<std::size_t>((e_from + 1) % 3)];
    const Vec3& v1 = dev_to[static_cast<std::size_t>((e_to + 1) % 3)];
    const Vec3& v2 = dev_to[static_cast<std::size_t>(e_to)];
    return Rotation::frame_map(u1, u2, v1, v2);
}

// signed arc parameter of point q on the oriented great circle a->b
double arc_param(const Vec3& a, const Vec3& b, const Vec3& q) {
    Vec3 t = b - a * dot(a, b);
    const double tn = norm(t);
    if (tn < 1e-300) return 0;
    t = t * (1.0 / tn);
    return std::atan2(dot(q, t), dot(q, a));
}

} // namespace

Vec3 RefinedMesh::node_pos_in(int node, int tri) const {
    if (node_class[static_cast<std::size_t>(node)] >= 0) {
        const int cls = node_class[static_cast<std::size_t>(node)];
        for (int c = 0; c < 3; ++c)
            if (surface->vertex_class(tri, c) == cls)
                return dev[static_cast<std::size_t>(tri)][static_cast<std::size_t>(c)];
        throw DomainError("node not on triangle");
    }
    for (std::size_t ei = 0; ei < edges.size(); ++ei) {
        const Edge& E = edges[ei];
        if (node < E.first_node || node >= E.first_node + E.steiner) continue;
        const int j = node - E.first_node + 1;
        const double s = E.len * j / (E.steiner + 1);
        if (E.a.tri == tri) {
            const auto& d = dev[static_cast<std::size_t>(tri)];
            return slerp(d[static_cast<std::size_t>(E.a.side)], d[static_cast<std::size_t>((E.a.side + 1) % 3)], s);
        }
        if (E.b.valid() && E.b.tri == tri) {
            const auto& d = dev[static_cast<std::size_t>(tri)];
            return slerp(d[static_cast<std::size_t>(E.b.side)], d[static_cast<std::size_t>((E.b.side + 1) % 3)],
                         E.len - s);
        }
        throw DomainError("node not on triangle");
    }
    throw DomainError("node not found");
}

std::vector<int> RefinedMesh::boundary_nodes_of_tri(int tri) const {
    return tri_nodes_cache.at(static_cast<std::size_t>(tri));
}

std::vector<int> RefinedMesh::tris_of_node(int node) const {
    std::vector<int> out;
    if (node_class[static_cast<std::size_t>(node)] >= 0) {
        for (auto [t, c] : surface->corners_of_class(node_class[static_cast<std::size_t>(node)])) {
            (void)c;
            out.push_back(t);
        }
    } else {
        for (const Edge& E : edges) {
            if (node >= E.first_node && node < E.first_node + E.steiner) {
                out.push_back(E.a.tri);
                if (E.b.valid()) out.push_back(E.b.tri);
                break;
            }
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

RefinedMesh build_mesh(const ConeSurface& s, double h, const std::vector<int>* seg_override) {
    RefinedMesh m;
    m.surface = &s;
    m.h_ = h;
    m.dev.reserve(s.tris.size());
    for (const auto& t : s.tris) m.dev.push_back(develop_triangle(t));

    const auto reps = s.class_representatives();
    for (std::size_t i = 0; i < reps.size(); ++i) {
        m.class_to_node[reps[i]] = static_cast<int>(i);
        m.node_class.push_back(reps[i]);
    }
    m.class_node = reps;
    int next = static_cast<int>(reps.size());

    std::set<std::pair<int, int>> seen;
    for (int t = 0; t < static_cast<int>(s.tris.size()); ++t) {
        for (int e = 0; e < 3; ++e) {
            if (seen.count({t, e})) continue;
            RefinedMesh::Edge E;
            E.a = {t, e};
            E.b = s.glue[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)];
            E.len = s.tris[static_cast<std::size_t>(t)].side(e);
            seen.insert({t, e});
            if (E.b.valid()) seen.insert({E.b.tri, E.b.side});
            const int ei = static_cast<int>(m.edges.size());
            const int segs = seg_override ? (*seg_override)[static_cast<std::size_t>(ei)]
                                          : std::max(1, static_cast<int>(std::ceil(E.len / h)));
            E.steiner = segs - 1;
            E.first_node = next;
            next += E.steiner;
            m.side_to_edge[{E.a.tri, E.a.side}] = ei;
            if (E.b.valid()) m.side_to_edge[{E.b.tri, E.b.side}] = ei;
            m.edges.push_back(E);
        }
    }
    m.node_count = next;
    m.node_class.resize(static_cast<std::size_t>(next), -1);

    std::vector<std::vector<std::pair<int, double>>> adj(static_cast<std::size_t>(next));
    auto add = [&](int u, int v, double w) {
        if (u == v) return;
        adj[static_cast<std::size_t>(u)].push_back({v, w});
        adj[static_cast<std::size_t>(v)].push_back({u, w});
    };
    m.tri_nodes_cache.assign(s.tris.size(), {});
    m.tri_node_pos_cache.assign(s.tris.size(), {});
    for (int t = 0; t < static_cast<int>(s.tris.size()); ++t) {
        std::array<std::vector<int>, 3> side_nodes;
        for (int e = 0; e < 3; ++e) {
            auto& list = side_nodes[static_cast<std::size_t>(e)];
            list.push_back(m.class_to_node.at(s.vertex_class(t, e)));
            const RefinedMesh::Edge& E = m.edges[static_cast<std::size_t>(m.side_to_edge.at({t, e}))];
            const bool fwd = (E.a.tri == t && E.a.side == e);
            if (fwd)
                for (int j = 0; j < E.steiner; ++j) list.push_back(E.first_node + j);
            else
                for (int j = E.steiner - 1; j >= 0; --j) list.push_back(E.first_node + j);
            list.push_back(m.class_to_node.at(s.vertex_class(t, (e + 1) % 3)));
        }
        for (int e = 0; e < 3; ++e) {
            const auto& list = side_nodes[static_cast<std::size_t>(e)];
            const double step =
                s.tris[static_cast<std::size_t>(t)].side(e) / (static_cast<double>(list.size()) - 1);
            for (std::size_t i = 0; i + 1 < list.size(); ++i) add(list[i], list[i + 1], step);
        }
        for (int e1 = 0; e1 < 3; ++e1)
            for (int e2 = e1 + 1; e2 < 3; ++e2)
                for (int u : side_nodes[static_cast<std::size_t>(e1)])
                    for (int v : side_nodes[static_cast<std::size_t>(e2)]) {
                        if (u == v) continue;
                        add(u, v, geodesic_dist(m.node_pos_in(u, t), m.node_pos_in(v, t)));
                    }
        // caches
        auto& tn = m.tri_nodes_cache[static_cast<std::size_t>(t)];
        for (int e = 0; e < 3; ++e)
            for (int u : side_nodes[static_cast<std::size_t>(e)]) tn.push_back(u);
        std::sort(tn.begin(), tn.end());
        tn.erase(std::unique(tn.begin(), tn.end()), tn.end());
        auto& tp = m.tri_node_pos_cache[static_cast<std::size_t>(t)];
        for (int u : tn) tp.push_back(m.node_pos_in(u, t));
    }
    m.adj_off.assign(static_cast<std::size_t>(next) + 1, 0);
    for (std::size_t u = 0; u < adj.size(); ++u) {
        auto& a = adj[u];
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end(),
                            [](const auto& x, const auto& y) { return x.first == y.first; }),
                a.end());
        m.adj_off[u + 1] = m.adj_off[u] + static_cast<int>(a.size());
    }
    m.adj_node.resize(static_cast<std::size_t>(m.adj_off.back()));
    m.adj_w.resize(static_cast<std::size_t>(m.adj_off.back()));
    for (std::size_t u = 0; u < adj.size(); ++u) {
        int k = m.adj_off[u];
        for (const auto& [v, w] : adj[u]) {
            m.adj_node[static_cast<std::size_t>(k)] = v;
            m.adj_w[static_cast<std::size_t>(k)] = w;
            ++k;
        }
    }
    return m;
}

namespace {

std::vector<double> dijkstra(const RefinedMesh& m, const std::vector<std::pair<int, double>>& seeds,
                             std::vector<int>* parent = nullptr,
                             const std::vector<char>* blocked = nullptr) {
    std::vector<double> d(static_cast<std::size_t>(m.node_count),
                          std::numeric_limits<double>::infinity());
    if (parent) parent->assign(static_cast<std::size_t>(m.node_count), -1);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    for (auto [n, w] : seeds) {
        if (blocked && (*blocked)[static_cast<std::size_t>(n)]) continue;
        if (w < d[static_cast<std::size_t>(n)]) {
            d[static_cast<std::size_t>(n)] = w;
            pq.push({w, n});
        }
    }
    while (!pq.empty()) {
        auto [du, u] = pq.top();
        pq.pop();
        if (du > d[static_cast<std::size_t>(u)]) continue;
        for (int k = m.adj_off[static_cast<std::size_t>(u)];
             k < m.adj_off[static_cast<std::size_t>(u) + 1]; ++k) {
            const int v = m.adj_node[static_cast<std::size_t>(k)];
            if (blocked && (*blocked)[static_cast<std::size_t>(v)]) continue;
            const double nd = du + m.adj_w[static_cast<std::size_t>(k)];
            if (nd < d[static_cast<std::size_t>(v)]) {
                d[static_cast<std::size_t>(v)] = nd;
                if (parent) (*parent)[static_cast<std::size_t>(v)] = u;
                pq.push({nd, v});
            }
        }
    }
    return d;
}

DistanceField build_field_impl(const ConeSurface& s, std::vector<int> sources, double tol,
                               int max_refinements, bool parallel) {
    if (!(tol > 0)) throw DomainError("tol must be positive");
    if (sources.empty())
        for (int i = 0; i < static_cast<int>(s.marked.size()); ++i) sources.push_back(i);

    double maxedge = 0;
    for (const auto& t : s.tris) maxedge = std::max({maxedge, t.a, t.b, t.c});
    const double h0 = maxedge / 8;

    // per-edge segment counts fixed at level 0, doubled per level so that
    // coarse nodes persist in refined meshes
    std::vector<int> segs0;
    {
        const RefinedMesh probe = build_mesh(s, h0);
        for (const auto& E : probe.edges) segs0.push_back(E.steiner + 1);
    }

    DistanceField prev;
    for (int level = 0;; ++level) {
        std::vector<int> segs = segs0;
        for (auto& x : segs) x <<= level;
        const double h = h0 / (1 << level);
        DistanceField f;
        f.mesh = std::make_shared<RefinedMesh>(build_mesh(s, h, &segs));
        f.mesh->level = level;
        f.sources = sources;
        f.tol = tol;
        f.h = h;
        f.dist.assign(sources.size(), {});
        auto run_source = [&](std::size_t si) {
            const int cls = s.marked[static_cast<std::size_t>(sources[si])].vertex_class;
            const int node = f.mesh->class_to_node.at(cls);
            f.dist[si] = dijkstra(*f.mesh, {{node, 0.0}});
        };
        if (parallel)
            par::parallel_for(sources.size(), run_source);
        else
            for (std::size_t si = 0; si < sources.size(); ++si) run_source(si);

        if (level > 0) {
            double diff = 0;
            const RefinedMesh& mp = *prev.mesh;
            const RefinedMesh& mf = *f.mesh;
            for (std::size_t si = 0; si < sources.size(); ++si) {
                for (std::size_t n = 0; n < mp.class_node.size(); ++n)
                    diff = std::max(diff, std::abs(prev.dist[si][n] - f.dist[si][n]));
                for (std::size_t ei = 0; ei < mp.edges.size(); ++ei) {
                    const auto& Eo = mp.edges[ei];
                    const auto& En = mf.edges[ei];
                    for (int j = 1; j <= Eo.steiner; ++j) {
                        const int old_node = Eo.first_node + j - 1;
                        const int new_node = En.first_node + 2 * j - 1;
                        diff = std::max(diff,
                                        std::abs(prev.dist[si][static_cast<std::size_t>(old_node)] -
                                                 f.dist[si][static_cast<std::size_t>(new_node)]));
                    }
                }
            }
            if (diff < tol / 2) {
                f.err = std::min(tol, 2 * diff);
                f.exact_geometry = std::make_shared<std::optional<DoubledPolygonGeometry>>(
                    detect_doubled_polygon(s));
                return f;
            }
        }
        if (level == max_refinements)
            throw ConvergenceError("distance field did not converge within refinement budget");
        prev = std::move(f);
    }
}

} // namespace

DistanceField build_field(const ConeSurface& s, std::vector<int> sources, double tol,
                          int max_refinements) {
    return build_field_impl(s, std::move(sources), tol, max_refinements, true);
}

DistanceField build_field_serial(const ConeSurface& s, std::vector<int> sources, double tol,
                                 int max_refinements) {
    return build_field_impl(s, std::move(sources), tol, max_refinements, false);
}

std::array<std::pair<int, double>, 2> DistanceField::two_smallest(int node) const {
    std::array<std::pair<int, double>, 2> best{
        std::pair<int, double>{-1, std::numeric_limits<double>::infinity()},
        std::pair<int, double>{-1, std::numeric_limits<double>::infinity()}};
    for (int si = 0; si < source_count(); ++si) {
        const double d = dist[static_cast<std::size_t>(si)][static_cast<std::size_t>(node)];
        if (d < best[0].second) {
            best[1] = best[0];
            best[0] = {si, d};
        } else if (d < best[1].second) {
            best[1] = {si, d};
        }
    }
    return best;
}

double DistanceField::value(int node) const { return two_smallest(node)[0].second; }

double DistanceField::max_value() const {
    double m = 0;
    for (int n = 0; n < mesh->node_count; ++n) m = std::max(m, value(n));
    return m;
}

double DistanceField::eval(int si, const SurfacePoint& p) const {
    const auto& nodes = mesh->tri_nodes_cache[static_cast<std::size_t>(p.tri)];
    const auto& pos = mesh->tri_node_pos_cache[static_cast<std::size_t>(p.tri)];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const double d =
            dist[static_cast<std::size_t>(si)][static_cast<std::size_t>(nodes[k])] +
            geodesic_dist(pos[k], p.pos);
        best = std::min(best, d);
    }
    return best;
}

double DistanceField::eval_min(const SurfacePoint& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (int si = 0; si < source_count(); ++si) best = std::min(best, eval(si, p));
    return best;
}

void write_field_csv(const DistanceField& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "node";
    for (int si = 0; si < f.source_count(); ++si)
        out << ",d" << f.sources[static_cast<std::size_t>(si)];
    out << "\n";
    out.precision(17);
    for (int n = 0; n < f.mesh->node_count; ++n) {
        out << n;
        for (int si = 0; si < f.source_count(); ++si)
            out << "," << f.dist[static_cast<std::size_t>(si)][static_cast<std::size_t>(n)];
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// doubled polygons

namespace {

struct O3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};
    Vec3 apply(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    O3 operator*(const O3& o) const {
        O3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += m[3 * i + k] * o.m[3 * k + j];
                r.m[static_cast<std::size_t>(3 * i + j)] = s;
            }
        return r;
    }
    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }
};

O3 reflection_across(const Vec3& plane_normal) {
    const Vec3 n = normalized(plane_normal);
    O3 r;
    r.m = {1 - 2 * n.x * n.x, -2 * n.x * n.y,    -2 * n.x * n.z,
           -2 * n.x * n.y,    1 - 2 * n.y * n.y, -2 * n.y * n.z,
           -2 * n.x * n.z,    -2 * n.y * n.z,    1 - 2 * n.z * n.z};
    return r;
}

bool o3_close(const O3& a, const O3& b, double tol = 1e-9) {
    for (std::size_t i = 0; i < 9; ++i)
        if (std::abs(a.m[i] - b.m[i]) > tol) return false;
    return true;
}

std::vector<O3> generate_tiling_group(const std::vector<Vec3>& normals, std::size_t cap = 192) {
    std::vector<O3> group{O3{}};
    std::vector<O3> frontier{O3{}};
    while (!frontier.empty()) {
        std::vector<O3> next;
        for (const O3& g : frontier) {
            for (const Vec3& n : normals) {
                const O3 cand = reflection_across(n) * g;
                bool known = false;
                for (const O3& k : group)
                    if (o3_close(k, cand)) {
                        known = true;
                        break;
                    }
                if (!known) {
                    group.push_back(cand);
                    next.push_back(cand);
                    if (group.size() > cap) return {};
                }
            }
        }
        frontier = std::move(next);
    }
    return group;
}

struct ExactImpl {
    std::vector<O3> tiling;
    std::vector<Vec3> normals;
};

std::map<const void*, ExactImpl>& exact_registry() {
    static std::map<const void*, ExactImpl> r;
    return r;
}

const ExactImpl& impl_of(const DoubledPolygonGeometry& g) {
    auto& reg = exact_registry();
    auto it = reg.find(static_cast<const void*>(&g));
    if (it == reg.end()) {
        ExactImpl impl;
        for (const auto& [a, b] : g.boundary_arcs) {
            const Vec3 nrm = cross(a, b);
            if (norm(nrm) < 1e-14) continue;
            bool dup = false;
            for (const Vec3& k : impl.normals)
                if (norm(cross(k, normalized(nrm))) < 1e-10) dup = true;
            if (!dup) impl.normals.push_back(normalized(nrm));
        }
        impl.tiling = generate_tiling_group(impl.normals);
        it = reg.emplace(static_cast<const void*>(&g), std::move(impl)).first;
    }
    return it->second;
}

} // namespace

std::optional<DoubledPolygonGeometry> detect_doubled_polygon(const ConeSurface& s) {
    const int total = static_cast<int>(s.tris.size());
    if (total % 2 != 0 || total == 0) return std::nullopt;
    const int n = total / 2;
    for (int t = 0; t < n; ++t) {
        const auto& f = s.tris[static_cast<std::size_t>(t)];
        const auto& b = s.tris[static_cast<std::size_t>(t + n)];
        if (std::abs(f.a - b.c) > 1e-12 || std::abs(f.b - b.b) > 1e-12 ||
            std::abs(f.c - b.a) > 1e-12)
            return std::nullopt;
    }
    // gluing structure: internal front gluings stay in the front; boundary
    // sides pair front (t,e) with back (t+n, 2-e)
    for (int t = 0; t < n; ++t)
        for (int e = 0; e < 3; ++e) {
            const SideRef p = s.glue[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)];
            if (!p.valid()) return std::nullopt;
            if (p.tri >= n && !(p.tri == t + n && p.side == 2 - e)) return std::nullopt;
        }

    DoubledPolygonGeometry g;
    g.surface = &s;
    g.front_count = n;
    std::vector<std::array<Vec3, 3>> canon;
    canon.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) canon.push_back(develop_triangle(s.tris[static_cast<std::size_t>(t)]));
    g.front_dev.assign(static_cast<std::size_t>(n), {});
    std::vector<char> done(static_cast<std::size_t>(n), 0);
    g.front_dev[0] = canon[0];
    done[0] = 1;
    std::vector<int> stack{0};
    while (!stack.empty()) {
        const int t = stack.back();
        stack.pop_back();
        for (int e = 0; e < 3; ++e) {
            const SideRef p = s.glue[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)];
            if (!p.valid() || p.tri >= n || done[static_cast<std::size_t>(p.tri)]) continue;
            const Rotation r = frame_transfer(g.front_dev[static_cast<std::size_t>(t)], e,
                                              canon[static_cast<std::size_t>(p.tri)], p.side);
            // frame_transfer maps (canonical of p.tri) into t's frame placement
            for (int c = 0; c < 3; ++c)
                g.front_dev[static_cast<std::size_t>(p.tri)][static_cast<std::size_t>(c)] =
                    r.apply(canon[static_cast<std::size_t>(p.tri)][static_cast<std::size_t>(c)]);
            done[static_cast<std::size_t>(p.tri)] = 1;
            stack.push_back(p.tri);
        }
    }
    for (char d : done)
        if (!d) return std::nullopt;
    for (int t = 0; t < n; ++t)
        for (int e = 0; e < 3; ++e) {
            const SideRef p = s.glue[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)];
            if (p.valid() && p.tri >= n)
                g.boundary_arcs.push_back(
                    {g.front_dev[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)],
                     g.front_dev[static_cast<std::size_t>(t)][static_cast<std::size_t>((e + 1) % 3)]});
        }
    for (const auto& mk : s.marked) {
        bool found = false;
        for (auto [t, c] : s.corners_of_class(mk.vertex_class)) {
            if (t < n) {
                g.marked_pos.push_back(
                    g.front_dev[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)]);
                found = true;
                break;
            }
        }
        if (!found) return std::nullopt;
    }
    return g;
}

double DoubledPolygonGeometry::pair_distance(int i, int j, int max_reflections) const {
    const auto& impl = impl_of(*this);
    const Vec3& p = marked_pos[static_cast<std::size_t>(i)];
    const Vec3& q = marked_pos[static_cast<std::size_t>(j)];
    if (!impl.tiling.empty()) {
        double best = std::numeric_limits<double>::infinity();
        for (const O3& g : impl.tiling) best = std::min(best, geodesic_dist(p, g.apply(q)));
        return best;
    }
    return exact_double_distance(*this, p, false, q, false, max_reflections);
}

double DoubledPolygonGeometry::point_distance(int i, const Vec3& p, bool back,
                                              int max_reflections) const {
    const auto& impl = impl_of(*this);
    const Vec3& src = marked_pos[static_cast<std::size_t>(i)];
    if (!impl.tiling.empty()) {
        double best = std::numeric_limits<double>::infinity();
        for (const O3& g : impl.tiling) best = std::min(best, geodesic_dist(p, g.apply(src)));
        return best;
    }
    return exact_double_distance(*this, src, false, p, back, max_reflections);
}

double DoubledPolygonGeometry::shortest_loop(int i, int /*max_reflections*/) const {
    const auto& impl = impl_of(*this);
    double best = std::numeric_limits<double>::infinity();
    if (impl.tiling.empty()) return best;
    const Vec3& p = marked_pos[static_cast<std::size_t>(i)];
    for (const O3& g : impl.tiling) {
        const double d = geodesic_dist(p, g.apply(p));
        if (d > 1e-9) best = std::min(best, d);
    }
    return best;
}

bool DoubledPolygonGeometry::has_tiling_group() const { return !impl_of(*this).tiling.empty(); }

double exact_double_distance(const DoubledPolygonGeometry& g, const Vec3& p, bool p_back,
                             const Vec3& q, bool q_back, int max_reflections) {
    const auto& impl = impl_of(g);
    if (!impl.tiling.empty()) {
        double best = std::numeric_limits<double>::infinity();
        const bool parity_even = (p_back == q_back);
        for (const O3& gg : impl.tiling) {
            const bool even = gg.det() > 0;
            if (even != parity_even) continue;
            best = std::min(best, geodesic_dist(p, gg.apply(q)));
        }
        return best;
    }

    // bounded admissible search over reflection words with walk verification
    auto admissible = [&](const O3& word, const Vec3& target) -> bool {
        const double L = geodesic_dist(p, target);
        if (L < 1e-12) return o3_close(word, O3{}, 1e-7);
        O3 cur;
        double sparam = 1e-11;
        int guard = 0;
        while (guard++ < max_reflections + 4) {
            double best_t = std::numeric_limits<double>::infinity();
            Vec3 best_nrm;
            for (const auto& [a0, b0] : g.boundary_arcs) {
                const Vec3 a = cur.apply(a0), b = cur.apply(b0);
                const Vec3 nab = cross(a, b);
                Vec3 dir = cross(cross(p, target), nab);
                const double dn = norm(dir);
                if (dn < 1e-13) continue;
                dir = dir * (1.0 / dn);
                const double lab = geodesic_dist(a, b);
                for (const Vec3& cand : {dir, -dir}) {
                    const double ua = arc_param(a, b, cand);
                    if (ua < -1e-9 || ua > lab + 1e-9) continue;
                    const double tp = arc_param(p, target, cand);
                    if (tp <= sparam || tp >= L - 1e-11) continue;
                    if (tp < best_t) {
                        best_t = tp;
                        best_nrm = cross(a, b);
                    }
                }
            }
            if (!std::isfinite(best_t)) return o3_close(cur, word, 1e-7);
            cur = reflection_across(best_nrm) * cur;
            sparam = best_t + 1e-11;
        }
        return false;
    };

    double best = std::numeric_limits<double>::infinity();
    struct State {
        O3 g;
        int depth;
        bool odd;
    };
    std::vector<State> frontier{{O3{}, 0, false}};
    std::vector<O3> visited{O3{}};
    const int depth_cap = std::min(max_reflections, 7);
    while (!frontier.empty()) {
        std::vector<State> next;
        for (const State& st : frontier) {
            if (st.odd == (p_back != q_back)) {
                const Vec3 tgt = st.g.apply(q);
                const double L = geodesic_dist(p, tgt);
                if (L < best && admissible(st.g, tgt)) best = L;
            }
            if (st.depth >= depth_cap) continue;
            for (const Vec3& nrm0 : impl.normals) {
                const O3 cand = st.g * reflection_across(nrm0);
                bool known = false;
                for (const O3& k : visited)
                    if (o3_close(k, cand)) {
                        known = true;
                        break;
                    }
                if (known) continue;
                visited.push_back(cand);
                next.push_back({cand, st.depth + 1, !st.odd});
                if (visited.size() > 4096) throw BudgetExceeded("unfolding budget exceeded");
            }
        }
        frontier = std::move(next);
    }
    if (!std::isfinite(best)) throw BudgetExceeded("no admissible unfolding found");
    return best;
}

// ---------------------------------------------------------------------------
// evaluator

namespace {

// orthogonal map (possibly orientation-reversing) sending unit frame (u0,u1)
// to (v0,v1); flip selects the handedness of the third axis
std::array<double, 9> orthogonal_map(const Vec3& u0, const Vec3& u1, const Vec3& v0,
                                     const Vec3& v1, bool flip) {
    auto frame = [](const Vec3& a, const Vec3& b, double sign) {
        const Vec3 e1 = normalized(a);
        const Vec3 e2 = normalized(b - e1 * dot(e1, b));
        const Vec3 e3 = cross(e1, e2) * sign;
        return std::array<Vec3, 3>{e1, e2, e3};
    };
    const auto U = frame(u0, u1, 1.0);
    const auto V = frame(v0, v1, flip ? -1.0 : 1.0);
    // M = V * U^T
    std::array<double, 9> m{};
    const Vec3 ux{U[0].x, U[1].x, U[2].x}, uy{U[0].y, U[1].y, U[2].y}, uz{U[0].z, U[1].z, U[2].z};
    auto col = [&](const Vec3& w) { return Vec3{V[0].x * w.x + V[1].x * w.y + V[2].x * w.z,
                                                V[0].y * w.x + V[1].y * w.y + V[2].y * w.z,
                                                V[0].z * w.x + V[1].z * w.y + V[2].z * w.z}; };
    const Vec3 c0 = col(ux), c1 = col(uy), c2 = col(uz);
    m = {c0.x, c1.x, c2.x, c0.y, c1.y, c2.y, c0.z, c1.z, c2.z};
    return m;
}

Vec3 apply9(const std::array<double, 9>& m, const Vec3& v) {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
}

} // namespace

std::pair<Vec3, bool> DoubledPolygonGeometry::to_front_chart(const SurfacePoint& p) const {
    const int n = front_count;
    const int t = p.tri;
    const int ft = t < n ? t : t - n;
    const auto canon = develop_triangle(surface->tris[static_cast<std::size_t>(t)]);
    const auto& devf = front_dev[static_cast<std::size_t>(ft)];
    if (t < n) {
        const auto m = orthogonal_map(canon[0], canon[1], devf[0], devf[1], false);
        return {apply9(m, p.pos), false};
    }
    // back triangle corners (0,1,2) correspond to front corners (0,2,1) and
    // the geometry is mirrored: orientation-reversing chart map
    const auto m = orthogonal_map(canon[0], canon[1], devf[0], devf[2], true);
    return {apply9(m, p.pos), true};
}

double DistanceEvaluator::operator()(int si, const SurfacePoint& p, bool /*p_on_back_copy*/) const {
    if (exact && exact->has_tiling_group()) {
        const auto [pos, back] = exact->to_front_chart(p);
        const int mk = field->sources[static_cast<std::size_t>(si)];
        return exact->point_distance(mk, pos, back);
    }
    return field->eval(si, p);
}

DistanceEvaluator make_evaluator(const ConeSurface& s, const DistanceField& f) {
    DistanceEvaluator ev;
    ev.surface = &s;
    ev.field = &f;
    if (f.exact_geometry && f.exact_geometry->has_value()) ev.exact = &f.exact_geometry->value();
    return ev;
}

// ---------------------------------------------------------------------------
// paths and straightening

namespace {

struct SideInfo {
    int tri = -1, side = -1;
};

SideInfo side_of_point(const std::vector<std::array<Vec3, 3>>& dev, const SurfacePoint& p) {
    for (int e = 0; e < 3; ++e) {
        const Vec3& a = dev[static_cast<std::size_t>(p.tri)][static_cast<std::size_t>(e)];
        const Vec3& b = dev[static_cast<std::size_t>(p.tri)][static_cast<std::size_t>((e + 1) % 3)];
        const double lab = geodesic_dist(a, b);
        const double u = arc_param(a, b, p.pos);
        if (u < -1e-9 || u > lab + 1e-9) continue;
        // distance of p from the great circle through a,b
        const Vec3 nrm = normalized(cross(a, b));
        if (std::abs(dot(nrm, p.pos)) < 1e-9) return {p.tri, e};
    }
    return {};
}

// position of q (which lies on side (q_side) of its triangle) in tri's frame
std::optional<Vec3> pos_in_frame(const ConeSurface& s, const std::vector<std::array<Vec3, 3>>& dev,
                                 const SurfacePoint& q, const SideInfo& q_side, int tri) {
    if (q.tri == tri) return q.pos;
    if (q_side.tri < 0) return std::nullopt;
    const SideRef partner =
        s.glue[static_cast<std::size_t>(q_side.tri)][static_cast<std::size_t>(q_side.side)];
    if (partner.valid() && partner.tri == tri) {
        const Rotation r = frame_transfer(dev[static_cast<std::size_t>(tri)], partner.side,
                                          dev[static_cast<std::size_t>(q.tri)], q_side.side);
        return r.apply(q.pos);
    }
    return std::nullopt;
}

double measure_path(const ConeSurface& s, const std::vector<std::array<Vec3, 3>>& dev,
                    const std::vector<SurfacePoint>& pts) {
    double len = 0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        const SurfacePoint& a = pts[k];
        const SurfacePoint& b = pts[k + 1];
        if (a.tri == b.tri) {
            len += geodesic_dist(a.pos, b.pos);
            continue;
        }
        const SideInfo sb = side_of_point(dev, b);
        auto bpos = pos_in_frame(s, dev, b, sb, a.tri);
        if (bpos) {
            len += geodesic_dist(a.pos, *bpos);
            continue;
        }
        const SideInfo sa = side_of_point(dev, a);
        auto apos = pos_in_frame(s, dev, a, sa, b.tri);
        if (apos) {
            len += geodesic_dist(*apos, b.pos);
            continue;
        }
        len += geodesic_dist(a.pos, b.pos); // disconnected frames: raw fallback
    }
    return len;
}

} // namespace

double straighten_path(const ConeSurface& s, const RefinedMesh& mesh,
                       std::vector<SurfacePoint>& pts, bool /*closed_at_endpoints*/,
                       double bend_tol, int max_iter) {
    (void)bend_tol;
    const auto& dev = mesh.dev;
    if (pts.size() < 3) return measure_path(s, dev, pts);

    double prev_len = measure_path(s, dev, pts);
    for (int iter = 0; iter < max_iter; ++iter) {
        double moved = 0;
        for (std::size_t k = 1; k + 1 < pts.size(); ++k) {
            const SideInfo si = side_of_point(dev, pts[k]);
            if (si.tri < 0) continue; // vertex or interior point: pinned
            const SideRef partner =
                s.glue[static_cast<std::size_t>(si.tri)][static_cast<std::size_t>(si.side)];
            if (!partner.valid()) continue;
            const SideInfo sprev = side_of_point(dev, pts[k - 1]);
            const SideInfo snext = side_of_point(dev, pts[k + 1]);
            // express neighbors in the two frames adjacent to this side; pick
            // the frame pair that sees both
            for (int attempt = 0; attempt < 2; ++attempt) {
                const int base = attempt == 0 ? si.tri : partner.tri;
                const int base_side = attempt == 0 ? si.side : partner.side;
                auto pa = pos_in_frame(s, dev, pts[k - 1], sprev, base);
                auto pb = pos_in_frame(s, dev, pts[k + 1], snext, base);
                if (k == 1 && !pa && pts[k - 1].tri == base) pa = pts[k - 1].pos;
                if (k + 2 == pts.size() && !pb && pts[k + 1].tri == base) pb = pts[k + 1].pos;
                if (!pa || !pb) continue;
                const Vec3& ea = dev[static_cast<std::size_t>(base)][static_cast<std::size_t>(base_side)];
                const Vec3& eb =
                    dev[static_cast<std::size_t>(base)][static_cast<std::size_t>((base_side + 1) % 3)];
                const Vec3 n1 = cross(*pa, *pb);
                const Vec3 n2 = cross(ea, eb);
                Vec3 dir = cross(n1, n2);
                const double dn = norm(dir);
                if (dn < 1e-14) break;
                dir = dir * (1.0 / dn);
                const double lab = geodesic_dist(ea, eb);
                Vec3 best;
                bool found = false;
                for (const Vec3& cand : {dir, Vec3{-dir.x, -dir.y, -dir.z}}) {
                    const double u = arc_param(ea, eb, cand);
                    if (u >= -1e-12 && u <= lab + 1e-12) {
                        best = cand;
                        found = true;
                        break;
                    }
                }
                if (!found) {
                    const double da = geodesic_dist(*pa, ea) + geodesic_dist(ea, *pb);
                    const double db = geodesic_dist(*pa, eb) + geodesic_dist(eb, *pb);
                    best = (da < db) ? ea : eb;
                }
                const SurfacePoint cur = pts[k];
                const Vec3 cur_in_base =
                    (cur.tri == base)
                        ? cur.pos
                        : pos_in_frame(s, dev, cur, si, base).value_or(cur.pos);
                moved = std::max(moved, geodesic_dist(best, cur_in_base));
                pts[k] = SurfacePoint{base, best};
                break;
            }
        }
        const double len = measure_path(s, dev, pts);
        if (moved < 1e-13 || prev_len - len < 1e-15) return len;
        prev_len = len;
    }
    return measure_path(s, dev, pts);
}

namespace {

std::vector<SurfacePoint> nodes_to_points(const RefinedMesh& m, const std::vector<int>& nodes) {
    std::vector<SurfacePoint> pts;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const int node = nodes[k];
        std::vector<int> ts = m.tris_of_node(node);
        int tri = ts.front();
        if (k + 1 < nodes.size()) {
            const auto ts2 = m.tris_of_node(nodes[k + 1]);
            for (int t : ts)
                if (std::find(ts2.begin(), ts2.end(), t) != ts2.end()) {
                    tri = t;
                    break;
                }
        }
        pts.push_back({tri, m.node_pos_in(node, tri)});
    }
    return pts;
}

std::vector<int> parent_chain(const std::vector<int>& parent, int target) {
    std::vector<int> chain;
    for (int v = target; v >= 0; v = parent[static_cast<std::size_t>(v)]) chain.push_back(v);
    std::reverse(chain.begin(), chain.end());
    return chain;
}

} // namespace

std::vector<ConeArc> shortest_arcs_between_cones(const ConeSurface& s, const DistanceField& f) {
    std::vector<ConeArc> arcs;
    const RefinedMesh& m = *f.mesh;
    const int ns = f.source_count();
    for (int i = 0; i < ns; ++i) {
        const int cls_i =
            s.marked[static_cast<std::size_t>(f.sources[static_cast<std::size_t>(i)])].vertex_class;
        std::vector<int> parent;
        const auto d = dijkstra(m, {{m.class_to_node.at(cls_i), 0.0}}, &parent);
        for (int j = i + 1; j < ns; ++j) {
            const int cls_j =
                s.marked[static_cast<std::size_t>(f.sources[static_cast<std::size_t>(j)])].vertex_class;
            const int nj = m.class_to_node.at(cls_j);
            ConeArc arc;
            arc.i = f.sources[static_cast<std::size_t>(i)];
            arc.j = f.sources[static_cast<std::size_t>(j)];
            auto chain = parent_chain(parent, nj);
            auto pts = nodes_to_points(m, chain);
            arc.length = straighten_path(s, m, pts, false);
            if (!std::isfinite(arc.length)) arc.length = d[static_cast<std::size_t>(nj)];
            arc.path.pts = std::move(pts);
            arc.path.length = arc.length;
            arcs.push_back(std::move(arc));
        }
    }
    return arcs;
}

std::vector<ConeLoop> shortest_loops_at_cone(const ConeSurface& s, const DistanceField& f, int mi,
                                             double cap) {
    const RefinedMesh& m = *f.mesh;
    const int cls = s.marked[static_cast<std::size_t>(mi)].vertex_class;
    const auto wedges = s.corners_of_class(cls);

    std::vector<char> blocked(static_cast<std::size_t>(m.node_count), 0);
    for (const auto& mk : s.marked)
        blocked[static_cast<std::size_t>(m.class_to_node.at(mk.vertex_class))] = 1;

    struct WedgeField {
        std::vector<double> d;
        std::vector<int> parent;
    };
    std::vector<WedgeField> wf(wedges.size());
    for (std::size_t w = 0; w < wedges.size(); ++w) {
        auto [t, c] = wedges[w];
        std::vector<std::pair<int, double>> seeds;
        const Vec3 apex = m.dev[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)];
        for (int u : m.boundary_nodes_of_tri(t)) {
            if (blocked[static_cast<std::size_t>(u)]) continue;
            seeds.push_back({u, geodesic_dist(apex, m.node_pos_in(u, t))});
        }
        wf[w].d = dijkstra(m, seeds, &wf[w].parent, &blocked);
    }

    std::vector<ConeLoop> loops;
    for (std::size_t w1 = 0; w1 < wedges.size(); ++w1) {
        for (std::size_t w2 = w1 + 1; w2 < wedges.size(); ++w2) {
            int best_node = -1;
            double best = cap + 2 * f.err + 4 * f.h;
            for (int v = 0; v < m.node_count; ++v) {
                if (blocked[static_cast<std::size_t>(v)]) continue;
                const double cand =
                    wf[w1].d[static_cast<std::size_t>(v)] + wf[w2].d[static_cast<std::size_t>(v)];
                if (cand < best) {
                    best = cand;
                    best_node = v;
                }
            }
            if (best_node < 0) continue;
            auto c1 = parent_chain(wf[w1].parent, best_node);
            auto c2 = parent_chain(wf[w2].parent, best_node);
            std::vector<int> nodes;
            nodes.insert(nodes.end(), c1.begin(), c1.end());
            for (auto it = c2.rbegin(); it != c2.rend(); ++it)
                if (*it != best_node) nodes.push_back(*it);
            auto pts = nodes_to_points(m, nodes);
            auto [t1, cc1] = wedges[w1];
            auto [t2, cc2] = wedges[w2];
            pts.insert(pts.begin(),
                       {t1, m.dev[static_cast<std::size_t>(t1)][static_cast<std::size_t>(cc1)]});
            pts.push_back({t2, m.dev[static_cast<std::size_t>(t2)][static_cast<std::size_t>(cc2)]});
            const double len = straighten_path(s, m, pts, true);
            if (len > cap + 1e-9 || len < 4 * f.h) continue; // cap and out-and-back artifacts
            ConeLoop L;
            L.i = mi;
            L.length = len;
            L.path.pts = std::move(pts);
            L.path.length = len;
            loops.push_back(std::move(L));
        }
    }
    std::sort(loops.begin(), loops.end(),
              [](const auto& a, const auto& b) { return a.length < b.length; });
    std::vector<ConeLoop> out;
    for (auto& l : loops) {
        if (!out.empty() && std::abs(out.back().length - l.length) < 1e-6) continue;
        out.push_back(std::move(l));
    }
    return out;
}

double sampled_diameter(const ConeSurface& s, const DistanceField& f) {
    (void)s;
    const RefinedMesh& m = *f.mesh;
    double diam = 0;
    for (int si = 0; si < f.source_count(); ++si)
        for (int n = 0; n < m.node_count; ++n)
            diam = std::max(diam, f.dist[static_cast<std::size_t>(si)][static_cast<std::size_t>(n)]);
    const int probes = std::min(8, m.node_count);
    for (int k = 0; k < probes; ++k) {
        const int n0 = (m.node_count - 1) * k / std::max(1, probes - 1);
        const auto d = dijkstra(m, {{n0, 0.0}});
        for (double x : d)
            if (std::isfinite(x)) diam = std::max(diam, x);
    }
    return diam;
}

bool diameter_upper_check(const ConeSurface& s, const DistanceField& f, double slack) {
    const double n = static_cast<double>(s.marked.size());
    return sampled_diameter(s, f) <= kPi * (n + 1) + slack;
}

// ---------------------------------------------------------------------------
// radial shooting

namespace {

struct RaySegment {
    int tri;
    Vec3 start;
    Vec3 dir;
    double s0, s1;
};

std::vector<RaySegment> march_ray(const ConeSurface& s,
                                  const std::vector<std::array<Vec3, 3>>& dev, int tri,
                                  const Vec3& start, const Vec3& dir0, double r_max,
                                  int max_cross = 4096) {
    std::vector<RaySegment> chain;
    int t = tri;
    Vec3 p = start;
    Vec3 d = dir0;
    double acc = 0;
    for (int step = 0; step < max_cross && acc < r_max; ++step) {
        double exit_u = std::numeric_limits<double>::infinity();
        int exit_side = -1;
        Vec3 exit_p;
        const Vec3 nray = cross(p, d);
        for (int e = 0; e < 3; ++e) {
            const Vec3& a = dev[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)];
            const Vec3& b = dev[static_cast<std::size_t>(t)][static_cast<std::size_t>((e + 1) % 3)];
            const Vec3 nab = cross(a, b);
            Vec3 x = cross(nray, nab);
            const double xn = norm(x);
            if (xn < 1e-15) continue;
            x = x * (1.0 / xn);
            const double lab = geodesic_dist(a, b);
            const double side_tol = 1e-7 * lab + 1e-13;
            for (const Vec3& cand : {x, Vec3{-x.x, -x.y, -x.z}}) {
                const double cu = dot(p, cand);
                const double su = dot(d, cand);
                const double u = std::atan2(su, cu);
                if (u < 1e-13) continue;
                const double ua = arc_param(a, b, cand);
                if (ua < -side_tol || ua > lab + side_tol) continue;
                if (u < exit_u) {
                    exit_u = u;
                    exit_side = e;
                    exit_p = cand;
                }
            }
        }
        if (exit_side < 0) break;
        chain.push_back({t, p, d, acc, acc + exit_u});
        acc += exit_u;
        if (acc >= r_max) break;
        const SideRef partner = s.glue[static_cast<std::size_t>(t)][static_cast<std::size_t>(exit_side)];
        if (!partner.valid()) break;
        // forward tangent at the exit point
        Vec3 tgt = d * std::cos(exit_u) - p * std::sin(exit_u);
        const Rotation M = frame_transfer(dev[static_cast<std::size_t>(partner.tri)], partner.side,
                                          dev[static_cast<std::size_t>(t)], exit_side);
        p = normalized(M.apply(exit_p));
        tgt = M.apply(tgt);
        d = normalized(tgt - p * dot(p, tgt));
        t = partner.tri;
    }
    return chain;
}

std::optional<SurfacePoint> point_on_chain(const std::vector<RaySegment>& chain, double r) {
    if (chain.empty()) return std::nullopt;
    if (r > chain.back().s1 + 1e-12) return std::nullopt;
    for (const auto& seg : chain) {
        if (r <= seg.s1 + 1e-12) {
            const double u = std::max(0.0, r - seg.s0);
            SurfacePoint p;
            p.tri = seg.tri;
            p.pos = normalized(seg.start * std::cos(u) + seg.dir * std::sin(u));
            return p;
        }
    }
    return std::nullopt;
}

} // namespace

std::vector<std::pair<int, int>> cone_wedges_cyclic(const ConeSurface& s, int cls) {
    auto corners = s.corners_of_class(cls);
    std::vector<std::pair<int, int>> cyc;
    if (corners.empty()) return cyc;
    auto cur = corners.front();
    for (std::size_t k = 0; k < corners.size(); ++k) {
        cyc.push_back(cur);
        const SideRef nxt =
            s.glue[static_cast<std::size_t>(cur.first)][static_cast<std::size_t>((cur.second + 2) % 3)];
        if (!nxt.valid()) break;
        cur = {nxt.tri, nxt.side};
        if (cur == corners.front()) break;
    }
    return cyc;
}

std::optional<SurfacePoint> shoot_from_cone(const ConeSurface& s, int mi, double phi, double r,
                                            bool* on_back_copy) {
    const int cls = s.marked[static_cast<std::size_t>(mi)].vertex_class;
    const auto cyc = cone_wedges_cyclic(s, cls);
    if (cyc.empty()) return std::nullopt;
    std::vector<std::array<Vec3, 3>> dev;
    dev.reserve(s.tris.size());
    for (const auto& t : s.tris) dev.push_back(develop_triangle(t));

    double acc = 0;
    for (std::size_t wi = 0; wi < cyc.size(); ++wi) {
        auto [t, c] = cyc[wi];
        const double a = s.tris[static_cast<std::size_t>(t)].angle(c);
        const bool last = (wi + 1 == cyc.size());
        if (phi < acc + a || (last && phi <= acc + a + 1e-9)) {
            const double alpha = std::min(std::max(phi - acc, 1e-12), a - 1e-12);
            const Vec3 apex = dev[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)];
            const Vec3 toward = dev[static_cast<std::size_t>(t)][static_cast<std::size_t>((c + 1) % 3)];
            Vec3 d0 = normalized(cross(cross(apex, toward), apex));
            d0 = Rotation::about_axis(apex, alpha).apply(d0);
            d0 = normalized(d0 - apex * dot(apex, d0));
            auto chain = march_ray(s, dev, t, apex, d0, r * (1 + 1e-12) + 1e-15);
            auto p = point_on_chain(chain, r);
            if (p && on_back_copy) {
                *on_back_copy = false;
                const auto g = detect_doubled_polygon(s);
                if (g) *on_back_copy = (p->tri >= g->front_count);
            }
            return p;
        }
        acc += a;
    }
    return std::nullopt;
}

RadialProfile radial_profile(const ConeSurface& s, const DistanceField& f, int mi, int samples,
                             double r_max) {
    RadialProfile prof;
    prof.marked_index = mi;
    const int cls = s.marked[static_cast<std::size_t>(mi)].vertex_class;
    prof.cone_angle = s.corner_angle_sum(cls);
    prof.phi.resize(static_cast<std::size_t>(samples));
    prof.rho.assign(static_cast<std::size_t>(samples), 0.0);

    const DistanceEvaluator ev = make_evaluator(s, f);
    int slot = -1;
    for (int si = 0; si < f.source_count(); ++si)
        if (f.sources[static_cast<std::size_t>(si)] == mi) slot = si;
    if (slot < 0) throw DomainError("marked point is not a field source");

    std::vector<std::array<Vec3, 3>> dev;
    dev.reserve(s.tris.size());
    for (const auto& t : s.tris) dev.push_back(develop_triangle(t));
    const auto cyc = cone_wedges_cyclic(s, cls);
    const auto exact_geom = (f.exact_geometry && f.exact_geometry->has_value() &&
                             f.exact_geometry->value().has_tiling_group())
                                ? &f.exact_geometry->value()
                                : nullptr;
    const double band = exact_geom ? 0.0 : 2 * f.err + 1e-12;

    par::parallel_for(static_cast<std::size_t>(samples), [&](std::size_t k) {
        const double phi = (static_cast<double>(k) + 0.5) * prof.cone_angle / samples;
        prof.phi[k] = phi;
        // locate the wedge and march once to r_max
        double acc = 0;
        int wt = -1, wc = -1;
        double alpha = 0;
        for (std::size_t wi = 0; wi < cyc.size(); ++wi) {
            auto [t, c] = cyc[wi];
            const double a = s.tris[static_cast<std::size_t>(t)].angle(c);
            if (phi < acc + a || wi + 1 == cyc.size()) {
                wt = t;
                wc = c;
                alpha = std::min(std::max(phi - acc, 1e-12), a - 1e-12);
                break;
            }
            acc += a;
        }
        if (wt < 0) return;
        const Vec3 apex = dev[static_cast<std::size_t>(wt)][static_cast<std::size_t>(wc)];
        const Vec3 toward = dev[static_cast<std::size_t>(wt)][static_cast<std::size_t>((wc + 1) % 3)];
        Vec3 d0 = normalized(cross(cross(apex, toward), apex));
        d0 = Rotation::about_axis(apex, alpha).apply(d0);
        d0 = normalized(d0 - apex * dot(apex, d0));
        const auto chain = march_ray(s, dev, wt, apex, d0, r_max);
        if (chain.empty()) {
            prof.rho[k] = 0;
            return;
        }
        const double reach = chain.back().s1;

        auto cut_before = [&](double r) -> bool {
            auto p = point_on_chain(chain, r);
            if (!p) return true;
            const bool back = exact_geom ? (p->tri >= exact_geom->front_count) : false;
            for (int si = 0; si < f.source_count(); ++si) {
                const double d = ev(si, *p, back);
                if (si == slot) {
                    if (d < r * (1 - 1e-7) - band) return true;
                } else {
                    if (d < r - band) return true;
                }
            }
            return false;
        };

        const double top = std::min(reach, r_max);
        if (!cut_before(top)) {
            prof.rho[k] = top;
            return;
        }
        // geometric bracket down from top
        double lo = top;
        int guard = 0;
        while (cut_before(lo) && guard++ < 200) lo /= 2;
        if (guard >= 200) {
            prof.rho[k] = 0;
            return;
        }
        double hi = std::min(top, lo * 2);
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (cut_before(mid)) hi = mid;
            else lo = mid;
            if (hi - lo < 1e-7 * hi) break;
        }
        prof.rho[k] = lo;
    });
    return prof;
}

} // namespace spherecone
