#include "spherecone/surface.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "spherecone/errors.hpp"
#include "json.hpp"

namespace spherecone {

namespace {

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
    if (a == b) return;
    if (a < b) p[static_cast<std::size_t>(b)] = a; // smallest corner id represents
    else p[static_cast<std::size_t>(a)] = b;
}

} // namespace

void ConeSurface::invalidate_cache() const { uf_cache_.clear(); }

void ConeSurface::build_classes() const {
    const int n = corner_count();
    uf_cache_.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) uf_cache_[static_cast<std::size_t>(i)] = i;
    for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
        for (int e = 0; e < 3; ++e) {
            const SideRef p = glue[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)];
            if (!p.valid()) continue;
            // side (t,e): corners e -> e+1; partner runs reversed
            uf_union(uf_cache_, corner_id(t, e), corner_id(p.tri, (p.side + 1) % 3));
            uf_union(uf_cache_, corner_id(t, (e + 1) % 3), corner_id(p.tri, p.side));
        }
    }
    // path-compress fully so ids are stable
    for (int i = 0; i < n; ++i) uf_find(uf_cache_, i);
}

int ConeSurface::vertex_class(int t, int c) const {
    if (uf_cache_.empty()) build_classes();
    return uf_find(const_cast<std::vector<int>&>(uf_cache_), corner_id(t, c));
}

std::vector<int> ConeSurface::class_representatives() const {
    std::set<int> reps;
    for (int t = 0; t < static_cast<int>(tris.size()); ++t)
        for (int c = 0; c < 3; ++c) reps.insert(vertex_class(t, c));
    return {reps.begin(), reps.end()};
}

int ConeSurface::vertex_class_count() const {
    return static_cast<int>(class_representatives().size());
}

std::vector<std::pair<int, int>> ConeSurface::corners_of_class(int cls) const {
    std::vector<std::pair<int, int>> out;
    for (int t = 0; t < static_cast<int>(tris.size()); ++t)
        for (int c = 0; c < 3; ++c)
            if (vertex_class(t, c) == cls) out.push_back({t, c});
    return out;
}

double ConeSurface::corner_angle_sum(int cls) const {
    double sum = 0;
    for (auto [t, c] : corners_of_class(cls)) sum += tris[static_cast<std::size_t>(t)].angle(c);
    return sum;
}

bool ConeSurface::class_on_boundary(int cls) const {
    for (auto [t, c] : corners_of_class(cls)) {
        // corner c touches sides c and c+2
        for (int e : {c, (c + 2) % 3})
            if (!glue[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)].valid()) return true;
    }
    return false;
}

int ConeSurface::marked_index_of_class(int cls) const {
    for (int i = 0; i < static_cast<int>(marked.size()); ++i)
        if (marked[static_cast<std::size_t>(i)].vertex_class == cls) return i;
    return -1;
}

std::vector<double> ConeSurface::angle_vector() const {
    std::vector<double> theta;
    theta.reserve(marked.size());
    for (const auto& m : marked) theta.push_back(corner_angle_sum(m.vertex_class) / (2 * kPi));
    return theta;
}

double ConeSurface::theta_norm1() const {
    double s = 0;
    for (double t : angle_vector()) s += t;
    return s;
}

bool ConeSurface::has_boundary() const {
    for (const auto& g : glue)
        for (const auto& s : g)
            if (!s.valid()) return true;
    return false;
}

int ConeSurface::genus() const {
    if (has_boundary()) throw TopologyError("genus defined for closed surfaces only");
    const int F = static_cast<int>(tris.size());
    const int E = 3 * F / 2;
    const int V = vertex_class_count();
    const int chi = V - E + F;
    if ((2 - chi) % 2 != 0) throw TopologyError("non-integral genus");
    return (2 - chi) / 2;
}

int ConeSurface::euler_char_punctured() const {
    return 2 - 2 * genus() - static_cast<int>(marked.size());
}

double ConeSurface::chi_weighted() const { return euler_char_punctured() + theta_norm1(); }

double ConeSurface::area() const {
    double a = 0;
    for (const auto& t : tris) a += triangle_excess_from_sides(t.a, t.b, t.c);
    return a;
}

void ConeSurface::validate() const {
    if (tris.empty()) throw TopologyError("empty surface");
    if (glue.size() != tris.size()) throw TopologyError("gluing table size mismatch");
    // involution + length matching
    for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
        for (int e = 0; e < 3; ++e) {
            const SideRef p = glue[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)];
            if (!p.valid()) continue;
            if (p.tri < 0 || p.tri >= static_cast<int>(tris.size()) || p.side < 0 || p.side > 2)
                throw TopologyError("gluing out of range");
            const SideRef back = glue[static_cast<std::size_t>(p.tri)][static_cast<std::size_t>(p.side)];
            if (!(back == SideRef{t, e})) throw TopologyError("gluing not an involution");
            const double la = tris[static_cast<std::size_t>(t)].side(e);
            const double lb = tris[static_cast<std::size_t>(p.tri)].side(p.side);
            if (std::abs(la - lb) > tol.metric) throw TopologyError("glued side lengths differ");
        }
    }
    // connectivity over triangle adjacency
    {
        std::vector<int> seen(tris.size(), 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            const int t = stack.back();
            stack.pop_back();
            for (int e = 0; e < 3; ++e) {
                const SideRef p = glue[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)];
                if (p.valid() && !seen[static_cast<std::size_t>(p.tri)]) {
                    seen[static_cast<std::size_t>(p.tri)] = 1;
                    stack.push_back(p.tri);
                }
            }
        }
        for (int s : seen)
            if (!s) throw TopologyError("surface not connected");
    }
    // marked classes valid and distinct
    {
        std::set<int> cls;
        for (const auto& m : marked) {
            if (m.vertex_class < 0) throw TopologyError("invalid marked vertex");
            if (!cls.insert(m.vertex_class).second) throw TopologyError("marked vertex repeated");
        }
    }
    // unmarked interior vertices are smooth
    for (int cls : class_representatives()) {
        if (marked_index_of_class(cls) >= 0) continue;
        if (class_on_boundary(cls)) continue;
        const double sum = corner_angle_sum(cls);
        if (std::abs(sum - 2 * kPi) > tol.angle_sum)
            throw TopologyError("unmarked vertex with cone angle " + std::to_string(sum));
    }
    // Gauss-Bonnet on closed surfaces
    if (!has_boundary()) {
        const double lhs = area();
        const double rhs = 2 * kPi * chi_weighted();
        if (std::abs(lhs - rhs) > tol.area)
            throw TopologyError("Gauss-Bonnet violated: area " + std::to_string(lhs) +
                                " vs 2*pi*chi " + std::to_string(rhs));
    }
}

std::string ConeSurface::to_json() const {
    nlohmann::json j;
    j["format"] = "spherecone-surface";
    j["version"] = 1;
    auto& jt = j["triangles"] = nlohmann::json::array();
    for (const auto& t : tris) jt.push_back({t.a, t.b, t.c});
    auto& jg = j["gluings"] = nlohmann::json::array();
    for (int t = 0; t < static_cast<int>(tris.size()); ++t)
        for (int e = 0; e < 3; ++e) {
            const SideRef p = glue[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)];
            if (p.valid() && (p.tri > t || (p.tri == t && p.side > e)))
                jg.push_back({t, e, p.tri, p.side});
        }
    auto& jm = j["marked"] = nlohmann::json::array();
    for (const auto& m : marked) {
        // serialize via a representative corner
        auto corners = corners_of_class(m.vertex_class);
        jm.push_back({{"triangle", corners.front().first},
                      {"corner", corners.front().second},
                      {"label", m.label}});
    }
    return j.dump(2);
}

ConeSurface ConeSurface::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.value("format", "") != "spherecone-surface")
        throw DomainError("not a spherecone surface file");
    ConeSurface s;
    for (const auto& t : j["triangles"])
        s.tris.emplace_back(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
    s.glue.assign(s.tris.size(), {SideRef{}, SideRef{}, SideRef{}});
    for (const auto& g : j["gluings"]) {
        const int t = g[0], e = g[1], t2 = g[2], e2 = g[3];
        s.glue[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)] = {t2, e2};
        s.glue[static_cast<std::size_t>(t2)][static_cast<std::size_t>(e2)] = {t, e};
    }
    for (const auto& m : j["marked"])
        s.marked.push_back({s.vertex_class(m["triangle"].get<int>(), m["corner"].get<int>()),
                            m["label"].get<std::string>()});
    return s;
}

// ---------------------------------------------------------------------------
// constructors

ConeSurface double_polygon(const PolygonDisk& disk,
                           const std::vector<std::pair<std::pair<int, int>, std::string>>& marked) {
    const int n = static_cast<int>(disk.tris.size());
    if (n == 0) throw TopologyError("empty polygon");
    ConeSurface s;
    s.tris.reserve(static_cast<std::size_t>(2 * n));
    // front copies 0..n-1, back copies n..2n-1 (mirror: corners 1,2 swapped)
    for (const auto& t : disk.tris) s.tris.push_back(t);
    for (const auto& t : disk.tris) s.tris.emplace_back(t.c, t.b, t.a);
    s.glue.assign(s.tris.size(), {SideRef{}, SideRef{}, SideRef{}});

    auto set_glue = [&](SideRef a, SideRef b) {
        s.glue[static_cast<std::size_t>(a.tri)][static_cast<std::size_t>(a.side)] = b;
        s.glue[static_cast<std::size_t>(b.tri)][static_cast<std::size_t>(b.side)] = a;
    };
    auto mirror = [&](SideRef f) { return SideRef{f.tri + n, 2 - f.side}; };

    std::set<std::pair<int, int>> internal;
    for (const auto& [a, b] : disk.internal_glue) {
        set_glue(a, b);
        set_glue(mirror(a), mirror(b));
        internal.insert({a.tri, a.side});
        internal.insert({b.tri, b.side});
    }
    // boundary sides glue front to back
    for (int t = 0; t < n; ++t)
        for (int e = 0; e < 3; ++e)
            if (!internal.count({t, e})) set_glue({t, e}, mirror({t, e}));

    const bool simply_connected =
        (static_cast<int>(disk.internal_glue.size()) == n - 1);
    if (!simply_connected) throw TopologyError("polygon must be a simply-connected disk");

    for (const auto& [corner, label] : marked)
        s.marked.push_back({s.vertex_class(corner.first, corner.second), label});
    s.validate();
    return s;
}

ConeSurface double_triangle(const TriangleGeom& t) {
    PolygonDisk d;
    d.tris = {t};
    return double_polygon(d, {{{0, 0}, "x1"}, {{0, 1}, "x2"}, {{0, 2}, "x3"}});
}

ConeSurface double_triangle_angles(double alpha, double beta, double gamma) {
    return double_triangle(TriangleGeom::from_angles(alpha, beta, gamma));
}

namespace {

// Intrinsic distance inside a lune of angle <= pi between points given in
// (colatitude, longitude); valid because such a lune embeds in S^2.
double lune_dist(double rho1, double phi1, double rho2, double phi2) {
    const double c = std::cos(rho1) * std::cos(rho2) +
                     std::sin(rho1) * std::sin(rho2) * std::cos(phi1 - phi2);
    return std::acos(std::max(-1.0, std::min(1.0, c)));
}

} // namespace

ConeSurface bigon_glue(int genus, double theta) {
    if (genus < 1) throw DomainError("genus must be >= 1");
    if (!(theta > 0)) throw DomainError("theta must be positive");
    const int g = genus;
    const int strips = std::max(1, static_cast<int>(std::ceil(theta)));
    const double phi_step = kPi * theta / strips; // <= pi
    const int rows = 2 * g;                       // segments per meridian
    const double rho_step = kPi / rows;

    // Vertices: meridian j at longitude j*phi_step carries rows+1 points;
    // strip j has a fan center between meridians j and j+1.
    ConeSurface s;
    // Fan triangles per strip: boundary cycle of the strip has 2*rows edges.
    // Strip-local boundary vertex k (k = 0..2*rows-1): going down the left
    // meridian then up the right meridian.
    auto bpoint = [&](int strip, int k) -> std::pair<double, double> {
        if (k <= rows) return {k * rho_step, strip * phi_step};          // left meridian
        return {(2 * rows - k) * rho_step, (strip + 1) * phi_step};      // right meridian
    };
    const int per = 2 * rows; // triangles per strip
    auto tri_index = [&](int strip, int k) { return strip * per + k; };

    for (int strip = 0; strip < strips; ++strip) {
        const double cphi = (strip + 0.5) * phi_step;
        for (int k = 0; k < per; ++k) {
            auto [r1, p1] = bpoint(strip, k);
            auto [r2, p2] = bpoint(strip, (k + 1) % per);
            const double dc1 = lune_dist(kPi / 2, cphi, r1, p1);
            const double dc2 = lune_dist(kPi / 2, cphi, r2, p2);
            const double d12 = lune_dist(r1, p1, r2, p2);
            s.tris.emplace_back(dc1, d12, dc2); // corners: (center, v_k, v_k+1)
        }
    }
    s.glue.assign(s.tris.size(), {SideRef{}, SideRef{}, SideRef{}});
    auto set_glue = [&](SideRef a, SideRef b) {
        s.glue[static_cast<std::size_t>(a.tri)][static_cast<std::size_t>(a.side)] = b;
        s.glue[static_cast<std::size_t>(b.tri)][static_cast<std::size_t>(b.side)] = a;
    };
    // fan closure inside each strip: side 2 of triangle k = center->v_{k+1}
    // matches side 0 of triangle k+1
    for (int strip = 0; strip < strips; ++strip)
        for (int k = 0; k < per; ++k)
            set_glue({tri_index(strip, k), 2}, {tri_index(strip, (k + 1) % per), 0});
    // strip-to-strip meridian edges: strip's right meridian edges are triangles
    // k = rows..2*rows-1 (side 1), running down in k; strip+1's left meridian
    // edges are k = 0..rows-1 (side 1), running up
    for (int strip = 0; strip + 1 < strips; ++strip)
        for (int i = 0; i < rows; ++i)
            set_glue({tri_index(strip, rows + i), 1}, {tri_index(strip + 1, rows - 1 - i), 1});

    // Outer meridians: left of strip 0 (triangles 0..rows-1, side 1, going down)
    // and right of last strip (triangles rows..2rows-1 of it, side 1, going up).
    // Boundary edge sequence around the bigon: e_0..e_{2rows-1} = down the left,
    // then e_{2rows}..e_{4rows-1} = up the right; total 4g edges with labels
    // a1 b1 a1' b1' a2 b2 a2' b2' ... and gluing a_k ~ a_k'^{-1}, b_k ~ b_k'^{-1}.
    std::vector<SideRef> boundary;
    for (int i = 0; i < rows; ++i) boundary.push_back({tri_index(0, i), 1});
    const int last = strips - 1;
    for (int i = 0; i < rows; ++i) boundary.push_back({tri_index(last, rows + i), 1});
    // cyclic labels in quadruples
    for (int q = 0; q < g; ++q) {
        set_glue(boundary[static_cast<std::size_t>(4 * q)], boundary[static_cast<std::size_t>(4 * q + 2)]);
        set_glue(boundary[static_cast<std::size_t>(4 * q + 1)], boundary[static_cast<std::size_t>(4 * q + 3)]);
    }

    // the single cone point: any outer-boundary vertex; use triangle 0 corner 1
    s.marked.push_back({s.vertex_class(0, 1), "x1"});
    s.validate();
    return s;
}

ConeSurface lune_double(double theta) {
    if (!(theta > 0) || !(theta < 2)) throw DomainError("lune_double expects theta in (0, 2)");
    // Lune with corners N, S of angle pi*theta, fan-triangulated from its
    // center over boundary N, amid, S, bmid; then doubled.
    const double phi = kPi * theta;
    auto pt = [&](double rho, double lon) { return std::pair<double, double>{rho, lon}; };
    const std::array<std::pair<double, double>, 4> b = {pt(0, 0), pt(kPi / 2, 0), pt(kPi, 0),
                                                        pt(kPi / 2, phi)};
    const auto c = pt(kPi / 2, phi / 2);
    PolygonDisk d;
    for (int k = 0; k < 4; ++k) {
        const auto& p1 = b[static_cast<std::size_t>(k)];
        const auto& p2 = b[static_cast<std::size_t>((k + 1) % 4)];
        d.tris.emplace_back(lune_dist(c.first, c.second, p1.first, p1.second),
                            lune_dist(p1.first, p1.second, p2.first, p2.second),
                            lune_dist(c.first, c.second, p2.first, p2.second));
    }
    for (int k = 0; k < 4; ++k) d.internal_glue.push_back({{k, 2}, {(k + 1) % 4, 0}});
    // fan closure has 4 internal gluings on 4 triangles -> not a tree; drop the
    // last one? No: the fan around an interior vertex needs all 4; the disk
    // condition (#internal = n-1) fails for fans with an interior vertex, so
    // glue manually instead of via double_polygon's simple check.
    ConeSurface s;
    const int n = 4;
    for (const auto& t : d.tris) s.tris.push_back(t);
    for (const auto& t : d.tris) s.tris.emplace_back(t.c, t.b, t.a);
    s.glue.assign(s.tris.size(), {SideRef{}, SideRef{}, SideRef{}});
    auto set_glue = [&](SideRef a, SideRef bb) {
        s.glue[static_cast<std::size_t>(a.tri)][static_cast<std::size_t>(a.side)] = bb;
        s.glue[static_cast<std::size_t>(bb.tri)][static_cast<std::size_t>(bb.side)] = a;
    };
    auto mirror = [&](SideRef f) { return SideRef{f.tri + n, 2 - f.side}; };
    for (const auto& [x, y] : d.internal_glue) {
        set_glue(x, y);
        set_glue(mirror(x), mirror(y));
    }
    for (int t = 0; t < n; ++t) set_glue({t, 1}, mirror({t, 1}));
    s.marked.push_back({s.vertex_class(0, 1), "x1"}); // N
    s.marked.push_back({s.vertex_class(2, 1), "x2"}); // S
    s.validate();
    return s;
}

double StandardDisk::annulus_modulus(double r1, double r2) const {
    if (!(0 < r1) || !(r1 < r2) || !(r2 < kPi)) throw DomainError("need 0 < r1 < r2 < pi");
    // integral of dt / (2*pi*theta*sin t) = log(tan(t/2)) / (2*pi*theta)
    return (std::log(std::tan(r2 / 2)) - std::log(std::tan(r1 / 2))) / (2 * kPi * theta);
}

ConeSurface standard_disk_surface(double theta, double r, int wedge_count) {
    if (!(r > 0) || !(r < kPi)) throw DomainError("disk radius must lie in (0, pi)");
    if (!(theta > 0)) throw DomainError("cone angle must be positive");
    int m = wedge_count;
    while (2 * kPi * theta / m >= kPi / 2) m *= 2; // embeddable wedges
    const double beta = 2 * kPi * theta / m;
    const double base = 2 * std::asin(std::min(1.0, std::sin(beta / 2) * std::sin(r)));
    ConeSurface s;
    for (int k = 0; k < m; ++k) s.tris.emplace_back(r, base, r);
    s.glue.assign(s.tris.size(), {SideRef{}, SideRef{}, SideRef{}});
    for (int k = 0; k < m; ++k) {
        s.glue[static_cast<std::size_t>(k)][2] = {(k + 1) % m, 0};
        s.glue[static_cast<std::size_t>((k + 1) % m)][0] = {k, 2};
    }
    s.marked.push_back({s.vertex_class(0, 0), "x1"});
    s.validate();
    return s;
}

namespace {

// chord from the corner opposite a side to a point on that side at arclength t
double split_chord(const TriangleGeom& tri, int side, double t) {
    // side runs corner side -> side+1; opposite corner is side+2
    const double adj = tri.side((side + 2) % 3); // corner_side -> corner_side+2 side? careful:
    // sides from corner A = side: side(A->B) = tri.side(side); side (C->A) = tri.side(side+2)
    const double CA = tri.side((side + 2) % 3);
    const double angA = tri.angle(side);
    const double c = std::cos(CA) * std::cos(t) + std::sin(CA) * std::sin(t) * std::cos(angA);
    (void)adj;
    return std::acos(std::max(-1.0, std::min(1.0, c)));
}

ConeSurface split_edge_impl(const ConeSurface& s, SideRef side, double t, bool mark,
                            const std::string& label) {
    const int tr = side.tri, e = side.side;
    if (tr < 0 || tr >= static_cast<int>(s.tris.size()) || e < 0 || e > 2)
        throw DomainError("bad side reference");
    const double len = s.tris[static_cast<std::size_t>(tr)].side(e);
    if (!(t > 0) || !(t < len)) throw DomainError("split point not interior to the edge");
    const SideRef partner = s.glue[static_cast<std::size_t>(tr)][static_cast<std::size_t>(e)];

    // remember marked vertices via representative corners (indices shift)
    std::vector<std::pair<std::pair<int, int>, std::string>> old_marks;
    for (const auto& m : s.marked) {
        auto corners = s.corners_of_class(m.vertex_class);
        old_marks.push_back({corners.front(), m.label});
    }

    ConeSurface out;
    out.tol = s.tol;
    out.tris = s.tris;
    out.glue = s.glue;

    auto split_one = [&](int T, int E, double tloc) -> std::array<SideRef, 2> {
        // triangle corners A=E, B=E+1, C=E+2; P on AB at arclength tloc from A.
        const TriangleGeom tri = out.tris[static_cast<std::size_t>(T)];
        const double q = split_chord(tri, E, tloc);
        const double AB = tri.side(E), BC = tri.side((E + 1) % 3), CA = tri.side((E + 2) % 3);
        // read old partners before rewriting any slot
        const SideRef g1 = out.glue[static_cast<std::size_t>(T)][static_cast<std::size_t>((E + 1) % 3)];
        const SideRef g2 = out.glue[static_cast<std::size_t>(T)][static_cast<std::size_t>((E + 2) % 3)];
        // T1 = (A, P, C): sides (A->P, P->C, C->A); T2 = (P, B, C): (P->B, B->C, C->P)
        const TriangleGeom t1(tloc, q, CA);
        const TriangleGeom t2(AB - tloc, BC, q);
        const int i2 = static_cast<int>(out.tris.size());
        out.tris[static_cast<std::size_t>(T)] = t1;
        out.tris.push_back(t2);
        out.glue.push_back({SideRef{}, SideRef{}, SideRef{}});
        out.glue[static_cast<std::size_t>(T)] = {SideRef{}, SideRef{i2, 2}, g2};
        out.glue[static_cast<std::size_t>(i2)] = {SideRef{}, g1, SideRef{T, 1}};
        if (g1.valid()) out.glue[static_cast<std::size_t>(g1.tri)][static_cast<std::size_t>(g1.side)] = {i2, 1};
        if (g2.valid()) out.glue[static_cast<std::size_t>(g2.tri)][static_cast<std::size_t>(g2.side)] = {T, 2};
        return {SideRef{T, 0}, SideRef{i2, 0}}; // halves: A->P and P->B
    };

    // rebuild glue arrays carefully: because split_one rewrites slots of T,
    // first detach T's gluings we need to preserve, which split_one re-hangs.
    auto halves1 = split_one(tr, e, t);
    std::array<SideRef, 2> halves2{SideRef{}, SideRef{}};
    if (partner.valid()) {
        halves2 = split_one(partner.tri, partner.side, len - t);
        // glue: (A->P) with partner (P2->B2), (P->B) with partner (A2->P2)
        out.glue[static_cast<std::size_t>(halves1[0].tri)][0] = halves2[1];
        out.glue[static_cast<std::size_t>(halves2[1].tri)][0] = halves1[0];
        out.glue[static_cast<std::size_t>(halves1[1].tri)][0] = halves2[0];
        out.glue[static_cast<std::size_t>(halves2[0].tri)][0] = halves1[1];
    }
    out.invalidate_cache();

    // restore marks: corner (T, c) moved if T was split; map via geometry of
    // the split: corner A stays (T,0); B moved to (new,1); C stays (T,2)->(T,2)
    auto map_corner = [&](std::pair<int, int> tc, int T, int E, int newT) -> std::pair<int, int> {
        if (tc.first != T) return tc;
        const int c = tc.second;
        if (c == E) return {T, 0};                 // A
        if (c == (E + 1) % 3) return {newT, 1};    // B
        return {T, 2};                             // C
    };
    const int new1 = partner.valid() ? static_cast<int>(out.tris.size()) - 2
                                     : static_cast<int>(out.tris.size()) - 1;
    const int new2 = static_cast<int>(out.tris.size()) - 1;
    for (auto& [tc, lbl] : old_marks) {
        auto m = map_corner(tc, tr, e, new1);
        if (partner.valid()) m = map_corner(m, partner.tri, partner.side, new2);
        out.marked.push_back({out.vertex_class(m.first, m.second), lbl});
    }
    if (mark) out.marked.push_back({out.vertex_class(tr, 1), label}); // P corner of T1
    out.validate();
    return out;
}

} // namespace

ConeSurface mark_smooth_point_on_edge(const ConeSurface& s, SideRef side, double t,
                                      const std::string& label) {
    return split_edge_impl(s, side, t, true, label);
}

ConeSurface subdivide_edge(const ConeSurface& s, SideRef side, double t) {
    return split_edge_impl(s, side, t, false, "");
}

} // namespace spherecone
