#include "spherecone/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace spherecone {

namespace {

double clamp1(double v) { return std::max(-1.0, std::min(1.0, v)); }

} // namespace

double geodesic_dist(const Vec3& u, const Vec3& v) {
    const double c = norm(u - v); // chord
    if (c >= 2.0) return kPi;
    const double d = 2.0 * std::asin(clamp1(0.5 * c));
    // chord formula is accurate near 0; near pi use the antipodal chord
    if (d > kPi * 0.5) {
        const double c2 = norm(u + v);
        return kPi - 2.0 * std::asin(clamp1(0.5 * c2));
    }
    return d;
}

Vec3 slerp(const Vec3& a, const Vec3& b, double t) {
    const double d = geodesic_dist(a, b);
    if (d < 1e-300) return a;
    // tangent direction at a toward b
    Vec3 w = b - a * dot(a, b);
    const double wn = norm(w);
    if (wn < 1e-300) return a;
    w = w * (1.0 / wn);
    return normalized(a * std::cos(t) + w * std::sin(t));
}

Rotation Rotation::about_axis(const Vec3& axis_in, double angle) {
    const Vec3 u = normalized(axis_in);
    const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
    Rotation r;
    r.m = {t * u.x * u.x + c,      t * u.x * u.y - s * u.z, t * u.x * u.z + s * u.y,
           t * u.x * u.y + s * u.z, t * u.y * u.y + c,      t * u.y * u.z - s * u.x,
           t * u.x * u.z - s * u.y, t * u.y * u.z + s * u.x, t * u.z * u.z + c};
    return r;
}

Vec3 Rotation::apply(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
}

Rotation Rotation::operator*(const Rotation& o) const {
    Rotation r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0;
            for (int k = 0; k < 3; ++k) s += m[3 * i + k] * o.m[3 * k + j];
            r.m[3 * i + j] = s;
        }
    return r;
}

Rotation Rotation::transpose() const {
    Rotation r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r.m[3 * i + j] = m[3 * j + i];
    return r;
}

bool Rotation::is_orthogonal(double tol) const {
    const Rotation p = (*this) * transpose();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double want = i == j ? 1.0 : 0.0;
            if (std::abs(p.m[3 * i + j] - want) > tol) return false;
        }
    // det
    const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
                       m[2] * (m[3] * m[7] - m[4] * m[6]);
    return std::abs(det - 1.0) <= tol * 10;
}

Rotation Rotation::frame_map(const Vec3& u1, const Vec3& u2, const Vec3& v1, const Vec3& v2) {
    auto frame = [](const Vec3& a, const Vec3& b) {
        const Vec3 e1 = normalized(a);
        Vec3 w = b - e1 * dot(e1, b);
        const Vec3 e2 = normalized(w);
        const Vec3 e3 = cross(e1, e2);
        Rotation f; // columns e1 e2 e3
        f.m = {e1.x, e2.x, e3.x, e1.y, e2.y, e3.y, e1.z, e2.z, e3.z};
        return f;
    };
    return frame(v1, v2) * frame(u1, u2).transpose();
}

double rotation_number(const Rotation& q) {
    const double tr = std::max(-1.0, std::min(3.0, q.trace()));
    return std::acos(clamp1((tr - 1.0) / 2.0)) / (2.0 * kPi);
}

std::optional<Vec3> rotation_axis(const Rotation& q, double tol) {
    // antisymmetric part gives axis*sin(angle); near half-turns use M + I
    const Vec3 w{q.m[7] - q.m[5], q.m[2] - q.m[6], q.m[3] - q.m[1]};
    const double wn = norm(w);
    const double rot = rotation_number(q);
    if (rot * 2.0 * kPi < tol) return std::nullopt;
    Vec3 axis;
    if (wn > 1e-6) {
        axis = w * (1.0 / wn);
    } else {
        // angle near pi: columns of M + I are parallel to the axis
        double best = -1;
        for (int j = 0; j < 3; ++j) {
            Vec3 col{q.m[j] + (j == 0), q.m[3 + j] + (j == 1), q.m[6 + j] + (j == 2)};
            if (norm(col) > best) {
                best = norm(col);
                axis = col;
            }
        }
        axis = normalized(axis);
    }
    // sign-normalize: first coordinate with |.| > tol positive
    for (double comp : {axis.x, axis.y, axis.z}) {
        if (std::abs(comp) > 1e-12) {
            if (comp < 0) axis = -axis;
            break;
        }
    }
    return axis;
}

TriangleGeom::TriangleGeom(double a_, double b_, double c_) : a(a_), b(b_), c(c_) {
    for (double s : {a, b, c})
        if (!(s > 0.0) || !(s < kPi)) throw DomainError("triangle side must lie in (0, pi)");
    if (a + b + c >= 2 * kPi) throw DomainError("triangle perimeter must be < 2*pi");
    if (a >= b + c || b >= a + c || c >= a + b)
        throw DomainError("triangle inequality violated");
}

double TriangleGeom::angle(int corner) const {
    // opposite side of corner k is side k+1
    const double opp = side((corner + 1) % 3);
    const double s1 = side(corner);
    const double s2 = side((corner + 2) % 3);
    // half-angle formula: tan^2(A/2) = sin(s-s1) sin(s-s2) / (sin s sin(s-opp)),
    // differences formed directly from the sides
    const double s = 0.5 * (a + b + c);
    const double d_opp = 0.5 * (s1 + s2 - opp);
    const double d1 = 0.5 * (opp + s2 - s1);
    const double d2 = 0.5 * (opp + s1 - s2);
    const double num = std::sin(d1) * std::sin(d2);
    const double den = std::sin(s) * std::sin(d_opp);
    if (den <= 0 || num < 0) {
        // fall back to the plain law of cosines with clamping
        const double ca = clamp1((std::cos(opp) - std::cos(s1) * std::cos(s2)) /
                                 (std::sin(s1) * std::sin(s2)));
        return std::acos(ca);
    }
    return 2.0 * std::atan(std::sqrt(num / den));
}

std::array<double, 3> TriangleGeom::angles() const { return {angle(0), angle(1), angle(2)}; }

TriangleGeom TriangleGeom::from_angles(double alpha, double beta, double gamma) {
    if (alpha + beta + gamma <= kPi) throw DomainError("angle sum must exceed pi");
    for (double x : {alpha, beta, gamma})
        if (!(x > 0.0) || !(x < kPi)) throw DomainError("angles must lie in (0, pi)");
    auto side_from = [&](double A, double B, double C) {
        const double ca = clamp1((std::cos(A) + std::cos(B) * std::cos(C)) /
                                 (std::sin(B) * std::sin(C)));
        return std::acos(ca);
    };
    // corner k opposite side k+1: angles (alpha,beta,gamma) at corners 0,1,2
    const double s1 = side_from(alpha, beta, gamma); // opposite corner 0
    const double s2 = side_from(beta, gamma, alpha); // opposite corner 1
    const double s0 = side_from(gamma, alpha, beta); // opposite corner 2
    return TriangleGeom(s0, s1, s2);
}

double triangle_excess_from_sides(double a, double b, double c) {
    const double s = 0.5 * (a + b + c);
    const double ta = std::tan(0.5 * (s - a));
    const double tb = std::tan(0.5 * (s - b));
    const double tc = std::tan(0.5 * (s - c));
    const double ts = std::tan(0.5 * s);
    const double prod = ts * ta * tb * tc;
    if (prod <= 0) return 0.0;
    return 4.0 * std::atan(std::sqrt(prod));
}

double triangle_area(const TriangleGeom& t, double degenerate_tol) {
    const double e = triangle_excess_from_sides(t.a, t.b, t.c);
    if (e <= degenerate_tol) throw DegenerateTriangle("triangle excess below tolerance");
    return e;
}

double solve_hypotenuse(double leg, double half_angle) {
    if (!(half_angle >= 0.0) || half_angle >= 0.5) throw DomainError("half_angle must lie in [0, 1/2)");
    if (!(leg > 0.0) || !(leg < kPi / 2)) throw DomainError("leg must lie in (0, pi/2)");
    return std::atan2(std::tan(leg), std::cos(kPi * half_angle));
}

double SphereLoop::length() const {
    double len = 0;
    const std::size_t n = verts.size();
    for (std::size_t i = 0; i < n; ++i) len += geodesic_dist(verts[i], verts[(i + 1) % n]);
    return len;
}

void SphereLoop::validate(double arc_cap) const {
    if (verts.size() < 2) throw DomainError("loop needs at least two vertices");
    const std::size_t n = verts.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double d = geodesic_dist(verts[i], verts[(i + 1) % n]);
        if (d >= arc_cap) throw ArcTooLong("loop arc not shorter than pi");
        if (d >= kPi - 1e-12) throw DomainError("consecutive loop vertices antipodal");
    }
}

namespace {

struct ArcHit {
    double ti, tj; // arc parameters in [0, arc length]
    Vec3 p;
};

// Intersections of the open minor arcs (a1,a2) and (b1,b2).
std::vector<ArcHit> arc_intersections(const Vec3& a1, const Vec3& a2, const Vec3& b1,
                                      const Vec3& b2) {
    std::vector<ArcHit> hits;
    const Vec3 na = cross(a1, a2);
    const Vec3 nb = cross(b1, b2);
    Vec3 dir = cross(na, nb);
    const double dn = norm(dir);
    if (dn < 1e-14) return hits; // same great circle: handled by vertex merging upstream
    dir = dir * (1.0 / dn);
    const double la = geodesic_dist(a1, a2), lb = geodesic_dist(b1, b2);
    for (const Vec3& cand : {dir, -dir}) {
        const double ta = geodesic_dist(a1, cand);
        const double tb = geodesic_dist(b1, cand);
        const double eps = 1e-12;
        if (ta > eps && ta < la - eps && tb > eps && tb < lb - eps &&
            std::abs(geodesic_dist(a2, cand) + ta - la) < 1e-9 &&
            std::abs(geodesic_dist(b2, cand) + tb - lb) < 1e-9) {
            hits.push_back({ta, tb, cand});
        }
    }
    return hits;
}

} // namespace

std::vector<SphereLoop> decompose_simple(const SphereLoop& input) {
    input.validate();
    // Merge coincident vertices, then insert all arc-arc intersection points as
    // explicit vertices so self-intersections happen only at shared vertices.
    std::vector<Vec3> v = input.verts;

    const double merge_tol = 1e-9;
    auto build_vertex_chain = [&](const std::vector<Vec3>& poly) {
        const std::size_t n = poly.size();
        std::vector<std::vector<std::pair<double, Vec3>>> extra(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
                auto hits = arc_intersections(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]);
                for (const auto& h : hits) {
                    extra[i].push_back({h.ti, h.p});
                    extra[j].push_back({h.tj, h.p});
                }
            }
        }
        std::vector<Vec3> chain;
        for (std::size_t i = 0; i < n; ++i) {
            chain.push_back(poly[i]);
            std::sort(extra[i].begin(), extra[i].end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            for (const auto& e : extra[i]) chain.push_back(e.second);
        }
        return chain;
    };

    std::vector<Vec3> chain = build_vertex_chain(v);

    // group chain vertices into coincidence classes
    auto classify = [&](const std::vector<Vec3>& ch) {
        std::vector<int> cls(ch.size(), -1);
        int next = 0;
        for (std::size_t i = 0; i < ch.size(); ++i) {
            if (cls[i] >= 0) continue;
            cls[i] = next;
            for (std::size_t j = i + 1; j < ch.size(); ++j)
                if (cls[j] < 0 && geodesic_dist(ch[i], ch[j]) < merge_tol) cls[j] = cls[i];
            ++next;
        }
        return cls;
    };
    std::vector<int> cls = classify(chain);

    // Peel simple loops: repeatedly take a repeated class pair at minimal cyclic
    // index distance; that subchain is simple.
    std::vector<SphereLoop> out;
    std::vector<int> idx(chain.size());
    std::iota(idx.begin(), idx.end(), 0);

    auto has_repeat = [&](const std::vector<int>& cur) {
        std::map<int, int> seen;
        for (std::size_t i = 0; i < cur.size(); ++i) {
            const int c = cls[static_cast<std::size_t>(cur[i])];
            if (seen.count(c)) return true;
            seen[c] = static_cast<int>(i);
        }
        return false;
    };

    std::vector<int> cur = idx;
    int guard = 0;
    while (has_repeat(cur) && guard++ < 10000) {
        const std::size_t n = cur.size();
        std::size_t best_i = 0, best_len = n + 1;
        std::size_t best_j = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                if (cls[static_cast<std::size_t>(cur[i])] != cls[static_cast<std::size_t>(cur[j])])
                    continue;
                const std::size_t fwd = j - i;
                const std::size_t bwd = n - fwd;
                const std::size_t len = std::min(fwd, bwd);
                if (len < best_len) {
                    best_len = len;
                    best_i = i;
                    best_j = j;
                }
            }
        // split off cur[best_i..best_j) as one loop
        std::vector<int> piece(cur.begin() + static_cast<long>(best_i),
                               cur.begin() + static_cast<long>(best_j));
        std::vector<int> rest(cur.begin(), cur.begin() + static_cast<long>(best_i));
        rest.insert(rest.end(), cur.begin() + static_cast<long>(best_j), cur.end());
        if (piece.size() >= 2) {
            SphereLoop l;
            for (int k : piece) l.verts.push_back(chain[static_cast<std::size_t>(k)]);
            // drop zero-length loops arising from merged duplicate vertices
            if (l.length() > merge_tol) out.push_back(std::move(l));
        }
        cur = std::move(rest);
        if (cur.size() < 2) break;
    }
    if (cur.size() >= 2) {
        SphereLoop l;
        for (int k : cur) l.verts.push_back(chain[static_cast<std::size_t>(k)]);
        if (l.length() > merge_tol) out.push_back(std::move(l));
    }
    return out;
}

namespace {

// Signed crossings of the arc y->z with the loop (positive when the loop
// crosses left-to-right as seen along y->z).
int degree_by_crossings(const SphereLoop& loop, const Vec3& y, const Vec3& z) {
    int deg = 0;
    const std::size_t n = loop.verts.size();
    const Vec3 nyz = cross(y, z);
    const double lyz = geodesic_dist(y, z);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& a = loop.verts[i];
        const Vec3& b = loop.verts[(i + 1) % n];
        const Vec3 nab = cross(a, b);
        Vec3 dir = cross(nyz, nab);
        const double dn = norm(dir);
        if (dn < 1e-14) continue;
        dir = dir * (1.0 / dn);
        const double lab = geodesic_dist(a, b);
        for (const Vec3& cand : {dir, -dir}) {
            const double ta = geodesic_dist(a, cand);
            const double ty = geodesic_dist(y, cand);
            if (ta >= 1e-12 && ta <= lab - 1e-12 && ty >= 1e-12 && ty <= lyz - 1e-12 &&
                std::abs(geodesic_dist(b, cand) + ta - lab) < 1e-9 &&
                std::abs(geodesic_dist(z, cand) + ty - lyz) < 1e-9) {
                // crossing sign: loop passing to the +n side of the y->z circle counts +1
                const double s = dot(nyz, b - a);
                deg += (s > 0) ? 1 : -1;
            }
        }
    }
    return deg;
}

} // namespace

double simple_loop_signed_area(const SphereLoop& loop, const Vec3& z) {
    const std::size_t n = loop.verts.size();
    if (n < 2) return 0.0;
    // 2-gons enclose zero area
    if (n == 2) return 0.0;
    // total signed turning
    double turning = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& p = loop.verts[i];
        const Vec3& q = loop.verts[(i + 1) % n];
        const Vec3& r = loop.verts[(i + 2) % n];
        // tangents at q of arcs p->q and q->r
        Vec3 t_in = cross(cross(p, q), q);
        Vec3 t_out = cross(cross(q, r), q);
        const double ni = norm(t_in), no = norm(t_out);
        if (ni < 1e-14 || no < 1e-14) continue;
        t_in = t_in * (1.0 / ni);
        t_out = t_out * (1.0 / no);
        const double sa = dot(cross(t_in, t_out), q);
        const double ca = dot(t_in, t_out);
        turning += std::atan2(sa, ca);
    }
    const double area_left = 2 * kPi - turning;  // region on the left of the loop
    const double area_right = 4 * kPi - area_left;

    // Probe just left of edge 0 (left of travel = toward the pole cross(a,b)).
    const Vec3& a = loop.verts[0];
    const Vec3& b = loop.verts[1];
    const Vec3 mid = slerp(a, b, 0.5 * geodesic_dist(a, b));
    const Vec3 pole = normalized(cross(a, b));
    const Vec3 probe = slerp(mid, pole, 1e-5);
    const int deg_left = degree_by_crossings(loop, probe, z);
    if (deg_left == 0) {
        // z lies on the left side; the z-free component is the right one
        const Vec3 probe_r = slerp(mid, -pole, 1e-5);
        const int deg_right = degree_by_crossings(loop, probe_r, z);
        return deg_right * area_right;
    }
    return deg_left * area_left;
}

double algebraic_area(const SphereLoop& loop, const Vec3& z) {
    loop.validate();
    // basepoint must stay clear of the loop
    const std::size_t n = loop.verts.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& a = loop.verts[i];
        const Vec3& b = loop.verts[(i + 1) % n];
        const double lab = geodesic_dist(a, b);
        // distance from z to the arc
        const Vec3 nab = normalized(cross(a, b));
        const double dplane = std::abs(std::asin(std::max(-1.0, std::min(1.0, dot(nab, z)))));
        const double da = geodesic_dist(a, z), db = geodesic_dist(b, z);
        const Vec3 foot_dir = normalized(z - nab * dot(nab, z));
        const double tf = geodesic_dist(a, foot_dir);
        const bool foot_inside = tf <= lab && std::abs(geodesic_dist(b, foot_dir) + tf - lab) < 1e-9;
        const double dist = foot_inside ? dplane : std::min(da, db);
        if (dist < 1e-9) throw BasepointOnLoop("basepoint lies on the loop");
    }
    double total = 0;
    for (const SphereLoop& s : decompose_simple(loop)) total += simple_loop_signed_area(s, z);
    return total;
}

double isosceles_apex_theta(double r, double lambda1) {
    if (!(r > 0) || !(r < kPi / 2)) throw DomainError("r must lie in (0, pi/2)");
    if (!(lambda1 > 0) || !(lambda1 < 1)) throw DomainError("lambda1 must lie in (0, 1)");
    const double s = std::sin(0.5 * lambda1 * r) / std::sin(r);
    if (s >= 1) throw DomainError("triangle not constructible");
    return std::asin(s) / kPi;
}

bool isosceles_area_check(double r, double theta, double lambda1) {
    if (!(lambda1 > 0) || !(lambda1 < 1)) throw DomainError("lambda1 must lie in (0, 1)");
    if (!(r > 0) || !(r < kPi)) throw DomainError("r must lie in (0, pi)");
    if (!(theta > 0) || !(theta < 1)) throw DomainError("theta must lie in (0, 1)");
    // base of the isosceles triangle with equal sides r and apex 2*pi*theta,
    // from the half-triangle sine rule
    const double apex_half = kPi * theta;
    const double half_base_sin = std::sin(apex_half) * std::sin(r);
    const double base = 2 * std::asin(std::max(-1.0, std::min(1.0, half_base_sin)));
    if (!(base < r * lambda1)) throw DomainError("base not shorter than r*lambda1");
    // For theta > 1/2 the triangle is the complement of the one with apex
    // 2*pi*(1-theta); both share the same base since sin(pi*theta) is symmetric.
    const double area = theta <= 0.5 ? triangle_excess_from_sides(r, r, base)
                                     : 4 * kPi - triangle_excess_from_sides(r, r, base);
    return std::abs(area - 4 * kPi * theta) < kPi * lambda1;
}

} // namespace spherecone
