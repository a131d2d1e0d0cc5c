#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "treechar/errors.hpp"
#include "treechar/exact.hpp"
#include "treechar/padic.hpp"

namespace treechar {

// Vertex of the Bruhat-Tits tree of SL₂(Q_p): the homothety class of a rank-2
// O-lattice, stored as its primitive upper-triangular basis
//   L = O·(p^a, b) + O·(0, p^c),  0 <= b < p^c,  min(a, c, val(b)) = 0.
// (Row convention: basis vectors are the rows of [[p^a, b],[0, p^c]].)
struct Vertex {
    Int p;
    long a = 0, c = 0;
    Int b = 0;

    bool operator==(const Vertex& o) const { return a == o.a && c == o.c && b == o.b; }
    bool operator!=(const Vertex& o) const { return !(*this == o); }
    bool operator<(const Vertex& o) const {
        if (a != o.a) return a < o.a;
        if (c != o.c) return c < o.c;
        return b < o.b;
    }

    // Basis matrix rows as exact rationals.
    Rat m00() const { return Rat(pow_int(p, a)); }
    Rat m01() const { return Rat(b); }
    Rat m10() const { return Rat(0); }
    Rat m11() const { return Rat(pow_int(p, c)); }

    std::string str() const {
        return "v[" + std::to_string(a) + "," + std::to_string(c) + "," + b.get_str() + "]";
    }
};

inline Vertex base_vertex(const Int& p) { return Vertex{p, 0, 0, 0}; }

// Row Hermite form over O with valuation pivoting, then primitive rescaling.
// Works for any scalar with val/is_zero/div/sub/mul/residue extraction; the two
// instantiations below are exact rationals and PadicScalar.
inline Vertex canonicalize_rows(const Int& p, const Rat& x00, const Rat& x01, const Rat& x10,
                                const Rat& x11) {
    Rat r00 = x00, r01 = x01, r10 = x10, r11 = x11;
    if (r00 * r11 - r01 * r10 == 0) throw SingularMatrix("canonicalize: rank < 2");
    if (r00 == 0 || (r10 != 0 && val_p(r10, p) < val_p(r00, p))) {
        std::swap(r00, r10);
        std::swap(r01, r11);
    }
    if (r10 != 0) {
        Rat mu = r10 / r00;  // val >= 0 by pivoting
        r11 -= mu * r01;
        r10 = 0;
    }
    long av = val_p(r00, p);
    long cv = val_p(r11, p);
    Rat y = r01 / (r00 / pow_rat(p, av));  // strip the unit of the pivot
    long k = std::min({av, cv, val_p(y, p)});
    long a = av - k, c = cv - k;
    Rat ys = y / pow_rat(p, k);
    Int b = residue_mod_pk(ys, p, c);
    return Vertex{p, a, c, b};
}

inline Vertex canonicalize_rows_padic(const Int& p, PadicScalar x00, PadicScalar x01,
                                      PadicScalar x10, PadicScalar x11) {
    if (x00.is_zero() || (!x10.is_zero() && x10.val() < x00.val())) {
        std::swap(x00, x10);
        std::swap(x01, x11);
    }
    if (x00.is_zero()) throw SingularMatrix("canonicalize: zero column");
    if (!x10.is_zero()) {
        PadicScalar mu = x10 / x00;
        x11 = x11 - mu * x01;  // full cancellation surfaces as PrecisionExhausted
    }
    if (x11.is_zero()) throw SingularMatrix("canonicalize: rank < 2");
    long av = x00.val();
    long cv = x11.val();
    PadicScalar unit00 = x00 / PadicScalar::from_rational(p, pow_rat(p, av), x00.precision());
    PadicScalar y = x01 / unit00;
    long k = std::min({av, cv, y.val()});
    long a = av - k, c = cv - k;
    // residue of y/p^k mod p^c
    Int b = 0;
    if (!y.is_zero()) {
        PadicScalar ys = y / PadicScalar::from_rational(p, pow_rat(p, k), y.precision());
        b = ys.residue_mod(c);
    }
    return Vertex{p, a, c, b};
}

// g acting on lattices: rows of B·gᵀ, canonicalized. Exact-rational path.
inline Vertex act(const RatMat2& g, const Vertex& v) {
    // row_i(B) * gᵀ : (x, y) ↦ (x*g.a + y*g.b, x*g.c + y*g.d)
    Rat r00 = v.m00() * g.a + v.m01() * g.b;
    Rat r01 = v.m00() * g.c + v.m01() * g.d;
    Rat r10 = v.m10() * g.a + v.m11() * g.b;
    Rat r11 = v.m10() * g.c + v.m11() * g.d;
    return canonicalize_rows(v.p, r00, r01, r10, r11);
}

// Same action at working precision (for group elements with irrational entries).
inline Vertex act(const Matrix2& g, const Vertex& v) {
    const Int& p = v.p;
    int prec = g.at(0, 0).precision();
    auto S = [&](const Rat& x) { return PadicScalar::from_rational(p, x, prec); };
    PadicScalar r00 = S(v.m00()) * g.at(0, 0) + S(v.m01()) * g.at(0, 1);
    PadicScalar r01 = S(v.m00()) * g.at(1, 0) + S(v.m01()) * g.at(1, 1);
    PadicScalar r10 = S(v.m10()) * g.at(0, 0) + S(v.m11()) * g.at(0, 1);
    PadicScalar r11 = S(v.m10()) * g.at(1, 0) + S(v.m11()) * g.at(1, 1);
    return canonicalize_rows_padic(p, r00, r01, r10, r11);
}

// d(u, w) = |difference of elementary-divisor exponents| of the basis-change
// matrix N = B_w · B_u⁻¹ over O (Smith-type reduction collapses to min-valuation
// and determinant for 2x2).
inline long distance(const Vertex& u, const Vertex& w) {
    if (u.p != w.p) throw Error("distance: mixed primes");
    const Int& p = u.p;
    // B_u⁻¹ = adj / det with det = p^{a_u + c_u}
    Rat det_u = Rat(pow_int(p, u.a + u.c));
    Rat n00 = w.m00() * u.m11() / det_u;
    Rat n01 = (-w.m00() * u.m01() + w.m01() * u.m00()) / det_u;
    Rat n10 = w.m10() * u.m11() / det_u;
    Rat n11 = (-w.m10() * u.m01() + w.m11() * u.m00()) / det_u;
    long minval = VAL_INF;
    for (const Rat& x : {n00, n01, n10, n11}) minval = std::min(minval, val_p(x, p));
    Rat nd = n00 * n11 - n01 * n10;
    long alpha = minval;
    long beta = val_p(nd, p) - alpha;
    return beta >= alpha ? beta - alpha : alpha - beta;
}

// The p+1 neighbours: index-p sublattices between L and pL.
inline std::vector<Vertex> neighbors(const Vertex& v) {
    const Int& p = v.p;
    std::vector<Vertex> out;
    out.reserve(mpz_get_ui(p.get_mpz_t()) + 1);
    for (Int t = 0; t < p; ++t) {
        // rows { v1 + t·v2, p·v2 }
        out.push_back(canonicalize_rows(p, v.m00(), v.m01() + Rat(t) * v.m11(), Rat(0),
                                        Rat(p) * v.m11()));
    }
    // rows { v2, p·v1 }
    out.push_back(canonicalize_rows(p, Rat(0), v.m11(), Rat(p) * v.m00(), Rat(p) * v.m01()));
    std::sort(out.begin(), out.end());
    return out;
}

struct OrientedEdge {
    Vertex tail, head;

    OrientedEdge reverse() const { return {head, tail}; }
    bool operator==(const OrientedEdge& o) const { return tail == o.tail && head == o.head; }
    std::string str() const { return "e[" + tail.str() + ">" + head.str() + "]"; }
};

// Unoriented edge in canonical order (lexicographically smaller endpoint first).
struct UEdge {
    Vertex x, y;

    UEdge() = default;
    UEdge(Vertex u, Vertex v) {
        if (v < u) std::swap(u, v);
        x = std::move(u);
        y = std::move(v);
    }
    bool operator==(const UEdge& o) const { return x == o.x && y == o.y; }
    bool operator!=(const UEdge& o) const { return !(*this == o); }
    bool operator<(const UEdge& o) const { return x != o.x ? x < o.x : y < o.y; }
    std::string str() const { return "e[" + x.str() + "|" + y.str() + "]"; }
};

// A facet of the (rank-1) building: a vertex or an edge.
using Facet = std::variant<Vertex, UEdge>;

inline std::string facet_str(const Facet& f) {
    return std::holds_alternative<Vertex>(f) ? std::get<Vertex>(f).str()
                                             : std::get<UEdge>(f).str();
}

inline bool facet_less(const Facet& a, const Facet& b) {
    if (a.index() != b.index()) return a.index() < b.index();
    if (std::holds_alternative<Vertex>(a)) return std::get<Vertex>(a) < std::get<Vertex>(b);
    return std::get<UEdge>(a) < std::get<UEdge>(b);
}

// Finite subtree enumerated around a center facet: all vertices within the
// given radius of the center (for an edge center, of either endpoint).
class TreeBall {
public:
    TreeBall() = default;

    TreeBall(Facet center, long radius, std::size_t max_facets = 2'000'000)
        : center_(std::move(center)), radius_(radius) {
        if (radius < 0) throw Error("TreeBall: negative radius");
        std::vector<Vertex> seed;
        if (std::holds_alternative<Vertex>(center_)) {
            seed.push_back(std::get<Vertex>(center_));
        } else {
            seed.push_back(std::get<UEdge>(center_).x);
            seed.push_back(std::get<UEdge>(center_).y);
        }
        std::map<Vertex, long> dist;
        std::deque<Vertex> queue;
        for (const auto& s : seed) {
            dist[s] = 0;
            queue.push_back(s);
        }
        while (!queue.empty()) {
            Vertex v = queue.front();
            queue.pop_front();
            long dv = dist[v];
            if (dv == radius_) continue;
            for (const auto& n : neighbors(v)) {
                if (dist.count(n)) continue;
                if (dist.size() >= max_facets)
                    throw BudgetExceeded("TreeBall: facet budget at radius " +
                                         std::to_string(radius_));
                dist[n] = dv + 1;
                queue.push_back(n);
            }
        }
        for (auto& [v, d] : dist) {
            index_[v] = static_cast<int>(verts_.size());
            verts_.push_back(v);
            dist_.push_back(d);
        }
        for (std::size_t i = 0; i < verts_.size(); ++i) {
            for (const auto& n : neighbors(verts_[i])) {
                auto it = index_.find(n);
                if (it == index_.end()) continue;
                UEdge e(verts_[i], n);
                if (!(e.x == verts_[i])) continue;  // emit once, from the smaller endpoint
                eindex_[e] = static_cast<int>(edges_.size());
                edges_.push_back(e);
            }
        }
    }

    const Facet& center() const { return center_; }
    long radius() const { return radius_; }
    const std::vector<Vertex>& vertices() const { return verts_; }
    const std::vector<UEdge>& edges() const { return edges_; }

    bool contains(const Vertex& v) const { return index_.count(v) > 0; }
    bool contains(const UEdge& e) const { return eindex_.count(e) > 0; }

    int vertex_index(const Vertex& v) const {
        auto it = index_.find(v);
        if (it == index_.end()) throw WindowEscape("vertex outside window: " + v.str());
        return it->second;
    }
    int edge_index(const UEdge& e) const {
        auto it = eindex_.find(e);
        if (it == eindex_.end()) throw WindowEscape("edge outside window: " + e.str());
        return it->second;
    }

    // Distance from the center facet (min over endpoints for an edge center).
    long center_distance(const Vertex& v) const { return dist_[vertex_index(v)]; }

    std::string dot(const std::set<Vertex>& hi_verts = {},
                    const std::set<UEdge>& hi_edges = {}) const {
        std::ostringstream os;
        os << "graph treeball {\n  node [shape=point];\n";
        for (const auto& v : verts_) {
            os << "  \"" << v.str() << "\"";
            if (hi_verts.count(v)) os << " [color=red, shape=circle]";
            os << ";\n";
        }
        for (const auto& e : edges_) {
            os << "  \"" << e.x.str() << "\" -- \"" << e.y.str() << "\"";
            if (hi_edges.count(e)) os << " [color=red, penwidth=2]";
            os << ";\n";
        }
        os << "}\n";
        return os.str();
    }

private:
    Facet center_ = base_vertex(2);
    long radius_ = 0;
    std::vector<Vertex> verts_;
    std::vector<long> dist_;
    std::vector<UEdge> edges_;
    std::map<Vertex, int> index_;
    std::map<UEdge, int> eindex_;
};

inline TreeBall ball(const Vertex& o, long r, std::size_t max_facets = 2'000'000) {
    return TreeBall(Facet(o), r, max_facets);
}

// Unique geodesic; algebraic route by greedy neighbour stepping on the metric.
inline std::vector<Vertex> geodesic(const Vertex& u, const Vertex& w) {
    std::vector<Vertex> path{u};
    Vertex cur = u;
    long d = distance(u, w);
    while (d > 0) {
        bool stepped = false;
        for (const auto& n : neighbors(cur)) {
            if (distance(n, w) == d - 1) {
                path.push_back(n);
                cur = n;
                --d;
                stepped = true;
                break;
            }
        }
        if (!stepped) throw Error("geodesic: no descending neighbour (metric bug)");
    }
    return path;
}

// Vertices [diag(1,p^k)]·base for -n <= k <= n; the basic apartment window.
inline std::vector<Vertex> standard_apartment_window(const Int& p, long n) {
    std::vector<Vertex> out;
    for (long k = -n; k <= n; ++k) {
        if (k >= 0)
            out.push_back(Vertex{p, 0, k, 0});
        else
            out.push_back(Vertex{p, -k, 0, 0});
    }
    return out;
}

// Distance to the standard apartment within a search horizon.
inline long distance_to_apartment(const Vertex& v) {
    long best = VAL_INF;
    long horizon = distance(v, base_vertex(v.p)) + 1;
    for (const auto& a : standard_apartment_window(v.p, 2 * horizon))
        best = std::min(best, distance(v, a));
    return best;
}

// SL₂-type 2-coloring: parity of the distance from the base vertex.
inline int vertex_type(const Vertex& v) { return static_cast<int>((v.a + v.c) % 2); }

}  // namespace treechar
