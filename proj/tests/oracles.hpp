// Independent oracles used by the test suites. These deliberately avoid the
// implementation paths they check.
#pragma once

#include <random>
#include <set>
#include <vector>

#include "treechar/exact.hpp"
#include "treechar/padic.hpp"
#include "treechar/tree.hpp"

namespace oracles {

using namespace treechar;

// Big-rational 2x2 inverse.
struct RatInv {
    Rat a, b, c, d;
};
inline RatInv rational_inverse(const Rat& a, const Rat& b, const Rat& c, const Rat& d) {
    Rat det = a * d - b * c;
    return RatInv{d / det, -b / det, -c / det, a / det};
}

// Every vertex at distance n from the base is a primitive triple with a+c = n;
// enumerate them directly (no BFS, no neighbour code).
inline std::vector<Vertex> enumerate_ball(const Int& p, long r) {
    std::vector<Vertex> out;
    for (long n = 0; n <= r; ++n) {
        for (long a = 0; a <= n; ++a) {
            long c = n - a;
            for (Int b = 0; b < pow_int(p, c); ++b) {
                long vb = b == 0 ? treechar::VAL_INF : val_p(b, p);
                long m = std::min({a, c, vb});
                if (m != 0) continue;  // not primitive
                out.push_back(Vertex{p, a, c, b});
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Breadth-first geodesic inside an enumerated ball, using only the metric.
inline std::vector<Vertex> bfs_geodesic(const std::vector<Vertex>& verts, const Vertex& u,
                                        const Vertex& w) {
    std::map<Vertex, Vertex> prev;
    std::deque<Vertex> q{u};
    std::set<Vertex> seen{u};
    while (!q.empty()) {
        Vertex cur = q.front();
        q.pop_front();
        if (cur == w) break;
        for (const auto& n : verts) {
            if (seen.count(n)) continue;
            if (distance(cur, n) != 1) continue;
            seen.insert(n);
            prev[n] = cur;
            q.push_back(n);
        }
    }
    std::vector<Vertex> path{w};
    Vertex cur = w;
    while (!(cur == u)) {
        cur = prev.at(cur);
        path.push_back(cur);
    }
    std::reverse(path.begin(), path.end());
    return path;
}

// Fixed-cell count of diag(1,u) on the level-m partition of P¹(Z/p^m):
// #{a mod p^m : (u-1)a ≡ 0} + #{b ∈ pZ/p^m : (u⁻¹-1)b ≡ 0}.
inline long diag_trace_oracle(const Int& p, const Rat& u, long m) {
    Int pm = pow_int(p, m);
    Int un = residue_mod_pk(u, p, m);
    Int ui = inv_mod(un, pm);
    long count = 0;
    for (Int a = 0; a < pm; ++a)
        if (mod_nonneg((un - 1) * a, pm) == 0) ++count;
    for (Int b = 0; b < pm; b += p)
        if (mod_nonneg((ui - 1) * b, pm) == 0) ++count;
    return count;
}

// Random invertible integral matrices with controlled p-power twists.
inline RatMat2 random_group_element(std::mt19937_64& rng, const Int& p, bool allow_powers = true) {
    std::uniform_int_distribution<int> small(-4, 4);
    std::uniform_int_distribution<int> powr(-1, 1);
    for (;;) {
        RatMat2 g{Rat(small(rng)), Rat(small(rng)), Rat(small(rng)), Rat(small(rng))};
        if (g.det() == 0) continue;
        if (allow_powers) {
            int k = powr(rng);
            RatMat2 t{pow_rat(p, k), 0, 0, 1};
            g = g * t;
        }
        return g;
    }
}

// Random element of GL2(O) with integer entries (unit determinant mod p).
inline RatMat2 random_unimodular(std::mt19937_64& rng, const Int& p) {
    std::uniform_int_distribution<int> small(-6, 6);
    for (;;) {
        RatMat2 g{Rat(small(rng)), Rat(small(rng)), Rat(small(rng)), Rat(small(rng))};
        Rat det = g.det();
        if (det == 0) continue;
        if (val_p(det, p) == 0) return g;
    }
}

}  // namespace oracles
