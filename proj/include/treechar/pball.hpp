#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "treechar/errors.hpp"
#include "treechar/exact.hpp"
#include "treechar/padic.hpp"

namespace treechar {

// A basic open of P¹(Q_p): the affine coset a + p^k·O, or its complement
// (which contains ∞). The spec's chart-at-infinity cosets are the complement
// balls with zero-centered excluded coset: P¹ ∖ p^{1-k}O = {w = 1/z ≡ 0 mod p^k}.
// Residue a is canonical in Z[1/p]; level k may be any integer.
struct PBall {
    Int p;
    bool comp = false;  // true: set is P¹ ∖ (a + p^k O)
    long level = 0;
    Rat a = 0;

    static PBall affine(const Int& p, const Rat& a, long level) {
        return PBall{p, false, level, reduce_mod_pk(a, p, level)};
    }
    static PBall coaffine(const Int& p, const Rat& a, long level) {
        return PBall{p, true, level, reduce_mod_pk(a, p, level)};
    }
    // Whole integral chart Z_p.
    static PBall unit_disc(const Int& p) { return affine(p, 0, 0); }
    // {val(z) <= -k} ∪ {∞}, the chart-at-infinity coset of level k.
    static PBall infinity_coset(const Int& p, long k) { return coaffine(p, 0, 1 - k); }

    bool operator==(const PBall& o) const {
        return comp == o.comp && level == o.level && a == o.a;
    }
    bool operator!=(const PBall& o) const { return !(*this == o); }
    bool operator<(const PBall& o) const {
        if (comp != o.comp) return comp < o.comp;
        if (level != o.level) return level < o.level;
        return a < o.a;
    }

    std::string str() const {
        std::string core = a.get_str() + " + " + p.get_str() + "^" + std::to_string(level) + "O";
        return comp ? "P1\\(" + core + ")" : core;
    }
};

// A point of P¹(Q_p): a rational or ∞.
struct PPoint {
    bool inf = false;
    Rat z = 0;

    static PPoint infinity() { return PPoint{true, 0}; }
    static PPoint of(const Rat& z) { return PPoint{false, z}; }
};

inline bool member(const PPoint& x, const PBall& B) {
    bool in_coset = false;
    if (!x.inf) in_coset = val_p(x.z - B.a, B.p) >= B.level;
    return B.comp ? !in_coset : in_coset;
}

// Möbius action of g on points: row vector (x, y) ↦ (x, y)·gᵀ, i.e.
// z ↦ (g.a z + g.b)/(g.c z + g.d).
inline PPoint mobius(const RatMat2& g, const PPoint& x) {
    if (x.inf) {
        if (g.c == 0) return PPoint::infinity();
        return PPoint::of(g.a / g.c);
    }
    Rat num = g.a * x.z + g.b;
    Rat den = g.c * x.z + g.d;
    if (den == 0) return PPoint::infinity();
    return PPoint::of(num / den);
}

// Image of the unit disc Z_p under the Möbius map of M (det ≠ 0).
inline PBall unit_disc_image(const Int& p, const RatMat2& M) {
    const Rat &A = M.a, &B = M.b, &C = M.c, &D = M.d;
    Rat det = M.det();
    if (det == 0) throw SingularMatrix("unit_disc_image");
    if (C == 0) return PBall::affine(p, B / D, val_p(A, p) - val_p(D, p));
    long vC = val_p(C, p);
    long vD = D == 0 ? VAL_INF : val_p(D, p);
    if (vD < vC) {
        // pole -D/C outside Z_p: bounded disc around M(0)
        return PBall::affine(p, B / D, val_p(det, p) - 2 * vD);
    }
    // pole inside Z_p: complement of the image of P¹ ∖ Z_p, a disc around A/C
    return PBall::coaffine(p, A / C, val_p(det, p) + 1 - 2 * vC);
}

// Image of a ball under a Möbius map; exact, closed on PBall.
inline PBall mobius_image(const RatMat2& g, const PBall& ball) {
    const Int& p = ball.p;
    // h = g ∘ (z ↦ p^level z + a) so that g·(a + p^level O) = h·(Z_p)
    Rat pk = pow_rat(p, ball.level);
    RatMat2 h{g.a * pk, g.a * ball.a + g.b, g.c * pk, g.c * ball.a + g.d};
    PBall img = unit_disc_image(p, h);
    if (ball.comp) img.comp = !img.comp;
    img.a = reduce_mod_pk(img.a, p, img.level);
    return img;
}

// The p pieces of a ball, one level deeper (toward ∞ for complement balls).
inline std::vector<PBall> split(const PBall& B) {
    const Int& p = B.p;
    std::vector<PBall> out;
    if (!B.comp) {
        for (Int i = 0; i < p; ++i)
            out.push_back(PBall::affine(p, B.a + Rat(i) * pow_rat(p, B.level), B.level + 1));
    } else {
        // P¹∖(a+p^k O) = P¹∖(a+p^{k-1}O) ⊔ { a + i p^{k-1} + p^k O : 1 <= i < p }
        out.push_back(PBall::coaffine(p, B.a, B.level - 1));
        for (Int i = 1; i < p; ++i)
            out.push_back(PBall::affine(p, B.a + Rat(i) * pow_rat(p, B.level - 1), B.level));
    }
    return out;
}

// --- Standard grid of level L: p^L affine cells plus p^{L-1} infinity-chart
// cells. Every ball of bounded complexity is a union of grid cells; used for
// exact overlay arithmetic on partitions. -------------------------------------

struct Grid {
    Int p;
    long L;
    std::vector<PPoint> centers;  // one interior point per cell
    std::vector<PBall> cells;

    Grid(const Int& p_, long L_) : p(p_), L(L_) {
        if (L < 1) throw Error("Grid: level must be >= 1");
        for (Int x = 0; x < pow_int(p, L); ++x) {
            cells.push_back(PBall::affine(p, Rat(x), L));
            centers.push_back(PPoint::of(Rat(x)));
        }
        // infinity-chart cells {1/z ≡ y mod p^L}, y ∈ pZ/p^L
        for (Int y = 0; y < pow_int(p, L - 1); ++y) {
            Int yy = y * p;
            if (yy == 0) {
                cells.push_back(PBall::infinity_coset(p, L));
                centers.push_back(PPoint::infinity());
            } else {
                long vy = val_p(yy, p);
                cells.push_back(PBall::affine(p, Rat(1) / Rat(yy), L - 2 * vy));
                centers.push_back(PPoint::of(Rat(1) / Rat(yy)));
            }
        }
    }

    std::size_t size() const { return cells.size(); }
};

// Smallest grid level at which the ball is a union of grid cells.
inline long effective_level(const PBall& B) {
    if (B.a == 0) return std::max({1L, B.level, 1 - B.level});
    long v = val_p(B.a, B.p);
    return std::max(1L, v < 0 ? B.level - 2 * v : B.level);
}

inline std::vector<char> to_grid_bits(const PBall& B, const Grid& g) {
    if (effective_level(B) > g.L) throw Error("to_grid_bits: grid too coarse");
    std::vector<char> bits(g.size(), 0);
    for (std::size_t i = 0; i < g.size(); ++i) bits[i] = member(g.centers[i], B) ? 1 : 0;
    return bits;
}

}  // namespace treechar
