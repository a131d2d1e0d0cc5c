#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <utility>

#include "treechar/errors.hpp"
#include "treechar/exact.hpp"

namespace treechar {

inline constexpr int DEFAULT_PRECISION = 24;

// p-adic scalar at working precision N. A scalar is either exact (a known
// rational, infinitely many digits available) or inexact (valuation v, unit u
// known modulo p^N only; square roots and any arithmetic touching an inexact
// value live here). Exact zero is a distinguished state of the exact branch;
// the inexact branch is always nonzero, and any inexact operation whose
// significant digits drop below 1 fails loudly, never silently truncates.
class PadicScalar {
public:
    PadicScalar() : p_(2), prec_(DEFAULT_PRECISION), exact_(true), x_(0) {}

    static PadicScalar zero(const Int& p, int prec = DEFAULT_PRECISION) {
        return from_rational(p, 0, prec);
    }

    static PadicScalar from_rational(const Int& p, const Rat& x, int prec = DEFAULT_PRECISION) {
        if (prec < 1) throw PrecisionExhausted("requested precision < 1");
        PadicScalar s;
        s.p_ = p;
        s.prec_ = prec;
        s.exact_ = true;
        s.x_ = x;
        s.x_.canonicalize();
        return s;
    }

    static PadicScalar from_integer(const Int& p, const Int& n, int prec = DEFAULT_PRECISION) {
        return from_rational(p, Rat(n), prec);
    }

    // Inexact scalar p^v·u + O(p^{v+prec}); u must be prime to p.
    static PadicScalar inexact(const Int& p, long v, const Int& u, int prec) {
        if (prec < 1) throw PrecisionExhausted("inexact: precision < 1");
        PadicScalar s;
        s.p_ = p;
        s.prec_ = prec;
        s.exact_ = false;
        s.v_ = v;
        s.u_ = mod_nonneg(u, pow_int(p, prec));
        if (s.u_ == 0 || val_p(s.u_, p) != 0) throw Error("inexact: unit not prime to p");
        return s;
    }

    const Int& prime() const { return p_; }
    int precision() const { return prec_; }
    bool is_exact() const { return exact_; }
    bool is_zero() const { return exact_ && x_ == 0; }

    // Valuation; VAL_INF for exact zero.
    long val() const { return exact_ ? val_p(x_, p_) : v_; }

    // Unit part as an integer in (0, p^prec), p ∤ u.
    Int unit() const {
        if (is_zero()) throw Error("unit(): exact zero has no unit part");
        if (!exact_) return u_;
        Rat u = x_ / pow_rat(p_, val_p(x_, p_));
        return residue_mod_pk(u, p_, prec_);
    }

    bool is_unit() const { return !is_zero() && val() == 0; }

    // Exact rational payload (only for exact scalars).
    const Rat& rational() const {
        if (!exact_) throw PrecisionExhausted("rational(): value is inexact");
        return x_;
    }

    // Value mod p^m as an integer in [0, p^m). Requires val >= 0; inexact
    // scalars must have enough digits.
    Int residue_mod(long m) const {
        if (m <= 0) return 0;
        if (is_zero()) return 0;
        long v = val();
        if (v < 0) throw Error("residue_mod: negative valuation");
        if (v >= m) return 0;
        if (exact_) return residue_mod_pk(x_, p_, m);
        if (v_ + prec_ < m)
            throw PrecisionExhausted("residue_mod: need " + std::to_string(m) +
                                     " digits, have " + std::to_string(v_ + prec_));
        return mod_nonneg(pow_int(p_, v_) * u_, pow_int(p_, m));
    }

    PadicScalar operator-() const {
        PadicScalar r = *this;
        if (exact_)
            r.x_ = -x_;
        else
            r.u_ = pow_int(p_, prec_) - u_;
        return r;
    }

    PadicScalar operator*(const PadicScalar& o) const {
        check_same_prime(o);
        int prec = std::min(prec_, o.prec_);
        if (exact_ && o.exact_) return from_rational(p_, x_ * o.x_, prec);
        if (is_zero() || o.is_zero()) return zero(p_, prec);
        PadicScalar r;
        r.p_ = p_;
        r.prec_ = prec;
        r.exact_ = false;
        r.v_ = val() + o.val();
        r.u_ = mod_nonneg(unit() * o.unit(), pow_int(p_, prec));
        return r;
    }

    PadicScalar operator/(const PadicScalar& o) const {
        check_same_prime(o);
        if (o.is_zero()) throw Error("division by exact zero");
        int prec = std::min(prec_, o.prec_);
        if (exact_ && o.exact_) return from_rational(p_, x_ / o.x_, prec);
        if (is_zero()) return zero(p_, prec);
        PadicScalar r;
        r.p_ = p_;
        r.prec_ = prec;
        r.exact_ = false;
        r.v_ = val() - o.val();
        const Int pk = pow_int(p_, prec);
        r.u_ = mod_nonneg(unit() * inv_mod(o.unit(), pk), pk);
        return r;
    }

    // Inexact addition tracks the window p^{min(v+prec)}; full cancellation
    // inside that window cannot be told from zero and is an error.
    PadicScalar operator+(const PadicScalar& o) const {
        check_same_prime(o);
        int prec = std::min(prec_, o.prec_);
        if (exact_ && o.exact_) return from_rational(p_, x_ + o.x_, prec);
        if (is_zero()) return o.capped(prec_);
        if (o.is_zero()) return capped(o.prec_);
        long v = std::min(val(), o.val());
        long known = std::min(val() + prec_, o.val() + o.prec_);
        long digits = known - v;
        if (digits < 1) throw PrecisionExhausted("addition: no overlapping digits");
        const Int pk = pow_int(p_, digits);
        Int s = mod_nonneg(unit() * pow_int(p_, val() - v) + o.unit() * pow_int(p_, o.val() - v),
                           pk);
        if (s == 0)
            throw PrecisionExhausted("addition: full cancellation at working precision");
        long t = val_p(s, p_);
        PadicScalar r;
        r.p_ = p_;
        r.exact_ = false;
        r.v_ = v + t;
        r.prec_ = static_cast<int>(digits - t);
        r.u_ = mod_nonneg(s / pow_int(p_, t), pow_int(p_, r.prec_));
        return r;
    }

    PadicScalar operator-(const PadicScalar& o) const { return *this + (-o); }

    // Agreement: exact pair compares exactly, otherwise residues at the shared
    // precision window must match.
    bool equals(const PadicScalar& o) const {
        check_same_prime(o);
        if (exact_ && o.exact_) return x_ == o.x_;
        if (is_zero() || o.is_zero()) return false;  // inexact is never provably zero
        if (val() != o.val()) return false;
        int m = std::min(prec_, o.prec_);
        const Int pk = pow_int(p_, m);
        return mod_nonneg(unit(), pk) == mod_nonneg(o.unit(), pk);
    }

    std::string str() const {
        if (exact_) return x_.get_str();
        return u_.get_str() + "*" + p_.get_str() + "^" + std::to_string(v_) + " + O(" +
               p_.get_str() + "^" + std::to_string(v_ + prec_) + ")";
    }

    // Square test in Q_p. Needs 1 digit for odd p, 3 digits for p = 2.
    bool is_square() const {
        if (is_zero()) return true;
        if (val() % 2 != 0) return false;
        Int u = unit();
        if (p_ == 2) {
            if (prec_ < 3) throw PrecisionExhausted("is_square: need 3 digits at p=2");
            return mod_nonneg(u, Int(8)) == 1;
        }
        Int exp = (p_ - 1) / 2;
        Int leg;
        mpz_powm(leg.get_mpz_t(), Int(mod_nonneg(u, p_)).get_mpz_t(), exp.get_mpz_t(),
                 p_.get_mpz_t());
        return leg == 1;
    }

    // p-adic square root by digitwise Hensel lifting; the result is inexact.
    PadicScalar sqrt() const {
        if (is_zero()) return *this;
        if (!is_square()) throw Error("sqrt: not a square in Q_p");
        int out_prec = p_ == 2 ? prec_ - 2 : prec_;
        if (out_prec < 1) throw PrecisionExhausted("sqrt: insufficient digits");
        Int u = unit();
        Int r;
        if (p_ == 2) {
            r = 1;  // u ≡ 1 mod 8
            for (long k = 3; k < prec_; ++k) {
                Int pk1 = pow_int(p_, k + 1);
                if (mod_nonneg(u - r * r, pk1) != 0) r += pow_int(p_, k - 1);
                if (mod_nonneg(u - r * r, pk1) != 0) throw Error("sqrt: 2-adic lift failed");
            }
        } else {
            Int u0 = mod_nonneg(u, p_);
            r = 0;
            for (Int c = 1; c < p_; ++c)
                if (mod_nonneg(c * c, p_) == u0) {
                    r = c;
                    break;
                }
            if (r == 0) throw Error("sqrt: no residue root");
            for (long k = 1; k < prec_; ++k) {
                Int pk = pow_int(p_, k);
                Int diff = (u - r * r) / pk;  // exactly divisible by induction
                Int c = mod_nonneg(diff * inv_mod(Int(2 * r), p_), p_);
                r += c * pk;
            }
        }
        return inexact(p_, val() / 2, r, out_prec);
    }

private:
    void check_same_prime(const PadicScalar& o) const {
        if (p_ != o.p_) throw Error("mixed primes");
    }
    PadicScalar capped(int m) const {
        PadicScalar r = *this;
        if (r.prec_ > m) {
            r.prec_ = std::max(m, 1);
            if (!r.exact_) r.u_ = mod_nonneg(r.u_, pow_int(p_, r.prec_));
        }
        return r;
    }

    Int p_;
    int prec_;
    bool exact_;
    Rat x_;      // exact branch
    long v_ = 0;  // inexact branch
    Int u_ = 0;
};

// 2x2 matrix over PadicScalar; group elements of GL_2(Q_p) at working precision.
class Matrix2 {
public:
    Matrix2() = default;
    Matrix2(PadicScalar a, PadicScalar b, PadicScalar c, PadicScalar d)
        : m_{std::move(a), std::move(b), std::move(c), std::move(d)} {}

    static Matrix2 from_rational(const Int& p, const Rat& a, const Rat& b, const Rat& c,
                                 const Rat& d, int prec = DEFAULT_PRECISION) {
        return Matrix2(PadicScalar::from_rational(p, a, prec),
                       PadicScalar::from_rational(p, b, prec),
                       PadicScalar::from_rational(p, c, prec),
                       PadicScalar::from_rational(p, d, prec));
    }

    static Matrix2 identity(const Int& p, int prec = DEFAULT_PRECISION) {
        return from_rational(p, 1, 0, 0, 1, prec);
    }

    const PadicScalar& at(int r, int c) const { return m_[2 * r + c]; }
    PadicScalar& at(int r, int c) { return m_[2 * r + c]; }
    const Int& prime() const { return m_[0].prime(); }

    PadicScalar trace() const { return at(0, 0) + at(1, 1); }

    // Cached determinant; full cancellation means singular at working precision.
    const PadicScalar& det() const {
        if (!det_) {
            try {
                det_ = at(0, 0) * at(1, 1) - at(0, 1) * at(1, 0);
            } catch (const PrecisionExhausted&) {
                throw SingularMatrix("determinant vanishes at working precision");
            }
            if (det_->is_zero()) throw SingularMatrix("exactly singular matrix");
        }
        return *det_;
    }

    Matrix2 operator*(const Matrix2& o) const {
        return Matrix2(at(0, 0) * o.at(0, 0) + at(0, 1) * o.at(1, 0),
                       at(0, 0) * o.at(0, 1) + at(0, 1) * o.at(1, 1),
                       at(1, 0) * o.at(0, 0) + at(1, 1) * o.at(1, 0),
                       at(1, 0) * o.at(0, 1) + at(1, 1) * o.at(1, 1));
    }

    Matrix2 inverse() const {
        const PadicScalar& d = det();
        return Matrix2(at(1, 1) / d, -(at(0, 1) / d), -(at(1, 0) / d), at(0, 0) / d);
    }

    Matrix2 transpose() const { return Matrix2(at(0, 0), at(1, 0), at(0, 1), at(1, 1)); }

    bool equals(const Matrix2& o) const {
        for (int i = 0; i < 4; ++i)
            if (!m_[i].equals(o.m_[i])) return false;
        return true;
    }

    std::string str() const {
        return "[[" + at(0, 0).str() + ", " + at(0, 1).str() + "], [" + at(1, 0).str() +
               ", " + at(1, 1).str() + "]]";
    }

private:
    std::array<PadicScalar, 4> m_{};
    mutable std::optional<PadicScalar> det_;
};

// Matrix-of-rationals helper; the exact-side twin of Matrix2.
struct RatMat2 {
    Rat a, b, c, d;

    static RatMat2 identity() { return {1, 0, 0, 1}; }

    Rat det() const { return a * d - b * c; }
    Rat trace() const { return a + d; }

    RatMat2 operator*(const RatMat2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }

    RatMat2 inverse() const {
        Rat dd = det();
        if (dd == 0) throw SingularMatrix("RatMat2::inverse");
        return {d / dd, -b / dd, -c / dd, a / dd};
    }

    RatMat2 transpose() const { return {a, c, b, d}; }

    Matrix2 to_padic(const Int& p, int prec = DEFAULT_PRECISION) const {
        return Matrix2::from_rational(p, a, b, c, d, prec);
    }

    bool operator==(const RatMat2& o) const {
        return a == o.a && b == o.b && c == o.c && d == o.d;
    }

    std::string str() const {
        return "[[" + a.get_str() + "," + b.get_str() + "],[" + c.get_str() + "," +
               d.get_str() + "]]";
    }
};

// Eigenvalue valuations from the Newton polygon of X² − tr·X + det; equal
// halves when the polygon has a single segment.
inline std::pair<Rat, Rat> newton_valuations(const Matrix2& g) {
    const PadicScalar& d = g.det();
    long vd = d.val();
    bool t_deep = false;  // trace zero or deeper than the polygon can see
    long vt = 0;
    try {
        PadicScalar tr = g.trace();
        if (tr.is_zero())
            t_deep = true;
        else
            vt = tr.val();
    } catch (const PrecisionExhausted&) {
        long bound = std::min(g.at(0, 0).val() + g.at(0, 0).precision(),
                              g.at(1, 1).val() + g.at(1, 1).precision());
        if (2 * bound >= vd)
            t_deep = true;  // cancellation this deep cannot move the hull
        else
            throw;
    }
    if (t_deep || 2 * vt >= vd) {
        Rat half = Rat(vd) / 2;
        return {half, half};
    }
    return {Rat(vt), Rat(vd - vt)};
}

}  // namespace treechar
