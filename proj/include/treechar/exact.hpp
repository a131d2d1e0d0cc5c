#pragma once

#include <gmpxx.h>
#include <limits>
#include <stdexcept>
#include <string>

namespace treechar {

using Int = mpz_class;
using Rat = mpq_class;

// Sentinel valuation for exact zero.
inline constexpr long VAL_INF = std::numeric_limits<long>::max() / 4;

inline Int pow_int(const Int& base, long e) {
    if (e < 0) throw std::invalid_argument("pow_int: negative exponent");
    Int r;
    mpz_pow_ui(r.get_mpz_t(), base.get_mpz_t(), static_cast<unsigned long>(e));
    return r;
}

// p^e as a rational, e may be negative.
inline Rat pow_rat(const Int& p, long e) {
    if (e >= 0) return Rat(pow_int(p, e));
    return Rat(1, pow_int(p, -e));
}

inline long val_p(const Int& n, const Int& p) {
    if (n == 0) return VAL_INF;
    Int m = n, q, r;
    long v = 0;
    for (;;) {
        mpz_fdiv_qr(q.get_mpz_t(), r.get_mpz_t(), m.get_mpz_t(), p.get_mpz_t());
        if (r != 0) break;
        m = q;
        ++v;
    }
    return v;
}

inline long val_p(const Rat& x, const Int& p) {
    if (x == 0) return VAL_INF;
    return val_p(Int(x.get_num()), p) - val_p(Int(x.get_den()), p);
}

inline Rat canonical(const Rat& x) {
    Rat y = x;
    y.canonicalize();
    return y;
}

inline Int inv_mod(const Int& a, const Int& m) {
    Int r;
    if (mpz_invert(r.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t()) == 0)
        throw std::domain_error("inv_mod: not invertible");
    return r;
}

inline Int mod_nonneg(const Int& a, const Int& m) {
    Int r;
    mpz_fdiv_r(r.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t());
    return r;
}

// Residue of a p-integral rational modulo p^k, as an integer in [0, p^k).
inline Int residue_mod_pk(const Rat& x0, const Int& p, long k) {
    if (k < 0) throw std::invalid_argument("residue_mod_pk: negative k");
    if (k == 0) return 0;
    Rat x = canonical(x0);
    if (val_p(x, p) < 0) throw std::domain_error("residue_mod_pk: negative valuation");
    const Int pk = pow_int(p, k);
    Int num = mod_nonneg(Int(x.get_num()), pk);
    Int den = mod_nonneg(Int(x.get_den()), pk);
    return mod_nonneg(num * inv_mod(den, pk), pk);
}

// Canonical representative of x mod p^k·Z_p inside Z[1/p]; k may be any integer.
// Writes x ~ A / p^m with m >= 0 minimal; the class is determined by A mod p^{k+m}.
inline Rat reduce_mod_pk(const Rat& x, const Int& p, long k) {
    if (x == 0) return Rat(0);
    long v = val_p(x, p);
    if (v >= k) return Rat(0);
    long m = v < 0 ? -v : 0;
    Rat y = x * pow_rat(p, m);  // p-integral now (denominator prime to p)
    Int r = residue_mod_pk(y, p, k + m);
    return Rat(r) / pow_rat(p, m);
}

inline std::string rat_str(const Rat& x) { return x.get_str(); }

}  // namespace treechar
