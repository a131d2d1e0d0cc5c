#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "oracles.hpp"
#include "treechar/errors.hpp"
#include "treechar/padic.hpp"

using namespace treechar;

namespace {
PadicScalar S(const Int& p, const Rat& x, int prec = DEFAULT_PRECISION) {
    return PadicScalar::from_rational(p, x, prec);
}

Rat random_p_integral(std::mt19937_64& rng, const Int& p) {
    std::uniform_int_distribution<int> num(-40, 40);
    std::uniform_int_distribution<int> den(1, 40);
    for (;;) {
        int d = den(rng);
        if (val_p(Int(d), p) != 0) continue;
        return Rat(num(rng), d);
    }
}
}  // namespace

TEST_CASE("valuation basics") {
    Int p = 3;
    CHECK(S(p, Rat(p)).val() == 1);  // omega(varpi) = 1
    CHECK(S(p, 1).val() == 0);
    CHECK(PadicScalar::zero(p).is_zero());
    CHECK(PadicScalar::zero(p).val() == VAL_INF);
}

TEST_CASE("val is additive and reduction commutes with arithmetic") {
    std::mt19937_64 rng(7);
    for (Int p : {Int(2), Int(3), Int(5)}) {
        for (int iter = 0; iter < 200; ++iter) {
            Rat x = random_p_integral(rng, p), y = random_p_integral(rng, p);
            if (x == 0 || y == 0) continue;
            CHECK(S(p, x * y).val() == S(p, x).val() + S(p, y).val());
            PadicScalar prod = S(p, x) * S(p, y);
            CHECK(prod.equals(S(p, x * y)));
            long m = 5;
            if (val_p(x, p) >= 0 && val_p(y, p) >= 0 && val_p(x * y, p) >= 0) {
                CHECK(prod.residue_mod(m) == residue_mod_pk(x * y, p, m));
            }
            if (x + y != 0) {
                PadicScalar sum = S(p, x) + S(p, y);
                CHECK(sum.equals(S(p, x + y)));
            }
        }
    }
}

TEST_CASE("ring axioms at matching precision") {
    std::mt19937_64 rng(11);
    for (Int p : {Int(2), Int(3)}) {
        for (int iter = 0; iter < 100; ++iter) {
            Rat x = random_p_integral(rng, p), y = random_p_integral(rng, p),
                z = random_p_integral(rng, p);
            if (x + y == 0 || y + z == 0 || x + y + z == 0) continue;
            if (x == 0 || y == 0 || z == 0) continue;
            PadicScalar a = S(p, x), b = S(p, y), c = S(p, z);
            CHECK(((a + b) + c).equals(a + (b + c)));
            CHECK((a * (b + c)).equals(a * b + a * c));
            CHECK((a * b).equals(b * a));
        }
    }
}

TEST_CASE("exact scalars cancel exactly; inexact cancellation is an error") {
    Int p = 2;
    PadicScalar one = S(p, 1);
    CHECK((one - one).is_zero());  // exact zero flag, not a threshold
    PadicScalar in_one = PadicScalar::inexact(p, 0, 1, DEFAULT_PRECISION);
    CHECK_THROWS_AS(in_one - in_one, PrecisionExhausted);
    // deep-but-partial cancellation keeps the surviving digits
    PadicScalar a = PadicScalar::inexact(p, 0, Int(1) + pow_int(p, 20), DEFAULT_PRECISION);
    PadicScalar d = a - in_one;
    CHECK(d.val() == 20);
    CHECK(d.precision() == DEFAULT_PRECISION - 20);
    // mixing exact with inexact stays on the bounded-precision path
    PadicScalar m = S(p, 3) * in_one;
    CHECK_FALSE(m.is_exact());
    CHECK(m.val() == 0);
}

TEST_CASE("matrix inverse against the big-rational oracle") {
    std::mt19937_64 rng(13);
    for (Int p : {Int(2), Int(3), Int(5)}) {
        for (int iter = 0; iter < 50; ++iter) {
            auto g = oracles::random_group_element(rng, p);
            Matrix2 m = g.to_padic(p);
            Matrix2 mi = m.inverse();
            auto oracle = oracles::rational_inverse(g.a, g.b, g.c, g.d);
            CHECK(mi.at(0, 0).equals(S(p, oracle.a)));
            CHECK(mi.at(0, 1).equals(S(p, oracle.b)));
            CHECK(mi.at(1, 0).equals(S(p, oracle.c)));
            CHECK(mi.at(1, 1).equals(S(p, oracle.d)));
            Matrix2 prod = m * mi;
            CHECK(prod.equals(Matrix2::identity(p)));
        }
    }
}

TEST_CASE("matrix basics") {
    Int p = 5;
    Matrix2 id = Matrix2::identity(p);
    CHECK(id.inverse().equals(id));
    Matrix2 d = Matrix2::from_rational(p, 1, 0, 0, Rat(pow_int(p, 3)));
    CHECK(d.det().val() == 3);
    CHECK(d.det().equals(S(p, Rat(pow_int(p, 3)))));
}

TEST_CASE("singular matrix is rejected") {
    Int p = 3;
    Matrix2 s = Matrix2::from_rational(p, 1, 1, 1, 1);
    CHECK_THROWS_AS(s.det(), SingularMatrix);
}

TEST_CASE("newton polygon slopes") {
    Int p = 3;
    // diag(1, p^n) -> (0, n)
    for (long n = 1; n <= 4; ++n) {
        Matrix2 d = Matrix2::from_rational(p, 1, 0, 0, Rat(pow_int(p, n)));
        auto [s1, s2] = newton_valuations(d);
        CHECK(s1 == Rat(0));
        CHECK(s2 == Rat(n));
    }
    // [[a, b*varpi],[b, a]] with a=0, b=1: X^2 - 3, slopes 1/2, 1/2
    Matrix2 e = Matrix2::from_rational(p, 0, 3, 1, 0);
    auto [t1, t2] = newton_valuations(e);
    CHECK(t1 == Rat(1, 2));
    CHECK(t2 == Rat(1, 2));
    // diag(1, u), u a unit -> (0, 0)
    Matrix2 u = Matrix2::from_rational(p, 1, 0, 0, 4);
    auto [u1, u2] = newton_valuations(u);
    CHECK(u1 == Rat(0));
    CHECK(u2 == Rat(0));
}

TEST_CASE("square roots by Hensel lifting") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> num(1, 50);
    for (Int p : {Int(2), Int(3), Int(5)}) {
        for (int iter = 0; iter < 40; ++iter) {
            Rat x(num(rng), num(rng));
            Rat sq = x * x;
            PadicScalar s = S(p, sq);
            REQUIRE(s.is_square());
            PadicScalar r = s.sqrt();
            CHECK((r * r).equals(S(p, sq, r.precision())));
        }
        // p-times-a-square has odd valuation: not a square
        CHECK_FALSE(S(p, Rat(p) * 4).is_square());
    }
    CHECK_FALSE(S(Int(2), 3).is_square());   // 3 ≢ 1 mod 8
    CHECK_FALSE(S(Int(3), 2).is_square());   // 2 is not a QR mod 3
    CHECK(S(Int(2), 17).is_square());        // 17 ≡ 1 mod 8
}
