#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "oracles.hpp"
#include "treechar/tree.hpp"

using namespace treechar;

namespace {
Vertex rand_vertex(std::mt19937_64& rng, const Int& p, long rmax) {
    auto verts = oracles::enumerate_ball(p, rmax);
    std::uniform_int_distribution<std::size_t> pick(0, verts.size() - 1);
    return verts[pick(rng)];
}
}  // namespace

TEST_CASE("canonicalization is idempotent and basis-invariant") {
    std::mt19937_64 rng(23);
    for (Int p : {Int(2), Int(3)}) {
        for (int iter = 0; iter < 200; ++iter) {
            Vertex v = rand_vertex(rng, p, 3);
            // change basis by a random element of GL2(O) (rows recombine): same class
            RatMat2 u = oracles::random_unimodular(rng, p);
            Rat r00 = u.a * v.m00() + u.b * v.m10();
            Rat r01 = u.a * v.m01() + u.b * v.m11();
            Rat r10 = u.c * v.m00() + u.d * v.m10();
            Rat r11 = u.c * v.m01() + u.d * v.m11();
            Vertex w = canonicalize_rows(p, r00, r01, r10, r11);
            CHECK(w == v);
            // p-power scaling: same class
            Vertex s = canonicalize_rows(p, v.m00() * p, v.m01() * p, v.m10() * p, v.m11() * p);
            CHECK(s == v);
            // idempotence
            Vertex c = canonicalize_rows(p, v.m00(), v.m01(), v.m10(), v.m11());
            CHECK(c == v);
        }
    }
}

TEST_CASE("action basics") {
    Int p = 2;
    Vertex o = base_vertex(p);
    RatMat2 id = RatMat2::identity();
    CHECK(act(id, o) == o);
    RatMat2 d1p{1, 0, 0, Rat(p)};
    Vertex v = act(d1p, o);
    CHECK(v == (Vertex{p, 0, 1, 0}));
    CHECK(distance(o, v) == 1);
    std::mt19937_64 rng(29);
    for (int iter = 0; iter < 100; ++iter) {
        auto g = oracles::random_group_element(rng, p);
        Vertex w = rand_vertex(rng, p, 3);
        CHECK(act(g, act(g.inverse(), w)) == w);
    }
}

TEST_CASE("padic action path agrees with the exact path") {
    std::mt19937_64 rng(31);
    for (Int p : {Int(2), Int(3)}) {
        for (int iter = 0; iter < 100; ++iter) {
            auto g = oracles::random_group_element(rng, p);
            Vertex w = rand_vertex(rng, p, 3);
            CHECK(act(g.to_padic(p), w) == act(g, w));
        }
    }
}

TEST_CASE("distance by elementary divisors") {
    std::mt19937_64 rng(37);
    for (Int p : {Int(2), Int(3)}) {
        Vertex o = base_vertex(p);
        CHECK(distance(o, o) == 0);
        for (long n = 1; n <= 4; ++n) {
            RatMat2 d{1, 0, 0, pow_rat(p, n)};
            CHECK(distance(o, act(d, o)) == n);
        }
        // triangle inequality and isometric action
        auto verts = oracles::enumerate_ball(p, 3);
        std::uniform_int_distribution<std::size_t> pick(0, verts.size() - 1);
        for (int iter = 0; iter < 300; ++iter) {
            Vertex a = verts[pick(rng)], b = verts[pick(rng)], c = verts[pick(rng)];
            CHECK(distance(a, c) <= distance(a, b) + distance(b, c));
            auto g = oracles::random_group_element(rng, p);
            CHECK(distance(act(g, a), act(g, b)) == distance(a, b));
        }
    }
}

TEST_CASE("geodesics") {
    Int p = 2;
    Vertex o = base_vertex(p);
    CHECK(geodesic(o, o) == std::vector<Vertex>{o});

    RatMat2 d2{1, 0, 0, Rat(pow_int(p, 2))};
    auto path = geodesic(o, act(d2, o));
    REQUIRE(path.size() == 3);
    CHECK(path[0] == o);
    CHECK(path[1] == (Vertex{p, 0, 1, 0}));
    CHECK(path[2] == (Vertex{p, 0, 2, 0}));

    std::mt19937_64 rng(41);
    auto verts = oracles::enumerate_ball(p, 3);
    std::uniform_int_distribution<std::size_t> pick(0, verts.size() - 1);
    for (int iter = 0; iter < 50; ++iter) {
        Vertex a = verts[pick(rng)], b = verts[pick(rng)];
        auto g1 = geodesic(a, b);
        auto g2 = oracles::bfs_geodesic(verts, a, b);
        CHECK(g1 == g2);
        REQUIRE(g1.size() == static_cast<std::size_t>(distance(a, b)) + 1);
        for (std::size_t i = 0; i + 1 < g1.size(); ++i) CHECK(distance(g1[i], g1[i + 1]) == 1);
        if (distance(a, b) % 2 == 0 && distance(a, b) > 0) {
            Vertex mid = g1[g1.size() / 2];
            CHECK(distance(a, mid) == distance(a, b) / 2);
        }
    }
}

TEST_CASE("balls: counts, acyclicity, oracle equality") {
    for (Int p : {Int(2), Int(3)}) {
        Vertex o = base_vertex(p);
        for (long r = 0; r <= (p == 2 ? 4 : 3); ++r) {
            TreeBall B = ball(o, r);
            Int expected = 1;
            if (r > 0) expected = 1 + (p + 1) * (pow_int(p, r) - 1) / (p - 1);
            CHECK(Int(static_cast<long>(B.vertices().size())) == expected);
            CHECK(B.edges().size() == B.vertices().size() - 1);  // no cycles
            auto oracle = oracles::enumerate_ball(p, r);
            std::vector<Vertex> got = B.vertices();
            std::sort(got.begin(), got.end());
            CHECK(got == oracle);
        }
    }
    TreeBall b1 = ball(base_vertex(Int(2)), 1);
    CHECK(b1.vertices().size() == 4);
    CHECK(b1.edges().size() == 3);
    TreeBall b2 = ball(base_vertex(Int(3)), 2);
    CHECK(b2.vertices().size() == 17);
}

TEST_CASE("local structure: p+1 neighbours inside the ball") {
    for (Int p : {Int(2), Int(3)}) {
        TreeBall B = ball(base_vertex(p), 3);
        for (const auto& v : B.vertices()) {
            if (B.center_distance(v) > 2) continue;
            auto ns = neighbors(v);
            CHECK(Int(static_cast<long>(ns.size())) == p + 1);
            for (const auto& n : ns) CHECK(B.contains(n));
        }
    }
}

TEST_CASE("standard apartment window") {
    Int p = 3;
    auto w0 = standard_apartment_window(p, 0);
    REQUIRE(w0.size() == 1);
    CHECK(w0[0] == base_vertex(p));
    auto w2 = standard_apartment_window(p, 2);
    REQUIRE(w2.size() == 5);
    CHECK(distance(w2.front(), w2.back()) == 4);
    for (std::size_t i = 0; i + 1 < w2.size(); ++i) CHECK(distance(w2[i], w2[i + 1]) == 1);
    // diag(1,p) translates the window by one step
    RatMat2 t{1, 0, 0, Rat(p)};
    for (std::size_t i = 0; i + 1 < w2.size(); ++i) CHECK(act(t, w2[i]) == w2[i + 1]);
}

TEST_CASE("type coloring: unit determinant preserves, diag(1,p) swaps") {
    std::mt19937_64 rng(43);
    Int p = 3;
    for (int iter = 0; iter < 100; ++iter) {
        Vertex v = rand_vertex(rng, p, 3);
        RatMat2 u = oracles::random_unimodular(rng, p);  // det a p-unit
        CHECK(vertex_type(act(u, v)) == vertex_type(v));
        RatMat2 t{1, 0, 0, Rat(p)};
        CHECK(vertex_type(act(t, v)) != vertex_type(v));
    }
}

TEST_CASE("oriented edges reverse") {
    Int p = 2;
    Vertex o = base_vertex(p);
    Vertex v = Vertex{p, 0, 1, 0};
    OrientedEdge e{o, v};
    CHECK(e.reverse().reverse() == e);
    CHECK(distance(e.tail, e.head) == 1);
}

TEST_CASE("dot emission mentions every vertex") {
    TreeBall B = ball(base_vertex(Int(2)), 1);
    std::string dot = B.dot({base_vertex(Int(2))}, {});
    for (const auto& v : B.vertices()) CHECK(dot.find(v.str()) != std::string::npos);
}
