#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "oracles.hpp"
#include "treechar/character.hpp"

using namespace treechar;

TEST_CASE("fiber traces: trivial model, identity, and the finite-quotient oracle") {
    Int p = 2;
    Model ps = Model::principal_series(2);
    Facet o(base_vertex(p));
    // trivial model: always 1
    CHECK(fiber_trace(RatMat2{1, 0, 0, 3}, 1, o, Model::trivial()) == 1);
    // identity on the principal series: the fiber dimension
    CHECK(fiber_trace(RatMat2::identity(), 1, o, ps) == Rat(6));  // 2^2 + 2^1
    // diag(1, 1+2) at e=1: pinned by the finite-quotient trace oracle
    CHECK(oracles::diag_trace_oracle(p, Rat(3), 2) == 4);
    CHECK(fiber_trace(RatMat2{1, 0, 0, 3}, 1, o, ps) == Rat(4));
    // oracle agreement across depths and primes for diagonal elements
    for (Int q : {Int(2), Int(3)}) {
        for (long e = 0; e <= 2; ++e) {
            Rat u = Rat(1) + Rat(q);
            CHECK(fiber_trace(RatMat2{1, 0, 0, u}, e, Facet(base_vertex(q)), ps) ==
                  Rat(oracles::diag_trace_oracle(q, u, e + 1)));
            Rat u2 = Rat(1) + Rat(q * q);
            CHECK(fiber_trace(RatMat2{1, 0, 0, u2}, e, Facet(base_vertex(q)), ps) ==
                  Rat(oracles::diag_trace_oracle(q, u2, e + 1)));
        }
    }
    // non-stable facet is rejected
    CHECK_THROWS_AS(fiber_trace(RatMat2{1, 0, 0, Rat(p)}, 0, o, ps), FacetNotFixed);
}

TEST_CASE("fiber trace values stabilize at the closed-form plateau") {
    for (Int p : {Int(2), Int(3)}) {
        Model ps = Model::principal_series(2);
        Facet o(base_vertex(p));
        RatMat2 g1{1, 0, 0, Rat(1) + Rat(p)};
        CHECK(fiber_trace(g1, 0, o, ps) == Rat(p + 1));
        CHECK(fiber_trace(g1, 1, o, ps) == Rat(2 * p));
        CHECK(fiber_trace(g1, 2, o, ps) == Rat(2 * p));  // plateau from e = 1
        RatMat2 g2{1, 0, 0, Rat(1) + Rat(p * p)};
        CHECK(fiber_trace(g2, 1, o, ps) == Rat(p * p + p));
        CHECK(fiber_trace(g2, 2, o, ps) == Rat(2 * p * p));
        CHECK(fiber_trace(g2, 3, o, ps) == Rat(2 * p * p));  // plateau from e = 2
    }
}

TEST_CASE("trivial model: every evaluator returns exactly 1") {
    for (Int p : {Int(2), Int(3)}) {
        TreeBall w = ball(base_vertex(p), 3);
        std::vector<RatMat2> gammas = {
            RatMat2{1, 0, 0, Rat(1) + Rat(p)},       // compact non-elliptic
            RatMat2{1, Rat(p), 1, 1},                // elliptic, fixes a vertex
        };
        for (const auto& g : gammas) {
            for (long e = 0; e <= 1; ++e)
                for (long r = 1; r <= 2; ++r) {
                    auto xr = truncated_building(Facet(base_vertex(p)), Rat(r), w);
                    CHECK(fixed_facet_sum(g, e, xr, Model::trivial()) == 1);
                }
            ChainSpace cs(p, Model::trivial(), 0, w);
            auto xr = truncated_building(Facet(base_vertex(p)), Rat(2), w);
            auto h = hopf_character(cs, g, xr);
            CHECK(h.value == 1);
            CHECK(h.fiber_value == 1);
            CHECK(h.internal_agreement);
        }
    }
}

TEST_CASE("PGL2 barycenter element: reversal sign gives 1 in the trivial model") {
    Int p = 2;
    UEdge ce(base_vertex(p), Vertex{p, 0, 1, 0});
    TreeBall w(Facet(ce), 2);
    RatMat2 g{0, 1, Rat(p), 0};
    auto xr = truncated_building(Facet(ce), Rat(1), w);
    CHECK(fixed_facet_sum(g, 0, xr, Model::trivial()) == 1);
    ChainSpace cs(p, Model::trivial(), 0, w);
    auto h = hopf_character(cs, g, xr);
    CHECK(h.value == 1);
    CHECK(h.internal_agreement);
    // principal series: elliptic vanishing, all three routes
    ChainSpace cs2(p, Model::principal_series(2), 1, w);
    auto h2 = hopf_character(cs2, g, xr);
    CHECK(fixed_facet_sum(g, 1, xr, Model::principal_series(2)) == 0);
    CHECK(h2.value == 0);
    CHECK(h2.fiber_value == 0);
}

TEST_CASE("frozen scan table for diag(1,3) at p=2") {
    Int p = 2;
    TreeBall w = ball(base_vertex(p), 4);
    Model ps = Model::principal_series(2);
    RatMat2 g{1, 0, 0, 3};
    auto t = independence_scan(g, ps, {0, 1, 2}, {0, 1, 2, 3}, w, Facet(base_vertex(p)));
    CHECK(t.at(0, 0) == 3);  // A(0) at r=0: the origin fiber alone
    CHECK(t.at(0, 1) == 4);
    CHECK(t.at(1, 0) == 4);
    for (long e = 1; e <= 2; ++e)
        for (long r = 0; r <= 3; ++r) CHECK(t.at(e, r) == 4);
    REQUIRE(t.plateau.has_value());
    CHECK(*t.plateau == 4);
    CHECK(*t.e_frontier <= 1);
    // the plateau value is the deep fiber trace (the character value)
    CHECK(*t.plateau == fiber_trace(g, 2, Facet(base_vertex(p)), ps));
}

TEST_CASE("three-way agreement on the plateau") {
    Int p = 2;
    TreeBall w = ball(base_vertex(p), 3);
    Model ps = Model::principal_series(2);
    struct Case {
        RatMat2 g;
        long e, r;
        Rat expect;
    };
    std::vector<Case> cases = {
        {RatMat2{1, 0, 0, 3}, 1, 2, Rat(4)},       // diag(1,1+p): 2p
        {RatMat2{1, 2, 1, 1}, 1, 2, Rat(0)},       // elliptic: principal series vanishes
    };
    for (const auto& c : cases) {
        auto xr = truncated_building(Facet(base_vertex(p)), Rat(c.r), w);
        Rat s = fixed_facet_sum(c.g, c.e, xr, ps);
        ChainSpace cs(p, ps, c.e, w);
        auto h = hopf_character(cs, c.g, xr);
        CHECK(s == c.expect);
        CHECK(h.value == c.expect);
        CHECK(h.fiber_value == c.expect);
        // trace transfer: trace(T_γ Q_q) = trace(T_γ Q̄_q) for q = 0, 1
        CHECK(h.plain_q0 == h.bar_q0);
        CHECK(h.plain_q1 == h.bar_q1);
        // the fixed-facet sum is the alternating plain trace
        CHECK(s == h.plain_q0 - h.plain_q1);
    }
}

TEST_CASE("diag(1,1+p^2): deeper frontier, plateau 2p^2") {
    Int p = 2;
    TreeBall w = ball(base_vertex(p), 4);
    Model ps = Model::principal_series(2);
    RatMat2 g{1, 0, 0, 5};
    auto t = independence_scan(g, ps, {0, 1, 2}, {0, 1, 2, 3}, w, Facet(base_vertex(p)));
    CHECK(t.at(1, 0) == 6);
    CHECK(t.at(1, 1) == 8);
    for (long r = 0; r <= 3; ++r) CHECK(t.at(2, r) == 8);
    REQUIRE(t.plateau.has_value());
    CHECK(*t.plateau == 8);
    CHECK(*t.plateau == fiber_trace(g, 3, Facet(base_vertex(p)), ps));
}

TEST_CASE("perturbation subscan: deep congruence twists leave the row unchanged") {
    for (Int p : {Int(2), Int(3)}) {
        TreeBall w = ball(base_vertex(p), 3);
        Model ps = Model::principal_series(2);
        RatMat2 g{1, 0, 0, Rat(1) + Rat(p)};
        CHECK(perturbation_constancy(g, ps, 1, 2, w, Facet(base_vertex(p)), 8));
    }
}

TEST_CASE("periodicity: fiber traces constant along torus translates") {
    std::mt19937_64 rng(601);
    for (Int p : {Int(2), Int(3)}) {
        Model ps = Model::principal_series(2);
        RatMat2 g{1, 0, 0, Rat(1) + Rat(p)};
        RatMat2 tau{1, 0, 0, Rat(p)};  // translation of the centralizer torus
        TreeBall w = ball(base_vertex(p), 3);
        auto fs = fixed_set(g, p, w);
        std::uniform_int_distribution<std::size_t> pick(0, fs.fixed_vertices.size() - 1);
        int samples = 0;
        while (samples < 25) {
            Vertex x = fs.fixed_vertices[pick(rng)];
            Vertex tx = act(tau, x);
            long e = samples % 2;
            CHECK(fiber_trace(g, e, Facet(x), ps) == fiber_trace(g, e, Facet(tx), ps));
            ++samples;
        }
        // edges too
        std::uniform_int_distribution<std::size_t> picke(0, fs.stable_edges.size() - 1);
        for (int i = 0; i < 10; ++i) {
            UEdge ed = fs.stable_edges[picke(rng)].edge;
            UEdge ted(act(tau, ed.x), act(tau, ed.y));
            CHECK(fiber_trace(g, 0, Facet(ed), ps) == fiber_trace(g, 0, Facet(ted), ps));
        }
    }
}

TEST_CASE("character report assembles the full picture") {
    Int p = 2;
    TreeBall w = ball(base_vertex(p), 3);
    Model ps = Model::principal_series(2);
    auto rep = character_report(RatMat2{1, 0, 0, 3}, ps, 1, 2, w, Facet(base_vertex(p)),
                                {0, 1}, {0, 1, 2});
    CHECK(rep.three_way_agreement);
    CHECK(rep.fixed_facet_value == 4);
    CHECK(rep.cls.tag == ElementTag::CompactNonElliptic);
    // contribution table: signed entries reproduce the sum
    Rat total = 0;
    for (const auto& [f, v] : rep.contributions) total += v;
    CHECK(total == rep.fixed_facet_value);
}
