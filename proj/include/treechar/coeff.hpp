#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "treechar/errors.hpp"
#include "treechar/exact.hpp"
#include "treechar/linalg.hpp"
#include "treechar/pball.hpp"
#include "treechar/stepfn.hpp"
#include "treechar/tree.hpp"

namespace treechar {

// Representation model: the trivial representation on Q, or the smooth
// principal-series space of locally constant functions on P¹(Q_p). The level
// is the declared sufficient function resolution for fiber computations.
struct Model {
    enum Kind { Trivial, PrincipalSeries } kind = Trivial;
    long level = 2;

    static Model trivial() { return Model{Trivial, 0}; }
    static Model principal_series(long level) { return Model{PrincipalSeries, level}; }

    std::string str() const {
        return kind == Trivial ? "trivial"
                               : "principal-series-level-" + std::to_string(level);
    }
};

// Conjugator carrying the standard chart to the one adapted to x's lattice:
// U_x^{(e)} = h·U_o^{(e)}·h⁻¹ with h = Bᵀ for the canonical basis B of x.
inline RatMat2 chart_of(const Vertex& v) {
    return RatMat2{Rat(pow_int(v.p, v.a)), Rat(0), Rat(v.b), Rat(pow_int(v.p, v.c))};
}

// The congruence-model group U_F^{(e)}: for a vertex, matrices ≡ 1 mod p^{e+1}
// in the adapted basis; for an edge, the group generated by the endpoint groups.
// The generating set carries the four elementary directions at several depths:
// at p = 2 the depth-(e+1) generators alone do not generate topologically
// ((1+2E)² ≡ 1 mod 8 skips a level), so deeper representatives are included.
struct UGroup {
    Facet facet;
    long e = 0;
    std::vector<RatMat2> gens;

    static std::vector<RatMat2> vertex_gens(const Vertex& v, long e, long levels = 12) {
        const Int& p = v.p;
        RatMat2 h = chart_of(v);
        RatMat2 hi = h.inverse();
        std::vector<RatMat2> out;
        for (long l = 0; l < levels; ++l) {
            Rat pm = pow_rat(p, e + 1 + l);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    RatMat2 E{Rat(i == 0 && j == 0), Rat(i == 0 && j == 1),
                              Rat(i == 1 && j == 0), Rat(i == 1 && j == 1)};
                    RatMat2 hEhi = h * E * hi;
                    out.push_back(RatMat2{1 + pm * hEhi.a, pm * hEhi.b, pm * hEhi.c,
                                          1 + pm * hEhi.d});
                }
        }
        return out;
    }

    static UGroup vertex(const Vertex& v, long e, long levels = 12) {
        return UGroup{Facet(v), e, vertex_gens(v, e, levels)};
    }

    static UGroup edge(const UEdge& ed, long e, long levels = 12) {
        std::vector<RatMat2> gens = vertex_gens(ed.x, e, levels);
        auto gy = vertex_gens(ed.y, e, levels);
        gens.insert(gens.end(), gy.begin(), gy.end());
        return UGroup{Facet(ed), e, std::move(gens)};
    }

    static UGroup of(const Facet& f, long e, long levels = 12) {
        return std::holds_alternative<Vertex>(f) ? vertex(std::get<Vertex>(f), e, levels)
                                                 : edge(std::get<UEdge>(f), e, levels);
    }
};

// Adapted level-(e+1) partition of P¹ over a vertex: the standard grid cells
// carried through the chart conjugator. Its indicators span V^{U_x^{(e)}}.
inline std::vector<PBall> adapted_partition(const Vertex& v, long e) {
    Grid std_cells(v.p, e + 1);
    RatMat2 h = chart_of(v);
    std::vector<PBall> out;
    out.reserve(std_cells.size());
    for (const auto& c : std_cells.cells) out.push_back(mobius_image(h, c));
    return out;
}

// Explicit basis of V^{U_F^{(e)}}. For the trivial model the fiber is Q·1.
// Vertex fibers are spans of adapted-partition indicators; edge fibers are the
// intersections of the endpoint fibers, realized as connected components of the
// overlay of the two adapted partitions (the (U6) consequence).
struct InvariantSpace {
    Facet facet;
    long e = 0;
    Model model;
    // Vertex: one entry per cell, each a singleton list. Edge: one entry per
    // component, listing the x-partition cells whose union is the component.
    std::vector<std::vector<PBall>> pieces;
    long verified_level = 0;  // adaptive stabilization witness

    std::size_t dim() const { return model.kind == Model::Trivial ? 1 : pieces.size(); }

    std::vector<StepFunction> basis() const {
        const Int& p = prime();
        std::vector<StepFunction> out;
        if (model.kind == Model::Trivial) {
            out.push_back(StepFunction::constant(p, 1));
            return out;
        }
        for (const auto& piece : pieces) {
            long L = 1;
            for (const auto& b : piece) L = std::max(L, effective_level(b));
            Grid g(p, L);
            std::vector<Rat> vals(g.size(), Rat(0));
            for (std::size_t i = 0; i < g.size(); ++i)
                for (const auto& b : piece)
                    if (member(g.centers[i], b)) vals[i] = 1;
            out.push_back(StepFunction::from_grid(g, vals));
        }
        return out;
    }

    const Int& prime() const {
        return std::holds_alternative<Vertex>(facet) ? std::get<Vertex>(facet).p
                                                     : std::get<UEdge>(facet).x.p;
    }

    // Coordinates of f in this fiber; nullopt if f is not in the fiber.
    std::optional<std::vector<Rat>> coordinates(const StepFunction& f) const {
        if (model.kind == Model::Trivial) {
            // constants only
            auto v = f.constant_value_on(PBall::unit_disc(prime()));
            auto w = f.constant_value_on(PBall::coaffine(prime(), 0, 0));
            if (!v || !w || *v != *w) return std::nullopt;
            return std::vector<Rat>{*v};
        }
        std::vector<Rat> out;
        out.reserve(pieces.size());
        for (const auto& piece : pieces) {
            std::optional<Rat> val;
            for (const auto& b : piece) {
                auto c = f.constant_value_on(b);
                if (!c) return std::nullopt;
                if (!val)
                    val = *c;
                else if (*val != *c)
                    return std::nullopt;
            }
            out.push_back(*val);
        }
        return out;
    }

    StepFunction from_coordinates(const std::vector<Rat>& x) const {
        const Int& p = prime();
        if (model.kind == Model::Trivial) return StepFunction::constant(p, x.at(0));
        long L = 1;
        for (const auto& piece : pieces)
            for (const auto& b : piece) L = std::max(L, effective_level(b));
        Grid g(p, L);
        std::vector<Rat> vals(g.size(), Rat(0));
        for (std::size_t k = 0; k < pieces.size(); ++k)
            for (std::size_t i = 0; i < g.size(); ++i)
                for (const auto& b : pieces[k])
                    if (member(g.centers[i], b)) vals[i] = x[k];
        return StepFunction::from_grid(g, vals);
    }
};

namespace detail {

// Connected components of the bipartite overlay of two ball partitions.
inline std::vector<std::vector<int>> overlay_components(const Int& p,
                                                        const std::vector<PBall>& A,
                                                        const std::vector<PBall>& B) {
    long L = 1;
    for (const auto& b : A) L = std::max(L, effective_level(b));
    for (const auto& b : B) L = std::max(L, effective_level(b));
    Grid g(p, L);
    std::vector<int> a_of(g.size(), -1), b_of(g.size(), -1);
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t k = 0; k < A.size(); ++k)
            if (member(g.centers[i], A[k])) a_of[i] = static_cast<int>(k);
        for (std::size_t k = 0; k < B.size(); ++k)
            if (member(g.centers[i], B[k])) b_of[i] = static_cast<int>(k);
        if (a_of[i] < 0 || b_of[i] < 0) throw Error("overlay: not a partition");
    }
    // union-find over A-cells ∪ B-cells
    std::vector<int> parent(A.size() + B.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < g.size(); ++i) {
        int ra = find(a_of[i]);
        int rb = find(static_cast<int>(A.size()) + b_of[i]);
        if (ra != rb) parent[rb] = ra;
    }
    std::map<int, std::vector<int>> classes;
    for (std::size_t k = 0; k < A.size(); ++k) classes[find(static_cast<int>(k))].push_back(
        static_cast<int>(k));
    std::vector<std::vector<int>> out;
    for (auto& [root, members] : classes) out.push_back(members);
    return out;
}

}  // namespace detail

// Number of orbits of the group generated by gens acting on the level-L grid
// cells (used for the adaptive sufficient-level stabilization check).
inline std::size_t orbit_count_on_grid(const Int& p, const std::vector<RatMat2>& gens, long L) {
    Grid g(p, L);
    std::vector<int> parent(g.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& gen : gens) {
        RatMat2 gi = gen.inverse();
        for (std::size_t j = 0; j < g.size(); ++j) {
            std::size_t src = GridFn::locate(g, mobius(gi, g.centers[j]));
            int ra = find(static_cast<int>(j)), rb = find(static_cast<int>(src));
            if (ra != rb) parent[rb] = ra;
        }
    }
    std::set<int> roots;
    for (std::size_t j = 0; j < g.size(); ++j) roots.insert(find(static_cast<int>(j)));
    return roots.size();
}

// Explicit basis of V^{U_F^{(e)}} for the given model. With verify set, the
// sufficient-level stabilization check runs: the orbit count of the group on
// two consecutive grid levels must equal the fiber dimension.
inline InvariantSpace invariant_space(const Facet& F, long e, const Model& model,
                                      bool verify = false,
                                      std::size_t max_level_budget = 64) {
    InvariantSpace out;
    out.facet = F;
    out.e = e;
    out.model = model;
    if (model.kind == Model::Trivial) return out;
    if (std::holds_alternative<Vertex>(F)) {
        const Vertex& v = std::get<Vertex>(F);
        auto part = adapted_partition(v, e);
        for (auto& b : part) out.pieces.push_back({b});
        long L0 = 1;
        for (const auto& b : part) L0 = std::max(L0, effective_level(b));
        if (verify) {
            // adaptive check: orbit counts stabilize across consecutive levels
            auto gens = UGroup::vertex_gens(v, e);
            if (static_cast<std::size_t>(L0) + 1 > max_level_budget)
                throw BudgetExceeded("invariant_space: grid level");
            std::size_t n0 = orbit_count_on_grid(v.p, gens, L0);
            std::size_t n1 = orbit_count_on_grid(v.p, gens, L0 + 1);
            if (n0 != part.size() || n1 != part.size())
                throw Error("invariant_space: orbit count does not stabilize at the fiber dim");
            out.verified_level = L0 + 1;
        } else {
            out.verified_level = L0;
        }
        return out;
    }
    const UEdge& ed = std::get<UEdge>(F);
    auto A = adapted_partition(ed.x, e);
    auto B = adapted_partition(ed.y, e);
    auto comps = detail::overlay_components(ed.x.p, A, B);
    for (const auto& comp : comps) {
        std::vector<PBall> piece;
        for (int k : comp) piece.push_back(A[static_cast<std::size_t>(k)]);
        out.pieces.push_back(piece);
    }
    long L0 = 1;
    for (const auto& b : A) L0 = std::max(L0, effective_level(b));
    for (const auto& b : B) L0 = std::max(L0, effective_level(b));
    out.verified_level = L0;
    return out;
}

// g·f pointwise; the spec's act_on_step (the underlying V-action of §2.7).
inline StepFunction act_on_step(const RatMat2& g, const StepFunction& f) { return f.act(g); }

// Exact orbit average of f under the compact group generated by gens (all
// groups used here act through finite quotients on finite-level functions).
inline StepFunction average(const std::vector<RatMat2>& gens, const StepFunction& f,
                            std::size_t max_orbit = 100000) {
    std::set<StepFunction> orbit{f};
    std::vector<StepFunction> frontier{f};
    while (!frontier.empty()) {
        std::vector<StepFunction> next;
        for (const auto& h : frontier) {
            for (const auto& g : gens) {
                StepFunction img = h.act(g);
                if (orbit.insert(img).second) {
                    if (orbit.size() > max_orbit) throw BudgetExceeded("average: orbit size");
                    next.push_back(std::move(img));
                }
            }
        }
        frontier = std::move(next);
    }
    long L = 1;
    for (const auto& h : orbit) L = std::max(L, h.resolution());
    Grid g(f.prime(), L);
    std::vector<Rat> vals(g.size(), Rat(0));
    for (const auto& h : orbit)
        for (std::size_t i = 0; i < g.size(); ++i) vals[i] += h.evaluate(g.centers[i]);
    Rat inv = Rat(1) / Rat(static_cast<long>(orbit.size()));
    for (auto& v : vals) v *= inv;
    return StepFunction::from_grid(g, vals);
}

inline StepFunction average(const UGroup& K, const StepFunction& f,
                            std::size_t max_orbit = 100000) {
    return average(K.gens, f, max_orbit);
}

// (U7) consequence at the fiber level: V^{U_x} ∩ V^{U_y} ⊆ V^{U_z} for z on
// geod(x, y). A failed containment returns false.
inline bool geodesic_convexity_check(const Vertex& x, const Vertex& y, const Vertex& z, long e,
                                     const Model& model) {
    if (model.kind == Model::Trivial) return true;
    if (x == y) return z == x;
    auto A = adapted_partition(x, e);
    auto B = adapted_partition(y, e);
    auto comps = detail::overlay_components(x.p, A, B);
    auto zgens = UGroup::vertex_gens(z, e);
    for (const auto& comp : comps) {
        std::vector<PBall> piece;
        for (int k : comp) piece.push_back(A[static_cast<std::size_t>(k)]);
        InvariantSpace carrier;
        carrier.facet = Facet(x);
        carrier.e = e;
        carrier.model = model;
        carrier.pieces = {piece};
        StepFunction f = carrier.basis()[0];
        for (const auto& g : zgens)
            if (f.act(g) != f) return false;
    }
    return true;
}

}  // namespace treechar
