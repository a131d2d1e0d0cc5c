#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "treechar/chains.hpp"
#include "treechar/coeff.hpp"
#include "treechar/elements.hpp"
#include "treechar/errors.hpp"
#include "treechar/truncate.hpp"

namespace treechar {

// Exact trace of γ on V^{U_F^{(e)}}; γ must stabilize F. With indicator bases
// this is a permutation trace: the number of fixed fiber pieces.
inline Rat fiber_trace(const RatMat2& gamma, long e, const Facet& F, const Model& model) {
    if (model.kind == Model::Trivial) {
        // still insist the facet is stable
        if (std::holds_alternative<Vertex>(F)) {
            const Vertex& v = std::get<Vertex>(F);
            if (!(act(gamma, v) == v)) throw FacetNotFixed(facet_str(F));
        } else {
            const UEdge& ed = std::get<UEdge>(F);
            if (!(UEdge(act(gamma, ed.x), act(gamma, ed.y)) == ed))
                throw FacetNotFixed(facet_str(F));
        }
        return 1;
    }
    InvariantSpace fib = invariant_space(F, e, model);
    const Int& p = fib.prime();
    long L = 1;
    for (const auto& piece : fib.pieces)
        for (const auto& b : piece) {
            L = std::max(L, effective_level(b));
            L = std::max(L, effective_level(mobius_image(gamma, b)));
        }
    Grid g(p, L);
    // piece index per grid cell, before and after γ
    auto piece_of = [&](const PPoint& x) -> int {
        for (std::size_t k = 0; k < fib.pieces.size(); ++k)
            for (const auto& b : fib.pieces[k])
                if (member(x, b)) return static_cast<int>(k);
        return -1;
    };
    // stability of the facet
    if (std::holds_alternative<Vertex>(F)) {
        const Vertex& v = std::get<Vertex>(F);
        if (!(act(gamma, v) == v)) throw FacetNotFixed(facet_str(F));
    } else {
        const UEdge& ed = std::get<UEdge>(F);
        if (!(UEdge(act(gamma, ed.x), act(gamma, ed.y)) == ed))
            throw FacetNotFixed(facet_str(F));
    }
    // γ permutes the pieces; count the fixed ones via one sample point each
    long fixed = 0;
    for (std::size_t k = 0; k < fib.pieces.size(); ++k) {
        PPoint sample = PPoint::infinity();
        bool found = false;
        for (std::size_t i = 0; i < g.size() && !found; ++i)
            if (member(g.centers[i], fib.pieces[k][0])) {
                sample = g.centers[i];
                found = true;
            }
        if (!found) throw Error("fiber_trace: empty piece");
        int img = piece_of(mobius(gamma, sample));
        if (img == static_cast<int>(k)) ++fixed;
    }
    return Rat(fixed);
}

// Σ over γ-stable facets inside X^r of signed fiber traces: vertices count
// +trace, pointwise-fixed edges −trace, orientation-reversed stable edges
// +trace (the (−1)^{q−dim F(γ)} convention).
inline Rat fixed_facet_sum(const RatMat2& gamma, long e, const TruncatedBuilding& xr,
                           const Model& model) {
    const Int& p = std::holds_alternative<Vertex>(xr.origin)
                       ? std::get<Vertex>(xr.origin).p
                       : std::get<UEdge>(xr.origin).x.p;
    auto cls = classify(gamma, p);
    if (!cls.is_compact()) throw NotCompact("fixed_facet_sum");
    Rat total = 0;
    for (const auto& v : xr.verts)
        if (act(gamma, v) == v) total += fiber_trace(gamma, e, Facet(v), model);
    for (const auto& ed : xr.edges) {
        Vertex ix = act(gamma, ed.x), iy = act(gamma, ed.y);
        if (ix == ed.x && iy == ed.y)
            total -= fiber_trace(gamma, e, Facet(ed), model);
        else if (ix == ed.y && iy == ed.x)
            total += fiber_trace(gamma, e, Facet(ed), model);
    }
    return total;
}

struct HopfResult {
    Rat value = 0;             // Σ_q (−1)^q trace(T_γ ∘ avg_K ∘ Q̄_q)
    Rat fiber_value = 0;       // trace(γ·π(K) on the model fiber V^{U_o^{(e)}})
    bool internal_agreement = false;
    Rat trace_q0 = 0, trace_q1 = 0;        // traces of T_γ avg_K Q̄_q
    Rat plain_q0 = 0, plain_q1 = 0;        // traces of T_γ Q_q (fixed-facet side)
    Rat bar_q0 = 0, bar_q1 = 0;            // traces of T_γ Q̄_q (transfer side)
};

// Hopf-trace evaluation of the character via the modified truncation operators
// (Theorem "character formula for functions" with f = 1_{γK}/vol(K), K =
// U_origin^{(e)}). All traces exact.
inline HopfResult hopf_character(const ChainSpace& cs, const RatMat2& gamma,
                                 const TruncatedBuilding& xr) {
    auto cls = classify(gamma, cs.prime());
    if (!cls.is_compact()) throw NotCompact("hopf_character");
    auto D = build_decomposition(cs, gamma, xr, /*average_over_K=*/true);
    auto M = modified_truncation(cs, xr, D);
    QMat T0 = cs.action0(gamma).to_mat();
    QMat T1 = cs.action1(gamma).to_mat();
    auto K = UGroup::of(cs.window().center(), cs.depth());
    QMat A0 = cs.average_operator(K.gens, 0);
    QMat A1 = cs.average_operator(K.gens, 1);

    HopfResult out;
    out.trace_q0 = (T0 * (A0 * M.qbar0)).trace();
    out.trace_q1 = (T1 * (A1 * M.qbar1)).trace();
    out.value = out.trace_q0 - out.trace_q1;
    out.plain_q0 = (T0 * M.q0).trace();
    out.plain_q1 = (T1 * M.q1).trace();
    out.bar_q0 = (T0 * M.qbar0).trace();
    out.bar_q1 = (T1 * M.qbar1).trace();
    out.fiber_value = fiber_trace(gamma, cs.depth(), cs.window().center(), cs.model());
    out.internal_agreement = out.value == out.fiber_value;
    return out;
}

// One cell of the independence scan.
struct ScanCell {
    long e = 0, r = 0;
    Rat value = 0;
};

struct ScanTable {
    std::vector<ScanCell> cells;
    std::optional<long> e_frontier;  // smallest e with a constant row suffix
    std::optional<long> r_frontier;  // smallest r with a constant column suffix
    std::optional<Rat> plateau;      // stabilized value when both exist

    Rat at(long e, long r) const {
        for (const auto& c : cells)
            if (c.e == e && c.r == r) return c.value;
        throw Error("scan cell missing");
    }
};

// Stabilization frontiers: the largest-corner value propagated backwards.
inline void compute_frontiers(ScanTable& t, const std::vector<long>& es,
                              const std::vector<long>& rs);

// fixed_facet_sum tabulated over the (e, r) grid with stabilization frontiers.
inline ScanTable independence_scan(const RatMat2& gamma, const Model& model,
                                   const std::vector<long>& es, const std::vector<long>& rs,
                                   const TreeBall& window, const Facet& origin) {
    ScanTable t;
    for (long e : es)
        for (long r : rs) {
            auto xr = truncated_building(origin, Rat(r), window);
            t.cells.push_back({e, r, fixed_facet_sum(gamma, e, xr, model)});
        }
    compute_frontiers(t, es, rs);
    return t;
}

inline void compute_frontiers(ScanTable& t, const std::vector<long>& es,
                              const std::vector<long>& rs) {
    Rat corner = t.at(es.back(), rs.back());
    std::optional<long> ef, rf;
    for (std::size_t i = es.size(); i-- > 0;) {
        bool row_const = true;
        for (long r : rs) row_const = row_const && t.at(es[i], r) == t.at(es[i], rs.back());
        bool suffix_ok = true;
        for (std::size_t j = i; j < es.size(); ++j)
            suffix_ok = suffix_ok && t.at(es[j], rs.back()) == corner;
        if (row_const && suffix_ok)
            ef = es[i];
        else
            break;
    }
    for (std::size_t i = rs.size(); i-- > 0;) {
        bool col_const = true;
        for (std::size_t j = i; j < rs.size(); ++j)
            col_const = col_const && t.at(es.back(), rs[j]) == corner;
        if (col_const)
            rf = rs[i];
        else
            break;
    }
    t.e_frontier = ef;
    t.r_frontier = rf;
    if (ef && rf) t.plateau = corner;
}

// Perturbation subscan: γ′ = γ·u for u deep in the congruence filtration has
// the same fixed set and the same scan row (Lemma on T^∘/T^∘∘).
inline bool perturbation_constancy(const RatMat2& gamma, const Model& model, long e, long r,
                                   const TreeBall& window, const Facet& origin, long depth) {
    auto xr = truncated_building(origin, Rat(r), window);
    Rat base = fixed_facet_sum(gamma, e, xr, model);
    Rat pd = pow_rat(std::holds_alternative<Vertex>(origin) ? std::get<Vertex>(origin).p
                                                            : std::get<UEdge>(origin).x.p,
                     depth);
    std::vector<RatMat2> us = {
        RatMat2{1 + pd, 0, 0, 1},
        RatMat2{1, pd, 0, 1},
        RatMat2{1, 0, pd, 1},
        RatMat2{1 + pd, pd, 0, 1},
    };
    for (const auto& u : us) {
        if (fixed_facet_sum(gamma * u, e, xr, model) != base) return false;
    }
    return true;
}

// Full report for one element: the three evaluators plus scan tables.
struct CharacterReport {
    std::string element;
    ElementClass cls;
    std::string model;
    long e = 0, r = 0, window_radius = 0;
    Rat fixed_facet_value = 0;
    Rat hopf_value = 0;
    Rat fiber_value = 0;
    bool three_way_agreement = false;
    ScanTable scan;
    std::vector<std::pair<std::string, Rat>> contributions;  // facet -> signed trace
};

inline CharacterReport character_report(const RatMat2& gamma, const Model& model, long e, long r,
                                        const TreeBall& window, const Facet& origin,
                                        const std::vector<long>& scan_es,
                                        const std::vector<long>& scan_rs) {
    CharacterReport rep;
    rep.element = gamma.str();
    const Int& p = std::holds_alternative<Vertex>(origin) ? std::get<Vertex>(origin).p
                                                          : std::get<UEdge>(origin).x.p;
    rep.cls = classify(gamma, p);
    rep.model = model.str();
    rep.e = e;
    rep.r = r;
    rep.window_radius = window.radius();
    auto xr = truncated_building(origin, Rat(r), window);
    rep.fixed_facet_value = fixed_facet_sum(gamma, e, xr, model);
    for (const auto& v : xr.verts)
        if (act(gamma, v) == v)
            rep.contributions.emplace_back(v.str(), fiber_trace(gamma, e, Facet(v), model));
    for (const auto& ed : xr.edges) {
        Vertex ix = act(gamma, ed.x), iy = act(gamma, ed.y);
        if (ix == ed.x && iy == ed.y)
            rep.contributions.emplace_back(ed.str(), -fiber_trace(gamma, e, Facet(ed), model));
        else if (ix == ed.y && iy == ed.x)
            rep.contributions.emplace_back(ed.str(), fiber_trace(gamma, e, Facet(ed), model));
    }
    ChainSpace cs(p, model, e, window);
    auto hopf = hopf_character(cs, gamma, xr);
    rep.hopf_value = hopf.value;
    rep.fiber_value = hopf.fiber_value;
    rep.three_way_agreement =
        rep.fixed_facet_value == rep.hopf_value && rep.hopf_value == rep.fiber_value;
    rep.scan = independence_scan(gamma, model, scan_es, scan_rs, window, origin);
    return rep;
}

}  // namespace treechar
