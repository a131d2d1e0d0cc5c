#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "treechar/errors.hpp"
#include "treechar/tree.hpp"

namespace treechar {

// The truncated building X^r inside an ambient window: the stabilization of
// B(o, r) under alternating convex-hull and subcomplex closure. On a tree with
// integer r this is the ball itself; both routes are available.
struct TruncatedBuilding {
    Facet origin;
    Rat requested_r = 0;
    long effective_r = 0;  // non-integer r floors to the realizable threshold
    std::vector<Vertex> verts;
    std::vector<UEdge> edges;
    std::string provenance;  // "fixpoint" or "ball-shortcut"

    bool contains(const Vertex& v) const {
        return std::binary_search(verts.begin(), verts.end(), v);
    }
    bool contains(const UEdge& e) const {
        return std::binary_search(edges.begin(), edges.end(), e);
    }
};

namespace detail {

struct FacetSet {
    std::set<Vertex> vs;
    std::set<UEdge> es;

    bool operator==(const FacetSet& o) const { return vs == o.vs && es == o.es; }
};

// Convex closure: add every geodesic (vertices and edges) between members.
inline FacetSet cnvx(const FacetSet& s) {
    FacetSet out = s;
    std::vector<Vertex> vs(s.vs.begin(), s.vs.end());
    for (std::size_t i = 0; i < vs.size(); ++i) {
        for (std::size_t j = i + 1; j < vs.size(); ++j) {
            auto path = geodesic(vs[i], vs[j]);
            for (std::size_t k = 0; k < path.size(); ++k) {
                out.vs.insert(path[k]);
                if (k + 1 < path.size()) out.es.insert(UEdge(path[k], path[k + 1]));
            }
        }
    }
    return out;
}

// Smallest subcomplex containing s: close edges under taking endpoints.
inline FacetSet simp(const FacetSet& s) {
    FacetSet out = s;
    for (const auto& e : s.es) {
        out.vs.insert(e.x);
        out.vs.insert(e.y);
    }
    return out;
}

}  // namespace detail

// Generic fixpoint route: iterate S <- simp(cnvx(S)) from S = B(o, r).
inline TruncatedBuilding truncated_building_fixpoint(const Facet& origin, const Rat& r,
                                                     const TreeBall& window,
                                                     std::size_t max_iter = 64) {
    long reff = static_cast<long>(mpz_get_si(Int(r.get_num() / r.get_den()).get_mpz_t()));
    if (Rat(reff) > r) --reff;  // floor for negative-leaning rationals
    if (reff < 0) throw Error("truncated_building: negative radius");
    if (window.radius() < reff + 1) throw Error("truncated_building: window must exceed r");
    TreeBall seed(origin, reff);
    detail::FacetSet s;
    for (const auto& v : seed.vertices()) s.vs.insert(v);
    for (const auto& e : seed.edges()) s.es.insert(e);
    for (std::size_t it = 0; it < max_iter; ++it) {
        detail::FacetSet next = detail::simp(detail::cnvx(s));
        if (next == s) break;
        s = next;
        if (it + 1 == max_iter) throw BudgetExceeded("truncated_building: fixpoint iterations");
    }
    TruncatedBuilding out;
    out.origin = origin;
    out.requested_r = r;
    out.effective_r = reff;
    out.verts.assign(s.vs.begin(), s.vs.end());
    out.edges.assign(s.es.begin(), s.es.end());
    out.provenance = "fixpoint";
    return out;
}

// Tree shortcut: X^r = B(o, r) exactly for integer r.
inline TruncatedBuilding truncated_building(const Facet& origin, const Rat& r,
                                            const TreeBall& window) {
    long reff = static_cast<long>(mpz_get_si(Int(r.get_num() / r.get_den()).get_mpz_t()));
    if (Rat(reff) > r) --reff;
    if (reff < 0) throw Error("truncated_building: negative radius");
    if (window.radius() < reff + 1) throw Error("truncated_building: window must exceed r");
    TreeBall b(origin, reff);
    TruncatedBuilding out;
    out.origin = origin;
    out.requested_r = r;
    out.effective_r = reff;
    out.verts = b.vertices();
    std::sort(out.verts.begin(), out.verts.end());
    out.edges = b.edges();
    std::sort(out.edges.begin(), out.edges.end());
    out.provenance = "ball-shortcut";
    return out;
}

// The in/out splitting of the window's facets relative to X^r.
struct FacetSplit {
    std::vector<Vertex> in_verts, out_verts;
    std::vector<UEdge> in_edges, out_edges;
};

inline FacetSplit split_facets(const TruncatedBuilding& xr, const TreeBall& window) {
    FacetSplit out;
    for (const auto& v : window.vertices())
        (xr.contains(v) ? out.in_verts : out.out_verts).push_back(v);
    for (const auto& e : window.edges())
        (xr.contains(e) ? out.in_edges : out.out_edges).push_back(e);
    return out;
}

}  // namespace treechar
