#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "treechar/errors.hpp"
#include "treechar/exact.hpp"
#include "treechar/padic.hpp"
#include "treechar/tree.hpp"

namespace treechar {

enum class ElementTag { Elliptic, CompactNonElliptic, NonCompact };

inline std::string tag_str(ElementTag t) {
    switch (t) {
        case ElementTag::Elliptic: return "elliptic";
        case ElementTag::CompactNonElliptic: return "compact-non-elliptic";
        case ElementTag::NonCompact: return "non-compact";
    }
    return "?";
}

struct ElementClass {
    ElementTag tag = ElementTag::Elliptic;
    Rat translation_length = 0;      // 0 iff tag != NonCompact
    std::optional<long> fixed_depth; // r* for compact-non-elliptic: u ≡ 1 + α ϖ^{r*}
    bool barycentric = false;        // compact with half-integral slopes: fixes only a barycenter
    bool empirical_agreement = true; // analytic classification vs window search

    bool is_compact() const { return tag != ElementTag::NonCompact; }
};

// Analytic classification by Newton-polygon slopes, cross-checked against an
// empirical fixed-point search in a small window.
inline ElementClass classify(const Matrix2& gamma, long check_radius = 3) {
    const Int& p = gamma.prime();
    PadicScalar tr = [&] {
        try {
            return gamma.trace();
        } catch (const PrecisionExhausted&) {
            return PadicScalar::zero(p);  // deep cancellation: treat as zero for disc test
        }
    }();
    // regular semisimple: discriminant tr² − 4·det nonzero
    PadicScalar disc = [&] {
        try {
            return tr * tr - PadicScalar::from_rational(p, 4) * gamma.det();
        } catch (const PrecisionExhausted&) {
            throw NotRegular("discriminant vanishes at working precision");
        }
    }();
    if (disc.is_zero()) throw NotRegular("zero discriminant");

    auto [s1, s2] = newton_valuations(gamma);
    ElementClass out;
    if (s1 != s2) {
        out.tag = ElementTag::NonCompact;
        out.translation_length = s2 - s1;
        if (out.translation_length.get_den() != 1)
            throw Error("classify: non-integral translation length");
    } else if (s1.get_den() != 1) {
        out.tag = ElementTag::Elliptic;  // half-integral slopes: barycenter type
        out.barycentric = true;
    } else if (!disc.is_square()) {
        out.tag = ElementTag::Elliptic;
    } else {
        out.tag = ElementTag::CompactNonElliptic;
        long vdisc = disc.val();
        long vdet = gamma.det().val();
        out.fixed_depth = (vdisc - vdet) / 2;
    }

    // empirical cross-check in a window around the base vertex
    long radius = check_radius;
    if (out.fixed_depth) radius = std::max(radius, *out.fixed_depth + 1);
    TreeBall window = ball(base_vertex(p), radius);
    bool found_fixed = false, found_stable_edge = false;
    for (const auto& v : window.vertices()) {
        if (act(gamma, v) == v) {
            found_fixed = true;
            break;
        }
    }
    if (!found_fixed) {
        for (const auto& e : window.edges()) {
            Vertex ix = act(gamma, e.x), iy = act(gamma, e.y);
            if (UEdge(ix, iy) == e) {
                found_stable_edge = true;
                break;
            }
        }
    }
    bool empirically_compact = found_fixed || found_stable_edge;
    out.empirical_agreement = out.is_compact() == empirically_compact;
    return out;
}

inline ElementClass classify(const RatMat2& gamma, const Int& p, long check_radius = 3) {
    return classify(gamma.to_padic(p), check_radius);
}

// Stable edge with its orientation behaviour under γ.
struct StableEdge {
    UEdge edge;
    bool reversed = false;  // orientation-reversing: fixes only the barycenter
};

struct FixedSet {
    long window_radius = 0;
    std::vector<Vertex> fixed_vertices;
    std::vector<StableEdge> stable_edges;

    bool vertex_fixed(const Vertex& v) const {
        return std::binary_search(fixed_vertices.begin(), fixed_vertices.end(), v);
    }
};

// Exact fixed/stable facets within the window by direct action.
inline FixedSet fixed_set(const Matrix2& gamma, const TreeBall& window) {
    FixedSet out;
    out.window_radius = window.radius();
    std::map<Vertex, Vertex> image;
    for (const auto& v : window.vertices()) image[v] = act(gamma, v);
    for (const auto& v : window.vertices())
        if (image[v] == v) out.fixed_vertices.push_back(v);
    std::sort(out.fixed_vertices.begin(), out.fixed_vertices.end());
    for (const auto& e : window.edges()) {
        const Vertex& ix = image[e.x];
        const Vertex& iy = image[e.y];
        if (ix == e.x && iy == e.y)
            out.stable_edges.push_back({e, false});
        else if (ix == e.y && iy == e.x)
            out.stable_edges.push_back({e, true});
    }
    return out;
}

inline FixedSet fixed_set(const RatMat2& gamma, const Int& p, const TreeBall& window) {
    return fixed_set(gamma.to_padic(p), window);
}

// Generators for the connected centralizer torus T = Q_p[γ]^× acting through
// Z_p[γ]: the invertible aI + bγ with a, b ∈ [0, p²), the deep unit directions
// 1 + p^j γ (needed at p = 2, where squaring skips a congruence level), and
// all their inverses.
inline std::vector<Matrix2> torus_generators(const Matrix2& gamma) {
    const Int& p = gamma.prime();
    const Int p2 = p * p;
    std::vector<Matrix2> out;
    auto push = [&](const PadicScalar& as, const PadicScalar& bs) {
        Matrix2 t(as + bs * gamma.at(0, 0), bs * gamma.at(0, 1), bs * gamma.at(1, 0),
                  as + bs * gamma.at(1, 1));
        try {
            t.det();
        } catch (const SingularMatrix&) {
            return;
        } catch (const PrecisionExhausted&) {
            return;
        }
        out.push_back(t);
        out.push_back(t.inverse());
    };
    for (Int a = 0; a < p2; ++a)
        for (Int b = 0; b < p2; ++b) {
            if (a == 0 && b == 0) continue;
            push(PadicScalar::from_rational(p, Rat(a)), PadicScalar::from_rational(p, Rat(b)));
        }
    for (long j = 2; j <= 10; ++j)
        push(PadicScalar::from_rational(p, 1), PadicScalar::from_rational(p, pow_rat(p, j)));
    return out;
}

// T-orbit of the ball B(o, r) intersected with the window (the open tube of
// §8.2 at desk scale). o is the lexicographically smallest fixed vertex.
inline std::vector<Vertex> tube(const Matrix2& gamma, long r, const TreeBall& window) {
    ElementClass cls = classify(gamma);
    if (!cls.is_compact()) throw NotCompact("tube");
    FixedSet fs = fixed_set(gamma, window);
    if (fs.fixed_vertices.empty() && fs.stable_edges.empty())
        throw NotCompact("tube: no fixed facet in window");
    Facet origin = fs.fixed_vertices.empty() ? Facet(fs.stable_edges.front().edge)
                                             : Facet(fs.fixed_vertices.front());
    TreeBall seed(origin, r);
    std::set<Vertex> result;
    std::vector<Vertex> frontier;
    for (const auto& v : seed.vertices())
        if (window.contains(v)) {
            result.insert(v);
            frontier.push_back(v);
        }
    auto gens = torus_generators(gamma);
    while (!frontier.empty()) {
        std::vector<Vertex> next;
        for (const auto& v : frontier) {
            for (const auto& t : gens) {
                Vertex w = act(t, v);
                if (!window.contains(w)) continue;
                if (result.insert(w).second) next.push_back(w);
            }
        }
        frontier = std::move(next);
    }
    return {result.begin(), result.end()};
}

// Facets with torus-orbit labels; orbits are computed in a margin-enlarged
// window and restricted back, with any boundary ambiguity flagged.
struct FundamentalDomain {
    std::vector<Facet> representatives;          // lexicographically smallest per orbit
    std::map<std::string, int> orbit_of;         // facet-string -> orbit id
    bool boundary_ambiguity = false;
};

inline FundamentalDomain fundamental_domain(const Matrix2& gamma, const TreeBall& window) {
    ElementClass cls = classify(gamma);
    if (!cls.is_compact()) throw NotCompact("fundamental_domain");
    TreeBall enlarged(window.center(), window.radius() + 2);
    FixedSet fs = fixed_set(gamma, enlarged);

    std::vector<Facet> facets;
    for (const auto& v : fs.fixed_vertices) facets.push_back(Facet(v));
    for (const auto& e : fs.stable_edges) facets.push_back(Facet(e.edge));

    std::map<std::string, int> idx;
    for (std::size_t i = 0; i < facets.size(); ++i) idx[facet_str(facets[i])] = static_cast<int>(i);

    // union-find over facets under the torus generator action
    std::vector<int> parent(facets.size());
    for (std::size_t i = 0; i < facets.size(); ++i) parent[i] = static_cast<int>(i);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    auto gens = torus_generators(gamma);
    auto apply = [&](const Matrix2& t, const Facet& f) -> std::optional<Facet> {
        try {
            if (std::holds_alternative<Vertex>(f)) {
                Vertex w = act(t, std::get<Vertex>(f));
                if (!enlarged.contains(w)) return std::nullopt;
                return Facet(w);
            }
            const UEdge& e = std::get<UEdge>(f);
            UEdge w(act(t, e.x), act(t, e.y));
            if (!enlarged.contains(w)) return std::nullopt;
            return Facet(w);
        } catch (const PrecisionExhausted&) {
            return std::nullopt;
        }
    };
    for (std::size_t i = 0; i < facets.size(); ++i) {
        for (const auto& t : gens) {
            auto img = apply(t, facets[i]);
            if (!img) continue;
            auto it = idx.find(facet_str(*img));
            if (it == idx.end()) continue;  // torus image of a fixed facet is fixed
            int a = find(static_cast<int>(i)), b = find(it->second);
            if (a != b) parent[b] = a;
        }
    }

    auto inside_window = [&](const Facet& f) {
        return std::holds_alternative<Vertex>(f) ? window.contains(std::get<Vertex>(f))
                                                 : window.contains(std::get<UEdge>(f));
    };
    auto touches_margin_edge = [&](const Facet& f) {
        const Vertex& v =
            std::holds_alternative<Vertex>(f) ? std::get<Vertex>(f) : std::get<UEdge>(f).y;
        return enlarged.center_distance(v) >= enlarged.radius();
    };

    // representatives: lexicographically smallest in-window facet per orbit
    std::map<int, Facet> reps;
    std::map<int, bool> reaches_margin;
    for (std::size_t i = 0; i < facets.size(); ++i) {
        int root = find(static_cast<int>(i));
        if (touches_margin_edge(facets[i])) reaches_margin[root] = true;
        if (!inside_window(facets[i])) continue;
        auto it = reps.find(root);
        if (it == reps.end() || facet_less(facets[i], it->second)) reps[root] = facets[i];
    }
    FundamentalDomain out;
    std::map<int, int> orbit_id;
    int margin_orbits = 0;
    for (const auto& [root, rep] : reps) {
        orbit_id[root] = static_cast<int>(out.representatives.size());
        out.representatives.push_back(rep);
        if (reaches_margin.count(root) && reaches_margin[root]) ++margin_orbits;
    }
    for (std::size_t i = 0; i < facets.size(); ++i) {
        if (!inside_window(facets[i])) continue;
        out.orbit_of[facet_str(facets[i])] = orbit_id.at(find(static_cast<int>(i)));
    }
    // two or more reported orbits still open at the margin might be identified
    // by torus elements passing outside the enlarged window
    out.boundary_ambiguity = margin_orbits >= 2;
    return out;
}

// Fixed-vertex count in a sliding translation window: the ball of the given
// radius about the k-th translate of the origin along the fixed apartment.
inline long sliding_window_fixed_count(const Matrix2& gamma, const Matrix2& translation, long k,
                                       long radius) {
    const Int& p = gamma.prime();
    Vertex o = base_vertex(p);
    for (long i = 0; i < k; ++i) o = act(translation, o);
    TreeBall window(Facet(o), radius);
    return static_cast<long>(fixed_set(gamma, window).fixed_vertices.size());
}

}  // namespace treechar
