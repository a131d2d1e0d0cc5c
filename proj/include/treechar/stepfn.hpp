#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "treechar/errors.hpp"
#include "treechar/exact.hpp"
#include "treechar/pball.hpp"

namespace treechar {

// Locally constant rational-valued function on P¹(Q_p): a finite list of
// (ball, value) with the balls a disjoint cover. Canonical form merges sibling
// balls with equal values; exactly one cell is a complement ball.
class StepFunction {
public:
    StepFunction() = default;
    StepFunction(Int p, std::vector<std::pair<PBall, Rat>> cells)
        : p_(std::move(p)), cells_(std::move(cells)) {
        canonicalize();
    }

    static StepFunction constant(const Int& p, const Rat& v) {
        return StepFunction(p, {{PBall::unit_disc(p), v}, {PBall::coaffine(p, 0, 0), v}});
    }

    static StepFunction indicator(const PBall& B) {
        PBall other = B;
        other.comp = !other.comp;
        return StepFunction(B.p, {{B, 1}, {other, 0}});
    }

    const Int& prime() const { return p_; }
    const std::vector<std::pair<PBall, Rat>>& cells() const { return cells_; }

    bool is_zero() const {
        for (const auto& [b, v] : cells_)
            if (v != 0) return false;
        return true;
    }

    long resolution() const {
        long r = 1;
        for (const auto& [b, v] : cells_) r = std::max(r, effective_level(b));
        return r;
    }

    Rat evaluate(const PPoint& x) const {
        for (const auto& [b, v] : cells_)
            if (member(x, b)) return v;
        throw Error("StepFunction: point not covered (invalid partition)");
    }

    // (g·f)(x) = f(g⁻¹x): cells map forward under g, values ride along.
    StepFunction act(const RatMat2& g) const {
        std::vector<std::pair<PBall, Rat>> out;
        out.reserve(cells_.size());
        for (const auto& [b, v] : cells_) out.emplace_back(mobius_image(g, b), v);
        return StepFunction(p_, std::move(out));
    }

    StepFunction scale(const Rat& s) const {
        std::vector<std::pair<PBall, Rat>> out = cells_;
        for (auto& [b, v] : out) v *= s;
        return StepFunction(p_, std::move(out));
    }

    StepFunction add(const StepFunction& o) const {
        long L = std::max(resolution(), o.resolution());
        Grid g(p_, L);
        std::vector<Rat> vals(g.size());
        for (std::size_t i = 0; i < g.size(); ++i)
            vals[i] = evaluate(g.centers[i]) + o.evaluate(g.centers[i]);
        return from_grid(g, vals);
    }

    StepFunction sub(const StepFunction& o) const { return add(o.scale(-1)); }

    static StepFunction from_grid(const Grid& g, const std::vector<Rat>& vals) {
        StepFunction f;
        f.p_ = g.p;
        f.cells_.reserve(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) f.cells_.emplace_back(g.cells[i], vals[i]);
        f.merge_passes();
        return f;
    }

    bool operator==(const StepFunction& o) const { return p_ == o.p_ && cells_ == o.cells_; }
    bool operator!=(const StepFunction& o) const { return !(*this == o); }
    bool operator<(const StepFunction& o) const { return cells_ < o.cells_; }

    std::string str() const {
        std::string s = "{";
        for (const auto& [b, v] : cells_) s += b.str() + " -> " + v.get_str() + "; ";
        return s + "}";
    }

    // Is f constant on B? Returns the value if so.
    std::optional<Rat> constant_value_on(const PBall& B) const {
        std::optional<Rat> seen;
        long L = std::max(resolution(), effective_level(B));
        Grid g(p_, L);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!member(g.centers[i], B)) continue;
            Rat v = evaluate(g.centers[i]);
            if (!seen)
                seen = v;
            else if (*seen != v)
                return std::nullopt;
        }
        return seen;
    }

    // Partition sanity: exactly one complement cell, every grid center covered once.
    bool valid_partition() const {
        Grid g(p_, resolution());
        int co = 0;
        for (const auto& [b, v] : cells_) co += b.comp ? 1 : 0;
        if (co != 1) return false;
        for (const auto& c : g.centers) {
            int hits = 0;
            for (const auto& [b, v] : cells_) hits += member(c, b) ? 1 : 0;
            if (hits != 1) return false;
        }
        return true;
    }

private:
    // Canonical form: re-rasterize to the standard grid of the function's own
    // resolution (unique representation), then batch-merge siblings. Equal
    // functions always produce identical cell lists.
    void canonicalize() {
        if (cells_.empty()) throw Error("StepFunction: empty cell list");
        long L = 1;
        for (const auto& [b, v] : cells_) L = std::max(L, effective_level(b));
        Grid g(p_, L);
        std::vector<std::pair<PBall, Rat>> raster;
        raster.reserve(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) raster.emplace_back(g.cells[i], evaluate(g.centers[i]));
        cells_ = std::move(raster);
        merge_passes();
    }

    void merge_passes() {
        bool changed = true;
        while (changed) {
            changed = false;
            if (affine_merge_pass()) changed = true;
            if (co_merge_pass()) changed = true;
        }
        constant_pair_rule();
        std::sort(cells_.begin(), cells_.end(),
                  [](const auto& l, const auto& r) { return l.first < r.first; });
    }

    // A complementary pair with one value is the constant function; normalize
    // its representation.
    void constant_pair_rule() {
        if (cells_.size() != 2) return;
        const auto& [b0, v0] = cells_[0];
        const auto& [b1, v1] = cells_[1];
        if (v0 != v1) return;
        if (b0.comp == b1.comp) return;
        cells_ = {{PBall::unit_disc(p_), v0}, {PBall::coaffine(p_, 0, 0), v0}};
    }

    bool affine_merge_pass() {
        std::map<PBall, std::vector<std::size_t>> buckets;
        for (std::size_t i = 0; i < cells_.size(); ++i) {
            const PBall& b = cells_[i].first;
            if (b.comp) continue;
            buckets[PBall::affine(p_, b.a, b.level - 1)].push_back(i);
        }
        const std::size_t pl = static_cast<std::size_t>(mpz_get_ui(p_.get_mpz_t()));
        std::vector<char> dead(cells_.size(), 0);
        std::vector<std::pair<PBall, Rat>> born;
        for (auto& [parent, idx] : buckets) {
            if (idx.size() != pl) continue;
            const Rat& v = cells_[idx[0]].second;
            bool ok = true;
            for (std::size_t i : idx) ok = ok && cells_[i].second == v;
            if (!ok) continue;
            for (std::size_t i : idx) dead[i] = 1;
            born.emplace_back(parent, v);
        }
        if (born.empty()) return false;
        std::vector<std::pair<PBall, Rat>> next;
        next.reserve(cells_.size());
        for (std::size_t i = 0; i < cells_.size(); ++i)
            if (!dead[i]) next.push_back(std::move(cells_[i]));
        for (auto& c : born) next.push_back(std::move(c));
        cells_ = std::move(next);
        return true;
    }

    // Co(b, j) plus the p−1 equal-valued affine children around it merge to
    // Co(·, j+1); there is at most one complement cell, so one check per pass.
    bool co_merge_pass() {
        std::size_t ci = cells_.size();
        for (std::size_t i = 0; i < cells_.size(); ++i)
            if (cells_[i].first.comp) ci = i;
        if (ci == cells_.size()) return false;
        const PBall co = cells_[ci].first;
        const Rat v = cells_[ci].second;
        long j = co.level;
        std::map<PBall, std::size_t> lookup;
        for (std::size_t i = 0; i < cells_.size(); ++i)
            if (!cells_[i].first.comp) lookup[cells_[i].first] = i;
        std::vector<std::size_t> present;
        long missing = -1;
        long s_long = 0;
        for (Int s = 0; s < p_; ++s, ++s_long) {
            PBall sib = PBall::affine(p_, co.a + Rat(s) * pow_rat(p_, j), j + 1);
            auto it = lookup.find(sib);
            if (it != lookup.end() && cells_[it->second].second == v)
                present.push_back(it->second);
            else if (missing == -1)
                missing = s_long;
            else
                return false;  // two gaps: no merge
        }
        if (missing == -1) return false;  // all p children present: not a co-merge shape
        PBall parent = PBall::coaffine(p_, co.a + Rat(missing) * pow_rat(p_, j), j + 1);
        std::vector<std::pair<PBall, Rat>> next;
        for (std::size_t i = 0; i < cells_.size(); ++i)
            if (i != ci && std::find(present.begin(), present.end(), i) == present.end())
                next.push_back(std::move(cells_[i]));
        next.emplace_back(parent, v);
        cells_ = std::move(next);
        return true;
    }

    Int p_ = 2;
    std::vector<std::pair<PBall, Rat>> cells_;
};

// Dense values on a fixed grid: the fast exact representation used inside the
// chain machinery. Group action is pullback at cell centers, valid as long as
// the grid level dominates the resolution of everything in play.
struct GridFn {
    const Grid* grid = nullptr;
    std::vector<Rat> vals;

    GridFn() = default;
    explicit GridFn(const Grid& g) : grid(&g), vals(g.size(), Rat(0)) {}

    static GridFn from_step(const Grid& g, const StepFunction& f) {
        if (f.resolution() > g.L) throw Error("GridFn: grid too coarse for function");
        GridFn out(g);
        for (std::size_t i = 0; i < g.size(); ++i) out.vals[i] = f.evaluate(g.centers[i]);
        return out;
    }

    StepFunction to_step() const { return StepFunction::from_grid(*grid, vals); }

    // Index of the grid cell containing the point.
    static std::size_t locate(const Grid& g, const PPoint& x) {
        const Int& p = g.p;
        Int npl = pow_int(p, g.L);
        if (x.inf) return static_cast<std::size_t>(mpz_get_ui(npl.get_mpz_t()));  // y = 0 cell
        if (val_p(x.z, p) >= 0) {
            Int r = residue_mod_pk(x.z, p, g.L);
            return static_cast<std::size_t>(mpz_get_ui(r.get_mpz_t()));
        }
        Rat w = Rat(1) / x.z;  // val >= 1
        Int r = residue_mod_pk(w, p, g.L);
        // w-cells indexed by y/p in construction order
        Int idx = r / p;
        return static_cast<std::size_t>(mpz_get_ui(npl.get_mpz_t())) +
               static_cast<std::size_t>(mpz_get_ui(idx.get_mpz_t()));
    }

    // (g·f): value on cell j is f at g⁻¹·center_j.
    GridFn act(const RatMat2& g) const {
        RatMat2 gi = g.inverse();
        GridFn out(*grid);
        for (std::size_t j = 0; j < grid->size(); ++j)
            out.vals[j] = vals[locate(*grid, mobius(gi, grid->centers[j]))];
        return out;
    }

    GridFn& add_scaled(const GridFn& o, const Rat& s) {
        for (std::size_t i = 0; i < vals.size(); ++i) vals[i] += s * o.vals[i];
        return *this;
    }

    GridFn& scale(const Rat& s) {
        for (auto& v : vals) v *= s;
        return *this;
    }

    bool operator==(const GridFn& o) const { return vals == o.vals; }
    bool is_zero() const {
        for (const auto& v : vals)
            if (v != 0) return false;
        return true;
    }
};

}  // namespace treechar
