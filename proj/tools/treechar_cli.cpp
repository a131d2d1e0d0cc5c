// Command-line front end: classify elements, compute fixed sets, truncate,
// evaluate characters three ways, run independence scans, verify the invariant
// suite, and dump operator matrices.
//
// Exit codes: 0 success, 1 invariant failure, 2 config error,
//             3 budget/precision exhaustion.

#include <CLI11.hpp>
#include <iostream>
#include <random>
#include <set>
#include <thread>

#include "treechar/character.hpp"
#include "treechar/config.hpp"
#include "treechar/report.hpp"

using namespace treechar;

namespace {

struct CliState {
    RunConfig cfg;
    std::string element = "id";
    std::string kind = "boundary";
    std::string facet_spec;
    std::string out_file;
    long opt_e = -1, opt_r = -1, opt_radius = -1;
};

RatMat2 parse_element(const CliState& st) {
    return ElementParser(st.cfg.prime()).parse(st.element);
}

long pick_e(const CliState& st) { return st.opt_e >= 0 ? st.opt_e : st.cfg.e_max; }
long pick_r(const CliState& st) { return st.opt_r >= 0 ? st.opt_r : st.cfg.r_max; }

int cmd_classify(const CliState& st) {
    RatMat2 g = parse_element(st);
    auto cls = classify(g, st.cfg.prime());
    Json j{{"stamp", config_stamp(st.cfg)}, {"element", g.str()}, {"result", json_class(cls)}};
    std::cout << j.dump(2) << "\n";
    return cls.empirical_agreement ? 0 : 1;
}

int cmd_fixedset(const CliState& st) {
    RatMat2 g = parse_element(st);
    long radius = st.opt_radius >= 0 ? st.opt_radius : st.cfg.window;
    TreeBall w(st.cfg.origin_facet(), radius, st.cfg.max_facets);
    auto fs = fixed_set(g, st.cfg.prime(), w);
    Json verts = Json::array();
    for (const auto& v : fs.fixed_vertices) verts.push_back(v.str());
    Json edges = Json::array();
    std::set<Vertex> hv(fs.fixed_vertices.begin(), fs.fixed_vertices.end());
    std::set<UEdge> he;
    for (const auto& se : fs.stable_edges) {
        edges.push_back(Json{{"edge", se.edge.str()}, {"reversed", se.reversed}});
        he.insert(se.edge);
    }
    Json j{{"stamp", config_stamp(st.cfg)},
           {"element", g.str()},
           {"window_radius", radius},
           {"fixed_vertices", verts},
           {"stable_edges", edges},
           {"counts",
            Json{{"vertices", fs.fixed_vertices.size()}, {"edges", fs.stable_edges.size()}}}};
    std::cout << j.dump(2) << "\n";
    if (!st.out_file.empty()) write_file(st.out_file, w.dot(hv, he));
    return 0;
}

int cmd_truncate(const CliState& st) {
    long r = pick_r(st);
    TreeBall w(st.cfg.origin_facet(), st.cfg.window, st.cfg.max_facets);
    auto xr = truncated_building(st.cfg.origin_facet(), Rat(r), w);
    auto fix = truncated_building_fixpoint(st.cfg.origin_facet(), Rat(r), w);
    bool agree = xr.verts == fix.verts && xr.edges == fix.edges;
    auto sp = split_facets(xr, w);
    Json verts = Json::array(), edges = Json::array();
    for (const auto& v : xr.verts) verts.push_back(v.str());
    for (const auto& e : xr.edges) edges.push_back(e.str());
    Json j{{"stamp", config_stamp(st.cfg)},
           {"requested_r", xr.requested_r.get_str()},
           {"effective_r", xr.effective_r},
           {"provenance", xr.provenance},
           {"fixpoint_agrees", agree},
           {"in_vertices", verts},
           {"in_edges", edges},
           {"counts", Json{{"in_vertices", sp.in_verts.size()},
                           {"in_edges", sp.in_edges.size()},
                           {"out_vertices", sp.out_verts.size()},
                           {"out_edges", sp.out_edges.size()}}}};
    std::cout << j.dump(2) << "\n";
    return agree ? 0 : 1;
}

int cmd_character(const CliState& st) {
    RatMat2 g = parse_element(st);
    long e = pick_e(st), r = st.opt_r >= 0 ? st.opt_r : std::max(1L, st.cfg.r_max - 1);
    TreeBall w(st.cfg.origin_facet(), st.cfg.window, st.cfg.max_facets);
    std::vector<long> es, rs;
    for (long x = st.cfg.e_min; x <= st.cfg.e_max; ++x) es.push_back(x);
    for (long x = st.cfg.r_min; x <= st.cfg.r_max; ++x) rs.push_back(x);
    auto rep = character_report(g, st.cfg.model_obj(), e, r, w, st.cfg.origin_facet(), es, rs);
    Json j{{"stamp", config_stamp(st.cfg)}, {"report", json_report(rep)}};
    std::cout << j.dump(2) << "\n";
    if (!st.out_file.empty()) write_file(st.out_file, scan_csv(rep.scan));
    return 0;
}

int cmd_scan(const CliState& st) {
    RatMat2 g = parse_element(st);
    TreeBall w(st.cfg.origin_facet(), st.cfg.window, st.cfg.max_facets);
    std::vector<long> es, rs;
    for (long x = st.cfg.e_min; x <= st.cfg.e_max; ++x) es.push_back(x);
    for (long x = st.cfg.r_min; x <= st.cfg.r_max; ++x) rs.push_back(x);
    Model model = st.cfg.model_obj();

    ScanTable t;
    std::vector<std::pair<long, long>> grid;
    for (long e : es)
        for (long r : rs) grid.emplace_back(e, r);
    std::vector<Rat> values(grid.size());
    int workers = std::max(1, st.cfg.workers);
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= grid.size()) break;
            auto [e, r] = grid[i];
            auto xr = truncated_building(st.cfg.origin_facet(), Rat(r), w);
            values[i] = fixed_facet_sum(g, e, xr, model);
        }
    };
    for (int k = 1; k < workers; ++k) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    for (std::size_t i = 0; i < grid.size(); ++i)
        t.cells.push_back({grid[i].first, grid[i].second, values[i]});
    compute_frontiers(t, es, rs);
    bool perturb = perturbation_constancy(g, model, es.back(), rs.back(), w,
                                          st.cfg.origin_facet(), 8);
    Json j{{"stamp", config_stamp(st.cfg)},
           {"element", g.str()},
           {"scan", json_scan(t)},
           {"perturbation_constant", perturb}};
    std::cout << j.dump(2) << "\n";
    if (!st.out_file.empty()) write_file(st.out_file, scan_csv(t));
    return 0;
}

int cmd_dump_matrix(const CliState& st) {
    const Int p = st.cfg.prime();
    Model model = st.cfg.model_obj();
    long e = pick_e(st), r = st.opt_r >= 0 ? st.opt_r : std::max(1L, st.cfg.r_max - 1);
    if (st.kind == "fiber-basis") {
        // facet spec: "origin" (default), "v:a,c,b" or "e:a,c,b/a,c,b"
        auto parse_vertex = [&](const std::string& s) {
            auto c1 = s.find(','), c2 = s.rfind(',');
            if (c1 == std::string::npos || c2 == c1) throw ConfigError("facet: want a,c,b");
            return Vertex{p, std::stol(s.substr(0, c1)), std::stol(s.substr(c1 + 1, c2 - c1 - 1)),
                          Int(s.substr(c2 + 1))};
        };
        Facet f = st.cfg.origin_facet();
        if (!st.facet_spec.empty() && st.facet_spec != "origin") {
            if (st.facet_spec.rfind("v:", 0) == 0) {
                f = Facet(parse_vertex(st.facet_spec.substr(2)));
            } else if (st.facet_spec.rfind("e:", 0) == 0) {
                auto body = st.facet_spec.substr(2);
                auto slash = body.find('/');
                if (slash == std::string::npos) throw ConfigError("facet: e:a,c,b/a,c,b");
                f = Facet(UEdge(parse_vertex(body.substr(0, slash)),
                                parse_vertex(body.substr(slash + 1))));
            } else {
                throw ConfigError("facet spec: origin, v:a,c,b or e:a,c,b/a,c,b");
            }
        }
        auto fib = invariant_space(f, e, model, /*verify=*/true);
        auto basis = fib.basis();
        long L = 1;
        for (const auto& b : basis) L = std::max(L, b.resolution());
        Grid grid(p, L);
        QMat m(grid.size(), basis.size());
        for (std::size_t j = 0; j < basis.size(); ++j) {
            GridFn gf = GridFn::from_step(grid, basis[j]);
            for (std::size_t i = 0; i < grid.size(); ++i) m.at(i, j) = gf.vals[i];
        }
        std::string payload = dense_dump(m);
        if (st.out_file.empty())
            std::cout << payload;
        else
            write_file(st.out_file, payload);
        Json j{{"stamp", config_stamp(st.cfg)},
               {"facet", facet_str(f)},
               {"e", e},
               {"dim", fib.dim()},
               {"verified_level", fib.verified_level},
               {"format", "dense rows cols then num/den entries on the level grid"}};
        std::cerr << j.dump(2) << "\n";
        return 0;
    }
    TreeBall w(st.cfg.origin_facet(), st.cfg.window, st.cfg.max_facets);
    ChainSpace cs(p, model, e, w);
    auto xr = truncated_building(st.cfg.origin_facet(), Rat(r), w);
    if (st.kind == "fiber-dims") {
        Json j{{"stamp", config_stamp(st.cfg)}, {"e", e}, {"dims", json_fiber_dims(cs)}};
        std::string payload = j.dump(2) + "\n";
        if (st.out_file.empty())
            std::cout << payload;
        else
            write_file(st.out_file, payload);
        return 0;
    }
    if (st.kind == "alpha-chain") {
        // the section applied to δ_x − δ_o for the outermost in-window vertex:
        // documents the chain JSON format (keyed by canonical facet forms)
        Vertex far = base_vertex(p);
        for (const auto& v : xr.verts)
            if (w.center_distance(v) > w.center_distance(far)) far = v;
        // value = the constant function 1 (all fiber pieces), so ε(b) = 0
        std::vector<Rat> b(cs.dim0(), Rat(0));
        int fi = cs.vindex(far), oi = cs.vindex(base_vertex(p));
        for (std::size_t k = 0; k < cs.fiber_dim(cs.vfiber(fi)); ++k)
            b[cs.voff(fi) + k] = 1;
        for (std::size_t k = 0; k < cs.fiber_dim(cs.vfiber(oi)); ++k)
            b[cs.voff(oi) + k] = -1;
        Chain c;
        c.degree = 1;
        c.coords = alpha_apply(cs, b);
        Json j{{"stamp", config_stamp(st.cfg)},
               {"description", "alpha(delta_x - delta_o), x = " + far.str()},
               {"chain", json_chain(cs, c)}};
        std::string payload = j.dump(2) + "\n";
        if (st.out_file.empty())
            std::cout << payload;
        else
            write_file(st.out_file, payload);
        return 0;
    }
    QMat m;
    if (st.kind == "boundary") m = cs.boundary();
    else if (st.kind == "augmentation") m = cs.augmentation();
    else if (st.kind == "q0") m = cs.truncation(xr, 0);
    else if (st.kind == "q1") m = cs.truncation(xr, 1);
    else if (st.kind == "action0") m = cs.action0(ElementParser(p).parse(st.element)).to_mat();
    else if (st.kind == "action1") m = cs.action1(ElementParser(p).parse(st.element)).to_mat();
    else if (st.kind == "avgk0" || st.kind == "avgk1") {
        auto K = UGroup::of(st.cfg.origin_facet(), e);
        m = cs.average_operator(K.gens, st.kind == "avgk0" ? 0 : 1, st.cfg.max_quotient);
    } else if (st.kind == "qbar0" || st.kind == "qbar1") {
        auto D = build_decomposition(cs, ElementParser(p).parse(st.element), xr);
        auto M = modified_truncation(cs, xr, D);
        m = st.kind == "qbar0" ? M.qbar0 : M.qbar1;
    } else {
        throw ConfigError("unknown matrix kind: " + st.kind);
    }
    std::string payload = triplet_dump(m);
    if (st.out_file.empty())
        std::cout << payload;
    else
        write_file(st.out_file, payload);
    return 0;
}

// The full invariant suite at config scale; one line per check.
int cmd_verify(const CliState& st) {
    const Int p = st.cfg.prime();
    Model model = st.cfg.model_obj();
    std::mt19937_64 rng(st.cfg.seed);
    int failures = 0;
    auto check = [&](const std::string& name, bool ok) {
        std::cout << (ok ? "[ok]   " : "[FAIL] ") << name << "\n";
        if (!ok) ++failures;
    };

    // tree structure
    {
        bool counts = true, acyclic = true;
        for (long r = 0; r <= std::min(st.cfg.r_max, 3L); ++r) {
            TreeBall b = ball(base_vertex(p), r, st.cfg.max_facets);
            Int expected = r == 0 ? Int(1) : 1 + (p + 1) * (pow_int(p, r) - 1) / (p - 1);
            counts = counts && Int(static_cast<long>(b.vertices().size())) == expected;
            acyclic = acyclic && b.edges().size() == b.vertices().size() - 1;
        }
        check("tree: ball counts match 1+(p+1)(p^r-1)/(p-1)", counts);
        check("tree: no cycles", acyclic);
        bool iso = true;
        auto verts = ball(base_vertex(p), 3).vertices();
        std::uniform_int_distribution<std::size_t> pick(0, verts.size() - 1);
        std::uniform_int_distribution<int> small(-4, 4);
        for (int i = 0; i < 200 && iso; ++i) {
            RatMat2 g{Rat(small(rng)), Rat(small(rng)), Rat(small(rng)), Rat(small(rng))};
            if (g.det() == 0) continue;
            Vertex u = verts[pick(rng)], v = verts[pick(rng)];
            iso = distance(act(g, u), act(g, v)) == distance(u, v);
        }
        check("tree: isometric action on random samples", iso);
    }

    // U-group contract
    {
        TreeBall b = ball(base_vertex(p), 2);
        bool u4 = true, u6 = true, u7 = true;
        std::uniform_int_distribution<std::size_t> picke(0, b.edges().size() - 1);
        for (int i = 0; i < 6 && model.kind == Model::PrincipalSeries; ++i) {
            UEdge ed = b.edges()[picke(rng)];
            long e = i % std::max(1L, std::min(st.cfg.e_max + 1, 2L));
            auto fe = invariant_space(Facet(ed), e, model);
            auto fx = invariant_space(Facet(ed.x), e, model);
            auto fy = invariant_space(Facet(ed.y), e, model);
            u4 = u4 && fe.dim() <= fx.dim() && fe.dim() <= fy.dim();
            for (const auto& f : fe.basis()) {
                u4 = u4 && fx.coordinates(f).has_value() && fy.coordinates(f).has_value();
                for (const auto& g : UGroup::edge(ed, e).gens) u6 = u6 && f.act(g) == f;
            }
        }
        auto verts = ball(base_vertex(p), 3).vertices();
        std::uniform_int_distribution<std::size_t> pickv(0, verts.size() - 1);
        int done = 0;
        while (done < 10 && model.kind == Model::PrincipalSeries) {
            Vertex a = verts[pickv(rng)], c = verts[pickv(rng)];
            if (distance(a, c) < 2) continue;
            auto path = geodesic(a, c);
            std::uniform_int_distribution<std::size_t> mid(1, path.size() - 2);
            u7 = u7 && geodesic_convexity_check(a, c, path[mid(rng)], done % 2, model);
            ++done;
        }
        check("coeff: (U4) fiber inclusions", u4);
        check("coeff: (U6) edge fiber = intersection, fixed by generators", u6);
        check("coeff: (U7) geodesic fiber containment", u7);
    }

    // chain complex identities, truncation and decomposition claims
    {
        TreeBall w(st.cfg.origin_facet(), std::min(st.cfg.window, 3L), st.cfg.max_facets);
        long e = std::min(st.cfg.e_max, 1L);
        ChainSpace cs(p, model, e, w);
        QMat d = cs.boundary();
        check("chains: eps∘∂ = 0", (cs.augmentation() * d).is_zero());
        check("chains: H1 = 0 (∂ injective)", rank(d) == cs.dim1());
        check("chains: H0 = eps-image by rank",
              rank(cs.augmentation()) == cs.dim0() - cs.dim1());
        long r = std::max(1L, std::min(st.cfg.r_max, w.radius() - 1));
        auto xr = truncated_building(st.cfg.origin_facet(), Rat(r), w);
        QMat q0 = cs.truncation(xr, 0), q1 = cs.truncation(xr, 1);
        check("truncate: Q idempotent", q0 * q0 == q0);
        check("truncate: Q∂ != ∂Q witness", !(q0 * d == d * q1));
        RatMat2 gamma{1, 0, 0, Rat(1) + Rat(p)};
        auto D = build_decomposition(cs, gamma, xr);
        auto M = modified_truncation(cs, xr, D);
        check("qbar: ∂Q̄₁ = Q̄₀∂", d * M.qbar1 == M.qbar0 * d);
        bool local = true;
        TreeBall small(st.cfg.origin_facet(), r - 1);
        std::uniform_int_distribution<int> val(-2, 2);
        for (int i = 0; i < 10; ++i) {
            std::vector<Rat> c(cs.dim0(), Rat(0));
            for (std::size_t j = 0; j < cs.dim0(); ++j)
                if (small.contains(cs.verts()[cs.basis0(j).first])) c[j] = val(rng);
            local = local && M.qbar0.apply(c) == c;
        }
        check("qbar: identity on chains supported in B(o, r-1)", local);
        // exactness via reduce_cycle roundtrips
        bool exact = true;
        for (int i = 0; i < 25 && exact; ++i) {
            std::vector<Rat> c(cs.dim1(), Rat(0));
            for (std::size_t j = 0; j < cs.dim1(); ++j)
                if (xr.contains(cs.edges()[cs.basis1(j).first])) c[j] = val(rng);
            auto b = d.apply(c);
            try {
                Chain red = reduce_cycle(cs, b, xr);
                exact = d.apply(red.coords) == b;
            } catch (const Error&) {
                exact = false;
            }
        }
        check("exactness: reduce_cycle roundtrips on random cycles", exact);
        // trace transfer + three-way agreement at a plateau cell
        auto h = hopf_character(cs, gamma, xr);
        check("transfer: trace(T_γ Q) = trace(T_γ Q̄)",
              h.plain_q0 == h.bar_q0 && h.plain_q1 == h.bar_q1);
        Rat s = fixed_facet_sum(gamma, e, xr, model);
        check("character: fixed-facet sum = alternating plain trace",
              s == h.plain_q0 - h.plain_q1);
        if (model.kind == Model::Trivial) {
            check("character: trivial model value 1", s == 1 && h.value == 1);
        } else {
            check("character: hopf = model fiber trace", h.internal_agreement);
        }
    }
    std::cout << (failures == 0 ? "verify: all checks passed\n"
                                : "verify: " + std::to_string(failures) + " check(s) failed\n");
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CliState st;
    CLI::App app{"truncated-building character machinery for SL2/GL2 over Q_p"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "flat key=value config file");
    // global overrides
    std::map<std::string, std::string> overrides;
    auto add_override = [&](const std::string& key) {
        app.add_option_function<std::string>(
            "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; },
            "override config key " + key);
    };
    for (const char* k : {"p", "precision", "model", "level", "origin", "window", "e_min",
                          "e_max", "r_min", "r_max", "max_quotient", "max_facets", "out_dir",
                          "seed", "workers"})
        add_override(k);

    auto* c_classify = app.add_subcommand("classify", "classify a group element");
    auto* c_fixedset = app.add_subcommand("fixedset", "fixed/stable facets in a window");
    auto* c_truncate = app.add_subcommand("truncate", "the truncated building X^r");
    auto* c_character = app.add_subcommand("character", "three-way character evaluation");
    auto* c_scan = app.add_subcommand("scan", "(e, r) independence scan");
    auto* c_verify = app.add_subcommand("verify", "run the invariant suite");
    auto* c_dump = app.add_subcommand("dump-matrix", "dump operator matrices");
    for (auto* c : {c_classify, c_fixedset, c_truncate, c_character, c_scan, c_verify, c_dump})
        c->fallthrough();

    for (auto* c : {c_classify, c_fixedset, c_character, c_scan, c_dump})
        c->add_option("--element", st.element, "element spec: id, diag(x,y), [[a,b],[c,d]]");
    c_fixedset->add_option("--radius", st.opt_radius, "window radius");
    c_fixedset->add_option("--dot", st.out_file, "write DOT with highlights");
    for (auto* c : {c_character, c_dump}) c->add_option("--e", st.opt_e, "depth e");
    for (auto* c : {c_truncate, c_character, c_dump}) c->add_option("--r", st.opt_r, "radius r");
    for (auto* c : {c_character, c_scan}) c->add_option("--csv", st.out_file, "write scan CSV");
    c_dump->add_option("--kind", st.kind,
                       "boundary|augmentation|q0|q1|action0|action1|avgk0|avgk1|qbar0|qbar1|"
                       "fiber-basis");
    c_dump->add_option("--facet", st.facet_spec, "facet for fiber-basis dumps");
    c_dump->add_option("--out", st.out_file, "output file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_path.empty()) st.cfg = RunConfig::from_file(config_path);
        for (const auto& [k, v] : overrides) st.cfg.set(k, v);
        st.cfg.validate();

        if (c_classify->parsed()) return cmd_classify(st);
        if (c_fixedset->parsed()) return cmd_fixedset(st);
        if (c_truncate->parsed()) return cmd_truncate(st);
        if (c_character->parsed()) return cmd_character(st);
        if (c_scan->parsed()) return cmd_scan(st);
        if (c_verify->parsed()) return cmd_verify(st);
        if (c_dump->parsed()) return cmd_dump_matrix(st);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const BudgetExceeded& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const PrecisionExhausted& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
}
