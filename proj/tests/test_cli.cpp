// End-to-end checks of the command-line tool: exit codes, documented outputs,
// and byte-level determinism for a fixed config and seed.
#include <catch2/catch_amalgamated.hpp>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

namespace {

struct RunResult {
    int exit_code;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    std::string cmd = std::string(TREECHAR_CLI_PATH) + " " + args + " 2>/dev/null";
    std::array<char, 4096> buf{};
    std::string out;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (fgets(buf.data(), buf.size(), pipe)) out += buf.data();
    int status = pclose(pipe);
    return {WEXITSTATUS(status), out};
}

}  // namespace

TEST_CASE("classify: the three element types of the examples") {
    auto nc = run_cli("classify --element \"diag(1,p)\"");
    CHECK(nc.exit_code == 0);
    CHECK(nc.out.find("non-compact") != std::string::npos);
    CHECK(nc.out.find("\"translation_length\": \"1\"") != std::string::npos);

    auto cne = run_cli("classify --element \"diag(1,1+p)\"");
    CHECK(cne.exit_code == 0);
    CHECK(cne.out.find("compact-non-elliptic") != std::string::npos);
    CHECK(cne.out.find("\"fixed_depth\": 1") != std::string::npos);

    auto bar = run_cli("classify --p 3 --element \"[[0,1],[p,0]]\"");
    CHECK(bar.exit_code == 0);
    CHECK(bar.out.find("elliptic") != std::string::npos);
    CHECK(bar.out.find("\"barycentric\": true") != std::string::npos);

    auto id = run_cli("classify --element \"id\"");
    CHECK(id.exit_code == 1);  // not regular semisimple: invariant failure path
}

TEST_CASE("truncate facet counts") {
    auto r = run_cli("truncate --r 1 --r_max 1 --window 3");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("\"in_vertices\": 4") != std::string::npos);
    CHECK(r.out.find("\"in_edges\": 3") != std::string::npos);
    CHECK(r.out.find("\"fixpoint_agrees\": true") != std::string::npos);
}

TEST_CASE("character: trivial model returns 1 with agreement") {
    auto r = run_cli(
        "character --model trivial --element \"diag(1,1+p)\" --e 0 --r 1 --window 3 --e_max 1 "
        "--r_max 2");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("\"fixed_facet_sum\": \"1\"") != std::string::npos);
    CHECK(r.out.find("\"hopf_trace\": \"1\"") != std::string::npos);
    CHECK(r.out.find("\"three_way_agreement\": true") != std::string::npos);
}

TEST_CASE("scan emits plateau and frontier data") {
    auto r = run_cli("scan --element \"diag(1,1+p)\" --window 4 --e_max 2 --r_max 2");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("\"plateau\": \"4\"") != std::string::npos);
    CHECK(r.out.find("\"perturbation_constant\": true") != std::string::npos);
}

TEST_CASE("verify exits zero and prints per-check lines") {
    auto r = run_cli("verify --window 3 --e_max 1 --r_max 2");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("[ok]") != std::string::npos);
    CHECK(r.out.find("[FAIL]") == std::string::npos);
    CHECK(r.out.find("all checks passed") != std::string::npos);
}

TEST_CASE("config errors exit with code 2") {
    auto r = run_cli("verify --p 7");
    CHECK(r.exit_code == 2);
    auto r2 = run_cli("verify --window 2 --r_max 3");
    CHECK(r2.exit_code == 2);
}

TEST_CASE("dump-matrix formats") {
    auto tri = run_cli("dump-matrix --kind boundary --model trivial --window 3 --r_max 2");
    CHECK(tri.exit_code == 0);
    CHECK(tri.out.find("22 21") == 0);  // rows cols header
    CHECK(tri.out.find("/1") != std::string::npos);
    auto dims = run_cli("dump-matrix --kind fiber-dims --e 0 --window 3 --r_max 2");
    CHECK(dims.exit_code == 0);
    CHECK(dims.out.find("v[0,0,0]") != std::string::npos);
    auto chain = run_cli(
        "dump-matrix --kind alpha-chain --model trivial --window 3 --r_max 2 --r 2");
    CHECK(chain.exit_code == 0);
    CHECK(chain.out.find("\"chain\"") != std::string::npos);
    CHECK(chain.out.find("e[v[") != std::string::npos);
}

TEST_CASE("determinism: identical config and seed give byte-identical output") {
    std::string args = "scan --element \"diag(1,1+p)\" --window 4 --e_max 2 --r_max 2 --seed 99";
    auto a = run_cli(args);
    auto b = run_cli(args);
    CHECK(a.exit_code == 0);
    CHECK(a.out == b.out);
    // and a config file with flag overrides
    {
        std::ofstream f("/tmp/treechar_test.cfg");
        f << "p = 2\nwindow = 4\ne_max = 1\nr_max = 2\nmodel = principal-series\n";
    }
    auto c = run_cli("classify --config /tmp/treechar_test.cfg --element \"diag(1,p^2)\"");
    CHECK(c.exit_code == 0);
    CHECK(c.out.find("\"translation_length\": \"2\"") != std::string::npos);
}
