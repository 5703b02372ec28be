#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "scglue/cli.hpp"

using namespace scglue;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

CliResult run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("scglue");
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliResult res;
    res.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    res.out = out.str();
    res.err = err.str();
    return res;
}

std::string tmp_path(const std::string& name) {
    return (fs::temp_directory_path() / ("scglue_cli_" + name)).string();
}

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

// parsed csv rows, header skipped
std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        std::vector<std::string> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(cell);
        if (!row.empty()) rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

TEST_CASE("verify suites pass and report per-check errors") {
    const CliResult nodal = run({"verify", "--suite", "nodal"});
    CAPTURE(nodal.out, nodal.err);
    CHECK(nodal.code == 0);
    CHECK(contains(nodal.out, "reglue [exp]"));
    CHECK(contains(nodal.out, "unglue round trip [quintic]"));
    CHECK(contains(nodal.out, "max error"));
    CHECK(!contains(nodal.out, "FAIL"));

    const CliResult orbit = run({"verify", "--suite", "orbit"});
    CAPTURE(orbit.out, orbit.err);
    CHECK(orbit.code == 0);
    CHECK(contains(orbit.out, "recovers the map"));
    CHECK(!contains(orbit.out, "FAIL"));

    const CliResult ops = run({"verify", "--suite", "operators"});
    CAPTURE(ops.out, ops.err);
    CHECK(ops.code == 0);
    CHECK(contains(ops.out, "μ_CZ(e^{πit})=1 PASS"));
    CHECK(!contains(ops.out, "FAIL"));
}

TEST_CASE("verify output is reproducible for a fixed seed") {
    const CliResult a = run({"verify", "--suite", "nodal", "--seed", "99"});
    const CliResult b = run({"verify", "--suite", "nodal", "--seed", "99"});
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
}

TEST_CASE("bad configuration and usage exit with code 2") {
    CHECK(run({"verify", "--suite", "all", "--Nt", "7"}).code == 2);
    CHECK(contains(run({"verify", "--Nt", "7"}).err, "even"));
    CHECK(run({"verify", "--suite", "bogus"}).code == 2);
    CHECK(run({"verify", "--Ds", "0.7"}).code == 2);
    CHECK(run({"verify", "--no-such-flag"}).code == 2);
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("glue and unglue round trip through field files") {
    const double R = 12.0, ds = 0.25;
    const int nt = 16, nc = 2;
    const double smax = R + kAntiPad;
    const int ns = static_cast<int>(std::lround(smax / ds)) + 1;
    std::mt19937 rng(314u);
    const std::vector<double> c = {0.3, -0.1};
    const HalfCylinderField ux = detail::random_half(+1, nc, ns, nt, smax, c, 1.5, rng);
    const HalfCylinderField uy = detail::random_half(-1, nc, ns, nt, smax, c, 1.5, rng);
    const std::string px = tmp_path("ux.scf"), py = tmp_path("uy.scf");
    write_field_file(px, ux);
    write_field_file(py, uy);

    const std::string pw = tmp_path("w.scf"), pv = tmp_path("v.scf");
    const CliResult glue = run({"glue", "--x", px, "--y", py, "--R", "12", "--theta", "0.25",
                                "--out", pw, "--anti", pv});
    CAPTURE(glue.err);
    REQUIRE(glue.code == 0);

    const std::string rx = tmp_path("rx.scf"), ry = tmp_path("ry.scf");
    const CliResult unglue =
        run({"unglue", "--w", pw, "--v", pv, "--out-x", rx, "--out-y", ry});
    CAPTURE(unglue.err);
    REQUIRE(unglue.code == 0);

    const auto hx = std::get<HalfCylinderField>(read_field_file(rx));
    const auto hy = std::get<HalfCylinderField>(read_field_file(ry));
    REQUIRE(hx.ns == ux.ns);
    REQUIRE(hy.ns == uy.ns);
    double worst = 0.0;
    for (int i = 0; i < ux.ns; ++i)
        for (int j = 0; j < nt; ++j)
            for (int k = 0; k < nc; ++k) {
                worst = std::max(worst, std::abs(hx.value(i, j, k) - ux.value(i, j, k)));
                worst = std::max(worst, std::abs(hy.value(i, j, k) - uy.value(i, j, k)));
            }
    CHECK(worst <= 1e-12);
    CHECK(std::abs(hx.c[0] - ux.c[0]) <= 1e-12);
    CHECK(std::abs(hx.c[1] - ux.c[1]) <= 1e-12);

    // without the anti-glued record only the canonical split is available;
    // both halves carry the matched middle-loop average as their constant
    const CliResult split = run({"unglue", "--w", pw, "--out-x", rx, "--out-y", ry});
    REQUIRE(split.code == 0);
    const auto ex = std::get<HalfCylinderField>(read_field_file(rx));
    const auto ey = std::get<HalfCylinderField>(read_field_file(ry));
    CHECK(ex.sign == +1);
    CHECK(ey.sign == -1);
    const auto wback = std::get<FiniteCylinderField>(read_field_file(pw));
    const std::vector<double> av = middle_loop_average(wback);
    CHECK(std::abs(ex.c[0] - av[0]) <= 1e-12);
    CHECK(std::abs(ey.c[0] - av[0]) <= 1e-12);
}

TEST_CASE("spectrum command reads a coefficient loop and writes the csv") {
    const int nt = 132;
    const LoopOperator L =
        constant_loop_operator(1, nt, Eigen::MatrixXd::Zero(2, 2));
    const std::string ploop = tmp_path("zero.loop");
    {
        std::ofstream os(ploop);
        write_loop(os, L);
    }
    const CliResult res = run({"spectrum", "--loop", ploop, "--K", "32"});
    CAPTURE(res.err);
    REQUIRE(res.code == 0);
    const auto rows = csv_rows(res.out);
    REQUIRE(rows.size() == 65);  // clusters 2 pi m, |m| <= 32, multiplicity 2 each
    bool zero_row = false, plus_row = false, minus_row = false;
    for (const auto& row : rows) {
        REQUIRE(row.size() == 3);
        CHECK(row[0] == "scglue_cli_zero");
        const double ev = std::stod(row[1]);
        CHECK(row[2] == "2");
        if (std::abs(ev) <= 1e-10) zero_row = true;
        if (std::abs(ev - 2.0 * M_PI) <= 1e-8) plus_row = true;
        if (std::abs(ev + 2.0 * M_PI) <= 1e-8) minus_row = true;
    }
    CHECK(zero_row);
    CHECK(plus_row);
    CHECK(minus_row);

    const CliResult again = run({"spectrum", "--loop", ploop, "--K", "32"});
    CHECK(again.out == res.out);

    // grid too coarse for the requested cutoff is a configuration error
    CHECK(run({"spectrum", "--loop", ploop, "--K", "40"}).code == 2);
    CHECK(run({"spectrum", "--loop", ploop, "--orbit", ploop}).code == 2);
}

TEST_CASE("spectrum of a sampled orbit uses its rotation frame") {
    const PeriodicOrbit orb = standard_circle_orbit(2, 16, 2.0, 2);
    const std::string porb = tmp_path("orb.scorbit");
    {
        std::ofstream os(porb);
        write_orbit(os, orb);
    }
    const CliResult res = run({"spectrum", "--orbit", porb, "--K", "2"});
    CAPTURE(res.err);
    REQUIRE(res.code == 0);
    const auto rows = csv_rows(res.out);
    REQUIRE(rows.size() == 5);
    // constant coefficient 2 pi k I shifts the lattice down by k turns
    for (int m = 0; m < 5; ++m) {
        const double want = 2.0 * M_PI * (m - 4);
        CHECK(std::abs(std::stod(rows[static_cast<std::size_t>(m)][1]) - want) <= 1e-8);
    }
}

TEST_CASE("index sweep crosses the first resonance") {
    const CliResult res = run({"index", "--n", "1", "--delta-from", "0.5", "--delta-to", "7.5",
                               "--steps", "3"});
    CAPTURE(res.err);
    REQUIRE(res.code == 0);
    const auto rows = csv_rows(res.out);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0][3] == "2");
    CHECK(rows[1][3] == "2");
    CHECK(rows[2][3] == "6");
    for (const auto& row : rows) CHECK(row[2] == "0");

    CHECK(run({"index", "--delta-from", "6.283", "--delta-to", "6.283", "--steps", "1"}).code ==
          2);
    CHECK(contains(
        run({"index", "--delta-from", "6.283", "--delta-to", "6.283", "--steps", "1"}).err,
        "resonance"));
    CHECK(run({"index", "--steps", "0"}).code == 2);
}

TEST_CASE("cz command prints the index of a path file") {
    const int M = 33;
    std::vector<Eigen::MatrixXd> samples;
    for (int i = 0; i < M; ++i) {
        const double t = M_PI * i / (M - 1);
        Eigen::MatrixXd P(2, 2);
        P << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
        samples.push_back(P);
    }
    const std::string ppath = tmp_path("rot_half.scpath");
    {
        std::ofstream os(ppath);
        write_path(os, SymplecticPath(1, std::move(samples)));
    }
    const CliResult res = run({"cz", "--path", ppath});
    CAPTURE(res.err);
    REQUIRE(res.code == 0);
    CHECK(res.out == "1\n");
}

TEST_CASE("orbit-avg recovers the standard map up to the deck action") {
    const PeriodicOrbit orb = standard_circle_orbit(2, 16, 2.0, 2);
    const StandardMap q(0.4, 0.9, 0.3, wrap01(-0.25 - 0.3), orb);
    const double r = 0.2;
    const GluingParameter a = a_param(r, q.cx, q.cy, orb.T, q.twist());
    const int nt = 16, nc = 1 + orb.ncomp;
    const int ns = static_cast<int>(std::lround(a.R / 0.25)) + 1;
    auto zero_half = [&](int sign) {
        return HalfCylinderField(sign, nc, ns, nt, a.R, std::vector<double>(nc, 0.0),
                                 std::vector<double>(static_cast<std::size_t>(ns) * nt * nc, 0.0),
                                 WeightSequence{}, false);
    };
    const OrbitElement elem = make_boundary_element(r, q, zero_half(+1), zero_half(-1));
    const std::string porb = tmp_path("avg.scorbit"), pel = tmp_path("avg.scorbelem");
    {
        std::ofstream os(porb);
        write_orbit(os, orb);
    }
    {
        std::ofstream os(pel);
        write_orbit_element(os, elem);
    }
    const CliResult res =
        run({"orbit-avg", "--orbit", porb, "--elem", pel, "--format", "csv"});
    CAPTURE(res.err);
    REQUIRE(res.code == 0);
    const auto rows = csv_rows(res.out);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].size() == 4);
    const StandardMap p(std::stod(rows[0][0]), std::stod(rows[0][1]), std::stod(rows[0][2]),
                        std::stod(rows[0][3]), orb);
    CHECK(detail::map_error_mod_k(p, q) <= 1e-10);

    const CliResult rep = run({"orbit-avg", "--orbit", porb, "--elem", pel});
    CHECK(contains(rep.out, "cx="));
}

TEST_CASE("probe command reports decay tables and a verdict") {
    const CliResult res = run({"probe", "--targets", "gamma1"});
    CAPTURE(res.err);
    REQUIRE(res.code == 0);
    CHECK(contains(res.out, "gamma1 0 8 "));
    CHECK(contains(res.out, "gamma1 0 20 "));
    CHECK(contains(res.out, "\"verdict\":\"consistent with sc1\""));

    CHECK(run({"probe", "--targets", "bogus"}).code == 2);
    CHECK(run({"probe", "--targets", "gamma1", "--delta", "0.5,0.1"}).code == 2);
}

TEST_CASE("file errors carry the path and input line") {
    CHECK(run({"cz", "--path", tmp_path("missing.scpath")}).code == 2);
    CHECK(contains(run({"cz", "--path", tmp_path("missing.scpath")}).err, "cannot open"));

    // corrupt one sample row of a glued field and the error names its line
    const GluingParameter a = GluingParameter::from_R(8.0, 0.25);
    const int ns = 33, nt = 16;
    std::mt19937 rng(9u);
    const FiniteCylinderField w = detail::random_cylinder(a, 1, ns, nt, rng);
    const std::string pw = tmp_path("corrupt.scf");
    write_field_file(pw, w);
    std::vector<std::string> lines;
    {
        std::ifstream is(pw);
        std::string line;
        while (std::getline(is, line)) lines.push_back(line);
    }
    lines[6] = lines[6].substr(0, lines[6].find_last_of(' '));
    {
        std::ofstream os(pw);
        for (const auto& l : lines) os << l << "\n";
    }
    const CliResult res =
        run({"unglue", "--w", pw, "--out-x", tmp_path("x.scf"), "--out-y", tmp_path("y.scf")});
    CHECK(res.code == 2);
    CHECK(contains(res.err, ":7:"));
}
