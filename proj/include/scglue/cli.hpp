#pragma once

// Command-line orchestration over the library: identity suites, spectra and
// index sweeps, gluing of field files, averaging of orbit elements, and the
// smoothness probe reports.  Exit codes are uniform across commands:
//   0  every requested check passed / output written
//   1  a numeric check ran to completion and failed
//   2  bad usage, configuration, or input files
// CSV output is byte-identical for identical command plus seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <streambuf>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "scglue/fields.hpp"
#include "scglue/gluing.hpp"
#include "scglue/io.hpp"
#include "scglue/operators.hpp"
#include "scglue/orbit.hpp"
#include "scglue/profile.hpp"
#include "scglue/scharness.hpp"

namespace scglue {

struct CliConfig {
    std::string command;

    // io paths
    std::string in_x, in_y, in_w, in_v;
    std::string loop_file, orbit_file, path_file, elem_file;
    std::string out, out_x, out_y, out_anti;

    // numeric overrides
    int Nt = 16;
    double Ds = 0.25;
    double Smax = 0.0;  // 0: half length defaults to the neck length R
    double R = 12.0;
    double theta = 0.25;
    std::vector<double> delta;  // weight ladder override (probe levels)
    std::uint32_t seed = 1u;
    std::string format;  // csv|report; empty picks the command's natural format

    // command specifics
    std::string suite = "all";
    std::string targets = "all";
    std::string model = "exp";  // exp|quintic
    bool hat = false;
    int K = 16;
    int n = 1;
    double delta_from = 0.5;
    double delta_to = 6.5;
    int steps = 13;
    double cr_S = 0.0;  // 0: chosen per delta from the resonance distance
    double cr_ds = 0.25;
    int cr_modes = 4;
};

namespace detail {

// short fixed-precision form for report lines; CSVs use fmt (shortest
// round-trip) so they stay byte-stable
inline std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return std::string(buf);
}

inline CutoffModel cutoff_model(const std::string& name) {
    if (name == "exp") return CutoffModel::ExpQuotient;
    if (name == "quintic") return CutoffModel::QuinticStep;
    throw std::invalid_argument("model must be exp or quintic, got '" + name + "'");
}

inline std::vector<std::string> split_names(const std::string& csv) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        auto comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        std::string tok = csv.substr(pos, comma - pos);
        const auto b = tok.find_first_not_of(" \t");
        const auto e = tok.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(tok.substr(b, e - b + 1));
        pos = comma + 1;
    }
    return out;
}

inline std::string file_stem(const std::string& path) {
    const auto slash = path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    const auto dot = base.find_last_of('.');
    if (dot != std::string::npos && dot > 0) base.resize(dot);
    return base;
}

// streambuf shim that counts consumed newlines so parse failures can be
// attributed to a 1-based input line
class LineCountingBuf : public std::streambuf {
  public:
    explicit LineCountingBuf(std::streambuf* src) : src_(src) {}

    long line() const { return newlines_ + (mid_line_ ? 1 : 0); }

  protected:
    int_type underflow() override {
        const int_type c = src_->sbumpc();
        if (traits_type::eq_int_type(c, traits_type::eof())) return c;
        if (traits_type::to_char_type(c) == '\n') {
            ++newlines_;
            mid_line_ = false;
        } else {
            mid_line_ = true;
        }
        ch_ = traits_type::to_char_type(c);
        setg(&ch_, &ch_, &ch_ + 1);
        return c;
    }

  private:
    std::streambuf* src_;
    long newlines_ = 0;
    bool mid_line_ = false;
    char ch_ = 0;
};

template <typename Parse>
auto parse_file(const std::string& path, Parse&& parse) {
    std::ifstream file(path);
    if (!file) throw std::runtime_error("cannot open " + path);
    LineCountingBuf counted(file.rdbuf());
    std::istream is(&counted);
    try {
        return parse(is);
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ":" + std::to_string(std::max(counted.line(), 1L)) +
                                 ": " + e.what());
    }
}

template <typename Write>
void with_output(const CliConfig& cfg, std::ostream& fallback, Write&& write) {
    if (cfg.out.empty()) {
        write(fallback);
        return;
    }
    std::ofstream os(cfg.out);
    if (!os) throw std::runtime_error("cannot open " + cfg.out + " for writing");
    write(os);
}

// -- verify: random inputs and error accounting -------------------------------

struct CheckReporter {
    std::ostream& os;
    int checks = 0;
    int failures = 0;

    void line(const std::string& name, double err, double tol) {
        const bool ok = err <= tol;
        ++checks;
        if (!ok) ++failures;
        os << "  " << name << "  max error " << fmt3(err) << "  (tol " << fmt3(tol) << ")  "
           << (ok ? "PASS" : "FAIL") << "\n";
    }

    void exact(const std::string& claim, long got, long want) {
        const bool ok = got == want;
        ++checks;
        if (!ok) ++failures;
        os << "  " << claim << (ok ? " PASS" : " FAIL (got " + std::to_string(got) + ")") << "\n";
    }
};

inline FiniteCylinderField random_cylinder(const GluingParameter& a, int ncomp, int ns, int nt,
                                           std::mt19937& rng) {
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    std::vector<double> data(static_cast<std::size_t>(ns) * nt * ncomp);
    for (double& v : data) v = amp(rng);
    return FiniteCylinderField(a, ncomp, ns, nt, std::move(data));
}

inline HalfCylinderField random_half(int sign, int ncomp, int ns, int nt, double smax,
                                     std::vector<double> c, double decay, std::mt19937& rng) {
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    const double ds = smax / (ns - 1);
    std::vector<double> data(static_cast<std::size_t>(ns) * nt * ncomp);
    for (int i = 0; i < ns; ++i) {
        const double env = std::exp(-decay * i * ds);
        for (int j = 0; j < nt; ++j)
            for (int k = 0; k < ncomp; ++k)
                data[(static_cast<std::size_t>(i) * nt + j) * ncomp + k] = env * amp(rng);
    }
    return HalfCylinderField(sign, ncomp, ns, nt, smax, std::move(c), std::move(data),
                             WeightSequence{}, /*warn_tail=*/false);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

// total values c + data compared pointwise on the common grid
inline double max_value_diff(const HalfCylinderField& a, const HalfCylinderField& b) {
    double worst = max_abs_diff(a.c, b.c);
    for (int i = 0; i < a.ns; ++i)
        for (int j = 0; j < a.nt; ++j)
            for (int k = 0; k < a.ncomp; ++k)
                worst = std::max(worst, std::abs(a.value(i, j, k) - b.value(i, j, k)));
    return worst;
}

// distance between standard maps up to the deck action, decorations on the circle
inline double map_error_mod_k(const StandardMap& p, const StandardMap& q) {
    double err = std::max(std::abs(p.cx - q.cx), std::abs(p.cy - q.cy));
    double best = 1.0;
    for (int j = 0; j < p.orbit.k; ++j) {
        const StandardMap s = deck_shift(p, j);
        best = std::min(best, std::max(circle_dist(s.theta_x, q.theta_x),
                                       circle_dist(s.theta_y, q.theta_y)));
    }
    return std::max(err, best);
}

// -- verify: symplectic path builders -----------------------------------------

inline Eigen::MatrixXd rot2(double angle) {
    Eigen::MatrixXd P(2, 2);
    P << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    return P;
}

inline SymplecticPath rotation_cz_path(double turns, int M) {
    std::vector<Eigen::MatrixXd> samples;
    samples.reserve(M);
    for (int i = 0; i < M; ++i)
        samples.push_back(rot2(2.0 * M_PI * turns * i / (M - 1)));
    return SymplecticPath(1, std::move(samples));
}

inline SymplecticPath exp_cz_path(const Eigen::MatrixXd& S, int M) {
    const int n = static_cast<int>(S.rows()) / 2;
    const Eigen::MatrixXd G = standard_J(n) * S;
    std::vector<Eigen::MatrixXd> samples;
    samples.reserve(M);
    for (int i = 0; i < M; ++i) {
        const double t = static_cast<double>(i) / (M - 1);
        samples.push_back((t * G).exp());
    }
    return SymplecticPath(n, std::move(samples));
}

// symmetric 2x2 coefficient whose path exp(t J0 S) has a nondegenerate end
inline Eigen::MatrixXd random_cz_coefficient(std::mt19937& rng) {
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int tries = 0; tries < 400; ++tries) {
        Eigen::MatrixXd S(2, 2);
        const double a = u(rng), b = u(rng), c = u(rng);
        S << a, c, c, b;
        if (std::abs(S.determinant()) < 0.3) continue;
        const Eigen::MatrixXd end = (standard_J(1) * S).exp();
        if (std::abs((end - Eigen::MatrixXd::Identity(2, 2)).determinant()) < 1e-3) continue;
        return S;
    }
    throw std::runtime_error("verify: could not sample a nondegenerate path coefficient");
}

// -- verify: the three suites --------------------------------------------------

inline void suite_nodal(const CliConfig& cfg, CheckReporter& rep) {
    const GluingParameter a = GluingParameter::from_R(cfg.R, cfg.theta);
    const int nt = cfg.Nt;
    const int ns = static_cast<int>(std::lround(cfg.R / cfg.Ds)) + 1;
    // halves live on [0, R + S_pad]: the grid the anti-gluing reads and the
    // unglue solve hands back, so round trips compare pointwise
    const double smax_half = cfg.R + kAntiPad;
    const int ns_half = static_cast<int>(std::lround(smax_half / cfg.Ds)) + 1;
    std::mt19937 rng(cfg.seed);

    const CutoffModel models[] = {CutoffModel::ExpQuotient, CutoffModel::QuinticStep};
    const char* tags[] = {" [exp]", " [quintic]"};
    for (int mi = 0; mi < 2; ++mi) {
        const CutoffModel model = models[mi];
        double e_f = 0.0, e_fhat = 0.0, e_unglue = 0.0, e_unglue_hat = 0.0;
        for (int round = 0; round < 10; ++round) {
            // reglue of the canonical splitting, with and without the average term
            const auto w = random_cylinder(a, 2, ns, nt, rng);
            const auto dec = split_f(GluedValue{w}, model);
            const auto back =
                std::get<FiniteCylinderField>(oplus(a, dec.eta_x, dec.eta_y, model));
            e_f = std::max(e_f, max_abs_diff(back.data, w.data));
            const auto dech = f_hat(GluedValue{w}, model);
            const auto backh =
                std::get<FiniteCylinderField>(oplus_hat(a, dech.eta_x, dech.eta_y, model));
            e_fhat = std::max(e_fhat, max_abs_diff(backh.data, w.data));

            // full unglue from the glued/anti-glued pair, constants included
            std::uniform_real_distribution<double> cdist(-1.0, 1.0);
            const std::vector<double> c = {cdist(rng), cdist(rng)};
            const auto ux = random_half(+1, 2, ns_half, nt, smax_half, c, 2.0, rng);
            const auto uy = random_half(-1, 2, ns_half, nt, smax_half, c, 2.0, rng);
            const auto wg = oplus_field(a, ux, uy, model);
            const auto vg = std::get<AntiGluedField>(ominus(a, ux, uy, model));
            const auto recovered = unglue_pair(wg, vg, a, model);
            e_unglue = std::max(e_unglue, std::max(max_value_diff(recovered.hx, ux),
                                                   max_value_diff(recovered.hy, uy)));

            const auto hx =
                random_half(+1, 2, ns_half, nt, smax_half, {0.0, 0.0}, 2.0, rng);
            const auto hy =
                random_half(-1, 2, ns_half, nt, smax_half, {0.0, 0.0}, 2.0, rng);
            const auto wh = std::get<FiniteCylinderField>(oplus_hat(a, hx, hy, model));
            const auto vh = std::get<AntiGluedField>(ominus_hat(a, hx, hy, model));
            const auto rech = unglue_pair_hat(wh, vh, a, model);
            e_unglue_hat = std::max(e_unglue_hat, std::max(max_value_diff(rech.hx, hx),
                                                           max_value_diff(rech.hy, hy)));
        }
        rep.line(std::string("⊕∘f reglue") + tags[mi], e_f, 1e-12);
        rep.line(std::string("⊕̂∘f̂ reglue") + tags[mi], e_fhat, 1e-12);
        rep.line(std::string("(⊕,⊖) unglue round trip") + tags[mi], e_unglue, 1e-9);
        rep.line(std::string("(⊕̂,⊖̂) unglue round trip") + tags[mi], e_unglue_hat, 1e-10);
    }
}

inline void suite_orbit(const CliConfig& cfg, CheckReporter& rep) {
    const PeriodicOrbit orb = standard_circle_orbit(2, 16, 2.0, 2);
    const AveragingChart chart;
    const double r = 0.2;
    const StandardMap q(0.4, 0.9, 0.3, wrap01(-0.25 - 0.3), orb);
    const GluingParameter a = a_param(r, q.cx, q.cy, orb.T, q.twist());
    const int nt = cfg.Nt;
    // odd row count keeps the middle loop s = R/2 on the grid
    const int ns = (static_cast<int>(std::lround(a.R / cfg.Ds)) + 1) | 1;
    const int nc = 1 + orb.ncomp;

    auto pert = [&](int sign, double amp, double phase) {
        std::vector<double> data(static_cast<std::size_t>(ns) * nt * nc);
        const double ds = a.R / (ns - 1);
        for (int i = 0; i < ns; ++i)
            for (int j = 0; j < nt; ++j)
                for (int k = 0; k < nc; ++k)
                    data[(static_cast<std::size_t>(i) * nt + j) * nc + k] =
                        amp * std::exp(-0.8 * i * ds) *
                        std::cos(kTwoPi * j / nt + phase * (k + 1));
        return HalfCylinderField(sign, nc, ns, nt, a.R, std::vector<double>(nc, 0.0),
                                 std::move(data), WeightSequence{}, false);
    };

    const CutoffModel models[] = {CutoffModel::ExpQuotient, CutoffModel::QuinticStep};
    const char* tags[] = {" [exp]", " [quintic]"};
    for (int mi = 0; mi < 2; ++mi) {
        const CutoffModel model = models[mi];
        const OrbitElement elem = make_boundary_element(r, q, pert(+1, 0.3, 0.7),
                                                        pert(-1, 0.25, 0.3));
        const FiniteCylinderField w = bar_oplus(elem, model).interior().w;

        const FiniteCylinderField backH =
            bar_oplus(coretraction_H(r, w, orb, model), model).interior().w;
        rep.line(std::string("⊕̄∘H reglue") + tags[mi], max_abs_diff(backH.data, w.data),
                 1e-10);

        const FiniteCylinderField backK =
            bar_oplus(coretraction_K(r, w, orb, chart, model), model).interior().w;
        rep.line(std::string("⊕̄∘K reglue") + tags[mi], max_abs_diff(backK.data, w.data),
                 1e-10);
    }

    // a pure standard map survives the glue/average round trip up to the deck action
    auto zero = [&](int sign) {
        return HalfCylinderField(sign, nc, ns, nt, a.R, std::vector<double>(nc, 0.0),
                                 std::vector<double>(static_cast<std::size_t>(ns) * nt * nc, 0.0),
                                 WeightSequence{}, false);
    };
    const OrbitElement pure = make_boundary_element(r, q, zero(+1), zero(-1));
    const StandardMap p = averaging_A_Phi(pure, orb, chart);
    rep.line("A_Φ∘⊕̄ recovers the map", map_error_mod_k(p, q), 1e-10);

    // rotating the x decoration by -tau drops its circle average by k*tau
    double e_shift = 0.0, e_const = 0.0;
    for (double tau : {0.1, 0.37}) {
        const StandardMap qd(q.cx, q.cy, wrap01(q.theta_x - tau), wrap01(q.theta_y + tau), orb);
        const double d0 = q.derived_phase(chart);
        const double d1 = qd.derived_phase(chart);
        e_shift = std::max(e_shift, circle_dist(d1, wrap01(d0 - orb.k * tau)));

        const OrbitElement decorated = make_boundary_element(r, qd, zero(+1), zero(-1));
        const StandardMap pd = averaging_A_Phi(decorated, orb, chart);
        e_const = std::max(e_const, std::max(std::abs(pd.cx - p.cx), std::abs(pd.cy - p.cy)));
    }
    rep.line("marker average drops by k·τ", e_shift, 1e-10);
    rep.line("decorations leave (cx, cy) unchanged", e_const, 1e-12);
}

inline void suite_operators(const CliConfig& cfg, CheckReporter& rep) {
    // one-sided derivative checks of the profile rescaling maps at 0
    const double h = 1e-4;
    for (double T : {0.5, 2.0, 10.0}) {
        rep.line("d/dx B_T(0) = 1 (T=" + fmt3(T) + ")", std::abs(calc_B(T, h) / h - 1.0), 1e-3);
        rep.line("d/dx g_T(0) = ln T (T=" + fmt3(T) + ")",
                 std::abs(calc_g(T, h) / h - std::log(T)), 1e-3);
        double worst = 0.0;
        for (double c : {-0.5, 0.0, 3.0})
            worst = std::max(worst,
                             std::abs((calc_C(T, h, c) - calc_C(T, 0.0, c)) / h - 1.0));
        rep.line("d/dx C_T(0,c) = 1 (T=" + fmt3(T) + ")", worst, 1e-3);
    }

    // index axioms: generators, inverses, sums, and the loop shift
    const int M = 33;
    std::mt19937 rng(cfg.seed);
    {
        std::vector<Eigen::MatrixXd> samples;
        samples.reserve(M);
        for (int i = 0; i < M; ++i) samples.push_back(rot2(M_PI * i / (M - 1)));
        rep.exact("μ_CZ(e^{πit})=1", conley_zehnder(SymplecticPath(1, std::move(samples))), 1);
    }
    rep.exact("μ_M(e^{2πit})=1", maslov_loop(rotation_cz_path(1.0, M)), 1);
    {
        const SymplecticPath path = exp_cz_path(random_cz_coefficient(rng), M);
        std::vector<Eigen::MatrixXd> inv;
        inv.reserve(M);
        for (const auto& P : path.samples) inv.push_back(P.inverse());
        rep.exact("μ_CZ(Φ)+μ_CZ(Φ⁻¹)=0",
                  conley_zehnder(path) + conley_zehnder(SymplecticPath(1, std::move(inv))), 0);
    }
    {
        const SymplecticPath A = exp_cz_path(random_cz_coefficient(rng), M);
        const SymplecticPath B = exp_cz_path(random_cz_coefficient(rng), M);
        std::vector<Eigen::MatrixXd> sum;
        sum.reserve(M);
        for (int i = 0; i < M; ++i) {
            Eigen::MatrixXd P = Eigen::MatrixXd::Zero(4, 4);
            P.topLeftCorner(2, 2) = A.samples[i];
            P.bottomRightCorner(2, 2) = B.samples[i];
            sum.push_back(std::move(P));
        }
        rep.exact("μ_CZ(Φ⊕Ψ)=μ_CZ(Φ)+μ_CZ(Ψ)",
                  conley_zehnder(SymplecticPath(2, std::move(sum))) - conley_zehnder(A) -
                      conley_zehnder(B),
                  0);
    }
    {
        const SymplecticPath loop = rotation_cz_path(1.0, M);
        long worst_shift = 2;
        for (int trial = 0; trial < 5; ++trial) {
            const SymplecticPath path = exp_cz_path(random_cz_coefficient(rng), M);
            std::vector<Eigen::MatrixXd> prod;
            prod.reserve(M);
            for (int i = 0; i < M; ++i) prod.push_back(loop.samples[i] * path.samples[i]);
            const long shift = conley_zehnder(SymplecticPath(1, std::move(prod))) -
                               conley_zehnder(path);
            if (shift != 2) worst_shift = shift;
        }
        rep.exact("μ_CZ(α·Φ)=μ_CZ(Φ)+2μ_M(α)", worst_shift, 2);
    }
}

}  // namespace detail

// -- commands -------------------------------------------------------------------

inline int cmd_verify(const CliConfig& cfg, std::ostream& os) {
    detail::check_t_grid(cfg.Nt);
    if (!(cfg.Ds > 0.0) || cfg.Ds > 0.5)
        throw std::invalid_argument("verify: need 0 < Ds <= 0.5");
    if (!(cfg.R > 0.0)) throw std::invalid_argument("verify: need R > 0");
    if (cfg.suite != "all" && cfg.suite != "nodal" && cfg.suite != "orbit" &&
        cfg.suite != "operators")
        throw std::invalid_argument("verify: suite must be all, nodal, orbit, or operators");

    detail::CheckReporter rep{os};
    const bool all = cfg.suite == "all";
    if (all || cfg.suite == "nodal") {
        os << "suite nodal\n";
        detail::suite_nodal(cfg, rep);
    }
    if (all || cfg.suite == "orbit") {
        os << "suite orbit\n";
        detail::suite_orbit(cfg, rep);
    }
    if (all || cfg.suite == "operators") {
        os << "suite operators\n";
        detail::suite_operators(cfg, rep);
    }
    os << rep.checks << " checks, " << rep.failures << " failures\n";
    return rep.failures == 0 ? 0 : 1;
}

inline int cmd_glue(const CliConfig& cfg, std::ostream& os) {
    if (!(cfg.R > 0.0))
        throw std::domain_error("glue: need R > 0 (the zero parameter leaves the pair apart)");
    const CutoffModel model = detail::cutoff_model(cfg.model);
    const GluingParameter a = GluingParameter::from_R(cfg.R, cfg.theta);

    AnyField fx = detail::parse_file(cfg.in_x, [](std::istream& is) { return read_field(is); });
    AnyField fy = detail::parse_file(cfg.in_y, [](std::istream& is) { return read_field(is); });
    if (!std::holds_alternative<HalfCylinderField>(fx) ||
        !std::holds_alternative<HalfCylinderField>(fy))
        throw std::invalid_argument("glue: --x and --y must be half-cylinder fields");
    const auto& ux = std::get<HalfCylinderField>(fx);
    const auto& uy = std::get<HalfCylinderField>(fy);

    const GluedValue w = cfg.hat ? oplus_hat(a, ux, uy, model) : oplus(a, ux, uy, model);
    write_field_file(cfg.out, std::get<FiniteCylinderField>(w));
    if (!cfg.out_anti.empty()) {
        const AntiGluedValue v =
            cfg.hat ? ominus_hat(a, ux, uy, model) : ominus(a, ux, uy, model);
        write_field_file(cfg.out_anti, std::get<AntiGluedField>(v));
    }
    os << "glued R=" << detail::fmt(a.R) << " theta=" << detail::fmt(a.theta) << " -> "
       << cfg.out << "\n";
    return 0;
}

inline int cmd_unglue(const CliConfig& cfg, std::ostream& os) {
    const CutoffModel model = detail::cutoff_model(cfg.model);
    AnyField fw = detail::parse_file(cfg.in_w, [](std::istream& is) { return read_field(is); });
    if (!std::holds_alternative<FiniteCylinderField>(fw))
        throw std::invalid_argument("unglue: --w must be a finite-cylinder field");
    const auto& w = std::get<FiniteCylinderField>(fw);

    if (!cfg.in_v.empty()) {
        AnyField fv =
            detail::parse_file(cfg.in_v, [](std::istream& is) { return read_field(is); });
        if (!std::holds_alternative<AntiGluedField>(fv))
            throw std::invalid_argument("unglue: --v must be an anti-glued field");
        const auto& v = std::get<AntiGluedField>(fv);
        const UngluedPair rec = cfg.hat ? unglue_pair_hat(w, v, w.param, model)
                                        : unglue_pair(w, v, w.param, model);
        write_field_file(cfg.out_x, rec.hx);
        write_field_file(cfg.out_y, rec.hy);
        os << "unglued pair -> " << cfg.out_x << ", " << cfg.out_y
           << " (smallest window determinant " << detail::fmt3(rec.det_min) << ")\n";
        return 0;
    }

    const GluedPairDecomposition dec =
        cfg.hat ? f_hat(GluedValue{w}, model) : split_f(GluedValue{w}, model);
    write_field_file(cfg.out_x, dec.eta_x);
    write_field_file(cfg.out_y, dec.eta_y);
    os << "split -> " << cfg.out_x << ", " << cfg.out_y << "\n";
    return 0;
}

inline int cmd_orbit_avg(const CliConfig& cfg, std::ostream& os) {
    const PeriodicOrbit orbit =
        detail::parse_file(cfg.orbit_file, [](std::istream& is) { return read_orbit(is); });
    const OrbitElement elem = detail::parse_file(
        cfg.elem_file, [&](std::istream& is) { return read_orbit_element(is, orbit); });
    const AveragingChart chart;
    const StandardMap p =
        averaging_A_Phi(elem, orbit, chart, detail::cutoff_model(cfg.model));
    detail::with_output(cfg, os, [&](std::ostream& dst) {
        if (cfg.format == "csv") {
            dst << "cx,cy,theta_x,theta_y\n"
                << detail::fmt(p.cx) << ',' << detail::fmt(p.cy) << ',' << detail::fmt(p.theta_x)
                << ',' << detail::fmt(p.theta_y) << '\n';
        } else {
            dst << "cx=" << detail::fmt(p.cx) << " cy=" << detail::fmt(p.cy)
                << " theta_x=" << detail::fmt(p.theta_x) << " theta_y=" << detail::fmt(p.theta_y)
                << "\n";
        }
    });
    return 0;
}

inline int cmd_spectrum(const CliConfig& cfg, std::ostream& os) {
    if (cfg.loop_file.empty() == cfg.orbit_file.empty())
        throw std::invalid_argument("spectrum: pass exactly one of --loop or --orbit");
    std::string param;
    SpectrumResult spec;
    if (!cfg.loop_file.empty()) {
        const LoopOperator L =
            detail::parse_file(cfg.loop_file, [](std::istream& is) { return read_loop(is); });
        spec = asymptotic_spectrum(L, cfg.K);
        param = detail::file_stem(cfg.loop_file);
    } else {
        // a sampled k-covered orbit carries its rotation frame: constant
        // coefficient 2 pi k Id on the even-dimensional sample space, so the
        // spectrum is the integer lattice with the orbit-family degeneracy at 0
        const PeriodicOrbit orbit =
            detail::parse_file(cfg.orbit_file, [](std::istream& is) { return read_orbit(is); });
        if (orbit.ncomp % 2 != 0)
            throw std::invalid_argument(
                "spectrum: orbit sample space must be even-dimensional for the rotation frame");
        const int n = orbit.ncomp / 2;
        const Eigen::MatrixXd S =
            kTwoPi * orbit.k * Eigen::MatrixXd::Identity(2 * n, 2 * n);
        spec = asymptotic_spectrum(constant_loop_operator(n, orbit.nt, S), cfg.K);
        param = detail::file_stem(cfg.orbit_file);
    }

    detail::with_output(cfg, os, [&](std::ostream& dst) {
        if (cfg.format == "report") {
            for (std::size_t i = 0; i < spec.cluster_values.size(); ++i)
                dst << "  " << detail::fmt(spec.cluster_values[i]) << "  x"
                    << spec.multiplicities[i] << "\n";
            dst << "gap around 0: (" << detail::fmt(spec.gap_lo) << ", "
                << detail::fmt(spec.gap_hi) << ")\n";
            const auto delta0 = admissible_weight(spec);
            if (delta0)
                dst << "admissible weight " << detail::fmt(*delta0) << "\n";
            else
                dst << "degenerate: 0 lies in the spectrum\n";
        } else {
            write_spectrum_csv(dst, param, spec);
        }
    });
    return 0;
}

inline int cmd_index(const CliConfig& cfg, std::ostream& os) {
    if (cfg.steps < 1 || cfg.steps > 10000)
        throw std::invalid_argument("index: need 1 <= steps <= 10000");
    if (!(cfg.delta_from > 0.0) || cfg.delta_to < cfg.delta_from)
        throw std::invalid_argument("index: need 0 < delta-from <= delta-to");

    std::vector<IndexRow> rows;
    rows.reserve(cfg.steps);
    for (int i = 0; i < cfg.steps; ++i) {
        const double d = cfg.steps == 1 ? cfg.delta_from
                                        : cfg.delta_from + i * (cfg.delta_to - cfg.delta_from) /
                                                               (cfg.steps - 1);
        const double dist = std::abs(d - 2.0 * M_PI * std::round(d / (2.0 * M_PI)));
        if (dist <= 1e-3)
            throw std::range_error("index: delta " + detail::fmt(d) +
                                   " is within 1e-3 of a spectral resonance 2*pi*m");
        // resonance distance sets the domain length: counted solutions decay
        // like e^{-dist s}, and 16 e-foldings keeps their boundary amplitude
        // under the 1e-6 truncation alarm
        const double S = cfg.cr_S > 0.0
                             ? cfg.cr_S
                             : std::max(12.0, std::ceil((16.0 / dist + 1.0) / cfg.cr_ds) *
                                                  cfg.cr_ds);
        const CRConfig line{cfg.n, d, cfg.cr_modes, S, cfg.cr_ds};
        rows.push_back(IndexRow{d, cr_index(line)});
    }
    detail::with_output(cfg, os, [&](std::ostream& dst) { write_index_csv(dst, rows); });
    return 0;
}

inline int cmd_cz(const CliConfig& cfg, std::ostream& os) {
    const SymplecticPath path =
        detail::parse_file(cfg.path_file, [](std::istream& is) { return read_path(is); });
    os << conley_zehnder(path) << "\n";
    return 0;
}

inline int cmd_probe(const CliConfig& cfg, std::ostream& os) {
    const std::vector<std::string> names =
        cfg.targets == "all" ? probe_target_names() : detail::split_names(cfg.targets);
    std::vector<NamedProbe> probes;
    probes.reserve(names.size());
    for (const auto& name : names) probes.push_back(make_probe(name));
    if (!cfg.delta.empty()) {
        WeightSequence ladder;
        ladder.deltas = cfg.delta;
        ladder.validate();
        for (auto& p : probes) p.probe.levels = ladder;
    }
    SuiteReport report;
    report.entries.resize(probes.size());
    detail::parallel_for(static_cast<int>(probes.size()), [&](int i) {
        report.entries[static_cast<std::size_t>(i)] =
            run_probe(probes[static_cast<std::size_t>(i)]);
    });
    for (const auto& e : report.entries)
        report.all_pass = report.all_pass && e.sc0_pass && e.sc1_pass;
    detail::with_output(cfg, os, [&](std::ostream& dst) { write_report(dst, report); });
    return report.all_pass ? 0 : 1;
}

// -- argument parsing and dispatch ----------------------------------------------

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CliConfig cfg;
    CLI::App app{"workbench for the cylinder gluing calculus: identity suites, "
                 "spectra, indices, field files, smoothness probes"};
    app.require_subcommand(1);

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--Nt", cfg.Nt, "t samples per loop (even, >= 8)");
        sub->add_option("--Ds", cfg.Ds, "s grid step");
        sub->add_option("--Smax", cfg.Smax, "half-cylinder length (default: the neck length)");
        sub->add_option("--R", cfg.R, "neck length");
        sub->add_option("--theta", cfg.theta, "gluing angle in [0,1)");
        sub->add_option("--delta", cfg.delta, "weight ladder, comma separated")
            ->delimiter(',');
        sub->add_option("--seed", cfg.seed, "rng seed");
        sub->add_option("--out", cfg.out, "output file (default stdout)");
        sub->add_option("--format", cfg.format, "csv|report")
            ->check(CLI::IsMember({"csv", "report"}));
        return sub;
    };

    CLI::App* verify = add_common(app.add_subcommand("verify", "run the identity suites"));
    verify->add_option("--suite", cfg.suite, "all|nodal|orbit|operators");

    CLI::App* glue = add_common(app.add_subcommand("glue", "glue two half-cylinder fields"));
    glue->add_option("--x", cfg.in_x, "plus half field file")->required();
    glue->add_option("--y", cfg.in_y, "minus half field file")->required();
    glue->add_option("--model", cfg.model, "cutoff model: exp|quintic");
    glue->add_option("--anti", cfg.out_anti, "also write the anti-glued field here");
    glue->add_flag("--hat", cfg.hat, "zero-constant variant");

    CLI::App* unglue =
        add_common(app.add_subcommand("unglue", "split a glued field back into halves"));
    unglue->add_option("--w", cfg.in_w, "glued field file")->required();
    unglue->add_option("--v", cfg.in_v, "anti-glued field file (omit for the plain split)");
    unglue->add_option("--out-x", cfg.out_x, "plus half output")->required();
    unglue->add_option("--out-y", cfg.out_y, "minus half output")->required();
    unglue->add_option("--model", cfg.model, "cutoff model: exp|quintic");
    unglue->add_flag("--hat", cfg.hat, "zero-constant variant");

    CLI::App* avg =
        add_common(app.add_subcommand("orbit-avg", "average an orbit element to a standard map"));
    avg->add_option("--orbit", cfg.orbit_file, "orbit file")->required();
    avg->add_option("--elem", cfg.elem_file, "orbit element file")->required();
    avg->add_option("--model", cfg.model, "cutoff model: exp|quintic");

    CLI::App* spectrum =
        add_common(app.add_subcommand("spectrum", "spectrum of an asymptotic loop operator"));
    spectrum->add_option("--loop", cfg.loop_file, "coefficient loop file");
    spectrum->add_option("--orbit", cfg.orbit_file, "orbit file (rotation frame)");
    spectrum->add_option("--K", cfg.K, "Fourier mode cutoff");

    CLI::App* index =
        add_common(app.add_subcommand("index", "kernel/cokernel sweep over the weight"));
    index->add_option("--n", cfg.n, "complex target dimension");
    index->add_option("--delta-from", cfg.delta_from, "first weight");
    index->add_option("--delta-to", cfg.delta_to, "last weight");
    index->add_option("--steps", cfg.steps, "sweep length");
    index->add_option("--S", cfg.cr_S, "domain half-length (default: set per delta)");
    index->add_option("--ds", cfg.cr_ds, "grid step");
    index->add_option("--modes", cfg.cr_modes, "Fourier truncation");

    CLI::App* cz = add_common(app.add_subcommand("cz", "index of a symplectic path"));
    cz->add_option("--path", cfg.path_file, "path file")->required();

    CLI::App* probe =
        add_common(app.add_subcommand("probe", "decay and difference-quotient probes"));
    probe->add_option("--targets", cfg.targets, "comma list of targets, or all");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return 2;
    }
    cfg.command = app.get_subcommands().front()->get_name();

    try {
        if (cfg.command == "verify") return cmd_verify(cfg, out);
        if (cfg.command == "glue") return cmd_glue(cfg, out);
        if (cfg.command == "unglue") return cmd_unglue(cfg, out);
        if (cfg.command == "orbit-avg") return cmd_orbit_avg(cfg, out);
        if (cfg.command == "spectrum") return cmd_spectrum(cfg, out);
        if (cfg.command == "index") return cmd_index(cfg, out);
        if (cfg.command == "cz") return cmd_cz(cfg, out);
        if (cfg.command == "probe") return cmd_probe(cfg, out);
        throw std::logic_error("unhandled command " + cfg.command);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace scglue
