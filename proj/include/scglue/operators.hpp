#pragma once

// CR-type operators on weighted cylinders: the half d-bar operator with
// spectral t-derivatives, per-mode weighted line operators with
// kernel/cokernel counts, self-adjoint asymptotic loop operators with spectra,
// spectral gaps and admissible weights, and Maslov / Conley-Zehnder indices of
// symplectic paths.

#include <algorithm>
#include <cmath>
#include <complex>
#include <iostream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "fields.hpp"
#include "io.hpp"
#include "profile.hpp"

namespace scglue {

// Standard complex structure on R^{2n}: 2x2 rotation blocks on interleaved
// (x_j, y_j) pairs, so z_j = x_j + i y_j.
inline Eigen::MatrixXd standard_J(int n) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (int j = 0; j < n; ++j) {
        J(2 * j, 2 * j + 1) = -1.0;
        J(2 * j + 1, 2 * j) = 1.0;
    }
    return J;
}

// -- half d-bar operator on a finite cylinder --------------------------------

namespace detail {

inline long snap_count(double pos, const char* what) {
    const long i = std::lround(pos);
    if (std::abs(pos - static_cast<double>(i)) > 1e-9 * (1.0 + std::abs(pos)))
        throw std::invalid_argument(std::string(what) + ": length must sit on the grid");
    return i;
}

// one row of spectral t-derivatives: loop values -> derivative values
inline void spectral_dt_row(const double* f, int nt, int stride, double* out, int out_stride) {
    const int half = nt / 2;
    std::vector<double> a(half + 1, 0.0), b(half + 1, 0.0);
    for (int m = 0; m <= half; ++m) {
        for (int j = 0; j < nt; ++j) {
            const double ang = 2.0 * M_PI * m * j / nt;
            a[m] += f[j * stride] * std::cos(ang);
            b[m] += f[j * stride] * std::sin(ang);
        }
        const double scale = (m == 0 || m == half) ? 1.0 / nt : 2.0 / nt;
        a[m] *= scale;
        b[m] *= scale;
    }
    for (int j = 0; j < nt; ++j) {
        double g = 0.0;
        for (int m = 1; m < half; ++m) {
            const double ang = 2.0 * M_PI * m * j / nt;
            g += 2.0 * M_PI * m * (-a[m] * std::sin(ang) + b[m] * std::cos(ang));
        }
        // the Nyquist cosine has zero derivative at the nodes
        out[j * out_stride] = g;
    }
}

// d/ds along columns: 6th-order centered interior, one-sided at the ends
inline void fd_ds_column(const std::vector<double>& v, int ns, std::size_t stride, double ds,
                         std::size_t base, std::vector<double>& out) {
    auto at = [&](int i) { return v[base + static_cast<std::size_t>(i) * stride]; };
    auto put = [&](int i, double val) { out[base + static_cast<std::size_t>(i) * stride] = val; };
    for (int i = 0; i < ns; ++i) {
        double d;
        if (i >= 3 && i + 3 < ns) {
            d = (45.0 * (at(i + 1) - at(i - 1)) - 9.0 * (at(i + 2) - at(i - 2)) +
                 (at(i + 3) - at(i - 3))) /
                (60.0 * ds);
        } else if (i == 0) {
            d = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * ds);
        } else if (i == ns - 1) {
            d = (3.0 * at(ns - 1) - 4.0 * at(ns - 2) + at(ns - 3)) / (2.0 * ds);
        } else {
            d = (at(i + 1) - at(i - 1)) / (2.0 * ds);
        }
        put(i, d);
    }
}

}  // namespace detail

// (1/2)(u_s + i u_t) for fields into C^n stored as interleaved (Re, Im)
// pairs; spectral derivative in t, centered differences in s (6th order in
// the interior, one-sided at the s-ends).
inline FiniteCylinderField dbar_cylinder(const FiniteCylinderField& u) {
    if (u.ncomp % 2 != 0)
        throw std::invalid_argument("dbar_cylinder: components must pair into complex coordinates");
    if (u.ds() > 0.5) throw std::invalid_argument("dbar_cylinder: grid too coarse");
    const int ns = u.ns, nt = u.nt, nc = u.ncomp;
    std::vector<double> us(u.data.size()), ut(u.data.size());
    for (int j = 0; j < nt; ++j)
        for (int k = 0; k < nc; ++k)
            detail::fd_ds_column(u.data, ns, static_cast<std::size_t>(nt) * nc, u.ds(),
                                 static_cast<std::size_t>(j) * nc + k, us);
    for (int i = 0; i < ns; ++i)
        for (int k = 0; k < nc; ++k)
            detail::spectral_dt_row(&u.data[(static_cast<std::size_t>(i) * nt) * nc + k], nt, nc,
                                    &ut[(static_cast<std::size_t>(i) * nt) * nc + k], nc);
    FiniteCylinderField out = u;
    for (std::size_t idx = 0; idx < u.data.size(); idx += nc)
        for (int p = 0; p < nc / 2; ++p) {
            const std::size_t re = idx + 2 * p, im = idx + 2 * p + 1;
            out.data[re] = 0.5 * (us[re] - ut[im]);
            out.data[im] = 0.5 * (us[im] + ut[re]);
        }
    return out;
}

// -- weighted line operators per Fourier mode --------------------------------

// Configuration of the model CR operator on [-S,S] x S^1 with weight delta.
struct CRConfig {
    int n = 1;          // complex target dimension
    double delta = 0.0; // signed weight
    int n_modes = 4;    // Fourier truncation |m| <= K
    double S = 5.0;
    double ds = 0.05;

    void validate() const {
        if (n < 1) throw std::invalid_argument("CRConfig: need n >= 1");
        if (n_modes < 4) throw std::invalid_argument("CRConfig: need at least 4 modes");
        if (!(ds > 0.0) || ds > 0.5) throw std::invalid_argument("CRConfig: grid too coarse");
        if (!(S > 0.0)) throw std::invalid_argument("CRConfig: need S > 0");
        // the weight must be resolved over the domain length: distance from
        // |delta| to the nearest resonance 2 pi m, times S, at least 8
        const double ad = std::abs(delta);
        const double dist = std::abs(ad - 2.0 * M_PI * std::round(ad / (2.0 * M_PI)));
        if (S * dist < 8.0)
            throw std::invalid_argument("CRConfig: weight too close to a resonance for this S");
    }

    int grid_points() const {
        const long half = detail::snap_count(S / ds, "CRConfig");
        return static_cast<int>(2 * half + 1);
    }
    double s_at(int i) const { return (i - (grid_points() - 1) / 2) * ds; }
};

namespace detail {

// box-scheme matrix of +-d/ds + q(s) with decay penalties at the ends;
// q is evaluated at midpoints so sign(s) never sees the node
inline Eigen::MatrixXd line_operator_matrix(const CRConfig& cfg, int mode,
                                            double derivative_sign) {
    const int N = cfg.grid_points();
    const double w_b = 1e-3;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N + 1, N);
    for (int i = 0; i + 1 < N; ++i) {
        const double smid = 0.5 * (cfg.s_at(i) + cfg.s_at(i + 1));
        const double q = cfg.delta * (smid > 0.0 ? 1.0 : -1.0) - 2.0 * M_PI * mode;
        A(i, i) = -derivative_sign / cfg.ds + 0.5 * q;
        A(i, i + 1) = derivative_sign / cfg.ds + 0.5 * q;
    }
    A(N - 1, 0) = w_b;
    A(N, N - 1) = w_b;
    return A;
}

struct NullCount {
    int dim = 0;
    bool boundary_mass = false;  // counted vectors carry boundary values > 1e-6
};

inline NullCount count_decaying_solutions(const Eigen::MatrixXd& A) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double tol = 1e-6 * sv(0);
    NullCount out;
    double largest_counted = 0.0, smallest_uncounted = sv(0);
    for (int i = 0; i < sv.size(); ++i) {
        if (sv(i) < tol) {
            ++out.dim;
            largest_counted = std::max(largest_counted, sv(i));
            const Eigen::VectorXd v = svd.matrixV().col(i);
            const double edge = std::max(std::abs(v(0)), std::abs(v(v.size() - 1)));
            if (edge > 1e-6 * v.norm()) out.boundary_mass = true;
        } else {
            smallest_uncounted = std::min(smallest_uncounted, sv(i));
        }
    }
    if (out.dim > 0 && smallest_uncounted < 1e3 * largest_counted)
        throw std::runtime_error("cr_index: kernel count ambiguous (no 10^3 singular-value gap)");
    return out;
}

}  // namespace detail

struct CRIndexResult {
    int kernel_dim_real = 0;
    int cokernel_dim_real = 0;
    int index_real = 0;
    bool truncation_warning = false;
};

// Kernel/cokernel of the model CR operator on the weighted cylinder, counted
// per Fourier mode after conjugating the weight into the drift delta*sign(s).
inline CRIndexResult cr_index(const CRConfig& cfg) {
    cfg.validate();
    CRIndexResult res;
    int kernel_modes = 0, cokernel_modes = 0;
    for (int m = -cfg.n_modes; m <= cfg.n_modes; ++m) {
        const auto ker =
            detail::count_decaying_solutions(detail::line_operator_matrix(cfg, m, +1.0));
        const auto cok =
            detail::count_decaying_solutions(detail::line_operator_matrix(cfg, m, -1.0));
        kernel_modes += ker.dim;
        cokernel_modes += cok.dim;
        if (ker.boundary_mass || cok.boundary_mass) res.truncation_warning = true;
    }
    if (2.0 * M_PI * (cfg.n_modes + 1) <= std::abs(cfg.delta)) res.truncation_warning = true;
    if (res.truncation_warning)
        std::clog << "cr_index: counted solutions carry boundary mass above 1e-6; "
                     "enlarge S or the mode cutoff\n";
    res.kernel_dim_real = 2 * cfg.n * kernel_modes;
    res.cokernel_dim_real = 2 * cfg.n * cokernel_modes;
    res.index_real = res.kernel_dim_real - res.cokernel_dim_real;
    return res;
}

// -- solve in the antipodal-constant space -----------------------------------

struct ApSolution {
    std::vector<std::complex<double>> v;  // grid values including the constant tails
    std::complex<double> c{0.0, 0.0};     // antipodal constant: -c at -S, +c at +S
    bool ill_conditioned = false;
};

// Apply d/ds - 2 pi m to grid values; results live at midpoints.
inline std::vector<std::complex<double>> cr_apply_ap(const CRConfig& cfg, int mode,
                                                     const std::vector<std::complex<double>>& v) {
    const int N = cfg.grid_points();
    if (static_cast<int>(v.size()) != N)
        throw std::invalid_argument("cr_apply_ap: grid size mismatch");
    std::vector<std::complex<double>> g(N - 1);
    for (int i = 0; i + 1 < N; ++i)
        g[i] = (v[i + 1] - v[i]) / cfg.ds - M_PI * mode * (v[i] + v[i + 1]);
    return g;
}

// Solve (d/ds - 2 pi m) v = g with decay at the ends; mode 0 carries the
// antipodal constant pair (v(-S), v(S)) = (-c, +c) as an extra unknown.
inline ApSolution cr_solve_ap(const CRConfig& cfg, int mode,
                              const std::vector<std::complex<double>>& rhs_mid) {
    cfg.validate();
    if (!(cfg.delta > 0.0 && cfg.delta < 2.0 * M_PI))
        throw std::domain_error("cr_solve_ap: weight must lie in (0, 2 pi)");
    const int N = cfg.grid_points();
    if (static_cast<int>(rhs_mid.size()) != N - 1)
        throw std::invalid_argument("cr_solve_ap: rhs must live at the N-1 midpoints");
    const bool aug = (mode == 0);
    const int cols = N + (aug ? 1 : 0);
    const double w_b = 1e-3;
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(N + 1, cols);
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(N + 1);
    for (int i = 0; i + 1 < N; ++i) {
        A(i, i) = std::complex<double>(-1.0 / cfg.ds - M_PI * mode, 0.0);
        A(i, i + 1) = std::complex<double>(1.0 / cfg.ds - M_PI * mode, 0.0);
        b(i) = rhs_mid[i];
    }
    A(N - 1, 0) = w_b;
    A(N, N - 1) = w_b;
    if (aug) {
        A(N - 1, N) = w_b;   // v_0 + c = 0
        A(N, N) = -w_b;      // v_{N-1} - c = 0
    }
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXcd x = svd.solve(b);
    ApSolution sol;
    sol.v.assign(N, {0.0, 0.0});
    for (int i = 0; i < N; ++i) sol.v[i] = x(i);
    if (aug) sol.c = x(N);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    if (smin == 0.0 || sv(0) / smin > 1e8) {
        sol.ill_conditioned = true;
        std::clog << "cr_solve_ap: condition estimate above 1e8\n";
    }
    return sol;
}

// Round-trip defect solve(apply(x)) vs x over a probe basis; the isomorphism
// quality of the discretization.
inline double iso_residual(const CRConfig& cfg, unsigned seed = 20260815u) {
    cfg.validate();
    const int N = cfg.grid_points();
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    const int probe_modes[4] = {0, 1, -1, cfg.n_modes};
    for (int mode : probe_modes) {
        std::vector<std::complex<double>> x(N);
        const std::complex<double> c0 = mode == 0
                                            ? std::complex<double>(0.4 * u(rng), 0.3 * u(rng))
                                            : std::complex<double>(0.0, 0.0);
        const double f1 = 0.5 + 0.5 * std::abs(u(rng)), f2 = 0.5 + 0.5 * std::abs(u(rng));
        for (int i = 0; i < N; ++i) {
            const double s = cfg.s_at(i);
            const double env = std::exp(-s * s);
            x[i] = std::complex<double>(env * std::cos(f1 * s), env * std::sin(f2 * s));
            if (mode == 0) x[i] += (1.0 - 2.0 * beta(s)) * c0;
        }
        const auto g = cr_apply_ap(cfg, mode, x);
        const ApSolution sol = cr_solve_ap(cfg, mode, g);
        double err = std::abs(sol.c - c0), scale = 0.0;
        for (int i = 0; i < N; ++i) {
            err = std::max(err, std::abs(sol.v[i] - x[i]));
            scale = std::max(scale, std::abs(x[i]));
        }
        worst = std::max(worst, err / std::max(scale, 1e-30));
    }
    return worst;
}

// -- asymptotic loop operators -------------------------------------------------

// Loop of symmetric coefficient matrices S(t); the asymptotic operator is
// -J0 d/dt - S(t) acting on loops in R^{2n}.
struct LoopOperator {
    int n = 1;
    int nt = 0;
    std::vector<double> samples;  // nt x (2n x 2n), row-major per sample

    LoopOperator(int n, int nt, std::vector<double> samples)
        : n(n), nt(nt), samples(std::move(samples)) {
        if (n < 1) throw std::invalid_argument("LoopOperator: need n >= 1");
        detail::check_t_grid(nt);
        const int d = 2 * n;
        if (this->samples.size() != static_cast<std::size_t>(nt) * d * d)
            throw std::invalid_argument("LoopOperator: sample buffer size mismatch");
        for (int j = 0; j < nt; ++j)
            for (int p = 0; p < d; ++p)
                for (int q = p + 1; q < d; ++q)
                    if (std::abs(at(j, p, q) - at(j, q, p)) > 1e-12)
                        throw std::invalid_argument("LoopOperator: coefficient loop not symmetric");
        check_smooth();
    }

    double at(int j, int p, int q) const {
        const int d = 2 * n;
        return samples[(static_cast<std::size_t>(j) * d + p) * d + q];
    }

    Eigen::MatrixXd matrix_at(int j) const {
        const int d = 2 * n;
        Eigen::MatrixXd M(d, d);
        for (int p = 0; p < d; ++p)
            for (int q = 0; q < d; ++q) M(p, q) = at(j, p, q);
        return M;
    }

  private:
    void check_smooth() const {
        const int d = 2 * n, half = nt / 2;
        double peak = 0.0, tail = 0.0;
        for (int p = 0; p < d; ++p)
            for (int q = 0; q < d; ++q)
                for (int m = 0; m <= half; ++m) {
                    double a = 0.0, b = 0.0;
                    for (int j = 0; j < nt; ++j) {
                        const double ang = 2.0 * M_PI * m * j / nt;
                        a += at(j, p, q) * std::cos(ang);
                        b += at(j, p, q) * std::sin(ang);
                    }
                    const double scale = (m == 0 || m == half) ? 1.0 / nt : 2.0 / nt;
                    const double mag = std::hypot(a * scale, m == half ? 0.0 : b * scale);
                    peak = std::max(peak, mag);
                    if (m >= half - 1) tail = std::max(tail, mag);
                }
        if (tail > 1e-8 * std::max(1.0, peak))
            throw std::invalid_argument("LoopOperator: coefficient loop not spectrally resolved");
    }
};

inline LoopOperator constant_loop_operator(int n, int nt, const Eigen::MatrixXd& S) {
    const int d = 2 * n;
    std::vector<double> smp(static_cast<std::size_t>(nt) * d * d);
    for (int j = 0; j < nt; ++j)
        for (int p = 0; p < d; ++p)
            for (int q = 0; q < d; ++q)
                smp[(static_cast<std::size_t>(j) * d + p) * d + q] = S(p, q);
    return LoopOperator(n, nt, std::move(smp));
}

struct SpectrumResult {
    std::vector<double> eigenvalues;      // all, sorted ascending
    std::vector<double> cluster_values;   // one representative per cluster
    std::vector<int> multiplicities;      // per cluster
    double gap_lo = 0.0;                  // largest interval (gap_lo, gap_hi) around 0
    double gap_hi = 0.0;
    bool degenerate = false;              // 0 lies in the spectrum
};

// Fourier-Galerkin spectrum of -J0 d/dt - S(t) with modes |m| <= K in an
// orthonormal real trigonometric basis; the assembled matrix must be
// symmetric to 1e-10.
inline SpectrumResult asymptotic_spectrum(const LoopOperator& L, int K) {
    if (K < 1) throw std::invalid_argument("asymptotic_spectrum: need K >= 1");
    if (L.nt < 4 * (K + 1))
        throw std::invalid_argument("asymptotic_spectrum: loop sample too coarse for this cutoff");
    const int d = 2 * L.n, nblocks = 2 * K + 1, D = nblocks * d;
    const Eigen::MatrixXd J = standard_J(L.n);

    // block b: b=0 constant, b=2m-1 cos(2 pi m t), b=2m sin(2 pi m t), scaled sqrt(2)
    auto basis_val = [](int b, double t) {
        if (b == 0) return 1.0;
        const int m = (b + 1) / 2;
        const double ang = 2.0 * M_PI * m * t;
        return std::sqrt(2.0) * (b % 2 == 1 ? std::cos(ang) : std::sin(ang));
    };
    auto basis_dot = [](int b, double t) {
        if (b == 0) return 0.0;
        const int m = (b + 1) / 2;
        const double ang = 2.0 * M_PI * m * t, w = 2.0 * M_PI * m;
        return std::sqrt(2.0) * w * (b % 2 == 1 ? -std::sin(ang) : std::cos(ang));
    };

    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(D, D);
    for (int j = 0; j < L.nt; ++j) {
        const double t = static_cast<double>(j) / L.nt;
        const Eigen::MatrixXd Sj = L.matrix_at(j);
        std::vector<double> bv(nblocks), bd(nblocks);
        for (int b = 0; b < nblocks; ++b) {
            bv[b] = basis_val(b, t);
            bd[b] = basis_dot(b, t);
        }
        for (int bq = 0; bq < nblocks; ++bq)
            for (int q = 0; q < d; ++q) {
                // (A phi)(t_j) for phi = bv[bq] e_q: -J0 e_q bd - S e_q bv
                Eigen::VectorXd col = -J.col(q) * bd[bq] - Sj.col(q) * bv[bq];
                for (int bp = 0; bp < nblocks; ++bp) {
                    const double w = bv[bp] / L.nt;
                    if (w == 0.0) continue;
                    for (int p = 0; p < d; ++p)
                        M(bp * d + p, bq * d + q) += w * col(p);
                }
            }
    }
    const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10)
        throw std::runtime_error("asymptotic_spectrum: assembled matrix lost symmetry");
    M = 0.5 * (M + M.transpose());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    SpectrumResult res;
    res.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + D);
    std::sort(res.eigenvalues.begin(), res.eigenvalues.end());

    const double cluster_tol = 1e-6;
    for (std::size_t i = 0; i < res.eigenvalues.size();) {
        std::size_t j = i + 1;
        double sum = res.eigenvalues[i];
        while (j < res.eigenvalues.size() &&
               res.eigenvalues[j] - res.eigenvalues[j - 1] <=
                   cluster_tol * std::max(1.0, std::abs(res.eigenvalues[j]))) {
            sum += res.eigenvalues[j];
            ++j;
        }
        res.cluster_values.push_back(sum / static_cast<double>(j - i));
        res.multiplicities.push_back(static_cast<int>(j - i));
        if (res.multiplicities.back() > d)
            throw std::runtime_error("asymptotic_spectrum: cluster multiplicity exceeds 2n");
        i = j;
    }

    res.degenerate = false;
    res.gap_lo = -std::numeric_limits<double>::infinity();
    res.gap_hi = std::numeric_limits<double>::infinity();
    for (double v : res.cluster_values) {
        if (std::abs(v) <= 1e-8) res.degenerate = true;
        if (v < 0.0) res.gap_lo = std::max(res.gap_lo, v);
        if (v > 0.0) res.gap_hi = std::min(res.gap_hi, v);
    }
    if (res.degenerate) {
        res.gap_lo = 0.0;
        res.gap_hi = 0.0;
    }
    return res;
}

// Largest weight admissible for the spectral gap, capped strictly below 2 pi.
inline std::optional<double> admissible_weight(const SpectrumResult& spec, double cap = 2.0 * M_PI) {
    if (spec.degenerate) return std::nullopt;
    const double halfwidth = std::min(-spec.gap_lo, spec.gap_hi);
    if (!(halfwidth > 0.0)) return std::nullopt;
    return std::min(0.9 * halfwidth, 0.9 * cap);
}

// -- symplectic paths ----------------------------------------------------------

struct SymplecticPath {
    int n = 1;
    std::vector<Eigen::MatrixXd> samples;  // Phi(t_i), t_i = i/(M-1)

    SymplecticPath(int n, std::vector<Eigen::MatrixXd> samples_)
        : n(n), samples(std::move(samples_)) {
        if (n < 1) throw std::invalid_argument("SymplecticPath: need n >= 1");
        if (samples.size() < 2) throw std::invalid_argument("SymplecticPath: need >= 2 samples");
        const Eigen::MatrixXd J = standard_J(n);
        for (const auto& P : samples) {
            if (P.rows() != 2 * n || P.cols() != 2 * n)
                throw std::invalid_argument("SymplecticPath: sample dimension mismatch");
            if ((P.transpose() * J * P - J).cwiseAbs().maxCoeff() > 1e-10)
                throw std::invalid_argument("SymplecticPath: sample not symplectic");
        }
    }

    int size() const { return static_cast<int>(samples.size()); }
    bool starts_at_identity() const {
        return (samples.front() - Eigen::MatrixXd::Identity(2 * n, 2 * n)).cwiseAbs().maxCoeff() <=
               1e-10;
    }
    bool end_nondegenerate() const {
        return std::abs((samples.back() - Eigen::MatrixXd::Identity(2 * n, 2 * n)).determinant()) >
               1e-8;
    }
};

namespace detail {

// complex n x n matrix of a J0-commuting real matrix (2x2 blocks)
inline Eigen::MatrixXcd complex_blocks(const Eigen::MatrixXd& Q, int n, double tol) {
    Eigen::MatrixXcd u(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            const double a = Q(2 * j, 2 * k), b = Q(2 * j + 1, 2 * k);
            if (std::abs(Q(2 * j + 1, 2 * k + 1) - a) > tol ||
                std::abs(Q(2 * j, 2 * k + 1) + b) > tol)
                throw std::runtime_error("unitary part does not commute with J0");
            u(j, k) = std::complex<double>(a, b);
        }
    return u;
}

inline Eigen::MatrixXd polar_unitary(const Eigen::MatrixXd& A) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace detail

// Winding number of the complex determinant of the unitary part along a
// closed symplectic loop.
inline int maslov_loop(const SymplecticPath& alpha) {
    if ((alpha.samples.front() - alpha.samples.back()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("maslov_loop: path is not closed");
    double total = 0.0;
    double prev = 0.0;
    for (int i = 0; i < alpha.size(); ++i) {
        const Eigen::MatrixXcd u =
            detail::complex_blocks(detail::polar_unitary(alpha.samples[i]), alpha.n, 1e-6);
        const double phase = std::arg(u.determinant());
        if (i > 0) {
            double d = phase - prev;
            while (d > M_PI) d -= 2.0 * M_PI;
            while (d <= -M_PI) d += 2.0 * M_PI;
            if (std::abs(d) >= M_PI * 0.999)
                throw std::runtime_error("maslov_loop: phase jump of half a turn; refine sampling");
            total += d;
        }
        prev = phase;
    }
    const double wind = total / (2.0 * M_PI);
    const long w = std::lround(wind);
    if (std::abs(wind - static_cast<double>(w)) > 1e-6)
        throw std::runtime_error("maslov_loop: winding did not close to an integer");
    return static_cast<int>(w);
}

// -- Conley-Zehnder index of a nondegenerate path ------------------------------

namespace detail {

// piecewise-geodesic interpolation Phi(t) = Phi_i exp(tau L_i)
struct PathInterp {
    const SymplecticPath* path;
    std::vector<Eigen::MatrixXd> logs;
    double dt;

    explicit PathInterp(const SymplecticPath& p) : path(&p) {
        const int M = p.size();
        dt = 1.0 / (M - 1);
        logs.reserve(M - 1);
        for (int i = 0; i + 1 < M; ++i) {
            const Eigen::MatrixXd step = p.samples[i].inverse() * p.samples[i + 1];
            logs.push_back(step.log());
        }
    }

    Eigen::MatrixXd value(double t) const {
        const int M = path->size();
        int i = std::min(static_cast<int>(std::floor(t / dt)), M - 2);
        if (i < 0) i = 0;
        const double tau = (t - i * dt) / dt;
        return path->samples[i] * (tau * logs[i]).exp();
    }

    // symmetric coefficient S(t) = -J0 Phi' Phi^{-1}
    Eigen::MatrixXd coefficient(double t, const Eigen::MatrixXd& J) const {
        const int M = path->size();
        int i = std::min(static_cast<int>(std::floor(t / dt)), M - 2);
        if (i < 0) i = 0;
        const double tau = (t - i * dt) / dt;
        const Eigen::MatrixXd E = (tau * logs[i]).exp();
        const Eigen::MatrixXd dPhiPhiInv =
            path->samples[i] * E * (logs[i] / dt) * E.inverse() * path->samples[i].inverse();
        const Eigen::MatrixXd S = -J * dPhiPhiInv;
        return 0.5 * (S + S.transpose());
    }
};

// signature of the crossing form on ker(Phi(t) - I); throws when degenerate
inline int crossing_signature(const Eigen::MatrixXd& Phi, const Eigen::MatrixXd& S, bool full) {
    const int d = static_cast<int>(Phi.rows());
    Eigen::MatrixXd V;
    if (full) {
        V = Eigen::MatrixXd::Identity(d, d);
    } else {
        const Eigen::MatrixXd K = Phi - Eigen::MatrixXd::Identity(d, d);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(K, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        const double tol = 1e-7 * std::max(sv(0), 1.0);
        int kdim = 0;
        for (int i = 0; i < sv.size(); ++i)
            if (sv(i) < tol) ++kdim;
        if (kdim == 0) return 0;  // spurious detection
        V = svd.matrixV().rightCols(kdim);
    }
    Eigen::MatrixXd G = V.transpose() * S * V;
    G = 0.5 * (G + G.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    int sig = 0;
    const double scale = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-12);
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        const double mu = es.eigenvalues()(i);
        if (std::abs(mu) <= 1e-5 * scale)
            throw std::runtime_error("conley_zehnder: degenerate crossing; perturb the path");
        sig += mu > 0.0 ? 1 : -1;
    }
    return sig;
}

}  // namespace detail

// Crossing count of the path against the identity: half the signature of the
// velocity form at t=0 plus the crossing-form signatures at interior times
// where det(Phi(t) - I) = 0.
inline int conley_zehnder(const SymplecticPath& path) {
    if (!path.starts_at_identity())
        throw std::invalid_argument("conley_zehnder: path must start at the identity");
    const Eigen::MatrixXd J = standard_J(path.n);
    const detail::PathInterp interp(path);
    const int d = 2 * path.n;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    auto f = [&](double t) { return (interp.value(t) - I).determinant(); };
    if (std::abs(f(1.0)) <= 1e-8)
        throw std::domain_error("conley_zehnder: degenerate endpoint");

    // scan for zeros of det(Phi - I) on (0, 1)
    const int nscan = 24 * (path.size() - 1);
    std::vector<double> ts(nscan + 1), fs(nscan + 1);
    double fscale = 1.0;
    for (int i = 0; i <= nscan; ++i) {
        ts[i] = static_cast<double>(i) / nscan;
        fs[i] = f(ts[i]);
        fscale = std::max(fscale, std::abs(fs[i]));
    }
    std::vector<double> crossings;
    auto push_crossing = [&](double t) {
        for (double c : crossings)
            if (std::abs(c - t) < 1e-8) return;
        if (t > 1e-9 && t < 1.0 - 1e-9) crossings.push_back(t);
    };
    for (int i = 0; i + 1 <= nscan; ++i) {
        if (fs[i] == 0.0 && ts[i] > 0.0) {
            push_crossing(ts[i]);
        } else if (fs[i] * fs[i + 1] < 0.0) {
            double lo = ts[i], hi = ts[i + 1], flo = fs[i];
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi), fm = f(mid);
                if (fm == 0.0) { lo = hi = mid; break; }
                if (flo * fm < 0.0) hi = mid;
                else { lo = mid; flo = fm; }
            }
            push_crossing(0.5 * (lo + hi));
        } else if (i > 0 && std::abs(fs[i]) < std::abs(fs[i - 1]) &&
                   std::abs(fs[i]) <= std::abs(fs[i + 1]) &&
                   std::abs(fs[i]) < 1e-6 * fscale) {
            // tangential approach: ternary refinement of the |f| minimum
            double lo = ts[i - 1], hi = ts[i + 1];
            for (int it = 0; it < 80; ++it) {
                const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
                if (std::abs(f(m1)) < std::abs(f(m2))) hi = m2;
                else lo = m1;
            }
            const double tmin = 0.5 * (lo + hi);
            if (std::abs(f(tmin)) < 1e-9 * fscale) push_crossing(tmin);
        }
    }
    std::sort(crossings.begin(), crossings.end());

    const int sig0 = detail::crossing_signature(I, interp.coefficient(0.0, J), true);
    double index = 0.5 * sig0;
    for (double t : crossings)
        index += detail::crossing_signature(interp.value(t), interp.coefficient(t, J), false);
    const long w = std::lround(index);
    if (std::abs(index - static_cast<double>(w)) > 1e-6)
        throw std::runtime_error("conley_zehnder: crossing sum is not an integer");
    return static_cast<int>(w);
}

// -- path serialization and CSV reports ----------------------------------------

inline void write_path(std::ostream& os, const SymplecticPath& path) {
    os << "SCPATH n=" << path.n << " M=" << path.size() << "\n";
    for (const auto& P : path.samples)
        for (int r = 0; r < P.rows(); ++r) {
            for (int c = 0; c < P.cols(); ++c) {
                if (c) os << ' ';
                os << detail::fmt(P(r, c));
            }
            os << '\n';
        }
}

inline SymplecticPath read_path(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("SCPATH: empty stream");
    std::istringstream hs(line);
    std::string magic;
    hs >> magic;
    if (magic != "SCPATH") throw std::runtime_error("SCPATH: bad magic");
    auto kv = detail::parse_kv(hs);
    const int n = static_cast<int>(detail::parse_int(detail::require(kv, "n"), "SCPATH n"));
    const int M = static_cast<int>(detail::parse_int(detail::require(kv, "M"), "SCPATH M"));
    std::vector<Eigen::MatrixXd> samples;
    samples.reserve(M);
    for (int i = 0; i < M; ++i) {
        Eigen::MatrixXd P(2 * n, 2 * n);
        for (int r = 0; r < 2 * n; ++r) {
            if (!std::getline(is, line)) throw std::runtime_error("SCPATH: truncated sample block");
            std::istringstream rs(line);
            std::string tok;
            for (int c = 0; c < 2 * n; ++c) {
                if (!(rs >> tok)) throw std::runtime_error("SCPATH: short sample row");
                P(r, c) = detail::parse_double(tok, "SCPATH entry");
            }
        }
        samples.push_back(std::move(P));
    }
    return SymplecticPath(n, std::move(samples));
}

inline void write_loop(std::ostream& os, const LoopOperator& L) {
    os << "SCLOOP n=" << L.n << " Nt=" << L.nt << "\n";
    const int d = 2 * L.n;
    for (int j = 0; j < L.nt; ++j)
        for (int p = 0; p < d; ++p) {
            for (int q = 0; q < d; ++q) {
                if (q) os << ' ';
                os << detail::fmt(L.at(j, p, q));
            }
            os << '\n';
        }
}

inline LoopOperator read_loop(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("SCLOOP: empty stream");
    std::istringstream hs(line);
    std::string magic;
    hs >> magic;
    if (magic != "SCLOOP") throw std::runtime_error("SCLOOP: bad magic");
    auto kv = detail::parse_kv(hs);
    const int n = static_cast<int>(detail::parse_int(detail::require(kv, "n"), "SCLOOP n"));
    const int nt = static_cast<int>(detail::parse_int(detail::require(kv, "Nt"), "SCLOOP Nt"));
    if (n < 1) throw std::runtime_error("SCLOOP: need n >= 1");
    const int d = 2 * n;
    std::vector<double> samples(static_cast<std::size_t>(nt) * d * d);
    for (int j = 0; j < nt; ++j)
        for (int p = 0; p < d; ++p) {
            if (!std::getline(is, line)) throw std::runtime_error("SCLOOP: truncated sample block");
            std::istringstream rs(line);
            std::string tok;
            for (int q = 0; q < d; ++q) {
                if (!(rs >> tok)) throw std::runtime_error("SCLOOP: short sample row");
                samples[(static_cast<std::size_t>(j) * d + p) * d + q] =
                    detail::parse_double(tok, "SCLOOP entry");
            }
        }
    return LoopOperator(n, nt, std::move(samples));
}

inline void write_spectrum_csv(std::ostream& os, const std::string& param,
                               const SpectrumResult& spec) {
    os << "param,eigenvalue,multiplicity\n";
    for (std::size_t i = 0; i < spec.cluster_values.size(); ++i)
        os << param << ',' << detail::fmt(spec.cluster_values[i]) << ','
           << spec.multiplicities[i] << '\n';
}

struct IndexRow {
    double delta = 0.0;
    CRIndexResult result;
};

inline void write_index_csv(std::ostream& os, const std::vector<IndexRow>& rows) {
    os << "delta,kernel,cokernel,index\n";
    for (const auto& r : rows)
        os << detail::fmt(r.delta) << ',' << r.result.kernel_dim_real << ','
           << r.result.cokernel_dim_real << ',' << r.result.index_real << '\n';
}

}  // namespace scglue
