#pragma once

// Discretized weighted function spaces on half-cylinders, finite glued
// cylinders, and anti-glued cylinders: sample storage, weighted norms,
// loop averages, and the circle/translation actions.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "scglue/profile.hpp"

namespace scglue {

inline constexpr double kTailTol = 1e-8;
inline constexpr double kAntiPad = 4.0;  // S_pad of the anti-glued grid
inline constexpr double kGridSnapTol = 1e-9;

struct WeightSequence {
    std::vector<double> deltas{0.1, 0.5, 1.0};

    void validate() const {
        if (deltas.empty()) throw std::invalid_argument("WeightSequence: empty");
        if (!(deltas.front() >= 0.0))
            throw std::invalid_argument("WeightSequence: delta0 must be >= 0");
        for (std::size_t i = 1; i < deltas.size(); ++i)
            if (!(deltas[i] > deltas[i - 1]))
                throw std::invalid_argument("WeightSequence: deltas must increase strictly");
    }
    double at(int level) const {
        if (level < 0 || level >= static_cast<int>(deltas.size()))
            throw std::out_of_range("WeightSequence: level " + std::to_string(level) +
                                    " out of range");
        return deltas[static_cast<std::size_t>(level)];
    }
    int levels() const { return static_cast<int>(deltas.size()); }
};

// Gluing parameter: modulus r with derived neck length R = phi(r) and the
// angle class reduced to a single circle coordinate theta.
struct GluingParameter {
    double modulus = 0.0;
    double theta = 0.0;
    double R = 0.0;  // meaningful only when modulus > 0

    static GluingParameter zero() { return {}; }

    static GluingParameter from_modulus(double r, double theta) {
        if (r == 0.0) return zero();
        if (!(r > 0.0) || !(r < 0.25))
            throw std::domain_error("GluingParameter: modulus must lie in [0, 1/4)");
        GluingParameter p;
        p.modulus = r;
        p.theta = wrap_angle(theta);
        p.R = phi(r);
        return p;
    }

    // Desk-scale constructor: the neck length is prescribed directly and the
    // modulus recorded as phi_inv(R) without the 1/4 bound.
    static GluingParameter from_R(double R, double theta) {
        if (!(R > 0.0)) throw std::domain_error("GluingParameter: R must be positive");
        GluingParameter p;
        p.modulus = phi_inv(R);
        p.theta = wrap_angle(theta);
        p.R = R;
        return p;
    }

    bool is_zero() const { return modulus == 0.0; }

    static double wrap_angle(double t) {
        double w = t - std::floor(t);
        if (w >= 1.0) w = 0.0;
        return w;
    }

    friend bool operator==(const GluingParameter& a, const GluingParameter& b) {
        if (a.is_zero() && b.is_zero()) return true;
        return a.modulus == b.modulus && a.theta == b.theta;
    }
};

namespace detail {
inline void check_t_grid(int nt) {
    if (nt < 8 || nt % 2 != 0)
        throw std::invalid_argument("field grid: Nt must be even and >= 8, got " +
                                    std::to_string(nt));
}
inline double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Field containers. Samples are stored s-major: data[(i*nt + j)*ncomp + k]
// for s-index i, t-index j, component k. t_j = j / nt.

struct HalfCylinderField {
    int sign = +1;  // +1: s in [0, smax]; -1: s in [-smax, 0], indexed by |s|
    int ncomp = 1;
    int ns = 0;
    int nt = 0;
    double smax = 0.0;
    std::vector<double> c;     // asymptotic constant, size ncomp
    std::vector<double> data;  // size ns*nt*ncomp
    WeightSequence weights{};
    bool tail_warning = false;

    HalfCylinderField() = default;
    HalfCylinderField(int sign_, int ncomp_, int ns_, int nt_, double smax_,
                      std::vector<double> c_, std::vector<double> data_,
                      WeightSequence w = {}, bool warn_tail = true)
        : sign(sign_), ncomp(ncomp_), ns(ns_), nt(nt_), smax(smax_),
          c(std::move(c_)), data(std::move(data_)), weights(std::move(w)) {
        if (sign != +1 && sign != -1)
            throw std::invalid_argument("HalfCylinderField: sign must be +1 or -1");
        detail::check_t_grid(nt);
        if (ns < 2) throw std::invalid_argument("HalfCylinderField: need ns >= 2");
        if (!(smax >= 5.0))
            throw std::invalid_argument("HalfCylinderField: Smax must be >= 5");
        if (static_cast<int>(c.size()) != ncomp)
            throw std::invalid_argument("HalfCylinderField: constant size mismatch");
        if (data.size() != static_cast<std::size_t>(ns) * nt * ncomp)
            throw std::invalid_argument("HalfCylinderField: sample size mismatch");
        weights.validate();
        double tail = 0.0;
        for (int j = 0; j < nt; ++j)
            for (int k = 0; k < ncomp; ++k)
                tail = std::max(tail, std::abs(at(ns - 1, j, k)));
        if (tail > kTailTol * std::max(1.0, detail::max_abs(data))) {
            tail_warning = true;
            if (warn_tail)
                std::clog << "HalfCylinderField: decaying part at Smax=" << smax
                          << " is " << tail << " (> tail_tol); grid truncation is coarse\n";
        }
    }

    double ds() const { return smax / (ns - 1); }
    double s_at(int i) const { return sign * (i * ds()); }
    double t_at(int j) const { return static_cast<double>(j) / nt; }

    double at(int i, int j, int k) const {
        return data[(static_cast<std::size_t>(i) * nt + ((j % nt) + nt) % nt) * ncomp + k];
    }
    double& at(int i, int j, int k) {
        return data[(static_cast<std::size_t>(i) * nt + ((j % nt) + nt) % nt) * ncomp + k];
    }
    // total value c + r
    double value(int i, int j, int k) const { return c[k] + at(i, j, k); }
};

struct FiniteCylinderField {
    GluingParameter param;
    int ncomp = 1;
    int ns = 0;  // samples over [0, R], endpoints included
    int nt = 0;
    std::vector<double> data;

    FiniteCylinderField() = default;
    FiniteCylinderField(GluingParameter p, int ncomp_, int ns_, int nt_,
                        std::vector<double> data_)
        : param(p), ncomp(ncomp_), ns(ns_), nt(nt_), data(std::move(data_)) {
        if (param.is_zero())
            throw std::invalid_argument("FiniteCylinderField: needs a nonzero gluing parameter");
        detail::check_t_grid(nt);
        if (ns < 3) throw std::invalid_argument("FiniteCylinderField: need ns >= 3");
        if (data.size() != static_cast<std::size_t>(ns) * nt * ncomp)
            throw std::invalid_argument("FiniteCylinderField: sample size mismatch");
    }

    double R() const { return param.R; }
    double ds() const { return param.R / (ns - 1); }
    double s_at(int i) const { return i * ds(); }
    double t_at(int j) const { return static_cast<double>(j) / nt; }

    double at(int i, int j, int k) const {
        return data[(static_cast<std::size_t>(i) * nt + ((j % nt) + nt) % nt) * ncomp + k];
    }
    double& at(int i, int j, int k) {
        return data[(static_cast<std::size_t>(i) * nt + ((j % nt) + nt) % nt) * ncomp + k];
    }
};

struct AntiGluedField {
    GluingParameter param;
    int ncomp = 1;
    int ns = 0;  // samples over [-S_pad, R+S_pad]
    int nt = 0;
    std::vector<double> c;  // antipodal constant: +c as s -> -inf, -c as s -> +inf
    std::vector<double> data;

    AntiGluedField() = default;
    AntiGluedField(GluingParameter p, int ncomp_, int ns_, int nt_, std::vector<double> c_,
                   std::vector<double> data_)
        : param(p), ncomp(ncomp_), ns(ns_), nt(nt_), c(std::move(c_)), data(std::move(data_)) {
        if (param.is_zero())
            throw std::invalid_argument("AntiGluedField: needs a nonzero gluing parameter");
        detail::check_t_grid(nt);
        if (ns < 3) throw std::invalid_argument("AntiGluedField: need ns >= 3");
        if (static_cast<int>(c.size()) != ncomp)
            throw std::invalid_argument("AntiGluedField: constant size mismatch");
        if (data.size() != static_cast<std::size_t>(ns) * nt * ncomp)
            throw std::invalid_argument("AntiGluedField: sample size mismatch");
    }

    double R() const { return param.R; }
    double ds() const { return (param.R + 2.0 * kAntiPad) / (ns - 1); }
    double s_at(int i) const { return -kAntiPad + i * ds(); }
    double t_at(int j) const { return static_cast<double>(j) / nt; }

    double at(int i, int j, int k) const {
        return data[(static_cast<std::size_t>(i) * nt + ((j % nt) + nt) % nt) * ncomp + k];
    }
    double& at(int i, int j, int k) {
        return data[(static_cast<std::size_t>(i) * nt + ((j % nt) + nt) % nt) * ncomp + k];
    }
};

// ---------------------------------------------------------------------------
// Raw-grid weighted norm kernel, shared by the field wrappers and the probe
// harness. `s_of(i)` gives the s-coordinate of row i; weight e^{2 delta |s -
// s_center|}; derivatives up to m_cap by centered second-order differences
// (one-sided at the s-ends, circular in t).

namespace detail {

struct DiffBuffers {
    // derivative order in s (0..2) and t (0..2), total <= 2
    std::vector<double> d00, d10, d01, d20, d11, d02;
};

inline void differentiate(const std::vector<double>& v, int ns, int nt, int ncomp, double ds,
                          int m_cap, DiffBuffers& out) {
    const double dt = 1.0 / nt;
    auto idx = [&](int i, int j, int k) {
        return (static_cast<std::size_t>(i) * nt + ((j % nt) + nt) % nt) * ncomp + k;
    };
    out.d00 = v;
    if (m_cap < 1) return;
    const std::size_t n = v.size();
    out.d10.assign(n, 0.0);
    out.d01.assign(n, 0.0);
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < nt; ++j)
            for (int k = 0; k < ncomp; ++k) {
                double dsv;
                if (i == 0)
                    dsv = (-3.0 * v[idx(0, j, k)] + 4.0 * v[idx(1, j, k)] - v[idx(2, j, k)]) /
                          (2.0 * ds);
                else if (i == ns - 1)
                    dsv = (3.0 * v[idx(ns - 1, j, k)] - 4.0 * v[idx(ns - 2, j, k)] +
                           v[idx(ns - 3, j, k)]) /
                          (2.0 * ds);
                else
                    dsv = (v[idx(i + 1, j, k)] - v[idx(i - 1, j, k)]) / (2.0 * ds);
                out.d10[idx(i, j, k)] = dsv;
                out.d01[idx(i, j, k)] =
                    (v[idx(i, j + 1, k)] - v[idx(i, j - 1, k)]) / (2.0 * dt);
            }
    if (m_cap < 2) return;
    out.d20.assign(n, 0.0);
    out.d11.assign(n, 0.0);
    out.d02.assign(n, 0.0);
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < nt; ++j)
            for (int k = 0; k < ncomp; ++k) {
                double dss;
                if (i == 0)
                    dss = (2.0 * v[idx(0, j, k)] - 5.0 * v[idx(1, j, k)] +
                           4.0 * v[idx(2, j, k)] - v[idx(3, j, k)]) /
                          (ds * ds);
                else if (i == ns - 1)
                    dss = (2.0 * v[idx(ns - 1, j, k)] - 5.0 * v[idx(ns - 2, j, k)] +
                           4.0 * v[idx(ns - 3, j, k)] - v[idx(ns - 4, j, k)]) /
                          (ds * ds);
                else
                    dss = (v[idx(i + 1, j, k)] - 2.0 * v[idx(i, j, k)] + v[idx(i - 1, j, k)]) /
                          (ds * ds);
                out.d20[idx(i, j, k)] = dss;
                out.d02[idx(i, j, k)] = (v[idx(i, j + 1, k)] - 2.0 * v[idx(i, j, k)] +
                                         v[idx(i, j - 1, k)]) /
                                        (dt * dt);
                const auto& d10 = out.d10;
                out.d11[idx(i, j, k)] =
                    (d10[idx(i, j + 1, k)] - d10[idx(i, j - 1, k)]) / (2.0 * dt);
            }
}

}  // namespace detail

struct GridSpec {
    int ns = 0;
    int nt = 0;
    int ncomp = 1;
    double s0 = 0.0;  // s-coordinate of row 0
    double ds = 0.0;
    double s_center = 0.0;  // weight center
};

inline double weighted_norm_sq_view(const std::vector<double>& samples, const GridSpec& g,
                                    double delta, int m_cap) {
    if (samples.size() != static_cast<std::size_t>(g.ns) * g.nt * g.ncomp)
        throw std::invalid_argument("weighted_norm_view: sample size mismatch");
    detail::DiffBuffers buf;
    detail::differentiate(samples, g.ns, g.nt, g.ncomp, g.ds, m_cap, buf);
    const std::vector<double>* terms[6] = {&buf.d00, &buf.d10, &buf.d01,
                                           &buf.d20, &buf.d11, &buf.d02};
    const int nterms = m_cap >= 2 ? 6 : (m_cap == 1 ? 3 : 1);
    double acc = 0.0;
    for (int i = 0; i < g.ns; ++i) {
        const double s = g.s0 + i * g.ds;
        const double wquad = (i == 0 || i == g.ns - 1 ? 0.5 : 1.0) * g.ds / g.nt;
        const double expo = 2.0 * delta * std::abs(s - g.s_center);
        for (int j = 0; j < g.nt; ++j)
            for (int k = 0; k < g.ncomp; ++k)
                for (int q = 0; q < nterms; ++q) {
                    const double v =
                        (*terms[q])[(static_cast<std::size_t>(i) * g.nt + j) * g.ncomp + k];
                    if (v == 0.0) continue;
                    // written in log form so huge weights cannot meet
                    // underflowed samples and produce NaN
                    acc += wquad * std::exp(expo + 2.0 * std::log(std::abs(v)));
                }
    }
    return acc;
}

inline double weighted_norm(const HalfCylinderField& f, int level) {
    const double delta = f.weights.at(level);
    const int m_cap = std::min(level, 2);
    GridSpec g{f.ns, f.nt, f.ncomp, 0.0, f.ds(), 0.0};  // weight uses |s|
    double acc = weighted_norm_sq_view(f.data, g, delta, m_cap);
    for (double ck : f.c) acc += ck * ck;
    return std::sqrt(acc);
}

inline double weighted_norm(const FiniteCylinderField& f, int level,
                            const WeightSequence& w = {}) {
    const double delta = w.at(level);
    const int m_cap = std::min(level, 2);
    GridSpec g{f.ns, f.nt, f.ncomp, 0.0, f.ds(), 0.0};
    return std::sqrt(weighted_norm_sq_view(f.data, g, delta, m_cap));
}

// Anti-glued fields are measured around the middle loop; the antipodal
// constant enters like an asymptotic constant.
inline double weighted_norm(const AntiGluedField& f, int level, const WeightSequence& w = {}) {
    const double delta = w.at(level);
    const int m_cap = std::min(level, 2);
    GridSpec g{f.ns, f.nt, f.ncomp, -kAntiPad, f.ds(), f.R() / 2.0};
    double acc = weighted_norm_sq_view(f.data, g, delta, m_cap);
    for (double ck : f.c) acc += ck * ck;
    return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// Loop averages.

inline std::vector<double> middle_loop_average(const FiniteCylinderField& w) {
    if ((w.ns - 1) % 2 != 0)
        throw std::invalid_argument("middle_loop_average: R/2 is not on the s-grid");
    const int mid = (w.ns - 1) / 2;
    std::vector<double> avg(w.ncomp, 0.0);
    for (int j = 0; j < w.nt; ++j)
        for (int k = 0; k < w.ncomp; ++k) avg[k] += w.at(mid, j, k);
    for (double& x : avg) x /= w.nt;
    return avg;
}

inline std::vector<double> a_loop_average(const HalfCylinderField& f,
                                          const GluingParameter& a) {
    if (a.is_zero()) return f.c;
    const double half = a.R / 2.0;
    const double pos = half / f.ds();
    const int i = static_cast<int>(std::llround(pos));
    if (std::abs(pos - i) > kGridSnapTol * (1.0 + pos) || i < 0 || i >= f.ns)
        throw std::invalid_argument("a_loop_average: R/2 not on the stored grid");
    std::vector<double> avg(f.ncomp, 0.0);
    for (int j = 0; j < f.nt; ++j)
        for (int k = 0; k < f.ncomp; ++k) avg[k] += f.value(i, j, k);
    for (double& x : avg) x /= f.nt;
    return avg;
}

// ---------------------------------------------------------------------------
// Group actions.

inline HalfCylinderField r_shift(HalfCylinderField f, double amount) {
    f.c[0] += amount;
    return f;
}

inline FiniteCylinderField r_shift(FiniteCylinderField f, double amount) {
    for (int i = 0; i < f.ns; ++i)
        for (int j = 0; j < f.nt; ++j) f.at(i, j, 0) += amount;
    return f;
}

namespace detail {

inline double catmull_rom(double ym1, double y0, double y1, double y2, double u) {
    const double u2 = u * u, u3 = u2 * u;
    return ym1 * (-0.5 * u + u2 - 0.5 * u3) + y0 * (1.0 - 2.5 * u2 + 1.5 * u3) +
           y1 * (0.5 * u + 2.0 * u2 - 1.5 * u3) + y2 * (-0.5 * u2 + 0.5 * u3);
}

// resample one circular loop of nt samples at t - tau
template <typename Get, typename Set>
inline void rotate_loop(int nt, double tau, Get get, Set set) {
    const double pos = tau * nt;
    const long m = std::llround(pos);
    if (std::abs(pos - m) <= kGridSnapTol * (1.0 + std::abs(pos))) {
        for (int j = 0; j < nt; ++j) set(j, get(static_cast<int>(((j - m) % nt + nt) % nt)));
        return;
    }
    const double shift = pos;  // fractional
    for (int j = 0; j < nt; ++j) {
        const double x = j - shift;
        const double fl = std::floor(x);
        const int j0 = static_cast<int>(((static_cast<long>(fl) % nt) + nt) % nt);
        const double u = x - fl;
        auto wrap = [&](int q) { return ((q % nt) + nt) % nt; };
        set(j, catmull_rom(get(wrap(j0 - 1)), get(j0), get(wrap(j0 + 1)), get(wrap(j0 + 2)), u));
    }
}

}  // namespace detail

template <typename Field>
inline Field rotate_t(const Field& f, double tau) {
    Field out = f;
    for (int i = 0; i < f.ns; ++i)
        for (int k = 0; k < f.ncomp; ++k)
            detail::rotate_loop(
                f.nt, tau, [&](int j) { return f.at(i, j, k); },
                [&](int j, double v) { out.at(i, j, k) = v; });
    return out;
}

// ---------------------------------------------------------------------------
// Anchor averages: plain means over a finite sample set, and the associated
// retraction on the first component.

inline double anchor_average(const std::vector<double>& samples) {
    if (samples.empty()) throw std::invalid_argument("anchor_average: empty anchor set");
    double s = 0.0;
    for (double x : samples) s += x;
    return s / samples.size();
}

struct AnchorSet {
    std::vector<std::pair<int, int>> points;  // (s-index, t-index)
};

inline double anchor_average(const HalfCylinderField& f, const AnchorSet& anchors) {
    if (anchors.points.empty())
        throw std::invalid_argument("anchor_average: empty anchor set");
    double s = 0.0;
    for (auto [i, j] : anchors.points) s += f.value(i, j, 0);
    return s / anchors.points.size();
}

inline double anchor_average(const FiniteCylinderField& f, const AnchorSet& anchors) {
    if (anchors.points.empty())
        throw std::invalid_argument("anchor_average: empty anchor set");
    double s = 0.0;
    for (auto [i, j] : anchors.points) s += f.at(i, j, 0);
    return s / anchors.points.size();
}

inline HalfCylinderField anchor_project(HalfCylinderField f, const AnchorSet& anchors) {
    f.c[0] -= anchor_average(f, anchors);
    return f;
}

inline FiniteCylinderField anchor_project(FiniteCylinderField f, const AnchorSet& anchors) {
    const double avg = anchor_average(f, anchors);
    for (int i = 0; i < f.ns; ++i)
        for (int j = 0; j < f.nt; ++j) f.at(i, j, 0) -= avg;
    return f;
}

}  // namespace scglue
