#pragma once

// Periodic-orbit asymptotics on cylinders: standard maps (Ts+c, gamma(kt))
// with circle decorations, the glued family bar_oplus, the averaging map
// A_Phi that reads a standard map off a glued cylinder, coretractions H and K
// onto boundary format, and the comparison map D = beta-taper of (q - A(q+h)).

#include <algorithm>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fields.hpp"
#include "gluing.hpp"
#include "io.hpp"

namespace scglue {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// -- circle arithmetic -------------------------------------------------------

inline double wrap01(double x) {
    double w = x - std::floor(x);
    if (w >= 1.0) w = 0.0;  // floor(x) == x - 1 after rounding
    return w;
}

inline double circle_dist(double a, double b) {
    double d = wrap01(a - b);
    return std::min(d, 1.0 - d);
}

// Mean of a circle-valued sample loop.  Consecutive samples are unwrapped to a
// real lift (jumps of half a turn or more are rejected as unresolved), the
// closing jump determines the integer degree, and the half-step degree
// correction makes the result exact for loops affine in t on a uniform grid.
inline double circle_average(const std::vector<double>& samples) {
    const std::size_t n = samples.size();
    if (n < 2) throw std::invalid_argument("circle_average: need at least 2 samples");
    auto step = [](double from, double to) {
        double d = wrap01(to - from);
        if (d > 0.5) d -= 1.0;
        if (std::abs(d) >= 0.5 - 1e-9)
            throw std::runtime_error("circle_average: jump of half a turn between samples; loop unresolved");
        return d;
    };
    std::vector<double> lift(n);
    lift[0] = samples[0];
    for (std::size_t j = 1; j < n; ++j) lift[j] = lift[j - 1] + step(samples[j - 1], samples[j]);
    const double closing = lift[n - 1] + step(samples[n - 1], samples[0]) - lift[0];
    const long degree = std::lround(closing);
    double mean = 0.0;
    for (double v : lift) mean += v;
    mean /= static_cast<double>(n);
    return wrap01(mean + static_cast<double>(degree) / (2.0 * static_cast<double>(n)));
}

// -- periodic orbits ---------------------------------------------------------

// A sampled loop gamma : S^1 -> R^N with trigonometric interpolation, period
// T > 0 and covering number k >= 1.  Samples must be spectrally resolved (the
// top Fourier modes carry no mass) and injective as a point set.
class PeriodicOrbit {
  public:
    PeriodicOrbit(int n_comp, int nt, double T, int k, std::vector<double> samples,
                  WeightSequence weights = WeightSequence{})
        : ncomp(n_comp), nt(nt), T(T), k(k), samples(std::move(samples)),
          weights(std::move(weights)) {
        if (ncomp < 2) throw std::invalid_argument("PeriodicOrbit: need at least 2 components");
        detail::check_t_grid(nt);
        if (!(T > 0.0)) throw std::invalid_argument("PeriodicOrbit: period must be positive");
        if (k < 1) throw std::invalid_argument("PeriodicOrbit: covering number must be >= 1");
        if (this->samples.size() != static_cast<std::size_t>(nt) * ncomp)
            throw std::invalid_argument("PeriodicOrbit: sample buffer size mismatch");
        this->weights.validate();
        build_spectrum();
        check_resolved();
        check_injective();
    }

    int ncomp;
    int nt;
    double T;
    int k;
    std::vector<double> samples;  // nt x ncomp, t_j = j/nt
    WeightSequence weights;

    double sample(int j, int c) const { return samples[static_cast<std::size_t>(j) * ncomp + c]; }

    // gamma(t), one full loop per unit of t.
    void eval(double t, double* out) const {
        const int half = nt / 2;
        for (int c = 0; c < ncomp; ++c) out[c] = coef_a[c];
        for (int m = 1; m < half; ++m) {
            const double ang = kTwoPi * m * t;
            const double cm = std::cos(ang), sm = std::sin(ang);
            const double* am = &coef_a[static_cast<std::size_t>(m) * ncomp];
            const double* bm = &coef_b[static_cast<std::size_t>(m) * ncomp];
            for (int c = 0; c < ncomp; ++c) out[c] += am[c] * cm + bm[c] * sm;
        }
        const double cn = std::cos(kTwoPi * half * t);
        const double* an = &coef_a[static_cast<std::size_t>(half) * ncomp];
        for (int c = 0; c < ncomp; ++c) out[c] += an[c] * cn;
    }

    std::vector<double> eval(double t) const {
        std::vector<double> out(ncomp);
        eval(t, out.data());
        return out;
    }

    // d/dt gamma(t).
    std::vector<double> derivative(double t) const {
        const int half = nt / 2;
        std::vector<double> out(ncomp, 0.0);
        for (int m = 1; m < half; ++m) {
            const double ang = kTwoPi * m * t;
            const double w = kTwoPi * m;
            const double cm = std::cos(ang), sm = std::sin(ang);
            const double* am = &coef_a[static_cast<std::size_t>(m) * ncomp];
            const double* bm = &coef_b[static_cast<std::size_t>(m) * ncomp];
            for (int c = 0; c < ncomp; ++c) out[c] += w * (-am[c] * sm + bm[c] * cm);
        }
        const double wn = kTwoPi * half;
        const double sn = std::sin(kTwoPi * half * t);
        const double* an = &coef_a[static_cast<std::size_t>(half) * ncomp];
        for (int c = 0; c < ncomp; ++c) out[c] -= an[c] * wn * sn;
        return out;
    }

  private:
    std::vector<double> coef_a, coef_b;  // (nt/2+1) x ncomp

    void build_spectrum() {
        const int half = nt / 2;
        coef_a.assign(static_cast<std::size_t>(half + 1) * ncomp, 0.0);
        coef_b.assign(static_cast<std::size_t>(half + 1) * ncomp, 0.0);
        for (int m = 0; m <= half; ++m) {
            double* am = &coef_a[static_cast<std::size_t>(m) * ncomp];
            double* bm = &coef_b[static_cast<std::size_t>(m) * ncomp];
            for (int j = 0; j < nt; ++j) {
                const double ang = kTwoPi * m * j / nt;
                const double cm = std::cos(ang), sm = std::sin(ang);
                for (int c = 0; c < ncomp; ++c) {
                    am[c] += sample(j, c) * cm;
                    bm[c] += sample(j, c) * sm;
                }
            }
            const double scale = (m == 0 || m == half) ? 1.0 / nt : 2.0 / nt;
            for (int c = 0; c < ncomp; ++c) { am[c] *= scale; bm[c] *= scale; }
            if (m == half)
                for (int c = 0; c < ncomp; ++c) bm[c] = 0.0;
        }
    }

    void check_resolved() const {
        const int half = nt / 2;
        double peak = 0.0, tail = 0.0;
        for (int m = 0; m <= half; ++m)
            for (int c = 0; c < ncomp; ++c) {
                const double mag = std::hypot(coef_a[static_cast<std::size_t>(m) * ncomp + c],
                                              coef_b[static_cast<std::size_t>(m) * ncomp + c]);
                peak = std::max(peak, mag);
                if (m >= half - 1) tail = std::max(tail, mag);
            }
        if (tail > 1e-8 * std::max(1.0, peak))
            throw std::invalid_argument("PeriodicOrbit: top Fourier modes carry mass; samples unresolved");
    }

    void check_injective() const {
        for (int i = 0; i < nt; ++i)
            for (int j = i + 1; j < nt; ++j) {
                double d2 = 0.0;
                for (int c = 0; c < ncomp; ++c) {
                    const double d = sample(i, c) - sample(j, c);
                    d2 += d * d;
                }
                if (d2 <= 1e-18)
                    throw std::invalid_argument("PeriodicOrbit: coincident samples; loop not injective");
            }
    }
};

// The round unit circle in the first two coordinates of R^n.
inline PeriodicOrbit standard_circle_orbit(int n_comp, int nt, double T, int k,
                                           WeightSequence weights = WeightSequence{}) {
    if (n_comp < 2) throw std::invalid_argument("standard_circle_orbit: need at least 2 components");
    std::vector<double> smp(static_cast<std::size_t>(nt) * n_comp, 0.0);
    for (int j = 0; j < nt; ++j) {
        const double t = static_cast<double>(j) / nt;
        smp[static_cast<std::size_t>(j) * n_comp + 0] = std::cos(kTwoPi * t);
        smp[static_cast<std::size_t>(j) * n_comp + 1] = std::sin(kTwoPi * t);
    }
    return PeriodicOrbit(n_comp, nt, T, k, std::move(smp), std::move(weights));
}

// -- angular chart around the model circle -----------------------------------

// Angle function Phi on the annulus rho in (rho_min, rho_max) around the unit
// circle in the leading two orbit components; Phi(gamma_0(t)) = t.
struct AveragingChart {
    double rho_min = 0.5;
    double rho_max = 1.5;

    double radius(const double* x) const { return std::hypot(x[0], x[1]); }

    bool contains(const double* x) const {
        const double rho = radius(x);
        return rho > rho_min && rho < rho_max;
    }

    double Phi(const double* x) const {
        if (!contains(x))
            throw std::domain_error("AveragingChart: point outside the annulus");
        return wrap01(std::atan2(x[1], x[0]) / kTwoPi);
    }
};

// -- standard maps -----------------------------------------------------------

enum class Side { X, Y };

// Decorated standard map: x-half (Ts+cx, gamma(k(t+theta_x))), y-half
// (Ts+cy, gamma(k(t-theta_y))).  The pair twist used when gluing is
// -(theta_x+theta_y) mod 1.
struct StandardMap {
    double cx = 0.0;
    double cy = 0.0;
    double theta_x = 0.0;
    double theta_y = 0.0;
    PeriodicOrbit orbit;

    StandardMap(double cx, double cy, double theta_x, double theta_y, PeriodicOrbit orbit)
        : cx(cx), cy(cy), theta_x(wrap01(theta_x)), theta_y(wrap01(theta_y)),
          orbit(std::move(orbit)) {}

    double twist() const { return wrap01(-(theta_x + theta_y)); }

    void eval(Side side, double s, double t, double* out) const {
        if (side == Side::X) {
            out[0] = orbit.T * s + cx;
            orbit.eval(wrap01(orbit.k * (t + theta_x)), out + 1);
        } else {
            out[0] = orbit.T * s + cy;
            orbit.eval(wrap01(orbit.k * (t - theta_y)), out + 1);
        }
    }

    std::vector<double> eval(Side side, double s, double t) const {
        std::vector<double> out(1 + orbit.ncomp);
        eval(side, s, t, out.data());
        return out;
    }

    // Circle average of Phi along the x-half loop; drops by k*tau when the
    // decoration theta_x is rotated by -tau.
    double derived_phase(const AveragingChart& chart) const {
        std::vector<double> ang(orbit.nt), pt(orbit.ncomp);
        for (int j = 0; j < orbit.nt; ++j) {
            const double t = static_cast<double>(j) / orbit.nt;
            orbit.eval(wrap01(orbit.k * (t + theta_x)), pt.data());
            ang[j] = chart.Phi(pt.data());
        }
        return circle_average(ang);
    }
};

// Deck action of Z_k on decorations; evaluations are unchanged.
inline StandardMap deck_shift(const StandardMap& q, int j) {
    StandardMap out = q;
    const double step = static_cast<double>(j) / q.orbit.k;
    out.theta_x = wrap01(q.theta_x + step);
    out.theta_y = wrap01(q.theta_y - step);
    return out;
}

// Equality of standard maps up to the Z_k deck action.
inline bool maps_match_mod_k(const StandardMap& p, const StandardMap& q, double tol) {
    if (std::abs(p.cx - q.cx) > tol || std::abs(p.cy - q.cy) > tol) return false;
    if (p.orbit.k != q.orbit.k) return false;
    for (int j = 0; j < p.orbit.k; ++j) {
        const StandardMap s = deck_shift(p, j);
        if (circle_dist(s.theta_x, q.theta_x) <= tol && circle_dist(s.theta_y, q.theta_y) <= tol)
            return true;
    }
    return false;
}

// -- gluing parameter from the base coordinate -------------------------------

// Map the base coordinate r and asymptotic constants to the gluing parameter:
// the glued neck has length R_a = (phi(r) + cy - cx) / T, so the modulus is
// phi_inv of that.  R is stored as computed (not re-derived through phi) so a
// round trip through element coordinates never jitters the grid.  With
// strict=true the modulus must sit below 1/4.
inline GluingParameter a_param(double r, double cx, double cy, double T, double angle,
                               bool strict = true) {
    if (!(T > 0.0)) throw std::invalid_argument("a_param: period must be positive");
    if (r < 0.0 || r >= 1.0) throw std::domain_error("a_param: base coordinate outside [0,1)");
    if (r == 0.0) return GluingParameter::zero();
    const double len = (phi(r) + cy - cx) / T;
    if (!(len > 0.0))
        throw std::domain_error("a_param: glued length not positive; pair leaves the domain");
    GluingParameter a = GluingParameter::from_R(len, angle);
    if (strict && !(a.modulus < 0.25))
        throw std::domain_error("a_param: modulus at or above 1/4; pair leaves the domain");
    return a;
}

// -- orbit elements ----------------------------------------------------------

// Boundary format: a decorated standard map plus decaying perturbations on the
// two half-cylinders, stored with zero asymptotic constants.
struct BoundaryBody {
    StandardMap q;
    HalfCylinderField hx;
    HalfCylinderField hy;
};

// Interior format: an already-glued finite cylinder map into R x R^N.
struct InteriorBody {
    FiniteCylinderField w;
};

struct OrbitElement {
    double r = 0.0;
    std::variant<BoundaryBody, InteriorBody> body;

    bool is_boundary() const { return std::holds_alternative<BoundaryBody>(body); }
    const BoundaryBody& boundary() const { return std::get<BoundaryBody>(body); }
    const InteriorBody& interior() const { return std::get<InteriorBody>(body); }
};

namespace detail {

inline void check_perturbation(const HalfCylinderField& h, int sign, int n_orbit_comp) {
    if (h.sign != sign)
        throw std::invalid_argument("OrbitElement: perturbation on the wrong half-cylinder");
    if (h.ncomp != 1 + n_orbit_comp)
        throw std::invalid_argument("OrbitElement: perturbation components must match R x R^N");
    for (double ck : h.c)
        if (std::abs(ck) > 1e-13)
            throw std::invalid_argument("OrbitElement: perturbation must carry zero asymptotic constants");
}

}  // namespace detail

inline OrbitElement make_boundary_element(double r, StandardMap q, HalfCylinderField hx,
                                          HalfCylinderField hy) {
    if (r < 0.0 || r >= 1.0)
        throw std::domain_error("make_boundary_element: base coordinate outside [0,1)");
    detail::check_perturbation(hx, +1, q.orbit.ncomp);
    detail::check_perturbation(hy, -1, q.orbit.ncomp);
    if (hx.nt != hy.nt) throw std::invalid_argument("make_boundary_element: t-grids differ");
    return OrbitElement{r, std::variant<BoundaryBody, InteriorBody>{
                               std::in_place_type<BoundaryBody>, std::move(q), std::move(hx),
                               std::move(hy)}};
}

inline OrbitElement make_interior_element(double r, FiniteCylinderField w) {
    if (!(r > 0.0) || r >= 1.0)
        throw std::domain_error("make_interior_element: interior format needs r in (0,1)");
    return OrbitElement{r, std::variant<BoundaryBody, InteriorBody>{
                               std::in_place_type<InteriorBody>, std::move(w)}};
}

// Domain membership: r = 0 always, otherwise the gluing parameter must exist
// (positive glued length, and modulus below 1/4 when strict).
inline bool element_in_domain(const OrbitElement& elem, bool strict = true) {
    if (elem.r == 0.0) return true;
    if (!elem.is_boundary()) return true;
    const StandardMap& q = elem.boundary().q;
    try {
        a_param(elem.r, q.cx, q.cy, q.orbit.T, q.twist(), strict);
    } catch (const std::domain_error&) {
        return false;
    }
    return true;
}

// -- glued family ------------------------------------------------------------

// Glue a boundary-format element: w(s,t) = beta(s-R/2) u^x(s,t)
//                                        + beta(R/2-s) (phi(r) * u^y)(s-R, t-twist)
// with u = standard map + perturbation and * the shift of the first component.
// r = 0 and interior elements pass through unchanged.
inline OrbitElement bar_oplus(const OrbitElement& elem,
                              CutoffModel model = CutoffModel::ExpQuotient,
                              bool strict = true) {
    if (elem.r == 0.0 || !elem.is_boundary()) return elem;
    const BoundaryBody& b = elem.boundary();
    const StandardMap& q = b.q;
    const PeriodicOrbit& orb = q.orbit;
    const double twist = q.twist();
    const GluingParameter a = a_param(elem.r, q.cx, q.cy, orb.T, twist, strict);
    const double R = a.R;
    const double shift = phi(elem.r);

    const double ds = b.hx.ds();
    if (std::abs(b.hy.ds() - ds) > 1e-12 * std::max(1.0, ds))
        throw std::invalid_argument("bar_oplus: perturbation grids differ");
    const int nt = b.hx.nt;
    const int nw1 = static_cast<int>(detail::snap_index(R / ds, "bar_oplus: neck length not on the grid"));
    const int m = static_cast<int>(detail::snap_index(twist * nt, "bar_oplus: twist not on the t-grid"));
    if (nw1 < 2) throw std::invalid_argument("bar_oplus: neck too short for the grid");

    FiniteCylinderField w(a, b.hx.ncomp, nw1 + 1, nt, std::vector<double>(
        static_cast<std::size_t>(nw1 + 1) * nt * b.hx.ncomp, 0.0));
    std::vector<double> qx(b.hx.ncomp), qy(b.hx.ncomp);
    const double half_R = R / 2.0;
    for (int i = 0; i <= nw1; ++i) {
        const double s = i * ds;
        const double bx = beta(s - half_R, model);
        const double by = beta(half_R - s, model);
        for (int j = 0; j < nt; ++j) {
            const double t = static_cast<double>(j) / nt;
            double* out = &w.data[(static_cast<std::size_t>(i) * nt + j) * w.ncomp];
            if (bx != 0.0) {
                if (i >= b.hx.ns)
                    throw std::invalid_argument("bar_oplus: hx grid too short for the neck");
                q.eval(Side::X, s, t, qx.data());
                for (int c = 0; c < w.ncomp; ++c)
                    out[c] += bx * (qx[c] + b.hx.at(i, j, c));
            }
            if (by != 0.0) {
                const int iy = nw1 - i;
                if (iy >= b.hy.ns)
                    throw std::invalid_argument("bar_oplus: hy grid too short for the neck");
                q.eval(Side::Y, s - R, t - twist, qy.data());
                double val0 = qy[0] + b.hy.at(iy, j - m, 0) + shift;
                out[0] += by * val0;
                for (int c = 1; c < w.ncomp; ++c)
                    out[c] += by * (qy[c] + b.hy.at(iy, j - m, c));
            }
        }
    }
    return make_interior_element(elem.r, std::move(w));
}

// Shift the first component of every piece of an element (the R-action).
inline OrbitElement r_shift(const OrbitElement& elem, double amount) {
    OrbitElement out = elem;
    if (out.is_boundary()) {
        BoundaryBody& b = std::get<BoundaryBody>(out.body);
        b.q.cx += amount;
        b.q.cy += amount;
    } else {
        InteriorBody& b = std::get<InteriorBody>(out.body);
        for (int i = 0; i < b.w.ns; ++i)
            for (int j = 0; j < b.w.nt; ++j)
                b.w.at(i, j, 0) += amount;
    }
    return out;
}

// -- coretraction H ----------------------------------------------------------

// Split a glued cylinder against the reference standard map with cx = 0 and
// theta_x = 0: cy is chosen so the glued length reproduces w's parameter, and
// the perturbations are beta-tapered differences shifted two units into the
// respective half.
inline OrbitElement coretraction_H(double r, const FiniteCylinderField& w,
                                   const PeriodicOrbit& orbit,
                                   CutoffModel model = CutoffModel::ExpQuotient) {
    if (!(r > 0.0) || r >= 1.0)
        throw std::domain_error("coretraction_H: base coordinate outside (0,1)");
    if (w.ncomp != 1 + orbit.ncomp)
        throw std::invalid_argument("coretraction_H: component mismatch with the orbit");
    const double R = w.R();
    const double shift = phi(r);
    const double twist = w.param.theta;
    StandardMap q(0.0, orbit.T * R - shift, 0.0, wrap01(-twist), orbit);

    const int ns = w.ns, nt = w.nt;
    const double ds = w.ds();
    const int m = static_cast<int>(detail::snap_index(twist * nt, "coretraction_H: twist not on the t-grid"));
    const double half_R = R / 2.0;

    std::vector<double> dx(static_cast<std::size_t>(ns) * nt * w.ncomp, 0.0);
    std::vector<double> dy(static_cast<std::size_t>(ns) * nt * w.ncomp, 0.0);
    std::vector<double> qv(w.ncomp);
    for (int i = 0; i < ns; ++i) {
        const double s = i * ds;
        const double taper = beta(s - half_R - 2.0, model);
        if (taper == 0.0) continue;
        for (int j = 0; j < nt; ++j) {
            const double t = static_cast<double>(j) / nt;
            // x half at (s, t)
            q.eval(Side::X, s, t, qv.data());
            double* ox = &dx[(static_cast<std::size_t>(i) * nt + j) * w.ncomp];
            for (int c = 0; c < w.ncomp; ++c)
                ox[c] = taper * (w.at(i, j, c) - qv[c]);
            // y half at (s' = -s, t' = t): w row ns-1-i, t index j+m, minus the
            // first-component shift phi(r)
            q.eval(Side::Y, -s, t, qv.data());
            double* oy = &dy[(static_cast<std::size_t>(i) * nt + j) * w.ncomp];
            const int iw = ns - 1 - i;
            oy[0] = taper * (w.at(iw, j + m, 0) - shift - qv[0]);
            for (int c = 1; c < w.ncomp; ++c)
                oy[c] = taper * (w.at(iw, j + m, c) - qv[c]);
        }
    }
    std::vector<double> zero_c(w.ncomp, 0.0);
    HalfCylinderField hx(+1, w.ncomp, ns, nt, R, zero_c, std::move(dx), orbit.weights, false);
    HalfCylinderField hy(-1, w.ncomp, ns, nt, R, zero_c, std::move(dy), orbit.weights, false);
    return make_boundary_element(r, std::move(q), std::move(hx), std::move(hy));
}

// -- averaging map A_Phi -----------------------------------------------------

// Read a decorated standard map off a glued cylinder: the asymptotic constant
// cx is the mean of the first component on the middle loop minus T R/2, cy
// restores the glued-length relation, and the decoration phase is the circle
// average of the angle on the middle loop.  The middle annulus must stay in
// the chart and wind k times.
inline StandardMap averaging_A_Phi(double r, const FiniteCylinderField& w,
                                   const PeriodicOrbit& orbit, const AveragingChart& chart) {
    if (!(r > 0.0) || r >= 1.0)
        throw std::domain_error("averaging_A_Phi: base coordinate outside (0,1)");
    if (w.ncomp != 1 + orbit.ncomp)
        throw std::invalid_argument("averaging_A_Phi: component mismatch with the orbit");
    const double R = w.R();
    const double ds = w.ds();
    const int nt = w.nt;
    const int imid = static_cast<int>(detail::snap_index(
        R / (2.0 * ds), "averaging_A_Phi: middle loop not on the grid"));
    if (imid <= 0 || imid >= w.ns)
        throw std::invalid_argument("averaging_A_Phi: middle loop outside the grid");

    // the middle annulus [R/2-3, R/2+3] must lie in the chart
    const int pad = static_cast<int>(std::floor(3.0 / ds));
    std::vector<double> pt(orbit.ncomp);
    for (int i = std::max(0, imid - pad); i <= std::min(w.ns - 1, imid + pad); ++i)
        for (int j = 0; j < nt; ++j) {
            for (int c = 0; c < orbit.ncomp; ++c) pt[c] = w.at(i, j, 1 + c);
            if (!chart.contains(pt.data()))
                throw std::domain_error("averaging_A_Phi: middle annulus leaves the chart");
        }

    // winding of the middle loop must match the covering number
    std::vector<double> ang(nt);
    for (int j = 0; j < nt; ++j) {
        for (int c = 0; c < orbit.ncomp; ++c) pt[c] = w.at(imid, j, 1 + c);
        ang[j] = chart.Phi(pt.data());
    }
    {
        double lift = ang[0];
        double prev = ang[0];
        for (int j = 1; j <= nt; ++j) {
            const double cur = ang[j % nt];
            double d = wrap01(cur - prev);
            if (d > 0.5) d -= 1.0;
            if (std::abs(d) >= 0.5 - 1e-9)
                throw std::runtime_error("averaging_A_Phi: angle jump on the middle loop");
            lift += d;
            prev = cur;
        }
        const long degree = std::lround(lift - ang[0]);
        if (degree != orbit.k)
            throw std::domain_error("averaging_A_Phi: middle loop winding differs from the covering number");
    }

    double mean0 = 0.0;
    for (int j = 0; j < nt; ++j) mean0 += w.at(imid, j, 0);
    mean0 /= nt;
    const double cx = mean0 - 0.5 * orbit.T * R;
    const double cy = cx + orbit.T * R - phi(r);
    const double d = circle_average(ang);
    const double theta_x = wrap01(d / orbit.k - 0.5);
    const double theta_y = wrap01(-w.param.theta - theta_x);
    return StandardMap(cx, cy, theta_x, theta_y, orbit);
}

inline StandardMap averaging_A_Phi(const OrbitElement& elem, const PeriodicOrbit& orbit,
                                   const AveragingChart& chart,
                                   CutoffModel model = CutoffModel::ExpQuotient,
                                   bool strict = true) {
    if (elem.is_boundary() && elem.r == 0.0) return elem.boundary().q;
    if (elem.is_boundary())
        return averaging_A_Phi(elem.r, bar_oplus(elem, model, strict).interior().w, orbit, chart);
    return averaging_A_Phi(elem.r, elem.interior().w, orbit, chart);
}

// -- coretraction K ----------------------------------------------------------

// Like H, but the reference map is read off w by the averaging map, so the
// result is invariant under re-gluing: K after bar_oplus after K equals K.
inline OrbitElement coretraction_K(double r, const FiniteCylinderField& w,
                                   const PeriodicOrbit& orbit, const AveragingChart& chart,
                                   CutoffModel model = CutoffModel::ExpQuotient) {
    if (!(r > 0.0) || r >= 1.0)
        throw std::domain_error("coretraction_K: base coordinate outside (0,1)");
    const StandardMap q = averaging_A_Phi(r, w, orbit, chart);
    const double R = w.R();
    const double shift = phi(r);
    const double twist = w.param.theta;
    const int ns = w.ns, nt = w.nt;
    const double ds = w.ds();
    const int m = static_cast<int>(detail::snap_index(twist * nt, "coretraction_K: twist not on the t-grid"));
    const double half_R = R / 2.0;

    std::vector<double> dx(static_cast<std::size_t>(ns) * nt * w.ncomp, 0.0);
    std::vector<double> dy(static_cast<std::size_t>(ns) * nt * w.ncomp, 0.0);
    std::vector<double> qv(w.ncomp);
    for (int i = 0; i < ns; ++i) {
        const double s = i * ds;
        const double taper = beta(s - half_R - 2.0, model);
        if (taper == 0.0) continue;
        for (int j = 0; j < nt; ++j) {
            const double t = static_cast<double>(j) / nt;
            q.eval(Side::X, s, t, qv.data());
            double* ox = &dx[(static_cast<std::size_t>(i) * nt + j) * w.ncomp];
            for (int c = 0; c < w.ncomp; ++c)
                ox[c] = taper * (w.at(i, j, c) - qv[c]);
            q.eval(Side::Y, -s, t, qv.data());
            double* oy = &dy[(static_cast<std::size_t>(i) * nt + j) * w.ncomp];
            const int iw = ns - 1 - i;
            oy[0] = taper * (w.at(iw, j + m, 0) - shift - qv[0]);
            for (int c = 1; c < w.ncomp; ++c)
                oy[c] = taper * (w.at(iw, j + m, c) - qv[c]);
        }
    }
    std::vector<double> zero_c(w.ncomp, 0.0);
    HalfCylinderField hx(+1, w.ncomp, ns, nt, R, zero_c, std::move(dx), orbit.weights, false);
    HalfCylinderField hy(-1, w.ncomp, ns, nt, R, zero_c, std::move(dy), orbit.weights, false);
    return make_boundary_element(r, q, std::move(hx), std::move(hy));
}

inline OrbitElement coretraction_K(const OrbitElement& elem, const PeriodicOrbit& orbit,
                                   const AveragingChart& chart,
                                   CutoffModel model = CutoffModel::ExpQuotient,
                                   bool strict = true) {
    if (elem.r == 0.0) return elem;
    if (elem.is_boundary())
        return coretraction_K(elem.r, bar_oplus(elem, model, strict).interior().w, orbit, chart,
                              model);
    return coretraction_K(elem.r, elem.interior().w, orbit, chart, model);
}

// -- comparison map D --------------------------------------------------------

// Tapered difference between the element's own standard map and the one the
// averaging map reads off its gluing.  Decays as r -> 0 for fixed
// perturbations; identically zero at r = 0.
struct ComparisonPair {
    HalfCylinderField kx;
    HalfCylinderField ky;
};

inline ComparisonPair compare_D(const OrbitElement& elem, const AveragingChart& chart,
                                CutoffModel model = CutoffModel::ExpQuotient,
                                bool strict = true) {
    if (!elem.is_boundary())
        throw std::invalid_argument("compare_D: needs a boundary-format element");
    const BoundaryBody& b = elem.boundary();
    const StandardMap& q = b.q;
    const PeriodicOrbit& orb = q.orbit;
    const int nc = 1 + orb.ncomp;
    std::vector<double> zero_c(nc, 0.0);
    if (elem.r == 0.0) {
        HalfCylinderField kx(+1, nc, b.hx.ns, b.hx.nt, b.hx.smax, zero_c,
                             std::vector<double>(b.hx.data.size(), 0.0), b.hx.weights, false);
        HalfCylinderField ky(-1, nc, b.hy.ns, b.hy.nt, b.hy.smax, zero_c,
                             std::vector<double>(b.hy.data.size(), 0.0), b.hy.weights, false);
        return ComparisonPair{std::move(kx), std::move(ky)};
    }
    const FiniteCylinderField w = bar_oplus(elem, model, strict).interior().w;
    const StandardMap p = averaging_A_Phi(elem.r, w, orb, chart);
    const double half_R = w.R() / 2.0;

    auto taper_diff = [&](const HalfCylinderField& grid, Side side) {
        std::vector<double> data(static_cast<std::size_t>(grid.ns) * grid.nt * nc, 0.0);
        std::vector<double> qv(nc), pv(nc);
        for (int i = 0; i < grid.ns; ++i) {
            const double s = grid.s_at(i);
            const double taper = beta(std::abs(s) - half_R - 2.0, model);
            if (taper == 0.0) continue;
            for (int j = 0; j < grid.nt; ++j) {
                const double t = static_cast<double>(j) / grid.nt;
                q.eval(side, s, t, qv.data());
                p.eval(side, s, t, pv.data());
                double* out = &data[(static_cast<std::size_t>(i) * grid.nt + j) * nc];
                for (int c = 0; c < nc; ++c) out[c] = taper * (qv[c] - pv[c]);
            }
        }
        return HalfCylinderField(grid.sign, nc, grid.ns, grid.nt, grid.smax, zero_c,
                                 std::move(data), grid.weights, false);
    };
    return ComparisonPair{taper_diff(b.hx, Side::X), taper_diff(b.hy, Side::Y)};
}

// -- asymptotic class fit ----------------------------------------------------

// Fit the asymptotic constant and decoration phase of a sampled half-cylinder
// map and report weighted residual norms against the fitted standard map.
struct OrbitClassFit {
    double c = 0.0;                       // asymptotic constant of the first component
    double d = 0.0;                       // circle average of the angle at the far loop
    std::vector<double> residual_levels;  // weighted residual norms per level
};

inline OrbitClassFit orbit_class_check(const HalfCylinderField& f, const PeriodicOrbit& orbit,
                                       const AveragingChart& chart,
                                       const WeightSequence& weights,
                                       double window = 2.0) {
    if (f.ncomp != 1 + orbit.ncomp)
        throw std::invalid_argument("orbit_class_check: component mismatch with the orbit");
    const double ds = f.ds();
    const int nwin = std::max(1, static_cast<int>(std::floor(window / ds)));
    if (nwin >= f.ns)
        throw std::invalid_argument("orbit_class_check: window longer than the sample");

    OrbitClassFit fit;
    // asymptotic constant: mean of (first component - T s) over the window
    double acc = 0.0;
    for (int i = f.ns - 1 - nwin; i < f.ns; ++i)
        for (int j = 0; j < f.nt; ++j)
            acc += f.value(i, j, 0) - orbit.T * f.s_at(i);
    fit.c = acc / (static_cast<double>(nwin + 1) * f.nt);

    // decoration phase: circle average of the angle on the far loop
    std::vector<double> ang(f.nt);
    for (int j = 0; j < f.nt; ++j) {
        std::vector<double> pt(orbit.ncomp);
        for (int c = 0; c < orbit.ncomp; ++c) pt[c] = f.value(f.ns - 1, j, 1 + c);
        ang[j] = chart.Phi(pt.data());
    }
    fit.d = circle_average(ang);

    // residual against the fitted standard map gamma(k t + d - k/2)
    const double theta = (fit.d - 0.5 * orbit.k) / orbit.k;
    std::vector<double> resid(static_cast<std::size_t>(f.ns) * f.nt * f.ncomp);
    std::vector<double> qv(orbit.ncomp);
    double sup_first = 0.0, sup_last = 0.0;
    for (int i = 0; i < f.ns; ++i) {
        double sup = 0.0;
        for (int j = 0; j < f.nt; ++j) {
            const double t = static_cast<double>(j) / f.nt;
            orbit.eval(wrap01(orbit.k * (t + theta)), qv.data());
            double* out = &resid[(static_cast<std::size_t>(i) * f.nt + j) * f.ncomp];
            out[0] = f.value(i, j, 0) - (orbit.T * f.s_at(i) + fit.c);
            for (int c = 0; c < orbit.ncomp; ++c) out[1 + c] = f.value(i, j, 1 + c) - qv[c];
            for (int c = 0; c < f.ncomp; ++c) sup = std::max(sup, std::abs(out[c]));
        }
        if (i == f.ns - 1 - nwin) sup_first = sup;
        if (i == f.ns - 1) sup_last = sup;
    }
    if (sup_last > 2.0 * sup_first + 1e-10)
        throw std::runtime_error("orbit_class_check: residual grows toward the puncture; fit divergent");

    weights.validate();
    GridSpec spec{f.ns, f.nt, f.ncomp, 0.0, ds, 0.0};
    for (int level = 0; level < static_cast<int>(weights.levels()); ++level) {
        const int m_cap = std::min(level, 2);
        fit.residual_levels.push_back(std::sqrt(
            weighted_norm_sq_view(resid, spec, weights.at(level), m_cap)));
    }
    return fit;
}

// Directional limits of two fits agree: same constant and same phase.
inline bool directionally_matching(const OrbitClassFit& a, const OrbitClassFit& b, double tol) {
    return std::abs(a.c - b.c) <= tol && circle_dist(a.d, b.d) <= tol;
}

// -- serialization -----------------------------------------------------------

inline void write_orbit(std::ostream& os, const PeriodicOrbit& orbit) {
    os << "SCORBIT N=" << orbit.ncomp << " Nt=" << orbit.nt << " T=" << detail::fmt(orbit.T)
       << " k=" << orbit.k << "\n";
    for (int j = 0; j < orbit.nt; ++j) {
        os << detail::fmt(static_cast<double>(j) / orbit.nt);
        for (int c = 0; c < orbit.ncomp; ++c) os << ' ' << detail::fmt(orbit.sample(j, c));
        os << '\n';
    }
}

inline PeriodicOrbit read_orbit(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("SCORBIT: empty stream");
    std::istringstream hs(line);
    std::string magic;
    hs >> magic;
    if (magic != "SCORBIT") throw std::runtime_error("SCORBIT: bad magic");
    auto kv = detail::parse_kv(hs);
    const int ncomp = static_cast<int>(detail::parse_int(detail::require(kv, "N"), "SCORBIT N"));
    const int nt = static_cast<int>(detail::parse_int(detail::require(kv, "Nt"), "SCORBIT Nt"));
    const double T = detail::parse_double(detail::require(kv, "T"), "SCORBIT T");
    const int k = static_cast<int>(detail::parse_int(detail::require(kv, "k"), "SCORBIT k"));
    std::vector<double> samples(static_cast<std::size_t>(nt) * ncomp);
    for (int j = 0; j < nt; ++j) {
        if (!std::getline(is, line)) throw std::runtime_error("SCORBIT: truncated sample rows");
        std::istringstream rs(line);
        std::string tok;
        if (!(rs >> tok)) throw std::runtime_error("SCORBIT: empty sample row");
        detail::parse_double(tok, "SCORBIT t");  // t coordinate, regenerated on write
        for (int c = 0; c < ncomp; ++c) {
            if (!(rs >> tok)) throw std::runtime_error("SCORBIT: short sample row");
            samples[static_cast<std::size_t>(j) * ncomp + c] = detail::parse_double(tok, "SCORBIT sample");
        }
    }
    return PeriodicOrbit(ncomp, nt, T, k, std::move(samples));
}

inline void write_orbit_element(std::ostream& os, const OrbitElement& elem) {
    os << "SCORBELEM r=" << detail::fmt(elem.r);
    if (elem.is_boundary()) {
        const BoundaryBody& b = elem.boundary();
        os << " kind=boundary cx=" << detail::fmt(b.q.cx) << " cy=" << detail::fmt(b.q.cy)
           << " thetax=" << detail::fmt(b.q.theta_x)
           << " thetay=" << detail::fmt(b.q.theta_y) << "\n";
        write_field(os, b.hx);
        write_field(os, b.hy);
    } else {
        os << " kind=interior\n";
        write_field(os, elem.interior().w);
    }
}

inline OrbitElement read_orbit_element(std::istream& is, const PeriodicOrbit& orbit) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("SCORBELEM: empty stream");
    std::istringstream hs(line);
    std::string magic;
    hs >> magic;
    if (magic != "SCORBELEM") throw std::runtime_error("SCORBELEM: bad magic");
    auto kv = detail::parse_kv(hs);
    const double r = detail::parse_double(detail::require(kv, "r"), "SCORBELEM r");
    const std::string kind = detail::require(kv, "kind");
    if (kind == "boundary") {
        StandardMap q(detail::parse_double(detail::require(kv, "cx"), "SCORBELEM cx"),
                      detail::parse_double(detail::require(kv, "cy"), "SCORBELEM cy"),
                      detail::parse_double(detail::require(kv, "thetax"), "SCORBELEM thetax"),
                      detail::parse_double(detail::require(kv, "thetay"), "SCORBELEM thetay"),
                      orbit);
        AnyField fx = read_field(is);
        AnyField fy = read_field(is);
        if (!std::holds_alternative<HalfCylinderField>(fx) ||
            !std::holds_alternative<HalfCylinderField>(fy))
            throw std::runtime_error("SCORBELEM: boundary element needs two half-cylinder blocks");
        return make_boundary_element(r, std::move(q), std::get<HalfCylinderField>(std::move(fx)),
                                     std::get<HalfCylinderField>(std::move(fy)));
    }
    if (kind == "interior") {
        AnyField fw = read_field(is);
        if (!std::holds_alternative<FiniteCylinderField>(fw))
            throw std::runtime_error("SCORBELEM: interior element needs a finite-cylinder block");
        return make_interior_element(r, std::get<FiniteCylinderField>(std::move(fw)));
    }
    throw std::runtime_error("SCORBELEM: unknown kind '" + kind + "'");
}

}  // namespace scglue
