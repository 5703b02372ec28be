#pragma once

// Exponential gluing profile, its inverse, the associated reparameterization
// maps, and the cutoff models used to build all windowed sums.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace scglue {

inline constexpr double kMinProfileModulus = 0.05;

// Gluing length R = e^{1/r} - e for modulus r in (0,1].
inline double phi(double r) {
    if (!(r > 0.0) || r > 1.0)
        throw std::domain_error("phi: modulus must lie in (0,1], got " + std::to_string(r));
    if (r < kMinProfileModulus)
        throw std::range_error("phi: modulus " + std::to_string(r) +
                               " below 0.05 would overflow the gluing length");
    // expm1 keeps phi(1) == 0 exact.
    return std::expm1(1.0 / r) - std::expm1(1.0);
}

// Inverse profile, r = 1/ln(R+e) for R >= 0; phi_inv(0) == 1 exactly.
inline double phi_inv(double R) {
    if (!(R >= 0.0))
        throw std::domain_error("phi_inv: gluing length must be >= 0, got " + std::to_string(R));
    return 1.0 / (1.0 + std::log1p(R / std::numbers::e));
}

// g_T(x) = x * ln(T + (e - T e) e^{-1/x}), the correction term in the stable
// form of the profile rescaling map; g_T(0) = 0 and g_T'(0) = ln T.
inline double calc_g(double T, double x) {
    if (!(T > 0.0))
        throw std::domain_error("calc_g: scale T must be positive");
    if (!(x >= 0.0) || x >= 1.0 + 1e-15)
        throw std::domain_error("calc_g: x must lie in [0,1)");
    if (x == 0.0) return 0.0;
    const double D = std::numbers::e * (1.0 - T);
    return x * (std::log(T) + std::log1p((D / T) * std::exp(-1.0 / x)));
}

// B_T(x) = phi_inv(T * phi(x)) evaluated as x / (1 + g_T(x)); B_T(0) = 0,
// B_T'(0) = 1.
inline double calc_B(double T, double x) {
    if (!(T > 0.0))
        throw std::domain_error("calc_B: scale T must be positive");
    if (!(x >= 0.0) || x >= 1.0 + 1e-15)
        throw std::domain_error("calc_B: x must lie in [0,1)");
    if (x == 0.0) return 0.0;
    return x / (1.0 + calc_g(T, x));
}

// C_T(x,c) = phi_inv(T * phi(x) + c); C_T(0,c) = 0 and dC_T/dx(0,c) = 1.
inline double calc_C(double T, double x, double c) {
    if (!(T > 0.0))
        throw std::domain_error("calc_C: scale T must be positive");
    if (!(x >= 0.0) || x >= 1.0 + 1e-15)
        throw std::domain_error("calc_C: x must lie in [0,1)");
    if (x == 0.0) return 0.0;
    const double w = std::exp(-1.0 / x);
    const double D = std::numbers::e * (1.0 - T);
    // T*phi(x) + c > 0  <=>  T + (c - T e) e^{-1/x} > 0, checked without
    // forming e^{1/x}.
    if (T + (c - std::numbers::e * T) * w <= 0.0)
        throw std::domain_error("calc_C: T*phi(x)+c must be positive");
    return x / (1.0 + x * (std::log(T) + std::log1p(((c + D) / T) * w)));
}

// Alternate logarithmic profile, kept for comparison plots only.
inline double phi_dm(double r) {
    if (!(r > 0.0) || r > 1.0)
        throw std::domain_error("phi_dm: modulus must lie in (0,1]");
    return -std::log(r) / (2.0 * std::numbers::pi);
}

// ---------------------------------------------------------------------------
// Cutoff models. Both satisfy exactly: beta(s) = 1 for s <= -1, beta(s) = 0
// for s >= 1, beta(s) + beta(-s) = 1, and beta strictly decreasing on (-1,1).

enum class CutoffModel {
    ExpQuotient,  // beta(s) = h(1-s) / (h(1-s) + h(1+s)), h(t) = e^{-1/t}
    QuinticStep,  // odd-polynomial smoothstep, C^2
};

namespace detail {
inline double bump_h(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
inline double bump_h_prime(double t) {
    return t > 0.0 ? std::exp(-1.0 / t) / (t * t) : 0.0;
}
// Odd part of the quintic step: p(v) = 15/8 v - 5 v^3 + 6 v^5, so that
// beta(s) = 1/2 - p(s/2) gives an exactly symmetric partition in floating
// point (p(-v) == -p(v) bit for bit).
inline double quintic_odd(double v) {
    const double v2 = v * v;
    return v * (15.0 / 8.0 + v2 * (-5.0 + 6.0 * v2));
}
inline double quintic_odd_prime(double v) {
    const double v2 = v * v;
    return 15.0 / 8.0 + v2 * (-15.0 + 30.0 * v2);
}
}  // namespace detail

inline double beta(double s, CutoffModel model = CutoffModel::ExpQuotient) {
    if (s <= -1.0) return 1.0;
    if (s >= 1.0) return 0.0;
    switch (model) {
        case CutoffModel::ExpQuotient: {
            const double a = detail::bump_h(1.0 - s);
            const double b = detail::bump_h(1.0 + s);
            return a / (a + b);
        }
        case CutoffModel::QuinticStep:
            return 0.5 - detail::quintic_odd(0.5 * s);
    }
    return 0.0;
}

inline double beta_prime(double s, CutoffModel model = CutoffModel::ExpQuotient) {
    if (s <= -1.0 || s >= 1.0) return 0.0;
    switch (model) {
        case CutoffModel::ExpQuotient: {
            const double a = detail::bump_h(1.0 - s);
            const double b = detail::bump_h(1.0 + s);
            const double ap = -detail::bump_h_prime(1.0 - s);
            const double bp = detail::bump_h_prime(1.0 + s);
            const double den = a + b;
            return (ap * b - a * bp) / (den * den);
        }
        case CutoffModel::QuinticStep:
            return -0.5 * detail::quintic_odd_prime(0.5 * s);
    }
    return 0.0;
}

// Window sigma(s) = beta(s-2) * (1 - beta(s)), supported in (-1,3).
inline double window_sigma(double s, CutoffModel model = CutoffModel::ExpQuotient) {
    return beta(s - 2.0, model) * (1.0 - beta(s, model));
}

}  // namespace scglue
