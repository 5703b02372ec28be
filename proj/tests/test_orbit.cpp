#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "scglue/orbit.hpp"

using namespace scglue;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// zero perturbation on a half-cylinder grid
HalfCylinderField zero_half(int sign, int ncomp, int ns, int nt, double smax,
                            WeightSequence w = {}) {
    return HalfCylinderField(sign, ncomp, ns, nt, smax, std::vector<double>(ncomp, 0.0),
                             std::vector<double>(static_cast<std::size_t>(ns) * nt * ncomp, 0.0),
                             std::move(w), false);
}

// perturbation h(s,t) built from a callback on |s|; constants are zero
template <typename F>
HalfCylinderField make_half(int sign, int ncomp, int ns, int nt, double smax, F f,
                            WeightSequence w = {}) {
    std::vector<double> data(static_cast<std::size_t>(ns) * nt * ncomp);
    const double ds = smax / (ns - 1);
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < nt; ++j)
            for (int k = 0; k < ncomp; ++k)
                data[(static_cast<std::size_t>(i) * nt + j) * ncomp + k] =
                    f(i * ds, static_cast<double>(j) / nt, k);
    return HalfCylinderField(sign, ncomp, ns, nt, smax, std::vector<double>(ncomp, 0.0),
                             std::move(data), std::move(w), false);
}

double max_field_diff(const FiniteCylinderField& a, const FiniteCylinderField& b) {
    REQUIRE(a.ns == b.ns);
    REQUIRE(a.nt == b.nt);
    REQUIRE(a.ncomp == b.ncomp);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
    return worst;
}

double max_field_diff(const HalfCylinderField& a, const HalfCylinderField& b) {
    REQUIRE(a.ns == b.ns);
    REQUIRE(a.nt == b.nt);
    REQUIRE(a.ncomp == b.ncomp);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
    return worst;
}

}  // namespace

TEST_CASE("circle averages are exact for affine loops") {
    const int n = 16;
    std::vector<double> q(n);

    // degree 1: t + c averages to c + 1/2
    for (int j = 0; j < n; ++j) q[j] = wrap01(static_cast<double>(j) / n + 0.3);
    CHECK_THAT(circle_average(q), WithinAbs(0.8, 1e-14));

    // wrap through 1 is handled by the lift
    for (int j = 0; j < n; ++j) q[j] = wrap01(static_cast<double>(j) / n + 0.95);
    CHECK_THAT(circle_average(q), WithinAbs(0.45, 1e-14));

    // degree 2
    for (int j = 0; j < n; ++j) q[j] = wrap01(2.0 * j / n + 0.1);
    CHECK_THAT(circle_average(q), WithinAbs(0.1, 1e-14));

    // constant loop has degree 0
    std::fill(q.begin(), q.end(), 0.9);
    CHECK_THAT(circle_average(q), WithinAbs(0.9, 1e-14));

    // sampling t -> q(t - tau) drops the average by k tau
    const int k = 2, nn = 32;
    const double tau = 0.37, c = 0.15;
    std::vector<double> shifted(nn);
    for (int j = 0; j < nn; ++j) shifted[j] = wrap01(k * (static_cast<double>(j) / nn - tau) + c);
    const double base = wrap01(c + 0.5 * k);
    CHECK_THAT(circle_dist(circle_average(shifted), wrap01(base - k * tau)), WithinAbs(0.0, 1e-12));

    // a half-turn jump cannot be unwrapped
    const std::vector<double> ambiguous{0.0, 0.5};
    CHECK_THROWS_AS(circle_average(ambiguous), std::runtime_error);
    const std::vector<double> single{0.3};
    CHECK_THROWS_AS(circle_average(single), std::invalid_argument);
}

TEST_CASE("periodic orbit interpolation reproduces band-limited loops") {
    const PeriodicOrbit circle = standard_circle_orbit(2, 16, 1.0, 1);

    // samples and the closed form are reproduced off-grid
    CHECK_THAT(circle.eval(0.0)[0], WithinAbs(1.0, 1e-13));
    CHECK_THAT(circle.eval(0.0)[1], WithinAbs(0.0, 1e-13));
    CHECK_THAT(circle.eval(0.25)[0], WithinAbs(0.0, 1e-13));
    CHECK_THAT(circle.eval(0.25)[1], WithinAbs(1.0, 1e-13));
    for (double t : {0.05, 0.3141, 0.77}) {
        const auto v = circle.eval(t);
        CHECK_THAT(v[0], WithinAbs(std::cos(kTwoPi * t), 1e-13));
        CHECK_THAT(v[1], WithinAbs(std::sin(kTwoPi * t), 1e-13));
        const auto dv = circle.derivative(t);
        CHECK_THAT(dv[0], WithinAbs(-kTwoPi * std::sin(kTwoPi * t), 1e-10));
        CHECK_THAT(dv[1], WithinAbs(kTwoPi * std::cos(kTwoPi * t), 1e-10));
    }

    // two-harmonic loop in R^3
    const int nt = 32;
    auto g0 = [](double t) { return std::cos(kTwoPi * t) + 0.2 * std::cos(2.0 * kTwoPi * t); };
    auto g1 = [](double t) { return std::sin(kTwoPi * t) - 0.1 * std::sin(2.0 * kTwoPi * t); };
    auto g2 = [](double t) { return 0.3 * std::cos(kTwoPi * t); };
    std::vector<double> smp(static_cast<std::size_t>(nt) * 3);
    for (int j = 0; j < nt; ++j) {
        const double t = static_cast<double>(j) / nt;
        smp[j * 3 + 0] = g0(t);
        smp[j * 3 + 1] = g1(t);
        smp[j * 3 + 2] = g2(t);
    }
    const PeriodicOrbit wobble(3, nt, 2.0, 1, smp);
    for (double t : {0.003, 0.41, 0.988}) {
        const auto v = wobble.eval(t);
        CHECK_THAT(v[0], WithinAbs(g0(t), 1e-12));
        CHECK_THAT(v[1], WithinAbs(g1(t), 1e-12));
        CHECK_THAT(v[2], WithinAbs(g2(t), 1e-12));
    }

    // top Fourier mode carrying mass is rejected as unresolved
    std::vector<double> bad = smp;
    for (int j = 0; j < nt; ++j) bad[j * 3 + 2] += 1e-4 * std::cos(kTwoPi * (nt / 2) * j / nt);
    CHECK_THROWS_AS(PeriodicOrbit(3, nt, 2.0, 1, bad), std::invalid_argument);

    // coincident samples are rejected
    std::vector<double> flat(static_cast<std::size_t>(16) * 2, 0.5);
    CHECK_THROWS_AS(PeriodicOrbit(2, 16, 1.0, 1, flat), std::invalid_argument);

    // basic validation
    CHECK_THROWS_AS(standard_circle_orbit(1, 16, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(standard_circle_orbit(2, 16, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(standard_circle_orbit(2, 16, 1.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(PeriodicOrbit(2, 16, 1.0, 1, std::vector<double>(7)),
                    std::invalid_argument);
}

TEST_CASE("standard map evaluation and the deck action") {
    const PeriodicOrbit orb = standard_circle_orbit(2, 16, 2.0, 3);
    const StandardMap q(1.0, -0.4, 0.2, 0.55, orb);

    // first component is affine with the stored constant
    CHECK(q.eval(Side::X, 3.0, 0.0)[0] == 7.0);
    CHECK_THAT(q.eval(Side::Y, -2.0, 0.3)[0], WithinAbs(-4.4, 1e-14));

    // x half with zero decoration starts on the orbit base point
    const StandardMap base(0.0, 0.0, 0.0, 0.0, orb);
    const auto v0 = base.eval(Side::X, 0.0, 0.0);
    CHECK(v0[0] == 0.0);
    CHECK_THAT(v0[1], WithinAbs(1.0, 1e-13));
    CHECK_THAT(v0[2], WithinAbs(0.0, 1e-13));

    // deck action leaves evaluations unchanged
    for (int j = 1; j < orb.k; ++j) {
        const StandardMap s = deck_shift(q, j);
        CHECK_THAT(s.twist(), WithinAbs(q.twist(), 1e-14));
        for (double t : {0.0, 0.11, 0.62})
            for (double sv : {0.0, 1.7}) {
                const auto a = q.eval(Side::X, sv, t), b = s.eval(Side::X, sv, t);
                const auto c = q.eval(Side::Y, -sv, t), d = s.eval(Side::Y, -sv, t);
                for (int comp = 0; comp < 3; ++comp) {
                    CHECK_THAT(a[comp], WithinAbs(b[comp], 1e-12));
                    CHECK_THAT(c[comp], WithinAbs(d[comp], 1e-12));
                }
            }
        CHECK(maps_match_mod_k(s, q, 1e-12));
    }
    StandardMap off = q;
    off.cx += 1e-3;
    CHECK_FALSE(maps_match_mod_k(off, q, 1e-6));
    off = q;
    off.theta_x = wrap01(off.theta_x + 0.01);
    CHECK_FALSE(maps_match_mod_k(off, q, 1e-6));

    // rotating the x decoration by -tau drops the derived phase by k tau
    const AveragingChart chart;
    const double tau = 0.37;
    StandardMap rot = q;
    rot.theta_x = wrap01(rot.theta_x - tau);
    const double d0 = q.derived_phase(chart);
    const double d1 = rot.derived_phase(chart);
    CHECK_THAT(circle_dist(d1, wrap01(d0 - orb.k * tau)), WithinAbs(0.0, 1e-10));
    CHECK(rot.cx == q.cx);
    CHECK(rot.cy == q.cy);

    // the chart angle inverts the model circle
    const PeriodicOrbit model = standard_circle_orbit(2, 16, 1.0, 1);
    for (double t : {0.0, 0.2, 0.49, 0.51, 0.93}) {
        const auto pt = model.eval(t);
        CHECK_THAT(chart.Phi(pt.data()), WithinAbs(t, 1e-14));
    }
    const double origin[2] = {0.0, 0.0};
    CHECK_THROWS_AS(chart.Phi(origin), std::domain_error);
}

TEST_CASE("gluing parameter from the base coordinate") {
    // r = 0 closes the neck
    CHECK(a_param(0.0, 3.0, -1.0, 2.0, 0.25).is_zero());

    // matching constants and unit period reproduce the base coordinate
    const GluingParameter unit = a_param(0.2, 0.7, 0.7, 1.0, 0.125);
    CHECK_THAT(unit.modulus, WithinRel(0.2, 1e-14));
    CHECK(unit.R == 145.69487727411754);
    CHECK(unit.theta == 0.125);

    // halved by the period
    const GluingParameter halved = a_param(0.2, 0.7, 0.7, 2.0, 0.0);
    CHECK(halved.R == 72.84743863705877);
    CHECK_THAT(halved.modulus, WithinAbs(0.23121372595911022, 1e-15));

    // constants shift the glued length
    const GluingParameter shifted = a_param(0.2, 0.25, 0.75, 2.0, 0.0);
    CHECK_THAT(shifted.R, WithinRel((phi(0.2) + 0.5) / 2.0, 1e-15));

    // domain: the glued length must be positive and the modulus below 1/4
    CHECK_THROWS_AS(a_param(0.2, phi(0.2) + 1.0, 0.0, 1.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(a_param(0.3, 0.0, 0.0, 1.0, 0.0), std::domain_error);
    CHECK_NOTHROW(a_param(0.3, 0.0, 0.0, 1.0, 0.0, false));
    CHECK_THROWS_AS(a_param(-0.1, 0.0, 0.0, 1.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(a_param(1.0, 0.0, 0.0, 1.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(a_param(0.2, 0.0, 0.0, -1.0, 0.0), std::invalid_argument);
    // base coordinates below the profile floor overflow the profile
    CHECK_THROWS_AS(a_param(0.01, 0.0, 0.0, 1.0, 0.0), std::range_error);
}

TEST_CASE("glued orbit family is seamless for pure standard maps") {
    const int nt = 20;
    const PeriodicOrbit orb = standard_circle_orbit(2, 16, 2.0, 1);
    const double r = 0.2, cx = 0.3, theta_x = 0.15, theta_y = 0.25;
    const StandardMap q(cx, cx, theta_x, theta_y, orb);
    const double twist = q.twist();  // 0.6, on the t-grid
    const GluingParameter a = a_param(r, q.cx, q.cy, orb.T, twist);
    const int Ns = 292;
    const int ns = Ns + 1;

    OrbitElement elem = make_boundary_element(
        r, q, zero_half(+1, 3, ns, nt, a.R), zero_half(-1, 3, ns, nt, a.R));
    CHECK(element_in_domain(elem));

    const OrbitElement glued = bar_oplus(elem);
    REQUIRE_FALSE(glued.is_boundary());
    const FiniteCylinderField& w = glued.interior().w;
    CHECK(w.ns == ns);
    CHECK(w.param == a);

    double worst0 = 0.0, worst_orbit = 0.0;
    std::vector<double> ref(2);
    for (int i = 0; i < ns; ++i) {
        const double s = w.s_at(i);
        for (int j = 0; j < nt; ++j) {
            const double t = static_cast<double>(j) / nt;
            worst0 = std::max(worst0, std::abs(w.at(i, j, 0) - (orb.T * s + cx)));
            orb.eval(wrap01(orb.k * (t + theta_x)), ref.data());
            worst_orbit = std::max(worst_orbit, std::abs(w.at(i, j, 1) - ref[0]));
            worst_orbit = std::max(worst_orbit, std::abs(w.at(i, j, 2) - ref[1]));
        }
    }
    CHECK(worst0 <= 1e-10);
    CHECK(worst_orbit <= 1e-10);

    // r = 0 and interior elements pass through unchanged
    OrbitElement closed = elem;
    closed.r = 0.0;
    const OrbitElement same = bar_oplus(closed);
    CHECK(same.is_boundary());
    CHECK(same.r == 0.0);
    const OrbitElement again = bar_oplus(glued);
    CHECK(max_field_diff(again.interior().w, w) == 0.0);

    // translating all constants commutes with gluing
    const OrbitElement shifted = bar_oplus(r_shift(elem, 0.9));
    double worst_shift = 0.0;
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < nt; ++j)
            worst_shift = std::max(worst_shift,
                                   std::abs(shifted.interior().w.at(i, j, 0) - (w.at(i, j, 0) + 0.9)));
    CHECK(worst_shift <= 1e-13);
}

TEST_CASE("coretraction H splits a glued cylinder and regluing restores it") {
    const int nt = 20;
    const PeriodicOrbit orb = standard_circle_orbit(2, 16, 2.0, 1);
    const double r = 0.2, cx = 0.3, theta_x = 0.15, theta_y = 0.25;
    const StandardMap q(cx, cx, theta_x, theta_y, orb);
    const double twist = q.twist();
    const GluingParameter a = a_param(r, q.cx, q.cy, orb.T, twist);
    const int ns = 293;

    // a glued cylinder with genuine decaying perturbations on both halves
    auto hx = make_half(+1, 3, ns, nt, a.R, [](double s, double t, int k) {
        return 0.3 * std::exp(-0.8 * s) * std::cos(kTwoPi * t + 0.7 * k);
    });
    auto hy = make_half(-1, 3, ns, nt, a.R, [](double s, double t, int k) {
        return 0.25 * std::exp(-0.8 * s) * std::sin(kTwoPi * t + 0.3 * k);
    });
    const OrbitElement elem = make_boundary_element(r, q, std::move(hx), std::move(hy));
    const FiniteCylinderField w = bar_oplus(elem).interior().w;

    const OrbitElement split = coretraction_H(r, w, orb);
    REQUIRE(split.is_boundary());
    const BoundaryBody& b = split.boundary();
    CHECK(b.q.cx == 0.0);
    CHECK(b.q.theta_x == 0.0);
    CHECK_THAT(b.q.cy, WithinRel(orb.T * a.R - phi(r), 1e-14));
    CHECK_THAT(b.q.theta_y, WithinAbs(wrap01(-twist), 1e-14));
    for (double ck : b.hx.c) CHECK(ck == 0.0);

    const FiniteCylinderField back = bar_oplus(split).interior().w;
    CHECK(max_field_diff(back, w) <= 1e-11);

    CHECK_THROWS_AS(coretraction_H(0.0, w, orb), std::domain_error);
}

TEST_CASE("averaging map reads the standard map back off the gluing") {
    const int nt = 16;
    const PeriodicOrbit orb = standard_circle_orbit(2, 16, 2.0, 2);
    const AveragingChart chart;
    const double r = 0.2, cx = 0.4, dc = 0.5, theta_x = 0.3, twist = 0.25;
    const StandardMap q(cx, cx + dc, theta_x, wrap01(-twist - theta_x), orb);
    REQUIRE_THAT(q.twist(), WithinAbs(twist, 1e-14));
    const GluingParameter a = a_param(r, q.cx, q.cy, orb.T, twist);
    const int Ns = 300, ns = Ns + 1;

    const OrbitElement elem = make_boundary_element(
        r, q, zero_half(+1, 3, ns, nt, a.R), zero_half(-1, 3, ns, nt, a.R));
    const FiniteCylinderField w = bar_oplus(elem).interior().w;

    const StandardMap p = averaging_A_Phi(r, w, orb, chart);
    CHECK_THAT(p.cx, WithinAbs(q.cx, 1e-11));
    CHECK_THAT(p.cy, WithinAbs(q.cy, 1e-11));
    CHECK(maps_match_mod_k(p, q, 1e-10));

    // the same map through the element overload
    const StandardMap p2 = averaging_A_Phi(elem, orb, chart);
    CHECK(maps_match_mod_k(p2, q, 1e-10));

    // r = 0 passes the stored map through
    OrbitElement closed = elem;
    closed.r = 0.0;
    const StandardMap p0 = averaging_A_Phi(closed, orb, chart);
    CHECK(p0.cx == q.cx);
    CHECK(p0.theta_x == q.theta_x);

    // a middle annulus outside the chart is rejected
    auto fat = make_half(+1, 3, ns, nt, a.R, [&](double s, double, int k) {
        return k == 1 ? 0.8 * std::exp(-0.01 * std::abs(s - a.R / 2)) : 0.0;
    });
    const OrbitElement bulged =
        make_boundary_element(r, q, std::move(fat), zero_half(-1, 3, ns, nt, a.R));
    const FiniteCylinderField wb = bar_oplus(bulged).interior().w;
    CHECK_THROWS_AS(averaging_A_Phi(r, wb, orb, chart), std::domain_error);

    // winding different from the covering number is rejected
    const PeriodicOrbit simple = standard_circle_orbit(2, 16, 2.0, 1);
    const StandardMap q1(cx, cx + dc, theta_x, wrap01(-twist - theta_x), simple);
    const OrbitElement elem1 = make_boundary_element(
        r, q1, zero_half(+1, 3, ns, nt, a.R), zero_half(-1, 3, ns, nt, a.R));
    const FiniteCylinderField w1 = bar_oplus(elem1).interior().w;
    CHECK_THROWS_AS(averaging_A_Phi(r, w1, orb, chart), std::domain_error);
}

TEST_CASE("coretraction K restores the cylinder and is reglue-invariant") {
    const int nt = 16;
    const PeriodicOrbit orb = standard_circle_orbit(2, 16, 2.0, 2);
    const AveragingChart chart;
    const double r = 0.2, cx = 0.4, dc = 0.5, theta_x = 0.3, twist = 0.25;
    const StandardMap q(cx, cx + dc, theta_x, wrap01(-twist - theta_x), orb);
    const GluingParameter a = a_param(r, q.cx, q.cy, orb.T, twist);
    const int ns = 301;

    auto hx = make_half(+1, 3, ns, nt, a.R, [](double s, double t, int k) {
        return 0.1 * std::exp(-0.8 * s) * std::cos(kTwoPi * t + 0.4 * k);
    });
    auto hy = make_half(-1, 3, ns, nt, a.R, [](double s, double t, int k) {
        return 0.08 * std::exp(-0.8 * s) * std::sin(kTwoPi * t - 0.2 * k);
    });
    const OrbitElement elem = make_boundary_element(r, q, std::move(hx), std::move(hy));
    const FiniteCylinderField w = bar_oplus(elem).interior().w;

    const OrbitElement k1 = coretraction_K(r, w, orb, chart);
    REQUIRE(k1.is_boundary());
    const FiniteCylinderField back = bar_oplus(k1).interior().w;
    CHECK(max_field_diff(back, w) <= 1e-10);

    // K after bar_oplus after K changes nothing
    const OrbitElement k2 = coretraction_K(r, back, orb, chart);
    CHECK(maps_match_mod_k(k2.boundary().q, k1.boundary().q, 1e-10));
    CHECK(max_field_diff(k2.boundary().hx, k1.boundary().hx) <= 1e-10);
    CHECK(max_field_diff(k2.boundary().hy, k1.boundary().hy) <= 1e-10);

    // element overload with r = 0 is the identity
    OrbitElement closed = elem;
    closed.r = 0.0;
    const OrbitElement same = coretraction_K(closed, orb, chart);
    CHECK(same.is_boundary());
    CHECK(same.boundary().q.cx == q.cx);
}

TEST_CASE("comparison map vanishes at the node and decays toward it") {
    const int nt = 16;
    const PeriodicOrbit orb = standard_circle_orbit(2, 16, 1.0, 1);
    const AveragingChart chart;
    const WeightSequence slow{{0.005, 0.0075, 0.01}};
    const double cx = 0.25, twist = 0.25;
    const StandardMap q(cx, cx, 0.1, wrap01(-twist - 0.1), orb);

    // fixed perturbation family evaluated at shrinking base coordinates
    auto build = [&](double r) {
        const GluingParameter a = a_param(r, q.cx, q.cy, orb.T, twist);
        const int ns = 513;
        auto hx = make_half(+1, 3, ns, nt, a.R, [](double s, double t, int k) {
            if (k == 0) return 0.15 * std::exp(-0.02 * s) * (1.0 + 0.5 * std::sin(kTwoPi * t));
            if (k == 1) return 0.2 * std::exp(-0.02 * s) * std::cos(kTwoPi * t);
            return 0.0;
        }, slow);
        auto hy = make_half(-1, 3, ns, nt, a.R, [](double s, double t, int k) {
            if (k == 0) return 0.12 * std::exp(-0.02 * s) * (1.0 - 0.4 * std::cos(kTwoPi * t));
            if (k == 1) return 0.15 * std::exp(-0.02 * s) * std::sin(kTwoPi * t);
            return 0.0;
        }, slow);
        return make_boundary_element(r, q, std::move(hx), std::move(hy));
    };

    std::vector<double> norms_x, norms_y;
    for (double r : {0.24, 0.2, 0.16, 0.12}) {
        const ComparisonPair d = compare_D(build(r), chart);
        norms_x.push_back(weighted_norm(d.kx, 0));
        norms_y.push_back(weighted_norm(d.ky, 0));
    }
    CAPTURE(norms_x, norms_y);
    for (std::size_t i = 1; i < norms_x.size(); ++i) {
        CHECK(norms_x[i] < norms_x[i - 1]);
        CHECK(norms_y[i] < norms_y[i - 1]);
    }
    CHECK(norms_x.front() > 1e-3);  // the family starts with a visible defect

    // at the node the comparison vanishes identically
    OrbitElement closed = build(0.24);
    closed.r = 0.0;
    const ComparisonPair d0 = compare_D(closed, chart);
    for (double v : d0.kx.data) CHECK(v == 0.0);
    for (double v : d0.ky.data) CHECK(v == 0.0);
}

TEST_CASE("asymptotic class fit recovers constants, phases, and residuals") {
    const AveragingChart chart;
    const WeightSequence weights{};  // 0.1, 0.5, 1.0
    const int nt = 32, ns = 401;
    const double S = 20.0;

    // a pure standard map with zero constant fits with residual zero
    {
        const PeriodicOrbit orb = standard_circle_orbit(2, 16, 1.5, 2);
        const StandardMap q(0.0, 0.0, 0.0, 0.0, orb);
        auto f = make_half(+1, 3, ns, nt, S, [&](double s, double t, int) { return 0.0; });
        for (int i = 0; i < ns; ++i)
            for (int j = 0; j < nt; ++j) {
                const auto v = q.eval(Side::X, f.s_at(i), static_cast<double>(j) / nt);
                for (int c = 0; c < 3; ++c) f.at(i, j, c) = v[c];
            }
        const OrbitClassFit fit = orbit_class_check(f, orb, chart, weights);
        CHECK_THAT(fit.c, WithinAbs(0.0, 1e-13));
        CHECK_THAT(circle_dist(fit.d, wrap01(0.5 * orb.k)), WithinAbs(0.0, 1e-13));
        REQUIRE(fit.residual_levels.size() == 3);
        for (double nrm : fit.residual_levels) CHECK(nrm <= 1e-12);
    }

    // nonzero constant and decoration are read off exactly; residual stays flat
    const PeriodicOrbit orb = standard_circle_orbit(2, 16, 1.5, 2);
    const double cx = 0.8, theta_x = 0.15;
    const StandardMap q(cx, 0.0, theta_x, 0.0, orb);
    auto sample_map = [&](auto extra) {
        auto f = make_half(+1, 3, ns, nt, S, [](double, double, int) { return 0.0; });
        for (int i = 0; i < ns; ++i)
            for (int j = 0; j < nt; ++j) {
                const double t = static_cast<double>(j) / nt;
                const auto v = q.eval(Side::X, f.s_at(i), t);
                for (int c = 0; c < 3; ++c) f.at(i, j, c) = v[c] + extra(f.s_at(i), t, c);
            }
        return f;
    };
    {
        const auto f = sample_map([](double, double, int) { return 0.0; });
        const OrbitClassFit fit = orbit_class_check(f, orb, chart, weights);
        CHECK_THAT(fit.c, WithinAbs(cx, 1e-12));
        CHECK_THAT(circle_dist(fit.d, wrap01(orb.k * theta_x + 0.5 * orb.k)),
                   WithinAbs(0.0, 1e-12));
        CHECK(fit.residual_levels[0] <= 1e-10);
    }

    // exponential noise produces the closed-form weighted residual
    {
        const double amp = 0.05;
        const auto f = sample_map([&](double s, double t, int c) {
            return c == 0 ? amp * std::exp(-s) * std::sin(kTwoPi * t) : 0.0;
        });
        const OrbitClassFit fit = orbit_class_check(f, orb, chart, weights);
        const double delta0 = weights.at(0);
        const double expected =
            amp * std::sqrt(0.5 * (1.0 - std::exp(-2.0 * (1.0 - delta0) * S)) /
                            (2.0 * (1.0 - delta0)));
        CHECK_THAT(fit.residual_levels[0], WithinRel(expected, 0.05));
    }

    // residual growing toward the far end is rejected as divergent
    {
        const auto f = sample_map([](double s, double t, int c) {
            return c == 0 ? 0.01 * std::exp(0.6 * (s - 20.0)) * std::sin(kTwoPi * t) : 0.0;
        });
        CHECK_THROWS_AS(orbit_class_check(f, orb, chart, weights), std::runtime_error);
    }

    // directional limits match only when both the constant and the phase agree
    {
        const auto fx = sample_map([](double, double, int) { return 0.0; });
        const OrbitClassFit fitx = orbit_class_check(fx, orb, chart, weights);
        OrbitClassFit fity = fitx;
        CHECK(directionally_matching(fitx, fity, 1e-9));
        fity.d = wrap01(fity.d + 0.3);
        CHECK_FALSE(directionally_matching(fitx, fity, 1e-2));
        fity = fitx;
        fity.c += 0.05;
        CHECK_FALSE(directionally_matching(fitx, fity, 1e-2));
    }

    // window must leave room for the fit
    {
        const auto f = sample_map([](double, double, int) { return 0.0; });
        CHECK_THROWS_AS(orbit_class_check(f, orb, chart, weights, 40.0), std::invalid_argument);
    }
}

TEST_CASE("element validation guards formats and the domain") {
    const PeriodicOrbit orb = standard_circle_orbit(2, 16, 1.0, 1);
    const StandardMap q(0.0, 0.0, 0.0, 0.0, orb);

    CHECK_THROWS_AS(make_boundary_element(-0.1, q, zero_half(+1, 3, 9, 8, 6.0),
                                          zero_half(-1, 3, 9, 8, 6.0)),
                    std::domain_error);
    // wrong half-cylinder sign
    CHECK_THROWS_AS(make_boundary_element(0.1, q, zero_half(-1, 3, 9, 8, 6.0),
                                          zero_half(-1, 3, 9, 8, 6.0)),
                    std::invalid_argument);
    // component mismatch with R x R^N
    CHECK_THROWS_AS(make_boundary_element(0.1, q, zero_half(+1, 2, 9, 8, 6.0),
                                          zero_half(-1, 3, 9, 8, 6.0)),
                    std::invalid_argument);
    // perturbations must carry zero constants
    auto bad = zero_half(+1, 3, 9, 8, 6.0);
    bad.c[0] = 0.5;
    CHECK_THROWS_AS(make_boundary_element(0.1, q, bad, zero_half(-1, 3, 9, 8, 6.0)),
                    std::invalid_argument);
    // interior format needs an open neck
    const FiniteCylinderField w(GluingParameter::from_R(9.25, 0.125), 3, 11, 8,
                                std::vector<double>(11 * 8 * 3, 0.0));
    CHECK_THROWS_AS(make_interior_element(0.0, w), std::domain_error);
    CHECK_NOTHROW(make_interior_element(0.3, w));

    // domain membership mirrors the gluing parameter
    const StandardMap ok(0.7, 0.7, 0.0, 0.0, orb);
    CHECK(element_in_domain(make_boundary_element(0.2, ok, zero_half(+1, 3, 9, 8, 6.0),
                                                  zero_half(-1, 3, 9, 8, 6.0))));
    const StandardMap pinched(phi(0.2) + 1.0, 0.0, 0.0, 0.0, orb);
    CHECK_FALSE(element_in_domain(make_boundary_element(0.2, pinched, zero_half(+1, 3, 9, 8, 6.0),
                                                        zero_half(-1, 3, 9, 8, 6.0))));
    const StandardMap wide(0.0, 0.0, 0.0, 0.0, orb);
    const OrbitElement probe = make_boundary_element(0.3, wide, zero_half(+1, 3, 9, 8, 6.0),
                                                     zero_half(-1, 3, 9, 8, 6.0));
    CHECK_FALSE(element_in_domain(probe));
    CHECK(element_in_domain(probe, false));
    OrbitElement node = probe;
    node.r = 0.0;
    CHECK(element_in_domain(node));
}

TEST_CASE("orbit and element files round trip byte for byte") {
    // two-harmonic loop
    const int nt = 32;
    std::vector<double> smp(static_cast<std::size_t>(nt) * 3);
    for (int j = 0; j < nt; ++j) {
        const double t = static_cast<double>(j) / nt;
        smp[j * 3 + 0] = std::cos(kTwoPi * t) + 0.2 * std::cos(2.0 * kTwoPi * t);
        smp[j * 3 + 1] = std::sin(kTwoPi * t) - 0.1 * std::sin(2.0 * kTwoPi * t);
        smp[j * 3 + 2] = 0.3 * std::cos(kTwoPi * t);
    }
    const PeriodicOrbit orbit(3, nt, 2.0, 2, smp);
    std::ostringstream os1;
    write_orbit(os1, orbit);
    std::istringstream is1(os1.str());
    const PeriodicOrbit back = read_orbit(is1);
    std::ostringstream os2;
    write_orbit(os2, back);
    CHECK(os1.str() == os2.str());
    CHECK(back.T == orbit.T);
    CHECK(back.k == orbit.k);
    for (std::size_t i = 0; i < smp.size(); ++i) CHECK(back.samples[i] == smp[i]);

    // boundary element with decorations and perturbations
    const StandardMap q(0.4, -0.9, 0.3, 0.45, orbit);
    auto hx = make_half(+1, 4, 9, 8, 6.0, [](double s, double t, int k) {
        return std::exp(-s) * std::cos(kTwoPi * t + k);
    });
    auto hy = make_half(-1, 4, 9, 8, 6.0, [](double s, double t, int k) {
        return 0.5 * std::exp(-s) * std::sin(kTwoPi * t - k);
    });
    const OrbitElement elem = make_boundary_element(0.17, q, std::move(hx), std::move(hy));
    std::ostringstream eo1;
    write_orbit_element(eo1, elem);
    std::istringstream ei1(eo1.str());
    const OrbitElement eback = read_orbit_element(ei1, orbit);
    std::ostringstream eo2;
    write_orbit_element(eo2, eback);
    CHECK(eo1.str() == eo2.str());
    CHECK(eback.r == elem.r);
    CHECK(eback.boundary().q.cy == q.cy);

    // interior element
    const FiniteCylinderField w(GluingParameter::from_R(9.25, 0.125), 2, 11, 8,
                                [] {
                                    std::vector<double> v(11 * 8 * 2);
                                    std::mt19937 rng(20260815);
                                    std::uniform_real_distribution<double> u(-1.0, 1.0);
                                    for (double& x : v) x = u(rng);
                                    return v;
                                }());
    const OrbitElement inner = make_interior_element(0.21, w);
    std::ostringstream io1;
    write_orbit_element(io1, inner);
    std::istringstream ii1(io1.str());
    const OrbitElement iback = read_orbit_element(ii1, orbit);
    std::ostringstream io2;
    write_orbit_element(io2, iback);
    CHECK(io1.str() == io2.str());

    // malformed headers are rejected
    std::istringstream bad1("SCWRONG r=0 kind=interior\n");
    CHECK_THROWS_AS(read_orbit_element(bad1, orbit), std::runtime_error);
    std::istringstream bad2("SCORBELEM r=0.1 kind=mystery\n");
    CHECK_THROWS_AS(read_orbit_element(bad2, orbit), std::runtime_error);
    std::istringstream bad3("SCORBIT N=2 Nt=8 T=1 k=1\n0 1 0\n");
    CHECK_THROWS_AS(read_orbit(bad3), std::runtime_error);
}
