#pragma once

// Gluing and anti-gluing on cylinder grids: the plus/anti gluing pair, the
// retractions that split a glued field back into tapered halves, the exact
// pointwise unglue inverse, and the taper-map family used by the smoothness
// probes. All identity-grade ops run in exact mode (neck length and twist on
// the grid); interpolation mode exists for parameter sweeps.

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "scglue/fields.hpp"
#include "scglue/profile.hpp"

namespace scglue {

inline constexpr double kMatchTol = 1e-12;
inline constexpr double kTaperSupport = 4.0;  // shape functions settle beyond |x| = 4

enum class GridMode { Exact, Interpolate };

struct GluedPair {
    HalfCylinderField ux;  // sign +
    HalfCylinderField uy;  // sign -
};

// image of the plus gluing: a finite cylinder for a nonzero parameter, the
// untouched pair over the zero parameter
using GluedValue = std::variant<FiniteCylinderField, GluedPair>;

struct GluedPairDecomposition {
    GluingParameter param;
    HalfCylinderField eta_x;
    HalfCylinderField eta_y;
};

struct EmptyAntiGlued {};  // the one-point fiber of the anti-gluing over a = 0
using AntiGluedValue = std::variant<EmptyAntiGlued, AntiGluedField>;

struct UngluedPair {
    HalfCylinderField hx;
    HalfCylinderField hy;
    double det_min = 1.0;       // smallest 2x2 determinant met in the solve
    std::vector<double> av;     // recovered matched average (zero for the hat version)
};

namespace detail {

inline long snap_index(double pos, const char* what) {
    const long i = std::llround(pos);
    if (std::abs(pos - i) > kGridSnapTol * (1.0 + std::abs(pos)))
        throw std::invalid_argument(std::string(what) + " is off the grid");
    return i;
}

inline void check_pair_grids(const HalfCylinderField& ux, const HalfCylinderField& uy) {
    if (ux.sign != +1 || uy.sign != -1)
        throw std::invalid_argument("gluing: expected a (+,-) pair of half cylinders");
    if (ux.ncomp != uy.ncomp || ux.nt != uy.nt)
        throw std::invalid_argument("gluing: half cylinders disagree on N or Nt");
    if (std::abs(ux.ds() - uy.ds()) > 1e-12 * ux.ds())
        throw std::invalid_argument("gluing: half cylinders disagree on the s-step");
}

inline void check_matching_constants(const HalfCylinderField& ux, const HalfCylinderField& uy) {
    for (int k = 0; k < ux.ncomp; ++k)
        if (std::abs(ux.c[k] - uy.c[k]) > kMatchTol)
            throw std::invalid_argument("gluing: asymptotic constants do not match");
}

inline void check_zero_constants(const HalfCylinderField& h, const char* who) {
    for (double ck : h.c)
        if (std::abs(ck) > 1e-13)
            throw std::invalid_argument(std::string(who) +
                                        ": asymptotic constants must vanish");
}

// interpolated total value (constant + decaying part) at signed coordinate s;
// the decaying part is taken as zero beyond the stored extent
inline double value_interp(const HalfCylinderField& f, double s, double t, int k) {
    const double u = std::abs(s) / f.ds();
    if ((f.sign > 0 && s < -kGridSnapTol) || (f.sign < 0 && s > kGridSnapTol))
        throw std::invalid_argument("value_interp: coordinate on the wrong side");
    auto loop_at = [&](int row, double tt) {
        const double pos = tt * f.nt;
        const double fl = std::floor(pos);
        const int j0 = static_cast<int>(fl);
        const double frac = pos - fl;
        return catmull_rom(f.at(row, j0 - 1, k), f.at(row, j0, k), f.at(row, j0 + 1, k),
                           f.at(row, j0 + 2, k), frac);
    };
    double r = 0.0;
    if (u <= f.ns - 1) {
        const int i0 = std::min(static_cast<int>(std::floor(u)), f.ns - 2);
        const double frac = u - i0;
        r = (1.0 - frac) * loop_at(i0, t) + frac * loop_at(i0 + 1, t);
    }
    return f.c[k] + r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Plus gluing: w(s,t) = beta(s-R/2) ux(s,t) + beta(R/2-s) uy(s-R, t-theta).

inline GluedValue oplus(const GluingParameter& a, const HalfCylinderField& ux,
                        const HalfCylinderField& uy,
                        CutoffModel model = CutoffModel::ExpQuotient,
                        GridMode mode = GridMode::Exact) {
    detail::check_pair_grids(ux, uy);
    detail::check_matching_constants(ux, uy);
    if (a.is_zero()) return GluedPair{ux, uy};

    const double R = a.R;
    const double ds = ux.ds();
    const int nt = ux.nt;
    const int nc = ux.ncomp;
    long nw1;   // rows minus one of the glued grid
    long m = 0; // aligned twist in t-steps (exact mode)
    if (mode == GridMode::Exact) {
        nw1 = detail::snap_index(R / ds, "oplus: R/ds");
        m = detail::snap_index(a.theta * nt, "oplus: theta*Nt");
    } else {
        nw1 = std::lround(R / ds);
    }
    const int nsw = static_cast<int>(nw1) + 1;
    const double sstep = R / nw1;  // the output grid step; equals ds in exact mode
    std::vector<double> data(static_cast<std::size_t>(nsw) * nt * nc, 0.0);
    for (int i = 0; i < nsw; ++i) {
        const double s = i * sstep;
        const double bx = beta(s - R / 2.0, model);
        const double by = beta(R / 2.0 - s, model);
        for (int j = 0; j < nt; ++j)
            for (int k = 0; k < nc; ++k) {
                double val = 0.0;
                if (bx != 0.0) {
                    if (mode == GridMode::Exact) {
                        if (i >= ux.ns)
                            throw std::invalid_argument("oplus: ux grid too short for R");
                        val += bx * ux.value(i, j, k);
                    } else {
                        val += bx * detail::value_interp(ux, s, ux.t_at(j), k);
                    }
                }
                if (by != 0.0) {
                    if (mode == GridMode::Exact) {
                        const long iy = nw1 - i;
                        if (iy >= uy.ns)
                            throw std::invalid_argument("oplus: uy grid too short for R");
                        val += by * uy.value(static_cast<int>(iy),
                                             j - static_cast<int>(m), k);
                    } else {
                        val += by * detail::value_interp(uy, std::min(s - R, 0.0),
                                                         ux.t_at(j) - a.theta, k);
                    }
                }
                data[(static_cast<std::size_t>(i) * nt + j) * nc + k] = val;
            }
    }
    return FiniteCylinderField(a, nc, nsw, nt, std::move(data));
}

inline FiniteCylinderField oplus_field(const GluingParameter& a, const HalfCylinderField& ux,
                                       const HalfCylinderField& uy,
                                       CutoffModel model = CutoffModel::ExpQuotient,
                                       GridMode mode = GridMode::Interpolate) {
    auto w = oplus(a, ux, uy, model, mode);
    if (!std::holds_alternative<FiniteCylinderField>(w))
        throw std::invalid_argument("oplus_field: zero gluing parameter has no cylinder image");
    return std::get<FiniteCylinderField>(std::move(w));
}

// ---------------------------------------------------------------------------
// Retraction f: taper the glued field toward its middle average on each half.
// eta^x(s,t) = beta(s-R/2-2) w(s,t) + (1-beta(s-R/2-2)) av(w), and mirrored.

namespace detail {

inline GluedPairDecomposition split_tapered(const FiniteCylinderField& w,
                                            const std::vector<double>& av, CutoffModel model,
                                            bool warn_tail) {
    const double R = w.R();
    const double ds = w.ds();
    const int nt = w.nt, nc = w.ncomp, ns = w.ns;
    const long m = snap_index(w.param.theta * nt, "split: theta*Nt");
    std::vector<double> dx(static_cast<std::size_t>(ns) * nt * nc);
    std::vector<double> dy(static_cast<std::size_t>(ns) * nt * nc);
    for (int i = 0; i < ns; ++i) {
        const double s = i * ds;
        // on row i both halves see the same taper: the y side at s' = -i ds
        // has argument -s' - R/2 - 2 = s - R/2 - 2
        const double b = beta(s - R / 2.0 - 2.0, model);
        for (int j = 0; j < nt; ++j)
            for (int k = 0; k < nc; ++k) {
                // x side: rows aligned with w
                dx[(static_cast<std::size_t>(i) * nt + j) * nc + k] =
                    b == 0.0 ? 0.0 : b * (w.at(i, j, k) - av[k]);
                // y side: s' = -i ds maps to w row ns-1-i, t = t' + theta
                dy[(static_cast<std::size_t>(i) * nt + j) * nc + k] =
                    b == 0.0 ? 0.0
                             : b * (w.at(ns - 1 - i, j + static_cast<int>(m), k) - av[k]);
            }
    }
    GluedPairDecomposition out{
        w.param,
        HalfCylinderField(+1, nc, ns, nt, R, av, std::move(dx), WeightSequence{}, warn_tail),
        HalfCylinderField(-1, nc, ns, nt, R, av, std::move(dy), WeightSequence{}, warn_tail)};
    return out;
}

}  // namespace detail

inline GluedPairDecomposition split_f(const GluedValue& wv,
                                      CutoffModel model = CutoffModel::ExpQuotient) {
    if (std::holds_alternative<GluedPair>(wv)) {
        const auto& p = std::get<GluedPair>(wv);
        detail::check_pair_grids(p.ux, p.uy);
        detail::check_matching_constants(p.ux, p.uy);
        return GluedPairDecomposition{GluingParameter::zero(), p.ux, p.uy};
    }
    const auto& w = std::get<FiniteCylinderField>(wv);
    return detail::split_tapered(w, middle_loop_average(w), model, /*warn_tail=*/false);
}

inline GluedValue oplus_hat(const GluingParameter& a, const HalfCylinderField& hx,
                            const HalfCylinderField& hy,
                            CutoffModel model = CutoffModel::ExpQuotient,
                            GridMode mode = GridMode::Exact) {
    detail::check_zero_constants(hx, "oplus_hat");
    detail::check_zero_constants(hy, "oplus_hat");
    return oplus(a, hx, hy, model, mode);
}

inline GluedPairDecomposition f_hat(const GluedValue& wv,
                                    CutoffModel model = CutoffModel::ExpQuotient) {
    if (std::holds_alternative<GluedPair>(wv)) {
        const auto& p = std::get<GluedPair>(wv);
        detail::check_pair_grids(p.ux, p.uy);
        detail::check_zero_constants(p.ux, "f_hat");
        detail::check_zero_constants(p.uy, "f_hat");
        return GluedPairDecomposition{GluingParameter::zero(), p.ux, p.uy};
    }
    const auto& w = std::get<FiniteCylinderField>(wv);
    return detail::split_tapered(w, std::vector<double>(w.ncomp, 0.0), model,
                                 /*warn_tail=*/false);
}

// ---------------------------------------------------------------------------
// Anti-gluing: v(s,t) = -(1-beta(s-R/2)) (ux(s,t)-av) + beta(s-R/2) (uy(s-R,t-theta)-av)
// on [-S_pad, R+S_pad], with av the matched half-neck average.

namespace detail {

inline AntiGluedField ominus_core(const GluingParameter& a, const HalfCylinderField& ux,
                                  const HalfCylinderField& uy, const std::vector<double>& av,
                                  CutoffModel model) {
    const double R = a.R;
    const double ds = ux.ds();
    const int nt = ux.nt, nc = ux.ncomp;
    const long nw1 = snap_index(R / ds, "ominus: R/ds");
    const long pad = snap_index(kAntiPad / ds, "ominus: S_pad/ds");
    const long m = snap_index(a.theta * nt, "ominus: theta*Nt");
    const int nsv = static_cast<int>(nw1 + 2 * pad) + 1;
    std::vector<double> data(static_cast<std::size_t>(nsv) * nt * nc, 0.0);
    for (int i = 0; i < nsv; ++i) {
        const double s = -kAntiPad + i * ds;
        const double bx = beta(s - R / 2.0, model);
        const double cx = 1.0 - bx;
        const long irow = i - pad;          // ux row when s >= 0
        const long iy = nw1 - irow;         // uy row index |s - R|/ds when s <= R
        for (int j = 0; j < nt; ++j)
            for (int k = 0; k < nc; ++k) {
                double val = 0.0;
                if (cx != 0.0) {
                    if (irow < 0 || irow >= ux.ns)
                        throw std::invalid_argument("ominus: ux grid too short for R+S_pad");
                    val -= cx * (ux.value(static_cast<int>(irow), j, k) - av[k]);
                }
                if (bx != 0.0) {
                    if (iy < 0 || iy >= uy.ns)
                        throw std::invalid_argument("ominus: uy grid too short for R+S_pad");
                    val += bx * (uy.value(static_cast<int>(iy), j - static_cast<int>(m), k) -
                                 av[k]);
                }
                data[(static_cast<std::size_t>(i) * nt + j) * nc + k] = val;
            }
    }
    std::vector<double> canti(nc);
    for (int k = 0; k < nc; ++k) canti[k] = 0.5 * (ux.c[k] + uy.c[k]) - av[k];
    return AntiGluedField(a, nc, nsv, nt, std::move(canti), std::move(data));
}

}  // namespace detail

inline AntiGluedValue ominus(const GluingParameter& a, const HalfCylinderField& ux,
                             const HalfCylinderField& uy,
                             CutoffModel model = CutoffModel::ExpQuotient) {
    detail::check_pair_grids(ux, uy);
    detail::check_matching_constants(ux, uy);
    if (a.is_zero()) return EmptyAntiGlued{};
    auto avx = a_loop_average(ux, a);
    auto avy = a_loop_average(uy, a);
    std::vector<double> av(ux.ncomp);
    for (int k = 0; k < ux.ncomp; ++k) av[k] = 0.5 * (avx[k] + avy[k]);
    return detail::ominus_core(a, ux, uy, av, model);
}

inline AntiGluedValue ominus_hat(const GluingParameter& a, const HalfCylinderField& hx,
                                 const HalfCylinderField& hy,
                                 CutoffModel model = CutoffModel::ExpQuotient) {
    detail::check_pair_grids(hx, hy);
    detail::check_zero_constants(hx, "ominus_hat");
    detail::check_zero_constants(hy, "ominus_hat");
    if (a.is_zero()) return EmptyAntiGlued{};
    return detail::ominus_core(a, hx, hy, std::vector<double>(hx.ncomp, 0.0), model);
}

// ---------------------------------------------------------------------------
// Pointwise unglue: invert (oplus, ominus) row by row. On [0,R] the 2x2 system
//   w =  bx p + by q~        bx = beta(s-R/2), by = beta(R/2-s)
//   v = -(1-bx) p + bx q~
// has determinant bx^2 + by (1-bx) in [1/2, 1]; outside [0,R] one cutoff is
// clamped and the tail comes from v alone.

namespace detail {

inline UngluedPair unglue_core(const FiniteCylinderField& w, const AntiGluedField& v,
                               const GluingParameter& a, const std::vector<double>& av,
                               bool recover_constants, CutoffModel model) {
    if (!(a.R == w.param.R) || std::abs(a.R - v.param.R) > 1e-12 * a.R)
        throw std::invalid_argument("unglue: parameter does not match the fields");
    if (std::abs(a.theta - w.param.theta) > 1e-12 ||
        std::abs(a.theta - v.param.theta) > 1e-12)
        throw std::invalid_argument("unglue: twist does not match the fields");
    if (w.nt != v.nt || w.ncomp != v.ncomp)
        throw std::invalid_argument("unglue: grids disagree on N or Nt");
    const double ds = w.ds();
    if (std::abs(v.ds() - ds) > 1e-12 * ds)
        throw std::invalid_argument("unglue: grids disagree on the s-step");
    const double R = a.R;
    const int nt = w.nt, nc = w.ncomp;
    const long nw1 = w.ns - 1;
    const long pad = snap_index(kAntiPad / ds, "unglue: S_pad/ds");
    const long m = snap_index(a.theta * nt, "unglue: theta*Nt");
    if (v.ns != static_cast<int>(nw1 + 2 * pad) + 1)
        throw std::invalid_argument("unglue: anti-glued grid extent mismatch");
    const int nsh = static_cast<int>(nw1 + pad) + 1;  // rows of each recovered half

    std::vector<double> px(static_cast<std::size_t>(nsh) * nt * nc);
    std::vector<double> qy(static_cast<std::size_t>(nsh) * nt * nc);
    double det_min = 1.0;
    for (int i = 0; i < nsh; ++i) {
        const double s = i * ds;
        const double bx = beta(s - R / 2.0, model);
        const double by = beta(R / 2.0 - s, model);
        const double cx = 1.0 - bx;
        if (i <= nw1) {
            const double det = bx * bx + by * cx;
            det_min = std::min(det, det_min);
            for (int j = 0; j < nt; ++j)
                for (int k = 0; k < nc; ++k) {
                    const double wv = w.at(i, j, k) - av[k];
                    const double vv = v.at(static_cast<int>(i + pad), j, k);
                    px[(static_cast<std::size_t>(i) * nt + j) * nc + k] =
                        (bx * wv - by * vv) / det;
                }
        } else {
            for (int j = 0; j < nt; ++j)
                for (int k = 0; k < nc; ++k)
                    px[(static_cast<std::size_t>(i) * nt + j) * nc + k] =
                        -v.at(static_cast<int>(i + pad), j, k);
        }
        // y side: s' = -i ds, glued row i_w = nw1 - i, t = t' + theta
        const long iw = nw1 - i;
        if (iw >= 0) {
            const double sy = iw * ds;
            const double bx2 = beta(sy - R / 2.0, model);
            const double by2 = beta(R / 2.0 - sy, model);
            const double cx2 = 1.0 - bx2;
            const double det2 = bx2 * bx2 + by2 * cx2;
            for (int j = 0; j < nt; ++j)
                for (int k = 0; k < nc; ++k) {
                    const double wv = w.at(static_cast<int>(iw), j + static_cast<int>(m), k) -
                                      av[k];
                    const double vv =
                        v.at(static_cast<int>(iw + pad), j + static_cast<int>(m), k);
                    qy[(static_cast<std::size_t>(i) * nt + j) * nc + k] =
                        (cx2 * wv + bx2 * vv) / det2;
                }
        } else {
            for (int j = 0; j < nt; ++j)
                for (int k = 0; k < nc; ++k)
                    qy[(static_cast<std::size_t>(i) * nt + j) * nc + k] =
                        v.at(static_cast<int>(iw + pad), j + static_cast<int>(m), k);
        }
    }

    std::vector<double> cxv(nc, 0.0), cyv(nc, 0.0);
    if (recover_constants) {
        // the limits of p and q are read off the far rows and folded into the
        // asymptotic constants so the stored parts decay
        for (int k = 0; k < nc; ++k) {
            double mx = 0.0, my = 0.0;
            for (int j = 0; j < nt; ++j) {
                mx += px[(static_cast<std::size_t>(nsh - 1) * nt + j) * nc + k];
                my += qy[(static_cast<std::size_t>(nsh - 1) * nt + j) * nc + k];
            }
            mx /= nt;
            my /= nt;
            for (int i = 0; i < nsh; ++i)
                for (int j = 0; j < nt; ++j) {
                    px[(static_cast<std::size_t>(i) * nt + j) * nc + k] -= mx;
                    qy[(static_cast<std::size_t>(i) * nt + j) * nc + k] -= my;
                }
            cxv[k] = av[k] + mx;
            cyv[k] = av[k] + my;
        }
    }
    const double smax = nw1 * ds + kAntiPad;
    UngluedPair out{HalfCylinderField(+1, nc, nsh, nt, smax, std::move(cxv), std::move(px),
                                      WeightSequence{}, /*warn_tail=*/false),
                    HalfCylinderField(-1, nc, nsh, nt, smax, std::move(cyv), std::move(qy),
                                      WeightSequence{}, /*warn_tail=*/false),
                    det_min,
                    av};
    return out;
}

}  // namespace detail

inline UngluedPair unglue_pair_hat(const FiniteCylinderField& w, const AntiGluedField& v,
                                   const GluingParameter& a,
                                   CutoffModel model = CutoffModel::ExpQuotient) {
    return detail::unglue_core(w, v, a, std::vector<double>(w.ncomp, 0.0),
                               /*recover_constants=*/false, model);
}

inline UngluedPair unglue_pair(const FiniteCylinderField& w, const AntiGluedField& v,
                               const GluingParameter& a,
                               CutoffModel model = CutoffModel::ExpQuotient) {
    return detail::unglue_core(w, v, a, middle_loop_average(w),
                               /*recover_constants=*/true, model);
}

// ---------------------------------------------------------------------------
// Taper maps: multiply by a shifted shape, optionally after the neck
// coordinate change. Outputs are stored as plain half fields (zero constant).

enum class TaperKind { Gamma1, Gamma2, Gamma3, Gamma4, M3, M4, M5 };

using ShapeFn = std::function<double(double)>;

namespace detail {

inline void check_shape(TaperKind kind, const ShapeFn& f) {
    auto near = [&](double x, double y) { return std::abs(f(x) - y) <= 1e-12; };
    if (kind == TaperKind::M5) {
        if (!near(kTaperSupport, 0.0) || !near(-kTaperSupport, 0.0) ||
            !near(kTaperSupport + 2.0, 0.0) || !near(-kTaperSupport - 2.0, 0.0))
            throw std::invalid_argument("taper_map: shape must be compactly supported");
        return;
    }
    if (!near(kTaperSupport, 0.0) || !near(kTaperSupport + 2.0, 0.0))
        throw std::invalid_argument("taper_map: shape must vanish at +infinity");
    if (std::abs(f(-kTaperSupport) - f(-kTaperSupport - 2.0)) > 1e-12)
        throw std::invalid_argument("taper_map: shape must settle at -infinity");
}

}  // namespace detail

inline HalfCylinderField taper_map(TaperKind kind, const ShapeFn& shape,
                                   const GluingParameter& a, const HalfCylinderField& h) {
    detail::check_shape(kind, shape);
    const int nc = h.ncomp, nt = h.nt, ns = h.ns;
    const double ds = h.ds();
    const bool cross = kind == TaperKind::Gamma3 || kind == TaperKind::Gamma4 ||
                       kind == TaperKind::M5;
    const int side = (kind == TaperKind::Gamma2 || kind == TaperKind::Gamma4) ? -1 : +1;
    if (cross ? h.sign != -side : h.sign != side)
        throw std::invalid_argument("taper_map: field lives on the wrong side for this kind");
    const double f_inf = shape(-kTaperSupport - 2.0);
    std::vector<double> data(static_cast<std::size_t>(ns) * nt * nc, 0.0);

    if (a.is_zero()) {
        if (kind == TaperKind::Gamma1 || kind == TaperKind::Gamma2 || kind == TaperKind::M4) {
            const bool with_c = kind != TaperKind::M4;
            for (int i = 0; i < ns; ++i)
                for (int j = 0; j < nt; ++j)
                    for (int k = 0; k < nc; ++k)
                        data[(static_cast<std::size_t>(i) * nt + j) * nc + k] =
                            f_inf * (h.at(i, j, k) + (with_c ? h.c[k] : 0.0));
        }
        // Gamma3/Gamma4/M5/M3 tend to zero with the neck
        return HalfCylinderField(side, nc, ns, nt, h.smax, std::vector<double>(nc, 0.0),
                                 std::move(data), h.weights, /*warn_tail=*/false);
    }

    const double R = a.R;
    long m = 0, nw1 = 0, imid = -1;
    if (cross) {
        nw1 = detail::snap_index(R / ds, "taper_map: R/ds");
        m = detail::snap_index(a.theta * nt, "taper_map: theta*Nt");
        if (nw1 >= h.ns)
            throw std::invalid_argument("taper_map: field grid too short for the neck shift");
    }
    std::vector<double> loop_avg(nc, 0.0);
    if (kind == TaperKind::M3) {
        imid = detail::snap_index(R / (2.0 * ds), "taper_map: R/(2 ds)");
        if (imid >= h.ns)
            throw std::invalid_argument("taper_map: field grid too short for R/2");
        for (int j = 0; j < nt; ++j)
            for (int k = 0; k < nc; ++k) loop_avg[k] += h.at(static_cast<int>(imid), j, k);
        for (double& x : loop_avg) x /= nt;
    }

    for (int i = 0; i < ns; ++i) {
        const double s = side * (i * ds);  // coordinate on the output side
        const double arg = side > 0 ? s - R / 2.0 : -s - R / 2.0;
        const double fv = shape(arg);
        if (fv == 0.0) continue;
        for (int j = 0; j < nt; ++j)
            for (int k = 0; k < nc; ++k) {
                double hv;
                switch (kind) {
                    case TaperKind::Gamma1:
                    case TaperKind::Gamma2:
                        hv = h.value(i, j, k);
                        break;
                    case TaperKind::M4:
                        hv = h.at(i, j, k);
                        break;
                    case TaperKind::M3:
                        hv = loop_avg[k];
                        break;
                    default: {
                        // neck shift: rows count from the far end of the grid
                        const long ish = nw1 - i;
                        if (ish < 0) {
                            hv = 0.0;  // past the neck: the convention value
                        } else {
                            const int jj = side > 0 ? j - static_cast<int>(m)
                                                    : j + static_cast<int>(m);
                            hv = h.at(static_cast<int>(ish), jj, k);
                        }
                        break;
                    }
                }
                data[(static_cast<std::size_t>(i) * nt + j) * nc + k] = fv * hv;
            }
    }
    return HalfCylinderField(side, nc, ns, nt, h.smax, std::vector<double>(nc, 0.0),
                             std::move(data), h.weights, /*warn_tail=*/false);
}

}  // namespace scglue
