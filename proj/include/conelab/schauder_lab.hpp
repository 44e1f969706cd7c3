#pragma once

#include "conelab/closed_form.hpp"
#include "conelab/elliptic.hpp"
#include "conelab/norms.hpp"

#include <ostream>

namespace conelab {

// ---------------------------------------------------------------- measure_schauder

struct SchauderProblem {
    ConeAngles angles;
    double alpha = 0.1;
    Evaluator rhs = [](const ConePoint&) { return 0.0; };
    Evaluator boundary = [](const ConePoint&) { return 0.0; };
    double f_seminorm = -1.0; // [f]_alpha if known; negative: measured on the evaluation pairs
    GridSpec grid;            // grid.radius = R; the tangential half-width should match it
};

struct SchauderConfig {
    PairOptions pairs;
    LinearSolveOptions linear;
};

struct ExponentRow {
    std::string op;
    ExponentFit fit;
};

struct SchauderTable {
    double alpha = 0.0, cap = 0.0, R = 1.0;
    bool admissible = true;
    std::vector<ExponentRow> rows; // first-order operators then the T family, fitted on B(0, R/2)
    C2AlphaBreakdown norm;
    double f_sup = 0.0, f_seminorm = 0.0;
    double numerator = 0.0, denominator = 0.0;
    double ratio = 0.0; // scale-weighted ||u||_{2,alpha} / (||u||_0 + ||f||_{0,alpha})
    double solve_residual = 0.0;
    GridFunction solution;

    [[nodiscard]] const ExponentFit* find(const std::string& op) const {
        for (const auto& r : rows)
            if (r.op == op) return &r.fit;
        return nullptr;
    }
};

inline std::vector<OperatorTag> schauder_tags(const ConeAngles& a, int axes) {
    std::vector<OperatorTag> tags;
    for (int j = 0; j < a.p(); ++j)
        for (NDir d : {NDir::Radial, NDir::Angular}) tags.emplace_back(FirstOrder::cone(j, d));
    for (int k = 0; k < axes; ++k) tags.emplace_back(FirstOrder::tangential(k));
    for (const auto& t : all_t_operators(a, axes)) tags.emplace_back(t);
    return tags;
}

/// Solves Delta_beta u = f on the polydisk of radius R, fits the exponent of every operator output on
/// B(0, R/2) and forms the scale-weighted Schauder ratio
///   (|u|_0 + R |grad u|_0 + R^2 sum |Tu|_0 + R^{2+a} sum [Tu]_a) / (|u|_0 + R^2 |f|_0 + R^{2+a} [f]_a).
inline SchauderTable measure_schauder(const SchauderProblem& pb, const SchauderConfig& cfg = {}) {
    SchauderTable t;
    t.alpha = pb.alpha;
    t.cap = pb.angles.exponent_cap();
    t.R = pb.grid.radius;
    t.admissible = pb.alpha > 0.0 && pb.alpha < t.cap; // flagged, not fatal: sharpness studies run past the cap
    require(pb.alpha > 0.0 && pb.alpha <= 1.0, "measure_schauder: alpha must lie in (0,1]");
    EllipticProblem ep{pb.angles, {DomainKind::Polydisk, t.R}, pb.grid, pb.rhs, pb.boundary};
    SolveConfig sc;
    sc.linear = cfg.linear;
    const auto rep = solve_dirichlet(ep, sc);
    t.solve_residual = rep.residual;
    t.solution = rep.solution;
    const auto& u = rep.solution;
    const Grid& g = u.grid();

    PairOptions po = cfg.pairs;
    po.radius = t.R / 2.0;
    for (const auto& tag : schauder_tags(pb.angles, g.tangential_axes())) {
        ExponentRow row{tag_name(tag)};
        try {
            row.fit = fit_exponent(u, tag, pb.angles, po);
        } catch (const UsageError&) {
            row.fit.alpha = std::numeric_limits<double>::quiet_NaN(); // too few shells above the resolution
        }
        t.rows.push_back(std::move(row));
    }

    po.skip_boundary = true;
    const auto pairs = grid_pairs(g, pb.angles, po);
    const auto samples = samples_from_grid(u, pb.angles);
    t.norm = c2alpha_norm(samples, pairs, pb.alpha);
    std::vector<double> fv(g.size());
    std::vector<ConePoint> pts(g.size());
    const auto o = ConePoint::origin(pb.angles);
    for (std::size_t n = 0; n < g.size(); ++n) {
        pts[n] = g.point(static_cast<long>(n));
        fv[n] = pb.rhs(pts[n]);
        if (cone_distance(o, pts[n], pb.angles) < t.R / 2.0) t.f_sup = std::max(t.f_sup, std::abs(fv[n]));
    }
    t.f_seminorm = pb.f_seminorm >= 0.0 ? pb.f_seminorm : holder_seminorm(fv, pts, pairs, pb.alpha, pb.angles).seminorm;

    const double R = t.R, Ra = std::pow(R, 2.0 + pb.alpha);
    double c0 = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n)
        if (cone_distance(o, pts[n], pb.angles) < R / 2.0) c0 = std::max(c0, std::abs(u[n]));
    t.numerator = c0 + R * t.norm.gradient;
    for (const auto& term : t.norm.terms) t.numerator += R * R * term.sup + Ra * term.seminorm;
    t.denominator = c0 + R * R * t.f_sup + Ra * t.f_seminorm;
    t.ratio = t.denominator > 0.0 ? t.numerator / t.denominator : 0.0;
    return t;
}

// ---------------------------------------------------------------- sharpness witnesses

struct WitnessRow {
    std::string field, op, along;
    double expected = 0.0;
    ExponentFit fit;
};

struct WitnessReport {
    std::vector<WitnessRow> rows;
    [[nodiscard]] double worst_error() const {
        double w = 0.0;
        for (const auto& r : rows) w = std::max(w, std::abs(r.fit.alpha - r.expected));
        return w;
    }
};

/// Re z_j * s_1 under N_j D' and Re z_j * Re z_k under N_j N_k, fitted on dense radial ladders
/// through the apex of each factor (other coordinates fixed off the strata).
inline WitnessReport sharpness_witness(const ConeAngles& a, int rungs = 64, double r_min = 1e-6, double r_max = 0.5) {
    WitnessReport rep;
    std::vector<PolarCoord> polar(a.p(), PolarCoord{0.5, 0.3});
    const int axes = a.tangential_dims();
    const ConePoint base(polar, std::vector<double>(axes, 0.25));
    auto ray_name = [](int j) { return "r" + std::to_string(j + 1); };
    if (axes > 0)
        for (int j = 0; j < a.p(); ++j) {
            const auto u = fields::re_z_power(j, 1, a) * fields::tangential_coord(0);
            const TOperator op = TOperator::cone_tangential(j, NDir::Radial, 0);
            WitnessRow row{"Re z" + std::to_string(j + 1) + " * s1", op.name(), ray_name(j), 1.0 / a.beta(j) - 1.0};
            row.fit = fit_exponent(u, op, a, radial_ray(base, j, r_min, r_max, rungs));
            rep.rows.push_back(std::move(row));
        }
    for (int j = 0; j < a.p(); ++j)
        for (int k = j + 1; k < a.p(); ++k) {
            const auto u = fields::re_z_power(j, 1, a) * fields::re_z_power(k, 1, a);
            const TOperator op = TOperator::cone_cone(j, NDir::Radial, k, NDir::Radial);
            const std::string name = "Re z" + std::to_string(j + 1) + " * Re z" + std::to_string(k + 1);
            // along each ray the exponent is that factor's own 1/beta - 1; the joint exponent is the smaller
            for (int axis : {j, k}) {
                WitnessRow row{name, op.name(), ray_name(axis), 1.0 / a.beta(axis) - 1.0};
                row.fit = fit_exponent(u, op, a, radial_ray(base, axis, r_min, r_max, rungs));
                rep.rows.push_back(std::move(row));
            }
        }
    return rep;
}

/// min over the rays of the N_j N_k witness: the joint Hoelder exponent, expected 1/max(beta_j, beta_k) - 1.
inline std::pair<double, double> mixed_witness_exponent(const WitnessReport& rep, int j, int k) {
    const std::string name = "Re z" + std::to_string(j + 1) + " * Re z" + std::to_string(k + 1);
    double fitted = INFINITY, expected = INFINITY;
    for (const auto& r : rep.rows)
        if (r.field == name) {
            fitted = std::min(fitted, r.fit.alpha);
            expected = std::min(expected, r.expected);
        }
    require(std::isfinite(fitted), "mixed_witness_exponent: no such witness");
    return {fitted, expected};
}

// ---------------------------------------------------------------- constant blow-up

namespace blowup_detail {

template <class S>
S smooth_step(const S& t) {
    // 1 on t <= 1, 0 on t >= 2, smooth in between
    using std::exp;
    const double tv = value_of(t);
    if (tv <= 1.0) return S(1.0);
    if (tv >= 2.0) return S(0.0);
    const S a = exp(S(-1.0) / (S(2.0) - t)), b = exp(S(-1.0) / (t - S(1.0)));
    return a / (a + b);
}

} // namespace blowup_detail

/// Lacunary family: u_a = sum_{k<=K} 2^{k(1/beta - 1 - a)} chi(2^k rho) r^{1/beta} s cos(theta), rho^2 = r^2 + s^2,
/// in the first cone factor and first tangential coordinate. Scale k contributes a cut-off copy of the
/// harmonic witness r^{1/beta} s cos(theta), so Delta u_a is C^{0,a} uniformly while [N D' u_a]_a ~ 1/(cap - a).
inline ClosedForm lacunary_witness(const ConeAngles& angles, double alpha, int K) {
    const double e = 1.0 / angles.beta(0), c = e - 1.0 - alpha;
    return ClosedForm([=](const auto& x) {
        using S = std::decay_t<decltype(x.r[0])>;
        using std::cos;
        using std::pow;
        using std::sqrt;
        const S rho = sqrt(x.r[0] * x.r[0] + x.s[0] * x.s[0]);
        S sum(0.0);
        for (int k = 0; k <= K; ++k) {
            const S t = std::ldexp(1.0, k) * rho;
            if (value_of(t) >= 2.0) break;
            sum = sum + std::exp2(k * c) * blowup_detail::smooth_step(t);
        }
        return sum * pow(x.r[0], e) * x.s[0] * cos(x.theta[0]);
    });
}

struct BlowupRow {
    double alpha = 0.0;
    double g = 0.0;          // 1/(alpha (cap - alpha))
    double numerator = 0.0;  // ||u||_{C^{2,alpha}(K)}
    double f_norm = 0.0;     // |f|_0 + [f]_alpha
    double u_c0 = 0.0;
    double ratio = 0.0;
    double fitted = 0.0;
};

struct BlowupScan {
    double beta = 0.0, cap = 0.0;
    int scales = 0;
    std::vector<BlowupRow> rows;
    double a = 0.0, b = 0.0;        // ratio ~ a + b / (alpha (cap - alpha))
    double relative_rms = 0.0;      // rms of (ratio - fit) / ratio
    double r_squared = 0.0;
    [[nodiscard]] bool monotone() const {
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (!(rows[i].ratio > rows[i - 1].ratio)) return false;
        return true;
    }
};

inline constexpr double kBlowupFitThreshold = 0.10; // relative rms residual of the 1/(alpha(cap-alpha)) fit

struct BlowupConfig {
    int scales = 200;       // dyadic scales in the family and in the sample set
    int pair_band = 4;      // pairs between sample scales at most this far apart
};

/// Measured Schauder ratio of the lacunary family over an increasing alpha grid inside (0, cap),
/// with a least-squares fit ratio = a + b / (alpha (cap - alpha)).
inline BlowupScan constant_blowup_scan(double beta, const std::vector<double>& alphas, const BlowupConfig& cfg = {}) {
    const ConeAngles angles({beta}, 2);
    BlowupScan scan;
    scan.beta = beta;
    scan.cap = angles.exponent_cap();
    scan.scales = cfg.scales;
    require(alphas.size() >= 3, "constant_blowup_scan: need at least three alpha values");
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        require(alphas[i] > 0.0 && alphas[i] < scan.cap, "constant_blowup_scan: alpha grid must lie strictly inside (0, cap)");
        require(i == 0 || alphas[i] > alphas[i - 1], "constant_blowup_scan: alpha grid must increase");
    }
    // multi-scale sample set inside B(0, 1/2): per scale 2 radii x 5 directions in the (r, s) half-plane x 2 angles
    std::vector<ConePoint> pts;
    std::vector<int> scale_of;
    for (int k = 1; k <= cfg.scales; ++k)
        for (double rr : {0.25, 0.35})
            for (double psi : {-1.0, -0.4, 0.0, 0.4, 1.0})
                for (double th : {0.0, 0.8}) {
                    const double rho = std::ldexp(rr, -k + 1);
                    pts.push_back(ConePoint({PolarCoord{rho * std::cos(psi), th}}, {rho * std::sin(psi), 0.0}));
                    scale_of.push_back(k);
                }
    PairSet pairs;
    for (std::size_t a = 0; a < pts.size(); ++a)
        for (std::size_t b = a + 1; b < pts.size(); ++b)
            if (std::abs(scale_of[a] - scale_of[b]) <= cfg.pair_band || scale_of[b] == cfg.scales)
                pairs.pairs.emplace_back(static_cast<long>(a), static_cast<long>(b));

    for (double alpha : alphas) {
        const auto u = lacunary_witness(angles, alpha, cfg.scales);
        const auto samples = samples_from_closed_form(u, pts, angles, 1);
        const auto norm = c2alpha_norm(samples, pairs, alpha);
        std::vector<double> f(pts.size());
        double fsup = 0.0;
        for (std::size_t n = 0; n < pts.size(); ++n) {
            f[n] = u.laplacian(pts[n], angles);
            fsup = std::max(fsup, std::abs(f[n]));
        }
        BlowupRow row;
        row.alpha = alpha;
        row.g = 1.0 / (alpha * (scan.cap - alpha));
        row.numerator = norm.c0 + norm.gradient;
        for (const auto& t : norm.terms) row.numerator += t.norm();
        row.u_c0 = norm.c0;
        row.f_norm = fsup + holder_seminorm(f, pts, pairs, alpha, angles).seminorm;
        row.ratio = row.numerator / (row.u_c0 + row.f_norm);
        scan.rows.push_back(row);
    }
    // ordinary least squares on (g, ratio)
    const double n = static_cast<double>(scan.rows.size());
    double mg = 0.0, mr = 0.0;
    for (const auto& r : scan.rows) {
        mg += r.g / n;
        mr += r.ratio / n;
    }
    double sgg = 0.0, sgr = 0.0, srr = 0.0;
    for (const auto& r : scan.rows) {
        sgg += (r.g - mg) * (r.g - mg);
        sgr += (r.g - mg) * (r.ratio - mr);
        srr += (r.ratio - mr) * (r.ratio - mr);
    }
    if (!(sgg > 0.0)) throw UsageError("constant_blowup_scan: degenerate fit (all 1/(alpha(cap-alpha)) equal)");
    scan.b = sgr / sgg;
    scan.a = mr - scan.b * mg;
    double ss = 0.0, rel = 0.0;
    for (auto& r : scan.rows) {
        r.fitted = scan.a + scan.b * r.g;
        ss += (r.ratio - r.fitted) * (r.ratio - r.fitted);
        rel += std::pow((r.ratio - r.fitted) / r.ratio, 2);
    }
    scan.r_squared = srr > 0.0 ? 1.0 - ss / srr : 1.0;
    scan.relative_rms = std::sqrt(rel / n);
    return scan;
}

// ---------------------------------------------------------------- dyadic ladder

struct LadderLevel {
    int k = 0;
    int regime = 1;                   // 1: ball at p; 2: at the projection onto the nearest stratum; 3: more strata collapsed
    std::vector<int> collapsed;       // cone factors whose coordinate is moved to the apex
    double radius = 0.0;
    long unknowns = 0;
    double gap = 0.0;                 // ||u_k - u|| on the level's domain
    double bound = 0.0;               // tau^{2k} omega(tau^k)
    double ratio = 0.0;
    double step_gap = std::numeric_limits<double>::quiet_NaN();   // ||u_k - u_{k+1}|| on the half domain
    double step_ratio = std::numeric_limits<double>::quiet_NaN();
    double dprime_gap = std::numeric_limits<double>::quiet_NaN(); // ||D'(u_k - u_{k+1})|| on the third domain
    double dprime_bound = 0.0;                                     // tau^k omega(tau^k)
};

struct LadderReport {
    std::vector<LadderLevel> levels;
    [[nodiscard]] double max_ratio() const {
        double m = 0.0;
        for (const auto& l : levels) m = std::max(m, l.ratio);
        return m;
    }
    [[nodiscard]] double min_ratio() const {
        double m = INFINITY;
        for (const auto& l : levels) m = std::min(m, l.ratio);
        return m;
    }
};

struct DyadicLadderConfig {
    int k_min = 2, k_max = 6;
    int margin = 1; // k_max may exceed log2(1/r_p) by this much
    std::function<double(double)> omega; // oscillation modulus of f; required
    SolveConfig solve;
};

inline constexpr double kTau = 0.5;

namespace ladder_detail {

struct Shape {
    ConePoint center;
    std::vector<char> collapsed;
    double radius = 0.0;
};

/// Product-domain membership: |factor distance| < lambda rho in every cone factor, |s - s_c| < lambda rho per axis.
inline bool inside(const ConePoint& x, const Shape& sh, const ConeAngles& a, double lambda) {
    const double rho = lambda * sh.radius;
    for (int j = 0; j < a.p(); ++j) {
        const double d = sh.collapsed[j] ? x.r(j) : std::sqrt(cone_factor_distance_sq(x.polar()[j], sh.center.polar()[j], a.beta(j)));
        if (d >= rho) return false;
    }
    for (std::size_t k = 0; k < x.tangential().size(); ++k)
        if (std::abs(x.tangential()[k] - sh.center.tangential()[k]) >= rho) return false;
    return true;
}

} // namespace ladder_detail

/// The proof's ladder: for each k, u_k solves Delta u_k = f(p) with u_k = u outside a product domain
/// of radius tau^k around p (when that avoids the strata) or 2 tau^k around the projection of p onto
/// the strata it is close to. Domains are taken as node sets of u's own grid, so the boundary values
/// are u's nodal values and every u_k lives on the same nodes.
inline LadderReport dyadic_ladder(const ConePoint& p, const GridFunction& u, const Evaluator& f, const ConeAngles& a,
                                  const DyadicLadderConfig& cfg) {
    const Grid& g = u.grid();
    check_grid_angles(g, a);
    require(static_cast<bool>(cfg.omega), "dyadic_ladder: omega must be supplied");
    require(cfg.k_min >= 1 && cfg.k_max >= cfg.k_min, "dyadic_ladder: bad level range");
    double rp = INFINITY;
    int nearest = 0;
    for (int j = 0; j < a.p(); ++j)
        if (p.r(j) < rp) {
            rp = p.r(j);
            nearest = j;
        }
    if (!(rp > 0.0)) throw UsageError("dyadic_ladder: p lies on the singular set");
    if (cfg.k_max > std::log2(1.0 / rp) + cfg.margin) throw UsageError("dyadic_ladder: p too close to the strata for the requested depth");
    auto k_of = [](double d) { // smallest k with tau^k < d
        int k = 0;
        while (std::pow(kTau, k) >= d) ++k;
        return k;
    };
    const int kp = k_of(rp);
    const double fp = f(p);

    std::vector<ladder_detail::Shape> shapes;
    LadderReport rep;
    std::vector<std::vector<double>> sol;
    for (int k = cfg.k_min; k <= cfg.k_max + 1; ++k) {
        ladder_detail::Shape sh{p, std::vector<char>(a.p(), 0), std::pow(kTau, k)};
        LadderLevel lvl;
        lvl.k = k;
        if (k < kp) {
            sh.radius *= 2.0;
            lvl.regime = 2;
            auto pol = p.polar();
            for (int j = 0; j < a.p(); ++j) {
                const bool collapse = j == nearest || k <= k_of(p.r(j)) + 1;
                if (collapse) {
                    sh.collapsed[j] = 1;
                    pol[j] = PolarCoord{0.0, 0.0};
                    lvl.collapsed.push_back(j);
                    if (j != nearest) lvl.regime = 3;
                }
            }
            sh.center = ConePoint(pol, p.tangential());
        }
        lvl.radius = sh.radius;
        std::vector<char> mask(g.size(), 1);
        for (std::size_t n = 0; n < g.size(); ++n)
            if (!g.is_boundary(static_cast<long>(n)) && ladder_detail::inside(g.point(static_cast<long>(n)), sh, a, 1.0)) {
                mask[n] = 0;
                ++lvl.unknowns;
            }
        if (lvl.unknowns == 0) throw UsageError("dyadic_ladder: level " + std::to_string(k) + " contains no grid node");
        const auto res = solve_on_grid(u.grid_ptr(), mask, std::vector<double>(g.size(), fp), u.values(), MetricField(), cfg.solve);
        sol.push_back(res.solution.values());
        shapes.push_back(sh);
        for (std::size_t n = 0; n < g.size(); ++n)
            if (!mask[n]) lvl.gap = std::max(lvl.gap, std::abs(sol.back()[n] - u[n]));
        const double tk = std::pow(kTau, k);
        lvl.bound = tk * tk * cfg.omega(tk);
        lvl.ratio = lvl.gap / lvl.bound;
        lvl.dprime_bound = tk * cfg.omega(tk);
        rep.levels.push_back(lvl);
    }
    // successive gaps; the last solved level only serves as u_{k_max + 1}
    for (std::size_t i = 0; i + 1 < rep.levels.size(); ++i) {
        auto& lvl = rep.levels[i];
        const auto& uk = sol[i];
        const auto& uk1 = sol[i + 1];
        double step = 0.0, dp = 0.0;
        bool any_step = false, any_dp = false;
        for (std::size_t n = 0; n < g.size(); ++n) {
            const long idx = static_cast<long>(n);
            const auto x = g.point(idx);
            if (!ladder_detail::inside(x, shapes[i], a, 0.5)) continue;
            step = std::max(step, std::abs(uk[n] - uk1[n]));
            any_step = true;
            if (!ladder_detail::inside(x, shapes[i], a, 1.0 / 3.0)) continue;
            for (int ax = 0; ax < g.tangential_axes(); ++ax) {
                const int q = g.local(idx, g.p() + ax);
                if (q == 0 || q + 1 >= g.tangential(ax).nodes) continue;
                const long lo = g.with_local(idx, g.p() + ax, q - 1), hi = g.with_local(idx, g.p() + ax, q + 1);
                if (!ladder_detail::inside(g.point(lo), shapes[i], a, 0.5) || !ladder_detail::inside(g.point(hi), shapes[i], a, 0.5))
                    continue;
                const double h = g.tangential(ax).h();
                dp = std::max(dp, std::abs((uk[hi] - uk1[hi]) - (uk[lo] - uk1[lo])) / (2.0 * h));
                any_dp = true;
            }
        }
        if (any_step) {
            lvl.step_gap = step;
            lvl.step_ratio = step / lvl.bound;
        }
        if (any_dp) lvl.dprime_gap = dp;
    }
    rep.levels.pop_back();
    return rep;
}

// ---------------------------------------------------------------- CSV

struct ScanCsvRow {
    std::vector<double> betas;
    double alpha = 0.0;
    std::string op;
    double fitted_exponent = std::numeric_limits<double>::quiet_NaN();
    double ratio = std::numeric_limits<double>::quiet_NaN();
    double residual = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t seed = 0;
};

inline std::vector<ScanCsvRow> csv_rows(const SchauderTable& t, const ConeAngles& a, std::uint64_t seed) {
    std::vector<ScanCsvRow> out;
    for (const auto& r : t.rows)
        out.push_back({a.betas(), t.alpha, r.op, r.fit.flat ? std::numeric_limits<double>::quiet_NaN() : r.fit.alpha, t.ratio,
                       r.fit.residual, seed});
    return out;
}

inline std::vector<ScanCsvRow> csv_rows(const BlowupScan& s) {
    std::vector<ScanCsvRow> out;
    for (const auto& r : s.rows)
        out.push_back({{s.beta}, r.alpha, "blowup", std::numeric_limits<double>::quiet_NaN(), r.ratio, (r.ratio - r.fitted) / r.ratio, 0});
    return out;
}

inline std::vector<ScanCsvRow> csv_rows(const WitnessReport& w, const ConeAngles& a) {
    std::vector<ScanCsvRow> out;
    for (const auto& r : w.rows)
        out.push_back({a.betas(), r.expected, r.op + "@" + r.along, r.fit.alpha, std::numeric_limits<double>::quiet_NaN(), r.fit.residual, 0});
    return out;
}

/// Rows may mix factor counts; the beta columns are padded to the widest row.
inline void write_scan_csv(std::ostream& os, const std::vector<ScanCsvRow>& rows) {
    std::size_t p = 0;
    for (const auto& r : rows) p = std::max(p, r.betas.size());
    for (std::size_t j = 0; j < p; ++j) os << "beta" << j + 1 << ',';
    os << "alpha,operator,fitted_exponent,ratio,residual,seed\n";
    os.precision(17);
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < p; ++j) {
            if (j < r.betas.size()) os << r.betas[j];
            os << ',';
        }
        os << r.alpha << ',' << r.op << ',' << r.fitted_exponent << ',' << r.ratio << ',' << r.residual << ',' << r.seed << '\n';
    }
}

} // namespace conelab
