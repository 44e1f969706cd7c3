#pragma once

// Holder seminorms and the C^{2,alpha} family on finite sample sets. Every sup is a
// max over explicit point pairs; samplers add the adversarial pairs (radial rays
// through the strata, pure-time pairs) to stratified random ones.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <variant>

#include <json.hpp>

#include "conelab/closed_form.hpp"
#include "conelab/operators.hpp"

namespace conelab {

using IndexPair = std::pair<long, long>;

/// Identity, a first-order operator, or a member of the T family.
using OperatorTag = std::variant<std::monostate, FirstOrder, TOperator>;

inline std::string tag_name(const OperatorTag& tag) {
    if (std::holds_alternative<std::monostate>(tag)) return "u";
    if (const auto* f = std::get_if<FirstOrder>(&tag)) {
        if (f->kind == FirstOrder::Kind::Tangential) return "D" + std::to_string(f->index + 1);
        return "N" + std::to_string(f->index + 1) + (f->dir == NDir::Radial ? "r" : "t");
    }
    return std::get<TOperator>(tag).name();
}

inline GridFunction apply_tag(const GridFunction& u, const OperatorTag& tag, const ConeAngles& angles) {
    if (std::holds_alternative<std::monostate>(tag)) return u;
    check_grid_angles(u.grid(), angles);
    if (const auto* f = std::get_if<FirstOrder>(&tag)) return apply_first(u, *f);
    return apply_T(u, std::get<TOperator>(tag), angles);
}

inline double apply_tag(const ClosedForm& u, const OperatorTag& tag, const ConePoint& x, const ConeAngles& angles) {
    if (std::holds_alternative<std::monostate>(tag)) return u(x);
    if (const auto* f = std::get_if<FirstOrder>(&tag)) return u.apply(*f, x, angles);
    return u.apply(std::get<TOperator>(tag), x, angles);
}

struct HolderPair {
    ConePoint x, y;
    double tx = 0.0, ty = 0.0;
    double ux = 0.0, uy = 0.0;
    double distance = 0.0;
};

struct HolderReport {
    double alpha = 0.0;
    double seminorm = 0.0;
    HolderPair argmax;
    std::size_t pair_count = 0;
    std::uint64_t seed = 0;
    std::optional<double> fitted_exponent;
};

inline nlohmann::json to_json(const ConePoint& x) {
    nlohmann::json j;
    for (const auto& c : x.polar()) j["polar"].push_back({c.r, c.theta});
    j["tangential"] = x.tangential();
    return j;
}

inline nlohmann::json to_json(const HolderReport& r) {
    nlohmann::json j{{"alpha", r.alpha},
                     {"seminorm", r.seminorm},
                     {"pair_count", r.pair_count},
                     {"seed", r.seed},
                     {"argmax",
                      {{"x", to_json(r.argmax.x)},
                       {"y", to_json(r.argmax.y)},
                       {"tx", r.argmax.tx},
                       {"ty", r.argmax.ty},
                       {"ux", r.argmax.ux},
                       {"uy", r.argmax.uy},
                       {"distance", r.argmax.distance}}}};
    j["fitted_exponent"] = r.fitted_exponent ? nlohmann::json(*r.fitted_exponent) : nlohmann::json(nullptr);
    return j;
}

// ---------------------------------------------------------------- samples

/// Point values of u and of its first- and second-order outputs.
struct FieldSamples {
    ConeAngles angles;
    std::vector<ConePoint> points;
    std::vector<double> u;
    std::vector<double> gradient;           // |grad u|_{g_beta}
    std::vector<double> first_sum;          // sum_j |N_j u| + |D' u|
    std::vector<TOperator> ops;
    std::vector<std::vector<double>> t;     // t[k][i] = (T_k u)(x_i)
    std::vector<char> on_stratum;
    std::vector<char> on_boundary; // grid boundary nodes: derivative outputs there are one-sided, sups skip them

    [[nodiscard]] std::size_t size() const { return points.size(); }
    [[nodiscard]] bool derivative_ok(std::size_t i) const {
        return !on_stratum[i] && (on_boundary.empty() || !on_boundary[i]);
    }
};

namespace norms_detail {

inline double first_order_sum(const std::vector<double>& nr, const std::vector<double>& nt, double dprime) {
    double s = dprime;
    for (std::size_t j = 0; j < nr.size(); ++j) s += std::hypot(nr[j], nt[j]);
    return s;
}

} // namespace norms_detail

/// Samples a grid function at every node; derivative outputs come from the discrete operators.
inline FieldSamples samples_from_grid(const GridFunction& u, const ConeAngles& angles) {
    check_grid_angles(u.grid(), angles);
    const Grid& g = u.grid();
    FieldSamples s{angles};
    s.u = u.values();
    s.points.reserve(g.size());
    for (std::size_t n = 0; n < g.size(); ++n) {
        s.points.push_back(g.point(static_cast<long>(n)));
        bool apex = false;
        for (int j = 0; j < g.p(); ++j) apex |= g.ring(static_cast<long>(n), j) == 0;
        s.on_stratum.push_back(apex);
        s.on_boundary.push_back(g.is_boundary(static_cast<long>(n)) ? 1 : 0);
    }
    const auto grad = gradient_norm_sq(u);
    s.gradient.resize(g.size());
    for (std::size_t n = 0; n < g.size(); ++n) s.gradient[n] = std::sqrt(grad[n]);
    std::vector<GridFunction> nr, nt, ds;
    for (int j = 0; j < g.p(); ++j) {
        nr.push_back(apply_first(u, FirstOrder::cone(j, NDir::Radial)));
        nt.push_back(apply_first(u, FirstOrder::cone(j, NDir::Angular)));
    }
    for (int a = 0; a < g.tangential_axes(); ++a) ds.push_back(apply_first(u, FirstOrder::tangential(a)));
    s.first_sum.resize(g.size());
    for (std::size_t n = 0; n < g.size(); ++n) {
        std::vector<double> r(g.p()), th(g.p());
        double d2 = 0.0;
        for (int j = 0; j < g.p(); ++j) {
            r[j] = nr[j][n];
            th[j] = nt[j][n];
        }
        for (const auto& d : ds) d2 += d[n] * d[n];
        s.first_sum[n] = norms_detail::first_order_sum(r, th, std::sqrt(d2));
    }
    s.ops = all_t_operators(angles, g.tangential_axes());
    for (const auto& op : s.ops) s.t.push_back(apply_T(u, op, angles).values());
    return s;
}

/// Samples a closed form at given points with exact derivatives.
inline FieldSamples samples_from_closed_form(const ClosedForm& u, std::vector<ConePoint> points, const ConeAngles& angles,
                                             int tangential_axes) {
    FieldSamples s{angles};
    s.points = std::move(points);
    s.ops = all_t_operators(angles, tangential_axes);
    s.t.assign(s.ops.size(), {});
    for (const auto& x : s.points) {
        s.u.push_back(u(x));
        s.on_stratum.push_back(distance_to_singular_set(x) == 0.0);
        std::vector<double> r(angles.p()), th(angles.p());
        for (int j = 0; j < angles.p(); ++j) {
            r[j] = u.apply(FirstOrder::cone(j, NDir::Radial), x, angles);
            th[j] = u.apply(FirstOrder::cone(j, NDir::Angular), x, angles);
        }
        double d2 = 0.0;
        for (int a = 0; a < tangential_axes; ++a) d2 += std::pow(u.apply(FirstOrder::tangential(a), x, angles), 2);
        s.first_sum.push_back(norms_detail::first_order_sum(r, th, std::sqrt(d2)));
        double g2 = d2;
        for (int j = 0; j < angles.p(); ++j) g2 += r[j] * r[j] + th[j] * th[j];
        s.gradient.push_back(std::sqrt(g2));
        for (std::size_t k = 0; k < s.ops.size(); ++k) s.t[k].push_back(u.apply(s.ops[k], x, angles));
    }
    return s;
}

// ---------------------------------------------------------------- pair samplers

struct PairOptions {
    std::size_t random_pairs = 20000;
    int rays = 4;                                              // radial rays per conical factor
    double radius = std::numeric_limits<double>::infinity(); // restrict to d_beta(x, 0) < radius
    std::uint64_t seed = 1;
    bool skip_boundary = false; // leave out grid boundary nodes
};

struct PairSet {
    std::vector<IndexPair> pairs;
    std::uint64_t seed = 0;
};

/// Every pair of the given indices.
inline std::vector<IndexPair> all_pairs(const std::vector<long>& idx) {
    std::vector<IndexPair> out;
    out.reserve(idx.size() * (idx.size() - (idx.empty() ? 0 : 1)) / 2);
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = a + 1; b < idx.size(); ++b) out.emplace_back(idx[a], idx[b]);
    return out;
}

/// Node pairs of a grid: exhaustive when small, otherwise random pairs plus every pair on
/// radial rays through the apex of each factor and all nearest-neighbour pairs.
inline PairSet grid_pairs(const Grid& g, const ConeAngles& angles, const PairOptions& opt = {}) {
    std::vector<long> eligible;
    std::vector<char> ok(g.size(), 0);
    const auto o = ConePoint::origin(angles);
    for (std::size_t n = 0; n < g.size(); ++n) {
        const long idx = static_cast<long>(n);
        if (opt.skip_boundary && g.is_boundary(idx)) continue;
        if (!std::isfinite(opt.radius) || cone_distance(o, g.point(idx), angles) < opt.radius) {
            eligible.push_back(idx);
            ok[n] = 1;
        }
    }
    PairSet out{{}, opt.seed};
    if (eligible.size() * (eligible.size() - 1) / 2 <= opt.random_pairs) {
        out.pairs = all_pairs(eligible);
        return out;
    }
    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
    for (std::size_t k = 0; k < opt.random_pairs; ++k) {
        const long a = eligible[pick(rng)], b = eligible[pick(rng)];
        if (a != b) out.pairs.emplace_back(a, b);
    }
    // Radial rays through the apex of factor j, other coordinates at the grid centre; every pair
    // within the star of rays, so opposite-angle pairs near the apex are present at each scale.
    long centre = 0;
    for (int a = 0; a < g.tangential_axes(); ++a) centre = g.with_local(centre, g.p() + a, g.tangential(a).nodes / 2);
    for (int j = 0; j < g.p(); ++j) {
        const auto& f = g.factor(j);
        std::vector<long> star{g.with_local(centre, j, 0)};
        for (int ray = 0; ray < opt.rays; ++ray) {
            const int m = ray * f.angular_nodes / std::max(1, opt.rays);
            for (int i = 1; i <= f.radial_intervals; ++i) star.push_back(g.with_local(centre, j, f.local(i, m)));
        }
        std::erase_if(star, [&](long idx) { return !ok[idx]; });
        auto pr = all_pairs(star);
        out.pairs.insert(out.pairs.end(), pr.begin(), pr.end());
    }
    for (long idx : eligible)
        for (int ax = 0; ax < g.axis_count(); ++ax) {
            const int q = g.local(idx, ax);
            long nb = -1;
            if (ax < g.p()) {
                const auto& f = g.factor(ax);
                const int i = f.ring(q);
                if (i > 0 && i < f.radial_intervals) nb = g.with_local(idx, ax, f.local(i + 1, f.angle_index(q)));
                if (i > 0 && ok[g.with_local(idx, ax, f.local(i, f.angle_index(q) + 1))])
                    out.pairs.emplace_back(idx, g.with_local(idx, ax, f.local(i, f.angle_index(q) + 1)));
            } else if (q + 1 < g.tangential(ax - g.p()).nodes) {
                nb = g.with_local(idx, ax, q + 1);
            }
            if (nb >= 0 && ok[nb]) out.pairs.emplace_back(idx, nb);
        }
    return out;
}

// ---------------------------------------------------------------- seminorms

namespace norms_detail {

template <class Pairs, class Values, class Dist>
HolderReport sup_over_pairs(const Pairs& pairs, Values&& values, Dist&& dist, double alpha) {
    require(alpha > 0.0 && alpha <= 1.0, "holder: alpha must lie in (0,1]");
    require(!pairs.empty(), "holder: no pairs sampled");
    HolderReport r;
    r.alpha = alpha;
    long best = -1;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto [ua, ub] = values(k);
        const double d = dist(k);
        if (!(d > 0.0)) continue;
        const double q = std::abs(ua - ub) / std::pow(d, alpha);
        if (best < 0 || q > r.seminorm) {
            r.seminorm = q;
            best = static_cast<long>(k);
        }
    }
    require(best >= 0, "holder: every sampled pair is degenerate");
    r.pair_count = pairs.size();
    return r;
}

} // namespace norms_detail

/// sup |u(x) - u(y)| / d_beta(x, y)^alpha over explicit point pairs of an evaluator.
inline HolderReport holder_seminorm(const std::function<double(const ConePoint&)>& u,
                                    const std::vector<std::pair<ConePoint, ConePoint>>& pairs, double alpha,
                                    const ConeAngles& angles, std::uint64_t seed = 0) {
    std::vector<double> ua(pairs.size()), ub(pairs.size()), d(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        ua[k] = u(pairs[k].first);
        ub[k] = u(pairs[k].second);
        d[k] = cone_distance(pairs[k].first, pairs[k].second, angles);
    }
    auto r = norms_detail::sup_over_pairs(
        pairs, [&](std::size_t k) { return std::pair{ua[k], ub[k]}; }, [&](std::size_t k) { return d[k]; }, alpha);
    // recover the argmax pair
    for (std::size_t k = 0; k < pairs.size(); ++k)
        if (d[k] > 0.0 && std::abs(ua[k] - ub[k]) / std::pow(d[k], alpha) == r.seminorm) {
            r.argmax = {pairs[k].first, pairs[k].second, 0.0, 0.0, ua[k], ub[k], d[k]};
            break;
        }
    r.seed = seed;
    return r;
}

/// Same on sampled values with index pairs.
inline HolderReport holder_seminorm(const std::vector<double>& values, const std::vector<ConePoint>& points,
                                    const PairSet& pairs, double alpha, const ConeAngles& angles) {
    std::vector<double> d(pairs.pairs.size());
    for (std::size_t k = 0; k < d.size(); ++k)
        d[k] = cone_distance(points[pairs.pairs[k].first], points[pairs.pairs[k].second], angles);
    auto r = norms_detail::sup_over_pairs(
        pairs.pairs, [&](std::size_t k) { return std::pair{values[pairs.pairs[k].first], values[pairs.pairs[k].second]}; },
        [&](std::size_t k) { return d[k]; }, alpha);
    for (std::size_t k = 0; k < d.size(); ++k) {
        const auto [a, b] = pairs.pairs[k];
        if (d[k] > 0.0 && std::abs(values[a] - values[b]) / std::pow(d[k], alpha) == r.seminorm) {
            r.argmax = {points[a], points[b], 0.0, 0.0, values[a], values[b], d[k]};
            break;
        }
    }
    r.seed = pairs.seed;
    return r;
}

inline HolderReport holder_seminorm(const GridFunction& u, double alpha, const ConeAngles& angles,
                                    const PairOptions& opt = {}) {
    check_grid_angles(u.grid(), angles);
    std::vector<ConePoint> pts;
    for (std::size_t n = 0; n < u.size(); ++n) pts.push_back(u.grid().point(static_cast<long>(n)));
    return holder_seminorm(u.values(), pts, grid_pairs(u.grid(), angles, opt), alpha, angles);
}

// ---------------------------------------------------------------- C^{2,alpha}

struct NormTerm {
    std::string name;
    double sup = 0.0;
    double seminorm = 0.0;
    [[nodiscard]] double norm() const { return sup + seminorm; }
};

struct C2AlphaBreakdown {
    double alpha = 0.0;
    double c0 = 0.0;
    double gradient = 0.0;
    std::vector<NormTerm> terms; // one per T operator: sup |Tu| + [Tu]_alpha
    double total = 0.0;
};

inline nlohmann::json to_json(const C2AlphaBreakdown& b) {
    nlohmann::json j{{"alpha", b.alpha}, {"c0", b.c0}, {"gradient", b.gradient}, {"total", b.total}};
    for (const auto& t : b.terms) j["terms"].push_back({{"operator", t.name}, {"sup", t.sup}, {"seminorm", t.seminorm}});
    return j;
}

inline C2AlphaBreakdown c2alpha_norm(const FieldSamples& s, const PairSet& pairs, double alpha) {
    C2AlphaBreakdown b;
    b.alpha = alpha;
    for (std::size_t i = 0; i < s.size(); ++i) {
        b.c0 = std::max(b.c0, std::abs(s.u[i]));
        if (s.derivative_ok(i)) b.gradient = std::max(b.gradient, s.gradient[i]);
    }
    PairSet off{{}, pairs.seed};
    for (const auto& pr : pairs.pairs)
        if (s.derivative_ok(pr.first) && s.derivative_ok(pr.second)) off.pairs.push_back(pr);
    for (std::size_t k = 0; k < s.ops.size(); ++k) {
        NormTerm t{s.ops[k].name()};
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s.derivative_ok(i)) t.sup = std::max(t.sup, std::abs(s.t[k][i]));
        t.seminorm = holder_seminorm(s.t[k], s.points, off, alpha, s.angles).seminorm;
        b.terms.push_back(t);
    }
    b.total = b.c0 + b.gradient;
    for (const auto& t : b.terms) b.total += t.norm();
    return b;
}

inline C2AlphaBreakdown c2alpha_norm(const GridFunction& u, double alpha, const ConeAngles& angles, const PairOptions& opt = {}) {
    return c2alpha_norm(samples_from_grid(u, angles), grid_pairs(u.grid(), angles, opt), alpha);
}

// ---------------------------------------------------------------- weighted norms

struct WeightedNormReport {
    double sigma = 0.0, alpha = 0.0;
    double c0 = 0.0;        // sup d_x^sigma |u|
    double holder = 0.0;    // sup min(d_x,d_y)^{sigma+alpha} |u(x)-u(y)| / d^alpha
    double c1 = 0.0;        // sup d_x^{sigma+1} (sum |N_j u| + |D'u|)
    double c2 = 0.0;        // sup d_x^{sigma+2} |Tu|
    double c2alpha = 0.0;   // sup min^{sigma+2+alpha} |Tu(x) - Tu(y)| / d^alpha
    [[nodiscard]] double total() const { return c0 + c1 + c2 + c2alpha; }
};

/// Weighted norms on Omega = B_beta(0, R); d_x = R - d_beta(x, 0). Points outside Omega are ignored;
/// points on the boundary are skipped where the weight power is positive and rejected otherwise.
inline WeightedNormReport weighted_norm(const FieldSamples& s, const PairSet& pairs, double sigma, double alpha, double R) {
    require(R > 0.0 && R <= 1.0, "weighted_norm: Omega must lie in the unit ball");
    require(alpha > 0.0 && alpha <= 1.0, "weighted_norm: alpha must lie in (0,1]");
    const auto o = ConePoint::origin(s.angles);
    std::vector<double> dx(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) dx[i] = R - cone_distance(o, s.points[i], s.angles);
    auto weight = [](double d, double power) {
        if (d > 0.0) return std::pow(d, power);
        if (power > 0.0) return 0.0;
        throw UsageError("weighted_norm: sample on the boundary of Omega with a non-positive weight power");
    };
    WeightedNormReport w;
    w.sigma = sigma;
    w.alpha = alpha;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (dx[i] < 0.0) continue;
        w.c0 = std::max(w.c0, weight(dx[i], sigma) * std::abs(s.u[i]));
        if (!s.derivative_ok(i)) continue;
        w.c1 = std::max(w.c1, weight(dx[i], sigma + 1.0) * s.first_sum[i]);
        for (const auto& t : s.t) w.c2 = std::max(w.c2, weight(dx[i], sigma + 2.0) * std::abs(t[i]));
    }
    for (const auto& [a, b] : pairs.pairs) {
        if (dx[a] < 0.0 || dx[b] < 0.0) continue;
        const double d = cone_distance(s.points[a], s.points[b], s.angles);
        if (!(d > 0.0)) continue;
        const double m = std::min(dx[a], dx[b]), da = std::pow(d, alpha);
        w.holder = std::max(w.holder, weight(m, sigma + alpha) * std::abs(s.u[a] - s.u[b]) / da);
        if (!s.derivative_ok(a) || !s.derivative_ok(b)) continue;
        const double wt = weight(m, sigma + 2.0 + alpha);
        for (const auto& t : s.t) w.c2alpha = std::max(w.c2alpha, wt * std::abs(t[a] - t[b]) / da);
    }
    return w;
}

inline WeightedNormReport weighted_norm(const GridFunction& u, double sigma, double alpha, double R,
                                        const ConeAngles& angles, const PairOptions& opt = {}) {
    auto o = opt;
    o.radius = std::min(o.radius, R);
    return weighted_norm(samples_from_grid(u, angles), grid_pairs(u.grid(), angles, o), sigma, alpha, R);
}

// ---------------------------------------------------------------- parabolic

/// Pairs of (node, level) indices.
struct SpaceTimePairs {
    std::vector<std::pair<std::pair<long, int>, std::pair<long, int>>> pairs;
    std::uint64_t seed = 0;
};

/// Spatial pairs at equal and at random levels, plus every pure-time pair of a few random nodes.
inline SpaceTimePairs space_time_pairs(const SpaceTimeField& f, const ConeAngles& angles, const PairOptions& opt = {},
                                       int time_nodes = 64) {
    require(f.level_count() > 0, "space_time_pairs: empty field");
    const auto sp = grid_pairs(*f.grid, angles, opt);
    const int L = static_cast<int>(f.level_count());
    SpaceTimePairs out;
    out.seed = opt.seed;
    std::mt19937_64 rng(opt.seed + 17);
    std::uniform_int_distribution<int> lv(0, L - 1);
    // each spatial pair once at a shared level, once across random levels
    for (std::size_t k = 0; k < sp.pairs.size(); ++k) {
        const int l = static_cast<int>(k % static_cast<std::size_t>(L));
        out.pairs.push_back({{sp.pairs[k].first, l}, {sp.pairs[k].second, l}});
        out.pairs.push_back({{sp.pairs[k].first, lv(rng)}, {sp.pairs[k].second, lv(rng)}});
    }
    std::uniform_int_distribution<long> node(0, static_cast<long>(f.grid->size()) - 1);
    for (int k = 0; k < time_nodes; ++k) {
        const long n = node(rng);
        for (int a = 0; a < L; ++a)
            for (int b = a + 1; b < L; ++b) out.pairs.push_back({{n, a}, {n, b}});
    }
    return out;
}

/// sup |u(Q1) - u(Q2)| / d_P(Q1, Q2)^alpha over space-time pairs of a level-wise field.
inline HolderReport parabolic_holder(const std::vector<std::vector<double>>& levels, const std::vector<double>& times,
                                     const Grid& g, const SpaceTimePairs& pairs, double alpha, const ConeAngles& angles) {
    check_grid_angles(g, angles);
    std::vector<ConePoint> pts;
    for (std::size_t n = 0; n < g.size(); ++n) pts.push_back(g.point(static_cast<long>(n)));
    std::vector<double> d(pairs.pairs.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
        const auto& [p, q] = pairs.pairs[k];
        const double ds = p.first == q.first ? 0.0 : cone_distance(pts[p.first], pts[q.first], angles);
        d[k] = std::max(std::sqrt(std::abs(times[p.second] - times[q.second])), ds);
    }
    auto val = [&](const std::pair<long, int>& q) { return levels[q.second][q.first]; };
    auto r = norms_detail::sup_over_pairs(
        pairs.pairs, [&](std::size_t k) { return std::pair{val(pairs.pairs[k].first), val(pairs.pairs[k].second)}; },
        [&](std::size_t k) { return d[k]; }, alpha);
    for (std::size_t k = 0; k < d.size(); ++k) {
        const auto& [p, q] = pairs.pairs[k];
        if (d[k] > 0.0 && std::abs(val(p) - val(q)) / std::pow(d[k], alpha) == r.seminorm) {
            r.argmax = {pts[p.first], pts[q.first], times[p.second], times[q.second], val(p), val(q), d[k]};
            break;
        }
    }
    r.seed = pairs.seed;
    return r;
}

inline HolderReport parabolic_holder(const SpaceTimeField& f, double alpha, const ConeAngles& angles, const PairOptions& opt = {}) {
    return parabolic_holder(f.levels, f.times, *f.grid, space_time_pairs(f, angles, opt), alpha, angles);
}

/// Parabolic seminorm of an evaluator u(x, t) over explicit space-time point pairs.
inline HolderReport parabolic_holder(const std::function<double(const ParabolicPoint&)>& u,
                                     const std::vector<std::pair<ParabolicPoint, ParabolicPoint>>& pairs, double alpha,
                                     const ConeAngles& angles) {
    std::vector<double> ua(pairs.size()), ub(pairs.size()), d(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        ua[k] = u(pairs[k].first);
        ub[k] = u(pairs[k].second);
        d[k] = parabolic_distance(pairs[k].first, pairs[k].second, angles);
    }
    return norms_detail::sup_over_pairs(
        pairs, [&](std::size_t k) { return std::pair{ua[k], ub[k]}; }, [&](std::size_t k) { return d[k]; }, alpha);
}

/// The C^{2+alpha,(2+alpha)/2} breakdown: C^0, gradient, and sup + parabolic seminorm of every
/// T output and of du/dt (difference quotients between levels, central inside).
inline C2AlphaBreakdown parabolic_c2alpha_norm(const SpaceTimeField& f, double alpha, const ConeAngles& angles,
                                               const PairOptions& opt = {}) {
    require(f.level_count() >= 2, "parabolic_c2alpha_norm: need at least two time levels");
    const Grid& g = *f.grid;
    C2AlphaBreakdown b;
    b.alpha = alpha;
    const auto ops = all_t_operators(angles, g.tangential_axes());
    std::vector<std::vector<std::vector<double>>> tv(ops.size() + 1);
    for (std::size_t l = 0; l < f.level_count(); ++l) {
        const auto u = f.at(l);
        b.c0 = std::max(b.c0, u.sup_norm());
        const auto gr = gradient_norm_sq(u);
        for (std::size_t n = 0; n < g.size(); ++n)
            if (g.ring(static_cast<long>(n), 0) > 0 || g.p() > 1) b.gradient = std::max(b.gradient, std::sqrt(gr[n]));
        for (std::size_t k = 0; k < ops.size(); ++k) tv[k].push_back(apply_T(u, ops[k], angles).values());
    }
    const std::size_t L = f.level_count();
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t a = l == 0 ? 0 : l - 1, c = l + 1 == L ? l : l + 1;
        std::vector<double> dt(g.size());
        for (std::size_t n = 0; n < g.size(); ++n) dt[n] = (f.levels[c][n] - f.levels[a][n]) / (f.times[c] - f.times[a]);
        tv.back().push_back(std::move(dt));
    }
    const auto pairs = space_time_pairs(f, angles, opt);
    for (std::size_t k = 0; k <= ops.size(); ++k) {
        NormTerm t{k < ops.size() ? ops[k].name() : "dt"};
        for (const auto& lvl : tv[k])
            for (double v : lvl) t.sup = std::max(t.sup, std::abs(v));
        t.seminorm = parabolic_holder(tv[k], f.times, g, pairs, alpha, angles).seminorm;
        b.terms.push_back(t);
    }
    b.total = b.c0 + b.gradient;
    for (const auto& t : b.terms) b.total += t.norm();
    return b;
}

// ---------------------------------------------------------------- exponent fitting

struct ShellRow {
    int k = 0;               // shell [2^{-k-1}, 2^{-k}]
    double distance = 0.0;   // geometric mean of the shell edges
    double sup_oscillation = 0.0;
    std::size_t count = 0;
};

struct ExponentFit {
    bool flat = false;                                      // Tu constant on the sample: exponent undefined
    double alpha = std::numeric_limits<double>::quiet_NaN(); // least-squares slope
    double residual = 0.0;                                   // rms of the log-log regression
    double span_decades = 0.0;
    std::vector<ShellRow> shells;
};

inline nlohmann::json to_json(const ExponentFit& f) {
    nlohmann::json j{{"flat", f.flat}, {"residual", f.residual}, {"span_decades", f.span_decades}};
    j["alpha"] = f.flat ? nlohmann::json("flat") : nlohmann::json(f.alpha);
    for (const auto& s : f.shells)
        j["shells"].push_back({{"k", s.k}, {"distance", s.distance}, {"sup_oscillation", s.sup_oscillation}, {"count", s.count}});
    return j;
}

inline void write_shell_csv(std::ostream& os, const ExponentFit& f) {
    os << "k,distance,sup_oscillation,count\n";
    os.precision(17);
    for (const auto& s : f.shells) os << s.k << ',' << s.distance << ',' << s.sup_oscillation << ',' << s.count << '\n';
}

/// Slope of log sup-oscillation against log distance over dyadic shells.
/// Shells whose lower edge lies below `resolution` (the sampling scale near the strata) or whose upper
/// edge exceeds `outer` (pairs spanning the whole sample) are reported but left out of the regression.
inline ExponentFit fit_exponent(const std::vector<double>& values, const std::vector<ConePoint>& points,
                                const std::vector<IndexPair>& pairs, const ConeAngles& angles, double resolution = 0.0,
                                double flat_tol = 1e-12, double outer = INFINITY) {
    ExponentFit fit;
    double scale = 0.0;
    for (double v : values) scale = std::max(scale, std::abs(v));
    std::map<int, ShellRow> shells;
    double osc_max = 0.0;
    for (const auto& [a, b] : pairs) {
        const double d = cone_distance(points[a], points[b], angles);
        if (!(d > 0.0)) continue;
        const int k = static_cast<int>(std::floor(-std::log2(d)));
        auto& row = shells[k];
        row.k = k;
        row.distance = std::pow(2.0, -k - 0.5);
        row.sup_oscillation = std::max(row.sup_oscillation, std::abs(values[a] - values[b]));
        ++row.count;
        osc_max = std::max(osc_max, row.sup_oscillation);
    }
    for (auto& [k, row] : shells) fit.shells.push_back(row);
    if (osc_max <= flat_tol * std::max(1.0, scale)) {
        fit.flat = true;
        return fit;
    }
    std::vector<double> xs, ys;
    for (const auto& row : fit.shells)
        if (row.sup_oscillation > flat_tol * std::max(1.0, scale) && std::ldexp(1.0, -row.k - 1) >= resolution &&
            std::ldexp(1.0, -row.k) <= outer) {
            xs.push_back(std::log(row.distance));
            ys.push_back(std::log(row.sup_oscillation));
        }
    if (xs.size() < 3) throw UsageError("fit_exponent: fewer than 3 distance shells populated");
    fit.span_decades = (xs.back() - xs.front()) / std::log(10.0);
    fit.span_decades = std::abs(fit.span_decades);
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n, my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    fit.alpha = sxy / sxx;
    double ss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) ss += std::pow(ys[i] - (my + fit.alpha * (xs[i] - mx)), 2);
    fit.residual = std::sqrt(ss / n);
    return fit;
}

/// Radius from which the rings of every factor resolve dyadic scales: the first ring whose successor
/// is within a factor 2. Below it a dyadic shell may contain no apex pair at all.
inline double dyadic_resolution(const Grid& g) {
    double res = 0.0;
    for (const auto& f : g.factors()) {
        std::size_t i = 1;
        while (i + 1 < f.r.size() && f.r[i + 1] > 2.0 * f.r[i]) ++i;
        res = std::max(res, f.r[i]);
    }
    return res;
}

/// Exponent of T u for a grid function over interior nodes, fitted above the dyadic resolution.
inline ExponentFit fit_exponent(const GridFunction& u, const OperatorTag& tag, const ConeAngles& angles,
                                PairOptions opt = {}) {
    const auto tu = apply_tag(u, tag, angles);
    std::vector<ConePoint> pts;
    for (std::size_t n = 0; n < u.size(); ++n) pts.push_back(u.grid().point(static_cast<long>(n)));
    opt.skip_boundary = true;
    const double resolution = dyadic_resolution(u.grid());
    double outer = opt.radius;
    for (const auto& f : u.grid().factors()) outer = std::min(outer, f.radius);
    return fit_exponent(tu.values(), pts, grid_pairs(u.grid(), angles, opt).pairs, angles, resolution, 1e-12, outer);
}

/// Radial witness points: the stratum point and geometric radii r_min..r_max on the ray theta of
/// factor j, with every other coordinate taken from `base`.
inline std::vector<ConePoint> radial_ray(const ConePoint& base, int j, double r_min, double r_max, int count,
                                         double theta = 0.0, bool include_apex = true) {
    require(r_min > 0.0 && r_max > r_min && count >= 2, "radial_ray: bad radii");
    std::vector<ConePoint> out;
    if (include_apex) out.push_back(base.with_polar(j, 0.0, theta));
    for (int k = 0; k < count; ++k) {
        const double r = r_min * std::pow(r_max / r_min, static_cast<double>(k) / (count - 1));
        out.push_back(base.with_polar(j, r, theta));
    }
    return out;
}

/// Exponent of tag(u) for a closed form on explicit points (all pairs).
inline ExponentFit fit_exponent(const ClosedForm& u, const OperatorTag& tag, const ConeAngles& angles,
                                const std::vector<ConePoint>& points) {
    std::vector<double> v;
    for (const auto& x : points) v.push_back(apply_tag(u, tag, x, angles));
    std::vector<long> idx(points.size());
    std::iota(idx.begin(), idx.end(), 0L);
    double resolution = std::numeric_limits<double>::infinity();
    for (const auto& x : points)
        if (distance_to_singular_set(x) > 0.0) resolution = std::min(resolution, distance_to_singular_set(x));
    return fit_exponent(v, points, all_pairs(idx), angles, std::isfinite(resolution) ? resolution : 0.0);
}

} // namespace conelab
