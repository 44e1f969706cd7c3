#pragma once

// Closed-form scalar fields on the cone with exact T-operator evaluation by
// forward-mode second-order differentiation. These are the analytic witnesses
// and manufactured solutions that the numerical modules are checked against.

#include <functional>
#include <vector>

#include "conelab/autodiff.hpp"
#include "conelab/geometry.hpp"
#include "conelab/toperator.hpp"

namespace conelab {

template <class S>
struct Coords {
    std::vector<S> r, theta, s;
};

/// Radial coordinates are clamped to this floor when derivatives are taken, so
/// that T-values on a stratum are the (one-sided) limits rather than NaN.
inline constexpr double kApexFloor = 1e-280;

class ClosedForm {
public:
    ClosedForm() : ClosedForm([](const auto&) { return 0.0; }) {}

    template <class F>
    explicit ClosedForm(F f)
        : value_([f](const Coords<double>& c) { return static_cast<double>(f(c)); }),
          dual_([f](const Coords<HyperDual>& c) { return HyperDual(f(c)); }) {}

    double operator()(const ConePoint& x) const { return value_(coords<double>(x, false)); }

    /// Value of T u at x.
    double apply(const TOperator& t, const ConePoint& x, const ConeAngles& angles) const {
        auto c = coords<HyperDual>(x, true);
        if (t.kind == TOperator::Kind::Laplacian) return factor_laplacian(c, t.first.index, angles);
        auto slot = [&](const FirstOrder& f) -> HyperDual& {
            return f.kind == FirstOrder::Kind::Cone ? (f.dir == NDir::Radial ? c.r[f.index] : c.theta[f.index])
                                                    : c.s[f.index];
        };
        slot(t.first).d1 = 1.0;
        slot(t.second).d2 = 1.0;
        const double mixed = dual_(c).d12;
        return mixed * scale(t.first, c, angles) * scale(t.second, c, angles);
    }

    /// First-order derivative N_j u or D' u at x.
    double apply(const FirstOrder& f, const ConePoint& x, const ConeAngles& angles) const {
        auto c = coords<HyperDual>(x, true);
        if (f.kind == FirstOrder::Kind::Cone)
            (f.dir == NDir::Radial ? c.r[f.index] : c.theta[f.index]).d1 = 1.0;
        else
            c.s[f.index].d1 = 1.0;
        return dual_(c).d1 * scale(f, c, angles);
    }

    /// |grad u|^2 in the cone metric.
    double gradient_norm_sq(const ConePoint& x, const ConeAngles& angles) const {
        double sum = 0.0;
        for (int j = 0; j < angles.p(); ++j)
            for (NDir d : {NDir::Radial, NDir::Angular}) {
                const double g = apply(FirstOrder::cone(j, d), x, angles);
                sum += g * g;
            }
        for (std::size_t a = 0; a < x.tangential().size(); ++a) {
            const double g = apply(FirstOrder::tangential(static_cast<int>(a)), x, angles);
            sum += g * g;
        }
        return sum;
    }

    /// Full model Laplacian: sum_j Delta_j u + sum_a d^2u/ds_a^2.
    double laplacian(const ConePoint& x, const ConeAngles& angles) const {
        double sum = 0.0;
        for (int j = 0; j < angles.p(); ++j) sum += apply(TOperator::laplacian(j), x, angles);
        for (std::size_t a = 0; a < x.tangential().size(); ++a)
            sum += apply(TOperator::tangential(static_cast<int>(a), static_cast<int>(a)), x, angles);
        return sum;
    }

    friend ClosedForm operator+(const ClosedForm& a, const ClosedForm& b) { return combine(a, b, 1.0, 1.0); }
    friend ClosedForm operator-(const ClosedForm& a, const ClosedForm& b) { return combine(a, b, 1.0, -1.0); }
    friend ClosedForm operator*(double k, const ClosedForm& a) { return combine(a, a, k, 0.0); }
    friend ClosedForm operator*(const ClosedForm& a, const ClosedForm& b) {
        ClosedForm out;
        out.value_ = [a, b](const Coords<double>& c) { return a.value_(c) * b.value_(c); };
        out.dual_ = [a, b](const Coords<HyperDual>& c) { return a.dual_(c) * b.dual_(c); };
        return out;
    }

private:
    template <class S>
    static Coords<S> coords(const ConePoint& x, bool clamp) {
        Coords<S> c;
        for (const auto& pc : x.polar()) {
            c.r.emplace_back(clamp ? std::max(pc.r, kApexFloor) : pc.r);
            c.theta.emplace_back(pc.theta);
        }
        for (double s : x.tangential()) c.s.emplace_back(s);
        return c;
    }

    static double scale(const FirstOrder& f, const Coords<HyperDual>& c, const ConeAngles& angles) {
        if (f.kind == FirstOrder::Kind::Cone && f.dir == NDir::Angular)
            return 1.0 / (angles.beta(f.index) * c.r[f.index].v);
        return 1.0;
    }

    double factor_laplacian(Coords<HyperDual> c, int j, const ConeAngles& angles) const {
        c.r[j].d1 = c.r[j].d2 = 1.0;
        const HyperDual radial = dual_(c);
        c.r[j].d1 = c.r[j].d2 = 0.0;
        c.theta[j].d1 = c.theta[j].d2 = 1.0;
        const HyperDual angular = dual_(c);
        const double r = c.r[j].v, b = angles.beta(j);
        return radial.d12 + radial.d1 / r + angular.d12 / (b * b * r * r);
    }

    static ClosedForm combine(const ClosedForm& a, const ClosedForm& b, double ka, double kb) {
        ClosedForm out;
        out.value_ = [a, b, ka, kb](const Coords<double>& c) { return ka * a.value_(c) + (kb == 0.0 ? 0.0 : kb * b.value_(c)); };
        out.dual_ = [a, b, ka, kb](const Coords<HyperDual>& c) {
            HyperDual v = HyperDual(ka) * a.dual_(c);
            if (kb != 0.0) v += HyperDual(kb) * b.dual_(c);
            return v;
        };
        return out;
    }

    std::function<double(const Coords<double>&)> value_;
    std::function<HyperDual(const Coords<HyperDual>&)> dual_;
};

namespace fields {

inline ClosedForm constant(double value) {
    return ClosedForm([value](const auto&) { return value; });
}

/// Re z_j^k = r_j^{k/beta_j} cos(k theta_j).
inline ClosedForm re_z_power(int j, int k, const ConeAngles& angles) {
    const double e = k / angles.beta(j);
    return ClosedForm([j, k, e](const auto& c) {
        using std::cos;
        using std::pow;
        return pow(c.r[j], e) * cos(static_cast<double>(k) * c.theta[j]);
    });
}

/// |z_j| = r_j^{1/beta_j}.
inline ClosedForm modulus_z(int j, const ConeAngles& angles) {
    const double e = 1.0 / angles.beta(j);
    return ClosedForm([j, e](const auto& c) {
        using std::pow;
        return pow(c.r[j], e);
    });
}

/// r_j^a.
inline ClosedForm radial_power(int j, double a) {
    return ClosedForm([j, a](const auto& c) {
        using std::pow;
        return pow(c.r[j], a);
    });
}

/// r_j^a cos(m theta_j).
inline ClosedForm radial_mode(int j, double a, int m) {
    return ClosedForm([j, a, m](const auto& c) {
        using std::cos;
        using std::pow;
        return pow(c.r[j], a) * cos(static_cast<double>(m) * c.theta[j]);
    });
}

inline ClosedForm tangential_coord(int a) {
    return ClosedForm([a](const auto& c) { return c.s[a]; });
}

/// sum_a s_a^2 over all tangential coordinates present.
inline ClosedForm tangential_square_sum() {
    return ClosedForm([](const auto& c) {
        using S = std::decay_t<decltype(c.s[0] * c.s[0])>;
        S sum(0.0);
        for (const auto& s : c.s) sum = sum + s * s;
        return sum;
    });
}

} // namespace fields
} // namespace conelab
