#pragma once

#include <cmath>

namespace conelab {

/// Hyper-dual number v + d1 e1 + d2 e2 + d12 e1e2 with e1^2 = e2^2 = 0.
/// Seeding x on e1 and y on e2 yields d12 = d^2 f / dx dy exactly.
struct HyperDual {
    double v = 0.0, d1 = 0.0, d2 = 0.0, d12 = 0.0;

    HyperDual() = default;
    HyperDual(double value) : v(value) {} // NOLINT(google-explicit-constructor)
    HyperDual(double value, double a, double b, double ab) : v(value), d1(a), d2(b), d12(ab) {}

    [[nodiscard]] bool is_constant() const { return d1 == 0.0 && d2 == 0.0 && d12 == 0.0; }

    HyperDual& operator+=(const HyperDual& o) { v += o.v; d1 += o.d1; d2 += o.d2; d12 += o.d12; return *this; }
    HyperDual& operator-=(const HyperDual& o) { v -= o.v; d1 -= o.d1; d2 -= o.d2; d12 -= o.d12; return *this; }
    HyperDual& operator*=(const HyperDual& o) {
        *this = HyperDual(v * o.v, v * o.d1 + d1 * o.v, v * o.d2 + d2 * o.v, v * o.d12 + d1 * o.d2 + d2 * o.d1 + d12 * o.v);
        return *this;
    }
    HyperDual& operator/=(const HyperDual& o);
};

// Chain rule for a scalar function with value f0, first derivative f1, second f2 at x.v.
inline HyperDual chain(const HyperDual& x, double f0, double f1, double f2) {
    return {f0, f1 * x.d1, f1 * x.d2, f1 * x.d12 + f2 * x.d1 * x.d2};
}

inline HyperDual operator+(HyperDual a, const HyperDual& b) { return a += b; }
inline HyperDual operator-(HyperDual a, const HyperDual& b) { return a -= b; }
inline HyperDual operator*(HyperDual a, const HyperDual& b) { return a *= b; }
inline HyperDual operator-(const HyperDual& a) { return {-a.v, -a.d1, -a.d2, -a.d12}; }

inline HyperDual reciprocal(const HyperDual& x) {
    const double inv = 1.0 / x.v;
    return chain(x, inv, -inv * inv, 2.0 * inv * inv * inv);
}
inline HyperDual& HyperDual::operator/=(const HyperDual& o) { return *this *= reciprocal(o); }
inline HyperDual operator/(HyperDual a, const HyperDual& b) { return a /= b; }

inline HyperDual sqrt(const HyperDual& x) {
    const double s = std::sqrt(x.v);
    if (x.is_constant()) return s;
    return chain(x, s, 0.5 / s, -0.25 / (s * x.v));
}
inline HyperDual pow(const HyperDual& x, double p) {
    if (x.is_constant()) return std::pow(x.v, p);
    return chain(x, std::pow(x.v, p), p * std::pow(x.v, p - 1.0), p * (p - 1.0) * std::pow(x.v, p - 2.0));
}
inline HyperDual exp(const HyperDual& x) {
    const double e = std::exp(x.v);
    return chain(x, e, e, e);
}
inline HyperDual log(const HyperDual& x) {
    if (x.is_constant()) return std::log(x.v);
    return chain(x, std::log(x.v), 1.0 / x.v, -1.0 / (x.v * x.v));
}
inline HyperDual sin(const HyperDual& x) { return chain(x, std::sin(x.v), std::cos(x.v), -std::sin(x.v)); }
inline HyperDual cos(const HyperDual& x) { return chain(x, std::cos(x.v), -std::sin(x.v), -std::cos(x.v)); }

inline double value_of(double x) { return x; }
inline double value_of(const HyperDual& x) { return x.v; }

} // namespace conelab
