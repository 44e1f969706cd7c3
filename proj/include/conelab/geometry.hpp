#pragma once

// Exact geometry of the flat model cone metric
//   g = sum_j (dr_j^2 + beta_j^2 r_j^2 dtheta_j^2) + sum_k ds_k^2,
// written in weighted polar coordinates r_j = |z_j|^{beta_j}, theta_j = arg z_j.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "conelab/errors.hpp"

namespace conelab {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

class ConeAngles {
public:
    ConeAngles(std::vector<double> betas, int n) : betas_(std::move(betas)), n_(n) {
        require(!betas_.empty(), "ConeAngles: at least one conical factor is required");
        require(n_ >= static_cast<int>(betas_.size()), "ConeAngles: need n >= p");
        for (double b : betas_)
            require(b > 0.0 && b < 1.0 && std::isfinite(b), "ConeAngles: every beta must lie in (0,1)");
        beta_max_ = *std::max_element(betas_.begin(), betas_.end());
    }

    [[nodiscard]] int p() const { return static_cast<int>(betas_.size()); }
    [[nodiscard]] int n() const { return n_; }
    [[nodiscard]] int tangential_dims() const { return 2 * (n_ - p()); }
    [[nodiscard]] double beta(int j) const { return betas_.at(j); }
    [[nodiscard]] const std::vector<double>& betas() const { return betas_; }
    [[nodiscard]] double beta_max() const { return beta_max_; }

    /// min(1/beta_max - 1, 1): the admissible Holder exponent cap.
    [[nodiscard]] double exponent_cap() const { return std::min(1.0 / beta_max_ - 1.0, 1.0); }

    bool operator==(const ConeAngles&) const = default;

private:
    std::vector<double> betas_;
    int n_;
    double beta_max_;
};

struct PolarCoord {
    double r = 0.0;
    double theta = 0.0;
    bool operator==(const PolarCoord&) const = default;
};

inline double normalize_angle(double theta) {
    double t = std::fmod(theta, kTwoPi);
    if (t < 0.0) t += kTwoPi;
    if (t >= kTwoPi) t = 0.0;
    return t;
}

/// A point in weighted polar coordinates plus tangential Cartesian coordinates.
/// Angles are kept in [0, 2pi) and set to 0 on the apex so equality is well defined.
class ConePoint {
public:
    ConePoint() = default;
    ConePoint(std::vector<PolarCoord> polar, std::vector<double> tangential)
        : polar_(std::move(polar)), tangential_(std::move(tangential)) {
        for (auto& c : polar_) {
            require(c.r >= 0.0 && std::isfinite(c.r), "ConePoint: radial coordinate must be finite and >= 0");
            c.theta = c.r == 0.0 ? 0.0 : normalize_angle(c.theta);
        }
    }

    static ConePoint origin(const ConeAngles& a) {
        return ConePoint(std::vector<PolarCoord>(a.p()), std::vector<double>(a.tangential_dims(), 0.0));
    }

    [[nodiscard]] const std::vector<PolarCoord>& polar() const { return polar_; }
    [[nodiscard]] const std::vector<double>& tangential() const { return tangential_; }
    [[nodiscard]] double r(int j) const { return polar_[j].r; }
    [[nodiscard]] double theta(int j) const { return polar_[j].theta; }
    [[nodiscard]] double s(int k) const { return tangential_[k]; }

    ConePoint with_polar(int j, double r, double theta) const {
        auto pol = polar_;
        pol[j] = {r, theta};
        return ConePoint(std::move(pol), tangential_);
    }
    ConePoint with_tangential(int k, double s) const {
        auto tan = tangential_;
        tan[k] = s;
        return ConePoint(polar_, std::move(tan));
    }

    bool operator==(const ConePoint&) const = default;

private:
    std::vector<PolarCoord> polar_;
    std::vector<double> tangential_;
};

struct ParabolicPoint {
    ConePoint space;
    double time = 0.0;

    ParabolicPoint() = default;
    ParabolicPoint(ConePoint x, double t) : space(std::move(x)), time(t) {
        require(std::isfinite(t) && t >= 0.0, "ParabolicPoint: time must be finite and non-negative");
    }
};

/// z has n complex entries; the first p are conical, the rest give s = (Re, Im) pairs.
inline ConePoint to_weighted_polar(std::span<const std::complex<double>> z, const ConeAngles& angles) {
    require(static_cast<int>(z.size()) == angles.n(), "to_weighted_polar: z must have n entries");
    std::vector<PolarCoord> polar(angles.p());
    for (int j = 0; j < angles.p(); ++j) {
        const double modulus = std::abs(z[j]);
        polar[j].r = std::pow(modulus, angles.beta(j));
        polar[j].theta = modulus == 0.0 ? 0.0 : std::arg(z[j]);
    }
    std::vector<double> tangential;
    tangential.reserve(angles.tangential_dims());
    for (int k = angles.p(); k < angles.n(); ++k) {
        tangential.push_back(z[k].real());
        tangential.push_back(z[k].imag());
    }
    return ConePoint(std::move(polar), std::move(tangential));
}

/// Squared distance on a single 2D cone of total angle 2*pi*beta.
inline double cone_factor_distance_sq(PolarCoord x, PolarCoord y, double beta) {
    if (x.r == 0.0 || y.r == 0.0) {
        const double d = x.r + y.r;
        return d * d;
    }
    double gap = std::abs(x.theta - y.theta);
    gap = std::min(gap, kTwoPi - gap);
    const double metric_angle = beta * gap;
    if (metric_angle >= std::numbers::pi) {
        const double d = x.r + y.r;
        return d * d;
    }
    // (r_x - r_y)^2 + 4 r_x r_y sin^2(phi/2) avoids cancellation for close points.
    const double half = std::sin(0.5 * metric_angle);
    const double dr = x.r - y.r;
    return dr * dr + 4.0 * x.r * y.r * half * half;
}

inline double cone_distance(const ConePoint& x, const ConePoint& y, const ConeAngles& angles) {
    require(x.polar().size() == y.polar().size() && x.tangential().size() == y.tangential().size(),
            "cone_distance: dimension mismatch");
    require(static_cast<int>(x.polar().size()) == angles.p(), "cone_distance: point/angle dimension mismatch");
    double sum = 0.0;
    for (int j = 0; j < angles.p(); ++j) sum += cone_factor_distance_sq(x.polar()[j], y.polar()[j], angles.beta(j));
    for (std::size_t k = 0; k < x.tangential().size(); ++k) {
        const double d = x.tangential()[k] - y.tangential()[k];
        sum += d * d;
    }
    return std::sqrt(sum);
}

inline double parabolic_distance(const ParabolicPoint& a, const ParabolicPoint& b, const ConeAngles& angles) {
    return std::max(std::sqrt(std::abs(a.time - b.time)), cone_distance(a.space, b.space, angles));
}

inline bool ball_contains(const ConePoint& center, double radius, const ConePoint& point, const ConeAngles& angles) {
    require(radius > 0.0, "ball_contains: radius must be positive");
    return cone_distance(center, point, angles) < radius;
}

/// Distance from x to the stratum S_j = {r_j = 0}.
inline double distance_to_stratum(const ConePoint& x, int j) { return x.r(j); }

/// Distance from x to S = union of the S_j.
inline double distance_to_singular_set(const ConePoint& x) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& c : x.polar()) d = std::min(d, c.r);
    return d;
}

/// Sup of |f(x)-f(y)| over pairs with d(x,y) < r, for each r on an increasing grid.
/// Uses every pair when the cloud is small, otherwise `max_pairs` random pairs from `rng`.
template <class Rng>
std::vector<double> oscillation_modulus(std::span<const ConePoint> cloud, std::span<const double> values,
                                        std::span<const double> radii, const ConeAngles& angles, Rng& rng,
                                        std::size_t max_pairs = 100000) {
    require(!cloud.empty(), "oscillation_modulus: empty point cloud");
    require(cloud.size() == values.size(), "oscillation_modulus: values/cloud size mismatch");
    require(std::is_sorted(radii.begin(), radii.end()), "oscillation_modulus: radius grid must be increasing");

    std::vector<std::pair<double, double>> pairs; // (distance, |df|)
    const std::size_t n = cloud.size();
    const std::size_t all = n * (n - 1) / 2;
    auto add = [&](std::size_t a, std::size_t b) {
        pairs.emplace_back(cone_distance(cloud[a], cloud[b], angles), std::abs(values[a] - values[b]));
    };
    if (all <= max_pairs) {
        pairs.reserve(all);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b) add(a, b);
    } else {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        pairs.reserve(max_pairs);
        for (std::size_t i = 0; i < max_pairs; ++i) {
            const auto a = pick(rng), b = pick(rng);
            if (a != b) add(a, b);
        }
    }
    std::sort(pairs.begin(), pairs.end());
    std::vector<double> out(radii.size(), 0.0);
    double running = 0.0;
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < radii.size(); ++i) {
        while (cursor < pairs.size() && pairs[cursor].first < radii[i]) running = std::max(running, pairs[cursor++].second);
        out[i] = running;
    }
    return out;
}

} // namespace conelab
