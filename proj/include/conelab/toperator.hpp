#pragma once

#include <string>

#include "conelab/errors.hpp"
#include "conelab/geometry.hpp"

namespace conelab {

/// Direction of a transversal first-order operator N_j: d/dr_j or (beta_j r_j)^{-1} d/dtheta_j.
enum class NDir { Radial, Angular };

/// First-order operators: N_j (cone factor j) or D' = d/ds_a.
struct FirstOrder {
    enum class Kind { Cone, Tangential } kind = Kind::Cone;
    int index = 0;
    NDir dir = NDir::Radial;

    static FirstOrder cone(int j, NDir d) { return {Kind::Cone, j, d}; }
    static FirstOrder tangential(int a) { return {Kind::Tangential, a, NDir::Radial}; }
};

/// The second-order family {Delta_j, N_j N_k (j != k), N_j D', D'D'} whose Holder
/// continuity makes up C^{2,alpha}. Delta_j is the polar per-factor Laplacian
/// d_rr + r^{-1} d_r + (beta r)^{-2} d_thth.
struct TOperator {
    enum class Kind { Laplacian, ConeCone, ConeTangential, Tangential };
    Kind kind = Kind::Laplacian;
    FirstOrder first;
    FirstOrder second;

    static TOperator laplacian(int j) { return {Kind::Laplacian, FirstOrder::cone(j, NDir::Radial), FirstOrder::cone(j, NDir::Radial)}; }
    static TOperator cone_cone(int j, NDir dj, int k, NDir dk) {
        require(j != k, "TOperator: N_j N_k requires j != k");
        return {Kind::ConeCone, FirstOrder::cone(j, dj), FirstOrder::cone(k, dk)};
    }
    static TOperator cone_tangential(int j, NDir dj, int a) {
        return {Kind::ConeTangential, FirstOrder::cone(j, dj), FirstOrder::tangential(a)};
    }
    static TOperator tangential(int a, int b) {
        return {Kind::Tangential, FirstOrder::tangential(a), FirstOrder::tangential(b)};
    }

    void validate(const ConeAngles& angles, int tangential_axes) const {
        auto check = [&](const FirstOrder& f) {
            if (f.kind == FirstOrder::Kind::Cone)
                require(f.index >= 0 && f.index < angles.p(), "TOperator: cone index out of range");
            else
                require(f.index >= 0 && f.index < tangential_axes, "TOperator: tangential index out of range");
        };
        check(first);
        check(second);
        if (kind == Kind::ConeCone) require(first.index != second.index, "TOperator: N_j N_k requires j != k");
    }

    [[nodiscard]] std::string name() const {
        auto one = [](const FirstOrder& f) {
            if (f.kind == FirstOrder::Kind::Tangential) return "D" + std::to_string(f.index + 1);
            return "N" + std::to_string(f.index + 1) + (f.dir == NDir::Radial ? "r" : "t");
        };
        if (kind == Kind::Laplacian) return "Delta" + std::to_string(first.index + 1);
        return one(first) + "_" + one(second);
    }
};

/// Every member of the T family for a given dimension (both N directions).
inline std::vector<TOperator> all_t_operators(const ConeAngles& angles, int tangential_axes) {
    std::vector<TOperator> out;
    const NDir dirs[] = {NDir::Radial, NDir::Angular};
    for (int j = 0; j < angles.p(); ++j) out.push_back(TOperator::laplacian(j));
    for (int j = 0; j < angles.p(); ++j)
        for (int k = j + 1; k < angles.p(); ++k)
            for (NDir dj : dirs)
                for (NDir dk : dirs) out.push_back(TOperator::cone_cone(j, dj, k, dk));
    for (int j = 0; j < angles.p(); ++j)
        for (NDir dj : dirs)
            for (int a = 0; a < tangential_axes; ++a) out.push_back(TOperator::cone_tangential(j, dj, a));
    for (int a = 0; a < tangential_axes; ++a)
        for (int b = a; b < tangential_axes; ++b) out.push_back(TOperator::tangential(a, b));
    return out;
}

} // namespace conelab
