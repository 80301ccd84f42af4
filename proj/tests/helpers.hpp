#pragma once

#include <algorithm>
#include <cmath>

#include "rkf/model.hpp"

inline bool rel_close(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

// Scalar unit model started in steady state: Q0 = phi - 1.
inline rkf::ModelSpec steady_unit_model() {
    rkf::ModelSpec m = rkf::ModelSpec::scalar_unit();
    m.Q0(0, 0) = (1.0 + std::sqrt(5.0)) / 2.0 - 1.0;
    return m;
}
