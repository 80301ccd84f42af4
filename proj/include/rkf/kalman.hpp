#pragma once

#include <cstddef>
#include <vector>

#include "rkf/linalg.hpp"
#include "rkf/model.hpp"

namespace rkf {

/// Per-step filter quantities. After kf_predict the *_pred fields describe
/// time t; after a correction the *_filt fields, gain and delta do too.
struct FilterState {
    std::size_t t = 0;
    Vector x_pred;      // X_{t|t-1}
    Matrix sigma_pred;  // Sigma_{t|t-1}
    Vector x_filt;      // X_{t|t}
    Matrix sigma_filt;  // Sigma_{t|t}
    Matrix gain;        // M0_t = Sigma_{t|t-1} Z^T Delta_t^+
    Matrix delta;       // Delta_t = Z Sigma_{t|t-1} Z^T + V
};

FilterState kf_init(const ModelSpec& model);

/// Advances to t+1: x_pred = F x_filt, Sigma_pred = F Sigma_filt F^T + Q.
FilterState kf_predict(const FilterState& state, const ModelSpec& model);

/// Gain and innovation covariance for a predicted state, without touching the
/// state estimate. Shared by every correction step.
FilterState kf_gain(const FilterState& predicted, const ModelSpec& model);

FilterState kf_correct(const FilterState& predicted, const ModelSpec& model, const Vector& y);

/// The observation innovation y - Z X_{t|t-1}.
Vector innovation(const FilterState& predicted, const ModelSpec& model, const Vector& y);

/// Covariance recursions only (they do not depend on the observations).
/// Element t-1 holds the corrected state for time t; x fields stay at a0.
std::vector<FilterState> riccati_sequence(const ModelSpec& model, std::size_t T);

/// Iterates the Riccati recursion of a time-invariant model until Sigma_pred
/// changes by less than `tol` (max-abs), then returns the predicted+gain state.
FilterState steady_state(const ModelSpec& model, double tol = 1e-13,
                         std::size_t max_iter = 100000);

/// Predicted+gain state at time t (Sigma_{t|t-1}, M0_t, Delta_t).
FilterState predicted_at(const ModelSpec& model, std::size_t t);

}  // namespace rkf
