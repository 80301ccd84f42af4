#include "rkf/kalman.hpp"

#include <string>

#include "rkf/errors.hpp"

namespace rkf {

FilterState kf_init(const ModelSpec& model) {
    model.validate();
    FilterState s;
    s.t = 0;
    s.x_filt = model.a0;
    s.sigma_filt = model.Q0;
    s.x_pred = model.a0;
    s.sigma_pred = model.Q0;
    return s;
}

FilterState kf_predict(const FilterState& state, const ModelSpec& model) {
    const std::size_t t = state.t + 1;
    const Matrix& f = model.f(t);
    if (state.x_filt.size() != f.cols() || state.sigma_filt.rows() != f.cols())
        throw ValidationError("kf_predict: state dimension does not match F_" + std::to_string(t));
    FilterState s = state;
    s.t = t;
    s.x_pred = f * state.x_filt;
    s.sigma_pred = f * state.sigma_filt * f.transpose() + model.q_cov(t);
    return s;
}

FilterState kf_gain(const FilterState& predicted, const ModelSpec& model) {
    const Matrix& z = model.z(predicted.t);
    if (predicted.sigma_pred.rows() != z.cols())
        throw ValidationError("kf_correct: state dimension does not match Z");
    FilterState s = predicted;
    s.delta = symmetrized(z * predicted.sigma_pred * z.transpose() + model.v_cov(predicted.t));
    s.gain = predicted.sigma_pred * z.transpose() * pinv_psd(s.delta);
    const Matrix eye = Matrix::Identity(z.cols(), z.cols());
    s.sigma_filt = symmetrized((eye - s.gain * z) * predicted.sigma_pred);
    return s;
}

Vector innovation(const FilterState& predicted, const ModelSpec& model, const Vector& y) {
    const Matrix& z = model.z(predicted.t);
    if (y.size() != z.rows())
        throw ValidationError("observation has dimension " + std::to_string(y.size()) +
                              ", expected " + std::to_string(z.rows()));
    return y - z * predicted.x_pred;
}

FilterState kf_correct(const FilterState& predicted, const ModelSpec& model, const Vector& y) {
    FilterState s = kf_gain(predicted, model);
    s.x_filt = s.x_pred + s.gain * innovation(s, model, y);
    return s;
}

std::vector<FilterState> riccati_sequence(const ModelSpec& model, std::size_t T) {
    std::vector<FilterState> out;
    out.reserve(T);
    FilterState s = kf_init(model);
    for (std::size_t t = 1; t <= T; ++t) {
        s = kf_gain(kf_predict(s, model), model);
        out.push_back(s);
    }
    return out;
}

FilterState steady_state(const ModelSpec& model, double tol, std::size_t max_iter) {
    if (!model.time_invariant())
        throw ValidationError("steady_state requires a time-invariant model");
    FilterState s = kf_gain(kf_predict(kf_init(model), model), model);
    for (std::size_t i = 0; i < max_iter; ++i) {
        FilterState next = kf_gain(kf_predict(s, model), model);
        const double change = (next.sigma_pred - s.sigma_pred).cwiseAbs().maxCoeff();
        s = std::move(next);
        if (change < tol) return s;
    }
    throw NumericalError("steady_state: Riccati recursion did not converge");
}

FilterState predicted_at(const ModelSpec& model, std::size_t t) {
    if (t < 1) throw ValidationError("time index must be at least 1");
    return riccati_sequence(model, t).back();
}

}  // namespace rkf
