#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>

#include "rkf/expectation.hpp"
#include "rkf/kalman.hpp"
#include "rkf/linalg.hpp"
#include "rkf/model.hpp"

namespace rkf {

/// Clipping height of a Huberized correction: a nonnegative real or +inf.
class ClipHeight {
public:
    ClipHeight() = default;  // unbounded
    explicit ClipHeight(double b);

    static ClipHeight unbounded() { return ClipHeight(); }

    bool is_unbounded() const { return std::isinf(value_); }
    double value() const { return value_; }

    friend bool operator==(ClipHeight, ClipHeight) = default;

private:
    double value_ = std::numeric_limits<double>::infinity();
};

/// H_b(w) = w min{1, b/|w|}. Requires b > 0 (or unbounded).
Vector huberize(const Vector& w, ClipHeight b);

enum class CalibrationMethod { Delta, Radius, RadiusRange, Fixed };

const char* to_string(CalibrationMethod m);

struct ClipCalibration {
    ClipHeight b;
    CalibrationMethod method = CalibrationMethod::Fixed;
    double parameter = 0.0;        // delta, r, or r_l
    double parameter_upper = 0.0;  // r_u for RadiusRange
    std::string engine = "closed-form-1d";
    std::size_t samples = 0;  // Monte Carlo sample size, 0 otherwise
    std::uint64_t seed = 0;
    double residual = 0.0;            // calibration equation at b
    double residual_tolerance = 0.0;  // 1e-8 exact backends, 3 MC standard errors otherwise
};

inline constexpr double kCalibrationTol = 1e-8;

/// Solves (1-r) E(|W|-b)_+ = r b for a magnitude law.
ClipCalibration calibrate_radius(const MagnitudeLaw& law, double r);

/// b(r) for W = M0 dY, dY ~ N(0, Delta).
ClipCalibration calibrate_b_radius(const Matrix& gain, const Matrix& delta, double r,
                                   const Engine& engine = {});

/// b(delta): E(|M0 dY| - b)_+^2 = delta * trace(Sigma_{t|t}).
ClipCalibration calibrate_b_delta(const Matrix& gain, const Matrix& delta,
                                  double sigma_filt_trace, double premium,
                                  const Engine& engine = {});

/// b for the rLS.IO residual W = (Z^{-1} - M0) dY.
ClipCalibration calibrate_b_io(const Matrix& gain, const Matrix& z, const Matrix& delta, double r,
                               const Engine& engine = {});

/// Z^{-1} for square invertible Z; UnsupportedModelError otherwise.
Matrix invert_observation(const Matrix& z);

/// rLS.AO correction: x_filt = x_pred + H_b(M0 dy). b = 0 freezes the
/// prediction. Covariances follow the classical Riccati recursion.
FilterState rls_ao_step(const FilterState& predicted, const ModelSpec& model, const Vector& y,
                        ClipHeight b);

/// rLS.IO correction: x_filt = x_pred + Z^{-1}dy - H_b(Z^{-1}dy - M0 dy).
/// b = 0 follows the observation fully.
FilterState rls_io_step(const FilterState& predicted, const ModelSpec& model, const Vector& y,
                        ClipHeight b_io);

/// The corrections x_filt - x_pred of the two steps for a given gain and
/// innovation dy; shared with filters that precompute their gain schedule.
Vector rls_ao_correction(const Matrix& gain, const Vector& dy, ClipHeight b);
Vector rls_io_correction(const Matrix& gain, const Matrix& z_inv, const Vector& dy,
                         ClipHeight b_io);

}  // namespace rkf
