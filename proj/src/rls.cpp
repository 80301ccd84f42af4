#include "rkf/rls.hpp"

#include <algorithm>
#include <cmath>

#include "rkf/errors.hpp"

namespace rkf {

ClipHeight::ClipHeight(double b) : value_(b) {
    if (std::isnan(b) || b < 0.0) throw ValidationError("clipping height must be >= 0 or +inf");
}

Vector huberize(const Vector& w, ClipHeight b) {
    if (b.is_unbounded()) return w;
    if (!(b.value() > 0.0)) throw ValidationError("huberize: clipping height must be positive");
    const double norm = w.norm();
    if (norm <= b.value()) return w;
    return w * (b.value() / norm);
}

namespace {

// H_b that also accepts b = 0 (the zero map), as the filter steps do.
Vector clip(const Vector& w, ClipHeight b) {
    if (!b.is_unbounded() && b.value() == 0.0) return Vector::Zero(w.size());
    return huberize(w, b);
}

void check_radius(double r) {
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("radius r must lie in [0, 1]");
}

void fill_engine(ClipCalibration& c, const MagnitudeLaw& law) {
    c.engine = law.descriptor();
    c.samples = law.sample_size();
}

}  // namespace

const char* to_string(CalibrationMethod m) {
    switch (m) {
        case CalibrationMethod::Delta: return "delta";
        case CalibrationMethod::Radius: return "radius";
        case CalibrationMethod::RadiusRange: return "radius-range";
        case CalibrationMethod::Fixed: return "fixed";
    }
    return "?";
}

ClipCalibration calibrate_radius(const MagnitudeLaw& law, double r) {
    check_radius(r);
    ClipCalibration c;
    c.method = CalibrationMethod::Radius;
    c.parameter = r;
    fill_engine(c, law);
    c.residual_tolerance = kCalibrationTol;
    if (r == 0.0) {
        c.b = ClipHeight::unbounded();
        return c;
    }
    if (r == 1.0) {
        c.b = ClipHeight(0.0);
        return c;
    }
    const auto f = [&](double b) { return (1.0 - r) * law.excess(b) - r * b; };
    const RootResult root = solve_decreasing(f);
    c.b = ClipHeight(root.x);
    c.residual = root.value;
    if (law.is_monte_carlo())
        c.residual_tolerance = std::max(3.0 * (1.0 - r) * law.excess_se(root.x), kCalibrationTol);
    if (!(std::abs(c.residual) <= c.residual_tolerance))
        throw NumericalError("calibrate_b_radius: residual above tolerance");
    return c;
}

ClipCalibration calibrate_b_radius(const Matrix& gain, const Matrix& delta, double r,
                                   const Engine& engine) {
    check_radius(r);
    require_psd(delta, "Delta");
    ClipCalibration c = calibrate_radius(gaussian_magnitude(gain, delta, engine), r);
    c.seed = engine.seed;
    return c;
}

ClipCalibration calibrate_b_delta(const Matrix& gain, const Matrix& delta,
                                  double sigma_filt_trace, double premium,
                                  const Engine& engine) {
    if (!(premium >= 0.0)) throw ValidationError("efficiency premium delta must be >= 0");
    if (!(sigma_filt_trace >= 0.0)) throw ValidationError("trace(Sigma_filt) must be >= 0");
    require_psd(delta, "Delta");
    const MagnitudeLaw law = gaussian_magnitude(gain, delta, engine);
    ClipCalibration c;
    c.method = CalibrationMethod::Delta;
    c.parameter = premium;
    c.seed = engine.seed;
    fill_engine(c, law);
    c.residual_tolerance = kCalibrationTol;
    if (premium == 0.0) {
        c.b = ClipHeight::unbounded();
        return c;
    }
    const double target = premium * sigma_filt_trace;
    if (target >= law.second_moment())
        throw NumericalError(
            "calibrate_b_delta: premium exceeds the loss of the zero correction; no b > 0 attains it");
    const auto f = [&](double b) { return law.excess_sq(b) - target; };
    const RootResult root = solve_decreasing(f);
    c.b = ClipHeight(root.x);
    c.residual = root.value;
    if (law.is_monte_carlo()) {
        const double b = root.x;
        const double se = law.standard_error([b](double u) {
            const double e = std::max(u - b, 0.0);
            return e * e;
        });
        c.residual_tolerance = std::max(3.0 * se, kCalibrationTol);
    }
    if (!(std::abs(c.residual) <= c.residual_tolerance))
        throw NumericalError("calibrate_b_delta: residual above tolerance");
    return c;
}

Matrix invert_observation(const Matrix& z) {
    if (z.rows() != z.cols())
        throw UnsupportedModelError("rLS.IO requires p == q (square observation matrix)");
    Eigen::FullPivLU<Matrix> lu(z);
    if (!lu.isInvertible())
        throw UnsupportedModelError("rLS.IO requires an invertible observation matrix Z");
    return lu.inverse();
}

ClipCalibration calibrate_b_io(const Matrix& gain, const Matrix& z, const Matrix& delta, double r,
                               const Engine& engine) {
    check_radius(r);
    require_psd(delta, "Delta");
    const Matrix residual_map = invert_observation(z) - gain;
    ClipCalibration c = calibrate_radius(gaussian_magnitude(residual_map, delta, engine), r);
    c.seed = engine.seed;
    return c;
}

FilterState rls_ao_step(const FilterState& predicted, const ModelSpec& model, const Vector& y,
                        ClipHeight b) {
    FilterState s = kf_gain(predicted, model);
    s.x_filt = s.x_pred + rls_ao_correction(s.gain, innovation(s, model, y), b);
    return s;
}

FilterState rls_io_step(const FilterState& predicted, const ModelSpec& model, const Vector& y,
                        ClipHeight b_io) {
    const Matrix z_inv = invert_observation(model.z(predicted.t));
    FilterState s = kf_gain(predicted, model);
    s.x_filt = s.x_pred + rls_io_correction(s.gain, z_inv, innovation(s, model, y), b_io);
    return s;
}

Vector rls_ao_correction(const Matrix& gain, const Vector& dy, ClipHeight b) {
    return clip(gain * dy, b);
}

Vector rls_io_correction(const Matrix& gain, const Matrix& z_inv, const Vector& dy,
                         ClipHeight b_io) {
    if (b_io.is_unbounded()) return gain * dy;
    const Vector tracked = z_inv * dy;
    return tracked - clip(tracked - gain * dy, b_io);
}

}  // namespace rkf
