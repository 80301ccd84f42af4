#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "rkf/linalg.hpp"

namespace rkf {

/// Linear Gaussian state-space model
///
///   x_0 ~ N(a0, Q0),  x_t = F_t x_{t-1} + v_t,  v_t ~ N(0, Q_t),
///   y_t = Z_t x_t + e_t,  e_t ~ N(0, V_t),  t = 1..T.
///
/// Each of F, Z, Q, V is either a single matrix (used for every t) or a
/// sequence indexed by t = 1..len.
struct ModelSpec {
    Eigen::Index p = 0;
    Eigen::Index q = 0;
    std::vector<Matrix> F;
    std::vector<Matrix> Z;
    std::vector<Matrix> Q;
    std::vector<Matrix> V;
    Vector a0;
    Matrix Q0;

    static ModelSpec constant(Matrix f, Matrix z, Matrix q_cov, Matrix v_cov, Vector a0,
                              Matrix q0);
    /// F = Z = Q = V = Q0 = 1, a0 = 0.
    static ModelSpec scalar_unit();

    const Matrix& f(std::size_t t) const { return at(F, t); }
    const Matrix& z(std::size_t t) const { return at(Z, t); }
    const Matrix& q_cov(std::size_t t) const { return at(Q, t); }
    const Matrix& v_cov(std::size_t t) const { return at(V, t); }

    bool time_invariant() const;
    /// Largest horizon the hyper-parameter sequences cover.
    std::size_t max_horizon() const;

    /// Throws ValidationError on dimension or PSD violations.
    void validate() const;

private:
    static const Matrix& at(const std::vector<Matrix>& seq, std::size_t t);
};

enum class ContaminationKind { AO, IO, SO };

struct PointMassLaw {
    Vector value;
};
struct GaussianLaw {
    Vector mean;
    Matrix cov;
};
/// The ideal law of the replaced quantity, scaled by kappa.
struct ScaledIdealLaw {
    double kappa = 1.0;
};
using ContaminatingLaw = std::variant<PointMassLaw, GaussianLaw, ScaledIdealLaw>;

struct ContaminationSpec {
    ContaminationKind kind = ContaminationKind::SO;
    double radius = 0.0;
    ContaminatingLaw law = ScaledIdealLaw{};
    /// IO only: once hit, every later innovation is also replaced by the law
    /// (level shifts / trends).
    bool persistent = false;

    /// Checks ranges and that the law dimension matches q (AO, SO) or p (IO).
    void validate(const ModelSpec& model) const;
};

const char* to_string(ContaminationKind kind);
ContaminationKind contamination_kind_from_string(const std::string& s);

struct Trajectory {
    std::size_t T = 0;
    std::vector<Vector> x;            // x_0..x_T
    std::vector<Vector> y;            // y_1..y_T at index t-1
    std::vector<bool> hits;           // U_1..U_T at index t-1
    std::vector<Vector> state_noise;  // v_1..v_T as used in x
    std::vector<Vector> obs_noise;    // e_1..e_T as used in y (meaningless for SO hits)
    std::uint64_t seed = 0;

    const Vector& state(std::size_t t) const { return x[t]; }
    const Vector& obs(std::size_t t) const { return y[t - 1]; }
    double hit_rate() const;
};

Trajectory simulate_ideal(const ModelSpec& model, std::size_t T, std::uint64_t seed);

Trajectory contaminate(const ModelSpec& model, const Trajectory& ideal,
                       const ContaminationSpec& spec, std::uint64_t seed);

}  // namespace rkf
