#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rkf/expectation.hpp"
#include "rkf/kalman.hpp"
#include "rkf/linalg.hpp"
#include "rkf/rls.hpp"
#include "rkf/rng.hpp"

namespace rkf {

/// X ~ N(mean_x, sigma_x), Y = Z X + eps, eps ~ N(0, V) independent of X.
struct GaussianLinearIdeal {
    Matrix sigma_x;
    Matrix z;
    Matrix v;
    Vector mean_x;
};

/// Ideal pair given only through evaluators. The library never estimates
/// E[X|Y] itself.
struct GenericIdeal {
    Eigen::Index p = 0;
    Eigen::Index q = 0;
    Vector mean_x;
    double trace_cov_x = 0.0;
    std::function<Vector(const Vector&)> cond_mean;                 // y -> E_id[X | Y = y]
    std::function<std::pair<Vector, Vector>(Rng&)> sample;         // draw (X, Y)
    std::function<double(double)> density_y;                        // q == 1, optional
    std::optional<double> cond_var_term;                            // E trace Cov(X|Y) if known
    bool additive = false;                                          // Y = X + eps
};

/// Which residual the saddle point is built on: D(y) = E[X|Y=y] - EX for
/// attenuation (AO/SO), D~(y) = y - E[X|Y=y] for tracking (IO).
enum class SaddleKind { Attenuation, Tracking };

class IdealPair {
public:
    static IdealPair gaussian_linear(Matrix sigma_x, Matrix z, Matrix v, Vector mean_x = {});
    /// Prediction-error pair (dX, dY) of a Kalman step: dX ~ N(0, Sigma_{t|t-1}).
    static IdealPair from_filter_state(const FilterState& predicted, const ModelSpec& model);
    static IdealPair generic(GenericIdeal g);

    Eigen::Index p() const;
    Eigen::Index q() const;
    Vector mean_x() const;
    double trace_cov_x() const;
    /// E |X|^2
    double second_moment_x() const { return trace_cov_x() + mean_x().squaredNorm(); }
    /// E_id[trace Cov(X|Y)]
    double cond_var_term(const Engine& engine = {}) const;
    /// trace Cov(eps) in tracking coordinates (Z^{-1} eps for Gaussian-linear).
    double trace_cov_noise(const Engine& engine = {}) const;

    Vector residual(const Vector& y, SaddleKind kind = SaddleKind::Attenuation) const;
    /// Law of |D(Y)| (or |D~(Y)|) under the ideal model.
    MagnitudeLaw magnitude_law(const Engine& engine = {},
                               SaddleKind kind = SaddleKind::Attenuation) const;
    /// Ideal marginal density of Y (q == 1 only).
    double density_y(double y) const;
    /// Draw Y from the ideal marginal.
    Vector sample_y(Rng& rng) const;
    /// Draw (X, Y) from the ideal joint law.
    std::pair<Vector, Vector> sample_xy(Rng& rng) const;

    const GaussianLinearIdeal* gaussian() const { return std::get_if<GaussianLinearIdeal>(&impl_); }
    Matrix gain() const;  // M0 (Gaussian-linear only)

private:
    explicit IdealPair(std::variant<GaussianLinearIdeal, GenericIdeal> impl)
        : impl_(std::move(impl)) {}
    Matrix residual_map(SaddleKind kind) const;  // Gaussian-linear: D(y) = map (y - Z mean)

    std::variant<GaussianLinearIdeal, GenericIdeal> impl_;
};

struct SaddlePoint {
    double r = 0.0;
    double rho = 0.0;
    double risk = 0.0;
    double normalization_residual = 0.0;
    SaddleKind kind = SaddleKind::Attenuation;
    std::string engine;
};

/// rho with (1-r)/r E(|D(Y)|/rho - 1)_+ = 1, and the minimax risk
/// trace Cov X - (1-r) E[|D|^2 w_r]. Requires 0 < r < 1.
SaddlePoint solve_rho(const IdealPair& ideal, double r, const Engine& engine = {});

/// The IO counterpart, built on D~(y) = y - E[X|Y=y]. Requires additive
/// structure (generic) or square invertible Z (Gaussian-linear).
SaddlePoint io_saddle(const IdealPair& ideal, double r, const Engine& engine = {});

/// The saddle-point procedure f0(y) = EX + H_rho(D(y)) (attenuation) or
/// f1(y) = Z^{-1}y - H_rho(D~(y)) (tracking; y in original coordinates).
Vector saddle_procedure(const IdealPair& ideal, const SaddlePoint& sp, const Vector& y);

struct DensityWeight {
    double di_weight = 0.0;           // dP0^di / dP^id
    double re_density_factor = 0.0;   // dP0^re / dP^id = (1-r) + r di_weight
};

DensityWeight lf_density_weight(const Vector& y, const SaddlePoint& sp, const IdealPair& ideal);

struct DensityPoint {
    double y, p_id, p_re, p_di;
};
/// Ideal, least-favorable contaminated and contaminating densities on a grid
/// (q == 1).
std::vector<DensityPoint> density_trace(const IdealPair& ideal, const SaddlePoint& sp, double lo,
                                        double hi, std::size_t points);

/// Exact sampler for the least-favorable contaminating law P0^di
/// (Gaussian-linear ideal only). Rejection from the proposal
/// (rho^2 + |D|^2) p_id(y), which is a mixture of the ideal law and its
/// |D|^2-size-biased version.
class LeastFavorableSampler {
public:
    LeastFavorableSampler(const IdealPair& ideal, const SaddlePoint& sp);
    Vector draw(Rng& rng) const;
    /// Average proposals per accepted draw, for diagnostics.
    double expected_proposals() const;

private:
    Vector center_;
    Matrix basis_;       // Y = center + basis * H, H ~ N(0, I)
    Vector lambda_;      // |D|^2 = sum lambda_i H_i^2
    Vector cumulative_;  // cumulative lambda weights
    double rho_ = 0.0;
    double r_ = 0.0;
    double plain_weight_ = 0.0;
};

/// Contaminating law for the risk evaluation: point mass or an empirical sample.
using RiskContamination = std::variant<Vector, std::vector<Vector>>;

struct RiskValue {
    double value = 0.0;
    double standard_error = 0.0;
};

/// MSE of the clipped procedure EX + H_b(D(y)) under SO contamination with
/// radius r by `contamination`:
///   (1-r) E_id|X - f(Y)|^2 + r trace Cov X + r E_P min(|D|^2, b^2).
RiskValue risk_under_contamination(const IdealPair& ideal, ClipHeight b,
                                   const RiskContamination& contamination, double r,
                                   const Engine& engine = {});

/// Minimax risk on the extended SO neighborhood with X second-moment bound G.
double minimax_risk_eso(const IdealPair& ideal, double r, double G, const Engine& engine = {});

/// A_r = E[trace Cov(X|Y)] + E(|D| - b(r))_+^2
double lfr_A(double r, const IdealPair& ideal, const Engine& engine = {});
/// B_r = E|D|^2 - E(|D| - b(r))_+^2 + b(r)^2   (+inf at r = 0)
double lfr_B(double r, const IdealPair& ideal, const Engine& engine = {});

struct RadiusSolution {
    double r_l = 0.0;
    double r_u = 0.0;
    double r0 = 0.0;
    double rho0_at_r0 = 0.0;
    double crossing_residual = 0.0;  // A_r0/A_rl - B_r0/B_ru (0 when r_u = 1)
    ClipHeight b_at_r0;
    std::vector<double> grid;
    std::vector<double> A_table;
    std::vector<double> B_table;
    std::vector<double> rho0_table;
};

RadiusSolution solve_least_favorable_radius(double r_l, double r_u, const IdealPair& ideal,
                                            const Engine& engine = {});

}  // namespace rkf
