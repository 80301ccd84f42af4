#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "rkf/linalg.hpp"

namespace rkf {

/// Third-moment test for linearity of the ideal conditional mean (equivalently
/// normality of the prediction error) along the top principal direction.
struct LinTestResult {
    std::size_t n = 0;
    double statistic = 0.0;   // T_n = mean (e^T x_i)^3
    double sigma_hat = 0.0;   // sqrt of the largest eigenvalue of the sample covariance
    Vector e_hat;             // unit eigenvector, first nonzero component positive
    double alpha = 0.05;
    double critical = 0.0;    // sqrt(15/n) sigma_hat^3 u_{alpha/2}
    bool reject = false;

    /// sqrt(n) T_n / (sqrt(15) sigma_hat^3), asymptotically N(0,1) under normality.
    double standardized() const;
};

/// `sample` is n x p, one draw of the prediction error per row.
LinTestResult linearity_test(const Matrix& sample, double alpha);

struct DominationResult {
    bool holds = false;
    double margin = 0.0;     // min over the grid of p_hat(x) - (1-r) phi(x)
    double bandwidth = 0.0;  // Silverman's rule
    std::vector<double> grid;
    std::vector<double> kde;
    std::vector<double> bound;  // (1-r) phi(x)
    std::vector<double> kde_se;
};

/// Checks (1-r) phi_Sigma(x) <= p_hat(x) on the grid, p_hat a Gaussian-kernel
/// density estimate of the one-dimensional sample. A grid point fails only if
/// the shortfall exceeds 3 standard errors of p_hat(x).
DominationResult eso_domination_probe(const Matrix& sample, const Matrix& sigma, double r,
                                      const std::vector<double>& grid);

/// Grid [-half_width, half_width] with the given step.
std::vector<double> symmetric_grid(double half_width, double step);

struct NormalityResult {
    double ks_distance = 0.0;
    double critical = 0.0;  // 1.628 / sqrt(n)
    bool reject_at_001 = false;
};

struct Reference {
    double mean = 0.0;
    double variance = 1.0;
};

/// One-sample Kolmogorov-Smirnov distance of the standardized sample against
/// N(0,1). Without a reference the sample mean and variance are used.
NormalityResult normality_probe(const std::vector<double>& sample,
                                std::optional<Reference> reference = std::nullopt);

}  // namespace rkf
