#pragma once

#include <Eigen/Dense>

namespace rkf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Eigenvalues below kPinvRelTol * lambda_max are treated as zero.
inline constexpr double kPinvRelTol = 1e-12;
// Minimum eigenvalue allowed for a PSD matrix, relative to the largest.
inline constexpr double kPsdRelTol = 1e-10;

/// Moore-Penrose inverse of a symmetric PSD matrix via symmetric
/// eigendecomposition. Throws ValidationError on asymmetric input.
Matrix pinv_psd(const Matrix& a);

bool is_symmetric(const Matrix& a, double rel_tol = 0.0);

/// Symmetric, and min eigenvalue >= -kPsdRelTol * max eigenvalue.
bool is_psd(const Matrix& a, bool exact_symmetry = true);

/// Throws ValidationError naming `what` unless `a` is square symmetric PSD.
void require_psd(const Matrix& a, const char* what);

/// A factor L with L * L^T == a for symmetric PSD `a` (eigen-based, so it
/// works for singular covariances where Cholesky does not).
Matrix psd_factor(const Matrix& a);

inline Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

}  // namespace rkf
