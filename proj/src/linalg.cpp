#include "rkf/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rkf/errors.hpp"

namespace rkf {

bool is_symmetric(const Matrix& a, double rel_tol) {
    if (a.rows() != a.cols()) return false;
    if (rel_tol == 0.0) return a == a.transpose();
    const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
    return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

bool is_psd(const Matrix& a, bool exact_symmetry) {
    if (!is_symmetric(a, exact_symmetry ? 0.0 : 1e-9)) return false;
    if (a.size() == 0) return true;
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(a), Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const double hi = ev.maxCoeff();
    const double lo = ev.minCoeff();
    return lo >= -kPsdRelTol * std::max(hi, 0.0);
}

void require_psd(const Matrix& a, const char* what) {
    if (a.rows() != a.cols())
        throw ValidationError(std::string(what) + ": matrix is not square");
    if (!is_symmetric(a))
        throw ValidationError(std::string(what) + ": matrix is not symmetric");
    if (!is_psd(a))
        throw ValidationError(std::string(what) + ": matrix is not positive semi-definite");
}

Matrix pinv_psd(const Matrix& a) {
    if (!is_symmetric(a, 1e-9))
        throw ValidationError("pinv_psd: input is not symmetric");
    const Eigen::Index n = a.rows();
    if (n == 0) return a;
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(a));
    const Vector& ev = es.eigenvalues();
    const double cut = kPinvRelTol * std::max(ev.maxCoeff(), 0.0);
    Vector inv = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
        if (ev(i) > cut && ev(i) > 0.0) inv(i) = 1.0 / ev(i);
    const Matrix& u = es.eigenvectors();
    return symmetrized(u * inv.asDiagonal() * u.transpose());
}

Matrix psd_factor(const Matrix& a) {
    if (a.size() == 0) return a;
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(a));
    Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal();
}

}  // namespace rkf
