#include "rkf/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rkf/errors.hpp"
#include "rkf/expectation.hpp"

namespace rkf {

double LinTestResult::standardized() const {
    return std::sqrt(static_cast<double>(n)) * statistic /
           (std::sqrt(15.0) * sigma_hat * sigma_hat * sigma_hat);
}

LinTestResult linearity_test(const Matrix& sample, double alpha) {
    const Eigen::Index n = sample.rows();
    const Eigen::Index p = sample.cols();
    if (n < 10) throw ValidationError("linearity_test: need at least 10 observations");
    if (p < 1) throw ValidationError("linearity_test: need at least one column");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("linearity_test: alpha must lie in (0,1)");

    const Eigen::RowVectorXd mean = sample.colwise().mean();
    const Matrix centered = sample.rowwise() - mean;
    const Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(cov));
    const double top = es.eigenvalues()(p - 1);
    if (!(top > 0.0)) throw NumericalError("linearity_test: degenerate sample (zero covariance)");

    LinTestResult res;
    res.n = static_cast<std::size_t>(n);
    res.alpha = alpha;
    res.sigma_hat = std::sqrt(top);
    res.e_hat = es.eigenvectors().col(p - 1).normalized();
    for (Eigen::Index i = 0; i < p; ++i) {
        if (res.e_hat(i) != 0.0) {
            if (res.e_hat(i) < 0.0) res.e_hat = -res.e_hat;
            break;
        }
    }
    const Vector proj = sample * res.e_hat;
    res.statistic = proj.array().cube().mean();
    res.critical = std::sqrt(15.0 / static_cast<double>(n)) * top * res.sigma_hat *
                   std_normal_upper_quantile(alpha / 2.0);
    res.reject = std::abs(res.statistic) > res.critical;
    return res;
}

std::vector<double> symmetric_grid(double half_width, double step) {
    if (!(half_width > 0.0 && step > 0.0)) throw ValidationError("grid: bad width or step");
    const auto k = static_cast<long>(std::floor(half_width / step + 1e-9));
    std::vector<double> g;
    for (long i = -k; i <= k; ++i) g.push_back(static_cast<double>(i) * step);
    return g;
}

DominationResult eso_domination_probe(const Matrix& sample, const Matrix& sigma, double r,
                                      const std::vector<double>& grid) {
    if (sample.cols() != 1 || sigma.rows() != 1 || sigma.cols() != 1)
        throw UnsupportedModelError("eso_domination_probe: only p = 1 is supported");
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("radius r must lie in [0, 1]");
    if (!(sigma(0, 0) > 0.0)) throw ValidationError("reference variance must be positive");
    const Eigen::Index n = sample.rows();
    if (n < 2) throw ValidationError("eso_domination_probe: need at least 2 observations");
    if (grid.empty()) throw ValidationError("eso_domination_probe: empty grid");

    std::vector<double> x(sample.data(), sample.data() + n);
    std::sort(x.begin(), x.end());
    const double nn = static_cast<double>(n);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= nn;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (nn - 1.0));
    const auto quantile = [&](double q) {
        const double pos = q * (nn - 1.0);
        const auto i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        return i + 1 < x.size() ? x[i] * (1.0 - frac) + x[i + 1] * frac : x[i];
    };
    const double iqr = quantile(0.75) - quantile(0.25);
    const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    if (!(spread > 0.0)) throw NumericalError("eso_domination_probe: degenerate sample");

    DominationResult res;
    res.bandwidth = 0.9 * spread * std::pow(nn, -0.2);
    const double h = res.bandwidth;
    const double ref_sd = std::sqrt(sigma(0, 0));
    res.grid = grid;
    res.margin = std::numeric_limits<double>::infinity();
    res.holds = true;
    // Kernel mass beyond 9 bandwidths is below 1e-17 of the peak.
    const double reach = 9.0 * h;
    for (double g : grid) {
        const auto lo = std::lower_bound(x.begin(), x.end(), g - reach);
        const auto hi = std::upper_bound(x.begin(), x.end(), g + reach);
        long double m1 = 0.0L, m2 = 0.0L;
        for (auto it = lo; it != hi; ++it) {
            const long double k = std_normal_pdf((g - *it) / h) / h;
            m1 += k;
            m2 += k * k;
        }
        m1 /= nn;
        m2 /= nn;
        const double est = static_cast<double>(m1);
        // Standard error of a mean of i.i.d. kernel evaluations (the large-B
        // limit of the nonparametric bootstrap standard error).
        // Floored at the mass of one observation's kernel peak, so grid points
        // the sample never reaches are not read as exact zeros.
        const double se = std::max(std::sqrt(std::max(static_cast<double>(m2 - m1 * m1), 0.0) / nn),
                                   std_normal_pdf(0.0) / (h * nn));
        const double bound = (1.0 - r) * std_normal_pdf(g / ref_sd) / ref_sd;
        res.kde.push_back(est);
        res.kde_se.push_back(se);
        res.bound.push_back(bound);
        res.margin = std::min(res.margin, est - bound);
        if (est - bound < -3.0 * se) res.holds = false;
    }
    return res;
}

NormalityResult normality_probe(const std::vector<double>& sample,
                                std::optional<Reference> reference) {
    const std::size_t n = sample.size();
    if (n < 100) throw ValidationError("normality_probe: need at least 100 observations");
    Reference ref;
    if (reference) {
        ref = *reference;
    } else {
        long double m = 0.0L;
        for (double v : sample) m += v;
        m /= static_cast<long double>(n);
        long double ss = 0.0L;
        for (double v : sample) ss += (v - m) * (v - m);
        ref.mean = static_cast<double>(m);
        ref.variance = static_cast<double>(ss / static_cast<long double>(n - 1));
    }
    if (!(ref.variance > 0.0)) throw NumericalError("normality_probe: zero variance");
    const double sd = std::sqrt(ref.variance);
    std::vector<double> z(sample.size());
    std::transform(sample.begin(), sample.end(), z.begin(),
                   [&](double v) { return (v - ref.mean) / sd; });
    std::sort(z.begin(), z.end());
    const double nn = static_cast<double>(n);
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = std_normal_cdf(z[i]);
        d = std::max({d, static_cast<double>(i + 1) / nn - f, f - static_cast<double>(i) / nn});
    }
    NormalityResult res;
    res.ks_distance = d;
    res.critical = 1.628 / std::sqrt(nn);
    res.reject_at_001 = d > res.critical;
    return res;
}

}  // namespace rkf
