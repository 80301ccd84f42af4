#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "rkf/linalg.hpp"

namespace rkf {

/// How ideal-model expectations are evaluated when no closed form applies.
struct Engine {
    std::size_t samples = 100000;  // Monte Carlo sample size
    std::uint64_t seed = 0;
    bool force_monte_carlo = false;
};

/// Law of a nonnegative magnitude U = |W|, exposing the truncated moments the
/// calibration and saddle-point equations are built from.
///
/// Three backends:
///   - closed form: W one-dimensional Gaussian N(0, tau^2) (folded normal);
///   - quadrature:  U = m(Y) for a scalar Y with a known density;
///   - Monte Carlo: a fixed sample of U (common random numbers, so every
///                  evaluation is deterministic and monotone in b).
class MagnitudeLaw {
public:
    static MagnitudeLaw folded_normal(double tau);
    static MagnitudeLaw from_samples(std::vector<double> magnitudes);
    static MagnitudeLaw from_density(std::function<double(double)> density,
                                     std::function<double(double)> magnitude);

    /// E (U - b)_+
    double excess(double b) const;
    /// E (U - b)_+^2
    double excess_sq(double b) const;
    /// E U^2
    double second_moment() const;
    /// E [U min(U, b)] = E U^2 - E (U-b)_+^2 - b E (U-b)_+
    double clipped_product(double b) const;
    /// Monte Carlo standard error of excess(b); zero for deterministic backends.
    double excess_se(double b) const;
    /// Monte Carlo standard error of the sample mean of g(U); zero otherwise.
    double standard_error(const std::function<double(double)>& g) const;
    /// E g(U) for a user integrand (quadrature / sample mean / closed form via
    /// 1-d quadrature of the folded density).
    double expect(const std::function<double(double)>& g) const;

    /// "closed-form-1d", "quadrature-1d" or "monte-carlo".
    std::string descriptor() const;
    bool is_monte_carlo() const;
    std::size_t sample_size() const;

private:
    struct Folded {
        double tau;
    };
    struct Sampled {
        std::vector<double> u;   // ascending
        std::vector<double> s1;  // s1[i] = sum_{j>=i} u_j
        std::vector<double> s2;  // s2[i] = sum_{j>=i} u_j^2
    };
    struct Quadrature {
        std::function<double(double)> density;
        std::function<double(double)> magnitude;
    };
    explicit MagnitudeLaw(std::variant<Folded, Sampled, Quadrature> impl)
        : impl_(std::move(impl)) {}

    std::variant<Folded, Sampled, Quadrature> impl_;
};

/// Law of |A Y| for Y ~ N(0, cov). Exact (folded normal) when A cov A^T has
/// rank <= 1, otherwise a seeded Monte Carlo sample of engine.samples draws.
MagnitudeLaw gaussian_magnitude(const Matrix& a, const Matrix& cov, const Engine& engine);

/// Standard normal density and distribution function.
double std_normal_pdf(double x);
double std_normal_cdf(double x);
/// Upper alpha quantile u_alpha of N(0,1).
double std_normal_upper_quantile(double alpha);

// Bisection on (0, inf) for a function that is positive at the lower bracket
// and decreasing. Lower bracket kRootLower; upper bracket doubled from 1 until
// a sign change, capped at kRootUpperCap.
inline constexpr double kRootLower = 1e-12;
inline constexpr double kRootUpperCap = 1e12;
inline constexpr double kRootRelTol = 1e-12;

struct RootResult {
    double x = 0.0;
    double value = 0.0;  // f(x)
    int iterations = 0;
};

RootResult solve_decreasing(const std::function<double(double)>& f,
                            double rel_tol = kRootRelTol);

}  // namespace rkf
