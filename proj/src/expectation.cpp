#include "rkf/expectation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rkf/errors.hpp"
#include "rkf/rng.hpp"

namespace rkf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double integrate_line(const std::function<double(double)>& f) {
    using boost::math::quadrature::gauss_kronrod;
    return gauss_kronrod<double, 61>::integrate(f, -kInf, kInf, 20, 1e-13);
}

double integrate_half(const std::function<double(double)>& f, double lo) {
    using boost::math::quadrature::gauss_kronrod;
    return gauss_kronrod<double, 61>::integrate(f, lo, kInf, 20, 1e-13);
}

}  // namespace

double std_normal_pdf(double x) {
    constexpr double kInvSqrt2Pi = 0.5 * std::numbers::sqrt2 * std::numbers::inv_sqrtpi;
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

double std_normal_upper_quantile(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("quantile level must lie in (0,1)");
    return boost::math::quantile(boost::math::complement(boost::math::normal_distribution<>(), alpha));
}

MagnitudeLaw MagnitudeLaw::folded_normal(double tau) {
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw ValidationError("folded normal: bad scale");
    return MagnitudeLaw(Folded{tau});
}

MagnitudeLaw MagnitudeLaw::from_samples(std::vector<double> magnitudes) {
    if (magnitudes.empty()) throw ValidationError("magnitude sample is empty");
    std::sort(magnitudes.begin(), magnitudes.end());
    const std::size_t n = magnitudes.size();
    Sampled s;
    s.s1.assign(n + 1, 0.0);
    s.s2.assign(n + 1, 0.0);
    long double a1 = 0.0L, a2 = 0.0L;
    for (std::size_t i = n; i-- > 0;) {
        a1 += magnitudes[i];
        a2 += static_cast<long double>(magnitudes[i]) * magnitudes[i];
        s.s1[i] = static_cast<double>(a1);
        s.s2[i] = static_cast<double>(a2);
    }
    s.u = std::move(magnitudes);
    return MagnitudeLaw(std::move(s));
}

MagnitudeLaw MagnitudeLaw::from_density(std::function<double(double)> density,
                                        std::function<double(double)> magnitude) {
    return MagnitudeLaw(Quadrature{std::move(density), std::move(magnitude)});
}

double MagnitudeLaw::excess(double b) const {
    if (std::isinf(b)) return 0.0;
    return std::visit(
        [&](const auto& impl) -> double {
            using I = std::decay_t<decltype(impl)>;
            if constexpr (std::is_same_v<I, Folded>) {
                if (impl.tau == 0.0) return std::max(-b, 0.0);
                const double z = b / impl.tau;
                return 2.0 * (impl.tau * std_normal_pdf(z) - b * std_normal_cdf(-z));
            } else if constexpr (std::is_same_v<I, Sampled>) {
                const auto it = std::upper_bound(impl.u.begin(), impl.u.end(), b);
                const auto i = static_cast<std::size_t>(it - impl.u.begin());
                const double count = static_cast<double>(impl.u.size() - i);
                return (impl.s1[i] - b * count) / static_cast<double>(impl.u.size());
            } else {
                return integrate_line([&](double y) {
                    return std::max(impl.magnitude(y) - b, 0.0) * impl.density(y);
                });
            }
        },
        impl_);
}

double MagnitudeLaw::excess_sq(double b) const {
    if (std::isinf(b)) return 0.0;
    return std::visit(
        [&](const auto& impl) -> double {
            using I = std::decay_t<decltype(impl)>;
            if constexpr (std::is_same_v<I, Folded>) {
                if (impl.tau == 0.0) return b < 0.0 ? b * b : 0.0;
                const double t = impl.tau;
                const double z = b / t;
                return 2.0 * ((t * t + b * b) * std_normal_cdf(-z) - b * t * std_normal_pdf(z));
            } else if constexpr (std::is_same_v<I, Sampled>) {
                const auto it = std::upper_bound(impl.u.begin(), impl.u.end(), b);
                const auto i = static_cast<std::size_t>(it - impl.u.begin());
                const double count = static_cast<double>(impl.u.size() - i);
                const double v = impl.s2[i] - 2.0 * b * impl.s1[i] + b * b * count;
                return std::max(v, 0.0) / static_cast<double>(impl.u.size());
            } else {
                return integrate_line([&](double y) {
                    const double e = std::max(impl.magnitude(y) - b, 0.0);
                    return e * e * impl.density(y);
                });
            }
        },
        impl_);
}

double MagnitudeLaw::second_moment() const {
    return std::visit(
        [&](const auto& impl) -> double {
            using I = std::decay_t<decltype(impl)>;
            if constexpr (std::is_same_v<I, Folded>) {
                return impl.tau * impl.tau;
            } else if constexpr (std::is_same_v<I, Sampled>) {
                return impl.s2[0] / static_cast<double>(impl.u.size());
            } else {
                return integrate_line([&](double y) {
                    const double m = impl.magnitude(y);
                    return m * m * impl.density(y);
                });
            }
        },
        impl_);
}

double MagnitudeLaw::clipped_product(double b) const {
    if (std::isinf(b)) return second_moment();
    return second_moment() - excess_sq(b) - b * excess(b);
}

double MagnitudeLaw::excess_se(double b) const {
    const auto* s = std::get_if<Sampled>(&impl_);
    if (s == nullptr) return 0.0;
    const double n = static_cast<double>(s->u.size());
    const double m1 = excess(b);
    const double var = std::max(excess_sq(b) - m1 * m1, 0.0);
    return std::sqrt(var / n);
}

double MagnitudeLaw::standard_error(const std::function<double(double)>& g) const {
    const auto* s = std::get_if<Sampled>(&impl_);
    if (s == nullptr) return 0.0;
    long double m1 = 0.0L, m2 = 0.0L;
    for (double u : s->u) {
        const long double v = g(u);
        m1 += v;
        m2 += v * v;
    }
    const long double n = static_cast<long double>(s->u.size());
    m1 /= n;
    m2 /= n;
    return std::sqrt(std::max(static_cast<double>(m2 - m1 * m1), 0.0) / static_cast<double>(n));
}

double MagnitudeLaw::expect(const std::function<double(double)>& g) const {
    return std::visit(
        [&](const auto& impl) -> double {
            using I = std::decay_t<decltype(impl)>;
            if constexpr (std::is_same_v<I, Folded>) {
                if (impl.tau == 0.0) return g(0.0);
                return integrate_half(
                    [&](double u) { return 2.0 * g(u) * std_normal_pdf(u / impl.tau) / impl.tau; },
                    0.0);
            } else if constexpr (std::is_same_v<I, Sampled>) {
                long double acc = 0.0L;
                for (double u : impl.u) acc += g(u);
                return static_cast<double>(acc / static_cast<long double>(impl.u.size()));
            } else {
                return integrate_line(
                    [&](double y) { return g(impl.magnitude(y)) * impl.density(y); });
            }
        },
        impl_);
}

std::string MagnitudeLaw::descriptor() const {
    if (std::holds_alternative<Folded>(impl_)) return "closed-form-1d";
    if (std::holds_alternative<Sampled>(impl_)) return "monte-carlo";
    return "quadrature-1d";
}

bool MagnitudeLaw::is_monte_carlo() const { return std::holds_alternative<Sampled>(impl_); }

std::size_t MagnitudeLaw::sample_size() const {
    const auto* s = std::get_if<Sampled>(&impl_);
    return s ? s->u.size() : 0;
}

MagnitudeLaw gaussian_magnitude(const Matrix& a, const Matrix& cov, const Engine& engine) {
    if (a.cols() != cov.rows()) throw ValidationError("gaussian_magnitude: dimension mismatch");
    const Matrix s = symmetrized(a * cov * a.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
    const Vector ev = es.eigenvalues();
    const double top = ev.size() ? std::max(ev.maxCoeff(), 0.0) : 0.0;
    int rank = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev(i) > kPinvRelTol * top && ev(i) > 0.0) ++rank;
    if (rank <= 1 && !engine.force_monte_carlo) return MagnitudeLaw::folded_normal(std::sqrt(top));

    if (engine.samples < 2) throw ValidationError("Monte Carlo engine needs at least 2 samples");
    Rng rng(derive_seed(engine.seed, Stream::MonteCarlo));
    const Matrix factor = a * psd_factor(cov);
    std::vector<double> u;
    u.reserve(engine.samples);
    for (std::size_t i = 0; i < engine.samples; ++i)
        u.push_back((factor * rng.standard_normal(factor.cols())).norm());
    return MagnitudeLaw::from_samples(std::move(u));
}

RootResult solve_decreasing(const std::function<double(double)>& f, double rel_tol) {
    RootResult res;
    double lo = kRootLower;
    const double flo = f(lo);
    if (!(flo > 0.0)) {
        if (flo == 0.0) return {lo, 0.0, 0};
        throw NumericalError("root bracket: function not positive at the lower bracket");
    }
    double hi = 1.0;
    double fhi = f(hi);
    while (fhi > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > kRootUpperCap)
            throw NumericalError("root bracket: no sign change below the upper cap");
        fhi = f(hi);
    }
    if (fhi == 0.0) return {hi, 0.0, 0};
    for (res.iterations = 0; res.iterations < 2000; ++res.iterations) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = f(mid);
        if (fm == 0.0) {
            lo = hi = mid;
            break;
        }
        (fm > 0.0 ? lo : hi) = mid;
        if (hi - lo <= rel_tol * hi) break;
    }
    res.x = 0.5 * (lo + hi);
    res.value = f(res.x);
    return res;
}

}  // namespace rkf
