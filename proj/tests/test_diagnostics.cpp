#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "oracle.hpp"
#include "rkf/diagnostics.hpp"
#include "rkf/errors.hpp"
#include "rkf/experiment.hpp"
#include "rkf/rng.hpp"

using namespace rkf;

namespace {

Matrix gaussian_sample(Rng& rng, Eigen::Index n, Eigen::Index p) {
    Matrix s(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < p; ++k) s(i, k) = rng.normal();
    return s;
}

// rLS.AO errors x_T - xhat_T over n replications of the steady-state scalar
// unit model with constant b.
Matrix rls_errors(double r, std::size_t n, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.model = steady_unit_model();
    cfg.horizon = 20;
    cfg.replications = n;
    cfg.seed = seed;
    FilterConfig f;
    f.name = "rls";
    f.kind = FilterKind::RlsAo;
    f.calibration.method = CalibrationMethod::Radius;
    f.calibration.parameter = r;
    const FilterSchedule sched = build_schedule(cfg.model, f, cfg.horizon, 0);
    Matrix e(static_cast<Eigen::Index>(n), 1);
    for (std::size_t i = 0; i < n; ++i) {
        const Trajectory tr = simulate_ideal(cfg.model, cfg.horizon, derive_seed(seed, Stream::Replication, i));
        const auto xs = run_filter(cfg.model, sched, tr.y);
        e(static_cast<Eigen::Index>(i), 0) = tr.x.back()(0) - xs.back()(0);
    }
    return e;
}

}  // namespace

TEST_CASE("linearity test on a sample symmetric under negation") {
    Rng rng(1);
    const Matrix half = gaussian_sample(rng, 100, 3);
    Matrix s(200, 3);
    s << half, -half;
    const LinTestResult r = linearity_test(s, 0.05);
    CHECK(std::abs(r.statistic) < 1e-14);
    CHECK_FALSE(r.reject);
    CHECK(std::abs(r.e_hat.norm() - 1.0) < 1e-12);
    CHECK(r.sigma_hat > 0.0);
}

TEST_CASE("linearity statistic is odd and rotation invariant in magnitude") {
    Rng rng(2);
    Matrix s = gaussian_sample(rng, 300, 2);
    for (Eigen::Index i = 0; i < s.rows(); ++i) s(i, 0) = 2.0 * s(i, 0) + 0.3 * s(i, 0) * s(i, 0);
    const LinTestResult a = linearity_test(s, 0.05);
    const LinTestResult neg = linearity_test(-s, 0.05);
    CHECK(neg.statistic == doctest::Approx(-a.statistic).epsilon(1e-12));
    const double th = 0.7;
    Matrix rot(2, 2);
    rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    const LinTestResult rotated = linearity_test(s * rot.transpose(), 0.05);
    CHECK(std::abs(rotated.statistic) == doctest::Approx(std::abs(a.statistic)).epsilon(1e-9));
    CHECK(rotated.sigma_hat == doctest::Approx(a.sigma_hat).epsilon(1e-12));
    CHECK(a.critical == doctest::Approx(std::sqrt(15.0 / 300.0) * std::pow(a.sigma_hat, 3) *
                                        std_normal_upper_quantile(0.025)));
    CHECK(a.reject == (std::abs(a.statistic) > a.critical));
}

TEST_CASE("linearity test rejects skewed samples and validates input") {
    Rng rng(3);
    Matrix s(500, 1);
    for (Eigen::Index i = 0; i < 500; ++i) s(i, 0) = rng.exponential() - 1.0;
    CHECK(linearity_test(s, 0.05).reject);
    CHECK_THROWS_AS(linearity_test(Matrix::Zero(20, 2), 0.05), NumericalError);
    CHECK_THROWS_AS(linearity_test(Matrix::Ones(5, 1), 0.05), ValidationError);
    CHECK_THROWS_AS(linearity_test(s, 1.5), ValidationError);
}

TEST_CASE("linearity test level under normality") {
    Rng rng(4);
    int rejections = 0;
    for (int rep = 0; rep < 400; ++rep)
        rejections += linearity_test(gaussian_sample(rng, 500, 2), 0.05).reject ? 1 : 0;
    const double rate = rejections / 400.0;
    CHECK(rate > 0.02);
    CHECK(rate < 0.09);
}

TEST_CASE("normality probe") {
    Rng rng(5);
    std::vector<double> u(10000);
    for (auto& v : u) v = 2.0 * rng.uniform() - 1.0;
    const NormalityResult res = normality_probe(u);
    CHECK(res.reject_at_001);
    CHECK(res.critical == doctest::Approx(1.628 / 100.0));

    int rejections = 0;
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> z(100000);
        for (auto& v : z) v = rng.normal();
        rejections += normality_probe(z, Reference{0.0, 1.0}).reject_at_001 ? 1 : 0;
    }
    CHECK(rejections <= 5);

    CHECK_THROWS_AS(normality_probe(std::vector<double>(50, 1.0)), ValidationError);
    CHECK_THROWS_AS(normality_probe(std::vector<double>(200, 1.0)), NumericalError);
}

TEST_CASE("eSO domination probe") {
    Rng rng(6);
    const double sigma2 = 2.0;
    Matrix s = gaussian_sample(rng, 20000, 1) * std::sqrt(sigma2);
    const Matrix sig = Matrix::Constant(1, 1, sigma2);
    const auto grid = symmetric_grid(6.0 * std::sqrt(sigma2), std::sqrt(sigma2) / 20.0);
    CHECK(grid.size() == 241);

    const DominationResult self = eso_domination_probe(s, sig, 0.1, grid);
    CHECK(self.holds);
    CHECK(self.margin >= -3.0 * *std::max_element(self.kde_se.begin(), self.kde_se.end()));

    Matrix uni(20000, 1);
    for (Eigen::Index i = 0; i < uni.rows(); ++i) uni(i, 0) = 2.0 * std::sqrt(6.0) * (rng.uniform() - 0.5);
    CHECK_FALSE(eso_domination_probe(uni, sig, 0.0, grid).holds);

    CHECK_THROWS_AS(eso_domination_probe(Matrix::Ones(100, 2), Matrix::Identity(2, 2), 0.1, grid),
                    UnsupportedModelError);
}

TEST_CASE("rLS filter errors: domination holds at b(0.1), normality rejected at b(0.5)") {
    const double sf = oracle::kPhi - 1.0;
    const Matrix e01 = rls_errors(0.1, 100000, 31);
    const DominationResult dom =
        eso_domination_probe(e01, Matrix::Constant(1, 1, sf), 0.1, symmetric_grid(6.0 * std::sqrt(sf), std::sqrt(sf) / 20.0));
    MESSAGE("domination margin at b(0.1): " << dom.margin);
    CHECK(dom.holds);

    const Matrix e05 = rls_errors(0.5, 100000, 32);
    const NormalityResult nr = normality_probe(std::vector<double>(e05.data(), e05.data() + e05.size()));
    MESSAGE("KS distance at b(0.5): " << nr.ks_distance);
    CHECK(nr.reject_at_001);
    CHECK(nr.ks_distance > 0.03);
}
