#include "rkf/minimax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rkf/errors.hpp"

namespace rkf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// max over v >= 1 of (v - 1) / (1 + v^2), attained at v = 1 + sqrt(2).
constexpr double kAcceptBound = (std::numbers::sqrt2 - 1.0) / 2.0;

void check_open_radius(double r) {
    if (!(r > 0.0 && r < 1.0))
        throw ValidationError("saddle point radius must satisfy 0 < r < 1 (H is degenerate at 0 and 1)");
}

}  // namespace

// ---------------------------------------------------------------------------
// IdealPair

IdealPair IdealPair::gaussian_linear(Matrix sigma_x, Matrix z, Matrix v, Vector mean_x) {
    require_psd(sigma_x, "ideal Sigma_X");
    require_psd(v, "ideal V");
    if (z.cols() != sigma_x.rows() || z.rows() != v.rows())
        throw ValidationError("ideal pair: Z must be q x p with Sigma_X p x p and V q x q");
    if (mean_x.size() == 0) mean_x = Vector::Zero(sigma_x.rows());
    if (mean_x.size() != sigma_x.rows()) throw ValidationError("ideal pair: mean of X has wrong length");
    return IdealPair(GaussianLinearIdeal{std::move(sigma_x), std::move(z), std::move(v), std::move(mean_x)});
}

IdealPair IdealPair::from_filter_state(const FilterState& predicted, const ModelSpec& model) {
    return gaussian_linear(symmetrized(predicted.sigma_pred), model.z(predicted.t),
                           model.v_cov(predicted.t));
}

IdealPair IdealPair::generic(GenericIdeal g) {
    if (g.p < 1 || g.q < 1) throw ValidationError("generic ideal pair: dimensions must be positive");
    if (!g.cond_mean) throw ValidationError("generic ideal pair: conditional-mean evaluator required");
    if (!g.sample) throw ValidationError("generic ideal pair: sampler required");
    if (g.mean_x.size() == 0) g.mean_x = Vector::Zero(g.p);
    if (g.mean_x.size() != g.p) throw ValidationError("generic ideal pair: mean of X has wrong length");
    if (!(g.trace_cov_x >= 0.0)) throw ValidationError("generic ideal pair: trace Cov X must be >= 0");
    if (g.density_y && g.q != 1) throw ValidationError("generic ideal pair: density only for q == 1");
    return IdealPair(std::move(g));
}

Eigen::Index IdealPair::p() const {
    if (const auto* g = gaussian()) return g->sigma_x.rows();
    return std::get<GenericIdeal>(impl_).p;
}

Eigen::Index IdealPair::q() const {
    if (const auto* g = gaussian()) return g->z.rows();
    return std::get<GenericIdeal>(impl_).q;
}

Vector IdealPair::mean_x() const {
    if (const auto* g = gaussian()) return g->mean_x;
    return std::get<GenericIdeal>(impl_).mean_x;
}

double IdealPair::trace_cov_x() const {
    if (const auto* g = gaussian()) return g->sigma_x.trace();
    return std::get<GenericIdeal>(impl_).trace_cov_x;
}

Matrix IdealPair::gain() const {
    const auto* g = gaussian();
    if (g == nullptr) throw UnsupportedModelError("gain is only defined for Gaussian-linear ideal pairs");
    const Matrix delta = symmetrized(g->z * g->sigma_x * g->z.transpose() + g->v);
    return g->sigma_x * g->z.transpose() * pinv_psd(delta);
}

Matrix IdealPair::residual_map(SaddleKind kind) const {
    const auto* g = gaussian();
    if (kind == SaddleKind::Attenuation) return gain();
    return invert_observation(g->z) - gain();
}

double IdealPair::cond_var_term(const Engine& engine) const {
    if (const auto* g = gaussian()) {
        const Matrix eye = Matrix::Identity(g->sigma_x.rows(), g->sigma_x.rows());
        return ((eye - gain() * g->z) * g->sigma_x).trace();
    }
    const auto& g = std::get<GenericIdeal>(impl_);
    if (g.cond_var_term) return *g.cond_var_term;
    Rng rng(derive_seed(engine.seed, Stream::MonteCarlo, 2));
    long double acc = 0.0L;
    for (std::size_t i = 0; i < engine.samples; ++i) {
        const auto [x, y] = g.sample(rng);
        acc += (x - g.cond_mean(y)).squaredNorm();
    }
    return static_cast<double>(acc / static_cast<long double>(engine.samples));
}

double IdealPair::trace_cov_noise(const Engine& engine) const {
    if (const auto* g = gaussian()) {
        const Matrix zi = invert_observation(g->z);
        return (zi * g->v * zi.transpose()).trace();
    }
    const auto& g = std::get<GenericIdeal>(impl_);
    if (!g.additive) throw UnsupportedModelError("tracking saddle point needs an additive ideal pair");
    Rng rng(derive_seed(engine.seed, Stream::MonteCarlo, 3));
    long double acc = 0.0L;
    for (std::size_t i = 0; i < engine.samples; ++i) {
        const auto [x, y] = g.sample(rng);
        acc += (y - x).squaredNorm();
    }
    return static_cast<double>(acc / static_cast<long double>(engine.samples));
}

Vector IdealPair::residual(const Vector& y, SaddleKind kind) const {
    if (y.size() != q()) throw ValidationError("observation has the wrong dimension");
    if (const auto* g = gaussian()) return residual_map(kind) * (y - g->z * g->mean_x);
    const auto& g = std::get<GenericIdeal>(impl_);
    if (kind == SaddleKind::Attenuation) return g.cond_mean(y) - g.mean_x;
    if (!g.additive || g.p != g.q)
        throw UnsupportedModelError("tracking residual needs an additive ideal pair with p == q");
    return y - g.cond_mean(y);
}

MagnitudeLaw IdealPair::magnitude_law(const Engine& engine, SaddleKind kind) const {
    if (const auto* g = gaussian()) {
        const Matrix delta = symmetrized(g->z * g->sigma_x * g->z.transpose() + g->v);
        return gaussian_magnitude(residual_map(kind), delta, engine);
    }
    const auto& g = std::get<GenericIdeal>(impl_);
    if (kind == SaddleKind::Tracking && (!g.additive || g.p != g.q))
        throw UnsupportedModelError("tracking saddle point needs an additive ideal pair with p == q");
    if (g.q == 1 && g.density_y && !engine.force_monte_carlo) {
        return MagnitudeLaw::from_density(g.density_y, [this, kind](double y) {
            return residual(Vector::Constant(1, y), kind).norm();
        });
    }
    Rng rng(derive_seed(engine.seed, Stream::MonteCarlo, 1));
    std::vector<double> u;
    u.reserve(engine.samples);
    for (std::size_t i = 0; i < engine.samples; ++i)
        u.push_back(residual(g.sample(rng).second, kind).norm());
    return MagnitudeLaw::from_samples(std::move(u));
}

double IdealPair::density_y(double y) const {
    if (q() != 1) throw UnsupportedModelError("marginal density is only available for q == 1");
    if (const auto* g = gaussian()) {
        const double var = (g->z * g->sigma_x * g->z.transpose() + g->v)(0, 0);
        const double mean = (g->z * g->mean_x)(0);
        if (var <= 0.0) throw NumericalError("degenerate ideal marginal of Y");
        const double sd = std::sqrt(var);
        return std_normal_pdf((y - mean) / sd) / sd;
    }
    const auto& g = std::get<GenericIdeal>(impl_);
    if (!g.density_y) throw UnsupportedModelError("generic ideal pair has no density evaluator");
    return g.density_y(y);
}

std::pair<Vector, Vector> IdealPair::sample_xy(Rng& rng) const {
    if (const auto* g = gaussian()) {
        Vector x = rng.gaussian(g->mean_x, psd_factor(g->sigma_x));
        Vector y = g->z * x + rng.gaussian(Vector::Zero(g->v.rows()), psd_factor(g->v));
        return {std::move(x), std::move(y)};
    }
    return std::get<GenericIdeal>(impl_).sample(rng);
}

Vector IdealPair::sample_y(Rng& rng) const { return sample_xy(rng).second; }

// ---------------------------------------------------------------------------
// Saddle points

namespace {

SaddlePoint solve_h_equation(const MagnitudeLaw& law, double r, double total_variance,
                             SaddleKind kind) {
    check_open_radius(r);
    // H(s) = (1-r)/r E(|D|/s - 1)_+ is antitone, from +inf at 0 to 0 at +inf.
    const double odds = (1.0 - r) / r;
    const auto h_minus_one = [&](double s) { return odds * law.excess(s) / s - 1.0; };
    const RootResult root = solve_decreasing(h_minus_one);
    SaddlePoint sp;
    sp.r = r;
    sp.rho = root.x;
    sp.kind = kind;
    sp.engine = law.descriptor();
    sp.normalization_residual = std::abs(root.value);
    sp.risk = total_variance - (1.0 - r) * law.clipped_product(sp.rho);
    const double tol = law.is_monte_carlo()
                           ? std::max(3.0 * odds * law.excess_se(sp.rho) / sp.rho, kCalibrationTol)
                           : kCalibrationTol;
    if (!(sp.normalization_residual <= tol))
        throw NumericalError("solve_rho: normalization of the least favorable law failed");
    if (!(sp.rho > 0.0)) throw NumericalError("solve_rho: non-positive Lagrange multiplier");
    return sp;
}

}  // namespace

SaddlePoint solve_rho(const IdealPair& ideal, double r, const Engine& engine) {
    check_open_radius(r);
    return solve_h_equation(ideal.magnitude_law(engine, SaddleKind::Attenuation), r,
                            ideal.trace_cov_x(), SaddleKind::Attenuation);
}

SaddlePoint io_saddle(const IdealPair& ideal, double r, const Engine& engine) {
    check_open_radius(r);
    if (ideal.p() != ideal.q())
        throw UnsupportedModelError("IO saddle point requires p == q (additive observation structure)");
    return solve_h_equation(ideal.magnitude_law(engine, SaddleKind::Tracking), r,
                            ideal.trace_cov_noise(engine), SaddleKind::Tracking);
}

Vector saddle_procedure(const IdealPair& ideal, const SaddlePoint& sp, const Vector& y) {
    const Vector d = ideal.residual(y, sp.kind);
    const Vector clipped = huberize(d, ClipHeight(sp.rho));
    if (sp.kind == SaddleKind::Attenuation) return ideal.mean_x() + clipped;
    if (const auto* g = ideal.gaussian()) return invert_observation(g->z) * y - clipped;
    return y - clipped;
}

DensityWeight lf_density_weight(const Vector& y, const SaddlePoint& sp, const IdealPair& ideal) {
    const double d = ideal.residual(y, sp.kind).norm();
    DensityWeight w;
    w.di_weight = (1.0 - sp.r) / sp.r * std::max(d / sp.rho - 1.0, 0.0);
    w.re_density_factor = (1.0 - sp.r) + sp.r * w.di_weight;
    return w;
}

std::vector<DensityPoint> density_trace(const IdealPair& ideal, const SaddlePoint& sp, double lo,
                                        double hi, std::size_t points) {
    if (ideal.q() != 1) throw UnsupportedModelError("density traces need q == 1");
    if (points < 2 || !(hi > lo)) throw ValidationError("density trace: need hi > lo and >= 2 points");
    std::vector<DensityPoint> out;
    out.reserve(points);
    for (std::size_t i = 0; i < points; ++i) {
        const double y = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
        const double pid = ideal.density_y(y);
        const DensityWeight w = lf_density_weight(Vector::Constant(1, y), sp, ideal);
        out.push_back({y, pid, w.re_density_factor * pid, w.di_weight * pid});
    }
    return out;
}

LeastFavorableSampler::LeastFavorableSampler(const IdealPair& ideal, const SaddlePoint& sp)
    : rho_(sp.rho), r_(sp.r) {
    const auto* g = ideal.gaussian();
    if (g == nullptr)
        throw UnsupportedModelError("least favorable sampling needs a Gaussian-linear ideal pair");
    const Matrix map = sp.kind == SaddleKind::Attenuation
                           ? ideal.gain()
                           : Matrix(invert_observation(g->z) - ideal.gain());
    const Matrix delta = symmetrized(g->z * g->sigma_x * g->z.transpose() + g->v);
    const Matrix l = psd_factor(delta);
    const Matrix k = symmetrized(l.transpose() * map.transpose() * map * l);
    Eigen::SelfAdjointEigenSolver<Matrix> es(k);
    center_ = g->z * g->mean_x;
    basis_ = l * es.eigenvectors();
    lambda_ = es.eigenvalues().cwiseMax(0.0);
    const double total = lambda_.sum();
    if (!(total > 0.0)) throw NumericalError("least favorable law is degenerate (D == 0)");
    cumulative_.resize(lambda_.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < lambda_.size(); ++i) cumulative_(i) = (acc += lambda_(i) / total);
    plain_weight_ = rho_ * rho_ / (rho_ * rho_ + total);
}

Vector LeastFavorableSampler::draw(Rng& rng) const {
    const Eigen::Index n = lambda_.size();
    for (;;) {
        Vector h = rng.standard_normal(n);
        if (rng.uniform() >= plain_weight_) {
            const double u = rng.uniform();
            Eigen::Index i = 0;
            while (i + 1 < n && cumulative_(i) <= u) ++i;
            // h_i with density proportional to h^2 phi(h): signed chi with 3 dof
            const double a = rng.normal(), b = rng.normal(), c = rng.normal();
            const double mag = std::sqrt(a * a + b * b + c * c);
            h(i) = rng.uniform() < 0.5 ? -mag : mag;
        }
        const double v = std::sqrt(lambda_.dot(h.cwiseAbs2())) / rho_;
        if (v > 1.0 && rng.uniform() * kAcceptBound * (1.0 + v * v) < v - 1.0)
            return center_ + basis_ * h;
    }
}

double LeastFavorableSampler::expected_proposals() const {
    const double total = lambda_.sum();
    return kAcceptBound * (rho_ * rho_ + total) * (1.0 - r_) / (rho_ * rho_ * r_);
}

// ---------------------------------------------------------------------------
// Risks

RiskValue risk_under_contamination(const IdealPair& ideal, ClipHeight b,
                                   const RiskContamination& contamination, double r,
                                   const Engine& engine) {
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("radius r must lie in [0, 1]");
    const MagnitudeLaw law = ideal.magnitude_law(engine);
    const double bv = b.value();
    const auto capped = [&](const Vector& y) {
        const double d = ideal.residual(y).norm();
        const double m = std::min(d, bv);
        return m * m;
    };
    RiskValue out;
    const double ideal_part = ideal.cond_var_term(engine) + law.excess_sq(bv);
    double contaminated_part = 0.0;
    if (const auto* point = std::get_if<Vector>(&contamination)) {
        contaminated_part = capped(*point);
    } else {
        const auto& sample = std::get<std::vector<Vector>>(contamination);
        if (sample.empty()) throw ValidationError("empty contamination sample");
        long double m1 = 0.0L, m2 = 0.0L;
        for (const auto& y : sample) {
            const long double v = capped(y);
            m1 += v;
            m2 += v * v;
        }
        const long double n = static_cast<long double>(sample.size());
        m1 /= n;
        m2 /= n;
        contaminated_part = static_cast<double>(m1);
        out.standard_error =
            r * std::sqrt(std::max(static_cast<double>(m2 - m1 * m1), 0.0) / static_cast<double>(n));
    }
    out.value = (1.0 - r) * ideal_part + r * ideal.trace_cov_x() + r * contaminated_part;
    return out;
}

double minimax_risk_eso(const IdealPair& ideal, double r, double G, const Engine& engine) {
    const double m2 = ideal.second_moment_x();
    if (!(G >= m2)) throw ValidationError("eSO bound G must be at least E|X|^2");
    return solve_rho(ideal, r, engine).risk + r * (G - m2);
}

namespace {

struct RadiusTerms {
    const MagnitudeLaw& law;
    double cond_var;

    ClipHeight b(double r) const { return calibrate_radius(law, r).b; }
    double A(double r) const { return cond_var + law.excess_sq(b(r).value()); }
    double B(double r) const {
        const ClipHeight h = b(r);
        if (h.is_unbounded()) return kInf;
        return law.second_moment() - law.excess_sq(h.value()) + h.value() * h.value();
    }
};

}  // namespace

double lfr_A(double r, const IdealPair& ideal, const Engine& engine) {
    const MagnitudeLaw law = ideal.magnitude_law(engine);
    return RadiusTerms{law, ideal.cond_var_term(engine)}.A(r);
}

double lfr_B(double r, const IdealPair& ideal, const Engine& engine) {
    const MagnitudeLaw law = ideal.magnitude_law(engine);
    return RadiusTerms{law, ideal.cond_var_term(engine)}.B(r);
}

RadiusSolution solve_least_favorable_radius(double r_l, double r_u, const IdealPair& ideal,
                                            const Engine& engine) {
    if (!(r_l >= 0.0 && r_u <= 1.0)) throw ValidationError("radius bounds must lie in [0, 1]");
    if (!(r_l < r_u)) throw ValidationError("radius bounds must satisfy r_l < r_u");

    const MagnitudeLaw law = ideal.magnitude_law(engine);
    const RadiusTerms terms{law, ideal.cond_var_term(engine)};
    RadiusSolution sol;
    sol.r_l = r_l;
    sol.r_u = r_u;

    const double a_l = terms.A(r_l);
    const double b_u = terms.B(r_u);
    const auto rho0 = [&](double r) {
        // B_r / B_1 with B_1 = 0: infinite below r = 1, taken as 1 at r = 1.
        const double b_ratio = b_u == 0.0 ? (r == 1.0 ? 1.0 : kInf) : terms.B(r) / b_u;
        return std::max(terms.A(r) / a_l, b_ratio);
    };

    for (int k = 0; k <= 10; ++k) {
        const double r = k == 10 ? r_u : r_l + (r_u - r_l) * k / 10.0;
        sol.grid.push_back(r);
        sol.A_table.push_back(terms.A(r));
        sol.B_table.push_back(terms.B(r));
        sol.rho0_table.push_back(rho0(r));
    }

    if (r_u == 1.0) {
        sol.r0 = 1.0;
        sol.b_at_r0 = ClipHeight(0.0);
        sol.rho0_at_r0 = rho0(1.0);
        sol.crossing_residual = 0.0;
        return sol;
    }

    // g is increasing: A_r increases and B_r decreases in r.
    const auto g = [&](double r) { return terms.A(r) / a_l - terms.B(r) / b_u; };
    double lo = r_l, hi = r_u;
    double g_lo = g(lo), g_hi = g(hi);
    if (g_lo >= 0.0) {
        hi = lo;
    } else if (g_hi <= 0.0) {
        lo = hi;
    } else {
        for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double gm = g(mid);
            if (gm == 0.0) {
                lo = hi = mid;
                break;
            }
            (gm < 0.0 ? lo : hi) = mid;
        }
    }
    // Of the final bracket ends, keep the one with the smaller crossing residual.
    sol.r0 = std::abs(g(lo)) <= std::abs(g(hi)) ? lo : hi;
    sol.crossing_residual = g(sol.r0);
    sol.b_at_r0 = terms.b(sol.r0);
    sol.rho0_at_r0 = rho0(sol.r0);

    const double grid_min = *std::min_element(sol.rho0_table.begin(), sol.rho0_table.end());
    if (sol.rho0_at_r0 > grid_min * (1.0 + 1e-9))
        throw NumericalError("least favorable radius: grid point with smaller maximal inefficiency");
    return sol;
}

}  // namespace rkf
