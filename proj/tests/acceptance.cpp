// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "rkf/diagnostics.hpp"
#include "rkf/experiment.hpp"
#include "rkf/kalman.hpp"
#include "rkf/minimax.hpp"
#include "rkf/rls.hpp"
#include "rkf/rng.hpp"

using namespace rkf;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }
Vector v1(double v) { return Vector::Constant(1, v); }

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double folded_excess(double tau, double b) {
    const double z = b / tau;
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    return 2.0 * (tau * pdf - b * 0.5 * std::erfc(z / std::sqrt(2.0)));
}

template <class F>
double simpson(F f, double a, int n) {
    const double h = 2.0 * a / n;
    double s = f(-a) + f(a);
    for (int i = 1; i < n; ++i) s += f(-a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
    long double s = 0.0L, s2 = 0.0L;
    for (double x : v) {
        s += x;
        s2 += static_cast<long double>(x) * x;
    }
    const long double n = static_cast<long double>(v.size());
    const long double var = (s2 - s * s / n) / (n - 1.0L);
    return {static_cast<double>(s / n), static_cast<double>(std::sqrt(var / n))};
}

// 1. rls-ao with b = inf against the classical filter.
Outcome classical_equivalence() {
    const ModelSpec m = ModelSpec::scalar_unit();
    const Trajectory tr = simulate_ideal(m, 1000, 101);
    FilterState kf = kf_init(m), ao = kf_init(m);
    double worst = 0.0;
    for (std::size_t t = 1; t <= tr.T; ++t) {
        kf = kf_correct(kf_predict(kf, m), m, tr.obs(t));
        ao = rls_ao_step(kf_predict(ao, m), m, tr.obs(t), ClipHeight::unbounded());
        const double scale = std::max({std::abs(kf.x_filt(0)), std::abs(ao.x_filt(0)),
                                       std::numeric_limits<double>::min()});
        worst = std::max(worst, std::abs(kf.x_filt(0) - ao.x_filt(0)) / scale);
        worst = std::max(worst, std::abs(kf.sigma_filt(0, 0) - ao.sigma_filt(0, 0)) / kf.sigma_filt(0, 0));
    }
    return {worst <= 1e-12, "max relative difference " + fmt("%.3g", worst) + " over T=1000"};
}

// 2. Riccati steady state.
Outcome riccati_steady_state() {
    const auto seq = riccati_sequence(ModelSpec::scalar_unit(), 50);
    const double err = std::abs(seq.back().sigma_pred(0, 0) - oracle::kPhi);
    return {err < 1e-9, "|Sigma_50|49 - phi| = " + fmt("%.3g", err)};
}

// 3. Calibration residuals, monotonicity and b(r) = rho(r).
Outcome calibration_residuals() {
    const Matrix gain = m1(0.5), delta = m1(2.0);
    const IdealPair ideal = IdealPair::gaussian_linear(m1(1), m1(1), m1(1));
    const double tau = std::sqrt(0.5);
    bool ok = true;
    double worst_res = 0.0, worst_rho = 0.0, worst_oracle = 0.0, prev = 1e300;
    for (std::size_t i = 0; i < 5; ++i) {
        const double r = oracle::kRadii[i];
        const double b = calibrate_b_radius(gain, delta, r).b.value();
        const double res = std::abs((1 - r) * folded_excess(tau, b) - r * b);
        const double rho = solve_rho(ideal, r).rho;
        worst_res = std::max(worst_res, res);
        worst_rho = std::max(worst_rho, std::abs(rho - b) / b);
        worst_oracle = std::max(worst_oracle, std::abs(b - oracle::kBRadiusHalf[i]) / b);
        ok = ok && res < 1e-8 && b < prev && std::abs(rho - b) <= 1e-6 * b;
        prev = b;
    }
    ok = ok && worst_oracle < 1e-9;
    return {ok, "max residual " + fmt("%.3g", worst_res) + ", max |rho-b|/b " + fmt("%.3g", worst_rho) +
                    ", max oracle deviation " + fmt("%.3g", worst_oracle) + ", strictly decreasing"};
}

// 4. Saddle normalization and dominance.
Outcome saddle_dominance() {
    const double r = 0.1;
    const IdealPair ideal = IdealPair::gaussian_linear(m1(1), m1(1), m1(1));
    const SaddlePoint sp = solve_rho(ideal, r);
    const double norm = simpson(
        [&](double y) { return lf_density_weight(v1(y), sp, ideal).di_weight * ideal.density_y(y); },
        40.0, 400000);

    const std::size_t N = 100000;
    const LeastFavorableSampler lf(ideal, sp);
    const double y_in = sp.rho;  // |D(y)| = rho / 2, inside the threshold
    const double hi = 2.0 * sp.rho;
    enum Law { P0, Zero, Inside, Uniform, Refeed };
    const auto risk = [&](Law law, std::uint64_t seed) {
        Rng rng(seed);
        std::vector<double> loss(N);
        for (std::size_t i = 0; i < N; ++i) {
            const auto [x, y_id] = ideal.sample_xy(rng);
            Vector y = y_id;
            if (rng.bernoulli(r)) {
                switch (law) {
                    case P0: y = lf.draw(rng); break;
                    case Zero: y = v1(0.0); break;
                    case Inside: y = v1(y_in); break;
                    case Uniform: y = v1(-hi + 2.0 * hi * rng.uniform()); break;
                    case Refeed: y = ideal.sample_y(rng); break;
                }
            }
            loss[i] = (x - saddle_procedure(ideal, sp, y)).squaredNorm();
        }
        return mean_se(loss);
    };
    const MeanSe p0 = risk(P0, 4001);
    bool ok = std::abs(norm - 1.0) < 1e-6 && std::abs(p0.mean - sp.risk) <= 3.0 * p0.se;
    std::string detail = "normalization " + fmt("%.10f", norm) + ", MC risk at P0 " + fmt("%.5f", p0.mean) +
                         " vs " + fmt("%.5f", sp.risk) + " (se " + fmt("%.1e", p0.se) + ")";
    const char* names[] = {"", "point0", "inside", "uniform", "refeed"};
    for (Law law : {Zero, Inside, Uniform, Refeed}) {
        const MeanSe alt = risk(law, 4001 + law);
        const double se = std::sqrt(alt.se * alt.se + p0.se * p0.se);
        ok = ok && alt.mean <= p0.mean + 3.0 * se;
        detail += std::string(", ") + names[law] + " " + fmt("%.5f", alt.mean);
    }
    return {ok, detail};
}

// 5. Minimax benefit on the one-step model under P0.
Outcome minimax_benefit() {
    ExperimentConfig cfg;
    cfg.model = ModelSpec::scalar_unit();
    cfg.horizon = 1;
    cfg.replications = 10000;
    cfg.seed = 5005;
    ExperimentContamination c;
    c.spec.kind = ContaminationKind::SO;
    c.spec.radius = 0.1;
    c.least_favorable = true;
    cfg.contamination = c;
    FilterConfig kf;
    kf.name = "classical";
    FilterConfig rls;
    rls.name = "rls";
    rls.kind = FilterKind::RlsAo;
    rls.calibration.method = CalibrationMethod::Radius;
    rls.calibration.parameter = 0.1;
    cfg.filters = {kf, rls};
    const ExperimentReport rep = run_experiment(cfg);
    const auto& f = rep.filter("rls");
    const double gap = -*f.paired_difference;
    const double z = gap / *f.paired_se;
    return {gap > 0.0 && z > 3.0,
            "MSE classical " + fmt("%.5f", rep.filter("classical").aggregate) + ", rLS " + fmt("%.5f", f.aggregate) +
                ", separation " + fmt("%.1f", z) + " paired SE"};
}

// 6. Least favorable radius.
Outcome least_favorable_radius() {
    const ModelSpec m = ModelSpec::scalar_unit();
    const IdealPair ideal = IdealPair::from_filter_state(steady_state(m), m);
    const RadiusSolution sol = solve_least_favorable_radius(0.01, 0.5, ideal);
    const double a0 = lfr_A(sol.r0, ideal) / lfr_A(0.01, ideal);
    const double b0 = lfr_B(sol.r0, ideal) / lfr_B(0.5, ideal);
    bool ok = std::abs(a0 - b0) < 1e-6 && sol.grid.size() == 11;
    for (double v : sol.rho0_table) ok = ok && sol.rho0_at_r0 <= v;
    ok = ok && std::abs(sol.r0 - oracle::kR0Unit) < 1e-7;
    const RadiusSolution full = solve_least_favorable_radius(0.01, 1.0, ideal);
    ok = ok && full.r0 == 1.0;
    return {ok, "r0 " + fmt("%.10f", sol.r0) + ", |A/A_l - B/B_u| " + fmt("%.2g", std::abs(a0 - b0)) +
                    ", rho0 " + fmt("%.6f", sol.rho0_at_r0) + ", r_u=1 gives r0 " + fmt("%.17g", full.r0)};
}

// 7. Linearity test level, power and asymptotic variance.
Outcome linearity_level_power() {
    Rng rng(7007);
    const auto gaussian = [&](Eigen::Index n) {
        Matrix s(n, 2);
        for (Eigen::Index i = 0; i < n; ++i) {
            s(i, 0) = std::sqrt(2.0) * rng.normal();
            s(i, 1) = rng.normal();
        }
        return s;
    };
    int rej = 0;
    for (int k = 0; k < 2000; ++k) rej += linearity_test(gaussian(500), 0.05).reject;
    const double level = rej / 2000.0;
    int pow = 0;
    for (int k = 0; k < 500; ++k) {
        Matrix s(500, 1);
        for (Eigen::Index i = 0; i < 500; ++i) s(i, 0) = rng.exponential() - 1.0;
        pow += linearity_test(s, 0.05).reject;
    }
    const double power = pow / 500.0;
    std::vector<double> z;
    for (int k = 0; k < 2000; ++k) z.push_back(linearity_test(gaussian(2000), 0.05).standardized());
    const MeanSe zm = mean_se(z);
    const double var = zm.se * zm.se * 2000.0;
    return {level >= 0.03 && level <= 0.07 && power > 0.9 && var >= 0.9 && var <= 1.1,
            "level " + fmt("%.4f", level) + ", power " + fmt("%.3f", power) +
                ", variance of standardized statistic " + fmt("%.4f", var)};
}

// 8. Normality probe on rLS errors with aggressive clipping.
Outcome rls_non_normality() {
    ModelSpec m = ModelSpec::scalar_unit();
    m.Q0 = m1(oracle::kPhi - 1.0);  // start in steady state
    FilterConfig f;
    f.name = "rls";
    f.kind = FilterKind::RlsAo;
    f.calibration.method = CalibrationMethod::Radius;
    f.calibration.parameter = 0.5;
    const std::size_t T = 20, n = 100000;
    const FilterSchedule sched = build_schedule(m, f, T, 0);
    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Trajectory tr = simulate_ideal(m, T, derive_seed(8008, Stream::Replication, i));
        e[i] = tr.x.back()(0) - run_filter(m, sched, tr.y).back()(0);
    }
    const NormalityResult res = normality_probe(e);
    const double b = sched.steps.back().b.value();
    return {res.reject_at_001 && std::abs(b - oracle::kBRadiusUnit05) < 1e-9,
            "b " + fmt("%.6f", b) + ", KS distance " + fmt("%.5f", res.ks_distance) + " vs critical " +
                fmt("%.5f", res.critical)};
}

// 9. eSO arithmetic.
Outcome eso_arithmetic() {
    const IdealPair ideal = IdealPair::gaussian_linear(m1(1), m1(1), m1(1));
    const double r = 0.1;
    const double so = solve_rho(ideal, r).risk;
    const double ex2 = ideal.second_moment_x();
    const double at_ex2 = minimax_risk_eso(ideal, r, ex2);
    const double g1 = 2.0, g2 = 7.0;
    const double v1_ = minimax_risk_eso(ideal, r, g1), v2_ = minimax_risk_eso(ideal, r, g2);
    const double slope = (v2_ - v1_) / (g2 - g1);
    const double ulp = 4.0 * std::numeric_limits<double>::epsilon() * std::max(v1_, v2_) / (g2 - g1);
    const bool ok = at_ex2 == so && std::abs(slope - r) <= ulp &&
                    std::abs(minimax_risk_eso(ideal, r, 2.0 * ex2) - oracle::kEsoRiskHalfG2) < 1e-9;
    return {ok, "value at G=E|X|^2 equals SO value " + fmt("%.15g", so) + ", slope " + fmt("%.17g", slope)};
}

// 10. CLI determinism.
int run(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Outcome cli_determinism() {
    const fs::path dir = fs::path(RKF_WORK_DIR) / "acceptance_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto write = [&](const char* name, const std::string& text) {
        std::ofstream(dir / name) << text;
    };
    const std::string model = R"("model": {"F": 1, "Z": 1, "Q": 1, "V": 1, "a0": 0, "Q0": 1})";
    const std::string model2 =
        R"("model": {"F": [[0.9, 0.1], [0, 0.8]], "Z": [[1, 0], [0, 1]], "Q": [[1, 0], [0, 1]], "V": [[1, 0.2], [0.2, 1]], "a0": [0, 0], "Q0": [[1, 0], [0, 1]]})";
    write("sim.json", "{" + model +
                          R"(, "horizon": 200, "seed": 1, "contamination": {"kind": "AO", "radius": 0.1, "law": {"type": "gaussian", "mean": [0], "cov": [[100]]}}})");
    write("filter.json", "{" + model +
                             R"(, "horizon": 200, "seed": 1, "filter": {"type": "rls-ao", "calibration": {"method": "radius", "r": 0.1}}})");
    write("cal.json", "{" + model2 + R"(, "engine": {"samples": 20000}})");
    write("pair.json", R"({"ideal": {"sigma_x": 1, "z": 1, "v": 1}})");
    write("radius.json", "{" + model + "}");
    write("lin.json", R"({"sample": [0.3, -1.2, 2.2, 0.1, -0.4, 0.9, -2.0, 1.1, 0.05, -0.7, 1.6, -0.2]})");
    write("exp.json", "{" + model +
                          R"(, "horizon": 20, "replications": 200, "seed": 9,
        "contamination": {"kind": "SO", "radius": 0.1, "law": {"type": "scaled_ideal", "kappa": 3}},
        "filters": [{"name": "kf", "type": "classical"},
                    {"name": "ao", "type": "rls-ao", "calibration": {"method": "radius", "r": 0.1}},
                    {"name": "io", "type": "rls-io", "calibration": {"method": "radius", "r": 0.1}}]})");

    const std::string cli = RKF_CLI;
    const std::string cd = "cd '" + dir.string() + "' && ";
    struct Cmd {
        const char* name;
        std::string args;
        std::vector<std::string> extra;  // additional outputs to compare
    };
    const std::vector<Cmd> cmds = {
        {"simulate", "simulate --config sim.json --seed 42", {}},
        {"filter", "filter --config filter.json --seed 42", {}},
        {"calibrate", "calibrate --config cal.json --r 0.1 --seed 3", {}},
        {"radius", "radius --config radius.json --rl 0.01 --ru 0.5", {}},
        {"saddle", "saddle --config pair.json --r 0.1 --trace-density TRACE", {"TRACE"}},
        {"lintest", "lintest --config lin.json --alpha 0.05", {}},
        {"experiment", "experiment --config exp.json --seed 42", {}},
    };
    bool ok = true;
    std::string detail;
    for (const auto& c : cmds) {
        std::string outs[2], extras[2];
        for (int k = 0; k < 2; ++k) {
            const std::string out = std::string(c.name) + "_" + std::to_string(k) + ".out";
            const std::string trace = std::string(c.name) + "_" + std::to_string(k) + ".csv";
            std::string args = c.args;
            if (const auto pos = args.find("TRACE"); pos != std::string::npos) args.replace(pos, 5, trace);
            const int code = run(cd + "'" + cli + "' " + args + " --out " + out + " 2>/dev/null");
            if (code != 0) {
                ok = false;
                detail += std::string(c.name) + " exit " + std::to_string(code) + "; ";
            }
            outs[k] = slurp(dir / out);
            if (!c.extra.empty()) extras[k] = slurp(dir / trace);
        }
        const bool same = !outs[0].empty() && outs[0] == outs[1] && extras[0] == extras[1];
        ok = ok && same;
        detail += std::string(c.name) + (same ? " identical" : " DIFFERENT") + "; ";
    }
    return {ok, detail};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria = {
        {1, "classical-equivalence", 1.0, classical_equivalence},
        {2, "riccati-steady-state", 1.0, riccati_steady_state},
        {3, "calibration-residuals", 10.0, calibration_residuals},
        {4, "saddle-normalization-dominance", 30.0, saddle_dominance},
        {5, "minimax-benefit", 30.0, minimax_benefit},
        {6, "least-favorable-radius", 10.0, least_favorable_radius},
        {7, "linearity-test-level-power", 60.0, linearity_level_power},
        {8, "rls-error-non-normality", 30.0, rls_non_normality},
        {9, "eso-arithmetic", 10.0, eso_arithmetic},
        {10, "cli-determinism", 60.0, cli_determinism},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs < c.budget_s;
        const bool pass = o.pass && in_time;
        failures += pass ? 0 : 1;
        std::printf("%s %2d %-32s %.2fs/%.0fs  %s%s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs, c.budget_s,
                    o.detail.c_str(), in_time ? "" : " [over time budget]");
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
