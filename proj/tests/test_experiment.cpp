#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "rkf/errors.hpp"
#include "rkf/experiment.hpp"
#include "rkf/kalman.hpp"

using namespace rkf;

namespace {

Json base_config() {
    return Json::parse(R"({
        "model": {"F": 1, "Z": 1, "Q": 1, "V": 1, "a0": 0, "Q0": 1},
        "horizon": 30,
        "replications": 300,
        "seed": 2024,
        "contamination": {"kind": "AO", "radius": 0.1,
                          "law": {"type": "gaussian", "mean": [0], "cov": [[25]]}},
        "filters": [
            {"name": "kf", "type": "classical"},
            {"name": "ao", "type": "rls-ao", "calibration": {"method": "radius", "r": 0.1}},
            {"name": "io", "type": "rls-io", "calibration": {"method": "radius", "r": 0.1}},
            {"name": "delta", "type": "rls-ao", "calibration": {"method": "delta", "delta": 0.05}},
            {"name": "range", "type": "rls-ao", "calibration": {"method": "radius-range", "r_l": 0.01, "r_u": 0.5}}
        ]
    })");
}

}  // namespace

TEST_CASE("classical and unclipped rLS give identical MSE columns") {
    Json j = base_config();
    j["filters"] = Json::parse(R"([{"name": "kf", "type": "classical"},
        {"name": "inf", "type": "rls-ao", "calibration": {"b": "inf"}}])");
    const ExperimentReport r = run_experiment(experiment_config_from_json(j));
    const auto& a = r.filter("kf");
    const auto& b = r.filter("inf");
    for (std::size_t t = 0; t < r.horizon; ++t)
        CHECK(std::abs(a.mse[t] - b.mse[t]) <= 1e-12 * a.mse[t]);
    CHECK(*b.paired_difference == 0.0);
}

TEST_CASE("report is reproducible bit for bit and independent of thread count") {
    Json j = base_config();
    const std::string a = to_json(run_experiment(experiment_config_from_json(j))).dump();
    const std::string b = to_json(run_experiment(experiment_config_from_json(j))).dump();
    CHECK(a == b);
    j["threads"] = 3;
    const std::string c = to_json(run_experiment(experiment_config_from_json(j))).dump();
    CHECK(a == c);
    j["seed"] = 2025;
    const std::string d = to_json(run_experiment(experiment_config_from_json(j))).dump();
    CHECK(a != d);
}

TEST_CASE("report contents") {
    const ExperimentReport r = run_experiment(experiment_config_from_json(base_config()));
    CHECK(r.reference == "kf");
    CHECK(r.hit_rate > 0.05);
    CHECK(r.hit_rate < 0.15);
    for (const auto& f : r.filters) {
        CHECK(f.ok);
        for (double v : f.mse) CHECK(v >= 0.0);
    }
    // Riccati sequence converges in double precision, so calibrations are reused
    const auto& ao = r.filter("ao");
    CHECK(ao.calibrations.size() < r.horizon);
    CHECK(ao.calibrations.front().method == CalibrationMethod::Radius);
    CHECK(r.filter("range").calibrations.front().method == CalibrationMethod::RadiusRange);
    // AO outliers: clipping helps
    CHECK(ao.aggregate < r.filter("kf").aggregate);
    const Json j = to_json(r);
    CHECK(j["filters"][1]["calibrations"][0].contains("residual"));
    const std::string csv = to_csv(r);
    CHECK(csv.rfind("t,kf_mse,kf_se,ao_mse,ao_se,", 0) == 0);
}

TEST_CASE("ideal model: the classical filter is more efficient") {
    Json j = base_config();
    j["contamination"] = nullptr;
    j["horizon"] = 100;
    j["replications"] = 1000;
    j["filters"] = Json::parse(R"([{"name": "kf", "type": "classical"},
        {"name": "rls", "type": "rls-ao", "calibration": {"method": "radius", "r": 0.1}}])");
    const ExperimentReport r = run_experiment(experiment_config_from_json(j));
    const auto& rls = r.filter("rls");
    CHECK(*rls.paired_difference > 3.0 * *rls.paired_se);
    const FilterState ss = steady_state(ModelSpec::scalar_unit());
    const double b = rls.calibrations.back().b.value();
    const double premium =
        gaussian_magnitude(ss.gain, ss.delta, {}).excess_sq(b) / ss.sigma_filt.trace();
    MESSAGE("relative MSE loss " << rls.aggregate / r.filter("kf").aggregate - 1.0
                                 << " vs one-step premium " << premium);
    CHECK(rls.aggregate / r.filter("kf").aggregate > 1.0);
}

TEST_CASE("standard errors shrink like 1/sqrt(N)") {
    Json j = base_config();
    j["horizon"] = 5;
    j["filters"] = Json::parse(R"([{"name": "kf", "type": "classical"}])");
    j["replications"] = 100;
    const double se_small = run_experiment(experiment_config_from_json(j)).filter("kf").aggregate_se;
    j["replications"] = 10000;
    const double se_big = run_experiment(experiment_config_from_json(j)).filter("kf").aggregate_se;
    const double ratio = se_small / se_big;
    CHECK(ratio > 7.0);
    CHECK(ratio < 13.0);
}

TEST_CASE("incompatible filters are reported per filter") {
    Json j = base_config();
    j["model"]["Z"] = 0;
    j["filters"] = Json::parse(R"([{"name": "kf", "type": "classical"},
        {"name": "io", "type": "rls-io", "calibration": {"b": 1.0}}])");
    const ExperimentReport r = run_experiment(experiment_config_from_json(j));
    CHECK(r.filter("kf").ok);
    CHECK_FALSE(r.filter("io").ok);
    CHECK(r.filter("io").error.find("invertible") != std::string::npos);
}

TEST_CASE("invalid configs name the offending field") {
    const auto message = [](const Json& j) {
        try {
            experiment_config_from_json(j);
        } catch (const ValidationError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    Json j = base_config();
    j["replications"] = 0;
    CHECK(message(j).find("replications") != std::string::npos);
    j = base_config();
    j.erase("seed");
    CHECK(message(j).find("seed") != std::string::npos);
    j = base_config();
    j["filters"] = Json::array();
    CHECK(message(j).find("filters") != std::string::npos);
    j = base_config();
    j["filters"][1]["calibration"]["r"] = 2.0;
    CHECK(message(j).find("filters[1].calibration.r") != std::string::npos);
    j = base_config();
    j["contamination"]["law"]["cov"] = Json::parse("[[-1]]");
    CHECK(message(j).find("contamination") != std::string::npos);
    j = base_config();
    j["contamination"]["kind"] = "SO";
    j["contamination"]["law"] = {{"type", "least_favorable"}};
    CHECK(message(j).find("horizon 1") != std::string::npos);
    j = base_config();
    j["filters"][2]["calibration"] = {{"method", "delta"}, {"delta", 0.1}};
    CHECK(message(j).find("filters[2].calibration.method") != std::string::npos);
}

TEST_CASE("least favorable SO contamination on the one-step model") {
    Json j = base_config();
    j["horizon"] = 1;
    j["replications"] = 2000;
    j["contamination"] = {{"kind", "SO"}, {"radius", 0.1}, {"law", {{"type", "least_favorable"}}}};
    j["filters"] = Json::parse(R"([{"name": "kf", "type": "classical"},
        {"name": "rls", "type": "rls-ao", "calibration": {"method": "radius", "r": 0.1}}])");
    const ExperimentReport r = run_experiment(experiment_config_from_json(j));
    CHECK(r.hit_rate > 0.07);
    CHECK(r.hit_rate < 0.13);
    CHECK(r.filter("rls").aggregate < r.filter("kf").aggregate);
}

TEST_CASE("empirical covariance schedule") {
    FilterConfig f;
    f.name = "emp";
    f.kind = FilterKind::RlsAo;
    f.calibration.method = CalibrationMethod::Radius;
    f.calibration.parameter = 0.1;
    f.covariance = CovarianceMode::Empirical;
    f.pilot_replications = 2000;
    const ModelSpec m = ModelSpec::scalar_unit();
    const FilterSchedule emp = build_schedule(m, f, 40, 9);
    f.covariance = CovarianceMode::Classical;
    const FilterSchedule cls = build_schedule(m, f, 40, 9);
    // the clipped filter is less efficient, so its tracked error variance is larger
    CHECK(emp.steps.back().sigma_filt(0, 0) > cls.steps.back().sigma_filt(0, 0));
    CHECK(emp.steps.back().b.value() > 0.0);
    const FilterSchedule again = build_schedule(m, f, 40, 9);
    CHECK(again.steps.back().b == cls.steps.back().b);
}

TEST_CASE("diagnostics attached to the report") {
    Json j = base_config();
    j["contamination"] = nullptr;
    j["replications"] = 500;
    j["filters"] = Json::parse(R"([{"name": "kf", "type": "classical"}])");
    j["diagnostics"] = {{"alpha", 0.05}, {"eso_radius", 0.1}};
    const ExperimentReport r = run_experiment(experiment_config_from_json(j));
    const auto& f = r.filter("kf");
    REQUIRE(f.linearity);
    REQUIRE(f.normality);
    REQUIRE(f.domination);
    CHECK(f.linearity->n == 500);
    CHECK_FALSE(f.normality->reject_at_001);
}
