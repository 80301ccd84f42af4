#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rkf/diagnostics.hpp"
#include "rkf/expectation.hpp"
#include "rkf/model.hpp"
#include "rkf/rls.hpp"
#include "rkf/serialize.hpp"

namespace rkf {

enum class FilterKind { Classical, RlsAo, RlsIo };

const char* to_string(FilterKind k);

/// How the rLS filters obtain Sigma_{t|t-1}: the classical Riccati recursion,
/// or an empirical error covariance tracked on a pilot set of ideal
/// replications.
enum class CovarianceMode { Classical, Empirical };

struct CalibrationSpec {
    CalibrationMethod method = CalibrationMethod::Fixed;
    ClipHeight b;                  // Fixed
    double parameter = 0.0;        // r, delta or r_l
    double parameter_upper = 0.0;  // r_u
    Engine engine;
};

struct FilterConfig {
    std::string name;
    FilterKind kind = FilterKind::Classical;
    CalibrationSpec calibration;
    CovarianceMode covariance = CovarianceMode::Classical;
    std::size_t pilot_replications = 1000;
};

struct ExperimentContamination {
    ContaminationSpec spec;
    /// SO by the least-favorable contaminating law of the saddle point at
    /// spec.radius (one-step experiments only).
    bool least_favorable = false;
};

struct DiagnosticsConfig {
    std::size_t time = 0;  // 0 means the horizon
    double alpha = 0.05;
    std::optional<double> eso_radius;
};

struct ExperimentConfig {
    ModelSpec model;
    std::size_t horizon = 1;
    std::size_t replications = 1;
    std::uint64_t seed = 0;
    std::optional<ExperimentContamination> contamination;
    std::vector<FilterConfig> filters;
    std::optional<DiagnosticsConfig> diagnostics;
    std::string report_path;  // empty: not written by the library
    std::string csv_path;
    unsigned threads = 1;

    void validate() const;
};

ExperimentConfig experiment_config_from_json(const Json& j);
Json to_json(const ExperimentConfig& c);

FilterConfig filter_config_from_json(const Json& j, const std::string& path);
Json to_json(const FilterConfig& f);

/// Per-time quantities a filter runs with: Sigma_{t|t-1}, gain, Delta,
/// Sigma_{t|t} and the clipping height b_t.
struct FilterStep {
    Matrix sigma_pred;
    Matrix sigma_filt;
    Matrix gain;
    Matrix delta;
    Matrix z_inv;  // rLS.IO only
    ClipHeight b;
    std::optional<ClipCalibration> calibration;
};

struct FilterSchedule {
    FilterConfig config;
    std::vector<FilterStep> steps;  // index t-1
};

/// Precomputes the schedule for T steps. Calibrations are redone at every t
/// and reused when Sigma_{t|t-1} repeats exactly.
FilterSchedule build_schedule(const ModelSpec& model, const FilterConfig& filter, std::size_t T,
                              std::uint64_t seed);

/// Filtered means X_{t|t}, t = 1..T, for the observations y_1..y_T.
std::vector<Vector> run_filter(const ModelSpec& model, const FilterSchedule& schedule,
                               const std::vector<Vector>& y);

struct FilterSeries {
    std::string name;
    FilterKind kind = FilterKind::Classical;
    bool ok = true;
    std::string error;
    std::vector<ClipCalibration> calibrations;  // distinct calibrations in time order
    std::vector<std::size_t> calibration_times;
    std::vector<double> mse;  // per t
    std::vector<double> mse_se;
    double aggregate = 0.0;  // mean over t and replications
    double aggregate_se = 0.0;
    std::optional<double> paired_difference;  // vs the reference filter
    std::optional<double> paired_se;
    std::optional<LinTestResult> linearity;
    std::optional<NormalityResult> normality;
    std::optional<DominationResult> domination;
};

struct ExperimentReport {
    std::size_t replications = 0;
    std::size_t horizon = 0;
    std::string reference;  // name of the filter paired differences refer to
    double hit_rate = 0.0;
    std::size_t hits = 0;
    std::vector<FilterSeries> filters;
    Json config;

    const FilterSeries& filter(const std::string& name) const;
};

ExperimentReport run_experiment(const ExperimentConfig& config);

Json to_json(const ExperimentReport& r);
/// Header t,<name>_mse,<name>_se for each successful filter.
std::string to_csv(const ExperimentReport& r);

}  // namespace rkf
