#include "rkf/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "rkf/errors.hpp"
#include "rkf/kalman.hpp"
#include "rkf/minimax.hpp"
#include "rkf/rng.hpp"

namespace rkf {

namespace {

constexpr std::size_t kChunkSize = 128;
constexpr const char* kLibraryVersion = "robustkf 0.1.0";

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw ValidationError(path + ": " + msg);
}

double number_at(const Json& j, const char* key, const std::string& path) {
    if (!j.contains(key)) fail(path + "." + key, "missing");
    return double_from_json(j[key], path + "." + key);
}

std::size_t count_at(const Json& j, const char* key, const std::string& path) {
    if (!j.contains(key)) fail(path + "." + key, "missing");
    const Json& v = j[key];
    if (!v.is_number_integer() || v.get<long long>() < 0)
        fail(path + "." + key, "expected a nonnegative integer");
    return v.get<std::size_t>();
}

CalibrationSpec calibration_from_json(const Json& j, const std::string& path) {
    CalibrationSpec c;
    if (!j.is_object()) fail(path, "expected an object");
    std::string method = "fixed";
    if (j.contains("method")) {
        if (!j["method"].is_string()) fail(path + ".method", "expected a string");
        method = j["method"].get<std::string>();
    }
    if (j.contains("engine")) c.engine = engine_from_json(j["engine"], path + ".engine");
    if (method == "fixed") {
        c.method = CalibrationMethod::Fixed;
        if (!j.contains("b")) fail(path + ".b", "missing");
        c.b = clip_height_from_json(j["b"], path + ".b");
    } else if (method == "radius") {
        c.method = CalibrationMethod::Radius;
        c.parameter = number_at(j, "r", path);
        if (!(c.parameter >= 0.0 && c.parameter <= 1.0)) fail(path + ".r", "must lie in [0, 1]");
    } else if (method == "delta") {
        c.method = CalibrationMethod::Delta;
        c.parameter = number_at(j, "delta", path);
        if (!(c.parameter >= 0.0)) fail(path + ".delta", "must be >= 0");
    } else if (method == "radius-range") {
        c.method = CalibrationMethod::RadiusRange;
        c.parameter = number_at(j, "r_l", path);
        c.parameter_upper = number_at(j, "r_u", path);
        if (!(c.parameter >= 0.0 && c.parameter < c.parameter_upper && c.parameter_upper <= 1.0))
            fail(path, "need 0 <= r_l < r_u <= 1");
    } else {
        fail(path + ".method", "expected fixed, radius, delta or radius-range");
    }
    return c;
}

Json calibration_to_json(const CalibrationSpec& c) {
    Json j;
    j["method"] = to_string(c.method);
    switch (c.method) {
        case CalibrationMethod::Fixed: j["b"] = to_json(c.b); break;
        case CalibrationMethod::Radius: j["r"] = to_json(c.parameter); break;
        case CalibrationMethod::Delta: j["delta"] = to_json(c.parameter); break;
        case CalibrationMethod::RadiusRange:
            j["r_l"] = to_json(c.parameter);
            j["r_u"] = to_json(c.parameter_upper);
            break;
    }
    j["engine"] = to_json(c.engine);
    return j;
}

FilterStep make_step(const ModelSpec& model, std::size_t t, const Matrix& sigma_pred,
                     const FilterConfig& filter) {
    FilterState s;
    s.t = t;
    s.x_pred = Vector::Zero(model.p);
    s.sigma_pred = sigma_pred;
    s = kf_gain(s, model);

    FilterStep step;
    step.sigma_pred = s.sigma_pred;
    step.sigma_filt = s.sigma_filt;
    step.gain = s.gain;
    step.delta = s.delta;
    if (filter.kind == FilterKind::RlsIo) step.z_inv = invert_observation(model.z(t));
    if (filter.kind == FilterKind::Classical) return step;

    const CalibrationSpec& cal = filter.calibration;
    ClipCalibration rec;
    switch (cal.method) {
        case CalibrationMethod::Fixed:
            rec.b = cal.b;
            rec.method = CalibrationMethod::Fixed;
            rec.engine = "none";
            break;
        case CalibrationMethod::Radius:
            rec = filter.kind == FilterKind::RlsIo
                      ? calibrate_b_io(s.gain, model.z(t), s.delta, cal.parameter, cal.engine)
                      : calibrate_b_radius(s.gain, s.delta, cal.parameter, cal.engine);
            break;
        case CalibrationMethod::Delta:
            rec = calibrate_b_delta(s.gain, s.delta, s.sigma_filt.trace(), cal.parameter, cal.engine);
            break;
        case CalibrationMethod::RadiusRange: {
            const RadiusSolution sol = solve_least_favorable_radius(
                cal.parameter, cal.parameter_upper, IdealPair::from_filter_state(s, model), cal.engine);
            rec = calibrate_b_radius(s.gain, s.delta, sol.r0, cal.engine);
            rec.method = CalibrationMethod::RadiusRange;
            rec.parameter = cal.parameter;
            rec.parameter_upper = cal.parameter_upper;
            break;
        }
    }
    step.b = rec.b;
    step.calibration = rec;
    return step;
}

bool same_inputs(const ModelSpec& model, std::size_t t, const FilterStep& prev,
                 const Matrix& sigma_pred) {
    return t > 1 && prev.sigma_pred == sigma_pred && model.z(t) == model.z(t - 1) &&
           model.v_cov(t) == model.v_cov(t - 1);
}

FilterStep reuse_step(const FilterStep& prev) { return prev; }

Vector correction(const FilterConfig& f, const FilterStep& step, const Vector& dy) {
    switch (f.kind) {
        case FilterKind::Classical: return step.gain * dy;
        case FilterKind::RlsAo: return rls_ao_correction(step.gain, dy, step.b);
        case FilterKind::RlsIo: return rls_io_correction(step.gain, step.z_inv, dy, step.b);
    }
    return step.gain * dy;
}

FilterSchedule classical_covariance_schedule(const ModelSpec& model, const FilterConfig& filter,
                                             std::size_t T) {
    FilterSchedule sched{filter, {}};
    sched.steps.reserve(T);
    Matrix sigma_filt = model.Q0;
    for (std::size_t t = 1; t <= T; ++t) {
        const Matrix& f = model.f(t);
        const Matrix sigma_pred = f * sigma_filt * f.transpose() + model.q_cov(t);
        if (!sched.steps.empty() && same_inputs(model, t, sched.steps.back(), sigma_pred))
            sched.steps.push_back(reuse_step(sched.steps.back()));
        else
            sched.steps.push_back(make_step(model, t, sigma_pred, filter));
        sigma_filt = sched.steps.back().sigma_filt;
    }
    return sched;
}

// Sigma_{t|t} replaced by the mean squared error matrix of the filter itself
// over a pilot set of ideal replications.
FilterSchedule empirical_covariance_schedule(const ModelSpec& model, const FilterConfig& filter,
                                             std::size_t T, std::uint64_t seed) {
    const std::size_t K = filter.pilot_replications;
    std::vector<Trajectory> pilot;
    pilot.reserve(K);
    for (std::size_t k = 0; k < K; ++k)
        pilot.push_back(simulate_ideal(model, T, derive_seed(seed, Stream::Bootstrap, k)));
    std::vector<Vector> xf(K, model.a0);

    FilterSchedule sched{filter, {}};
    sched.steps.reserve(T);
    Matrix sigma_filt = model.Q0;
    for (std::size_t t = 1; t <= T; ++t) {
        const Matrix& f = model.f(t);
        const Matrix& z = model.z(t);
        const Matrix sigma_pred = symmetrized(f * sigma_filt * f.transpose() + model.q_cov(t));
        FilterStep step = (!sched.steps.empty() && same_inputs(model, t, sched.steps.back(), sigma_pred))
                              ? reuse_step(sched.steps.back())
                              : make_step(model, t, sigma_pred, filter);
        Matrix mse = Matrix::Zero(model.p, model.p);
        for (std::size_t k = 0; k < K; ++k) {
            const Vector x_pred = f * xf[k];
            xf[k] = x_pred + correction(filter, step, pilot[k].y[t - 1] - z * x_pred);
            const Vector e = pilot[k].x[t] - xf[k];
            mse.noalias() += e * e.transpose();
        }
        step.sigma_filt = symmetrized(mse / static_cast<double>(K));
        sigma_filt = step.sigma_filt;
        sched.steps.push_back(std::move(step));
    }
    return sched;
}

FilterKind filter_kind_from_string(const std::string& s, const std::string& path) {
    if (s == "classical") return FilterKind::Classical;
    if (s == "rls-ao") return FilterKind::RlsAo;
    if (s == "rls-io") return FilterKind::RlsIo;
    fail(path, "expected classical, rls-ao or rls-io; got '" + s + "'");
}

long double se_of_mean(long double sum, long double sumsq, std::size_t n) {
    if (n < 2) return 0.0L;
    const long double nn = static_cast<long double>(n);
    const long double var = std::max(0.0L, (sumsq - sum * sum / nn) / (nn - 1.0L));
    return std::sqrt(var / nn);
}

struct Moments {
    long double sum = 0.0L;
    long double sumsq = 0.0L;
    void add(long double v) {
        sum += v;
        sumsq += v * v;
    }
    void merge(const Moments& o) {
        sum += o.sum;
        sumsq += o.sumsq;
    }
};

struct FilterAccum {
    std::vector<Moments> per_t;
    Moments aggregate;
    Moments paired;
};

struct ChunkAccum {
    std::vector<FilterAccum> filters;
    std::size_t hits = 0;
};

struct LeastFavorableSetup {
    IdealPair pair;
    SaddlePoint saddle;
    LeastFavorableSampler sampler;
};

LeastFavorableSetup make_least_favorable(const ModelSpec& model, double r) {
    const FilterState pred = predicted_at(model, 1);
    IdealPair pair = IdealPair::gaussian_linear(pred.sigma_pred, model.z(1), model.v_cov(1),
                                                model.f(1) * model.a0);
    SaddlePoint sp = solve_rho(pair, r);
    LeastFavorableSampler sampler(pair, sp);
    return {std::move(pair), sp, std::move(sampler)};
}

}  // namespace

const char* to_string(FilterKind k) {
    switch (k) {
        case FilterKind::Classical: return "classical";
        case FilterKind::RlsAo: return "rls-ao";
        case FilterKind::RlsIo: return "rls-io";
    }
    return "?";
}

FilterConfig filter_config_from_json(const Json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    FilterConfig f;
    if (!j.contains("type") || !j["type"].is_string()) fail(path + ".type", "missing");
    f.kind = filter_kind_from_string(j["type"].get<std::string>(), path + ".type");
    f.name = j.contains("name") ? j["name"].get<std::string>() : to_string(f.kind);
    if (f.kind != FilterKind::Classical) {
        if (!j.contains("calibration")) fail(path + ".calibration", "missing");
        f.calibration = calibration_from_json(j["calibration"], path + ".calibration");
        if (f.kind == FilterKind::RlsIo && (f.calibration.method == CalibrationMethod::Delta ||
                                            f.calibration.method == CalibrationMethod::RadiusRange))
            fail(path + ".calibration.method", "rls-io supports fixed and radius calibration only");
    } else if (j.contains("calibration")) {
        fail(path + ".calibration", "not used by the classical filter");
    }
    if (j.contains("covariance")) {
        const std::string cov = j["covariance"].get<std::string>();
        if (cov == "classical") {
            f.covariance = CovarianceMode::Classical;
        } else if (cov == "empirical") {
            if (f.kind == FilterKind::Classical)
                fail(path + ".covariance", "empirical covariance applies to rLS filters only");
            f.covariance = CovarianceMode::Empirical;
        } else {
            fail(path + ".covariance", "expected classical or empirical");
        }
    }
    if (j.contains("pilot_replications")) {
        f.pilot_replications = count_at(j, "pilot_replications", path);
        if (f.pilot_replications < 2) fail(path + ".pilot_replications", "must be at least 2");
    }
    return f;
}

Json to_json(const FilterConfig& f) {
    Json j;
    j["name"] = f.name;
    j["type"] = to_string(f.kind);
    if (f.kind != FilterKind::Classical) {
        j["calibration"] = calibration_to_json(f.calibration);
        j["covariance"] = f.covariance == CovarianceMode::Classical ? "classical" : "empirical";
        if (f.covariance == CovarianceMode::Empirical) j["pilot_replications"] = f.pilot_replications;
    }
    return j;
}

void ExperimentConfig::validate() const {
    model.validate();
    if (horizon < 1) fail("horizon", "must be at least 1");
    if (horizon > model.max_horizon())
        fail("horizon", "exceeds the length of the time-varying model matrices");
    if (replications < 1) fail("replications", "must be at least 1");
    if (filters.empty()) fail("filters", "at least one filter required");
    for (std::size_t i = 0; i < filters.size(); ++i)
        for (std::size_t k = 0; k < i; ++k)
            if (filters[i].name == filters[k].name)
                fail("filters[" + std::to_string(i) + "].name", "duplicate name '" + filters[i].name + "'");
    if (contamination) {
        if (contamination->least_favorable) {
            if (contamination->spec.kind != ContaminationKind::SO)
                fail("contamination.law", "least_favorable requires kind SO");
            if (horizon != 1) fail("contamination.law", "least_favorable requires horizon 1");
            if (!(contamination->spec.radius > 0.0 && contamination->spec.radius < 1.0))
                fail("contamination.radius", "least_favorable requires 0 < r < 1");
        } else {
            try {
                contamination->spec.validate(model);
            } catch (const ValidationError& e) {
                fail("contamination", e.what());
            }
        }
    }
    if (diagnostics && diagnostics->time > horizon) fail("diagnostics.time", "exceeds the horizon");
    if (diagnostics && !(diagnostics->alpha > 0.0 && diagnostics->alpha < 1.0))
        fail("diagnostics.alpha", "must lie in (0, 1)");
    if (threads < 1) fail("threads", "must be at least 1");
}

ExperimentConfig experiment_config_from_json(const Json& j) {
    if (!j.is_object()) fail("config", "expected an object");
    ExperimentConfig c;
    if (!j.contains("model")) fail("model", "missing");
    c.model = model_from_json(j["model"], "model");
    c.horizon = count_at(j, "horizon", "config");
    c.replications = count_at(j, "replications", "config");
    if (!j.contains("seed") || !j["seed"].is_number_integer() ||
        (!j["seed"].is_number_unsigned() && j["seed"].get<long long>() < 0))
        fail("seed", "missing or not a nonnegative integer");
    c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("contamination") && !j["contamination"].is_null()) {
        const Json& cj = j["contamination"];
        ExperimentContamination ec;
        const bool lf = cj.is_object() && cj.contains("law") && cj["law"].is_object() &&
                        cj["law"].value("type", "") == "least_favorable";
        if (lf) {
            Json stripped = cj;
            stripped["law"] = {{"type", "scaled_ideal"}, {"kappa", 1.0}};
            ec.spec = contamination_from_json(stripped, "contamination");
            ec.least_favorable = true;
        } else {
            ec.spec = contamination_from_json(cj, "contamination");
        }
        c.contamination = ec;
    }
    if (!j.contains("filters") || !j["filters"].is_array()) fail("filters", "missing or not an array");
    for (std::size_t i = 0; i < j["filters"].size(); ++i)
        c.filters.push_back(
            filter_config_from_json(j["filters"][i], "filters[" + std::to_string(i) + "]"));
    if (j.contains("diagnostics") && !j["diagnostics"].is_null()) {
        const Json& dj = j["diagnostics"];
        if (!dj.is_object()) fail("diagnostics", "expected an object");
        DiagnosticsConfig d;
        if (dj.contains("time")) d.time = count_at(dj, "time", "diagnostics");
        if (dj.contains("alpha")) d.alpha = number_at(dj, "alpha", "diagnostics");
        if (dj.contains("eso_radius")) d.eso_radius = number_at(dj, "eso_radius", "diagnostics");
        c.diagnostics = d;
    }
    if (j.contains("outputs") && j["outputs"].is_object()) {
        const Json& o = j["outputs"];
        if (o.contains("report")) c.report_path = o["report"].get<std::string>();
        if (o.contains("csv")) c.csv_path = o["csv"].get<std::string>();
    }
    if (j.contains("threads")) c.threads = static_cast<unsigned>(count_at(j, "threads", "config"));
    c.validate();
    return c;
}

Json to_json(const ExperimentConfig& c) {
    Json j;
    j["model"] = to_json(c.model);
    j["horizon"] = c.horizon;
    j["replications"] = c.replications;
    j["seed"] = c.seed;
    if (c.contamination) {
        Json cj = to_json(c.contamination->spec);
        if (c.contamination->least_favorable) cj["law"] = {{"type", "least_favorable"}};
        j["contamination"] = cj;
    } else {
        j["contamination"] = nullptr;
    }
    Json filters = Json::array();
    for (const auto& f : c.filters) filters.push_back(to_json(f));
    j["filters"] = filters;
    if (c.diagnostics) {
        Json d;
        d["time"] = c.diagnostics->time;
        d["alpha"] = c.diagnostics->alpha;
        if (c.diagnostics->eso_radius) d["eso_radius"] = *c.diagnostics->eso_radius;
        j["diagnostics"] = d;
    }
    return j;
}

FilterSchedule build_schedule(const ModelSpec& model, const FilterConfig& filter, std::size_t T,
                              std::uint64_t seed) {
    if (filter.covariance == CovarianceMode::Empirical)
        return empirical_covariance_schedule(model, filter, T, seed);
    return classical_covariance_schedule(model, filter, T);
}

std::vector<Vector> run_filter(const ModelSpec& model, const FilterSchedule& schedule,
                               const std::vector<Vector>& y) {
    if (y.size() > schedule.steps.size())
        throw ValidationError("run_filter: more observations than schedule steps");
    std::vector<Vector> out;
    out.reserve(y.size());
    Vector x = model.a0;
    for (std::size_t t = 1; t <= y.size(); ++t) {
        const Vector x_pred = model.f(t) * x;
        const Vector& obs = y[t - 1];
        if (obs.size() != model.q) throw ValidationError("observation dimension does not match q");
        x = x_pred + correction(schedule.config, schedule.steps[t - 1], obs - model.z(t) * x_pred);
        out.push_back(x);
    }
    return out;
}

const FilterSeries& ExperimentReport::filter(const std::string& name) const {
    for (const auto& f : filters)
        if (f.name == name) return f;
    throw ValidationError("no filter named '" + name + "' in the report");
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    const ModelSpec& model = config.model;
    const std::size_t T = config.horizon;
    const std::size_t N = config.replications;
    const std::size_t F = config.filters.size();

    ExperimentReport report;
    report.replications = N;
    report.horizon = T;
    report.config = to_json(config);
    report.filters.resize(F);

    std::vector<std::optional<FilterSchedule>> schedules(F);
    for (std::size_t i = 0; i < F; ++i) {
        FilterSeries& s = report.filters[i];
        s.name = config.filters[i].name;
        s.kind = config.filters[i].kind;
        try {
            schedules[i] = build_schedule(model, config.filters[i], T,
                                          derive_seed(config.seed, Stream::Bootstrap, i));
        } catch (const UnsupportedModelError& e) {
            s.ok = false;
            s.error = e.what();
            continue;
        }
        const auto& steps = schedules[i]->steps;
        for (std::size_t t = 1; t <= T; ++t) {
            const auto& cal = steps[t - 1].calibration;
            if (!cal) continue;
            if (t > 1 && steps[t - 2].calibration && steps[t - 2].b == steps[t - 1].b &&
                steps[t - 2].sigma_pred == steps[t - 1].sigma_pred)
                continue;
            s.calibrations.push_back(*cal);
            s.calibration_times.push_back(t);
        }
    }
    std::optional<std::size_t> ref;
    for (std::size_t i = 0; i < F; ++i)
        if (schedules[i]) {
            ref = i;
            break;
        }
    if (ref) report.reference = report.filters[*ref].name;

    std::optional<LeastFavorableSetup> lf;
    if (config.contamination && config.contamination->least_favorable)
        lf = make_least_favorable(model, config.contamination->spec.radius);

    const std::size_t diag_t =
        config.diagnostics ? (config.diagnostics->time == 0 ? T : config.diagnostics->time) : 0;
    std::vector<Matrix> diag_errors;
    if (diag_t) diag_errors.assign(F, Matrix::Zero(static_cast<Eigen::Index>(N), model.p));

    const std::size_t chunks = (N + kChunkSize - 1) / kChunkSize;
    std::vector<ChunkAccum> accum(chunks);

    const auto run_chunk = [&](std::size_t c) {
        ChunkAccum& acc = accum[c];
        acc.filters.assign(F, FilterAccum{std::vector<Moments>(T), {}, {}});
        std::vector<double> agg(F, 0.0);
        const std::size_t end = std::min(N, (c + 1) * kChunkSize);
        for (std::size_t i = c * kChunkSize; i < end; ++i) {
            const std::uint64_t rep = derive_seed(config.seed, Stream::Replication, i);
            Trajectory tr = simulate_ideal(model, T, derive_seed(rep, Stream::Simulation));
            if (lf) {
                Rng hit_rng(derive_seed(rep, Stream::Contamination, 0));
                Rng law_rng(derive_seed(rep, Stream::Contamination, 1));
                if (hit_rng.bernoulli(lf->saddle.r)) {
                    tr.y[0] = lf->sampler.draw(law_rng);
                    tr.hits[0] = true;
                }
            } else if (config.contamination) {
                tr = contaminate(model, tr, config.contamination->spec,
                                 derive_seed(rep, Stream::Contamination));
            }
            acc.hits += static_cast<std::size_t>(std::count(tr.hits.begin(), tr.hits.end(), true));

            for (std::size_t f = 0; f < F; ++f) {
                if (!schedules[f]) continue;
                const std::vector<Vector> xs = run_filter(model, *schedules[f], tr.y);
                double total = 0.0;
                for (std::size_t t = 1; t <= T; ++t) {
                    const Vector e = tr.x[t] - xs[t - 1];
                    const double se = e.squaredNorm();
                    acc.filters[f].per_t[t - 1].add(se);
                    total += se;
                    if (t == diag_t) diag_errors[f].row(static_cast<Eigen::Index>(i)) = e.transpose();
                }
                agg[f] = total / static_cast<double>(T);
                acc.filters[f].aggregate.add(agg[f]);
            }
            if (ref)
                for (std::size_t f = 0; f < F; ++f)
                    if (schedules[f]) acc.filters[f].paired.add(agg[f] - agg[*ref]);
        }
    };

    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(std::max(1u, config.threads), chunks));
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t c; (c = next.fetch_add(1)) < chunks;) run_chunk(c);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    // Reduce in chunk order so the sums do not depend on scheduling.
    std::vector<FilterAccum> total(F, FilterAccum{std::vector<Moments>(T), {}, {}});
    for (const auto& acc : accum) {
        report.hits += acc.hits;
        for (std::size_t f = 0; f < F; ++f) {
            for (std::size_t t = 0; t < T; ++t) total[f].per_t[t].merge(acc.filters[f].per_t[t]);
            total[f].aggregate.merge(acc.filters[f].aggregate);
            total[f].paired.merge(acc.filters[f].paired);
        }
    }
    report.hit_rate = static_cast<double>(report.hits) / static_cast<double>(N * T);

    const long double n = static_cast<long double>(N);
    for (std::size_t f = 0; f < F; ++f) {
        FilterSeries& s = report.filters[f];
        if (!s.ok) continue;
        s.mse.resize(T);
        s.mse_se.resize(T);
        for (std::size_t t = 0; t < T; ++t) {
            s.mse[t] = static_cast<double>(total[f].per_t[t].sum / n);
            s.mse_se[t] = static_cast<double>(se_of_mean(total[f].per_t[t].sum, total[f].per_t[t].sumsq, N));
        }
        s.aggregate = static_cast<double>(total[f].aggregate.sum / n);
        s.aggregate_se = static_cast<double>(se_of_mean(total[f].aggregate.sum, total[f].aggregate.sumsq, N));
        if (ref && f != *ref) {
            s.paired_difference = static_cast<double>(total[f].paired.sum / n);
            s.paired_se = static_cast<double>(se_of_mean(total[f].paired.sum, total[f].paired.sumsq, N));
        }
        if (!diag_t) continue;
        const Matrix& errs = diag_errors[f];
        try {
            if (N >= 10) s.linearity = linearity_test(errs, config.diagnostics->alpha);
        } catch (const NumericalError&) {
        }
        if (model.p == 1 && N >= 100) {
            std::vector<double> v(errs.data(), errs.data() + errs.size());
            try {
                s.normality = normality_probe(v);
            } catch (const NumericalError&) {
            }
            if (config.diagnostics->eso_radius) {
                const Matrix& sig = schedules[f]->steps[diag_t - 1].sigma_filt;
                const double sd = std::sqrt(sig(0, 0));
                if (sd > 0.0)
                    s.domination = eso_domination_probe(errs, sig, *config.diagnostics->eso_radius,
                                                        symmetric_grid(6.0 * sd, sd / 20.0));
            }
        }
    }
    return report;
}

Json to_json(const ExperimentReport& r) {
    const auto arr = [](const std::vector<double>& v) {
        Json a = Json::array();
        for (double x : v) a.push_back(to_json(x));
        return a;
    };
    Json j;
    j["replications"] = r.replications;
    j["horizon"] = r.horizon;
    j["hits"] = r.hits;
    j["hit_rate"] = to_json(r.hit_rate);
    j["reference"] = r.reference;
    Json filters = Json::array();
    for (const auto& s : r.filters) {
        Json f;
        f["name"] = s.name;
        f["type"] = to_string(s.kind);
        f["status"] = s.ok ? "ok" : "error";
        if (!s.ok) {
            f["error"] = s.error;
            filters.push_back(f);
            continue;
        }
        f["aggregate_mse"] = to_json(s.aggregate);
        f["aggregate_se"] = to_json(s.aggregate_se);
        if (s.paired_difference) {
            f["paired_difference"] = to_json(*s.paired_difference);
            f["paired_se"] = to_json(*s.paired_se);
        }
        Json cals = Json::array();
        for (std::size_t k = 0; k < s.calibrations.size(); ++k) {
            Json c = to_json(s.calibrations[k]);
            c["t"] = s.calibration_times[k];
            cals.push_back(c);
        }
        f["calibrations"] = cals;
        f["mse"] = arr(s.mse);
        f["mse_se"] = arr(s.mse_se);
        if (s.linearity || s.normality || s.domination) {
            Json d;
            if (s.linearity) d["linearity"] = to_json(*s.linearity);
            if (s.normality)
                d["normality"] = {{"ks_distance", to_json(s.normality->ks_distance)},
                                  {"critical", to_json(s.normality->critical)},
                                  {"reject_at_001", s.normality->reject_at_001}};
            if (s.domination)
                d["eso_domination"] = {{"holds", s.domination->holds},
                                       {"margin", to_json(s.domination->margin)},
                                       {"bandwidth", to_json(s.domination->bandwidth)}};
            f["diagnostics"] = d;
        }
        filters.push_back(f);
    }
    j["filters"] = filters;
    j["runtime"] = {{"library", kLibraryVersion}, {"chunk_size", kChunkSize}};
    j["config"] = r.config;
    return j;
}

std::string to_csv(const ExperimentReport& r) {
    std::ostringstream os;
    os << "t";
    for (const auto& s : r.filters)
        if (s.ok) os << ',' << s.name << "_mse," << s.name << "_se";
    os << '\n';
    for (std::size_t t = 0; t < r.horizon; ++t) {
        os << t + 1;
        for (const auto& s : r.filters)
            if (s.ok) os << ',' << format_double(s.mse[t]) << ',' << format_double(s.mse_se[t]);
        os << '\n';
    }
    return os.str();
}

}  // namespace rkf
