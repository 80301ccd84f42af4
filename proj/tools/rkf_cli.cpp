// rkf: command-line front end for the robust Kalman filtering library.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "rkf/diagnostics.hpp"
#include "rkf/errors.hpp"
#include "rkf/experiment.hpp"
#include "rkf/kalman.hpp"
#include "rkf/minimax.hpp"
#include "rkf/rls.hpp"
#include "rkf/rng.hpp"
#include "rkf/serialize.hpp"

using namespace rkf;

namespace {

enum class Format { Csv, Json };

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format;
};

void add_common(CLI::App* cmd, Common& c, const std::string& default_format) {
    cmd->add_option("--config", c.config, "JSON configuration file")->required();
    cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
    cmd->add_option("--out", c.out, "output path (default: stdout)");
    c.format = default_format;
    cmd->add_option("--format", c.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
}

Format format_of(const Common& c) { return c.format == "csv" ? Format::Csv : Format::Json; }

void emit(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        std::cout.flush();
    } else {
        write_file_atomic(path, content);
    }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// key,value rows for the scalar leaves of a JSON document.
void flatten(const Json& j, const std::string& prefix, std::ostringstream& os) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it)
            flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), os);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i)
            flatten(j[i], prefix + "[" + std::to_string(i) + "]", os);
    } else if (j.is_number_float()) {
        os << prefix << ',' << format_double(j.get<double>()) << '\n';
    } else if (j.is_string()) {
        os << prefix << ',' << j.get<std::string>() << '\n';
    } else {
        os << prefix << ',' << j.dump() << '\n';
    }
}

std::string render(const Json& j, Format f) {
    if (f == Format::Json) return dump(j);
    std::ostringstream os;
    os << "key,value\n";
    flatten(j, "", os);
    return os.str();
}

std::uint64_t resolve_seed(const Common& c, const Json& cfg, bool required) {
    if (c.seed) return *c.seed;
    if (cfg.contains("seed")) {
        if (!cfg["seed"].is_number_unsigned())
            throw ValidationError("seed: expected a nonnegative integer");
        return cfg["seed"].get<std::uint64_t>();
    }
    if (required) throw ValidationError("seed: missing (pass --seed or set it in the config)");
    return 0;
}

std::size_t horizon_of(const Json& cfg) {
    if (!cfg.contains("horizon") || !cfg["horizon"].is_number_unsigned() ||
        cfg["horizon"].get<std::size_t>() < 1)
        throw ValidationError("horizon: missing or not a positive integer");
    return cfg["horizon"].get<std::size_t>();
}

Engine engine_of(const Json& cfg, const Common& c) {
    Engine e = cfg.contains("engine") ? engine_from_json(cfg["engine"]) : Engine{};
    if (c.seed) e.seed = *c.seed;
    return e;
}

// The ideal pair is either given directly or taken from the model's
// prediction step at `time` (default: steady state, else t = 1).
struct PairSource {
    IdealPair pair;
    std::optional<FilterState> state;
    std::optional<ModelSpec> model;
    std::size_t time = 0;  // 0: steady state or not from a model
};

PairSource pair_of(const Json& cfg, std::optional<std::size_t> time) {
    if (cfg.contains("ideal")) {
        if (time) throw ValidationError("--time applies to model configs only");
        return {ideal_from_json(cfg["ideal"]), std::nullopt, std::nullopt, 0};
    }
    if (!cfg.contains("model")) throw ValidationError("config: needs \"model\" or \"ideal\"");
    ModelSpec model = model_from_json(cfg["model"]);
    std::optional<std::size_t> t = time;
    if (!t && cfg.contains("time")) t = cfg["time"].get<std::size_t>();
    FilterState s;
    if (t) {
        if (*t < 1) throw ValidationError("time: must be at least 1");
        if (*t > model.max_horizon()) throw ValidationError("time: beyond the model's horizon");
        s = predicted_at(model, *t);
    } else if (model.time_invariant()) {
        s = steady_state(model);
    } else {
        s = predicted_at(model, 1);
        t = 1;
    }
    IdealPair pair = IdealPair::from_filter_state(s, model);
    return {std::move(pair), s, std::move(model), t.value_or(0)};
}

std::optional<ContaminationSpec> contamination_of(const Json& cfg) {
    if (!cfg.contains("contamination") || cfg["contamination"].is_null()) return std::nullopt;
    return contamination_from_json(cfg["contamination"]);
}

Trajectory simulate_from(const Json& cfg, const ModelSpec& model, std::uint64_t seed) {
    const std::size_t T = horizon_of(cfg);
    Trajectory tr = simulate_ideal(model, T, derive_seed(seed, Stream::Simulation));
    if (auto spec = contamination_of(cfg)) {
        spec->validate(model);
        tr = contaminate(model, tr, *spec, derive_seed(seed, Stream::Contamination));
    }
    return tr;
}

int cmd_simulate(const Common& c) {
    const Json cfg = read_json_file(c.config);
    const ModelSpec model = model_from_json(cfg.value("model", Json()));
    const Trajectory tr = simulate_from(cfg, model, resolve_seed(c, cfg, true));
    if (format_of(c) == Format::Csv) {
        std::ostringstream os;
        write_trajectory_csv(os, tr);
        emit(c.out, os.str());
    } else {
        emit(c.out, dump(to_json(tr)));
    }
    return 0;
}

int cmd_filter(const Common& c) {
    const Json cfg = read_json_file(c.config);
    const ModelSpec model = model_from_json(cfg.value("model", Json()));
    if (!cfg.contains("filter")) throw ValidationError("filter: missing");
    const FilterConfig fc = filter_config_from_json(cfg["filter"], "filter");
    const std::uint64_t seed = resolve_seed(c, cfg, !cfg.contains("observations"));

    std::vector<Vector> y;
    std::optional<Trajectory> tr;
    if (cfg.contains("observations")) {
        const Json& obs = cfg["observations"];
        if (!obs.is_array() || obs.empty()) throw ValidationError("observations: expected a non-empty array");
        for (std::size_t i = 0; i < obs.size(); ++i)
            y.push_back(vector_from_json(obs[i], "observations[" + std::to_string(i) + "]"));
    } else {
        tr = simulate_from(cfg, model, seed);
        y = tr->y;
    }
    const FilterSchedule sched = build_schedule(model, fc, y.size(), derive_seed(seed, Stream::Bootstrap));
    const std::vector<Vector> xs = run_filter(model, sched, y);

    std::vector<FilterRow> rows;
    for (std::size_t t = 1; t <= xs.size(); ++t)
        rows.push_back({t, xs[t - 1], sched.steps[t - 1].sigma_filt.trace()});
    if (format_of(c) == Format::Csv) {
        std::ostringstream os;
        write_filter_csv(os, rows);
        emit(c.out, os.str());
        return 0;
    }
    Json j;
    j["filter"] = to_json(fc);
    Json est = Json::array(), tr_sigma = Json::array(), bs = Json::array();
    for (const auto& r : rows) {
        est.push_back(to_json(r.xhat));
        tr_sigma.push_back(to_json(r.trace_sigma));
    }
    for (const auto& s : sched.steps) bs.push_back(to_json(s.b));
    j["xhat"] = est;
    j["trace_sigma"] = tr_sigma;
    j["b"] = bs;
    if (tr) {
        double sse = 0.0;
        for (std::size_t t = 1; t <= xs.size(); ++t) sse += (tr->x[t] - xs[t - 1]).squaredNorm();
        j["mse"] = to_json(sse / static_cast<double>(xs.size()));
    }
    emit(c.out, dump(j));
    return 0;
}

int cmd_calibrate(const Common& c, std::optional<double> r, std::optional<double> delta, bool io,
                  std::optional<std::size_t> time) {
    const Json cfg = read_json_file(c.config);
    if (r.has_value() == delta.has_value()) throw ValidationError("calibrate: give exactly one of --r, --delta");
    if (io && delta) throw ValidationError("calibrate: --io uses --r");
    const Engine engine = engine_of(cfg, c);
    const PairSource src = pair_of(cfg, time);
    const GaussianLinearIdeal* g = src.pair.gaussian();
    const Matrix gain = src.pair.gain();
    const Matrix delta_mat = symmetrized(g->z * g->sigma_x * g->z.transpose() + g->v);

    ClipCalibration cal;
    if (io) {
        cal = calibrate_b_io(gain, g->z, delta_mat, *r, engine);
    } else if (r) {
        cal = calibrate_b_radius(gain, delta_mat, *r, engine);
    } else {
        const Matrix eye = Matrix::Identity(g->sigma_x.rows(), g->sigma_x.rows());
        const double trace_filt = ((eye - gain * g->z) * g->sigma_x).trace();
        cal = calibrate_b_delta(gain, delta_mat, trace_filt, *delta, engine);
    }
    Json j = to_json(cal);
    j["correction"] = io ? "io" : "ao";
    if (src.model) j["t"] = src.time == 0 ? Json("steady-state") : Json(src.time);
    emit(c.out, render(j, format_of(c)));
    return 0;
}

int cmd_radius(const Common& c, std::optional<double> rl, std::optional<double> ru) {
    const Json cfg = read_json_file(c.config);
    if (!rl && cfg.contains("r_l")) rl = double_from_json(cfg["r_l"], "r_l");
    if (!ru && cfg.contains("r_u")) ru = double_from_json(cfg["r_u"], "r_u");
    if (!rl || !ru) throw ValidationError("radius: need --rl and --ru (or r_l, r_u in the config)");
    const PairSource src = pair_of(cfg, std::nullopt);
    const RadiusSolution sol = solve_least_favorable_radius(*rl, *ru, src.pair, engine_of(cfg, c));
    emit(c.out, render(to_json(sol), format_of(c)));
    return 0;
}

int cmd_saddle(const Common& c, std::optional<double> r, bool io, const std::string& trace_path,
               std::optional<double> eso_bound) {
    const Json cfg = read_json_file(c.config);
    if (!r && cfg.contains("r")) r = double_from_json(cfg["r"], "r");
    if (!r) throw ValidationError("saddle: need --r (or r in the config)");
    const Engine engine = engine_of(cfg, c);
    const PairSource src = pair_of(cfg, std::nullopt);
    const SaddlePoint sp = io ? io_saddle(src.pair, *r, engine) : solve_rho(src.pair, *r, engine);
    Json j = to_json(sp);
    j["trace_cov_x"] = to_json(src.pair.trace_cov_x());
    if (eso_bound) j["eso_risk"] = to_json(minimax_risk_eso(src.pair, *r, *eso_bound, engine));
    if (!trace_path.empty()) {
        if (src.pair.q() != 1) throw ValidationError("--trace-density needs a one-dimensional observation");
        const GaussianLinearIdeal* g = src.pair.gaussian();
        const double center = (g->z * src.pair.mean_x())(0);
        const double sd = std::sqrt((g->z * g->sigma_x * g->z.transpose() + g->v)(0, 0));
        double lo = center - 6.0 * sd, hi = center + 6.0 * sd;
        std::size_t points = 241;
        if (cfg.contains("trace")) {
            const Json& tj = cfg["trace"];
            if (tj.contains("lo")) lo = double_from_json(tj["lo"], "trace.lo");
            if (tj.contains("hi")) hi = double_from_json(tj["hi"], "trace.hi");
            if (tj.contains("points")) points = tj["points"].get<std::size_t>();
        }
        std::ostringstream os;
        write_density_csv(os, density_trace(src.pair, sp, lo, hi, points));
        write_file_atomic(trace_path, os.str());
    }
    emit(c.out, render(j, format_of(c)));
    return 0;
}

Matrix read_sample_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open sample file '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ls(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size() && cell.find_first_not_of(" \r", used) != std::string::npos)
                    numeric = false;
            } catch (const std::exception&) {
                numeric = false;
            }
        }
        if (!numeric) {
            if (rows.empty()) continue;  // header
            throw ValidationError(path + ": non-numeric row");
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ValidationError(path + ": ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError(path + ": no data rows");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < rows[i].size(); ++k)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    return m;
}

int cmd_lintest(const Common& c, std::optional<double> alpha) {
    const Json cfg = read_json_file(c.config);
    if (!alpha) alpha = cfg.contains("alpha") ? double_from_json(cfg["alpha"], "alpha") : 0.05;
    Matrix sample;
    if (cfg.contains("sample")) {
        const Json& s = cfg["sample"];
        if (s.is_array() && !s.empty() && s[0].is_number()) {
            const Vector v = vector_from_json(s, "sample");
            sample = v;
        } else {
            sample = matrix_from_json(s, "sample");
        }
    } else if (cfg.contains("sample_csv")) {
        sample = read_sample_csv(cfg["sample_csv"].get<std::string>());
    } else {
        throw ValidationError("lintest: config needs \"sample\" or \"sample_csv\"");
    }
    const LinTestResult res = linearity_test(sample, *alpha);
    Json j = to_json(res);
    if (sample.cols() == 1 && sample.rows() >= 100) {
        const std::vector<double> v(sample.data(), sample.data() + sample.size());
        const NormalityResult nr = normality_probe(v);
        j["normality"] = {{"ks_distance", to_json(nr.ks_distance)},
                          {"critical", to_json(nr.critical)},
                          {"reject_at_001", nr.reject_at_001}};
    }
    emit(c.out, render(j, format_of(c)));
    return 0;
}

int cmd_experiment(const Common& c) {
    Json cfg = read_json_file(c.config);
    if (c.seed) cfg["seed"] = *c.seed;
    const ExperimentConfig config = experiment_config_from_json(cfg);
    const auto start = std::chrono::steady_clock::now();
    const ExperimentReport report = run_experiment(config);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::fprintf(stderr, "experiment: %zu replications x %zu steps in %.2f s\n", config.replications,
                 config.horizon, secs);

    const std::string json = dump(to_json(report));
    const std::string csv = to_csv(report);
    if (!c.out.empty()) {
        emit(c.out, format_of(c) == Format::Csv ? csv : json);
    } else if (config.report_path.empty() && config.csv_path.empty()) {
        emit("", format_of(c) == Format::Csv ? csv : json);
    }
    if (!config.report_path.empty() && c.out.empty()) write_file_atomic(config.report_path, json);
    if (!config.csv_path.empty()) write_file_atomic(config.csv_path, csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust Kalman filtering: simulation, rLS filters, minimax calibration"};
    app.require_subcommand(1);

    Common sim, fil, cal, rad, sad, lin, exp;
    add_common(app.add_subcommand("simulate", "simulate an (optionally contaminated) trajectory"), sim,
               "csv");
    add_common(app.add_subcommand("filter", "run one filter over simulated or given observations"),
               fil, "csv");

    auto* cal_cmd = app.add_subcommand("calibrate", "clipping height b(r) or b(delta)");
    add_common(cal_cmd, cal, "json");
    std::optional<double> cal_r, cal_delta;
    std::optional<std::size_t> cal_time;
    bool cal_io = false;
    cal_cmd->add_option("--r", cal_r, "contamination radius");
    cal_cmd->add_option("--delta", cal_delta, "efficiency loss");
    cal_cmd->add_flag("--io", cal_io, "calibrate the rLS.IO residual");
    cal_cmd->add_option("--time", cal_time, "time step (default: steady state)");

    auto* rad_cmd = app.add_subcommand("radius", "least favorable radius on [r_l, r_u]");
    add_common(rad_cmd, rad, "json");
    std::optional<double> rl, ru;
    rad_cmd->add_option("--rl", rl, "lower radius");
    rad_cmd->add_option("--ru", ru, "upper radius");

    auto* sad_cmd = app.add_subcommand("saddle", "SO saddle point: rho and minimax risk");
    add_common(sad_cmd, sad, "json");
    std::optional<double> sad_r, eso_bound;
    bool sad_io = false;
    std::string trace_path;
    sad_cmd->add_option("--r", sad_r, "contamination radius");
    sad_cmd->add_flag("--io", sad_io, "tracking (IO) saddle point");
    sad_cmd->add_option("--trace-density", trace_path, "write y,p_id,p_re,p_di CSV");
    sad_cmd->add_option("--eso-bound", eso_bound, "second-moment bound G for the eSO risk");

    auto* lin_cmd = app.add_subcommand("lintest", "third-moment linearity test");
    add_common(lin_cmd, lin, "json");
    std::optional<double> alpha;
    lin_cmd->add_option("--alpha", alpha, "level");

    add_common(app.add_subcommand("experiment", "Monte Carlo filter comparison"), exp, "json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand("simulate")) return cmd_simulate(sim);
        if (app.got_subcommand("filter")) return cmd_filter(fil);
        if (app.got_subcommand("calibrate")) return cmd_calibrate(cal, cal_r, cal_delta, cal_io, cal_time);
        if (app.got_subcommand("radius")) return cmd_radius(rad, rl, ru);
        if (app.got_subcommand("saddle")) return cmd_saddle(sad, sad_r, sad_io, trace_path, eso_bound);
        if (app.got_subcommand("lintest")) return cmd_lintest(lin, alpha);
        if (app.got_subcommand("experiment")) return cmd_experiment(exp);
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
