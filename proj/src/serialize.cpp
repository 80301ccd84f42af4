#include "rkf/serialize.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <system_error>

#include "rkf/errors.hpp"

namespace rkf {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw ValidationError(path + ": " + msg);
}

const Json& field(const Json& j, const char* key, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    const auto it = j.find(key);
    if (it == j.end()) fail(path + "." + key, "missing");
    return *it;
}

bool is_number_row(const Json& j) {
    if (!j.is_array() || j.empty()) return false;
    for (const auto& v : j)
        if (!(v.is_number() || v.is_string())) return false;
    return true;
}

bool is_matrix(const Json& j) {
    if (j.is_number()) return true;
    if (!j.is_array() || j.empty()) return false;
    for (const auto& row : j)
        if (!is_number_row(row)) return false;
    return true;
}

std::vector<Matrix> matrix_seq_from_json(const Json& j, const std::string& path) {
    if (is_matrix(j)) return {matrix_from_json(j, path)};
    if (!j.is_array() || j.empty()) fail(path, "expected a matrix or a non-empty list of matrices");
    std::vector<Matrix> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(matrix_from_json(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

Json matrix_seq_to_json(const std::vector<Matrix>& seq) {
    if (seq.size() == 1) return to_json(seq.front());
    Json arr = Json::array();
    for (const auto& m : seq) arr.push_back(to_json(m));
    return arr;
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

Json to_json(double v) {
    if (std::isfinite(v)) return Json(v);
    return Json(format_double(v));
}

double double_from_json(const Json& j, const std::string& path) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "+inf" || s == "Infinity") return std::numeric_limits<double>::infinity();
        if (s == "-inf" || s == "-Infinity") return -std::numeric_limits<double>::infinity();
    }
    fail(path, "expected a number");
}

Json to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(to_json(m(i, k)));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json to_json(const Vector& v) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(to_json(v(i)));
    return arr;
}

Matrix matrix_from_json(const Json& j, const std::string& path) {
    if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
    if (!is_matrix(j)) fail(path, "expected a matrix (nested array of rows)");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Json& row = j[static_cast<std::size_t>(i)];
        if (static_cast<Eigen::Index>(row.size()) != cols) fail(path, "ragged matrix rows");
        for (Eigen::Index k = 0; k < cols; ++k)
            m(i, k) = double_from_json(row[static_cast<std::size_t>(k)],
                                       path + "[" + std::to_string(i) + "][" + std::to_string(k) + "]");
    }
    return m;
}

Vector vector_from_json(const Json& j, const std::string& path) {
    if (j.is_number()) return Vector::Constant(1, j.get<double>());
    if (!j.is_array()) fail(path, "expected an array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = double_from_json(j[i], path + "[" + std::to_string(i) + "]");
    return v;
}

Json to_json(const ModelSpec& m) {
    Json j;
    j["p"] = m.p;
    j["q"] = m.q;
    j["F"] = matrix_seq_to_json(m.F);
    j["Z"] = matrix_seq_to_json(m.Z);
    j["Q"] = matrix_seq_to_json(m.Q);
    j["V"] = matrix_seq_to_json(m.V);
    j["a0"] = to_json(m.a0);
    j["Q0"] = to_json(m.Q0);
    return j;
}

ModelSpec model_from_json(const Json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    ModelSpec m;
    m.F = matrix_seq_from_json(field(j, "F", path), path + ".F");
    m.Z = matrix_seq_from_json(field(j, "Z", path), path + ".Z");
    m.Q = matrix_seq_from_json(field(j, "Q", path), path + ".Q");
    m.V = matrix_seq_from_json(field(j, "V", path), path + ".V");
    m.a0 = vector_from_json(field(j, "a0", path), path + ".a0");
    m.Q0 = matrix_from_json(field(j, "Q0", path), path + ".Q0");
    m.p = j.contains("p") ? j["p"].get<Eigen::Index>() : m.F.front().rows();
    m.q = j.contains("q") ? j["q"].get<Eigen::Index>() : m.Z.front().rows();
    try {
        m.validate();
    } catch (const ValidationError& e) {
        fail(path, e.what());
    }
    return m;
}

Json to_json(const ContaminationSpec& c) {
    Json j;
    j["kind"] = to_string(c.kind);
    j["radius"] = c.radius;
    Json law;
    std::visit(
        [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, PointMassLaw>) {
                law["type"] = "point_mass";
                law["value"] = to_json(l.value);
            } else if constexpr (std::is_same_v<L, GaussianLaw>) {
                law["type"] = "gaussian";
                law["mean"] = to_json(l.mean);
                law["cov"] = to_json(l.cov);
            } else {
                law["type"] = "scaled_ideal";
                law["kappa"] = l.kappa;
            }
        },
        c.law);
    j["law"] = law;
    j["persistent"] = c.persistent;
    return j;
}

ContaminationSpec contamination_from_json(const Json& j, const std::string& path) {
    ContaminationSpec c;
    const Json& kind = field(j, "kind", path);
    if (!kind.is_string()) fail(path + ".kind", "expected a string");
    try {
        c.kind = contamination_kind_from_string(kind.get<std::string>());
    } catch (const ValidationError& e) {
        fail(path + ".kind", e.what());
    }
    c.radius = double_from_json(field(j, "radius", path), path + ".radius");
    if (!(c.radius >= 0.0 && c.radius <= 1.0)) fail(path + ".radius", "must lie in [0, 1]");
    if (j.contains("persistent")) c.persistent = j["persistent"].get<bool>();
    const Json& law = field(j, "law", path);
    const std::string lp = path + ".law";
    const Json& type = field(law, "type", lp);
    const std::string t = type.is_string() ? type.get<std::string>() : "";
    if (t == "point_mass") {
        c.law = PointMassLaw{vector_from_json(field(law, "value", lp), lp + ".value")};
    } else if (t == "gaussian") {
        c.law = GaussianLaw{vector_from_json(field(law, "mean", lp), lp + ".mean"),
                            matrix_from_json(field(law, "cov", lp), lp + ".cov")};
    } else if (t == "scaled_ideal") {
        c.law = ScaledIdealLaw{double_from_json(field(law, "kappa", lp), lp + ".kappa")};
    } else {
        fail(lp + ".type", "expected point_mass, gaussian or scaled_ideal");
    }
    return c;
}

Json to_json(const Engine& e) {
    Json j;
    j["samples"] = e.samples;
    j["seed"] = e.seed;
    j["force_monte_carlo"] = e.force_monte_carlo;
    return j;
}

Engine engine_from_json(const Json& j, const std::string& path) {
    Engine e;
    if (j.is_null()) return e;
    if (!j.is_object()) fail(path, "expected an object");
    if (j.contains("samples")) e.samples = j["samples"].get<std::size_t>();
    if (j.contains("seed")) e.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("force_monte_carlo")) e.force_monte_carlo = j["force_monte_carlo"].get<bool>();
    if (e.samples < 2) fail(path + ".samples", "must be at least 2");
    return e;
}

Json to_json(ClipHeight b) { return to_json(b.value()); }

ClipHeight clip_height_from_json(const Json& j, const std::string& path) {
    const double v = double_from_json(j, path);
    if (std::isnan(v) || v < 0.0) fail(path, "clipping height must be >= 0 or \"inf\"");
    return ClipHeight(v);
}

Json to_json(const ClipCalibration& c) {
    Json j;
    j["method"] = to_string(c.method);
    j["parameter"] = to_json(c.parameter);
    if (c.method == CalibrationMethod::RadiusRange) j["parameter_upper"] = to_json(c.parameter_upper);
    j["b"] = to_json(c.b);
    j["residual"] = to_json(c.residual);
    j["residual_tolerance"] = to_json(c.residual_tolerance);
    j["engine"] = {{"type", c.engine}, {"samples", c.samples}};
    j["seed"] = c.seed;
    return j;
}

Json to_json(const SaddlePoint& s) {
    Json j;
    j["kind"] = s.kind == SaddleKind::Attenuation ? "attenuation" : "tracking";
    j["r"] = to_json(s.r);
    j["rho"] = to_json(s.rho);
    j["risk"] = to_json(s.risk);
    j["normalization_residual"] = to_json(s.normalization_residual);
    j["engine"] = s.engine;
    return j;
}

Json to_json(const RadiusSolution& s) {
    const auto arr = [](const std::vector<double>& v) {
        Json a = Json::array();
        for (double x : v) a.push_back(to_json(x));
        return a;
    };
    Json j;
    j["r_l"] = to_json(s.r_l);
    j["r_u"] = to_json(s.r_u);
    j["r0"] = to_json(s.r0);
    j["b_at_r0"] = to_json(s.b_at_r0);
    j["rho0_at_r0"] = to_json(s.rho0_at_r0);
    j["crossing_residual"] = to_json(s.crossing_residual);
    j["grid"] = arr(s.grid);
    j["A_table"] = arr(s.A_table);
    j["B_table"] = arr(s.B_table);
    j["rho0_table"] = arr(s.rho0_table);
    return j;
}

Json to_json(const LinTestResult& r) {
    Json j;
    j["n"] = r.n;
    j["T_n"] = to_json(r.statistic);
    j["sigma_hat"] = to_json(r.sigma_hat);
    j["e_hat"] = to_json(r.e_hat);
    j["alpha"] = to_json(r.alpha);
    j["critical"] = to_json(r.critical);
    j["standardized"] = to_json(r.standardized());
    j["reject"] = r.reject;
    return j;
}

Json to_json(const Trajectory& t) {
    Json j;
    j["T"] = t.T;
    j["seed"] = t.seed;
    Json xs = Json::array(), ys = Json::array(), hits = Json::array();
    for (const auto& x : t.x) xs.push_back(to_json(x));
    for (const auto& y : t.y) ys.push_back(to_json(y));
    for (bool h : t.hits) hits.push_back(h ? 1 : 0);
    j["x"] = xs;
    j["y"] = ys;
    j["hits"] = hits;
    return j;
}

IdealPair ideal_from_json(const Json& j, const std::string& path) {
    Matrix sigma = matrix_from_json(field(j, "sigma_x", path), path + ".sigma_x");
    Matrix z = matrix_from_json(field(j, "z", path), path + ".z");
    Matrix v = matrix_from_json(field(j, "v", path), path + ".v");
    Vector mean = j.contains("mean_x") ? vector_from_json(j["mean_x"], path + ".mean_x") : Vector();
    try {
        return IdealPair::gaussian_linear(std::move(sigma), std::move(z), std::move(v), std::move(mean));
    } catch (const ValidationError& e) {
        fail(path, e.what());
    }
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
    const Eigen::Index p = tr.x.empty() ? 0 : tr.x.front().size();
    const Eigen::Index q = tr.y.empty() ? 0 : tr.y.front().size();
    os << "t";
    for (Eigen::Index i = 1; i <= p; ++i) os << ",x_" << i;
    for (Eigen::Index i = 1; i <= q; ++i) os << ",y_" << i;
    os << ",hit\n";
    for (std::size_t t = 1; t <= tr.T; ++t) {
        os << t;
        for (Eigen::Index i = 0; i < p; ++i) os << ',' << format_double(tr.x[t](i));
        for (Eigen::Index i = 0; i < q; ++i) os << ',' << format_double(tr.y[t - 1](i));
        os << ',' << (tr.hits[t - 1] ? 1 : 0) << '\n';
    }
}

void write_filter_csv(std::ostream& os, const std::vector<FilterRow>& rows) {
    const Eigen::Index p = rows.empty() ? 0 : rows.front().xhat.size();
    os << "t";
    for (Eigen::Index i = 1; i <= p; ++i) os << ",xhat_" << i;
    os << ",trace_sigma\n";
    for (const auto& r : rows) {
        os << r.t;
        for (Eigen::Index i = 0; i < p; ++i) os << ',' << format_double(r.xhat(i));
        os << ',' << format_double(r.trace_sigma) << '\n';
    }
}

void write_density_csv(std::ostream& os, const std::vector<DensityPoint>& rows) {
    os << "y,p_id,p_re,p_di\n";
    for (const auto& r : rows)
        os << format_double(r.y) << ',' << format_double(r.p_id) << ',' << format_double(r.p_re)
           << ',' << format_double(r.p_di) << '\n';
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) {
            out.close();
            std::error_code ec;
            fs::remove(tmp, ec);
            throw std::runtime_error("failed writing " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw std::runtime_error("cannot move output into place: " + target.string());
    }
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ValidationError("config '" + path + "': " + e.what());
    }
}

}  // namespace rkf
