#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "rkf/diagnostics.hpp"
#include "rkf/expectation.hpp"
#include "rkf/kalman.hpp"
#include "rkf/minimax.hpp"
#include "rkf/model.hpp"
#include "rkf/rls.hpp"

namespace rkf {

using Json = nlohmann::ordered_json;

// Matrices are row-major nested arrays; a bare number is a 1x1 matrix.
// Non-finite doubles are written as the strings "inf", "-inf", "nan".
Json to_json(double v);
double double_from_json(const Json& j, const std::string& path);
Json to_json(const Matrix& m);
Json to_json(const Vector& v);
Matrix matrix_from_json(const Json& j, const std::string& path);
Vector vector_from_json(const Json& j, const std::string& path);

Json to_json(const ModelSpec& m);
ModelSpec model_from_json(const Json& j, const std::string& path = "model");

Json to_json(const ContaminationSpec& c);
ContaminationSpec contamination_from_json(const Json& j, const std::string& path = "contamination");

Json to_json(const Engine& e);
Engine engine_from_json(const Json& j, const std::string& path = "engine");

Json to_json(ClipHeight b);
ClipHeight clip_height_from_json(const Json& j, const std::string& path);

Json to_json(const ClipCalibration& c);
Json to_json(const SaddlePoint& s);
Json to_json(const RadiusSolution& s);
Json to_json(const LinTestResult& r);
Json to_json(const Trajectory& t);

/// Gaussian-linear ideal pair: {"sigma_x", "z", "v", optional "mean_x"}.
IdealPair ideal_from_json(const Json& j, const std::string& path = "ideal");

/// Shortest decimal that round-trips ("%.17g" trimmed); "inf"/"-inf"/"nan".
std::string format_double(double v);

/// Header t,x_1..x_p,y_1..y_q,hit; rows t = 1..T.
void write_trajectory_csv(std::ostream& os, const Trajectory& tr);

struct FilterRow {
    std::size_t t;
    Vector xhat;
    double trace_sigma;
};
/// Header t,xhat_1..xhat_p,trace_sigma.
void write_filter_csv(std::ostream& os, const std::vector<FilterRow>& rows);

/// Header y,p_id,p_re,p_di.
void write_density_csv(std::ostream& os, const std::vector<DensityPoint>& rows);

/// Writes `content` to `path` through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

Json read_json_file(const std::string& path);

}  // namespace rkf
