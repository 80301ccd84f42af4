#include "rkf/model.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "rkf/errors.hpp"
#include "rkf/rng.hpp"

namespace rkf {

ModelSpec ModelSpec::constant(Matrix f, Matrix z, Matrix q_cov, Matrix v_cov, Vector a0,
                              Matrix q0) {
    ModelSpec m;
    m.p = f.rows();
    m.q = z.rows();
    m.F = {std::move(f)};
    m.Z = {std::move(z)};
    m.Q = {std::move(q_cov)};
    m.V = {std::move(v_cov)};
    m.a0 = std::move(a0);
    m.Q0 = std::move(q0);
    return m;
}

ModelSpec ModelSpec::scalar_unit() {
    const Matrix one = Matrix::Ones(1, 1);
    return constant(one, one, one, one, Vector::Zero(1), one);
}

const Matrix& ModelSpec::at(const std::vector<Matrix>& seq, std::size_t t) {
    if (seq.size() == 1) return seq.front();
    if (t == 0 || t > seq.size())
        throw ValidationError("time index " + std::to_string(t) +
                              " outside hyper-parameter sequence of length " +
                              std::to_string(seq.size()));
    return seq[t - 1];
}

bool ModelSpec::time_invariant() const {
    return F.size() == 1 && Z.size() == 1 && Q.size() == 1 && V.size() == 1;
}

std::size_t ModelSpec::max_horizon() const {
    std::size_t h = std::numeric_limits<std::size_t>::max();
    for (const auto* seq : {&F, &Z, &Q, &V})
        if (seq->size() > 1) h = std::min(h, seq->size());
    return h;
}

namespace {

void check_seq(const std::vector<Matrix>& seq, Eigen::Index rows, Eigen::Index cols,
               const char* name, bool psd) {
    if (seq.empty()) throw ValidationError(std::string(name) + ": empty sequence");
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const Matrix& m = seq[i];
        const std::string where = std::string(name) + "[" + std::to_string(i) + "]";
        if (m.rows() != rows || m.cols() != cols)
            throw ValidationError(where + ": expected " + std::to_string(rows) + "x" +
                                  std::to_string(cols) + ", got " + std::to_string(m.rows()) +
                                  "x" + std::to_string(m.cols()));
        if (!m.allFinite()) throw ValidationError(where + ": non-finite entry");
        if (psd) require_psd(m, where.c_str());
    }
}

}  // namespace

void ModelSpec::validate() const {
    if (p < 1) throw ValidationError("model: state dimension p must be positive");
    if (q < 1) throw ValidationError("model: observation dimension q must be positive");
    check_seq(F, p, p, "F", false);
    check_seq(Z, q, p, "Z", false);
    check_seq(Q, p, p, "Q", true);
    check_seq(V, q, q, "V", true);
    if (a0.size() != p) throw ValidationError("a0: expected length " + std::to_string(p));
    if (!a0.allFinite()) throw ValidationError("a0: non-finite entry");
    if (Q0.rows() != p || Q0.cols() != p)
        throw ValidationError("Q0: expected " + std::to_string(p) + "x" + std::to_string(p));
    require_psd(Q0, "Q0");
}

const char* to_string(ContaminationKind kind) {
    switch (kind) {
        case ContaminationKind::AO: return "AO";
        case ContaminationKind::IO: return "IO";
        case ContaminationKind::SO: return "SO";
    }
    return "?";
}

ContaminationKind contamination_kind_from_string(const std::string& s) {
    if (s == "AO" || s == "ao") return ContaminationKind::AO;
    if (s == "IO" || s == "io") return ContaminationKind::IO;
    if (s == "SO" || s == "so") return ContaminationKind::SO;
    throw ValidationError("contamination kind must be one of AO, IO, SO; got '" + s + "'");
}

void ContaminationSpec::validate(const ModelSpec& model) const {
    if (!(radius >= 0.0 && radius <= 1.0))
        throw ValidationError("contamination radius must lie in [0, 1]");
    if (persistent && kind != ContaminationKind::IO)
        throw ValidationError("persistent contamination is only defined for IO");
    const Eigen::Index dim = kind == ContaminationKind::IO ? model.p : model.q;
    const char* target = kind == ContaminationKind::IO ? "p" : "q";
    std::visit(
        [&](const auto& law) {
            using L = std::decay_t<decltype(law)>;
            if constexpr (std::is_same_v<L, PointMassLaw>) {
                if (law.value.size() != dim)
                    throw ValidationError(std::string("point-mass law: dimension must equal ") +
                                          target);
            } else if constexpr (std::is_same_v<L, GaussianLaw>) {
                if (law.mean.size() != dim || law.cov.rows() != dim || law.cov.cols() != dim)
                    throw ValidationError(std::string("gaussian law: dimension must equal ") +
                                          target);
                require_psd(law.cov, "gaussian law covariance");
            } else {
                if (!(law.kappa > 0.0) || !std::isfinite(law.kappa))
                    throw ValidationError("scaled-ideal law: kappa must be positive");
            }
        },
        law);
}

double Trajectory::hit_rate() const {
    if (hits.empty()) return 0.0;
    return static_cast<double>(std::count(hits.begin(), hits.end(), true)) /
           static_cast<double>(hits.size());
}

Trajectory simulate_ideal(const ModelSpec& model, std::size_t T, std::uint64_t seed) {
    model.validate();
    if (T < 1) throw ValidationError("horizon T must be at least 1");
    if (T > model.max_horizon())
        throw ValidationError("horizon exceeds the length of the hyper-parameter sequences");

    Rng rng(derive_seed(seed, Stream::Simulation));
    Trajectory tr;
    tr.T = T;
    tr.seed = seed;
    tr.x.reserve(T + 1);
    tr.y.reserve(T);
    tr.hits.assign(T, false);
    tr.state_noise.reserve(T);
    tr.obs_noise.reserve(T);

    tr.x.push_back(rng.gaussian(model.a0, psd_factor(model.Q0)));
    for (std::size_t t = 1; t <= T; ++t) {
        Vector v = rng.gaussian(Vector::Zero(model.p), psd_factor(model.q_cov(t)));
        Vector e = rng.gaussian(Vector::Zero(model.q), psd_factor(model.v_cov(t)));
        tr.x.push_back(model.f(t) * tr.x.back() + v);
        tr.y.push_back(model.z(t) * tr.x.back() + e);
        tr.state_noise.push_back(std::move(v));
        tr.obs_noise.push_back(std::move(e));
    }
    return tr;
}

namespace {

// Draw from the contaminating law for the replaced quantity. `ideal_mean` and
// `ideal_cov` describe the ideal law of that quantity (used by ScaledIdealLaw).
Vector draw_law(const ContaminatingLaw& law, const Vector& ideal_mean, const Matrix& ideal_cov,
                Rng& rng) {
    return std::visit(
        [&](const auto& l) -> Vector {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, PointMassLaw>) {
                return l.value;
            } else if constexpr (std::is_same_v<L, GaussianLaw>) {
                return rng.gaussian(l.mean, psd_factor(l.cov));
            } else {
                return l.kappa * rng.gaussian(ideal_mean, psd_factor(ideal_cov));
            }
        },
        law);
}

}  // namespace

Trajectory contaminate(const ModelSpec& model, const Trajectory& ideal,
                       const ContaminationSpec& spec, std::uint64_t seed) {
    model.validate();
    spec.validate(model);
    if (ideal.x.size() != ideal.T + 1 || ideal.y.size() != ideal.T ||
        ideal.state_noise.size() != ideal.T || ideal.obs_noise.size() != ideal.T)
        throw ValidationError("contaminate: trajectory lengths inconsistent with T");
    if (ideal.T > 0 && (ideal.x.front().size() != model.p || ideal.y.front().size() != model.q))
        throw ValidationError("contaminate: trajectory dimensions do not match the model");

    Trajectory out = ideal;
    if (spec.radius == 0.0) return out;

    // Separate streams: indicators never depend on the law being drawn from.
    Rng hit_rng(derive_seed(seed, Stream::Contamination, 0));
    Rng law_rng(derive_seed(seed, Stream::Contamination, 1));

    // Unconditional moments of x_t, needed by the scaled-ideal SO law.
    Vector mean_x = model.a0;
    Matrix cov_x = model.Q0;

    bool latched = false;
    for (std::size_t t = 1; t <= out.T; ++t) {
        const Matrix& f = model.f(t);
        const Matrix& z = model.z(t);
        mean_x = f * mean_x;
        cov_x = symmetrized(f * cov_x * f.transpose() + model.q_cov(t));

        bool hit = hit_rng.bernoulli(spec.radius);
        if (spec.persistent && latched) hit = true;
        latched = latched || hit;
        out.hits[t - 1] = hit;

        switch (spec.kind) {
            case ContaminationKind::AO:
                if (hit) {
                    out.obs_noise[t - 1] =
                        draw_law(spec.law, Vector::Zero(model.q), model.v_cov(t), law_rng);
                    out.y[t - 1] = z * out.x[t] + out.obs_noise[t - 1];
                }
                break;
            case ContaminationKind::IO:
                if (hit)
                    out.state_noise[t - 1] =
                        draw_law(spec.law, Vector::Zero(model.p), model.q_cov(t), law_rng);
                out.x[t] = f * out.x[t - 1] + out.state_noise[t - 1];
                out.y[t - 1] = z * out.x[t] + out.obs_noise[t - 1];
                break;
            case ContaminationKind::SO:
                if (hit)
                    out.y[t - 1] = draw_law(spec.law, z * mean_x,
                                            symmetrized(z * cov_x * z.transpose() + model.v_cov(t)),
                                            law_rng);
                break;
        }
    }
    return out;
}

}  // namespace rkf
