#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "rkf/linalg.hpp"

namespace rkf {

/// SplitMix64 finalizer (Steele, Lea, Flood 2014). Used to expand seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Deterministic sub-seed for (master seed, stream tag, index). Replications,
/// time steps and Monte Carlo engines draw from disjoint streams this way.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0);

/// Stream tags for derive_seed.
enum class Stream : std::uint64_t {
    Simulation = 0x53494d55ULL,
    Contamination = 0x434f4e54ULL,
    MonteCarlo = 0x4d43454eULL,
    Replication = 0x5245504cULL,
    Bootstrap = 0x424f4f54ULL,
};

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
    return derive_seed(master, static_cast<std::uint64_t>(stream), index);
}

/// Portable random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The <random> distributions are implementation-defined, so all
/// variates are produced here: uniforms from the top 53 bits, normals by the
/// Marsaglia polar method. Same seed gives the same stream on every platform
/// with IEEE doubles.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    /// Uniform on [0, 1).
    double uniform();
    /// Uniform on (0, 1).
    double uniform_open();
    double normal();
    bool bernoulli(double p) { return p >= 1.0 || (p > 0.0 && uniform() < p); }
    double exponential() { return -std::log(uniform_open()); }

    Vector standard_normal(Eigen::Index n);
    /// Draw from N(mean, factor * factor^T).
    Vector gaussian(const Vector& mean, const Matrix& factor);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace rkf
