#pragma once

#include <complex>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hyphy {

using cxd = std::complex<double>;
using VecC = Eigen::VectorXcd;
using MatC = Eigen::MatrixXcd;
using VecD = Eigen::VectorXd;
using MatD = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;

/// Thrown when a covariance stays indefinite after the documented jitter retries.
struct SingularModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Seeded RNG passed explicitly through every stochastic operation.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return unif_(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unif_(engine_); }
    double normal() { return norm_(engine_); }
    /// CN(0, var): independent re/im with variance var/2 each.
    cxd cnormal(double var = 1.0) {
        const double s = std::sqrt(var / 2.0);
        return {s * norm_(engine_), s * norm_(engine_)};
    }
    std::uint64_t integer(std::uint64_t n) {  // in [0, n)
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
    }
    /// Derive an independent stream (for per-worker / per-frame use).
    Rng split(std::uint64_t stream) {
        return Rng(engine_() ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
    }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
    std::normal_distribution<double> norm_{0.0, 1.0};
};

inline VecC cnormal_vector(Rng& rng, Eigen::Index n, double var = 1.0) {
    VecC v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.cnormal(var);
    return v;
}

/// [Re(v); Im(v)] feature packing used for all learner inputs.
inline VecD complex_to_features(const VecC& v) {
    VecD f(2 * v.size());
    f.head(v.size()) = v.real();
    f.tail(v.size()) = v.imag();
    return f;
}

inline VecC features_to_complex(const VecD& f) {
    const Eigen::Index m = f.size() / 2;
    VecC v(m);
    v.real() = f.head(m);
    v.imag() = f.tail(m);
    return v;
}

}  // namespace hyphy
