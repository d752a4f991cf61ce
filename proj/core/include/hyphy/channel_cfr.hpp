#pragma once

#include <optional>

#include "hyphy/common.hpp"

namespace hyphy {

/// Antenna/subcarrier layout of one channel frequency response vector.
/// Samples are stacked rx-fastest, then tx, then subcarrier.
struct CfrDims {
    int n_tx = 1;
    int n_rx = 1;
    int n_f = 1;

    int m() const { return n_tx * n_rx * n_f; }
    int n_blocks() const { return n_tx * n_rx; }
    void validate() const {
        if (n_tx < 1 || n_rx < 1 || n_f < 1) throw std::invalid_argument("CfrDims: counts must be positive");
    }
};

/// Dominant-path parameters: departure/arrival phase angles (radians),
/// normalized delays, and complex gains, one entry per path.
struct SpecularParams {
    VecD psi_t;
    VecD psi_r;
    VecD tau;
    VecC rho;

    int num_paths() const { return static_cast<int>(rho.size()); }
    void validate() const {
        const auto k = rho.size();
        if (k < 1 || psi_t.size() != k || psi_r.size() != k || tau.size() != k)
            throw std::invalid_argument("SpecularParams: arrays must share length K >= 1");
        if (!psi_t.allFinite() || !psi_r.allFinite() || !tau.allFinite() || !rho.allFinite())
            throw std::invalid_argument("SpecularParams: entries must be finite");
    }
};

/// Diffuse-scattering process (average power, normalized coherence bandwidth,
/// tap count) plus the measurement-noise variance.
struct DiffuseNoiseParams {
    double alpha2 = 1.0;
    double beta = 0.1;
    int l_taps = 1;
    double sigma2 = 0.0;

    void validate() const {
        // alpha2 == 0 (no diffuse power) is admitted for degenerate checks
        if (alpha2 < 0.0 || !(beta > 0.0) || l_taps < 1 || sigma2 < 0.0)
            throw std::invalid_argument("DiffuseNoiseParams: positivity violated");
    }
};

/// AR-1 temporal correlation coefficient of consecutive tap gains.
struct SimilarityParam {
    double a = 1.0;
    void validate() const {
        if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("SimilarityParam: a must lie in [0,1]");
    }
};

/// Hermitian Toeplitz covariance given by its first column nu;
/// the full matrix is R[i,j] = nu[i-j] for i >= j, conj(nu[j-i]) otherwise.
struct ToeplitzCov {
    VecC nu;

    Eigen::Index dim() const { return nu.size(); }
    MatC dense() const;
};

struct CfrSample {
    VecC h;
    std::optional<int> label;
    int snapshot_index = 0;
};

/// Per-tap variance of the diffuse gain process, Var_l = alpha2 (1-e^{-2 pi beta}) e^{-2 pi beta l}.
VecD diffuse_tap_variances(const DiffuseNoiseParams& dn);

/// Uniform-linear-array response; entry j = (1/n_ant) exp(+i (j-(n_ant-1)/2) psi).
VecC steering_vector(double psi, int n_ant);

/// Random dominant-path parameters: uniform angles/delays, CN(0, gain_scale^2) gains.
SpecularParams random_specular(int k_paths, double gain_scale, Rng& rng);

/// CFR mean of the dominant paths, assembled via the column-wise Kronecker
/// (Khatri-Rao) identity; equals the per-subcarrier A_R Gamma A_T^H construction.
VecC specular_mean(const SpecularParams& sp, const CfrDims& dims);

/// Frequency correlation of the diffuse process at normalized tone separation m_frac.
cxd kappa(const DiffuseNoiseParams& dn, double m_frac);

/// First column of the per-block diffuse+noise covariance: nu[k] = kappa(k/n_f), sigma2 added at lag 0.
ToeplitzCov diffuse_noise_cov(const DiffuseNoiseParams& dn, int n_f);

/// Block-diagonal expansion I_{n_rx} (x) I_{n_tx} (x) toep(nu).
MatC kron_expand(const ToeplitzCov& cov, const CfrDims& dims);

/// Difference covariance of consecutive same-transmitter diffuse vectors (noise excluded).
ToeplitzCov diff_cov_h0(const DiffuseNoiseParams& dn_a, const SimilarityParam& a, int n_f);

/// Difference covariance of an intruder snapshot against the reference (noise excluded).
ToeplitzCov diff_cov_h1(const DiffuseNoiseParams& dn_a, const DiffuseNoiseParams& dn_e,
                        const SimilarityParam& a_e, int n_f);

/// Complex-Gaussian log density. Throws SingularModelError if cov stays
/// indefinite after the documented jitter retries.
double gaussian_log_likelihood(const VecC& h, const VecC& mean, const MatC& cov);

/// Cholesky of a Hermitian covariance with the jitter policy
/// eps = 1e-8 * mean diagonal, one retry at 10 eps, then SingularModelError.
/// Keeps the factor, log-determinant and solves for repeated evaluation.
class CovFactor {
  public:
    explicit CovFactor(const MatC& cov);

    Eigen::Index dim() const { return llt_.matrixLLT().rows(); }
    double log_det() const { return log_det_; }
    VecC solve(const VecC& b) const { return llt_.solve(b); }
    MatC solve(const MatC& b) const { return llt_.solve(b); }
    /// r^H R^{-1} r (real by Hermitian symmetry).
    double quad_form(const VecC& r) const;
    /// L such that R = L L^H (after jitter), for sampling.
    MatC matrix_l() const { return llt_.matrixL(); }
    double jitter_used() const { return jitter_used_; }

  private:
    Eigen::LLT<MatC> llt_;
    double log_det_ = 0.0;
    double jitter_used_ = 0.0;
};

double gaussian_log_likelihood(const VecC& h, const VecC& mean, const CovFactor& factor);

/// AR-1 evolving diffuse tap state for one transmitter.
struct DiffuseTapState {
    VecC taps;  // length l_taps
};

DiffuseTapState init_diffuse_taps(const DiffuseNoiseParams& dn, Rng& rng);
void evolve_diffuse_taps(DiffuseTapState& state, const DiffuseNoiseParams& dn,
                         const SimilarityParam& sim, Rng& rng);

/// Intruder tap state one step after the reference state: AR-1 coupling with
/// coefficient a_e and innovation variance max(0, Var^E_l - a_e^2 Var^A_l).
/// Where the clamp is inactive this realizes the intruder-difference model
/// exactly; where it engages (fast-decaying intruder tails) that model is not
/// jointly realizable and the intruder tap variance inflates to a_e^2 Var^A_l
/// (see diff_cov_h1 tests).
DiffuseTapState eve_taps_from_reference(const DiffuseTapState& ref, const DiffuseNoiseParams& dn_a,
                                        const DiffuseNoiseParams& dn_e, const SimilarityParam& a_e,
                                        Rng& rng);

/// Per-block diffuse vector q[n] = sum_l taps[l] exp(+i 2 pi n l / n_f), n = 0..n_f-1.
VecC taps_to_block(const DiffuseTapState& state, int n_f);

/// Full CFR from independent per-block tap states plus mean and fresh noise.
VecC assemble_cfr(const VecC& mean, const std::vector<DiffuseTapState>& block_states,
                  const DiffuseNoiseParams& dn, const CfrDims& dims, Rng& rng);

/// Tap-domain generator: AR-1 evolution per antenna-pair block, fresh noise per step.
std::vector<CfrSample> sample_cfr_sequence(const SpecularParams& sp, const DiffuseNoiseParams& dn,
                                           const SimilarityParam& sim, const CfrDims& dims,
                                           int n_steps, Rng& rng);

}  // namespace hyphy
