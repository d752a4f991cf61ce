#pragma once

#include <array>
#include <optional>

#include "hyphy/channel_cfr.hpp"

namespace hyphy {

struct GaussNewtonOptions {
    int max_iters = 60;
    double rel_tol = 1e-6;
    double step_init = 1.0;  // halved until the likelihood strictly increases
    double backtrack_factor = 0.5;
    int max_backtracks = 20;

    void validate() const {
        if (max_iters < 1 || !(rel_tol > 0.0) || !(backtrack_factor > 0.0 && backtrack_factor < 1.0))
            throw std::invalid_argument("GaussNewtonOptions: invalid settings");
    }
};

struct AlternatingOptions {
    GaussNewtonOptions gn;
    int k_paths = 1;
    int n_starts = 8;      // multi-start fits of the mean CFR for the specular init
    double eta = 0.95;     // eigenvalue-ratio energy threshold for the tap count
    double rel_tol = 1e-4; // convergence of the outer alternation
};

struct EstimationReport {
    SpecularParams theta_sp_hat;
    DiffuseNoiseParams theta_vn_hat;
    SimilarityParam a_hat;
    std::vector<double> log_likelihood_trace;  // nondecreasing across accepted rounds
    bool converged = false;
};

/// Exponential basis; entry (j, k) = exp(-i (j - (n-1)/2) v[k]), j = 0..n-1.
MatC exp_basis(const VecD& v, int n);
/// d exp_basis / dv = -i Xi_n U with Xi_n = diag(-(n-1)/2, ..., (n-1)/2).
MatC exp_basis_deriv(const VecD& v, int n);

/// Block-diagonal Hermitian covariance (n_blocks identical blocks), prefactored.
class BlockCovFactor {
  public:
    BlockCovFactor(const MatC& block, int n_blocks);
    /// blkdiag of toep(nu) + extra_diag * I per antenna-pair block.
    static BlockCovFactor from_toeplitz(const ToeplitzCov& cov, double extra_diag, int n_blocks);

    Eigen::Index dim() const { return block_dim_ * n_blocks_; }
    Eigen::Index block_dim() const { return block_dim_; }
    int n_blocks() const { return n_blocks_; }
    double log_det() const { return n_blocks_ * factor_.log_det(); }
    VecC solve(const VecC& v) const;
    MatC solve_cols(const MatC& m) const;
    double quad_form(const VecC& r) const { return std::real(r.dot(solve(r))); }
    const CovFactor& block_factor() const { return factor_; }

  private:
    CovFactor factor_;
    Eigen::Index block_dim_;
    int n_blocks_;
};

double gaussian_log_likelihood(const VecC& h, const VecC& mean, const BlockCovFactor& factor);

/// Jacobian of specular_mean, columns ordered [psi_t | psi_r | tau | Re rho | Im rho].
MatC specular_jacobian(const SpecularParams& sp, const CfrDims& dims);

/// Gradient of the CFR log-likelihood in the specular parameters: 2 Re{J^H R^{-1} (h - mean)}.
VecD specular_score(const VecC& h, const SpecularParams& sp, const BlockCovFactor& cov,
                    const CfrDims& dims);

/// Fisher information 2 Re{J^H R^{-1} J}; symmetric PSD.
MatD specular_fim(const SpecularParams& sp, const BlockCovFactor& cov, const CfrDims& dims);

struct SpecularFitResult {
    SpecularParams params;
    std::vector<double> log_likelihood_trace;
    bool converged = false;
    bool damped = false;  // Levenberg regularization was needed at least once
};

SpecularFitResult gauss_newton_specular(const VecC& h, const SpecularParams& sp_init,
                                        const BlockCovFactor& cov, const CfrDims& dims,
                                        const GaussNewtonOptions& opts);

/// Coarse starts for the specular fit: delays from matched-correlation peaks of
/// the inverse transform (first candidate), jittered variants after it; gains by
/// linear least squares given the phases.
std::vector<SpecularParams> init_specular(const VecC& h, const CfrDims& dims, int k_paths,
                                          int n_starts, Rng& rng);

/// Gauss-Newton from every init_specular candidate; best final likelihood wins.
SpecularFitResult fit_specular_multistart(const VecC& h, const CfrDims& dims, int k_paths,
                                          const BlockCovFactor& cov, const GaussNewtonOptions& opts,
                                          int n_starts, Rng& rng);

/// Eigenvalue-ratio model-order rule: smallest count of leading sample-covariance
/// eigenvalues capturing a fraction >= eta of the total energy.
int estimate_num_taps(const MatC& residual_matrix, double eta);

/// First columns of d nu / d sigma2, d nu / d alpha2, d nu / d beta (in that order).
std::array<ToeplitzCov, 3> vn_cov_derivs(const DiffuseNoiseParams& dn, int n_f);

/// Log-likelihood, gradient and FIM of the zero-mean per-block Gaussian model
/// at the given parameters; residual_matrix is m x N, folded internally.
struct ZeroMeanFit {
    double log_likelihood = 0.0;
    VecD gradient;  // in (sigma2, alpha2, beta)
    MatD fim;
};
ZeroMeanFit vn_objective(const MatC& residual_matrix, const CfrDims& dims,
                         const DiffuseNoiseParams& dn);
/// Same, but from a per-block sample covariance with n_cols effective columns.
ZeroMeanFit vn_objective_from_cov(const MatC& sample_cov_block, double n_cols,
                                  const DiffuseNoiseParams& dn);

struct VnFitResult {
    DiffuseNoiseParams params;
    std::vector<double> log_likelihood_trace;
    bool converged = false;
};

/// Gauss-Newton on (alpha2, beta, sigma2) through their logarithms; L is fixed
/// from dn_init. The residual matrix holds specular-removed CFRs (m x N); the
/// kron structure folds it into per-block columns internally.
VnFitResult gauss_newton_vn(const MatC& residual_matrix, const CfrDims& dims,
                            const DiffuseNoiseParams& dn_init, const GaussNewtonOptions& opts);

enum class DiffHypothesis { H0, H1 };

/// Similarity estimation from consecutive-difference samples (m x N) under the
/// chosen hypothesis covariance; a is optimized through a logistic map onto (0,1).
/// The samples must be zero-mean: under H1 the caller removes the mean-difference
/// contribution first.
SimilarityParam estimate_similarity(const MatC& diff_samples, const CfrDims& dims,
                                    const DiffuseNoiseParams& dn_fixed, double a_init,
                                    DiffHypothesis hypothesis,
                                    const std::optional<DiffuseNoiseParams>& dn_e_fixed,
                                    const GaussNewtonOptions& opts);

/// Same, but from a per-block sample covariance of the differences.
SimilarityParam estimate_similarity_from_cov(const MatC& diff_sample_cov_block, double n_cols,
                                             const DiffuseNoiseParams& dn_fixed, double a_init,
                                             DiffHypothesis hypothesis,
                                             const std::optional<DiffuseNoiseParams>& dn_e_fixed,
                                             const GaussNewtonOptions& opts);

/// Full alternating estimator: per-snapshot specular fits (averaged), tap-count
/// selection plus diffuse/noise fit on the residuals, similarity fit on the
/// consecutive differences; repeated n_rounds times.
EstimationReport alternating_estimate(const std::vector<CfrSample>& snapshots, const CfrDims& dims,
                                      const AlternatingOptions& opts, int n_rounds, Rng& rng);

}  // namespace hyphy
