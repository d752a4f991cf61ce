#include "hyphy/estimator_cfr.hpp"

#include <algorithm>
#include <numeric>

namespace hyphy {

MatC exp_basis(const VecD& v, int n) {
    if (n < 1) throw std::invalid_argument("exp_basis: n must be >= 1");
    MatC u(n, v.size());
    const double shift = (n - 1) / 2.0;
    for (int j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < v.size(); ++k) u(j, k) = std::exp(cxd(0.0, -(j - shift) * v[k]));
    return u;
}

MatC exp_basis_deriv(const VecD& v, int n) {
    MatC d = exp_basis(v, n);
    const double shift = (n - 1) / 2.0;
    for (int j = 0; j < n; ++j) d.row(j) *= cxd(0.0, -(j - shift));
    return d;
}

BlockCovFactor::BlockCovFactor(const MatC& block, int n_blocks)
    : factor_(block), block_dim_(block.rows()), n_blocks_(n_blocks) {
    if (n_blocks < 1) throw std::invalid_argument("BlockCovFactor: n_blocks must be >= 1");
}

BlockCovFactor BlockCovFactor::from_toeplitz(const ToeplitzCov& cov, double extra_diag, int n_blocks) {
    MatC block = cov.dense();
    block.diagonal().array() += extra_diag;
    return BlockCovFactor(block, n_blocks);
}

VecC BlockCovFactor::solve(const VecC& v) const {
    VecC out(v.size());
    for (int b = 0; b < n_blocks_; ++b)
        out.segment(b * block_dim_, block_dim_) = factor_.solve(VecC(v.segment(b * block_dim_, block_dim_)));
    return out;
}

MatC BlockCovFactor::solve_cols(const MatC& m) const {
    MatC out(m.rows(), m.cols());
    for (int b = 0; b < n_blocks_; ++b)
        out.middleRows(b * block_dim_, block_dim_) = factor_.solve(MatC(m.middleRows(b * block_dim_, block_dim_)));
    return out;
}

double gaussian_log_likelihood(const VecC& h, const VecC& mean, const BlockCovFactor& factor) {
    if (h.size() != mean.size() || h.size() != factor.dim())
        throw std::invalid_argument("gaussian_log_likelihood: dimension mismatch");
    const VecC r = h - mean;
    return -double(h.size()) * std::log(kPi) - factor.log_det() - factor.quad_form(r);
}

namespace {

// Column-wise Kronecker product, rows of b fastest.
MatC khatri_rao(const MatC& a, const MatC& b) {
    MatC out(a.rows() * b.rows(), a.cols());
    for (Eigen::Index k = 0; k < a.cols(); ++k)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            out.block(i * b.rows(), k, b.rows(), 1) = a(i, k) * b.col(k);
    return out;
}

VecD pack_specular(const SpecularParams& sp) {
    const int k = sp.num_paths();
    VecD theta(5 * k);
    theta.segment(0, k) = sp.psi_t;
    theta.segment(k, k) = sp.psi_r;
    theta.segment(2 * k, k) = sp.tau;
    theta.segment(3 * k, k) = sp.rho.real();
    theta.segment(4 * k, k) = sp.rho.imag();
    return theta;
}

SpecularParams unpack_specular(const VecD& theta) {
    const int k = static_cast<int>(theta.size() / 5);
    SpecularParams sp;
    sp.psi_t = theta.segment(0, k);
    sp.psi_r = theta.segment(k, k);
    sp.tau = theta.segment(2 * k, k);
    sp.rho.resize(k);
    sp.rho.real() = theta.segment(3 * k, k);
    sp.rho.imag() = theta.segment(4 * k, k);
    return sp;
}

// Solve F d = q, adding Levenberg damping if the solve fails or is not an
// ascent direction. Sets damped when regularization was required.
VecD solve_ascent_direction(const MatD& fim, const VecD& score, bool& damped) {
    double lambda = 0.0;
    const double scale = std::max(fim.diagonal().maxCoeff(), 1e-300);
    for (int attempt = 0; attempt < 12; ++attempt) {
        MatD work = fim;
        work.diagonal().array() += lambda;
        Eigen::LDLT<MatD> ldlt(work);
        if (ldlt.info() == Eigen::Success) {
            VecD d = ldlt.solve(score);
            if (d.allFinite() && score.dot(d) > 0.0) {
                if (lambda > 0.0) damped = true;
                return d;
            }
        }
        lambda = lambda == 0.0 ? 1e-10 * scale : 10.0 * lambda;
    }
    damped = true;
    return score / scale;  // gradient fallback
}

}  // namespace

MatC specular_jacobian(const SpecularParams& sp, const CfrDims& dims) {
    sp.validate();
    dims.validate();
    const int k = sp.num_paths();
    const int m = dims.m();
    const MatC u_t = exp_basis(sp.psi_t, dims.n_tx);
    const MatC u_r_c = exp_basis(sp.psi_r, dims.n_rx).conjugate();
    const MatC u_tau = exp_basis(sp.tau, dims.n_f);
    const MatC d_t = exp_basis_deriv(sp.psi_t, dims.n_tx);
    const MatC d_r_c = exp_basis_deriv(sp.psi_r, dims.n_rx).conjugate();
    const MatC d_tau = exp_basis_deriv(sp.tau, dims.n_f);
    const double scale = 1.0 / std::sqrt(double(dims.n_rx) * double(dims.n_tx));

    const MatC base = khatri_rao(u_t, khatri_rao(u_r_c, u_tau));
    const MatC dpsit = khatri_rao(d_t, khatri_rao(u_r_c, u_tau));
    const MatC dpsir = khatri_rao(u_t, khatri_rao(d_r_c, u_tau));
    const MatC dtau = khatri_rao(u_t, khatri_rao(u_r_c, d_tau));

    MatC jac(m, 5 * k);
    for (int p = 0; p < k; ++p) {
        const cxd rho_s = scale * sp.rho[p];
        jac.col(p) = dpsit.col(p) * rho_s;
        jac.col(k + p) = dpsir.col(p) * rho_s;
        jac.col(2 * k + p) = dtau.col(p) * rho_s;
        jac.col(3 * k + p) = base.col(p) * scale;
        jac.col(4 * k + p) = base.col(p) * cxd(0.0, scale);
    }
    return jac;
}

VecD specular_score(const VecC& h, const SpecularParams& sp, const BlockCovFactor& cov,
                    const CfrDims& dims) {
    const MatC jac = specular_jacobian(sp, dims);
    const VecC r = h - specular_mean(sp, dims);
    return 2.0 * (jac.adjoint() * cov.solve(r)).real();
}

MatD specular_fim(const SpecularParams& sp, const BlockCovFactor& cov, const CfrDims& dims) {
    const MatC jac = specular_jacobian(sp, dims);
    MatD fim = 2.0 * (jac.adjoint() * cov.solve_cols(jac)).real();
    return (fim + fim.transpose()) / 2.0;
}

SpecularFitResult gauss_newton_specular(const VecC& h, const SpecularParams& sp_init,
                                        const BlockCovFactor& cov, const CfrDims& dims,
                                        const GaussNewtonOptions& opts) {
    opts.validate();
    sp_init.validate();
    SpecularFitResult res;
    VecD theta = pack_specular(sp_init);
    double ll = gaussian_log_likelihood(h, specular_mean(sp_init, dims), cov);
    res.log_likelihood_trace.push_back(ll);

    for (int it = 0; it < opts.max_iters; ++it) {
        const SpecularParams sp = unpack_specular(theta);
        const MatC jac = specular_jacobian(sp, dims);
        const VecC r = h - specular_mean(sp, dims);
        const VecD score = 2.0 * (jac.adjoint() * cov.solve(r)).real();
        MatD fim = 2.0 * (jac.adjoint() * cov.solve_cols(jac)).real();
        fim = (fim + fim.transpose()) / 2.0;

        const VecD dir = solve_ascent_direction(fim, score, res.damped);
        double step = opts.step_init;
        bool accepted = false;
        for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
            const VecD cand = theta + step * dir;
            const double cand_ll =
                gaussian_log_likelihood(h, specular_mean(unpack_specular(cand), dims), cov);
            if (std::isfinite(cand_ll) && cand_ll > ll) {
                const double rel = step * dir.norm() / std::max(1.0, theta.norm());
                theta = cand;
                ll = cand_ll;
                res.log_likelihood_trace.push_back(ll);
                accepted = true;
                if (rel < opts.rel_tol) res.converged = true;
                break;
            }
            step *= opts.backtrack_factor;
        }
        if (!accepted) {
            res.converged = true;  // no admissible ascent step left
            break;
        }
        if (res.converged) break;
    }
    res.params = unpack_specular(theta);
    return res;
}

namespace {

VecC single_path_basis(double psi_t, double psi_r, double tau, const CfrDims& dims) {
    SpecularParams single;
    single.psi_t = VecD::Constant(1, psi_t);
    single.psi_r = VecD::Constant(1, psi_r);
    single.tau = VecD::Constant(1, tau);
    single.rho = VecC::Ones(1);
    return specular_mean(single, dims);
}

}  // namespace

std::vector<SpecularParams> init_specular(const VecC& h, const CfrDims& dims, int k_paths,
                                          int n_starts, Rng& rng) {
    dims.validate();
    const int nb = dims.n_blocks();
    const int nf = dims.n_f;
    const int grid = std::max(16 * nf, 64);
    const double shift = (nf - 1) / 2.0;

    // Matching pursuit: extract one dominant path at a time. The delay comes
    // from the matched-correlation peak; the angles come from the phase
    // progression of the per-block matched-filter outputs; the gain from a
    // projection. The extracted path is cancelled and the search repeats.
    const auto extract_paths = [&](Rng& jitter_rng, bool jitter) {
        SpecularParams sp;
        sp.psi_t.resize(k_paths);
        sp.psi_r.resize(k_paths);
        sp.tau.resize(k_paths);
        sp.rho = VecC::Zero(k_paths);
        VecC residual = h;
        for (int path = 0; path < k_paths; ++path) {
            int best_g = 0;
            double best_score = -1.0;
            for (int g = 0; g < grid; ++g) {
                const double tau = -kPi + 2.0 * kPi * g / grid;
                double score = 0.0;
                for (int b = 0; b < nb; ++b) {
                    cxd acc = 0.0;
                    for (int n = 0; n < nf; ++n)
                        acc += residual[b * nf + n] * std::exp(cxd(0.0, (n - shift) * tau));
                    score += std::norm(acc);
                }
                if (score > best_score) {
                    best_score = score;
                    best_g = g;
                }
            }
            double tau = -kPi + 2.0 * kPi * best_g / grid;
            if (jitter) tau += jitter_rng.uniform(-1.0, 1.0) * kPi / nf;

            // matched-filter output per antenna-pair block at this delay
            MatC z(dims.n_rx, dims.n_tx);
            for (int jt = 0; jt < dims.n_tx; ++jt)
                for (int jr = 0; jr < dims.n_rx; ++jr) {
                    cxd acc = 0.0;
                    for (int n = 0; n < nf; ++n)
                        acc += residual[(jt * dims.n_rx + jr) * nf + n] *
                               std::exp(cxd(0.0, (n - shift) * tau));
                    z(jr, jt) = acc;
                }
            // adjacent-element phase progression: e^{-i psi_t} across tx, e^{+i psi_r} across rx
            double psi_t = 0.0, psi_r = 0.0;
            if (dims.n_tx > 1) {
                cxd acc = 0.0;
                for (int jt = 0; jt + 1 < dims.n_tx; ++jt)
                    for (int jr = 0; jr < dims.n_rx; ++jr) acc += z(jr, jt + 1) * std::conj(z(jr, jt));
                psi_t = -std::arg(acc);
            }
            if (dims.n_rx > 1) {
                cxd acc = 0.0;
                for (int jr = 0; jr + 1 < dims.n_rx; ++jr)
                    for (int jt = 0; jt < dims.n_tx; ++jt) acc += z(jr + 1, jt) * std::conj(z(jr, jt));
                psi_r = std::arg(acc);
            }
            if (jitter) {
                psi_t += jitter_rng.uniform(-0.3, 0.3);
                psi_r += jitter_rng.uniform(-0.3, 0.3);
            }
            const VecC basis = single_path_basis(psi_t, psi_r, tau, dims);
            const cxd gain = basis.dot(residual) / basis.squaredNorm();
            residual -= gain * basis;
            sp.psi_t[path] = psi_t;
            sp.psi_r[path] = psi_r;
            sp.tau[path] = tau;
            sp.rho[path] = gain;
        }
        return sp;
    };

    std::vector<SpecularParams> starts;
    for (int s = 0; s < std::max(1, n_starts); ++s) {
        Rng jitter_rng = rng.split(std::uint64_t(s));
        SpecularParams sp = extract_paths(jitter_rng, s > 0);
        // joint gain refit given the phase parameters
        MatC basis(dims.m(), k_paths);
        for (int p = 0; p < k_paths; ++p)
            basis.col(p) = single_path_basis(sp.psi_t[p], sp.psi_r[p], sp.tau[p], dims);
        const VecC rho = basis.colPivHouseholderQr().solve(h);
        if (rho.allFinite()) sp.rho = rho;
        starts.push_back(std::move(sp));
    }
    return starts;
}

SpecularFitResult fit_specular_multistart(const VecC& h, const CfrDims& dims, int k_paths,
                                          const BlockCovFactor& cov, const GaussNewtonOptions& opts,
                                          int n_starts, Rng& rng) {
    const auto starts = init_specular(h, dims, k_paths, n_starts, rng);
    SpecularFitResult best;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (const auto& start : starts) {
        SpecularFitResult fit = gauss_newton_specular(h, start, cov, dims, opts);
        const double ll = fit.log_likelihood_trace.back();
        if (ll > best_ll) {
            best_ll = ll;
            best = std::move(fit);
        }
    }
    return best;
}

int estimate_num_taps(const MatC& residual_matrix, double eta) {
    if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("estimate_num_taps: eta must be in (0,1)");
    if (residual_matrix.cols() < 2) throw std::invalid_argument("estimate_num_taps: need N >= 2 columns");
    const double n = double(residual_matrix.cols());
    const MatC cov = residual_matrix * residual_matrix.adjoint() / n;
    Eigen::SelfAdjointEigenSolver<MatC> eig(cov, Eigen::EigenvaluesOnly);
    VecD e = eig.eigenvalues().reverse();  // descending
    e = e.cwiseMax(0.0);
    const double total = e.sum();
    if (!(total > 0.0)) throw std::invalid_argument("estimate_num_taps: rank-0 residual matrix");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        acc += e[i];
        if (acc / total >= eta) return static_cast<int>(i) + 1;
    }
    return static_cast<int>(e.size());
}

std::array<ToeplitzCov, 3> vn_cov_derivs(const DiffuseNoiseParams& dn, int n_f) {
    dn.validate();
    std::array<ToeplitzCov, 3> d;
    for (auto& t : d) t.nu = VecC::Zero(n_f);
    d[0].nu[0] = 1.0;  // d nu / d sigma2
    const double g = std::exp(-2.0 * kPi * dn.beta);
    const int l = dn.l_taps;
    for (int k = 0; k < n_f; ++k) {
        const double m = double(k) / n_f;
        d[1].nu[k] = kappa(dn, m) / dn.alpha2;
        const cxd f = std::exp(-2.0 * kPi * (cxd(dn.beta, 0.0) - cxd(0.0, m)));
        const cxd fl = std::pow(f, l);
        const cxd one_minus_f = 1.0 - f;
        d[2].nu[k] = dn.alpha2 * (2.0 * kPi * g * (1.0 - fl) / one_minus_f +
                                  (1.0 - g) * (2.0 * kPi * double(l) * fl * one_minus_f -
                                               2.0 * kPi * f * (1.0 - fl)) /
                                      (one_minus_f * one_minus_f));
    }
    return d;
}

namespace {

// Fold an (nb*n_f) x N stacked-residual matrix into per-block columns (n_f x N*nb).
MatC fold_blocks(const MatC& stacked, const CfrDims& dims) {
    const int nb = dims.n_blocks();
    const int nf = dims.n_f;
    if (stacked.rows() != Eigen::Index(nb) * nf)
        throw std::invalid_argument("fold_blocks: row count does not match dims");
    MatC out(nf, stacked.cols() * nb);
    for (Eigen::Index c = 0; c < stacked.cols(); ++c)
        for (int b = 0; b < nb; ++b) out.col(c * nb + b) = stacked.col(c).segment(b * nf, nf);
    return out;
}

struct ZeroMeanObjective {
    // L = -N (nf ln pi + ln det B + tr(B^{-1} Rhat)) for N block columns.
    double n_cols;
    MatC sample_cov;  // Rhat, nf x nf

    double log_likelihood(const CovFactor& factor) const {
        const double nf = double(sample_cov.rows());
        const double tr = std::real(factor.solve(sample_cov).trace());
        return -n_cols * (nf * std::log(kPi) + factor.log_det() + tr);
    }
    // gradient entry: N tr(B^{-1} dB B^{-1} (Rhat - B)) and FIM N tr(B^{-1} dB B^{-1} dB)
    VecD gradient(const CovFactor& factor, const std::vector<MatC>& derivs) const {
        const MatC s = factor.solve(sample_cov) - MatC::Identity(sample_cov.rows(), sample_cov.cols());
        VecD g(derivs.size());
        for (size_t i = 0; i < derivs.size(); ++i) {
            const MatC mi = factor.solve(derivs[i]);
            g[int(i)] = n_cols * std::real((mi * s).trace());
        }
        return g;
    }
    MatD fim(const CovFactor& factor, const std::vector<MatC>& derivs) const {
        std::vector<MatC> solved(derivs.size());
        for (size_t i = 0; i < derivs.size(); ++i) solved[i] = factor.solve(derivs[i]);
        MatD f(derivs.size(), derivs.size());
        for (size_t i = 0; i < derivs.size(); ++i)
            for (size_t j = 0; j < derivs.size(); ++j)
                f(int(i), int(j)) = n_cols * std::real((solved[i] * solved[j]).trace());
        return (f + f.transpose()) / 2.0;
    }
};

}  // namespace

ZeroMeanFit vn_objective_from_cov(const MatC& sample_cov_block, double n_cols,
                                  const DiffuseNoiseParams& dn) {
    const int n_f = static_cast<int>(sample_cov_block.rows());
    ZeroMeanObjective obj{n_cols, sample_cov_block};
    const CovFactor factor(diffuse_noise_cov(dn, n_f).dense());
    const auto derivs_t = vn_cov_derivs(dn, n_f);
    const std::vector<MatC> derivs{derivs_t[0].dense(), derivs_t[1].dense(), derivs_t[2].dense()};
    ZeroMeanFit fit;
    fit.log_likelihood = obj.log_likelihood(factor);
    fit.gradient = obj.gradient(factor, derivs);
    fit.fim = obj.fim(factor, derivs);
    return fit;
}

ZeroMeanFit vn_objective(const MatC& residual_matrix, const CfrDims& dims,
                         const DiffuseNoiseParams& dn) {
    const MatC folded = fold_blocks(residual_matrix, dims);
    return vn_objective_from_cov(folded * folded.adjoint() / double(folded.cols()),
                                 double(folded.cols()), dn);
}

VnFitResult gauss_newton_vn(const MatC& residual_matrix, const CfrDims& dims,
                            const DiffuseNoiseParams& dn_init, const GaussNewtonOptions& opts) {
    opts.validate();
    dn_init.validate();
    const MatC folded = fold_blocks(residual_matrix, dims);
    ZeroMeanObjective obj{double(folded.cols()), folded * folded.adjoint() / double(folded.cols())};

    // x = (ln sigma2, ln alpha2, ln beta); L stays fixed.
    VecD x(3);
    x << std::log(std::max(dn_init.sigma2, 1e-12)), std::log(dn_init.alpha2), std::log(dn_init.beta);
    const auto make_dn = [&](const VecD& v) {
        DiffuseNoiseParams dn = dn_init;
        dn.sigma2 = std::exp(v[0]);
        dn.alpha2 = std::exp(v[1]);
        dn.beta = std::exp(v[2]);
        return dn;
    };
    const auto eval_ll = [&](const VecD& v) -> double {
        try {
            CovFactor f(diffuse_noise_cov(make_dn(v), dims.n_f).dense());
            return obj.log_likelihood(f);
        } catch (const SingularModelError&) {
            return -std::numeric_limits<double>::infinity();
        }
    };

    VnFitResult res;
    double ll = eval_ll(x);
    if (!std::isfinite(ll)) throw SingularModelError("gauss_newton_vn: initial covariance not PD");
    res.log_likelihood_trace.push_back(ll);

    for (int it = 0; it < opts.max_iters; ++it) {
        const DiffuseNoiseParams dn = make_dn(x);
        const CovFactor factor(diffuse_noise_cov(dn, dims.n_f).dense());
        const auto derivs_t = vn_cov_derivs(dn, dims.n_f);
        std::vector<MatC> derivs{derivs_t[0].dense(), derivs_t[1].dense(), derivs_t[2].dense()};
        VecD score = obj.gradient(factor, derivs);
        MatD fim = obj.fim(factor, derivs);
        // chain rule through the log parameterization
        const VecD theta(VecD{{dn.sigma2, dn.alpha2, dn.beta}});
        score = score.cwiseProduct(theta);
        fim = fim.cwiseProduct(theta * theta.transpose());

        bool damped = false;
        const VecD dir = solve_ascent_direction(fim, score, damped);
        double step = opts.step_init;
        bool accepted = false;
        for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
            const VecD cand = x + step * dir;
            const double cand_ll = eval_ll(cand);
            if (std::isfinite(cand_ll) && cand_ll > ll) {
                const double rel = step * dir.norm() / std::max(1.0, x.norm());
                x = cand;
                ll = cand_ll;
                res.log_likelihood_trace.push_back(ll);
                accepted = true;
                if (rel < opts.rel_tol) res.converged = true;
                break;
            }
            step *= opts.backtrack_factor;
        }
        if (!accepted) {
            res.converged = true;
            break;
        }
        if (res.converged) break;
    }
    res.params = make_dn(x);
    return res;
}

SimilarityParam estimate_similarity(const MatC& diff_samples, const CfrDims& dims,
                                    const DiffuseNoiseParams& dn_fixed, double a_init,
                                    DiffHypothesis hypothesis,
                                    const std::optional<DiffuseNoiseParams>& dn_e_fixed,
                                    const GaussNewtonOptions& opts) {
    const MatC folded = fold_blocks(diff_samples, dims);
    return estimate_similarity_from_cov(folded * folded.adjoint() / double(folded.cols()),
                                        double(folded.cols()), dn_fixed, a_init, hypothesis,
                                        dn_e_fixed, opts);
}

SimilarityParam estimate_similarity_from_cov(const MatC& diff_sample_cov_block, double n_cols,
                                             const DiffuseNoiseParams& dn_fixed, double a_init,
                                             DiffHypothesis hypothesis,
                                             const std::optional<DiffuseNoiseParams>& dn_e_fixed,
                                             const GaussNewtonOptions& opts) {
    opts.validate();
    if (hypothesis == DiffHypothesis::H1 && !dn_e_fixed)
        throw std::invalid_argument("estimate_similarity: H1 requires the intruder parameters");
    const int n_f = static_cast<int>(diff_sample_cov_block.rows());
    ZeroMeanObjective obj{n_cols, diff_sample_cov_block};

    const double noise_diag = hypothesis == DiffHypothesis::H0
                                  ? 2.0 * dn_fixed.sigma2
                                  : dn_fixed.sigma2 + dn_e_fixed->sigma2;
    const auto model_cov = [&](double a) {
        ToeplitzCov cov = hypothesis == DiffHypothesis::H0
                              ? diff_cov_h0(dn_fixed, SimilarityParam{a}, n_f)
                              : diff_cov_h1(dn_fixed, *dn_e_fixed, SimilarityParam{a}, n_f);
        MatC dense = cov.dense();
        dense.diagonal().array() += noise_diag;
        return dense;
    };
    // d nu / d a = -2 kappa(theta_A, k/n_f) under both hypotheses.
    MatC dcov;
    {
        ToeplitzCov d;
        d.nu.resize(n_f);
        for (int k = 0; k < n_f; ++k) d.nu[k] = -2.0 * kappa(dn_fixed, double(k) / n_f);
        dcov = d.dense();
    }

    const auto eval_ll = [&](double a) -> double {
        try {
            CovFactor f(model_cov(a));
            return obj.log_likelihood(f);
        } catch (const SingularModelError&) {
            return -std::numeric_limits<double>::infinity();
        }
    };

    // logistic reparameterization keeps a inside (0,1)
    double s = [&] {
        const double a = std::clamp(a_init, 1e-6, 1.0 - 1e-6);
        return std::log(a / (1.0 - a));
    }();
    const auto to_a = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };

    double ll = eval_ll(to_a(s));
    if (!std::isfinite(ll)) throw SingularModelError("estimate_similarity: initial covariance not PD");

    for (int it = 0; it < opts.max_iters; ++it) {
        const double a = to_a(s);
        const CovFactor factor(model_cov(a));
        const std::vector<MatC> derivs{dcov};
        const double slope = a * (1.0 - a);
        const double score = obj.gradient(factor, derivs)[0] * slope;
        const double fim = obj.fim(factor, derivs)(0, 0) * slope * slope;
        const double dir = fim > 0.0 ? score / fim : score;

        double step = opts.step_init;
        bool accepted = false;
        for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
            const double cand = s + step * dir;
            const double cand_ll = eval_ll(to_a(cand));
            if (std::isfinite(cand_ll) && cand_ll > ll) {
                const double rel = std::abs(step * dir) / std::max(1.0, std::abs(s));
                s = cand;
                ll = cand_ll;
                accepted = true;
                if (rel < opts.rel_tol) it = opts.max_iters;  // converged
                break;
            }
            step *= opts.backtrack_factor;
        }
        if (!accepted) break;
    }
    return SimilarityParam{std::clamp(to_a(s), 0.0, 1.0)};
}

namespace {

void sort_paths_by_delay(SpecularParams& sp) {
    const int k = sp.num_paths();
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return sp.tau[a] < sp.tau[b]; });
    SpecularParams out = sp;
    for (int i = 0; i < k; ++i) {
        out.psi_t[i] = sp.psi_t[order[i]];
        out.psi_r[i] = sp.psi_r[order[i]];
        out.tau[i] = sp.tau[order[i]];
        out.rho[i] = sp.rho[order[i]];
    }
    sp = out;
}

}  // namespace

EstimationReport alternating_estimate(const std::vector<CfrSample>& snapshots, const CfrDims& dims,
                                      const AlternatingOptions& opts, int n_rounds, Rng& rng) {
    if (snapshots.empty()) throw std::invalid_argument("alternating_estimate: snapshots must be nonempty");
    dims.validate();
    const int n = static_cast<int>(snapshots.size());
    const int m = dims.m();

    // Order by snapshot index; consecutive indices supply the difference samples.
    std::vector<const CfrSample*> ordered;
    for (const auto& s : snapshots) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(),
              [](const CfrSample* a, const CfrSample* b) { return a->snapshot_index < b->snapshot_index; });

    VecC mean_cfr = VecC::Zero(m);
    for (const auto* s : ordered) mean_cfr += s->h;
    mean_cfr /= double(n);

    EstimationReport report;
    report.theta_vn_hat = DiffuseNoiseParams{1.0, 0.05, std::max(1, dims.n_f / 2), 1.0};
    report.a_hat = SimilarityParam{0.5};
    {
        // cheap initial guesses, returned as-is when n_rounds == 0
        Rng init_rng = rng.split(0);
        report.theta_sp_hat = init_specular(mean_cfr, dims, opts.k_paths, 1, init_rng)[0];
    }
    if (n_rounds <= 0) return report;

    double best_ll = -std::numeric_limits<double>::infinity();
    SpecularParams sp_bar = report.theta_sp_hat;
    DiffuseNoiseParams vn = report.theta_vn_hat;
    SimilarityParam a_hat = report.a_hat;
    bool have_vn = false;
    VecD prev_state;

    for (int round = 0; round < n_rounds; ++round) {
        // Sub-problem 1: per-snapshot specular fits under the current covariance.
        BlockCovFactor cov = have_vn
                                 ? BlockCovFactor::from_toeplitz(diffuse_noise_cov(vn, dims.n_f), 0.0,
                                                                 dims.n_blocks())
                                 : BlockCovFactor(MatC::Identity(dims.n_f, dims.n_f), dims.n_blocks());
        SpecularParams common_init;
        if (round == 0) {
            common_init =
                fit_specular_multistart(mean_cfr, dims, opts.k_paths, cov, opts.gn, opts.n_starts, rng)
                    .params;
        } else {
            common_init = sp_bar;
        }
        VecD acc = VecD::Zero(5 * opts.k_paths);
        for (const auto* s : ordered) {
            SpecularFitResult fit = gauss_newton_specular(s->h, common_init, cov, dims, opts.gn);
            sort_paths_by_delay(fit.params);
            acc += pack_specular(fit.params);
        }
        acc /= double(n);
        sp_bar = unpack_specular(acc);

        // Sub-problem 2: tap count on the specular-removed residuals, then the
        // diffuse/noise fit.
        const VecC h_bar = specular_mean(sp_bar, dims);
        MatC residuals(m, n);
        for (int i = 0; i < n; ++i) residuals.col(i) = ordered[i]->h - h_bar;
        MatC folded(dims.n_f, Eigen::Index(n) * dims.n_blocks());
        for (int i = 0; i < n; ++i)
            for (int b = 0; b < dims.n_blocks(); ++b)
                folded.col(Eigen::Index(i) * dims.n_blocks() + b) =
                    residuals.col(i).segment(b * dims.n_f, dims.n_f);
        int l_hat = vn.l_taps;
        if (folded.cols() >= 2) l_hat = std::min(estimate_num_taps(folded, opts.eta), dims.n_f);

        DiffuseNoiseParams vn_init = vn;
        vn_init.l_taps = std::max(1, l_hat);
        if (!have_vn) {
            const double pwr = residuals.cwiseAbs2().mean();
            vn_init.sigma2 = std::max(0.25 * pwr, 1e-9);
            vn_init.beta = 0.05;
            vn_init.alpha2 =
                std::max(0.75 * pwr, 1e-9) / (1.0 - std::exp(-2.0 * kPi * vn_init.beta * vn_init.l_taps));
        }
        try {
            vn = gauss_newton_vn(residuals, dims, vn_init, opts.gn).params;
            have_vn = true;
        } catch (const SingularModelError& e) {
            throw SingularModelError("alternating_estimate round " + std::to_string(round) +
                                     " sub-problem 2: " + e.what());
        }

        // Sub-problem 3: similarity from consecutive differences.
        std::vector<VecC> diffs;
        for (int i = 0; i + 1 < n; ++i)
            if (ordered[i + 1]->snapshot_index == ordered[i]->snapshot_index + 1)
                diffs.push_back(ordered[i + 1]->h - ordered[i]->h);
        if (!diffs.empty()) {
            MatC diff_mat(m, Eigen::Index(diffs.size()));
            for (size_t i = 0; i < diffs.size(); ++i) diff_mat.col(Eigen::Index(i)) = diffs[i];
            try {
                a_hat = estimate_similarity(diff_mat, dims, vn, a_hat.a, DiffHypothesis::H0,
                                            std::nullopt, opts.gn);
            } catch (const SingularModelError& e) {
                throw SingularModelError("alternating_estimate round " + std::to_string(round) +
                                         " sub-problem 3: " + e.what());
            }
        }

        // Joint likelihood under the round's estimates; keep the best round.
        const BlockCovFactor joint_cov =
            BlockCovFactor::from_toeplitz(diffuse_noise_cov(vn, dims.n_f), 0.0, dims.n_blocks());
        const VecC joint_mean = specular_mean(sp_bar, dims);
        double ll = 0.0;
        for (const auto* s : ordered) ll += gaussian_log_likelihood(s->h, joint_mean, joint_cov);
        if (ll > best_ll) {
            best_ll = ll;
            report.theta_sp_hat = sp_bar;
            report.theta_vn_hat = vn;
            report.a_hat = a_hat;
            report.log_likelihood_trace.push_back(ll);
        }

        VecD state(5 * opts.k_paths + 4);
        state << pack_specular(sp_bar), vn.sigma2, vn.alpha2, vn.beta, a_hat.a;
        if (prev_state.size() == state.size()) {
            const double rel = (state - prev_state).norm() / std::max(1.0, prev_state.norm());
            if (rel < opts.rel_tol) {
                report.converged = true;
                break;
            }
        }
        prev_state = state;
    }
    return report;
}

}  // namespace hyphy
