#include "hyphy/channel_cfr.hpp"

namespace hyphy {

MatC ToeplitzCov::dense() const {
    const Eigen::Index n = nu.size();
    MatC r(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) r(i, j) = i >= j ? nu[i - j] : std::conj(nu[j - i]);
    return r;
}

VecD diffuse_tap_variances(const DiffuseNoiseParams& dn) {
    dn.validate();
    VecD v(dn.l_taps);
    const double scale = dn.alpha2 * (1.0 - std::exp(-2.0 * kPi * dn.beta));
    for (int l = 0; l < dn.l_taps; ++l) v[l] = scale * std::exp(-2.0 * kPi * dn.beta * l);
    return v;
}

VecC steering_vector(double psi, int n_ant) {
    if (n_ant < 1) throw std::invalid_argument("steering_vector: n_ant must be >= 1");
    VecC a(n_ant);
    const double shift = (n_ant - 1) / 2.0;
    for (int j = 0; j < n_ant; ++j) a[j] = std::exp(cxd(0.0, (j - shift) * psi)) / double(n_ant);
    return a;
}

SpecularParams random_specular(int k_paths, double gain_scale, Rng& rng) {
    if (k_paths < 1) throw std::invalid_argument("random_specular: k_paths must be >= 1");
    SpecularParams sp;
    sp.psi_t.resize(k_paths);
    sp.psi_r.resize(k_paths);
    sp.tau.resize(k_paths);
    sp.rho.resize(k_paths);
    for (int k = 0; k < k_paths; ++k) {
        sp.psi_t[k] = rng.uniform(-kPi, kPi);
        sp.psi_r[k] = rng.uniform(-kPi, kPi);
        sp.tau[k] = rng.uniform(-kPi, kPi);
        sp.rho[k] = rng.cnormal(gain_scale * gain_scale);
    }
    return sp;
}

namespace {

// Basis with entry (j, k) = exp(-i (j - (n-1)/2) v[k]).
MatC conj_phase_basis(const VecD& v, int n) {
    MatC u(n, v.size());
    const double shift = (n - 1) / 2.0;
    for (int j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < v.size(); ++k) u(j, k) = std::exp(cxd(0.0, -(j - shift) * v[k]));
    return u;
}

// Column-wise Kronecker product; rows of b vary fastest.
MatC khatri_rao(const MatC& a, const MatC& b) {
    MatC out(a.rows() * b.rows(), a.cols());
    for (Eigen::Index k = 0; k < a.cols(); ++k)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            out.block(i * b.rows(), k, b.rows(), 1) = a(i, k) * b.col(k);
    return out;
}

}  // namespace

VecC specular_mean(const SpecularParams& sp, const CfrDims& dims) {
    sp.validate();
    dims.validate();
    // Canonical layout: entry ((jt * n_rx) + jr) * n_f + n holds H[n](jr, jt), so the
    // per-antenna-pair blocks are contiguous and covariances are block-diagonal.
    // Per subcarrier, H[n] = A_R Gamma[n] A_T^H with A_T = conj(U_psiT)/N_tx,
    // A_R = conj(U_psiR)/N_rx, Gamma[n] = sqrt(N_rx N_tx) diag(rho .* U_tau row n).
    const MatC u_t = conj_phase_basis(sp.psi_t, dims.n_tx);
    const MatC u_r = conj_phase_basis(sp.psi_r, dims.n_rx);
    const MatC u_tau = conj_phase_basis(sp.tau, dims.n_f);
    const MatC kr = khatri_rao(u_t, khatri_rao(u_r.conjugate(), u_tau));
    const double scale = 1.0 / std::sqrt(double(dims.n_rx) * double(dims.n_tx));
    return kr * (scale * sp.rho);
}

cxd kappa(const DiffuseNoiseParams& dn, double m_frac) {
    const double c = dn.alpha2 * (1.0 - std::exp(-2.0 * kPi * dn.beta));
    if (m_frac == 0.0) return c * (1.0 - std::exp(-2.0 * kPi * dn.beta * dn.l_taps)) /
                              (1.0 - std::exp(-2.0 * kPi * dn.beta));
    const cxd f = std::exp(-2.0 * kPi * (cxd(dn.beta, 0.0) - cxd(0.0, m_frac)));
    return c * (1.0 - std::pow(f, dn.l_taps)) / (1.0 - f);
}

ToeplitzCov diffuse_noise_cov(const DiffuseNoiseParams& dn, int n_f) {
    if (n_f < 1) throw std::invalid_argument("diffuse_noise_cov: n_f must be >= 1");
    ToeplitzCov cov;
    cov.nu.resize(n_f);
    for (int k = 0; k < n_f; ++k) cov.nu[k] = kappa(dn, double(k) / n_f);
    cov.nu[0] += dn.sigma2;
    return cov;
}

MatC kron_expand(const ToeplitzCov& cov, const CfrDims& dims) {
    const Eigen::Index n = cov.dim();
    const int blocks = dims.n_blocks();
    MatC r = MatC::Zero(n * blocks, n * blocks);
    const MatC block = cov.dense();
    for (int b = 0; b < blocks; ++b) r.block(b * n, b * n, n, n) = block;
    return r;
}

ToeplitzCov diff_cov_h0(const DiffuseNoiseParams& dn_a, const SimilarityParam& a, int n_f) {
    a.validate();
    ToeplitzCov cov;
    cov.nu.resize(n_f);
    const double s = 2.0 * (1.0 - a.a);
    for (int k = 0; k < n_f; ++k) cov.nu[k] = s * kappa(dn_a, double(k) / n_f);
    return cov;
}

ToeplitzCov diff_cov_h1(const DiffuseNoiseParams& dn_a, const DiffuseNoiseParams& dn_e,
                        const SimilarityParam& a_e, int n_f) {
    a_e.validate();
    ToeplitzCov cov;
    cov.nu.resize(n_f);
    for (int k = 0; k < n_f; ++k) {
        const double m = double(k) / n_f;
        cov.nu[k] = kappa(dn_e, m) + (1.0 - 2.0 * a_e.a) * kappa(dn_a, m);
    }
    return cov;
}

CovFactor::CovFactor(const MatC& cov) {
    const Eigen::Index n = cov.rows();
    const double diag_mean = cov.real().diagonal().mean();
    const double eps = 1e-8 * (diag_mean > 0.0 ? diag_mean : 1.0);
    double jitter = 0.0;
    for (int attempt = 0; attempt < 3; ++attempt) {
        MatC work = cov;
        if (jitter > 0.0) work.diagonal().array() += jitter;
        llt_.compute(work);
        if (llt_.info() == Eigen::Success) {
            jitter_used_ = jitter;
            log_det_ = 0.0;
            for (Eigen::Index i = 0; i < n; ++i)
                log_det_ += 2.0 * std::log(std::real(llt_.matrixLLT()(i, i)));
            return;
        }
        jitter = jitter == 0.0 ? eps : 10.0 * jitter;
    }
    throw SingularModelError("covariance not positive definite after jitter retries");
}

double CovFactor::quad_form(const VecC& r) const {
    return std::real(r.dot(llt_.solve(r)));
}

double gaussian_log_likelihood(const VecC& h, const VecC& mean, const CovFactor& factor) {
    if (h.size() != mean.size() || h.size() != factor.dim())
        throw std::invalid_argument("gaussian_log_likelihood: dimension mismatch");
    const VecC r = h - mean;
    return -double(h.size()) * std::log(kPi) - factor.log_det() - factor.quad_form(r);
}

double gaussian_log_likelihood(const VecC& h, const VecC& mean, const MatC& cov) {
    return gaussian_log_likelihood(h, mean, CovFactor(cov));
}

DiffuseTapState init_diffuse_taps(const DiffuseNoiseParams& dn, Rng& rng) {
    const VecD var = diffuse_tap_variances(dn);
    DiffuseTapState st;
    st.taps.resize(dn.l_taps);
    for (int l = 0; l < dn.l_taps; ++l) st.taps[l] = rng.cnormal(var[l]);
    return st;
}

void evolve_diffuse_taps(DiffuseTapState& state, const DiffuseNoiseParams& dn,
                         const SimilarityParam& sim, Rng& rng) {
    const VecD var = diffuse_tap_variances(dn);
    const double a = sim.a;
    for (int l = 0; l < dn.l_taps; ++l)
        state.taps[l] = a * state.taps[l] + rng.cnormal((1.0 - a * a) * var[l]);
}

DiffuseTapState eve_taps_from_reference(const DiffuseTapState& ref, const DiffuseNoiseParams& dn_a,
                                        const DiffuseNoiseParams& dn_e, const SimilarityParam& a_e,
                                        Rng& rng) {
    const VecD var_a = diffuse_tap_variances(dn_a);
    const VecD var_e = diffuse_tap_variances(dn_e);
    DiffuseTapState st;
    st.taps.resize(dn_e.l_taps);
    for (int l = 0; l < dn_e.l_taps; ++l) {
        if (l < dn_a.l_taps) {
            // AR-1 coupling with the innovation sized so the tap variance stays
            // at the intruder's stationary value; the clamp engages where that
            // target is unreachable (cross-covariance at the realizable bound)
            const double innov = std::max(0.0, var_e[l] - a_e.a * a_e.a * var_a[l]);
            st.taps[l] = a_e.a * ref.taps[l] + rng.cnormal(innov);
        } else {
            st.taps[l] = rng.cnormal(var_e[l]);
        }
    }
    return st;
}

VecC taps_to_block(const DiffuseTapState& state, int n_f) {
    VecC q = VecC::Zero(n_f);
    const int l_taps = static_cast<int>(state.taps.size());
    for (int n = 0; n < n_f; ++n) {
        cxd acc = 0.0;
        for (int l = 0; l < l_taps; ++l)
            acc += state.taps[l] * std::exp(cxd(0.0, 2.0 * kPi * double(n) * double(l) / n_f));
        q[n] = acc;
    }
    return q;
}

VecC assemble_cfr(const VecC& mean, const std::vector<DiffuseTapState>& block_states,
                  const DiffuseNoiseParams& dn, const CfrDims& dims, Rng& rng) {
    if (static_cast<int>(block_states.size()) != dims.n_blocks())
        throw std::invalid_argument("assemble_cfr: one tap state per antenna-pair block required");
    VecC h = mean;
    for (int b = 0; b < dims.n_blocks(); ++b) {
        const VecC q = taps_to_block(block_states[b], dims.n_f);
        for (int n = 0; n < dims.n_f; ++n)
            h[b * dims.n_f + n] += q[n] + rng.cnormal(dn.sigma2);
    }
    return h;
}

std::vector<CfrSample> sample_cfr_sequence(const SpecularParams& sp, const DiffuseNoiseParams& dn,
                                           const SimilarityParam& sim, const CfrDims& dims,
                                           int n_steps, Rng& rng) {
    if (n_steps < 1) throw std::invalid_argument("sample_cfr_sequence: n_steps must be >= 1");
    const VecC mean = specular_mean(sp, dims);
    std::vector<DiffuseTapState> blocks(dims.n_blocks());
    for (auto& st : blocks) st = init_diffuse_taps(dn, rng);

    std::vector<CfrSample> out;
    out.reserve(n_steps);
    for (int u = 0; u < n_steps; ++u) {
        if (u > 0)
            for (auto& st : blocks) evolve_diffuse_taps(st, dn, sim, rng);
        CfrSample s;
        s.h = assemble_cfr(mean, blocks, dn, dims, rng);
        s.snapshot_index = u;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace hyphy
