#include <doctest.h>

#include "hyphy/channel_cfr.hpp"

using namespace hyphy;

namespace {

// Independent direct construction: per subcarrier H[n] = A_R Gamma[n] A_T^H,
// scattered into the canonical antenna-pair-block layout.
VecC specular_mean_direct(const SpecularParams& sp, const CfrDims& dims) {
    const int k = sp.num_paths();
    VecC h = VecC::Zero(dims.m());
    MatC a_t(dims.n_tx, k), a_r(dims.n_rx, k);
    for (int p = 0; p < k; ++p) {
        a_t.col(p) = steering_vector(sp.psi_t[p], dims.n_tx);
        a_r.col(p) = steering_vector(sp.psi_r[p], dims.n_rx);
    }
    const double scale = std::sqrt(double(dims.n_rx) * double(dims.n_tx));
    for (int n = 0; n < dims.n_f; ++n) {
        MatC gamma = MatC::Zero(k, k);
        for (int p = 0; p < k; ++p)
            gamma(p, p) = scale * sp.rho[p] *
                          std::exp(cxd(0.0, -(n - (dims.n_f - 1) / 2.0) * sp.tau[p]));
        const MatC hn = a_r * gamma * a_t.adjoint();  // n_rx x n_tx
        for (int jt = 0; jt < dims.n_tx; ++jt)
            for (int jr = 0; jr < dims.n_rx; ++jr)
                h[(jt * dims.n_rx + jr) * dims.n_f + n] = hn(jr, jt);
    }
    return h;
}

// Tap-domain Monte-Carlo oracle with the e^{-j} Fourier kernel (as in the
// frequency-sampling definition): estimates E[q[n] q[n+1]^*].
cxd mc_lag1_covariance(const DiffuseNoiseParams& dn, double spacing, int n_draws, Rng& rng) {
    const VecD var = diffuse_tap_variances(dn);
    cxd acc = 0.0;
    for (int i = 0; i < n_draws; ++i) {
        cxd q0 = 0.0, q1 = 0.0;
        for (int l = 0; l < dn.l_taps; ++l) {
            const cxd a = rng.cnormal(var[l]);
            q0 += a;  // n = 0
            q1 += a * std::exp(cxd(0.0, -2.0 * kPi * spacing * l));  // n = 1
        }
        acc += q0 * std::conj(q1);
    }
    return acc / double(n_draws);
}

MatC sample_covariance(const std::vector<VecC>& draws) {
    MatC acc = MatC::Zero(draws[0].size(), draws[0].size());
    for (const auto& v : draws) acc += v * v.adjoint();
    return acc / double(draws.size());
}

double rel_frobenius(const MatC& a, const MatC& ref) { return (a - ref).norm() / ref.norm(); }

const DiffuseNoiseParams kAliceDn{200.0, 0.02, 20, 20.0};
const DiffuseNoiseParams kEveDn{250.0, 0.08, 16, 26.0};

}  // namespace

TEST_CASE("steering vector closed forms") {
    const VecC a0 = steering_vector(0.0, 2);
    CHECK(a0[0].real() == doctest::Approx(0.5));
    CHECK(a0[1].real() == doctest::Approx(0.5));
    CHECK(std::abs(a0[0].imag()) < 1e-15);

    const VecC api = steering_vector(kPi, 2);
    CHECK(std::abs(api[0] - cxd(0.0, -0.5)) < 1e-12);
    CHECK(std::abs(api[1] - cxd(0.0, 0.5)) < 1e-12);

    // scalar-loop oracle at psi = 0.7, n = 4
    const VecC a = steering_vector(0.7, 4);
    for (int j = 0; j < 4; ++j) {
        CHECK(std::abs(a[j]) == doctest::Approx(0.25));
        const cxd expect = std::exp(cxd(0.0, (j - 1.5) * 0.7)) / 4.0;
        CHECK(std::abs(a[j] - expect) < 1e-14);
    }
    // conjugate-symmetric phases
    CHECK(std::abs(a[0] - std::conj(a[3])) < 1e-14);
    CHECK(std::abs(a[1] - std::conj(a[2])) < 1e-14);
}

TEST_CASE("specular mean trivial cases") {
    CfrDims dims{2, 2, 4};
    SpecularParams sp;
    sp.psi_t = VecD::Zero(1);
    sp.psi_r = VecD::Zero(1);
    sp.tau = VecD::Zero(1);
    sp.rho = VecC::Zero(1);
    CHECK(specular_mean(sp, dims).norm() == 0.0);

    sp.rho = VecC::Ones(1);
    const VecC h = specular_mean(sp, dims);
    for (Eigen::Index i = 0; i < h.size(); ++i)
        CHECK(std::abs(h[i]) == doctest::Approx(std::abs(h[0])));
}

TEST_CASE("specular mean matches the per-subcarrier construction") {
    Rng rng(7);
    CfrDims dims{2, 3, 5};
    const SpecularParams sp = random_specular(2, 1.3, rng);
    const VecC fast = specular_mean(sp, dims);
    const VecC direct = specular_mean_direct(sp, dims);
    CHECK((fast - direct).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("kappa closed form") {
    DiffuseNoiseParams zero{0.0, 0.5, 3, 0.0};
    CHECK(std::abs(kappa(zero, 0.3)) == 0.0);

    // alpha2 (1 - e^{-2 pi beta L}) at zero separation
    const DiffuseNoiseParams dn{200.0, 0.02, 20, 0.0};
    CHECK(std::real(kappa(dn, 0.0)) == doctest::Approx(183.7995).epsilon(1e-4));
    CHECK(std::abs(std::imag(kappa(dn, 0.0))) < 1e-12);

    // Monte-Carlo tap-domain oracle, zero separation (pure variance)
    Rng rng(3);
    const VecD var = diffuse_tap_variances(dn);
    double acc = 0.0;
    const int n_draws = 200000;
    for (int i = 0; i < n_draws; ++i) {
        cxd q = 0.0;
        for (int l = 0; l < dn.l_taps; ++l) q += rng.cnormal(var[l]);
        acc += std::norm(q);
    }
    CHECK(acc / n_draws == doctest::Approx(std::real(kappa(dn, 0.0))).epsilon(0.01));

    // lag-1 complex covariance against the same oracle
    const cxd mc = mc_lag1_covariance(dn, 1.0 / 80.0, 400000, rng);
    const cxd expect = kappa(dn, 1.0 / 80.0);
    CHECK(std::abs(mc - expect) / std::abs(expect) < 0.01);
}

TEST_CASE("diffuse_noise_cov structure") {
    DiffuseNoiseParams white{0.0, 0.5, 1, 1.0};
    const ToeplitzCov nu = diffuse_noise_cov(white, 6);
    CHECK(std::abs(nu.nu[0] - 1.0) < 1e-15);
    for (int k = 1; k < 6; ++k) CHECK(std::abs(nu.nu[k]) < 1e-15);

    const ToeplitzCov alice = diffuse_noise_cov(kAliceDn, 20);
    CHECK(std::real(alice.nu[0]) == doctest::Approx(203.7995).epsilon(1e-4));

    // Hermitian exactly, PSD after jitter
    const MatC dense = alice.dense();
    CHECK((dense - dense.adjoint()).norm() == 0.0);
    CHECK_NOTHROW(CovFactor{dense});
}

TEST_CASE("kron_expand block structure and trace") {
    CfrDims dims{2, 2, 20};
    const ToeplitzCov cov = diffuse_noise_cov(kAliceDn, 20);
    const MatC r = kron_expand(cov, dims);
    CHECK(r.rows() == 80);
    // block-diagonal: off-diagonal blocks vanish
    CHECK(r.block(0, 20, 20, 20).norm() == 0.0);
    CHECK(r.block(60, 0, 20, 60).norm() == 0.0);
    CHECK((r.block(20, 20, 20, 20) - cov.dense()).norm() == 0.0);
    CHECK(std::real(r.trace()) ==
          doctest::Approx(4.0 * 20.0 * std::real(cov.nu[0])).epsilon(1e-12));

    // applying the expanded matrix equals block-wise application
    Rng rng(5);
    const VecC x = cnormal_vector(rng, 80);
    VecC blockwise(80);
    const MatC dense = cov.dense();
    for (int b = 0; b < 4; ++b) blockwise.segment(20 * b, 20) = dense * x.segment(20 * b, 20);
    CHECK(((r * x) - blockwise).norm() < 1e-12 * blockwise.norm());
}

TEST_CASE("tap-domain sampler frozen and independent regimes") {
    CfrDims dims{1, 2, 8};
    Rng rng(11);
    const SpecularParams sp = random_specular(2, 1.0, rng);

    DiffuseNoiseParams dn{5.0, 0.1, 6, 0.0};
    const auto frozen = sample_cfr_sequence(sp, dn, SimilarityParam{1.0}, dims, 5, rng);
    for (int u = 1; u < 5; ++u) CHECK((frozen[size_t(u)].h - frozen[0].h).norm() == 0.0);

    // a = 0: consecutive diffuse parts uncorrelated
    DiffuseNoiseParams dn2{5.0, 0.1, 6, 0.0};
    cxd cross = 0.0;
    double var_acc = 0.0;
    const int n_pairs = 20000;
    const VecC mean = specular_mean(sp, dims);
    Rng rng2(13);
    for (int i = 0; i < n_pairs; ++i) {
        auto seq = sample_cfr_sequence(sp, dn2, SimilarityParam{0.0}, dims, 2, rng2);
        const VecC d0 = seq[0].h - mean, d1 = seq[1].h - mean;
        cross += d0.dot(d1);  // conj(d0) . d1 summed over entries
        var_acc += d0.squaredNorm();
    }
    CHECK(std::abs(cross) / var_acc < 0.02);
}

TEST_CASE("sampler covariance matches the closed form") {
    CfrDims dims{1, 1, 20};
    Rng rng(17);
    SpecularParams sp;
    sp.psi_t = VecD::Zero(1);
    sp.psi_r = VecD::Zero(1);
    sp.tau = VecD::Zero(1);
    sp.rho = VecC::Zero(1);
    DiffuseNoiseParams dn = kAliceDn;
    dn.sigma2 = 0.0;

    std::vector<VecC> draws;
    const int n_draws = 30000;
    draws.reserve(n_draws);
    for (int i = 0; i < n_draws; ++i) {
        const DiffuseTapState st = init_diffuse_taps(dn, rng);
        draws.push_back(taps_to_block(st, dims.n_f));
    }
    const MatC expected = diffuse_noise_cov(dn, dims.n_f).dense();
    CHECK(rel_frobenius(sample_covariance(draws), expected) < 0.05);
}

TEST_CASE("sample mean of CFRs converges to the specular mean") {
    CfrDims dims{1, 1, 10};
    Rng rng(23);
    const SpecularParams sp = random_specular(2, 3.0, rng);
    DiffuseNoiseParams dn{20.0, 0.05, 8, 4.0};
    const VecC mean = specular_mean(sp, dims);
    const int n = 100000;
    VecC acc = VecC::Zero(dims.m());
    std::vector<DiffuseTapState> blocks(1);
    for (int i = 0; i < n; ++i) {
        blocks[0] = init_diffuse_taps(dn, rng);
        acc += assemble_cfr(mean, blocks, dn, dims, rng);
    }
    acc /= double(n);
    const double nu0 = std::real(diffuse_noise_cov(dn, dims.n_f).nu[0]);
    const double bound = 5.0 * std::sqrt(nu0 / double(n));
    CHECK((acc - mean).cwiseAbs().maxCoeff() < bound);
}

TEST_CASE("difference covariance under the null hypothesis") {
    const ToeplitzCov frozen = diff_cov_h0(kAliceDn, SimilarityParam{1.0}, 20);
    CHECK(frozen.nu.norm() == 0.0);

    const ToeplitzCov h0 = diff_cov_h0(kAliceDn, SimilarityParam{0.85}, 20);
    CHECK(std::real(h0.nu[0]) == doctest::Approx(55.1398).epsilon(1e-3));

    // Monte-Carlo consecutive differences from the AR-1 tap generator
    Rng rng(29);
    DiffuseNoiseParams dn = kAliceDn;
    dn.sigma2 = 0.0;
    std::vector<VecC> diffs;
    const int n_pairs = 30000;
    for (int i = 0; i < n_pairs; ++i) {
        DiffuseTapState st = init_diffuse_taps(dn, rng);
        const VecC q0 = taps_to_block(st, 20);
        evolve_diffuse_taps(st, dn, SimilarityParam{0.85}, rng);
        diffs.push_back(taps_to_block(st, 20) - q0);
    }
    CHECK(rel_frobenius(sample_covariance(diffs), h0.dense()) < 0.05);
}

TEST_CASE("difference covariance under the alternative hypothesis") {
    // identical parameters and unit similarity collapse the difference
    CHECK(diff_cov_h1(kAliceDn, kAliceDn, SimilarityParam{1.0}, 20).nu.norm() == 0.0);

    // same-parameter case reduces to the null-hypothesis covariance exactly
    const SimilarityParam a{0.85};
    const ToeplitzCov via_h1 = diff_cov_h1(kAliceDn, kAliceDn, a, 20);
    const ToeplitzCov via_h0 = diff_cov_h0(kAliceDn, a, 20);
    CHECK((via_h1.nu - via_h0.nu).norm() < 1e-12 * via_h0.nu.norm());
}

TEST_CASE("intruder pair generator matches the closed form where realizable") {
    // slower-decay intruder profile: the cross-covariance is feasible on every
    // shared tap, so the generator reproduces the model covariance exactly
    DiffuseNoiseParams dn_a = kAliceDn;
    dn_a.sigma2 = 0.0;
    DiffuseNoiseParams dn_e{250.0, 0.02, 20, 0.0};
    const SimilarityParam a_e{0.65};
    const ToeplitzCov expected = diff_cov_h1(dn_a, dn_e, a_e, 20);

    Rng rng(31);
    std::vector<VecC> diffs;
    for (int i = 0; i < 30000; ++i) {
        const DiffuseTapState alice = init_diffuse_taps(dn_a, rng);
        const DiffuseTapState eve = eve_taps_from_reference(alice, dn_a, dn_e, a_e, rng);
        diffs.push_back(taps_to_block(eve, 20) - taps_to_block(alice, 20));
    }
    CHECK(rel_frobenius(sample_covariance(diffs), expected.dense()) < 0.05);
}

TEST_CASE("published-parameter intruder model is not jointly realizable") {
    // The nominal difference covariance has negative eigenvalues: the per-tap
    // cross-covariance a_e Var^A_l exceeds the Cauchy-Schwarz bound on the
    // fast-decaying intruder tail, so no pair generator can realize it.
    const ToeplitzCov nominal = diff_cov_h1(kAliceDn, kEveDn, SimilarityParam{0.65}, 20);
    Eigen::SelfAdjointEigenSolver<MatC> eig(nominal.dense(), Eigen::EigenvaluesOnly);
    CHECK(eig.eigenvalues().minCoeff() < -20.0);

    // generated intruder marginals: stationary variance where the clamp is
    // inactive, a_e^2 Var^A_l where it engages
    DiffuseNoiseParams dn_a = kAliceDn;
    dn_a.sigma2 = 0.0;
    DiffuseNoiseParams dn_e = kEveDn;
    dn_e.sigma2 = 0.0;
    const double a_e = 0.65;
    const VecD va = diffuse_tap_variances(dn_a);
    const VecD ve = diffuse_tap_variances(dn_e);
    MatC expected = MatC::Zero(20, 20);
    for (int l = 0; l < dn_e.l_taps; ++l) {
        const double var = std::max(ve[l], a_e * a_e * va[l]);
        for (int i = 0; i < 20; ++i)
            for (int j = 0; j < 20; ++j)
                expected(i, j) += var * std::exp(cxd(0.0, 2.0 * kPi * l * double(i - j) / 20.0));
    }
    Rng rng(37);
    std::vector<VecC> eves;
    for (int i = 0; i < 30000; ++i) {
        const DiffuseTapState alice = init_diffuse_taps(dn_a, rng);
        const DiffuseTapState eve = eve_taps_from_reference(alice, dn_a, dn_e, SimilarityParam{a_e}, rng);
        eves.push_back(taps_to_block(eve, 20));
    }
    CHECK(rel_frobenius(sample_covariance(eves), expected) < 0.05);
}

TEST_CASE("complex Gaussian log likelihood") {
    MatC unit = MatC::Identity(1, 1);
    VecC h(1), mean(1);
    h << cxd(0.0, 0.0);
    mean << cxd(0.0, 0.0);
    CHECK(gaussian_log_likelihood(h, mean, unit) == doctest::Approx(-std::log(kPi)));
    h << cxd(1.0, 0.0);
    CHECK(gaussian_log_likelihood(h, mean, unit) == doctest::Approx(-std::log(kPi) - 1.0));

    // quadratic-form oracle via the explicit inverse on a random 4-dim case
    Rng rng(41);
    MatC a(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) a(i, j) = rng.cnormal();
    const MatC cov = a * a.adjoint() + 0.5 * MatC::Identity(4, 4);
    const VecC x = cnormal_vector(rng, 4), mu = cnormal_vector(rng, 4);
    const MatC inv = cov.inverse();
    const double expect = -4.0 * std::log(kPi) - std::log(std::abs(cov.determinant())) -
                          std::real((x - mu).dot(inv * (x - mu)));
    CHECK(gaussian_log_likelihood(x, mu, cov) == doctest::Approx(expect).epsilon(1e-9));

    // singular covariance refuses after the jitter retries
    MatC singular = MatC::Zero(3, 3);
    singular(0, 0) = -1.0;
    CHECK_THROWS_AS(gaussian_log_likelihood(VecC::Zero(3), VecC::Zero(3), singular),
                    SingularModelError);
}
