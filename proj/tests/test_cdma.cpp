#include <doctest.h>

#include <filesystem>

#include "hyphy/cdma.hpp"

using namespace hyphy;

namespace {

CdmaConfig small_config(int n_packets = 24, double snr_db = 60.0) {
    CdmaConfig cfg;
    cfg.k_users = 3;
    cfg.n_gain = 32;
    cfg.n_packets = n_packets;
    cfg.l_paths = 3;
    cfg.snr_db = snr_db;
    return cfg;
}

// analytic effective chip pulse, evaluated in continuous time
cxd g_continuous(const UserChannel& uc, const CdmaConfig& cfg, double t) {
    cxd acc = 0.0;
    for (Eigen::Index l = 0; l < uc.path_gains.size(); ++l)
        acc += uc.path_gains[l] * rc_pulse(t - uc.offset - uc.path_delays[l], cfg.chip_interval,
                                           cfg.rolloff);
    return uc.amplitude * acc;
}

}  // namespace

TEST_CASE("chip pulse supports and self-convolution") {
    const double tc = 1e-3, roll = 0.5;
    CHECK(rc_pulse(-1e-9, tc, roll) == 0.0);
    CHECK(rc_pulse(8 * tc, tc, roll) == 0.0);
    CHECK(srrc_pulse(4 * tc + 1e-9, tc, roll) == 0.0);

    // the center is the maximum
    const double peak = rc_pulse(4 * tc, tc, roll);
    for (double t = 0.0; t < 8 * tc; t += tc / 16) CHECK(rc_pulse(t, tc, roll) <= peak + 1e-12);

    // discrete self-convolution of the truncated SRRC reproduces the RC samples
    const int oversample = 64;
    const double dt = tc / oversample;
    const int n_srrc = 4 * oversample;
    std::vector<double> srrc(n_srrc + 1);
    for (int i = 0; i <= n_srrc; ++i) srrc[size_t(i)] = srrc_pulse(i * dt, tc, roll);
    double num = 0.0, den = 0.0;
    for (int j = 0; j <= 8 * oversample; ++j) {
        double conv = 0.0;
        for (int i = 0; i <= n_srrc; ++i) {
            const int k = j - i;
            if (k >= 0 && k <= n_srrc) conv += srrc[size_t(i)] * srrc[size_t(k)];
        }
        conv *= dt / tc;  // normalize to the unit-peak RC
        const double rc = rc_pulse(j * dt, tc, roll);
        num += (conv - rc) * (conv - rc);
        den += rc * rc;
    }
    CHECK(std::sqrt(num / den) < 0.02);
}

TEST_CASE("effective chip pulse") {
    const CdmaConfig cfg = small_config();
    UserChannel single;
    single.amplitude = 1.0;
    single.offset = 0.0;
    single.path_gains = VecC::Ones(1);
    single.path_delays = VecD::Zero(1);
    const VecC g = effective_chip_pulse(single, cfg);
    const double dt = cfg.chip_interval / cfg.m_oversample;
    for (int i = 1; i <= cfg.g_len(); ++i)
        CHECK(std::abs(g[i - 1] - rc_pulse(i * dt, cfg.chip_interval, cfg.rolloff)) < 1e-15);

    // linear in the amplitude
    UserChannel twice = single;
    twice.amplitude = 2.0;
    CHECK((effective_chip_pulse(twice, cfg) - 2.0 * g).norm() < 1e-15);

    // three paths superpose
    Rng rng(3);
    UserChannel multi;
    multi.amplitude = cxd(0.7, 0.3);
    multi.offset = 1.5 * cfg.chip_interval;
    multi.path_gains = cnormal_vector(rng, 3);
    multi.path_delays.resize(3);
    multi.path_delays << 0.0, 2.2 * cfg.chip_interval, 5.1 * cfg.chip_interval;
    VecC sum = VecC::Zero(cfg.g_len());
    for (int l = 0; l < 3; ++l) {
        UserChannel part = multi;
        part.path_gains = VecC::Constant(1, multi.path_gains[l]);
        part.path_delays = VecD::Constant(1, multi.path_delays[l]);
        sum += effective_chip_pulse(part, cfg);
    }
    CHECK((effective_chip_pulse(multi, cfg) - sum).norm() < 1e-12);
}

TEST_CASE("code matrix satisfies the defining waveform identity") {
    const CdmaConfig cfg = small_config();
    Rng rng(5);

    // all-zero code gives the zero matrix
    SpreadingCodes zero;
    zero.chips.assign(1, std::vector<std::vector<int>>(3, std::vector<int>(cfg.n_gain, 0)));
    CdmaConfig cfg1 = cfg;
    cfg1.k_users = 1;
    CHECK(code_matrix(zero, 0, 2, 1, cfg1).norm() == 0.0);

    const SpreadingCodes codes = random_codes(cfg.k_users, cfg.n_packets, cfg.n_gain, rng);
    const auto channels = random_user_channels(cfg, rng);
    const double dt = cfg.chip_interval / cfg.m_oversample;
    for (int inst = 0; inst < 6; ++inst) {
        const int k = int(rng.integer(std::uint64_t(cfg.k_users)));
        const int p = 2 + int(rng.integer(std::uint64_t(cfg.n_packets - 2)));
        const int lag = int(rng.integer(3));
        const MatD c = code_matrix(codes, k, p, lag, cfg);
        const VecC g = effective_chip_pulse(channels[size_t(k)], cfg);
        VecC via_matrix(cfg.frame_len());
        via_matrix.real() = c * g.real();
        via_matrix.imag() = c * g.imag();
        // direct waveform sampling of the user's contribution over the frame
        for (int s = 1; s <= cfg.frame_len(); ++s) {
            cxd direct = 0.0;
            for (int n = 0; n < cfg.n_gain; ++n)
                direct += double(codes.chips[size_t(k)][size_t(p - lag)][size_t(n)]) *
                          g_continuous(channels[size_t(k)], cfg,
                                       lag * cfg.t_b() + s * dt - n * cfg.chip_interval);
            CHECK(std::abs(via_matrix[s - 1] - direct) < 1e-9);
        }
        // each row holds at most one chip per code position
        for (int s = 0; s < cfg.frame_len(); ++s) {
            int nonzeros = 0;
            for (int j = 0; j < cfg.g_len(); ++j)
                if (c(s, j) != 0.0) ++nonzeros;
            CHECK(nonzeros <= cfg.n_gain);
        }
    }
}

TEST_CASE("scene synthesis") {
    Rng rng(7);
    const CdmaConfig cfg = small_config(24, 300.0);  // effectively noiseless
    const SpreadingCodes codes = random_codes(cfg.k_users, cfg.n_packets, cfg.n_gain, rng);
    const auto channels = random_user_channels(cfg, rng);
    const Eigen::MatrixXi bits = random_bits(cfg.k_users, cfg.n_packets, rng);
    const CdmaScene scene = synthesize_scene(cfg, codes, channels, bits, rng);

    // frames reconstruct exactly from the code matrices and g
    for (const int p : {0, 1, 5, 23}) {
        VecC expect = VecC::Zero(cfg.frame_len());
        for (int k = 0; k < cfg.k_users; ++k)
            for (int lag = 0; lag <= 2; ++lag) {
                if (p - lag < 0) continue;
                const MatD c = code_matrix(codes, k, p, lag, cfg);
                VecC part(cfg.frame_len());
                part.real() = c * scene.g_true.col(k).real();
                part.imag() = c * scene.g_true.col(k).imag();
                expect += double(bits(k, p - lag)) * part;
            }
        CHECK((scene.frames.col(p) - expect).norm() < 1e-9 * expect.norm() + 1e-12);
    }

    // configured SNR is realized by the added noise
    CdmaConfig noisy = small_config(1000, 8.0);
    const SpreadingCodes codes2 = random_codes(noisy.k_users, noisy.n_packets, noisy.n_gain, rng);
    const Eigen::MatrixXi bits2 = random_bits(noisy.k_users, noisy.n_packets, rng);
    const MatC clean = synthesize_noiseless_frames(noisy, codes2, channels, bits2, [&] {
        MatC g(noisy.g_len(), noisy.k_users);
        for (int k = 0; k < noisy.k_users; ++k)
            g.col(k) = effective_chip_pulse(channels[size_t(k)], noisy);
        return g;
    }());
    const CdmaScene noisy_scene = synthesize_scene(noisy, codes2, channels, bits2, rng);
    const double measured = (noisy_scene.frames - clean).cwiseAbs2().mean();
    CHECK(measured == doctest::Approx(noisy_scene.noise_var).epsilon(0.05));
    CHECK(noisy_scene.noise_var ==
          doctest::Approx(clean.cwiseAbs2().mean() * std::pow(10.0, -0.8)).epsilon(1e-12));
}

TEST_CASE("least-squares channel estimation") {
    Rng rng(9);
    const CdmaConfig cfg = small_config(44, 300.0);
    const SpreadingCodes codes = random_codes(cfg.k_users, cfg.n_packets, cfg.n_gain, rng);
    const auto channels = random_user_channels(cfg, rng);
    const Eigen::MatrixXi bits = random_bits(cfg.k_users, cfg.n_packets, rng);
    CdmaScene scene = synthesize_scene(cfg, codes, channels, bits, rng);
    scene.frames = synthesize_noiseless_frames(cfg, codes, channels, bits, scene.g_true);

    const MatC g_hat = ls_channel_estimate(scene.frames, codes, bits, cfg, 40);
    CHECK((g_hat - scene.g_true).norm() < 1e-8 * scene.g_true.norm());

    // linearity in the observations
    const MatC g_scaled = ls_channel_estimate(3.0 * scene.frames, codes, bits, cfg, 40);
    CHECK((g_scaled - 3.0 * g_hat).norm() < 1e-8 * g_hat.norm());

    // one training frame cannot identify K * g_len coefficients
    CHECK_THROWS_AS(ls_channel_estimate(scene.frames, codes, bits, cfg, 1), SingularModelError);
}

TEST_CASE("single-path extraction") {
    Rng rng(11);
    const CdmaConfig cfg = small_config();
    const double dt = cfg.chip_interval / cfg.m_oversample;

    // noiseless path on the fine grid
    UserChannel uc;
    uc.amplitude = 1.0;
    uc.offset = 0.0;
    uc.path_gains = VecC::Constant(1, std::polar(2.0, 0.3));
    uc.path_delays = VecD::Constant(1, 7.0 * dt + 3.0 * dt / 10.0);
    const VecC g = effective_chip_pulse(uc, cfg);
    const SinglePathEstimate est = extract_single_path(g, cfg);
    CHECK(std::abs(est.tau - uc.path_delays[0]) <= dt / 10.0 + 1e-12);
    CHECK(std::abs(est.amplitude - 2.0) / 2.0 < 0.02);
    CHECK(std::abs(est.phase - 0.3) < 0.05);

    // global phase rotation shifts only the phase estimate
    const SinglePathEstimate rot = extract_single_path(std::polar(1.0, 0.9) * g, cfg);
    CHECK(rot.tau == est.tau);
    CHECK(rot.amplitude == doctest::Approx(est.amplitude).epsilon(1e-9));
    CHECK(rot.phase == doctest::Approx(est.phase + 0.9).epsilon(1e-6));

    // positive scaling scales only the amplitude
    const SinglePathEstimate big = extract_single_path(2.5 * g, cfg);
    CHECK(big.tau == est.tau);
    CHECK(big.amplitude == doctest::Approx(2.5 * est.amplitude).epsilon(1e-9));
    CHECK(big.phase == doctest::Approx(est.phase).epsilon(1e-9));

    CHECK_THROWS(extract_single_path(VecC::Zero(cfg.g_len()), cfg));
}

TEST_CASE("multipath extraction by successive cancellation") {
    const CdmaConfig cfg = small_config();
    const double tc = cfg.chip_interval;
    const double dt = tc / cfg.m_oversample;

    UserChannel uc;
    uc.amplitude = 1.0;
    uc.offset = 0.0;
    uc.path_gains.resize(3);
    uc.path_delays.resize(3);
    // separations above 2 chips, amplitude spread 10 dB
    uc.path_gains << std::polar(3.16, 0.4), std::polar(1.8, -1.2), std::polar(1.0, 2.0);
    uc.path_delays << 2.0 * tc, 4.5 * tc, 7.0 * tc;
    const VecC g = effective_chip_pulse(uc, cfg);

    const UserChannel est = extract_multipath(g, 3, cfg);
    // sorted by descending amplitude: matches construction order here
    for (int l = 0; l < 3; ++l) {
        CHECK(std::abs(est.path_delays[l] - uc.path_delays[l]) <= dt / 10.0 + 1e-12);
        CHECK(std::abs(std::abs(est.path_gains[l]) - std::abs(uc.path_gains[l])) /
                  std::abs(uc.path_gains[l]) <
              0.10);
    }

    // residual energy after cancelling the three paths
    VecC residual = g;
    for (int l = 0; l < 3; ++l)
        for (int i = 1; i <= cfg.g_len(); ++i)
            residual[i - 1] -=
                est.path_gains[l] * rc_pulse(i * dt - est.path_delays[l], tc, cfg.rolloff);
    CHECK(residual.squaredNorm() / g.squaredNorm() < 0.05);
}

TEST_CASE("detectors") {
    Rng rng(13);
    // K = 1 noiseless: MMSE recovers every bit
    CdmaConfig cfg1 = small_config(40, 300.0);
    cfg1.k_users = 1;
    const SpreadingCodes codes1 = random_codes(1, cfg1.n_packets, cfg1.n_gain, rng);
    const auto ch1 = random_user_channels(cfg1, rng);
    const Eigen::MatrixXi bits1 = random_bits(1, cfg1.n_packets, rng);
    const CdmaScene s1 = synthesize_scene(cfg1, codes1, ch1, bits1, rng);
    for (int p = 2; p + 1 < cfg1.n_packets; ++p) {
        const auto b = mmse_detect(detection_window(s1, p), p, s1.g_true, s1.noise_var, codes1, cfg1);
        CHECK(b[0] == bits1(0, p));
    }

    // K = 1 noiseless MAP matches the transmitted bit as well
    for (int p = 2; p + 1 < cfg1.n_packets; ++p) {
        const std::vector<int> b1{bits1(0, p - 1)}, b2{bits1(0, p - 2)};
        const auto b = map_detect_exhaustive(s1.frames.col(p), p, b1, b2, codes1, s1.g_true, cfg1);
        CHECK(b[0] == bits1(0, p));
    }

    // exhaustive detector against an independent brute-force enumeration (K = 3, noisy)
    CdmaConfig cfg3 = small_config(30, 6.0);
    const SpreadingCodes codes3 = random_codes(3, cfg3.n_packets, cfg3.n_gain, rng);
    const auto ch3 = random_user_channels(cfg3, rng);
    const Eigen::MatrixXi bits3 = random_bits(3, cfg3.n_packets, rng);
    const CdmaScene s3 = synthesize_scene(cfg3, codes3, ch3, bits3, rng);
    for (const int p : {2, 7, 19}) {
        std::vector<int> b1(3), b2(3);
        for (int k = 0; k < 3; ++k) {
            b1[size_t(k)] = bits3(k, p - 1);
            b2[size_t(k)] = bits3(k, p - 2);
        }
        const auto fast = map_detect_exhaustive(s3.frames.col(p), p, b1, b2, codes3, s3.g_true, cfg3);
        // brute force re-implementation
        double best = std::numeric_limits<double>::infinity();
        std::vector<int> best_bits;
        std::vector<int> cand(3);
        for (int c0 : {-1, 1})
            for (int c1 : {-1, 1})
                for (int c2 : {-1, 1}) {
                    cand = {c0, c1, c2};
                    VecC model = VecC::Zero(cfg3.frame_len());
                    for (int k = 0; k < 3; ++k) {
                        for (int lag = 0; lag <= 2; ++lag) {
                            const int b = lag == 0 ? cand[size_t(k)]
                                                   : (lag == 1 ? b1[size_t(k)] : b2[size_t(k)]);
                            const MatD c = code_matrix(codes3, k, p, lag, cfg3);
                            VecC part(cfg3.frame_len());
                            part.real() = c * s3.g_true.col(k).real();
                            part.imag() = c * s3.g_true.col(k).imag();
                            model += double(b) * part;
                        }
                    }
                    const double cost = (s3.frames.col(p) - model).squaredNorm();
                    if (cost < best) {
                        best = cost;
                        best_bits = cand;
                    }
                }
        CHECK(fast == best_bits);
    }

    // noiseless exact recovery for K = 5
    CdmaConfig cfg5 = small_config(16, 300.0);
    cfg5.k_users = 5;
    const SpreadingCodes codes5 = random_codes(5, cfg5.n_packets, cfg5.n_gain, rng);
    const auto ch5 = random_user_channels(cfg5, rng);
    const Eigen::MatrixXi bits5 = random_bits(5, cfg5.n_packets, rng);
    const CdmaScene s5 = synthesize_scene(cfg5, codes5, ch5, bits5, rng);
    for (const int p : {2, 9}) {
        std::vector<int> b1(5), b2(5);
        for (int k = 0; k < 5; ++k) {
            b1[size_t(k)] = bits5(k, p - 1);
            b2[size_t(k)] = bits5(k, p - 2);
        }
        const auto b = map_detect_exhaustive(s5.frames.col(p), p, b1, b2, codes5, s5.g_true, cfg5);
        for (int k = 0; k < 5; ++k) CHECK(b[size_t(k)] == bits5(k, p));
    }

    // genie-aided exhaustive detection is at least as good as the linear MMSE
    CdmaConfig cfgc = small_config(1200, 8.0);
    const SpreadingCodes codesc = random_codes(3, cfgc.n_packets, cfgc.n_gain, rng);
    const auto chc = random_user_channels(cfgc, rng);
    const Eigen::MatrixXi bitsc = random_bits(3, cfgc.n_packets, rng);
    const CdmaScene sc = synthesize_scene(cfgc, codesc, chc, bitsc, rng);
    long map_err = 0, mmse_err = 0, total = 0;
    for (int p = 2; p + 1 < cfgc.n_packets; ++p) {
        std::vector<int> b1(3), b2(3);
        for (int k = 0; k < 3; ++k) {
            b1[size_t(k)] = bitsc(k, p - 1);
            b2[size_t(k)] = bitsc(k, p - 2);
        }
        const auto bm = map_detect_exhaustive(sc.frames.col(p), p, b1, b2, codesc, sc.g_true, cfgc);
        const auto bl = mmse_detect(detection_window(sc, p), p, sc.g_true, sc.noise_var, codesc, cfgc);
        for (int k = 0; k < 3; ++k) {
            if (bm[size_t(k)] != bitsc(k, p)) ++map_err;
            if (bl[size_t(k)] != bitsc(k, p)) ++mmse_err;
            ++total;
        }
    }
    CHECK(total >= 3000);
    CHECK(map_err <= mmse_err);
}

TEST_CASE("code corruption") {
    Rng rng(17);
    const SpreadingCodes codes = random_codes(2, 50, 32, rng);
    const SpreadingCodes same = corrupt_codes(codes, 0.0, rng);
    CHECK(same.chips == codes.chips);
    const SpreadingCodes flipped = corrupt_codes(codes, 1.0, rng);
    for (int k = 0; k < 2; ++k)
        for (int p = 0; p < 50; ++p)
            for (int n = 0; n < 32; ++n)
                CHECK(flipped.chips[size_t(k)][size_t(p)][size_t(n)] ==
                      -codes.chips[size_t(k)][size_t(p)][size_t(n)]);

    const SpreadingCodes big = random_codes(2, 1600, 32, rng);  // about 1e5 chips
    const SpreadingCodes noisy = corrupt_codes(big, 0.2, rng);
    long flips = 0, chips = 0;
    for (int k = 0; k < 2; ++k)
        for (int p = 0; p < 1600; ++p)
            for (int n = 0; n < 32; ++n) {
                if (noisy.chips[size_t(k)][size_t(p)][size_t(n)] !=
                    big.chips[size_t(k)][size_t(p)][size_t(n)])
                    ++flips;
                ++chips;
            }
    CHECK(double(flips) / double(chips) == doctest::Approx(0.2).epsilon(0.05));
}

TEST_CASE("scene export and import round trip") {
    Rng rng(19);
    const CdmaConfig cfg = small_config(8, 10.0);
    const SpreadingCodes codes = random_codes(cfg.k_users, cfg.n_packets, cfg.n_gain, rng);
    const auto channels = random_user_channels(cfg, rng);
    const Eigen::MatrixXi bits = random_bits(cfg.k_users, cfg.n_packets, rng);
    const CdmaScene scene = synthesize_scene(cfg, codes, channels, bits, rng);

    const std::string dir = "/tmp/hyphy_test_scene";
    export_scene(dir, scene);
    const CdmaScene back = import_scene(dir);
    CHECK(back.cfg.k_users == cfg.k_users);
    CHECK(back.cfg.n_packets == cfg.n_packets);
    CHECK((back.frames - scene.frames).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(back.true_bits == scene.true_bits);
    CHECK(back.codes.chips == codes.chips);
    CHECK((back.g_true - scene.g_true).cwiseAbs().maxCoeff() < 1e-12);
    std::filesystem::remove_all(dir);
}
