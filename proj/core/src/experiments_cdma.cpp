#include <algorithm>
#include <filesystem>

#include "experiments_impl.hpp"

namespace hyphy {
namespace detail {

namespace {

CdmaConfig base_cdma_config(const Config& v) {
    CdmaConfig cfg;
    cfg.k_users = v.get_int("cdma.k_users");
    cfg.n_gain = v.get_int("cdma.n_gain");
    cfg.l_paths = v.get_int("cdma.l_paths");
    cfg.chip_interval = v.get_double("cdma.chip_interval");
    cfg.rolloff = v.get_double("cdma.rolloff");
    cfg.nfr_db = v.get_double("cdma.nfr_db");
    return cfg;
}

// Short spreading codes: one code per user reused on every packet, so one
// trained detector applies to every window. The base station's imperfect code
// knowledge is likewise one corrupted code per user.
std::pair<SpreadingCodes, SpreadingCodes> short_codes_with_mismatch(const CdmaConfig& cfg,
                                                                    int n_packets, double rho,
                                                                    Rng& rng) {
    SpreadingCodes single = random_codes(cfg.k_users, 1, cfg.n_gain, rng);
    SpreadingCodes corrupted_single = corrupt_codes(single, rho, rng);
    SpreadingCodes codes, bs_codes;
    codes.chips.resize(size_t(cfg.k_users));
    bs_codes.chips.resize(size_t(cfg.k_users));
    for (int k = 0; k < cfg.k_users; ++k) {
        codes.chips[size_t(k)].assign(size_t(n_packets), single.chips[size_t(k)][0]);
        bs_codes.chips[size_t(k)].assign(size_t(n_packets), corrupted_single.chips[size_t(k)][0]);
    }
    return {codes, bs_codes};
}

struct CdmaRun {
    CdmaConfig cfg;
    SpreadingCodes codes;     // true user codes
    SpreadingCodes bs_codes;  // base-station knowledge
    std::vector<UserChannel> channels;
    Eigen::MatrixXi bits;
    MatC g_true;
    MatC noiseless;
    MatC unit_noise;  // common random numbers across the SNR sweep
    double p_sig = 0.0;
};

CdmaRun make_run(const CdmaConfig& cfg, int n_packets, double rho, Rng& rng) {
    CdmaRun run;
    run.cfg = cfg;
    run.cfg.n_packets = n_packets;
    auto [codes, bs_codes] = short_codes_with_mismatch(cfg, n_packets, rho, rng);
    run.codes = std::move(codes);
    run.bs_codes = std::move(bs_codes);
    run.channels = random_user_channels(cfg, rng);
    run.bits = random_bits(cfg.k_users, n_packets, rng);
    run.g_true.resize(cfg.g_len(), cfg.k_users);
    for (int k = 0; k < cfg.k_users; ++k)
        run.g_true.col(k) = effective_chip_pulse(run.channels[size_t(k)], run.cfg);
    run.noiseless = synthesize_noiseless_frames(run.cfg, run.codes, run.channels, run.bits, run.g_true);
    run.p_sig = run.noiseless.cwiseAbs2().mean();
    run.unit_noise.resize(run.noiseless.rows(), run.noiseless.cols());
    for (Eigen::Index j = 0; j < run.unit_noise.cols(); ++j)
        for (Eigen::Index i = 0; i < run.unit_noise.rows(); ++i) run.unit_noise(i, j) = rng.cnormal(1.0);
    return run;
}

CdmaScene scene_at(const CdmaRun& run, double snr_db) {
    CdmaScene scene;
    scene.cfg = run.cfg;
    scene.cfg.snr_db = snr_db;
    scene.codes = run.codes;
    scene.channels = run.channels;
    scene.true_bits = run.bits;
    scene.g_true = run.g_true;
    scene.noise_var = run.p_sig * std::pow(10.0, -snr_db / 10.0);
    scene.frames = run.noiseless + std::sqrt(scene.noise_var) * run.unit_noise;
    return scene;
}

// Frames/bits/codes from packet q0 on; valid because the codes repeat per packet.
CdmaScene slice_scene(const CdmaScene& scene, int q0) {
    CdmaScene out = scene;
    const int p_left = scene.cfg.n_packets - q0;
    out.cfg.n_packets = p_left;
    out.frames = scene.frames.rightCols(p_left);
    out.true_bits = scene.true_bits.rightCols(p_left);
    out.codes.chips.clear();
    out.codes.chips.resize(size_t(scene.cfg.k_users));
    for (int k = 0; k < scene.cfg.k_users; ++k)
        out.codes.chips[size_t(k)].assign(scene.codes.chips[size_t(k)].begin() + q0,
                                          scene.codes.chips[size_t(k)].end());
    return out;
}

MatC estimate_g(const CdmaScene& scene, const SpreadingCodes& bs_codes, int n_t) {
    const MatC g_ls = ls_channel_estimate(scene.frames, bs_codes, scene.true_bits, scene.cfg, n_t);
    MatC g_recon(scene.cfg.g_len(), scene.cfg.k_users);
    for (int k = 0; k < scene.cfg.k_users; ++k) {
        const UserChannel uc = extract_multipath(g_ls.col(k), scene.cfg.l_paths, scene.cfg);
        g_recon.col(k) = effective_chip_pulse(uc, scene.cfg);
    }
    return g_recon;
}

FrameDetector mmse_detector(const MatC& g, const SpreadingCodes& codes, double noise_var) {
    return [g, codes, noise_var](const CdmaScene& scene, int p) {
        return mmse_detect(detection_window(scene, p), p, g, noise_var, codes, scene.cfg);
    };
}

int bits_to_class(const std::vector<int>& bits) {
    int c = 0;
    for (size_t k = 0; k < bits.size(); ++k) c = (c << 1) | (bits[k] > 0 ? 1 : 0);
    return c;
}

std::vector<int> class_to_bits(int c, int k_users) {
    std::vector<int> bits(static_cast<size_t>(k_users));
    for (int k = 0; k < k_users; ++k) bits[size_t(k)] = (c >> (k_users - 1 - k)) & 1 ? 1 : -1;
    return bits;
}

struct HyphyKnobs {
    long n_synth;
    int train_steps;
    int batch;
    double lr;
    int hidden;
    int disc_hidden;
    int z_dim;
};

HyphyKnobs hyphy_knobs(const Config& v) {
    return {v.get_long("cdma.hyphy.n_synth"), v.get_int("cdma.hyphy.train_steps"),
            v.get_int("cdma.hyphy.batch"),    v.get_double("cdma.hyphy.lr"),
            v.get_int("cdma.hyphy.hidden"),   v.get_int("cdma.hyphy.disc_hidden"),
            v.get_int("cdma.hyphy.z_dim")};
}

// Train the window classifier on real training windows plus synthetic windows
// generated from the estimated channel and the BS's code knowledge.
FrameDetector train_hyphy_detector(const CdmaScene& scene, const CdmaRun& run, int n_t,
                                   const HyphyKnobs& knobs, std::uint64_t seed,
                                   std::vector<TrainDiagnosticsRow>* diagnostics) {
    const CdmaConfig& cfg = scene.cfg;
    const int k_users = cfg.k_users;
    const int n_classes = 1 << k_users;
    const int mn = cfg.frame_len();

    // real windows from the training prefix, labeled by the known training bits
    LabeledDataset d_r;
    d_r.origin = Origin::real;
    std::vector<int> train_ps;
    for (int p = 2; p + 1 < n_t; ++p) train_ps.push_back(p);
    if (train_ps.size() < 4) throw std::runtime_error("cdma hyphylearn: too few training frames");
    d_r.rows.resize(Eigen::Index(train_ps.size()), 4 * mn);
    d_r.labels.resize(train_ps.size());
    for (size_t i = 0; i < train_ps.size(); ++i) {
        const int p = train_ps[i];
        d_r.rows.row(Eigen::Index(i)) = complex_to_features(detection_window(scene, p)).transpose();
        std::vector<int> b(static_cast<size_t>(k_users));
        for (int k = 0; k < k_users; ++k) b[size_t(k)] = scene.true_bits(k, p);
        d_r.labels[i] = bits_to_class(b);
    }
    d_r.estimate_priors(n_classes);

    // estimated model: per-user window signatures under the BS codes
    const MatC g_est = estimate_g(scene, run.bs_codes, n_t);
    std::vector<std::array<VecC, 4>> sig(static_cast<size_t>(k_users));  // bit q = p-2..p+1
    for (int k = 0; k < k_users; ++k)
        for (int d = 0; d < 4; ++d) {
            const int q = 10 + d - 2, p = 10;  // packet index arbitrary: codes repeat
            VecC s = VecC::Zero(2 * mn);
            for (int fr = 0; fr <= 1; ++fr) {
                const int lag = p + fr - q;
                if (lag < 0 || lag > 2) continue;
                const MatD c = code_matrix(run.bs_codes, k, p + fr, lag, cfg);
                VecC part(mn);
                part.real() = c * g_est.col(k).real();
                part.imag() = c * g_est.col(k).imag();
                s.segment(fr * mn, mn) = part;
            }
            sig[size_t(k)][size_t(d)] = s;
        }

    Rng synth_rng(seed ^ 0xcd3aULL);
    LabeledDataset d_s;
    d_s.origin = Origin::synthetic;
    d_s.rows.resize(knobs.n_synth, 4 * mn);
    d_s.labels.resize(size_t(knobs.n_synth));
    for (long i = 0; i < knobs.n_synth; ++i) {
        VecC w = VecC::Zero(2 * mn);
        std::vector<int> b_now(static_cast<size_t>(k_users));
        for (int k = 0; k < k_users; ++k) {
            for (int d = 0; d < 4; ++d) {
                const int b = synth_rng.uniform() < 0.5 ? -1 : 1;
                if (d == 2) b_now[size_t(k)] = b;  // d == 2 is bit p
                w += double(b) * sig[size_t(k)][size_t(d)];
            }
        }
        for (int s = 0; s < 2 * mn; ++s) w[s] += synth_rng.cnormal(scene.noise_var);
        d_s.rows.row(i) = complex_to_features(w).transpose();
        d_s.labels[size_t(i)] = bits_to_class(b_now);
    }
    d_s.estimate_priors(n_classes);

    nnet::NetworkSpec mapper_spec{
        {4 * mn, knobs.hidden, knobs.hidden, knobs.hidden, knobs.hidden, knobs.z_dim},
        nnet::Hidden::relu, nnet::Output::linear};
    nnet::NetworkSpec classifier_spec{
        {knobs.z_dim, knobs.hidden, knobs.hidden, knobs.hidden, knobs.hidden, n_classes},
        nnet::Hidden::relu, nnet::Output::softmax};
    nnet::NetworkSpec disc_spec{{knobs.z_dim, knobs.disc_hidden, 2}, nnet::Hidden::relu,
                                nnet::Output::softmax};
    TrainingConfig tcfg;
    tcfg.n_train_steps = knobs.train_steps;
    tcfg.batch_size = std::min<int>(knobs.batch, int(d_r.size()));
    tcfg.lr_mapper = tcfg.lr_classifier = tcfg.lr_discriminator = knobs.lr;
    tcfg.seed = seed;
    tcfg.n_synthetic = knobs.n_synth;
    tcfg.z_dim = knobs.z_dim;

    auto adv = adversarial_train(d_r, d_s, mapper_spec, classifier_spec, disc_spec, tcfg);
    if (diagnostics) *diagnostics = adv.diagnostics;
    auto classifier = std::make_shared<TrainedClassifier>(std::move(adv.classifier));
    const int k_users_c = k_users;
    return [classifier, k_users_c](const CdmaScene& s, int p) {
        const VecD row = complex_to_features(detection_window(s, p));
        return class_to_bits(classifier->classify(row), k_users_c);
    };
}

}  // namespace

void run_cdma_ber_vs_snr(const ExperimentConfig& cfg, ResultTable& table) {
    const Config& v = cfg.values;
    const CdmaConfig base = base_cdma_config(v);
    const int n_train = v.get_int("cdma.n_train");
    const double rho = v.get_double("cdma.rho");
    const int test_bits = v.get_int("cdma.test_bits");
    const int p_total = n_train + (test_bits + base.k_users - 1) / base.k_users + 6;
    const double snr_hyphy = v.get_double("cdma.hyphy.snr");
    const double rho_hyphy = v.get_double("cdma.hyphy.rho");
    const HyphyKnobs knobs = hyphy_knobs(v);

    for (const std::uint64_t seed : cfg.seeds) {
        Rng rng(seed);
        const CdmaRun run = make_run(base, p_total, rho, rng);
        for (const double snr : v.get_list("cdma.snr_list")) {
            const CdmaScene scene = scene_at(run, snr);
            const double ber_perfect = evaluate_ber(
                mmse_detector(scene.g_true, scene.codes, scene.noise_var), scene);
            table.add(snr, "mmse-perfect", "BER", ber_perfect, seed);
            const MatC g_est = estimate_g(scene, run.bs_codes, n_train);
            const double ber_mm =
                evaluate_ber(mmse_detector(g_est, run.bs_codes, scene.noise_var), scene);
            table.add(snr, "mmse-mismatched", "BER", ber_mm, seed);
        }

        // learner run at its own mismatch level, evaluated past the training prefix
        Rng rng_h = rng.split(7);
        const CdmaRun run_h = make_run(base, p_total, rho_hyphy, rng_h);
        const CdmaScene scene_h = scene_at(run_h, snr_hyphy);
        const CdmaScene test_h = slice_scene(scene_h, n_train - 2);
        {
            const MatC g_est = estimate_g(scene_h, run_h.bs_codes, n_train);
            const double ber = evaluate_ber(
                mmse_detector(g_est, run_h.bs_codes, scene_h.noise_var), test_h);
            table.add(snr_hyphy, "mmse-at-hyphy-mismatch", "BER", ber, seed);
        }
        std::vector<TrainDiagnosticsRow> diag;
        const FrameDetector hyphy = train_hyphy_detector(scene_h, run_h, n_train, knobs, seed, &diag);
        table.add(snr_hyphy, "hyphylearn", "BER", evaluate_ber(hyphy, test_h), seed);
        write_diagnostics_csv(cfg.out_dir + "/diagnostics_seed" + std::to_string(seed) + ".csv", diag);
    }
}

void run_cdma_ber_vs_data(const ExperimentConfig& cfg, ResultTable& table) {
    const Config& v = cfg.values;
    const CdmaConfig base = base_cdma_config(v);
    const double rho = v.get_double("cdma.data_rho");
    const double snr = v.get_double("cdma.data_snr");
    const int test_bits = v.get_int("cdma.test_bits");
    const HyphyKnobs knobs = hyphy_knobs(v);

    std::vector<double> data_list = v.get_list("cdma.data_list");
    const int n_t_max = int(*std::max_element(data_list.begin(), data_list.end()));
    const int p_total = n_t_max + (test_bits + base.k_users - 1) / base.k_users + 6;

    for (const std::uint64_t seed : cfg.seeds) {
        Rng rng(seed);
        const CdmaRun run = make_run(base, p_total, rho, rng);
        const CdmaScene scene = scene_at(run, snr);
        {
            const double ber_perfect =
                evaluate_ber(mmse_detector(scene.g_true, scene.codes, scene.noise_var), scene);
            for (const double n_t : data_list)
                table.add(n_t, "mmse-perfect", "BER", ber_perfect, seed);
        }
        for (const double n_t_d : data_list) {
            const int n_t = int(n_t_d);
            const CdmaScene test = slice_scene(scene, n_t_max - 2);
            const MatC g_est = estimate_g(scene, run.bs_codes, n_t);
            table.add(n_t_d, "mmse-mismatched", "BER",
                      evaluate_ber(mmse_detector(g_est, run.bs_codes, scene.noise_var), test), seed);
            const FrameDetector hyphy =
                train_hyphy_detector(scene, run, n_t, knobs, seed ^ std::uint64_t(n_t), nullptr);
            table.add(n_t_d, "hyphylearn", "BER", evaluate_ber(hyphy, test), seed);
        }
    }
}

}  // namespace detail
}  // namespace hyphy
