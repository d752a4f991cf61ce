#include <algorithm>
#include <filesystem>
#include <fstream>

#include "experiments_impl.hpp"

namespace hyphy {
namespace detail {

PartyParams alice_params_from(const Config& v, int k_paths, Rng& rng) {
    PartyParams p;
    p.dn = {v.get_double("spoofing.alice.alpha2"), v.get_double("spoofing.alice.beta"),
            v.get_int("spoofing.alice.l_taps"), v.get_double("spoofing.alice.sigma2")};
    p.a = SimilarityParam{v.get_double("spoofing.alice.a")};
    p.sp = random_specular(k_paths, v.get_double("spoofing.specular_gain"), rng);
    return p;
}

PartyParams eve_params_from(const Config& v, int k_paths, Rng& rng) {
    PartyParams p;
    p.dn = {v.get_double("spoofing.eve.alpha2"), v.get_double("spoofing.eve.beta"),
            v.get_int("spoofing.eve.l_taps"), v.get_double("spoofing.eve.sigma2")};
    p.a = SimilarityParam{v.get_double("spoofing.eve.a")};
    p.sp = random_specular(k_paths, v.get_double("spoofing.specular_gain"), rng);
    return p;
}

namespace {

struct EstimatedModels {
    PartyParams alice, eve;
    HypothesisModels models;
};

// Heuristic-label-driven estimation of both channels from the acquired stream.
EstimatedModels estimate_from_scenario(const SimulatedScenario& sim, const CfrDims& dims,
                                       int k_paths, int est_max_cfrs, int est_rounds, Rng& rng) {
    std::vector<CfrSample> alice_stream;
    std::vector<CfrSample> eve_probes;
    std::vector<VecC> eve_diffs;
    const int n = int(sim.train.size());
    for (int i = 0; i < n; ++i) {
        const int label = sim.train.labels[size_t(i)];
        if (int(alice_stream.size()) < 2 * est_max_cfrs) {
            alice_stream.push_back({sim.train_ref_cfrs.col(i), 0, 2 * i});
            if (label == 0) alice_stream.push_back({sim.train_probe_cfrs.col(i), 0, 2 * i + 1});
        }
        if (label == 1 && int(eve_probes.size()) < est_max_cfrs) {
            eve_probes.push_back({sim.train_probe_cfrs.col(i), 1, 2 * i + 1});
            eve_diffs.push_back(sim.train_probe_cfrs.col(i) - sim.train_ref_cfrs.col(i));
        }
    }
    if (eve_probes.size() < 5)
        throw std::runtime_error("spoofing estimation: too few intruder-labeled snapshots");

    AlternatingOptions opts;
    opts.k_paths = k_paths;
    EstimatedModels est;
    Rng rng_a = rng.split(1), rng_e = rng.split(2);
    const EstimationReport rep_a = alternating_estimate(alice_stream, dims, opts, est_rounds, rng_a);
    const EstimationReport rep_e = alternating_estimate(eve_probes, dims, opts, est_rounds, rng_e);
    est.alice = {rep_a.theta_sp_hat, rep_a.theta_vn_hat, rep_a.a_hat};
    est.eve = {rep_e.theta_sp_hat, rep_e.theta_vn_hat, SimilarityParam{0.5}};

    MatC diff_mat(dims.m(), Eigen::Index(eve_diffs.size()));
    for (size_t i = 0; i < eve_diffs.size(); ++i) diff_mat.col(Eigen::Index(i)) = eve_diffs[i];
    const VecC diff_mean = diff_mat.rowwise().mean();
    diff_mat.colwise() -= diff_mean;
    est.eve.a = estimate_similarity(diff_mat, dims, est.alice.dn, 0.5, DiffHypothesis::H1,
                                    est.eve.dn, opts.gn);
    est.models = assemble_hypothesis_models(est.alice, est.eve, dims);
    return est;
}

struct MethodKnobs {
    long n_synth;
    int train_steps;
    int finetune_steps;
    int batch;
    double lr;
    int hidden;
    int disc_hidden;
    int z_dim;
    std::vector<double> shrink_grid;
    bool with_shrinkage;
};

void run_methods(const ExperimentConfig& cfg, const SimulatedScenario& sim, const CfrDims& dims,
                 const MethodKnobs& knobs, int k_paths, int est_max_cfrs, int est_rounds,
                 double sweep, std::uint64_t seed, ResultTable& table, bool write_csvs) {
    const auto acc_rows = [&](const std::function<int(const VecD&)>& f) {
        return evaluate_accuracy(f, sim.test);
    };
    const auto acc_complex = [&](const LrtClassifier& lrt) {
        return acc_rows([&](const VecD& row) { return lrt.classify(features_to_complex(row)); });
    };

    // reference decision rule at the true parameters (balanced test priors)
    const HypothesisModels models_true = assemble_hypothesis_models(sim.truth_alice, sim.truth_eve, dims);
    table.add(sweep, "bayes", "accuracy", acc_complex(LrtClassifier(models_true, 1.0)), seed);

    // plug-in pipeline from the heuristic labels
    Rng est_rng(seed ^ 0xe57ULL);
    const EstimatedModels est =
        estimate_from_scenario(sim, dims, k_paths, est_max_cfrs, est_rounds, est_rng);
    const double pi0 = std::max(sim.train.prior_estimates[0], 1e-6);
    const double pi1 = std::max(sim.train.prior_estimates[1], 1e-6);
    const double lrt_threshold = pi0 / pi1;
    table.add(sweep, "lrt-plugin", "accuracy", acc_complex(LrtClassifier(est.models, lrt_threshold)),
              seed);

    if (knobs.with_shrinkage) {
        // pick the shrinkage level on the (heuristically labeled) training rows
        double best_alpha = 0.0, best_train_acc = -1.0;
        for (const double alpha : knobs.shrink_grid) {
            HypothesisModels m = est.models;
            m.cov_h0 = shrink_cov(m.cov_h0, alpha);
            m.cov_h1 = shrink_cov(m.cov_h1, alpha);
            const LrtClassifier lrt(m, lrt_threshold);
            const double train_acc = evaluate_accuracy(
                [&](const VecD& row) { return lrt.classify(features_to_complex(row)); }, sim.train);
            if (train_acc > best_train_acc) {
                best_train_acc = train_acc;
                best_alpha = alpha;
            }
        }
        HypothesisModels m = est.models;
        m.cov_h0 = shrink_cov(m.cov_h0, best_alpha);
        m.cov_h1 = shrink_cov(m.cov_h1, best_alpha);
        table.add(sweep, "lrt-shrinkage", "accuracy", acc_complex(LrtClassifier(m, lrt_threshold)),
                  seed);
    }

    // mixture baseline anchored on the heuristic labels
    {
        Rng gmm_rng(seed ^ 0x93a1ULL);
        const GmmClassifier gmm(2, sim.train.rows, sim.train.rows, sim.train.labels, gmm_rng);
        table.add(sweep, "gmm", "accuracy",
                  acc_rows([&](const VecD& x) { return gmm.classify(x); }), seed);
    }

    // synthetic data from the plug-in models
    const ModelSampler sampler_h0(est.models.mean_h0, est.models.cov_h0);
    const ModelSampler sampler_h1(est.models.mean_h1, est.models.cov_h1);
    std::vector<ClassSampler> samplers{
        [&](Rng& r) { return sampler_h0.draw_features(r); },
        [&](Rng& r) { return sampler_h1.draw_features(r); }};
    Rng synth_rng(seed ^ 0x51aeULL);
    const LabeledDataset d_s =
        generate_synthetic(samplers, sim.train.prior_estimates, knobs.n_synth, synth_rng);

    const int d_in = int(sim.train.dim());
    nnet::NetworkSpec mapper_spec{{d_in, knobs.hidden, knobs.hidden, knobs.hidden, knobs.z_dim},
                                  nnet::Hidden::relu, nnet::Output::linear};
    nnet::NetworkSpec classifier_spec{{knobs.z_dim, knobs.hidden, knobs.hidden, knobs.hidden, 2},
                                      nnet::Hidden::relu, nnet::Output::softmax};
    nnet::NetworkSpec disc_spec{{knobs.z_dim, knobs.disc_hidden, 2}, nnet::Hidden::relu,
                                nnet::Output::softmax};
    TrainingConfig tcfg;
    tcfg.n_train_steps = knobs.train_steps;
    tcfg.batch_size = std::min<int>(knobs.batch, int(sim.train.size()));
    tcfg.lr_mapper = tcfg.lr_classifier = tcfg.lr_discriminator = knobs.lr;
    tcfg.seed = seed;
    tcfg.n_synthetic = knobs.n_synth;
    tcfg.z_dim = knobs.z_dim;

    const auto finetuned =
        fine_tune_baseline(d_s, sim.train, mapper_spec, classifier_spec, tcfg, knobs.finetune_steps);
    table.add(sweep, "finetune", "accuracy",
              acc_rows([&](const VecD& x) { return finetuned.classify(x); }), seed);

    const auto adv = adversarial_train(sim.train, d_s, mapper_spec, classifier_spec, disc_spec, tcfg);
    table.add(sweep, "hyphylearn", "accuracy",
              acc_rows([&](const VecD& x) { return adv.classifier.classify(x); }), seed);

    if (write_csvs) {
        const std::string tag = "_n" + std::to_string(int(sweep)) + "_seed" + std::to_string(seed);
        write_scenario_csv(cfg.out_dir + "/dataset" + tag + ".csv", sim);
        write_diagnostics_csv(cfg.out_dir + "/diagnostics" + tag + ".csv", adv.diagnostics);
    }
}

}  // namespace

void run_spoofing_accuracy(const ExperimentConfig& cfg, ResultTable& table) {
    const Config& v = cfg.values;
    CfrDims dims{v.get_int("spoofing.n_tx"), v.get_int("spoofing.n_rx"), v.get_int("spoofing.n_f")};
    const int k_paths = v.get_int("spoofing.k_paths");
    const int n_train = v.get_int("spoofing.n_train");

    MethodKnobs knobs{v.get_long("spoofing.n_synth"),
                      v.get_int("spoofing.train_steps"),
                      v.get_int("spoofing.finetune_steps"),
                      v.get_int("spoofing.batch"),
                      v.get_double("spoofing.lr"),
                      v.get_int("spoofing.hidden"),
                      v.get_int("spoofing.disc_hidden"),
                      v.get_int("spoofing.z_dim"),
                      v.get_list("spoofing.shrink_grid"),
                      true};

    bool first = true;
    for (const std::uint64_t seed : cfg.seeds) {
        Rng rng(seed);
        const PartyParams alice = alice_params_from(v, k_paths, rng);
        const PartyParams eve = eve_params_from(v, k_paths, rng);
        SnapshotScenario scn;
        scn.n_coherence_alice = 1;
        scn.samples_per_coherence = n_train;
        scn.eve_activity = v.get_double("spoofing.eve_activity");
        scn.eve_slot_len = v.get_int("spoofing.eve_slot");
        scn.label_quantile = v.get_double("spoofing.label_quantile");
        scn.n_test_pairs = v.get_int("spoofing.n_test");
        const SimulatedScenario sim = simulate_scenario(scn, alice, eve, dims, rng);
        run_methods(cfg, sim, dims, knobs, k_paths, v.get_int("spoofing.est_max_cfrs"),
                    v.get_int("spoofing.est_rounds"), double(n_train), seed, table, first);
        first = false;
    }
}

void run_spoofing_coherence(const ExperimentConfig& cfg, ResultTable& table) {
    const Config& v = cfg.values;
    CfrDims dims{v.get_int("spoofing.n_tx"), v.get_int("spoofing.n_rx"), v.get_int("spoofing.n_f")};
    const int k_paths = v.get_int("spoofing.k_paths");

    MethodKnobs knobs{v.get_long("coherence.n_synth"),
                      v.get_int("coherence.train_steps"),
                      v.get_int("spoofing.finetune_steps"),
                      v.get_int("spoofing.batch"),
                      v.get_double("spoofing.lr"),
                      v.get_int("spoofing.hidden"),
                      v.get_int("spoofing.disc_hidden"),
                      v.get_int("spoofing.z_dim"),
                      v.get_list("spoofing.shrink_grid"),
                      false};

    for (const std::uint64_t seed : cfg.seeds) {
        for (const double n_c : v.get_list("coherence.n_list")) {
            Rng rng(seed ^ (std::uint64_t(n_c) << 32));
            const PartyParams alice = alice_params_from(v, k_paths, rng);
            const PartyParams eve = eve_params_from(v, k_paths, rng);
            SnapshotScenario scn;
            scn.n_coherence_alice = int(n_c);
            scn.coherence_ratio = v.get_double("coherence.ratio");
            scn.samples_per_coherence = v.get_int("coherence.samples");
            scn.eve_activity = v.get_double("spoofing.eve_activity");
            scn.label_quantile = v.get_double("spoofing.label_quantile");
            scn.n_test_pairs = v.get_int("coherence.n_test");
            const SimulatedScenario sim = simulate_scenario(scn, alice, eve, dims, rng);
            run_methods(cfg, sim, dims, knobs, k_paths, v.get_int("spoofing.est_max_cfrs"),
                        v.get_int("spoofing.est_rounds"), n_c, seed, table, false);
        }
    }
}

}  // namespace detail
}  // namespace hyphy
