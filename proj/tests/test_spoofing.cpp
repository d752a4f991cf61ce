#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hyphy/estimator_cfr.hpp"
#include "hyphy/spoofing.hpp"

using namespace hyphy;

namespace {

const CfrDims kDims{2, 2, 20};

PartyParams alice_truth(Rng& rng) {
    return {random_specular(4, 14.14, rng), DiffuseNoiseParams{200.0, 0.02, 20, 20.0},
            SimilarityParam{0.85}};
}

PartyParams eve_truth(Rng& rng) {
    return {random_specular(4, 14.14, rng), DiffuseNoiseParams{250.0, 0.08, 16, 26.0},
            SimilarityParam{0.65}};
}

}  // namespace

TEST_CASE("heuristic labeling") {
    Rng rng(1);
    const VecC ref = cnormal_vector(rng, 8);
    CHECK(heuristic_label(ref, ref, 0.5) == 0);
    const VecC other = ref + cnormal_vector(rng, 8);
    CHECK(heuristic_label(other, ref, 0.0) == 1);  // eta = 0: any difference flags
    CHECK(heuristic_label(ref, ref, 0.0) == 1);    // ties decide against the reference
}

TEST_CASE("threshold from the distance quantile") {
    CHECK(choose_threshold({3.0, 3.0, 3.0}, 0.4) == 3.0);
    CHECK(choose_threshold({3.0, 1.0, 2.0}, 0.5) == 2.0);
    CHECK_THROWS(choose_threshold({}, 0.5));

    // calibrated false-alarm rate on held-out same-transmitter pairs
    Rng rng(2);
    const PartyParams alice = alice_truth(rng);
    SnapshotScenario scn;
    scn.samples_per_coherence = 400;
    scn.eve_activity = 0.0;
    scn.n_test_pairs = 2;
    const SimulatedScenario sim = simulate_scenario(scn, alice, eve_truth(rng), kDims, rng);
    double false_alarms = 0.0;
    for (size_t i = 0; i < sim.train.labels.size(); ++i) false_alarms += sim.train.labels[i];
    CHECK(false_alarms / double(sim.train.labels.size()) == doctest::Approx(0.05).epsilon(0.5));
}

TEST_CASE("hypothesis model assembly") {
    Rng rng(3);
    const PartyParams alice = alice_truth(rng);

    // identical transmitters degenerate to the same model
    PartyParams twin = alice;
    const HypothesisModels same = assemble_hypothesis_models(alice, twin, kDims);
    CHECK(same.mean_h1.norm() == 0.0);
    CHECK(same.mean_h0.norm() == 0.0);
    // the likelihood ratio is identically one
    const LrtClassifier lrt(same, 1.0);
    for (int i = 0; i < 5; ++i)
        CHECK(std::abs(lrt.log_ratio(cnormal_vector(rng, kDims.m()))) < 1e-10);

    // with no diffuse power the null covariance is twice the noise floor
    PartyParams quiet = alice;
    quiet.dn.alpha2 = 0.0;
    PartyParams quiet_eve = eve_truth(rng);
    quiet_eve.dn.alpha2 = 0.0;
    const HypothesisModels m = assemble_hypothesis_models(quiet, quiet_eve, kDims);
    const MatC expect = 2.0 * quiet.dn.sigma2 * MatC::Identity(kDims.m(), kDims.m());
    CHECK((m.cov_h0 - expect).norm() < 1e-12);
}

TEST_CASE("likelihood ratio decisions") {
    Rng rng(4);
    // identical models: ties go to the null hypothesis
    const PartyParams alice = alice_truth(rng);
    const HypothesisModels same = assemble_hypothesis_models(alice, alice, kDims);
    CHECK(lrt_classify(cnormal_vector(rng, kDims.m()), same, 1.0) == 0);

    // zero observation, scaled covariance: the log-det penalty decides 0
    HypothesisModels scaled;
    scaled.mean_h0 = VecC::Zero(4);
    scaled.mean_h1 = VecC::Zero(4);
    scaled.cov_h0 = MatC::Identity(4, 4);
    scaled.cov_h1 = 3.0 * MatC::Identity(4, 4);
    CHECK(lrt_classify(VecC::Zero(4), scaled, 1.0) == 0);
}

TEST_CASE("plug-in decision rule reaches the reference accuracy") {
    Rng rng(5);
    const PartyParams alice = alice_truth(rng);
    const PartyParams eve = eve_truth(rng);
    SnapshotScenario scn;
    scn.samples_per_coherence = 50;
    scn.n_test_pairs = 6000;
    const SimulatedScenario sim = simulate_scenario(scn, alice, eve, kDims, rng);
    const LrtClassifier lrt(assemble_hypothesis_models(alice, eve, kDims), 1.0);
    long correct = 0;
    for (Eigen::Index i = 0; i < sim.test.size(); ++i) {
        const VecC d = features_to_complex(sim.test.rows.row(i).transpose());
        if (lrt.classify(d) == sim.test.labels[size_t(i)]) ++correct;
    }
    CHECK(double(correct) / double(sim.test.size()) > 0.985);
}

TEST_CASE("covariance shrinkage") {
    Rng rng(6);
    MatC a(5, 5);
    for (int i = 0; i < 25; ++i) a.data()[i] = rng.cnormal();
    const MatC cov = a * a.adjoint();
    CHECK((shrink_cov(cov, 0.0) - cov).norm() == 0.0);
    const MatC full = shrink_cov(cov, 1.0);
    const double mu = std::real(cov.trace()) / 5.0;
    CHECK((full - mu * MatC::Identity(5, 5)).norm() < 1e-12);
    for (const double alpha : {0.1, 0.5, 0.9})
        CHECK(std::real(shrink_cov(cov, alpha).trace()) ==
              doctest::Approx(std::real(cov.trace())).epsilon(1e-12));
}

TEST_CASE("scenario simulation") {
    Rng rng(7);
    const PartyParams alice = alice_truth(rng);
    const PartyParams eve = eve_truth(rng);

    SnapshotScenario quiet;
    quiet.samples_per_coherence = 100;
    quiet.eve_activity = 0.0;
    quiet.n_test_pairs = 10;
    const SimulatedScenario sim = simulate_scenario(quiet, alice, eve, kDims, rng);
    CHECK(sim.train.size() == 100);
    for (int y : sim.train_true_labels) CHECK(y == 0);

    SnapshotScenario active;
    active.samples_per_coherence = 600;
    active.eve_activity = 0.5;
    active.eve_slot_len = 20;
    active.n_test_pairs = 10;
    const SimulatedScenario sim2 = simulate_scenario(active, alice, eve, kDims, rng);
    double disagree = 0.0;
    for (size_t i = 0; i < sim2.train.labels.size(); ++i)
        if (sim2.train.labels[i] != sim2.train_true_labels[i]) disagree += 1.0;
    disagree /= double(sim2.train.labels.size());
    CHECK(disagree > 0.0);
    CHECK(disagree < 0.5);

    // CSV serialization header and row count
    const std::string path = "/tmp/hyphy_test_scenario.csv";
    write_scenario_csv(path, sim);
    std::ifstream is(path);
    std::string header;
    std::getline(is, header);
    CHECK(header.rfind("label_true,label_heuristic,snapshot_index,f_0", 0) == 0);
    int lines = 0;
    std::string line;
    while (std::getline(is, line)) ++lines;
    CHECK(lines == 100);
    std::filesystem::remove(path);
}

TEST_CASE("estimated plug-in rule beats the labeling heuristic end to end") {
    Rng rng(8);
    const PartyParams alice = alice_truth(rng);
    const PartyParams eve = eve_truth(rng);
    SnapshotScenario scn;
    scn.samples_per_coherence = 400;
    scn.eve_slot_len = 20;
    scn.n_test_pairs = 3000;
    const SimulatedScenario sim = simulate_scenario(scn, alice, eve, kDims, rng);

    // estimation from the heuristic labels only
    std::vector<CfrSample> alice_stream;
    std::vector<CfrSample> eve_probes;
    std::vector<VecC> eve_diffs;
    for (Eigen::Index i = 0; i < sim.train.size(); ++i) {
        if (alice_stream.size() < 300) {
            alice_stream.push_back({sim.train_ref_cfrs.col(i), 0, int(2 * i)});
            if (sim.train.labels[size_t(i)] == 0)
                alice_stream.push_back({sim.train_probe_cfrs.col(i), 0, int(2 * i + 1)});
        }
        if (sim.train.labels[size_t(i)] == 1 && eve_probes.size() < 150) {
            eve_probes.push_back({sim.train_probe_cfrs.col(i), 1, int(2 * i + 1)});
            eve_diffs.push_back(sim.train_probe_cfrs.col(i) - sim.train_ref_cfrs.col(i));
        }
    }
    AlternatingOptions opts;
    opts.k_paths = 4;
    Rng rng_a(81), rng_e(82);
    const EstimationReport rep_a = alternating_estimate(alice_stream, kDims, opts, 2, rng_a);
    const EstimationReport rep_e = alternating_estimate(eve_probes, kDims, opts, 2, rng_e);
    MatC diffs(kDims.m(), Eigen::Index(eve_diffs.size()));
    for (size_t i = 0; i < eve_diffs.size(); ++i) diffs.col(Eigen::Index(i)) = eve_diffs[i];
    const VecC diff_mean = diffs.rowwise().mean();
    diffs.colwise() -= diff_mean;
    const SimilarityParam a_e = estimate_similarity(diffs, kDims, rep_a.theta_vn_hat, 0.5,
                                                    DiffHypothesis::H1, rep_e.theta_vn_hat,
                                                    opts.gn);
    const PartyParams est_alice{rep_a.theta_sp_hat, rep_a.theta_vn_hat, rep_a.a_hat};
    const PartyParams est_eve{rep_e.theta_sp_hat, rep_e.theta_vn_hat, a_e};
    const LrtClassifier lrt(assemble_hypothesis_models(est_alice, est_eve, kDims), 1.0);

    long lrt_correct = 0, heur_correct = 0;
    for (Eigen::Index i = 0; i < sim.test.size(); ++i) {
        const VecC d = features_to_complex(sim.test.rows.row(i).transpose());
        const int truth = sim.test.labels[size_t(i)];
        if (lrt.classify(d) == truth) ++lrt_correct;
        if ((d.squaredNorm() < sim.eta ? 0 : 1) == truth) ++heur_correct;
    }
    const double lrt_acc = double(lrt_correct) / double(sim.test.size());
    const double heur_acc = double(heur_correct) / double(sim.test.size());
    INFO("lrt ", lrt_acc, " heuristic ", heur_acc);
    CHECK(lrt_acc > heur_acc);
}
