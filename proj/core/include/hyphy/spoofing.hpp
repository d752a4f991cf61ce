#pragma once

#include "hyphy/channel_cfr.hpp"
#include "hyphy/dataset.hpp"

namespace hyphy {

/// Everything that parameterizes one transmitter-receiver channel.
struct PartyParams {
    SpecularParams sp;
    DiffuseNoiseParams dn;
    SimilarityParam a;
};

/// Plug-in Gaussian models of the consecutive-difference vector under both hypotheses.
struct HypothesisModels {
    VecC mean_h0;  // exactly zero
    MatC cov_h0;
    VecC mean_h1;  // intruder mean minus reference mean
    MatC cov_h1;
};

struct SnapshotScenario {
    int n_coherence_alice = 1;
    double coherence_ratio = 4.0;  // reference coherence time over intruder coherence time
    int samples_per_coherence = 100;
    double eve_activity = 0.5;        // per intruder-coherence-slot transmission probability
    int eve_slot_len = 0;             // snapshots per intruder slot; 0 = samples/ratio
    double label_quantile = 0.95;     // calibration quantile of the distance threshold
    int n_calibration_pairs = 200;    // trusted same-transmitter pairs used to pick eta
    int n_test_pairs = 20000;         // balanced test pairs
    bool redraw_specular_per_coherence = false;

    void validate() const {
        if (n_coherence_alice < 1 || samples_per_coherence < 1 || !(coherence_ratio >= 1.0))
            throw std::invalid_argument("SnapshotScenario: positive counts and ratio >= 1 required");
        if (!(eve_activity >= 0.0 && eve_activity <= 1.0))
            throw std::invalid_argument("SnapshotScenario: eve_activity must be a probability");
    }
};

/// Distance test against the reference; 0 iff squared distance < eta, ties -> 1.
int heuristic_label(const VecC& h, const VecC& h_ref, double eta);

/// Empirical quantile (index ceil(q*n), 1-based) of same-transmitter distances.
double choose_threshold(std::vector<double> distances, double quantile);

HypothesisModels assemble_hypothesis_models(const PartyParams& alice, const PartyParams& eve,
                                            const CfrDims& dims);

/// Prefactored likelihood-ratio classifier for repeated evaluation.
class LrtClassifier {
  public:
    LrtClassifier(const HypothesisModels& models, double threshold);

    /// log p(h|H1) - log p(h|H0)
    double log_ratio(const VecC& h_diff) const;
    /// 1 iff log_ratio > log(threshold); ties -> 0.
    int classify(const VecC& h_diff) const;

  private:
    VecC mean_h1_;
    CovFactor f0_, f1_;
    double log_threshold_;
};

int lrt_classify(const VecC& h_diff, const HypothesisModels& models, double threshold);

/// (1-alpha) cov + alpha (trace/m) I.
MatC shrink_cov(const MatC& cov_hat, double alpha);

/// Gaussian sampler for one hypothesis, emitting [Re; Im]-flattened features.
class ModelSampler {
  public:
    ModelSampler(const VecC& mean, const MatC& cov);
    VecC draw(Rng& rng) const;
    VecD draw_features(Rng& rng) const { return complex_to_features(draw(rng)); }

  private:
    VecC mean_;
    MatC chol_;
};

/// Simulated acquisition: labeled difference features plus the raw CFR pairs
/// needed by the estimation pipeline.
struct SimulatedScenario {
    LabeledDataset train;                 // labels = heuristic labels
    std::vector<int> train_true_labels;
    std::vector<int> train_snapshot_index;
    std::vector<int> train_coherence_index;
    MatC train_ref_cfrs;                  // m x n
    MatC train_probe_cfrs;                // m x n
    LabeledDataset test;                  // labels = ground truth, balanced
    double eta = 0.0;                     // calibrated labeling threshold
    PartyParams truth_alice, truth_eve;
};

SimulatedScenario simulate_scenario(const SnapshotScenario& scn, const PartyParams& alice,
                                    const PartyParams& eve, const CfrDims& dims, Rng& rng);

/// Dataset rows as `label_true,label_heuristic,snapshot_index,f_0,...` (full double precision).
void write_scenario_csv(const std::string& path, const SimulatedScenario& scenario);

}  // namespace hyphy
