#pragma once

#include <functional>
#include <optional>

#include "hyphy/dataset.hpp"
#include "hyphy/estimator_cfr.hpp"
#include "hyphy/nnet.hpp"

namespace hyphy {

struct TrainingConfig {
    int n_train_steps = 20000;
    int batch_size = 128;
    double lr_mapper = 1e-4;       // mu_r1
    double lr_classifier = 1e-4;   // mu_r2
    double lr_discriminator = 1e-4; // mu_r3
    std::uint64_t seed = 0;
    long n_synthetic = 400000;
    int z_dim = 64;
    int diag_every = 25;  // diagnostics row cadence

    void validate() const {
        if (n_train_steps < 0 || batch_size < 1 || n_synthetic < 0 || z_dim < 1)
            throw std::invalid_argument("TrainingConfig: invalid settings");
    }
};

/// Mapper + classifier pair; argmax of the classifier over the mapped input.
/// Inputs pass through a fixed affine standardization learned from the
/// synthetic dataset before the mapper.
struct TrainedClassifier {
    nnet::NetworkSpec mapper_spec, classifier_spec;
    nnet::NetworkParams mapper, classifier;
    VecD feat_shift, feat_scale;  // empty = identity

    MatD standardize_cols(const MatD& x_cols) const;
    MatD map_batch(const MatD& x_cols) const {
        return nnet::forward_batch(mapper_spec, mapper, standardize_cols(x_cols));
    }
    int classify(const VecD& x) const;
    std::vector<int> classify_rows(const MatD& rows) const;
};

/// Column-mean shift and inverse-std scale of a dataset's features.
void feature_standardizer(const MatD& rows, VecD& shift, VecD& scale);

struct TrainDiagnosticsRow {
    int step;
    double loss_class;   // L_s on the synthetic batch
    double loss_domain;  // L_c on the mixed batch
    double d_hat_proxy;  // 2 (1 - 2 L_c)
};

struct AdversarialResult {
    TrainedClassifier classifier;
    nnet::NetworkSpec discriminator_spec;
    nnet::NetworkParams discriminator;
    std::vector<TrainDiagnosticsRow> diagnostics;
};

/// Majority-anchored clustering labeler (EM mixture); every row gets a label.
struct ClusterLabeling {
    std::vector<int> labels;
    double anchor_error = 0.0;  // fraction of anchors assigned a different label
};
ClusterLabeling cluster_label(const MatD& rows, const MatD& anchor_rows,
                              const std::vector<int>& anchor_labels, int c_classes, Rng& rng);

/// Per-class generative draw; returns one feature row.
using ClassSampler = std::function<VecD(Rng&)>;

LabeledDataset generate_synthetic(const std::vector<ClassSampler>& samplers, const VecD& priors,
                                  long n_s, Rng& rng);

/// Saddle-point training of (mapper, classifier, domain discriminator):
/// psi <- psi - mu1 (G_s,psi - G_c,psi); phi1 <- phi1 - mu2 G_s,phi1; zeta <- zeta - mu3 G_c,zeta.
AdversarialResult adversarial_train(const LabeledDataset& d_r, const LabeledDataset& d_s,
                                    const nnet::NetworkSpec& mapper_spec,
                                    const nnet::NetworkSpec& classifier_spec,
                                    const nnet::NetworkSpec& discriminator_spec,
                                    const TrainingConfig& cfg);

struct ADistanceProxy {
    double cross_entropy_form = 0.0;  // 2 (1 - 2 L_c) on the full mapped sets
    double accuracy_form = 0.0;       // 2 (1 - err_r - err_s)
};

/// Discrepancy proxy of two mapped sample sets under a fixed discriminator.
/// Rows of z_r / z_s live in the discriminator's input space.
ADistanceProxy empirical_a_distance_proxy(const MatD& z_r, const MatD& z_s,
                                          const nnet::NetworkSpec& discriminator_spec,
                                          const nnet::NetworkParams& discriminator);

/// Train a fresh domain discriminator on fixed feature rows (real -> 0, synthetic -> 1);
/// the surrogate for the best-in-family term of the empirical distance.
nnet::NetworkParams train_domain_discriminator(const MatD& rows_r, const MatD& rows_s,
                                               const nnet::NetworkSpec& spec, int steps, int batch,
                                               double lr, std::uint64_t seed);

/// Total-variation upper bound for equal-covariance Gaussians:
/// (9/2) min(1, v^T v / sqrt(v^T Sigma v)), v = mu - mu_hat.
double tv_bound_equal_cov(const VecD& mu, const VecD& mu_hat, const MatD& sigma);

/// Two-phase baseline: train on synthetic data, then continue on the real rows.
TrainedClassifier fine_tune_baseline(const LabeledDataset& d_s, const LabeledDataset& d_r,
                                     const nnet::NetworkSpec& mapper_spec,
                                     const nnet::NetworkSpec& classifier_spec,
                                     const TrainingConfig& cfg, int refine_steps);

/// Gaussian-mixture classifier: EM fit, components mapped to classes by anchor majority.
class GmmClassifier {
  public:
    GmmClassifier(int n_components, const MatD& rows, const MatD& anchor_rows,
                  const std::vector<int>& anchor_labels, Rng& rng);

    int classify(const VecD& x) const;
    std::vector<int> classify_rows(const MatD& rows) const;
    const std::vector<double>& log_likelihood_trace() const { return ll_trace_; }

  private:
    struct Component {
        VecD mean;
        MatD cov_inv;
        double log_norm = 0.0;
        double log_weight = 0.0;
    };
    std::vector<Component> components_;
    std::vector<int> component_class_;
    std::vector<double> ll_trace_;
};

using Labeler = std::function<std::vector<int>(const MatD& rows)>;
using SamplerBuilder = std::function<std::vector<ClassSampler>(
    const MatD& rows, const std::vector<int>& labels, std::optional<EstimationReport>& report)>;

struct HyPhyLearnResult {
    TrainedClassifier classifier;
    nnet::NetworkSpec discriminator_spec;
    nnet::NetworkParams discriminator;
    std::optional<EstimationReport> estimation;
    VecD priors;
    std::vector<TrainDiagnosticsRow> diagnostics;
};

/// End-to-end pipeline: imperfect labeling, pluggable estimation, synthetic
/// generation by estimated priors, then adversarial training.
HyPhyLearnResult run_hyphylearn(const MatD& d_r_rows, const Labeler& labeler,
                                const SamplerBuilder& build_samplers, int c_classes,
                                const nnet::NetworkSpec& mapper_spec,
                                const nnet::NetworkSpec& classifier_spec,
                                const nnet::NetworkSpec& discriminator_spec,
                                const TrainingConfig& cfg);

void write_diagnostics_csv(const std::string& path, const std::vector<TrainDiagnosticsRow>& rows);

}  // namespace hyphy
