#include "hyphy/spoofing.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>

namespace hyphy {

int heuristic_label(const VecC& h, const VecC& h_ref, double eta) {
    if (h.size() != h_ref.size()) throw std::invalid_argument("heuristic_label: length mismatch");
    return (h - h_ref).squaredNorm() < eta ? 0 : 1;
}

double choose_threshold(std::vector<double> distances, double quantile) {
    if (distances.empty()) throw std::invalid_argument("choose_threshold: empty sample");
    if (!(quantile > 0.0 && quantile < 1.0))
        throw std::invalid_argument("choose_threshold: quantile must be in (0,1)");
    std::sort(distances.begin(), distances.end());
    const auto n = distances.size();
    size_t idx = static_cast<size_t>(std::ceil(quantile * double(n)));
    idx = std::clamp<size_t>(idx, 1, n);
    return distances[idx - 1];
}

HypothesisModels assemble_hypothesis_models(const PartyParams& alice, const PartyParams& eve,
                                            const CfrDims& dims) {
    dims.validate();
    HypothesisModels models;
    models.mean_h0 = VecC::Zero(dims.m());
    models.mean_h1 = specular_mean(eve.sp, dims) - specular_mean(alice.sp, dims);
    models.cov_h0 = kron_expand(diff_cov_h0(alice.dn, alice.a, dims.n_f), dims);
    models.cov_h0.diagonal().array() += 2.0 * alice.dn.sigma2;
    models.cov_h1 = kron_expand(diff_cov_h1(alice.dn, eve.dn, eve.a, dims.n_f), dims);
    models.cov_h1.diagonal().array() += alice.dn.sigma2 + eve.dn.sigma2;
    return models;
}

LrtClassifier::LrtClassifier(const HypothesisModels& models, double threshold)
    : mean_h1_(models.mean_h1),
      f0_(models.cov_h0),
      f1_(models.cov_h1),
      log_threshold_(std::log(threshold)) {}

double LrtClassifier::log_ratio(const VecC& h_diff) const {
    const double ll0 = -f0_.log_det() - f0_.quad_form(h_diff);
    const double ll1 = -f1_.log_det() - f1_.quad_form(h_diff - mean_h1_);
    return ll1 - ll0;  // the -m ln pi constants cancel
}

int LrtClassifier::classify(const VecC& h_diff) const {
    return log_ratio(h_diff) > log_threshold_ ? 1 : 0;
}

int lrt_classify(const VecC& h_diff, const HypothesisModels& models, double threshold) {
    return LrtClassifier(models, threshold).classify(h_diff);
}

MatC shrink_cov(const MatC& cov_hat, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("shrink_cov: alpha must be in [0,1]");
    const double mu = std::real(cov_hat.trace()) / double(cov_hat.rows());
    MatC out = (1.0 - alpha) * cov_hat;
    out.diagonal().array() += alpha * mu;
    return out;
}

ModelSampler::ModelSampler(const VecC& mean, const MatC& cov) : mean_(mean) {
    chol_ = CovFactor(cov).matrix_l();
}

VecC ModelSampler::draw(Rng& rng) const {
    return mean_ + chol_ * cnormal_vector(rng, mean_.size());
}

namespace {

struct PairDraw {
    VecC ref;
    VecC probe;
    int true_label;
};

// One transmitter's channel through a snapshot sequence.
class AliceChannel {
  public:
    AliceChannel(const PartyParams& p, const CfrDims& dims, Rng& rng) : p_(p), dims_(dims) {
        reset_coherence(rng);
    }

    void reset_coherence(Rng& rng) {
        states_.clear();
        for (int b = 0; b < dims_.n_blocks(); ++b) states_.push_back(init_diffuse_taps(p_.dn, rng));
    }
    void redraw_specular(Rng& rng, double gain_scale) {
        const int k = p_.sp.num_paths();
        for (int i = 0; i < k; ++i) {
            p_.sp.psi_t[i] = rng.uniform(-kPi, kPi);
            p_.sp.psi_r[i] = rng.uniform(-kPi, kPi);
            p_.sp.tau[i] = rng.uniform(-kPi, kPi);
            p_.sp.rho[i] = rng.cnormal(gain_scale * gain_scale);
        }
    }
    void advance(Rng& rng) {
        for (auto& st : states_) evolve_diffuse_taps(st, p_.dn, p_.a, rng);
    }
    VecC cfr(Rng& rng) const { return assemble_cfr(specular_mean(p_.sp, dims_), states_, p_.dn, dims_, rng); }
    const std::vector<DiffuseTapState>& states() const { return states_; }
    const PartyParams& params() const { return p_; }

  private:
    PartyParams p_;
    CfrDims dims_;
    std::vector<DiffuseTapState> states_;
};

VecC eve_cfr_from(const AliceChannel& alice, const PartyParams& eve, const CfrDims& dims, Rng& rng) {
    std::vector<DiffuseTapState> eve_states;
    for (const auto& st : alice.states())
        eve_states.push_back(eve_taps_from_reference(st, alice.params().dn, eve.dn, eve.a, rng));
    return assemble_cfr(specular_mean(eve.sp, dims), eve_states, eve.dn, dims, rng);
}

}  // namespace

SimulatedScenario simulate_scenario(const SnapshotScenario& scn, const PartyParams& alice,
                                    const PartyParams& eve, const CfrDims& dims, Rng& rng) {
    scn.validate();
    dims.validate();
    const int m = dims.m();
    SimulatedScenario out;
    out.truth_alice = alice;
    out.truth_eve = eve;

    // Threshold calibration on trusted same-transmitter pairs.
    {
        AliceChannel cal(alice, dims, rng);
        std::vector<double> dists;
        for (int i = 0; i < scn.n_calibration_pairs; ++i) {
            const VecC ref = cal.cfr(rng);
            cal.advance(rng);
            dists.push_back((cal.cfr(rng) - ref).squaredNorm());
        }
        out.eta = choose_threshold(std::move(dists), scn.label_quantile);
    }

    // Training stream.
    const int n_train = scn.n_coherence_alice * scn.samples_per_coherence;
    out.train.rows.resize(n_train, 2 * m);
    out.train.labels.resize(n_train);
    out.train_true_labels.resize(n_train);
    out.train_snapshot_index.resize(n_train);
    out.train_coherence_index.resize(n_train);
    out.train_ref_cfrs.resize(m, n_train);
    out.train_probe_cfrs.resize(m, n_train);
    out.train.origin = Origin::real;

    AliceChannel ch(alice, dims, rng);
    const int eve_slots = std::max(1, int(std::lround(scn.coherence_ratio)));
    const int slot_len = scn.eve_slot_len > 0
                             ? scn.eve_slot_len
                             : std::max(1, scn.samples_per_coherence / eve_slots);
    int row = 0;
    for (int c = 0; c < scn.n_coherence_alice; ++c) {
        if (c > 0) {
            ch.reset_coherence(rng);
            if (scn.redraw_specular_per_coherence) {
                const double gain_scale = std::sqrt(alice.sp.rho.squaredNorm() / alice.sp.num_paths());
                ch.redraw_specular(rng, gain_scale);
            }
        }
        bool eve_active = rng.uniform() < scn.eve_activity;
        for (int s = 0; s < scn.samples_per_coherence; ++s) {
            if (s % slot_len == 0) eve_active = rng.uniform() < scn.eve_activity;
            const VecC ref = ch.cfr(rng);
            VecC probe;
            int true_label;
            if (eve_active) {
                // the intruder snapshot couples to the reference-time tap state
                probe = eve_cfr_from(ch, eve, dims, rng);
                true_label = 1;
                ch.advance(rng);
            } else {
                ch.advance(rng);
                probe = ch.cfr(rng);
                true_label = 0;
            }
            ch.advance(rng);  // snapshots are non-overlapping consecutive pairs

            const VecC diff = probe - ref;
            out.train.rows.row(row) = complex_to_features(diff).transpose();
            out.train.labels[row] = heuristic_label(probe, ref, out.eta);
            out.train_true_labels[row] = true_label;
            out.train_snapshot_index[row] = row;
            out.train_coherence_index[row] = c;
            out.train_ref_cfrs.col(row) = ref;
            out.train_probe_cfrs.col(row) = probe;
            ++row;
        }
    }
    out.train.estimate_priors(2);

    // Balanced test pairs, independent across rows.
    const int n_test = scn.n_test_pairs;
    out.test.rows.resize(n_test, 2 * m);
    out.test.labels.resize(n_test);
    out.test.origin = Origin::real;
    AliceChannel test_ch(alice, dims, rng);
    for (int i = 0; i < n_test; ++i) {
        const int label = i % 2;
        test_ch.reset_coherence(rng);
        const VecC ref = test_ch.cfr(rng);
        VecC probe;
        if (label == 1) {
            probe = eve_cfr_from(test_ch, eve, dims, rng);
        } else {
            test_ch.advance(rng);
            probe = test_ch.cfr(rng);
        }
        out.test.rows.row(i) = complex_to_features(probe - ref).transpose();
        out.test.labels[i] = label;
    }
    out.test.estimate_priors(2);
    return out;
}

void write_scenario_csv(const std::string& path, const SimulatedScenario& scenario) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_scenario_csv: cannot open " + path);
    os << std::setprecision(17);
    const Eigen::Index d = scenario.train.dim();
    os << "label_true,label_heuristic,snapshot_index";
    for (Eigen::Index j = 0; j < d; ++j) os << ",f_" << j;
    os << "\n";
    for (Eigen::Index i = 0; i < scenario.train.size(); ++i) {
        os << scenario.train_true_labels[size_t(i)] << "," << scenario.train.labels[size_t(i)] << ","
           << scenario.train_snapshot_index[size_t(i)];
        for (Eigen::Index j = 0; j < d; ++j) os << "," << scenario.train.rows(i, j);
        os << "\n";
    }
}

}  // namespace hyphy
