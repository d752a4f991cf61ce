#include "hyphy/hyphylearn.hpp"

#include <fstream>
#include <iomanip>

namespace hyphy {

MatD TrainedClassifier::standardize_cols(const MatD& x_cols) const {
    if (feat_shift.size() == 0) return x_cols;
    return (x_cols.colwise() - feat_shift).array().colwise() * feat_scale.array();
}

int TrainedClassifier::classify(const VecD& x) const {
    const VecD z = nnet::forward(mapper_spec, mapper, standardize_cols(x));
    const VecD p = nnet::forward(classifier_spec, classifier, z);
    Eigen::Index best = 0;
    p.maxCoeff(&best);
    return static_cast<int>(best);
}

std::vector<int> TrainedClassifier::classify_rows(const MatD& rows) const {
    const MatD z = map_batch(rows.transpose());
    const MatD p = nnet::forward_batch(classifier_spec, classifier, z);
    std::vector<int> out(size_t(rows.rows()));
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
        Eigen::Index best = 0;
        p.col(c).maxCoeff(&best);
        out[size_t(c)] = static_cast<int>(best);
    }
    return out;
}

void feature_standardizer(const MatD& rows, VecD& shift, VecD& scale) {
    shift = rows.colwise().mean();
    const MatD centered = rows.rowwise() - shift.transpose();
    const VecD var = centered.cwiseAbs2().colwise().mean();
    scale = (var.array() + 1e-12).rsqrt();
}

// ---------------------------------------------------------------------------
// EM mixture machinery shared by cluster_label and GmmClassifier.

namespace {

struct GmmComponent {
    VecD mean;
    MatD cov;
    Eigen::LLT<MatD> llt;
    double log_norm = 0.0;  // -0.5 (d ln 2pi + logdet)
    double weight = 0.0;
};

struct GmmModel {
    std::vector<GmmComponent> components;
    std::vector<double> ll_trace;
};

void refresh_component(GmmComponent& c) {
    const Eigen::Index d = c.mean.size();
    c.llt.compute(c.cov);
    if (c.llt.info() != Eigen::Success) throw SingularModelError("gmm: component covariance not PD");
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) log_det += 2.0 * std::log(c.llt.matrixLLT()(i, i));
    c.log_norm = -0.5 * (double(d) * std::log(2.0 * kPi) + log_det);
}

double log_density(const GmmComponent& c, const VecD& x) {
    const VecD r = x - c.mean;
    return c.log_norm - 0.5 * r.dot(c.llt.solve(r));
}

std::vector<int> kmeans_assign(const MatD& rows, const MatD& centers) {
    std::vector<int> assign(size_t(rows.rows()));
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < centers.rows(); ++c) {
            const double d = (rows.row(i) - centers.row(c)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        assign[size_t(i)] = best;
    }
    return assign;
}

MatD kmeans_init(const MatD& rows, int k, Rng& rng) {
    const Eigen::Index n = rows.rows();
    MatD centers(k, rows.cols());
    centers.row(0) = rows.row(Eigen::Index(rng.integer(std::uint64_t(n))));
    for (int c = 1; c < k; ++c) {
        VecD d2(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < c; ++j) best = std::min(best, (rows.row(i) - centers.row(j)).squaredNorm());
            d2[i] = best;
        }
        const double total = d2.sum();
        if (!(total > 0.0)) {
            centers.row(c) = rows.row(Eigen::Index(rng.integer(std::uint64_t(n))));
            continue;
        }
        double r = rng.uniform() * total;
        Eigen::Index pick = 0;
        for (; pick < n - 1 && r > d2[pick]; ++pick) r -= d2[pick];
        centers.row(c) = rows.row(pick);
    }
    for (int it = 0; it < 10; ++it) {
        const auto assign = kmeans_assign(rows, centers);
        MatD acc = MatD::Zero(k, rows.cols());
        VecD cnt = VecD::Zero(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            acc.row(assign[size_t(i)]) += rows.row(i);
            cnt[assign[size_t(i)]] += 1.0;
        }
        for (int c = 0; c < k; ++c)
            if (cnt[c] > 0.0) centers.row(c) = acc.row(c) / cnt[c];
    }
    return centers;
}

GmmModel fit_gmm_once(const MatD& rows, int k, Rng& rng, int max_iters, double tol) {
    const Eigen::Index n = rows.rows();
    const Eigen::Index d = rows.cols();
    const MatD centers = kmeans_init(rows, k, rng);
    const auto assign = kmeans_assign(rows, centers);

    GmmModel model;
    model.components.resize(size_t(k));
    for (int c = 0; c < k; ++c) {
        auto& comp = model.components[size_t(c)];
        comp.mean = centers.row(c);
        comp.cov = MatD::Zero(d, d);
        double cnt = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (assign[size_t(i)] != c) continue;
            const VecD r = rows.row(i).transpose() - comp.mean;
            comp.cov += r * r.transpose();
            cnt += 1.0;
        }
        comp.weight = std::max(cnt, 1.0) / double(n);
        comp.cov /= std::max(cnt, 1.0);
        const double ridge = 1e-6 * comp.cov.trace() / double(d);
        comp.cov.diagonal().array() += ridge;
        refresh_component(comp);
    }

    MatD log_resp(n, k);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iters; ++it) {
        // E step
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double row_max = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                log_resp(i, c) = std::log(model.components[size_t(c)].weight) +
                                 log_density(model.components[size_t(c)], rows.row(i).transpose());
                row_max = std::max(row_max, log_resp(i, c));
            }
            double lse = 0.0;
            for (int c = 0; c < k; ++c) lse += std::exp(log_resp(i, c) - row_max);
            const double log_lse = row_max + std::log(lse);
            ll += log_lse;
            for (int c = 0; c < k; ++c) log_resp(i, c) -= log_lse;
        }
        model.ll_trace.push_back(ll);
        // M step
        for (int c = 0; c < k; ++c) {
            auto& comp = model.components[size_t(c)];
            const VecD resp = log_resp.col(c).array().exp();
            const double nk = resp.sum();
            if (!(nk > 1e-8 * double(n))) throw SingularModelError("gmm: empty component");
            comp.weight = nk / double(n);
            comp.mean = (rows.transpose() * resp) / nk;
            const MatD centered = rows.rowwise() - comp.mean.transpose();
            comp.cov = (centered.transpose() * resp.asDiagonal() * centered) / nk;
            const double ridge = 1e-6 * comp.cov.trace() / double(d);
            comp.cov.diagonal().array() += ridge;
            refresh_component(comp);
        }
        if (it > 0 && std::abs(ll - prev_ll) < tol * std::abs(prev_ll)) break;
        prev_ll = ll;
    }
    return model;
}

GmmModel fit_gmm(const MatD& rows, int k, Rng& rng, int max_iters = 100, double tol = 1e-6,
                 int max_restarts = 5) {
    if (rows.rows() < 1 || rows.cols() < 1) throw std::invalid_argument("gmm: empty input");
    for (int attempt = 0;; ++attempt) {
        try {
            Rng local = rng.split(std::uint64_t(attempt));
            return fit_gmm_once(rows, k, local, max_iters, tol);
        } catch (const SingularModelError&) {
            if (attempt + 1 >= max_restarts) throw;
        }
    }
}

std::vector<int> majority_map(const GmmModel& model, const MatD& anchor_rows,
                              const std::vector<int>& anchor_labels, int c_classes) {
    const int k = static_cast<int>(model.components.size());
    MatD counts = MatD::Zero(k, c_classes);
    VecD global = VecD::Zero(c_classes);
    for (Eigen::Index i = 0; i < anchor_rows.rows(); ++i) {
        int best = 0;
        double best_lp = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            const double lp = std::log(model.components[size_t(c)].weight) +
                              log_density(model.components[size_t(c)], anchor_rows.row(i).transpose());
            if (lp > best_lp) {
                best_lp = lp;
                best = c;
            }
        }
        counts(best, anchor_labels[size_t(i)]) += 1.0;
        global[anchor_labels[size_t(i)]] += 1.0;
    }
    std::vector<int> cls(size_t(k), 0);
    for (int c = 0; c < k; ++c) {
        // majority per cluster; clusters without anchors inherit the global majority;
        // ties resolve to the lower class index
        const VecD row = counts.row(c).sum() > 0.0 ? VecD(counts.row(c)) : global;
        Eigen::Index best = 0;
        row.maxCoeff(&best);
        cls[size_t(c)] = static_cast<int>(best);
    }
    return cls;
}

}  // namespace

ClusterLabeling cluster_label(const MatD& rows, const MatD& anchor_rows,
                              const std::vector<int>& anchor_labels, int c_classes, Rng& rng) {
    if (rows.rows() < 1) throw std::invalid_argument("cluster_label: empty input");
    if (anchor_rows.rows() != Eigen::Index(anchor_labels.size()) || anchor_labels.empty())
        throw std::invalid_argument("cluster_label: anchors required");
    const GmmModel model = fit_gmm(rows, c_classes, rng);
    const auto cls = majority_map(model, anchor_rows, anchor_labels, c_classes);

    const auto assign_row = [&](const VecD& x) {
        int best = 0;
        double best_lp = -std::numeric_limits<double>::infinity();
        for (size_t c = 0; c < model.components.size(); ++c) {
            const double lp = std::log(model.components[c].weight) + log_density(model.components[c], x);
            if (lp > best_lp) {
                best_lp = lp;
                best = static_cast<int>(c);
            }
        }
        return cls[size_t(best)];
    };

    ClusterLabeling out;
    out.labels.resize(size_t(rows.rows()));
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
        out.labels[size_t(i)] = assign_row(rows.row(i).transpose());
    int wrong = 0;
    for (Eigen::Index i = 0; i < anchor_rows.rows(); ++i)
        if (assign_row(anchor_rows.row(i).transpose()) != anchor_labels[size_t(i)]) ++wrong;
    out.anchor_error = double(wrong) / double(anchor_rows.rows());
    return out;
}

LabeledDataset generate_synthetic(const std::vector<ClassSampler>& samplers, const VecD& priors,
                                  long n_s, Rng& rng) {
    if (samplers.empty() || priors.size() != Eigen::Index(samplers.size()))
        throw std::invalid_argument("generate_synthetic: samplers/prior mismatch");
    if ((priors.array() < -1e-12).any() || std::abs(priors.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("generate_synthetic: invalid priors");

    LabeledDataset out;
    out.origin = Origin::synthetic;
    out.prior_estimates = priors;
    out.labels.resize(size_t(n_s));
    for (long i = 0; i < n_s; ++i) {
        const double r = rng.uniform();
        int w = 0;
        double acc = priors[0];
        while (acc < r && w + 1 < priors.size()) acc += priors[++w];
        const VecD x = samplers[size_t(w)](rng);
        if (i == 0) out.rows.resize(n_s, x.size());
        out.rows.row(i) = x.transpose();
        out.labels[size_t(i)] = w;
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

MatD gather_batch(const MatD& rows, const std::vector<int>& idx) {
    MatD x(rows.cols(), Eigen::Index(idx.size()));
    for (size_t i = 0; i < idx.size(); ++i) x.col(Eigen::Index(i)) = rows.row(idx[i]).transpose();
    return x;
}

std::vector<int> sample_indices(Eigen::Index n, int count, Rng& rng) {
    std::vector<int> idx(static_cast<size_t>(count));
    for (auto& i : idx) i = static_cast<int>(rng.integer(std::uint64_t(n)));
    return idx;
}

}  // namespace

AdversarialResult adversarial_train(const LabeledDataset& d_r, const LabeledDataset& d_s,
                                    const nnet::NetworkSpec& mapper_spec,
                                    const nnet::NetworkSpec& classifier_spec,
                                    const nnet::NetworkSpec& discriminator_spec,
                                    const TrainingConfig& cfg) {
    cfg.validate();
    d_r.validate();
    d_s.validate();
    if (d_r.dim() != d_s.dim()) throw std::invalid_argument("adversarial_train: feature dims differ");
    if (mapper_spec.output_activation != nnet::Output::linear)
        throw std::invalid_argument("adversarial_train: mapper must have a linear output");

    Rng rng(cfg.seed);
    AdversarialResult res;
    res.classifier.mapper_spec = mapper_spec;
    res.classifier.classifier_spec = classifier_spec;
    res.discriminator_spec = discriminator_spec;
    res.classifier.mapper = nnet::init_params(mapper_spec, rng);
    res.classifier.classifier = nnet::init_params(classifier_spec, rng);
    res.discriminator = nnet::init_params(discriminator_spec, rng);
    feature_standardizer(d_s.rows, res.classifier.feat_shift, res.classifier.feat_scale);

    auto opt_mapper = nnet::init_adam(res.classifier.mapper, cfg.lr_mapper);
    auto opt_classifier = nnet::init_adam(res.classifier.classifier, cfg.lr_classifier);
    auto opt_discriminator = nnet::init_adam(res.discriminator, cfg.lr_discriminator);

    const int nb = cfg.batch_size;
    for (int step = 1; step <= cfg.n_train_steps; ++step) {
        const auto idx_r = sample_indices(d_r.size(), nb, rng);
        const auto idx_s = sample_indices(d_s.size(), nb, rng);
        const MatD xs = res.classifier.standardize_cols(gather_batch(d_s.rows, idx_s));
        const MatD xr = res.classifier.standardize_cols(gather_batch(d_r.rows, idx_r));
        std::vector<int> ys(static_cast<size_t>(nb));
        for (int i = 0; i < nb; ++i) ys[size_t(i)] = d_s.labels[size_t(idx_s[size_t(i)])];

        // L_s: classification loss on the synthetic batch through the mapper
        const MatD zs = nnet::forward_batch(mapper_spec, res.classifier.mapper, xs);
        auto bp_cls = nnet::grad_cross_entropy(classifier_spec, res.classifier.classifier, zs, ys);
        auto bp_map_s =
            nnet::grad_upstream(mapper_spec, res.classifier.mapper, xs, bp_cls.input_grad);

        // L_c: domain loss on the mixed batch (real -> 0, synthetic -> 1)
        MatD xd(xr.rows(), 2 * nb);
        xd.leftCols(nb) = xr;
        xd.rightCols(nb) = xs;
        std::vector<int> yd(size_t(2 * nb), 0);
        for (int i = 0; i < nb; ++i) yd[size_t(nb + i)] = 1;
        const MatD zd = nnet::forward_batch(mapper_spec, res.classifier.mapper, xd);
        auto bp_dis = nnet::grad_cross_entropy(discriminator_spec, res.discriminator, zd, yd);
        auto bp_map_c =
            nnet::grad_upstream(mapper_spec, res.classifier.mapper, xd, bp_dis.input_grad);

        if (!std::isfinite(bp_cls.loss) || !std::isfinite(bp_dis.loss))
            throw std::runtime_error("adversarial_train: NaN loss at step " + std::to_string(step));

        // psi <- psi - mu1 (G_s,psi - G_c,psi); phi1 <- phi1 - mu2 G_s,phi1; zeta <- zeta - mu3 G_c,zeta
        bp_map_s.grads.axpy(-1.0, bp_map_c.grads);
        nnet::adam_step(opt_mapper, res.classifier.mapper, bp_map_s.grads);
        nnet::adam_step(opt_classifier, res.classifier.classifier, bp_cls.grads);
        nnet::adam_step(opt_discriminator, res.discriminator, bp_dis.grads);

        if (step == 1 || step % cfg.diag_every == 0 || step == cfg.n_train_steps)
            res.diagnostics.push_back(TrainDiagnosticsRow{
                step, bp_cls.loss, bp_dis.loss, 2.0 * (1.0 - 2.0 * bp_dis.loss)});
    }
    return res;
}

nnet::NetworkParams train_domain_discriminator(const MatD& rows_r, const MatD& rows_s,
                                               const nnet::NetworkSpec& spec, int steps, int batch,
                                               double lr, std::uint64_t seed) {
    Rng rng(seed);
    nnet::NetworkParams params = nnet::init_params(spec, rng);
    auto opt = nnet::init_adam(params, lr);
    for (int step = 0; step < steps; ++step) {
        const auto idx_r = sample_indices(rows_r.rows(), batch, rng);
        const auto idx_s = sample_indices(rows_s.rows(), batch, rng);
        MatD x(rows_r.cols(), 2 * batch);
        x.leftCols(batch) = gather_batch(rows_r, idx_r);
        x.rightCols(batch) = gather_batch(rows_s, idx_s);
        std::vector<int> y(size_t(2 * batch), 0);
        for (int i = 0; i < batch; ++i) y[size_t(batch + i)] = 1;
        auto bp = nnet::grad_cross_entropy(spec, params, x, y);
        nnet::adam_step(opt, params, bp.grads);
    }
    return params;
}

ADistanceProxy empirical_a_distance_proxy(const MatD& z_r, const MatD& z_s,
                                          const nnet::NetworkSpec& discriminator_spec,
                                          const nnet::NetworkParams& discriminator) {
    if (z_r.rows() == 0 || z_s.rows() == 0)
        throw std::invalid_argument("empirical_a_distance_proxy: empty sample set");
    const auto eval = [&](const MatD& rows, int label) {
        const MatD p = nnet::forward_batch(discriminator_spec, discriminator, rows.transpose());
        double ce = 0.0;
        double err = 0.0;
        for (Eigen::Index c = 0; c < p.cols(); ++c) {
            ce -= std::log(std::max(p(label, c), 1e-12));
            Eigen::Index best = 0;
            p.col(c).maxCoeff(&best);
            if (static_cast<int>(best) != label) err += 1.0;
        }
        return std::pair<double, double>{ce / double(p.cols()), err / double(p.cols())};
    };
    const auto [ce_r, err_r] = eval(z_r, 0);
    const auto [ce_s, err_s] = eval(z_s, 1);
    ADistanceProxy proxy;
    const double l_c = 0.5 * (ce_r + ce_s);
    proxy.cross_entropy_form = 2.0 * (1.0 - 2.0 * l_c);
    proxy.accuracy_form = 2.0 * (1.0 - err_r - err_s);
    return proxy;
}

double tv_bound_equal_cov(const VecD& mu, const VecD& mu_hat, const MatD& sigma) {
    if (mu.size() != mu_hat.size() || sigma.rows() != mu.size() || sigma.cols() != mu.size())
        throw std::invalid_argument("tv_bound_equal_cov: dimension mismatch");
    Eigen::LLT<MatD> llt(sigma);
    if (llt.info() != Eigen::Success) throw SingularModelError("tv_bound_equal_cov: sigma not PD");
    const VecD v = mu - mu_hat;
    const double num = v.squaredNorm();
    if (num == 0.0) return 0.0;
    const double den = std::sqrt(v.dot(sigma * v));
    return 4.5 * std::min(1.0, num / den);
}

TrainedClassifier fine_tune_baseline(const LabeledDataset& d_s, const LabeledDataset& d_r,
                                     const nnet::NetworkSpec& mapper_spec,
                                     const nnet::NetworkSpec& classifier_spec,
                                     const TrainingConfig& cfg, int refine_steps) {
    cfg.validate();
    if (d_r.dim() != d_s.dim()) throw std::invalid_argument("fine_tune_baseline: feature dims differ");
    Rng rng(cfg.seed);
    TrainedClassifier net;
    net.mapper_spec = mapper_spec;
    net.classifier_spec = classifier_spec;
    net.mapper = nnet::init_params(mapper_spec, rng);
    net.classifier = nnet::init_params(classifier_spec, rng);
    feature_standardizer(d_s.rows, net.feat_shift, net.feat_scale);
    auto opt_mapper = nnet::init_adam(net.mapper, cfg.lr_mapper);
    auto opt_classifier = nnet::init_adam(net.classifier, cfg.lr_classifier);

    const auto train_phase = [&](const LabeledDataset& data, int steps) {
        for (int step = 0; step < steps; ++step) {
            const auto idx = sample_indices(data.size(), cfg.batch_size, rng);
            const MatD x = net.standardize_cols(gather_batch(data.rows, idx));
            std::vector<int> y(static_cast<size_t>(cfg.batch_size));
            for (int i = 0; i < cfg.batch_size; ++i) y[size_t(i)] = data.labels[size_t(idx[size_t(i)])];
            const MatD z = nnet::forward_batch(mapper_spec, net.mapper, x);
            auto bp_cls = nnet::grad_cross_entropy(classifier_spec, net.classifier, z, y);
            auto bp_map = nnet::grad_upstream(mapper_spec, net.mapper, x, bp_cls.input_grad);
            if (!std::isfinite(bp_cls.loss))
                throw std::runtime_error("fine_tune_baseline: NaN loss at step " + std::to_string(step));
            nnet::adam_step(opt_mapper, net.mapper, bp_map.grads);
            nnet::adam_step(opt_classifier, net.classifier, bp_cls.grads);
        }
    };
    train_phase(d_s, cfg.n_train_steps);
    train_phase(d_r, refine_steps);
    return net;
}

GmmClassifier::GmmClassifier(int n_components, const MatD& rows, const MatD& anchor_rows,
                             const std::vector<int>& anchor_labels, Rng& rng) {
    if (rows.cols() < 1) throw std::invalid_argument("GmmClassifier: d >= 1 required");
    const int c_classes = 1 + *std::max_element(anchor_labels.begin(), anchor_labels.end());
    const GmmModel model = fit_gmm(rows, n_components, rng);
    component_class_ = majority_map(model, anchor_rows, anchor_labels, c_classes);
    ll_trace_ = model.ll_trace;
    for (const auto& comp : model.components) {
        Component c;
        c.mean = comp.mean;
        c.cov_inv = comp.llt.solve(MatD::Identity(comp.mean.size(), comp.mean.size()));
        c.log_norm = comp.log_norm;
        c.log_weight = std::log(comp.weight);
        components_.push_back(std::move(c));
    }
}

int GmmClassifier::classify(const VecD& x) const {
    const int c_classes = 1 + *std::max_element(component_class_.begin(), component_class_.end());
    VecD class_score = VecD::Constant(c_classes, -std::numeric_limits<double>::infinity());
    for (size_t j = 0; j < components_.size(); ++j) {
        const VecD r = x - components_[j].mean;
        const double lp =
            components_[j].log_weight + components_[j].log_norm - 0.5 * r.dot(components_[j].cov_inv * r);
        double& cur = class_score[component_class_[j]];
        cur = std::max(cur, lp) + std::log1p(std::exp(-std::abs(cur - lp)));  // logaddexp
    }
    Eigen::Index best = 0;
    class_score.maxCoeff(&best);
    return static_cast<int>(best);
}

std::vector<int> GmmClassifier::classify_rows(const MatD& rows) const {
    std::vector<int> out(size_t(rows.rows()));
    for (Eigen::Index i = 0; i < rows.rows(); ++i) out[size_t(i)] = classify(rows.row(i).transpose());
    return out;
}

HyPhyLearnResult run_hyphylearn(const MatD& d_r_rows, const Labeler& labeler,
                                const SamplerBuilder& build_samplers, int c_classes,
                                const nnet::NetworkSpec& mapper_spec,
                                const nnet::NetworkSpec& classifier_spec,
                                const nnet::NetworkSpec& discriminator_spec,
                                const TrainingConfig& cfg) {
    if (d_r_rows.rows() < 1) throw std::invalid_argument("run_hyphylearn: empty training data");
    HyPhyLearnResult out;

    // Step 1: imperfect labeling
    std::vector<int> labels;
    try {
        labels = labeler(d_r_rows);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("run_hyphylearn step 1 (labeling): ") + e.what());
    }

    // Step 2: parameter estimation and priors pi_hat_i = |D_i| / N
    LabeledDataset d_r;
    d_r.rows = d_r_rows;
    d_r.labels = labels;
    d_r.origin = Origin::real;
    d_r.estimate_priors(c_classes);
    out.priors = d_r.prior_estimates;

    std::vector<ClassSampler> samplers;
    try {
        samplers = build_samplers(d_r_rows, labels, out.estimation);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("run_hyphylearn step 2 (estimation): ") + e.what());
    }
    if (samplers.size() != size_t(c_classes))
        throw std::runtime_error("run_hyphylearn: estimator must supply one sampler per class");

    // Step 3: synthetic dataset
    Rng rng(cfg.seed ^ 0x5e7a11ULL);
    LabeledDataset d_s;
    try {
        d_s = generate_synthetic(samplers, out.priors, cfg.n_synthetic, rng);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("run_hyphylearn step 3 (synthesis): ") + e.what());
    }

    // Step 4: adversarial training
    auto trained = adversarial_train(d_r, d_s, mapper_spec, classifier_spec, discriminator_spec, cfg);
    out.classifier = std::move(trained.classifier);
    out.discriminator_spec = trained.discriminator_spec;
    out.discriminator = std::move(trained.discriminator);
    out.diagnostics = std::move(trained.diagnostics);
    return out;
}

void write_diagnostics_csv(const std::string& path, const std::vector<TrainDiagnosticsRow>& rows) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_diagnostics_csv: cannot open " + path);
    os << std::setprecision(17);
    os << "step,L_s,L_c,d_hat_proxy\n";
    for (const auto& r : rows)
        os << r.step << "," << r.loss_class << "," << r.loss_domain << "," << r.d_hat_proxy << "\n";
}

}  // namespace hyphy
