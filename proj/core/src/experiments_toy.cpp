#include <filesystem>
#include <fstream>
#include <iomanip>

#include "experiments_impl.hpp"

namespace hyphy {
namespace detail {

namespace {

VecD vec2(const std::vector<double>& v) {
    if (v.size() != 2) throw ConfigError("toy: expected a 2-entry vector");
    return VecD{{v[0], v[1]}};
}

MatD mat2(const std::vector<double>& v) {
    if (v.size() != 4) throw ConfigError("toy: expected a row-major 2x2 matrix");
    MatD m(2, 2);
    m << v[0], v[1], v[2], v[3];
    return m;
}

LabeledDataset draw_mixture(const VecD& mu0, const VecD& mu1, const MatD& chol, int n,
                            Origin origin, Rng& rng) {
    LabeledDataset d;
    d.origin = origin;
    d.rows.resize(n, 2);
    d.labels.resize(size_t(n));
    for (int i = 0; i < n; ++i) {
        const int y = rng.uniform() < 0.5 ? 0 : 1;
        const VecD z{{rng.normal(), rng.normal()}};
        d.rows.row(i) = ((y == 0 ? mu0 : mu1) + chol * z).transpose();
        d.labels[size_t(i)] = y;
    }
    d.estimate_priors(2);
    return d;
}

void write_samples_csv(const std::string& path, const LabeledDataset& d_r, const MatD& rows_r,
                       const LabeledDataset& d_s, const MatD& rows_s) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("toy: cannot open " + path);
    os << std::setprecision(17);
    os << "#schema=hyphy-toy-samples-v1\n";
    os << "origin,label,c_0,c_1\n";
    for (Eigen::Index i = 0; i < rows_r.rows(); ++i)
        os << "real," << d_r.labels[size_t(i)] << "," << rows_r(i, 0) << "," << rows_r(i, 1) << "\n";
    for (Eigen::Index i = 0; i < rows_s.rows(); ++i)
        os << "synthetic," << d_s.labels[size_t(i)] << "," << rows_s(i, 0) << "," << rows_s(i, 1)
           << "\n";
}

MatD class_means(const MatD& rows, const std::vector<int>& labels) {
    MatD means = MatD::Zero(2, rows.cols());
    VecD count = VecD::Zero(2);
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        means.row(labels[size_t(i)]) += rows.row(i);
        count[labels[size_t(i)]] += 1.0;
    }
    for (int c = 0; c < 2; ++c)
        if (count[c] > 0.0) means.row(c) /= count[c];
    return means;
}

}  // namespace

void run_toy_gaussian(const ExperimentConfig& cfg, ResultTable& table) {
    const Config& v = cfg.values;
    const VecD mu0 = vec2(v.get_list("toy.mu0"));
    const VecD mu1 = vec2(v.get_list("toy.mu1"));
    const VecD mu0_hat = vec2(v.get_list("toy.mu0_hat"));
    const VecD mu1_hat = vec2(v.get_list("toy.mu1_hat"));
    const MatD sigma = mat2(v.get_list("toy.sigma"));
    const MatD chol = Eigen::LLT<MatD>(sigma).matrixL();
    const int n_real = v.get_int("toy.n_real");
    const int n_synth = v.get_int("toy.n_synth");
    const int n_test = v.get_int("toy.n_test");
    if (n_test < 1) throw ConfigError("toy: n_test must be positive");

    // mismatch bounds are seed-independent
    const double tv0 = tv_bound_equal_cov(mu0, mu0_hat, sigma);
    const double tv1 = tv_bound_equal_cov(mu1, mu1_hat, sigma);

    // architectures: linear 2->20->2 bottleneck mapper, width-20 two-layer heads
    nnet::NetworkSpec mapper_spec{{2, 20, 2}, nnet::Hidden::identity, nnet::Output::linear};
    nnet::NetworkSpec head_spec{{2, 20, 2}, nnet::Hidden::identity, nnet::Output::softmax};

    for (const std::uint64_t seed : cfg.seeds) {
        Rng rng(seed);
        const LabeledDataset d_r = draw_mixture(mu0, mu1, chol, n_real, Origin::real, rng);
        const LabeledDataset d_s = draw_mixture(mu0_hat, mu1_hat, chol, n_synth, Origin::synthetic, rng);
        const LabeledDataset test = draw_mixture(mu0, mu1, chol, n_test, Origin::real, rng);

        TrainingConfig tcfg;
        tcfg.n_train_steps = v.get_int("toy.train_steps");
        tcfg.batch_size = std::min<int>(v.get_int("toy.batch"), int(d_r.size()));
        tcfg.lr_mapper = tcfg.lr_classifier = tcfg.lr_discriminator = v.get_double("toy.lr");
        tcfg.seed = seed;
        tcfg.z_dim = 2;

        auto adv = adversarial_train(d_r, d_s, mapper_spec, head_spec, head_spec, tcfg);
        auto synth_only = fine_tune_baseline(d_s, d_r, mapper_spec, head_spec, tcfg, 0);

        const auto acc_of = [&](const TrainedClassifier& c) {
            return evaluate_accuracy([&](const VecD& x) { return c.classify(x); }, test);
        };
        const double acc_adv = acc_of(adv.classifier);
        const double acc_synth = acc_of(synth_only);
        table.add(0.0, "hyphylearn", "accuracy", acc_adv, seed);
        table.add(0.0, "synthetic-only", "accuracy", acc_synth, seed);
        table.add(0.0, "tv-bound-class0", "tv_bound", tv0, seed);
        table.add(0.0, "tv-bound-class1", "tv_bound", tv1, seed);

        // distance proxies: fresh discriminators on the raw and on the mapped features
        const int d_steps = std::max(500, tcfg.n_train_steps / 2);
        nnet::NetworkSpec raw_disc{{2, 20, 2}, nnet::Hidden::identity, nnet::Output::softmax};
        const auto disc_raw = train_domain_discriminator(d_r.rows, d_s.rows, raw_disc, d_steps,
                                                         tcfg.batch_size, tcfg.lr_mapper, seed + 1);
        const auto proxy_raw = empirical_a_distance_proxy(d_r.rows, d_s.rows, raw_disc, disc_raw);

        const MatD z_r = adv.classifier.map_batch(d_r.rows.transpose()).transpose();
        const MatD z_s = adv.classifier.map_batch(d_s.rows.transpose()).transpose();
        const auto disc_z = train_domain_discriminator(z_r, z_s, head_spec, d_steps,
                                                       tcfg.batch_size, tcfg.lr_mapper, seed + 2);
        const auto proxy_z = empirical_a_distance_proxy(z_r, z_s, head_spec, disc_z);

        table.add(0.0, "adistance-identity", "d_hat", proxy_raw.accuracy_form, seed);
        table.add(0.0, "adistance-identity-ce", "d_hat", proxy_raw.cross_entropy_form, seed);
        table.add(0.0, "adistance-mapped", "d_hat", proxy_z.accuracy_form, seed);
        table.add(0.0, "adistance-mapped-ce", "d_hat", proxy_z.cross_entropy_form, seed);

        const std::string tag = "_seed" + std::to_string(seed);
        write_samples_csv(cfg.out_dir + "/samples_x" + tag + ".csv", d_r, d_r.rows, d_s, d_s.rows);
        write_samples_csv(cfg.out_dir + "/samples_z" + tag + ".csv", d_r, z_r, d_s, z_s);
        write_diagnostics_csv(cfg.out_dir + "/diagnostics" + tag + ".csv", adv.diagnostics);
        {
            std::ofstream os(cfg.out_dir + "/means" + tag + ".csv");
            os << std::setprecision(17);
            os << "#schema=hyphy-toy-means-v1\n";
            os << "space,origin,class,m_0,m_1\n";
            const MatD mr_x = class_means(d_r.rows, d_r.labels);
            const MatD ms_x = class_means(d_s.rows, d_s.labels);
            const MatD mr_z = class_means(z_r, d_r.labels);
            const MatD ms_z = class_means(z_s, d_s.labels);
            for (int c = 0; c < 2; ++c) {
                os << "x,real," << c << "," << mr_x(c, 0) << "," << mr_x(c, 1) << "\n";
                os << "x,synthetic," << c << "," << ms_x(c, 0) << "," << ms_x(c, 1) << "\n";
                os << "z,real," << c << "," << mr_z(c, 0) << "," << mr_z(c, 1) << "\n";
                os << "z,synthetic," << c << "," << ms_z(c, 0) << "," << ms_z(c, 1) << "\n";
            }
        }
    }
}

}  // namespace detail
}  // namespace hyphy
