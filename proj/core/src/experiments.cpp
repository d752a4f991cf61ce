#include "hyphy/experiments.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>

#include "experiments_impl.hpp"

namespace hyphy {

const std::vector<SchemaEntry>& config_schema() {
    static const std::vector<SchemaEntry> schema = {
        {"experiment", "string", "",
         "", "one of: toy-gaussian, spoofing-accuracy, spoofing-coherence, cdma-ber-vs-snr, cdma-ber-vs-data"},
        {"seeds", "seeds", "1", "", "comma-separated RNG seeds; one full run per seed"},
        {"out_dir", "string", "results", "", "output directory"},

        {"toy.mu0", "list", "2.9,4.4", "", "true class-0 mean"},
        {"toy.mu1", "list", "5,6.4", "", "true class-1 mean"},
        {"toy.mu0_hat", "list", "2,3", "", "estimated class-0 mean"},
        {"toy.mu1_hat", "list", "4,5", "", "estimated class-1 mean"},
        {"toy.sigma", "list", "0.15,0.11,0.11,0.15", "", "shared 2x2 covariance, row-major"},
        {"toy.n_real", "int", "40", "", "rows drawn from the true mixture"},
        {"toy.n_synth", "int", "2000", "", "rows drawn from the estimated mixture"},
        {"toy.n_test", "int", "4000", "", "fresh true-distribution test rows"},
        {"toy.train_steps", "int", "4000", "", "adversarial training steps"},
        {"toy.batch", "int", "40", "", "mini-batch size per domain"},
        {"toy.lr", "double", "0.001", "", "Adam learning rate (all three networks)"},

        {"spoofing.n_tx", "int", "2", "", "transmit antennas"},
        {"spoofing.n_rx", "int", "2", "", "receive antennas"},
        {"spoofing.n_f", "int", "20", "", "subcarriers per antenna pair"},
        {"spoofing.k_paths", "int", "4", "", "dominant paths per channel"},
        {"spoofing.specular_gain", "double", "8", "", "per-path gain scale (CN std)"},
        {"spoofing.alice.sigma2", "double", "20", "", "reference-channel noise variance"},
        {"spoofing.alice.alpha2", "double", "200", "", "reference diffuse power"},
        {"spoofing.alice.beta", "double", "0.02", "", "reference coherence bandwidth"},
        {"spoofing.alice.l_taps", "int", "20", "", "reference diffuse taps"},
        {"spoofing.alice.a", "double", "0.85", "", "reference similarity"},
        {"spoofing.eve.sigma2", "double", "26", "", "intruder noise variance"},
        {"spoofing.eve.alpha2", "double", "250", "", "intruder diffuse power"},
        {"spoofing.eve.beta", "double", "0.08", "", "intruder coherence bandwidth"},
        {"spoofing.eve.l_taps", "int", "16", "", "intruder diffuse taps"},
        {"spoofing.eve.a", "double", "0.65", "", "intruder similarity"},
        {"spoofing.n_train", "int", "4000", "", "heuristic-labeled training pairs"},
        {"spoofing.n_synth", "long", "40000", "400000", "synthetic pairs"},
        {"spoofing.n_test", "int", "20000", "100000", "balanced test pairs"},
        {"spoofing.label_quantile", "double", "0.95", "", "threshold calibration quantile"},
        {"spoofing.eve_activity", "double", "0.5", "", "intruder transmission probability per slot"},
        {"spoofing.eve_slot", "int", "25", "", "snapshots per intruder-presence slot"},
        {"spoofing.est_max_cfrs", "int", "150", "", "cap on CFRs fed to the estimator per class"},
        {"spoofing.est_rounds", "int", "2", "", "alternation rounds of the estimator"},
        {"spoofing.z_dim", "int", "64", "", "mapped feature dimension"},
        {"spoofing.hidden", "int", "400", "", "mapper/classifier hidden width (3 layers)"},
        {"spoofing.disc_hidden", "int", "40", "", "discriminator hidden width (1 layer)"},
        {"spoofing.train_steps", "int", "2000", "20000", "adversarial training steps"},
        {"spoofing.finetune_steps", "int", "200", "2000", "refinement steps of the fine-tune baseline"},
        {"spoofing.batch", "int", "128", "", "mini-batch size per domain"},
        {"spoofing.lr", "double", "0.0001", "", "Adam learning rate (all three networks)"},
        {"spoofing.shrink_grid", "list", "0,0.05,0.1,0.2,0.4", "", "shrinkage candidates for the LRT baseline"},

        {"coherence.n_list", "list", "1,2,4", "", "numbers of reference coherence times to sweep"},
        {"coherence.samples", "int", "100", "", "training pairs collected per coherence time"},
        {"coherence.ratio", "double", "4", "", "reference over intruder coherence-time ratio"},
        {"coherence.n_test", "int", "8000", "40000", "balanced test pairs"},
        {"coherence.n_synth", "long", "20000", "40000", "synthetic pairs (per run)"},
        {"coherence.train_steps", "int", "1000", "20000", "adversarial training steps"},

        {"cdma.k_users", "int", "3", "", "users"},
        {"cdma.n_gain", "int", "32", "", "processing gain"},
        {"cdma.l_paths", "int", "3", "", "channel paths per user"},
        {"cdma.chip_interval", "double", "0.001", "", "chip interval, seconds"},
        {"cdma.rolloff", "double", "0.5", "", "chip pulse roll-off"},
        {"cdma.nfr_db", "double", "5", "", "near-far amplitude spread, +-dB"},
        {"cdma.n_train", "int", "40", "", "training frames per run"},
        {"cdma.snr_list", "list", "0,2,4,6,8,10,12", "", "SNR sweep, dB"},
        {"cdma.rho", "double", "0.25", "", "code mismatch probability for the MMSE curve"},
        {"cdma.test_bits", "int", "12000", "", "detected bits per point (lower bound)"},
        {"cdma.hyphy.snr", "double", "8", "", "SNR of the learner run, dB"},
        {"cdma.hyphy.rho", "double", "0.2", "", "code mismatch for the learner run"},
        {"cdma.hyphy.n_synth", "long", "40000", "1000000", "synthetic windows"},
        {"cdma.hyphy.train_steps", "int", "2500", "20000", "adversarial training steps"},
        {"cdma.hyphy.hidden", "int", "300", "", "mapper/classifier hidden width (4 layers)"},
        {"cdma.hyphy.disc_hidden", "int", "40", "", "discriminator hidden width (1 layer)"},
        {"cdma.hyphy.batch", "int", "128", "", "mini-batch size per domain"},
        {"cdma.hyphy.lr", "double", "0.0001", "", "Adam learning rate"},
        {"cdma.hyphy.z_dim", "int", "64", "", "mapped feature dimension"},
        {"cdma.hyphy.test_bits", "int", "10500", "", "bits for the learner BER point"},
        {"cdma.data_list", "list", "20,40,80", "", "training-frame sweep (ber-vs-data)"},
        {"cdma.data_rho", "double", "0.25", "", "code mismatch for the ber-vs-data sweep"},
        {"cdma.data_snr", "double", "8", "", "SNR for the ber-vs-data sweep, dB"},
    };
    return schema;
}

std::string schema_text() {
    std::ostringstream os;
    os << "# configuration schema (key = default): `value` desk-scale, `paper` via --paper-scale\n";
    for (const auto& e : config_schema()) {
        os << e.key << " = " << e.value;
        if (!e.paper_value.empty()) os << "   (paper: " << e.paper_value << ")";
        os << "\n#   [" << e.type << "] " << e.help << "\n";
    }
    return os.str();
}

ExperimentConfig resolve_config(const Config& file_cfg, bool paper_scale,
                                const std::vector<std::uint64_t>& seed_override,
                                const std::string& out_override) {
    std::set<std::string> known;
    Config resolved;
    for (const auto& e : config_schema()) {
        known.insert(e.key);
        const std::string v = paper_scale && !e.paper_value.empty() ? e.paper_value : e.value;
        if (!v.empty() || e.key != "experiment") resolved.set(e.key, v);
    }
    for (const auto& [k, v] : file_cfg.entries()) {
        if (!known.count(k)) throw ConfigError("config: unknown key " + k);
        resolved.set(k, v);
    }
    if (!resolved.has("experiment") || resolved.get_str("experiment").empty())
        throw ConfigError("config: missing experiment id");

    ExperimentConfig cfg;
    cfg.id = resolved.get_str("experiment");
    static const std::set<std::string> ids = {"toy-gaussian", "spoofing-accuracy",
                                              "spoofing-coherence", "cdma-ber-vs-snr",
                                              "cdma-ber-vs-data"};
    if (!ids.count(cfg.id)) throw ConfigError("config: unknown experiment id " + cfg.id);
    if (!seed_override.empty()) {
        std::string joined;
        for (size_t i = 0; i < seed_override.size(); ++i)
            joined += (i ? "," : "") + std::to_string(seed_override[i]);
        resolved.set("seeds", joined);
    }
    if (!out_override.empty()) resolved.set("out_dir", out_override);
    cfg.seeds = resolved.get_seeds("seeds");
    if (cfg.seeds.empty()) throw ConfigError("config: seeds must be nonempty");
    cfg.out_dir = resolved.get_str("out_dir");
    cfg.values = resolved;
    return cfg;
}

double evaluate_accuracy(const std::function<int(const VecD&)>& classifier,
                         const LabeledDataset& test) {
    if (test.size() == 0) throw std::invalid_argument("evaluate_accuracy: empty test set");
    long correct = 0;
    for (Eigen::Index i = 0; i < test.size(); ++i)
        if (classifier(test.rows.row(i).transpose()) == test.labels[size_t(i)]) ++correct;
    return double(correct) / double(test.size());
}

double evaluate_ber(const FrameDetector& detector, const CdmaScene& scene) {
    const int p_max = scene.cfg.n_packets - 1;  // last frame has no complete window
    if (p_max <= 2) throw std::invalid_argument("evaluate_ber: scene too short");
    long errors = 0, total = 0;
    for (int p = 2; p < p_max; ++p) {
        const auto bits = detector(scene, p);
        for (int k = 0; k < scene.cfg.k_users; ++k) {
            if (bits[size_t(k)] != scene.true_bits(k, p)) ++errors;
            ++total;
        }
    }
    return double(errors) / double(total);
}

void write_result_csvs(const std::string& out_dir, const ResultTable& table) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::set<std::string> methods;
    for (const auto& r : table.rows) methods.insert(r.method);
    for (const auto& method : methods) {
        std::vector<ResultRow> rows;
        for (const auto& r : table.rows)
            if (r.method == method) rows.push_back(r);
        std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
            return std::tie(a.sweep, a.metric, a.seed) < std::tie(b.sweep, b.metric, b.seed);
        });
        std::ofstream os(out_dir + "/" + method + ".csv");
        if (!os) throw std::runtime_error("write_result_csvs: cannot open output for " + method);
        os << std::setprecision(17);
        os << "#schema=hyphy-result-v1\n";
        os << "sweep,method,metric,value,seed\n";
        for (const auto& r : rows)
            os << r.sweep << "," << r.method << "," << r.metric << "," << r.value << "," << r.seed
               << "\n";
    }
}

ResultTable run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    ResultTable table;
    if (cfg.id == "toy-gaussian") detail::run_toy_gaussian(cfg, table);
    else if (cfg.id == "spoofing-accuracy") detail::run_spoofing_accuracy(cfg, table);
    else if (cfg.id == "spoofing-coherence") detail::run_spoofing_coherence(cfg, table);
    else if (cfg.id == "cdma-ber-vs-snr") detail::run_cdma_ber_vs_snr(cfg, table);
    else if (cfg.id == "cdma-ber-vs-data") detail::run_cdma_ber_vs_data(cfg, table);
    else throw ConfigError("run_experiment: unknown id " + cfg.id);

    for (const auto& r : table.rows) {
        if ((r.metric == "accuracy" || r.metric == "BER") && !(r.value >= 0.0 && r.value <= 1.0))
            throw std::runtime_error("run_experiment: metric " + r.metric + " out of range");
    }
    {
        std::ofstream manifest(cfg.out_dir + "/manifest.txt");
        if (!manifest) throw std::runtime_error("run_experiment: cannot write manifest");
        manifest << "# resolved configuration; re-running this file reproduces the outputs\n";
        manifest << cfg.values.serialize();
    }
    write_result_csvs(cfg.out_dir, table);
    return table;
}

}  // namespace hyphy
