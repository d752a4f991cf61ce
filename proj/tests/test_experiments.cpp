#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hyphy/experiments.hpp"

using namespace hyphy;

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// byte-compare every result file of two directories (the manifest embeds the
// output directory itself and is checked through the rerun-from-manifest path)
void check_dirs_identical(const std::string& a, const std::string& b) {
    namespace fs = std::filesystem;
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(a))
        if (e.is_regular_file() && e.path().filename() != "manifest.txt")
            names.push_back(e.path().filename().string());
    CHECK_FALSE(names.empty());
    for (const auto& n : names) {
        CHECK(fs::exists(fs::path(b) / n));
        CHECK(read_file(fs::path(a) / n) == read_file(fs::path(b) / n));
    }
}

const char* kTinyToy =
    "experiment = toy-gaussian\n"
    "seeds = 5\n"
    "toy.train_steps = 150\n"
    "toy.n_test = 400\n";

}  // namespace

TEST_CASE("config parsing") {
    const Config cfg = Config::from_string("a.b = 3\n# comment\n\n c = hello world \n");
    CHECK(cfg.get_int("a.b") == 3);
    CHECK(cfg.get_str("c") == "hello world");
    CHECK_THROWS_AS(Config::from_string("not a pair\n"), ConfigError);
    CHECK_THROWS_AS(cfg.get_double("c"), ConfigError);
    CHECK(Config::from_string("x = 1,2.5,3\n").get_list("x").size() == 3);

    // serialization round trip
    const Config back = Config::from_string(cfg.serialize());
    CHECK(back.entries() == cfg.entries());
}

TEST_CASE("config resolution against the schema") {
    CHECK_FALSE(schema_text().empty());

    const Config file = Config::from_string("experiment = toy-gaussian\nseeds = 3,4\n");
    const ExperimentConfig cfg = resolve_config(file, false);
    CHECK(cfg.id == "toy-gaussian");
    CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4});
    CHECK(cfg.values.get_int("spoofing.n_f") == 20);  // schema default

    // the paper flag swaps in the published sizes
    const ExperimentConfig paper = resolve_config(file, true);
    CHECK(paper.values.get_long("spoofing.n_synth") == 400000);
    CHECK(paper.values.get_int("spoofing.train_steps") == 20000);
    CHECK(cfg.values.get_long("spoofing.n_synth") == 40000);
    CHECK(cfg.values.get_int("spoofing.train_steps") == 2000);

    CHECK_THROWS_AS(resolve_config(Config::from_string("experiment = nope\n"), false), ConfigError);
    CHECK_THROWS_AS(resolve_config(Config::from_string("experiment = toy-gaussian\nbogus = 1\n"),
                                   false),
                    ConfigError);
    CHECK_THROWS_AS(resolve_config(Config::from_string("seeds = 1\n"), false), ConfigError);
}

TEST_CASE("accuracy evaluation") {
    LabeledDataset test;
    test.rows = MatD::Zero(4, 2);
    test.rows << 1, 0, 0, 1, 1, 0, 0, 1;
    test.labels = {0, 1, 0, 1};
    CHECK(evaluate_accuracy([&](const VecD& x) { return x[0] > 0.5 ? 0 : 1; }, test) == 1.0);
    CHECK(evaluate_accuracy([](const VecD&) { return 0; }, test) == 0.5);
    LabeledDataset empty;
    empty.rows = MatD(0, 2);
    CHECK_THROWS(evaluate_accuracy([](const VecD&) { return 0; }, empty));
}

TEST_CASE("bit error evaluation") {
    Rng rng(1);
    CdmaConfig cfg;
    cfg.n_packets = 40;
    cfg.snr_db = 20.0;
    const SpreadingCodes codes = random_codes(cfg.k_users, cfg.n_packets, cfg.n_gain, rng);
    const auto channels = random_user_channels(cfg, rng);
    const Eigen::MatrixXi bits = random_bits(cfg.k_users, cfg.n_packets, rng);
    const CdmaScene scene = synthesize_scene(cfg, codes, channels, bits, rng);

    const FrameDetector perfect = [&](const CdmaScene& s, int p) {
        std::vector<int> out(size_t(s.cfg.k_users));
        for (int k = 0; k < s.cfg.k_users; ++k) out[size_t(k)] = s.true_bits(k, p);
        return out;
    };
    CHECK(evaluate_ber(perfect, scene) == 0.0);

    Rng coin(2);
    const FrameDetector random_guess = [&](const CdmaScene& s, int) {
        std::vector<int> out(size_t(s.cfg.k_users));
        for (auto& b : out) b = coin.uniform() < 0.5 ? -1 : 1;
        return out;
    };
    const double ber = evaluate_ber(random_guess, scene);
    CHECK(ber > 0.3);
    CHECK(ber < 0.7);
}

TEST_CASE("toy experiment reruns are byte identical") {
    namespace fs = std::filesystem;
    const std::string dir_a = "/tmp/hyphy_det_a", dir_b = "/tmp/hyphy_det_b", dir_c = "/tmp/hyphy_det_c";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    fs::remove_all(dir_c);

    const Config file = Config::from_string(kTinyToy);
    run_experiment(resolve_config(file, false, {}, dir_a));
    run_experiment(resolve_config(file, false, {}, dir_b));
    check_dirs_identical(dir_a, dir_b);

    // re-running from the manifest reproduces the outputs
    const Config manifest = Config::from_file(dir_a + "/manifest.txt");
    run_experiment(resolve_config(manifest, false, {}, dir_c));
    for (const auto& name : {"hyphylearn.csv", "synthetic-only.csv"})
        CHECK(read_file(fs::path(dir_a) / name) == read_file(fs::path(dir_c) / name));

    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    fs::remove_all(dir_c);
}

TEST_CASE("failed runs leave no result files") {
    namespace fs = std::filesystem;
    const std::string dir = "/tmp/hyphy_fail";
    fs::remove_all(dir);
    const Config file = Config::from_string(
        "experiment = spoofing-accuracy\nseeds = 1\nspoofing.n_test = 0\n");
    CHECK_THROWS(run_experiment(resolve_config(file, false, {}, dir)));
    CHECK_FALSE(fs::exists(dir + "/bayes.csv"));
    CHECK_FALSE(fs::exists(dir + "/manifest.txt"));
    fs::remove_all(dir);
}
