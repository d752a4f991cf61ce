#include <iostream>

#include <CLI11.hpp>

#include "hyphy/experiments.hpp"

namespace {

// exit codes: 0 ok, 2 config error, 3 numerical failure
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

int do_run(const std::string& config_path, const std::vector<std::uint64_t>& seeds,
           const std::string& out_dir, bool paper_scale) {
    const auto file_cfg = hyphy::Config::from_file(config_path);
    const auto cfg = hyphy::resolve_config(file_cfg, paper_scale, seeds, out_dir);
    const auto table = hyphy::run_experiment(cfg);
    std::cout << "experiment " << cfg.id << ": " << table.rows.size() << " result rows -> "
              << cfg.out_dir << "\n";
    for (const auto& r : table.rows)
        std::cout << "  " << r.method << " sweep=" << r.sweep << " " << r.metric << "=" << r.value
                  << " seed=" << r.seed << "\n";
    return kOk;
}

int do_validate(const std::string& config_path) {
    const auto file_cfg = hyphy::Config::from_file(config_path);
    const auto cfg = hyphy::resolve_config(file_cfg, false);
    std::cout << "ok: experiment " << cfg.id << ", " << cfg.seeds.size() << " seed(s), out_dir "
              << cfg.out_dir << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"physics-plus-learning classification experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::uint64_t> seeds;
    std::string out_dir;
    bool paper_scale = false;

    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("config", config_path, "config file (key = value lines)")->required();
    run->add_option("--seed", seeds, "override the seed list (repeatable)");
    run->add_option("--out", out_dir, "override the output directory");
    run->add_flag("--paper-scale", paper_scale, "use the published sample sizes");

    auto* validate = app.add_subcommand("validate", "check a config file and exit");
    validate->add_option("config", config_path, "config file")->required();

    auto* schema = app.add_subcommand("schema", "print the configuration schema");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return do_run(config_path, seeds, out_dir, paper_scale);
        if (validate->parsed()) return do_validate(config_path);
        if (schema->parsed()) {
            std::cout << hyphy::schema_text();
            return kOk;
        }
    } catch (const hyphy::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumericalError;
    }
    return kOk;
}
