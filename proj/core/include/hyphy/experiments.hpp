#pragma once

#include <functional>

#include "hyphy/cdma.hpp"
#include "hyphy/config.hpp"
#include "hyphy/dataset.hpp"

namespace hyphy {

struct SchemaEntry {
    std::string key;
    std::string type;         // int | long | double | bool | string | list | seeds
    std::string value;        // desk-scale default
    std::string paper_value;  // empty when identical
    std::string help;
};

const std::vector<SchemaEntry>& config_schema();
std::string schema_text();

struct ExperimentConfig {
    std::string id;
    std::vector<std::uint64_t> seeds;
    std::string out_dir;
    Config values;  // fully resolved: defaults overlaid with the user file
};

/// Overlay the user's file on the schema defaults. Unknown keys are hard
/// errors; paper_scale substitutes the published sizes before overrides.
ExperimentConfig resolve_config(const Config& file_cfg, bool paper_scale,
                                const std::vector<std::uint64_t>& seed_override = {},
                                const std::string& out_override = "");

struct ResultRow {
    double sweep = 0.0;
    std::string method;
    std::string metric;  // accuracy | BER | d_hat | tv_bound
    double value = 0.0;
    std::uint64_t seed = 0;
};

struct ResultTable {
    std::vector<ResultRow> rows;
    void add(double sweep, const std::string& method, const std::string& metric, double value,
             std::uint64_t seed) {
        rows.push_back({sweep, method, metric, value, seed});
    }
};

/// Runs the configured experiment; writes one CSV per method plus manifest.txt
/// under out_dir and returns all rows.
ResultTable run_experiment(const ExperimentConfig& cfg);

/// Fraction of argmax-correct rows.
double evaluate_accuracy(const std::function<int(const VecD&)>& classifier,
                         const LabeledDataset& test);

/// Detector for the bits of packet p (entries +-1).
using FrameDetector = std::function<std::vector<int>(const CdmaScene&, int p)>;

/// Bit-error fraction over users and frames, excluding the cold-start frames
/// p < 2 (and the final frame, whose two-frame window is incomplete).
double evaluate_ber(const FrameDetector& detector, const CdmaScene& scene);

void write_result_csvs(const std::string& out_dir, const ResultTable& table);

}  // namespace hyphy
