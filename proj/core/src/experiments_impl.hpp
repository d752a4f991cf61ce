#pragma once

#include "hyphy/experiments.hpp"
#include "hyphy/hyphylearn.hpp"
#include "hyphy/spoofing.hpp"

namespace hyphy {
namespace detail {

void run_toy_gaussian(const ExperimentConfig& cfg, ResultTable& table);
void run_spoofing_accuracy(const ExperimentConfig& cfg, ResultTable& table);
void run_spoofing_coherence(const ExperimentConfig& cfg, ResultTable& table);
void run_cdma_ber_vs_snr(const ExperimentConfig& cfg, ResultTable& table);
void run_cdma_ber_vs_data(const ExperimentConfig& cfg, ResultTable& table);

/// Shared scenario assembly for the spoofing experiments.
PartyParams alice_params_from(const Config& v, int k_paths, Rng& rng);
PartyParams eve_params_from(const Config& v, int k_paths, Rng& rng);

}  // namespace detail
}  // namespace hyphy
