#pragma once

// Single-file experiment configuration: simulator, radio, model, training
// and experiment sizes. Stored as JSON; every key is optional and unknown
// keys are rejected.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "unifi/csi.hpp"
#include "unifi/inverse.hpp"
#include "unifi/simulator.hpp"

namespace unifi {

struct ExperimentConfig {
  SimulationConfig sim{};
  /// Radio for CSI synthesis; tx/rx and sample rate follow `sim`.
  RadioConfig radio{};
  ModelConfig model{};
  TrainConfig train{};
  std::size_t n_sequences = 2000;
  std::size_t n_test = 200;
  std::vector<double> rates{100.0, 200.0, 500.0, 1000.0};
  std::uint64_t seed = 1;

  /// Throws ConfigError on any invalid part.
  void validate() const;
  /// Radio with antenna positions and packet rate taken from the simulator.
  RadioConfig effective_radio() const;
};

/// Applies named setting 1..5 on top of `cfg` (widths, rate, loss weights).
void apply_setting(ExperimentConfig& cfg, int k);

ExperimentConfig config_from_json(std::string_view text);
/// Canonical form: sorted keys, shortest round-trip numbers, 2-space indent.
std::string config_to_json(const ExperimentConfig& cfg);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg);

/// crc32 of the compact canonical JSON, as 8 lowercase hex digits.
std::string fingerprint(const ExperimentConfig& cfg);

}  // namespace unifi
