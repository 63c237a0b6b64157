#pragma once

// CSI forward model: a static per-subcarrier channel plus one dynamic
// reflected path whose phase follows the Tx -> target -> Rx path length.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "unifi/trajectory.hpp"

namespace unifi {

inline constexpr double kSpeedOfLight = 299'792'458.0;

/// One CSI snapshot; h is n_subcarriers x n_rx_antennas.
struct CsiFrame {
  double ts = 0.0;
  Eigen::MatrixXcd h;

  std::size_t n_sub() const { return static_cast<std::size_t>(h.rows()); }
  std::size_t n_rx() const { return static_cast<std::size_t>(h.cols()); }
};

struct RadioConfig {
  double carrier_freq = 5.32e9;
  std::size_t n_subcarriers = 30;
  std::size_t n_rx_antennas = 3;
  double subcarrier_spacing = 625e3;
  Point2 tx_pos{0.0, 0.0};
  Point2 rx_pos{4.0, 0.0};
  double sample_rate = 100.0;
  std::uint64_t static_gain_seed = 7;
  std::uint64_t noise_seed = 11;
  /// |A| relative to the mean static magnitude (static gains are normalized to mean 1).
  double dyn_amplitude = 0.1;
  /// Per-element complex noise, E|n|^2 = noise_std^2.
  double noise_std = 0.0025;
  /// Per-frame gain jitter shared by all subcarriers (receiver AGC).
  double common_gain_std = 0.0008;
  /// Chest displacement of a present person, applied as a path-length oscillation.
  double breathing_amplitude_m = 0.0008;
  double breathing_rate_hz = 0.25;
  /// Multipath taps composing the static channel across frequency.
  std::size_t static_taps = 4;
  double max_tap_delay_s = 40e-9;

  /// Throws ConfigError on an unsupported configuration.
  void validate() const;
};

double wavelength(const RadioConfig& cfg);
/// Wavelength of subcarrier `index` at carrier + index * spacing.
double subcarrier_wavelength(const RadioConfig& cfg, std::size_t index);

/// |tx - target| + |target - rx|.
double path_length(const Point2& tx, const Point2& rx, const Point2& target);

/// Time derivative of the reflected path length for a target moving with
/// `velocity`. Throws GeometryError when the target sits on an antenna.
double range_rate(const Point2& tx, const Point2& rx, const Point2& target, const Point2& velocity);

/// The fixed static channel H_s drawn from cfg.static_gain_seed; normalized
/// so the mean magnitude over all entries is 1.
Eigen::MatrixXcd static_gains(const RadioConfig& cfg);

/// Synthesizes one frame per trajectory step. `occupied[i]` switches the
/// dynamic path on. Frame i is timestamped i / sample_rate.
std::vector<CsiFrame> synthesize_csi(const Trajectory& traj, const RadioConfig& cfg,
                                     std::span<const std::uint8_t> occupied);

}  // namespace unifi
