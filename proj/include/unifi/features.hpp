#pragma once

// Physical features over sliding windows of CSI: subcarrier correlation,
// dynamic-to-static energy ratio (DSER) and path-length change rate (PLCR).

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "unifi/csi.hpp"
#include "unifi/domain.hpp"

namespace unifi {

inline constexpr double kSentinel = std::numeric_limits<double>::quiet_NaN();

/// One timestep of the five-slot feature vector. A NaN slot marks a window
/// that has not filled yet.
struct FeatureFrame {
  double ts = 0.0;
  std::array<double, kNumSlots> v{kSentinel, kSentinel, kSentinel, kSentinel, kSentinel};

  double& operator[](Slot s) { return v[static_cast<std::size_t>(s)]; }
  double operator[](Slot s) const { return v[static_cast<std::size_t>(s)]; }
  bool complete() const {
    for (double x : v) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }
  bool operator==(const FeatureFrame& o) const;
};

struct WindowConfig {
  double short_s = 0.5;
  double long_s = 2.0;
  double plcr_s = 0.1;
  double hop_s = 0.1;

  void validate() const;
  /// Window length of a slot in seconds.
  double window_of(Slot s) const;
};

/// Mean |Pearson| correlation between subcarrier amplitude series over
/// off-diagonal pairs, averaged across receive antennas. Subcarriers with
/// variance below 1e-12 contribute 0.
double subcarrier_correlation(std::span<const CsiFrame> frames);

/// log10 of dynamic over static energy with the static part estimated as the
/// window mean; per-element values clamped to [-10, 10] and averaged.
double dser(std::span<const CsiFrame> frames);

enum class Taper { Rectangular, Hann };

struct PlcrOptions {
  /// Expected residual power per element when nothing moves.
  double noise_floor_power = 0.0;
  /// Residual power below gate * floor counts as no motion.
  double motion_gate = 4.0;
  Taper taper = Taper::Rectangular;
};

/// Floor derived from the radio's noise model.
PlcrOptions plcr_options_for(const RadioConfig& cfg);

/// Dominant Doppler frequency (Hz) of the mean-removed window, refined by
/// parabolic interpolation around the spectral peak.
double dominant_doppler(std::span<const CsiFrame> frames, double sample_rate, Taper taper = Taper::Rectangular);

/// PLCR = -f_D * lambda in m/s; negative when the path shortens. Returns 0
/// when the residual power is below the motion gate.
double plcr(std::span<const CsiFrame> frames, double lambda, const PlcrOptions& opts = {});

/// Receives warnings from per-window failures during extraction.
using WarningSink = std::function<void(const std::string&)>;

/// Slides all five feature windows over the trace at hop_s. Frame k is
/// stamped with the timestamp of trace frame k * hop and covers the windows
/// ending there; slots whose window has not filled are NaN.
std::vector<FeatureFrame> extract_sequence(std::span<const CsiFrame> frames, const WindowConfig& win,
                                           const RadioConfig& cfg, const WarningSink& warn = {});

/// Samples per window at a given rate (at least 1).
std::size_t window_samples(double seconds, double sample_rate);

}  // namespace unifi
