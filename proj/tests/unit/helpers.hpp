#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "unifi/csi.hpp"
#include "unifi/trajectory.hpp"

namespace unifi::testing {

/// Constant-velocity trajectory starting at `start`.
inline Trajectory straight_line(const Point2& start, const Point2& velocity, std::size_t n, double f_s,
                                bool inside = true) {
  Trajectory t;
  t.f_s = f_s;
  const double speed = velocity.norm();
  const double heading = std::atan2(velocity.y(), velocity.x());
  for (std::size_t i = 0; i < n; ++i) {
    t.push(start + velocity * (static_cast<double>(i) / f_s), speed, heading, inside);
  }
  return t;
}

/// Radio with every random disturbance switched off.
inline RadioConfig quiet_radio(double sample_rate = 100.0) {
  RadioConfig cfg;
  cfg.sample_rate = sample_rate;
  cfg.noise_std = 0.0;
  cfg.common_gain_std = 0.0;
  cfg.breathing_amplitude_m = 0.0;
  return cfg;
}

/// Frames of a single-element channel following `h(t)`.
template <class F>
std::vector<CsiFrame> scalar_frames(std::size_t n, double f_s, F h) {
  std::vector<CsiFrame> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].ts = static_cast<double>(i) / f_s;
    out[i].h = Eigen::MatrixXcd::Constant(1, 1, h(out[i].ts));
  }
  return out;
}

inline std::vector<std::uint8_t> all_occupied(std::size_t n) { return std::vector<std::uint8_t>(n, 1); }

}  // namespace unifi::testing
