#include "unifi/csi.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "unifi/error.hpp"
#include "unifi/rng.hpp"

namespace unifi {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kCoincidentTol = 1e-12;

}  // namespace

void RadioConfig::validate() const {
  if (!(carrier_freq > 0.0)) throw ConfigError("radio: carrier_freq must be positive");
  if (n_subcarriers < 1 || n_rx_antennas < 1) throw ConfigError("radio: need at least one subcarrier and antenna");
  if (!(sample_rate >= 50.0 && sample_rate <= 2000.0)) {
    throw ConfigError("radio: sample_rate must lie in [50, 2000] Hz");
  }
  if (!(subcarrier_spacing >= 0.0)) throw ConfigError("radio: subcarrier_spacing must be >= 0");
  if (!(noise_std >= 0.0) || !(common_gain_std >= 0.0) || !(dyn_amplitude >= 0.0)) {
    throw ConfigError("radio: amplitudes and noise levels must be >= 0");
  }
  if (!(breathing_amplitude_m >= 0.0) || !(breathing_rate_hz >= 0.0)) {
    throw ConfigError("radio: breathing parameters must be >= 0");
  }
  if (static_taps < 1) throw ConfigError("radio: static_taps must be >= 1");
  if ((tx_pos - rx_pos).norm() <= 0.0) throw ConfigError("radio: tx and rx must differ");
}

double wavelength(const RadioConfig& cfg) { return kSpeedOfLight / cfg.carrier_freq; }

double subcarrier_wavelength(const RadioConfig& cfg, std::size_t index) {
  return kSpeedOfLight / (cfg.carrier_freq + static_cast<double>(index) * cfg.subcarrier_spacing);
}

double path_length(const Point2& tx, const Point2& rx, const Point2& target) {
  return (target - tx).norm() + (target - rx).norm();
}

double range_rate(const Point2& tx, const Point2& rx, const Point2& target, const Point2& velocity) {
  const Point2 from_tx = target - tx;
  const Point2 from_rx = target - rx;
  const double n_tx = from_tx.norm();
  const double n_rx = from_rx.norm();
  if (n_tx < kCoincidentTol || n_rx < kCoincidentTol) {
    throw GeometryError("range rate undefined: target coincides with an antenna");
  }
  return velocity.dot(from_tx / n_tx + from_rx / n_rx);
}

Eigen::MatrixXcd static_gains(const RadioConfig& cfg) {
  Rng rng(derive_seed(cfg.static_gain_seed, 0));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto n_sub = static_cast<Eigen::Index>(cfg.n_subcarriers);
  const auto n_rx = static_cast<Eigen::Index>(cfg.n_rx_antennas);
  Eigen::MatrixXcd hs(n_sub, n_rx);
  const std::size_t scattered = cfg.static_taps - 1;
  for (Eigen::Index a = 0; a < n_rx; ++a) {
    // One dominant line-of-sight tap plus weaker scattered taps.
    std::vector<std::complex<double>> gain(cfg.static_taps);
    std::vector<double> delay(cfg.static_taps);
    gain[0] = std::polar(1.0, kTwoPi * unit(rng));
    delay[0] = 0.0;
    const double scatter_std = scattered > 0 ? std::sqrt(0.5 / (2.0 * static_cast<double>(scattered))) : 0.0;
    for (std::size_t k = 1; k < cfg.static_taps; ++k) {
      gain[k] = {scatter_std * gauss(rng), scatter_std * gauss(rng)};
      delay[k] = cfg.max_tap_delay_s * unit(rng);
    }
    for (Eigen::Index i = 0; i < n_sub; ++i) {
      const double f = static_cast<double>(i) * cfg.subcarrier_spacing;
      std::complex<double> h{0.0, 0.0};
      for (std::size_t k = 0; k < cfg.static_taps; ++k) {
        h += gain[k] * std::polar(1.0, -kTwoPi * f * delay[k]);
      }
      hs(i, a) = h;
    }
  }
  const double mean_mag = hs.cwiseAbs().mean();
  if (mean_mag > 0.0) hs /= mean_mag;
  return hs;
}

std::vector<CsiFrame> synthesize_csi(const Trajectory& traj, const RadioConfig& cfg,
                                     std::span<const std::uint8_t> occupied) {
  cfg.validate();
  if (occupied.size() != traj.size()) {
    throw DataError("synthesize_csi: occupancy has " + std::to_string(occupied.size()) +
                    " steps, trajectory has " + std::to_string(traj.size()));
  }
  if (std::abs(traj.f_s - cfg.sample_rate) > 1e-9 * cfg.sample_rate) {
    throw ConfigError("synthesize_csi: trajectory rate differs from radio sample_rate");
  }
  const Eigen::MatrixXcd hs = static_gains(cfg);
  const auto n_sub = hs.rows();
  const auto n_rx = hs.cols();

  std::vector<double> inv_lambda(static_cast<std::size_t>(n_sub));
  for (Eigen::Index i = 0; i < n_sub; ++i) {
    inv_lambda[static_cast<std::size_t>(i)] = 1.0 / subcarrier_wavelength(cfg, static_cast<std::size_t>(i));
  }

  Rng rng(derive_seed(cfg.noise_seed, 1));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double breathing_phase = kTwoPi * unit(rng);
  const double component_std = cfg.noise_std / std::sqrt(2.0);

  std::vector<CsiFrame> frames;
  frames.reserve(traj.size());
  Eigen::VectorXcd dynamic(n_sub);
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const Point2& p = traj.pos[t];
    if (!std::isfinite(p.x()) || !std::isfinite(p.y())) {
      throw DataError("synthesize_csi: non-finite trajectory point at step " + std::to_string(t));
    }
    CsiFrame frame;
    frame.ts = static_cast<double>(t) / cfg.sample_rate;
    frame.h = hs;
    if (occupied[t] != 0) {
      const double d = path_length(cfg.tx_pos, cfg.rx_pos, p) +
                       cfg.breathing_amplitude_m *
                           std::sin(kTwoPi * cfg.breathing_rate_hz * frame.ts + breathing_phase);
      for (Eigen::Index i = 0; i < n_sub; ++i) {
        dynamic(i) = std::polar(cfg.dyn_amplitude, -kTwoPi * d * inv_lambda[static_cast<std::size_t>(i)]);
      }
      frame.h.colwise() += dynamic;
    }
    if (cfg.common_gain_std > 0.0) frame.h *= 1.0 + cfg.common_gain_std * gauss(rng);
    if (cfg.noise_std > 0.0) {
      for (Eigen::Index a = 0; a < n_rx; ++a) {
        for (Eigen::Index i = 0; i < n_sub; ++i) {
          frame.h(i, a) += std::complex<double>(component_std * gauss(rng), component_std * gauss(rng));
        }
      }
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

}  // namespace unifi
