#include "unifi/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include <unsupported/Eigen/FFT>

#include "unifi/error.hpp"

namespace unifi {
namespace {

constexpr double kDegenerateVariance = 1e-12;
constexpr double kDegenerateStatic = 1e-18;
constexpr double kDserClamp = 10.0;

bool same_value(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

void require_frames(std::span<const CsiFrame> frames, std::size_t min_frames, const char* what) {
  if (frames.size() < min_frames) {
    throw WindowError(std::string(what) + ": window needs at least " + std::to_string(min_frames) +
                      " frames, got " + std::to_string(frames.size()));
  }
  const auto rows = frames.front().h.rows();
  const auto cols = frames.front().h.cols();
  for (const auto& f : frames) {
    if (f.h.rows() != rows || f.h.cols() != cols) throw WindowError(std::string(what) + ": frame shape changes");
  }
}

/// Per-element temporal mean of the window.
Eigen::MatrixXcd window_mean(std::span<const CsiFrame> frames) {
  Eigen::MatrixXcd mean = Eigen::MatrixXcd::Zero(frames.front().h.rows(), frames.front().h.cols());
  for (const auto& f : frames) mean += f.h;
  return mean / static_cast<double>(frames.size());
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

bool FeatureFrame::operator==(const FeatureFrame& o) const {
  if (!same_value(ts, o.ts)) return false;
  for (std::size_t i = 0; i < kNumSlots; ++i) {
    if (!same_value(v[i], o.v[i])) return false;
  }
  return true;
}

void WindowConfig::validate() const {
  if (!(plcr_s > 0.0 && plcr_s < short_s && short_s < long_s)) {
    throw ConfigError("windows: need 0 < plcr_s < short_s < long_s");
  }
  if (!(hop_s > 0.0)) throw ConfigError("windows: hop_s must be positive");
}

double WindowConfig::window_of(Slot s) const {
  switch (s) {
    case Slot::CorrShort:
    case Slot::DserShort:
      return short_s;
    case Slot::Plcr:
      return plcr_s;
    case Slot::CorrLong:
    case Slot::DserLong:
      return long_s;
  }
  return long_s;
}

std::size_t window_samples(double seconds, double sample_rate) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(seconds * sample_rate)));
}

double subcarrier_correlation(std::span<const CsiFrame> frames) {
  require_frames(frames, 2, "subcarrier_correlation");
  const auto n = static_cast<Eigen::Index>(frames.size());
  const auto n_sub = frames.front().h.rows();
  const auto n_rx = frames.front().h.cols();
  if (n_sub < 2) return 0.0;

  double total = 0.0;
  Eigen::MatrixXd amp(n, n_sub);
  for (Eigen::Index a = 0; a < n_rx; ++a) {
    for (Eigen::Index t = 0; t < n; ++t) amp.row(t) = frames[static_cast<std::size_t>(t)].h.col(a).cwiseAbs().transpose();
    const Eigen::RowVectorXd mean = amp.colwise().mean();
    amp.rowwise() -= mean;
    for (Eigen::Index i = 0; i < n_sub; ++i) {
      const double var = amp.col(i).squaredNorm() / static_cast<double>(n);
      if (var < kDegenerateVariance) {
        amp.col(i).setZero();
      } else {
        amp.col(i) /= std::sqrt(var * static_cast<double>(n));
      }
    }
    const Eigen::MatrixXd r = amp.transpose() * amp;
    const double off_diag = r.cwiseAbs().sum() - r.diagonal().cwiseAbs().sum();
    total += off_diag / static_cast<double>(n_sub * (n_sub - 1));
  }
  return std::clamp(total / static_cast<double>(n_rx), 0.0, 1.0);
}

double dser(std::span<const CsiFrame> frames) {
  require_frames(frames, 2, "dser");
  const Eigen::MatrixXcd hs = window_mean(frames);
  const Eigen::MatrixXd static_power = hs.cwiseAbs2();
  if (static_power.mean() < kDegenerateStatic) throw DataError("dser: static component is degenerate");

  Eigen::MatrixXd dyn_power = Eigen::MatrixXd::Zero(hs.rows(), hs.cols());
  for (const auto& f : frames) dyn_power += (f.h - hs).cwiseAbs2();
  dyn_power /= static_cast<double>(frames.size());

  double sum = 0.0;
  for (Eigen::Index j = 0; j < hs.cols(); ++j) {
    for (Eigen::Index i = 0; i < hs.rows(); ++i) {
      const double ps = static_power(i, j);
      const double pd = dyn_power(i, j);
      double value;
      if (ps <= 0.0) {
        value = kDserClamp;
      } else if (pd <= 0.0) {
        value = -kDserClamp;
      } else {
        value = std::clamp(std::log10(pd / ps), -kDserClamp, kDserClamp);
      }
      sum += value;
    }
  }
  return sum / static_cast<double>(hs.size());
}

PlcrOptions plcr_options_for(const RadioConfig& cfg) {
  PlcrOptions opts;
  // Gain jitter scales the (unit-mean) static channel.
  opts.noise_floor_power = cfg.noise_std * cfg.noise_std + cfg.common_gain_std * cfg.common_gain_std;
  return opts;
}

double dominant_doppler(std::span<const CsiFrame> frames, double sample_rate, Taper taper) {
  require_frames(frames, 3, "dominant_doppler");
  const std::size_t n = frames.size();
  const std::size_t nfft = std::max<std::size_t>(256, next_pow2(16 * n));
  const Eigen::MatrixXcd hs = window_mean(frames);

  std::vector<double> weight(n, 1.0);
  if (taper == Taper::Hann) {
    for (std::size_t t = 0; t < n; ++t) {
      weight[t] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (static_cast<double>(t) + 0.5) / static_cast<double>(n));
    }
  }

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> in(nfft);
  std::vector<std::complex<double>> out(nfft);
  std::vector<double> power(nfft, 0.0);
  for (Eigen::Index j = 0; j < hs.cols(); ++j) {
    for (Eigen::Index i = 0; i < hs.rows(); ++i) {
      std::fill(in.begin(), in.end(), std::complex<double>{});
      for (std::size_t t = 0; t < n; ++t) in[t] = weight[t] * (frames[t].h(i, j) - hs(i, j));
      fft.fwd(out, in);
      for (std::size_t k = 0; k < nfft; ++k) power[k] += std::norm(out[k]);
    }
  }

  if (taper == Taper::Rectangular) {
    // Least-squares fit of static + one tone: normalize by the energy the
    // tone keeps after the window mean is removed. Removes the pull of
    // short windows toward zero frequency.
    const double nn = static_cast<double>(n);
    for (std::size_t k = 0; k < nfft; ++k) {
      const double half = std::numbers::pi * static_cast<double>(k) / static_cast<double>(nfft);
      const double s = std::sin(half);
      const double dirichlet = std::abs(s) < 1e-15 ? nn : std::sin(nn * half) / s;
      const double kept = nn - dirichlet * dirichlet / nn;
      power[k] = kept > 1e-9 * nn ? power[k] / kept : 0.0;
    }
  }

  const auto peak = static_cast<std::size_t>(std::max_element(power.begin(), power.end()) - power.begin());
  const double y0 = power[peak];
  const double ym = power[(peak + nfft - 1) % nfft];
  const double yp = power[(peak + 1) % nfft];
  const double denom = ym - 2.0 * y0 + yp;
  const double delta = denom < 0.0 ? std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5) : 0.0;
  double bin = static_cast<double>(peak) + delta;
  if (bin > static_cast<double>(nfft) / 2.0) bin -= static_cast<double>(nfft);
  return bin * sample_rate / static_cast<double>(nfft);
}

double plcr(std::span<const CsiFrame> frames, double lambda, const PlcrOptions& opts) {
  require_frames(frames, 3, "plcr");
  const double span_s = frames.back().ts - frames.front().ts;
  if (!(span_s > 0.0)) throw WindowError("plcr: window timestamps do not advance");
  const double sample_rate = static_cast<double>(frames.size() - 1) / span_s;

  const Eigen::MatrixXcd hs = window_mean(frames);
  double residual = 0.0;
  for (const auto& f : frames) residual += (f.h - hs).squaredNorm();
  residual /= static_cast<double>(frames.size() * static_cast<std::size_t>(hs.size()));
  const double static_power = hs.cwiseAbs2().mean();
  if (residual <= 1e-30 * static_power || residual < opts.motion_gate * opts.noise_floor_power) return 0.0;

  return -dominant_doppler(frames, sample_rate, opts.taper) * lambda;
}

std::vector<FeatureFrame> extract_sequence(std::span<const CsiFrame> frames, const WindowConfig& win,
                                           const RadioConfig& cfg, const WarningSink& warn) {
  win.validate();
  cfg.validate();
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].ts < frames[i - 1].ts) {
      throw DataError("extract: timestamps decrease at frame " + std::to_string(i));
    }
  }
  const double fs = cfg.sample_rate;
  const std::size_t hop = window_samples(win.hop_s, fs);
  const double lambda = wavelength(cfg);
  const PlcrOptions opts = plcr_options_for(cfg);

  std::array<std::size_t, kNumSlots> len{};
  for (std::size_t s = 0; s < kNumSlots; ++s) len[s] = window_samples(win.window_of(static_cast<Slot>(s)), fs);

  std::vector<FeatureFrame> out;
  out.reserve(frames.size() / hop + 1);
  for (std::size_t end = 0; end < frames.size(); end += hop) {
    FeatureFrame ff;
    ff.ts = frames[end].ts;
    for (std::size_t s = 0; s < kNumSlots; ++s) {
      if (end + 1 < len[s]) continue;
      const auto window = frames.subspan(end + 1 - len[s], len[s]);
      try {
        switch (static_cast<Slot>(s)) {
          case Slot::CorrShort:
          case Slot::CorrLong:
            ff.v[s] = subcarrier_correlation(window);
            break;
          case Slot::DserShort:
          case Slot::DserLong:
            ff.v[s] = dser(window);
            break;
          case Slot::Plcr:
            ff.v[s] = plcr(window, lambda, opts);
            break;
        }
      } catch (const DataError& e) {
        if (warn) warn("feature window ending at t=" + std::to_string(ff.ts) + ": " + e.what());
      }
    }
    out.push_back(ff);
  }
  return out;
}

}  // namespace unifi
