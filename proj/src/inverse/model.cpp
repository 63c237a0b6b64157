#include <algorithm>
#include <cmath>
#include <random>

#include "unifi/error.hpp"
#include "unifi/inverse.hpp"
#include "unifi/rng.hpp"

namespace unifi {

void ModelConfig::validate() const {
  if (state_hidden < 1 || traj_hidden < 1 || attn_dim < 1 || n_heads_attn < 1) {
    throw ConfigError("model: dimensions must be positive");
  }
  if (context < 1) throw ConfigError("model: context must be >= 1");
  if (attn_dim % n_heads_attn != 0) throw ConfigError("model: attn_dim must be divisible by n_heads_attn");
  if (!(hop_s > 0.0)) throw ConfigError("model: hop_s must be positive");
}

NetworkShape ModelConfig::shape() const {
  validate();
  NetworkShape s;
  s.n_inputs = kNumSlots;
  s.state_hidden = state_hidden;
  s.traj_hidden = traj_hidden;
  s.attn_dim = attn_dim;
  s.n_heads = n_heads_attn;
  s.context = context;
  s.architecture = architecture;
  return s;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
  if (!(lambda_pos >= 0.0) || !(lambda_sta >= 0.0)) throw ConfigError("train: loss weights must be >= 0");
  if (!(val_fraction > 0.0 && val_fraction < 0.5)) throw ConfigError("train: val_fraction must lie in (0, 0.5)");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (early_stop_patience < 1) throw ConfigError("train: early_stop_patience must be >= 1");
  if (!(clip_norm > 0.0) || !(huber_delta > 0.0)) throw ConfigError("train: clip_norm and huber_delta must be positive");
  if (chunk < 1) throw ConfigError("train: chunk must be >= 1");
}

Setting setting(int k) {
  Setting s;
  switch (k) {
    case 1:
      break;
    case 2:
      s.model.state_hidden = 128;
      break;
    case 3:
      s.model.state_hidden = 512;
      break;
    case 4:
      s.model.traj_hidden = 256;
      break;
    case 5:
      s.train.learning_rate = 1e-3;
      s.train.lambda_pos = 0.5;
      s.train.lambda_sta = 1.5;
      break;
    default:
      throw ConfigError("setting must be 1..5, got " + std::to_string(k));
  }
  return s;
}

std::string to_string(Architecture a) { return a == Architecture::SelfAttention ? "attention" : "recurrent"; }

Architecture architecture_from_string(std::string_view s) {
  if (s == "attention") return Architecture::SelfAttention;
  if (s == "recurrent") return Architecture::Recurrent;
  throw ConfigError("unknown architecture '" + std::string(s) + "'");
}

FrameSequence to_frames(const LabeledSequence& seq, double hop_s) {
  if (!(hop_s > 0.0)) throw ConfigError("to_frames: hop_s must be positive");
  const std::size_t hop = window_samples(hop_s, seq.f_s);
  const std::size_t n = seq.size() / hop;
  FrameSequence out;
  out.hop_s = hop_s;
  out.ts.resize(n);
  out.x.resize(kNumSlots, static_cast<Eigen::Index>(n));
  out.valid.resize(n);
  out.label.resize(n);
  out.pos.resize(2, static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t last = (k + 1) * hop - 1;
    std::array<double, kNumSlots> sum{};
    for (std::size_t j = k * hop; j <= last; ++j) {
      for (std::size_t s = 0; s < kNumSlots; ++s) sum[s] += seq.features[j].v[s];
    }
    bool ok = true;
    for (std::size_t s = 0; s < kNumSlots; ++s) {
      const double v = sum[s] / static_cast<double>(hop);
      out.x(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) = v;
      ok = ok && std::isfinite(v);
    }
    out.valid[k] = ok ? 1 : 0;
    out.ts[k] = static_cast<double>(last) / seq.f_s;
    out.label[k] = seq.real[last];
    out.pos.col(static_cast<Eigen::Index>(k)) = seq.traj.pos[last];
  }
  return out;
}

FrameSequence to_frames(std::span<const FeatureFrame> features, double hop_s) {
  if (!(hop_s > 0.0)) throw ConfigError("to_frames: hop_s must be positive");
  FrameSequence out;
  out.hop_s = hop_s;
  if (features.empty()) {
    out.x.resize(kNumSlots, 0);
    return out;
  }
  std::size_t group = 1;
  if (features.size() > 1) {
    const double dt = (features.back().ts - features.front().ts) / static_cast<double>(features.size() - 1);
    if (dt > 0.0) group = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(hop_s / dt)));
  }
  const std::size_t n = features.size() / group;
  out.ts.resize(n);
  out.x.resize(kNumSlots, static_cast<Eigen::Index>(n));
  out.valid.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    bool ok = true;
    for (std::size_t s = 0; s < kNumSlots; ++s) {
      double sum = 0.0;
      for (std::size_t j = k * group; j < (k + 1) * group; ++j) sum += features[j].v[s];
      const double v = sum / static_cast<double>(group);
      out.x(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) = v;
      ok = ok && std::isfinite(v);
    }
    out.valid[k] = ok ? 1 : 0;
    out.ts[k] = features[(k + 1) * group - 1].ts;
  }
  return out;
}

Normalizer Normalizer::fit(std::span<const FrameSequence> data) {
  std::array<double, kNumSlots> sum{}, sum2{};
  std::size_t n = 0;
  for (const auto& f : data) {
    for (std::size_t k = 0; k < f.size(); ++k) {
      if (!f.valid[k]) continue;
      ++n;
      for (std::size_t s = 0; s < kNumSlots; ++s) {
        const double v = f.x(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k));
        sum[s] += v;
        sum2[s] += v * v;
      }
    }
  }
  if (n == 0) throw TrainingError("normalizer: no valid frames");
  Normalizer out;
  for (std::size_t s = 0; s < kNumSlots; ++s) {
    out.mean[s] = sum[s] / static_cast<double>(n);
    const double var = sum2[s] / static_cast<double>(n) - out.mean[s] * out.mean[s];
    out.std[s] = std::max(1e-6, std::sqrt(std::max(0.0, var)));
  }
  return out;
}

Sample InverseModel::prepare(const FrameSequence& f) const {
  Sample s;
  const auto T = static_cast<Eigen::Index>(f.size());
  s.x = Eigen::MatrixXd::Zero(kNumSlots, T);
  s.valid = f.valid;
  for (Eigen::Index k = 0; k < T; ++k) {
    if (!f.valid[static_cast<std::size_t>(k)]) continue;
    for (std::size_t j = 0; j < kNumSlots; ++j) {
      if (!config.feature_mask[j]) continue;
      const auto r = static_cast<Eigen::Index>(j);
      s.x(r, k) = (f.x(r, k) - normalizer.mean[j]) / normalizer.std[j];
    }
  }
  if (f.labeled()) {
    s.label.resize(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) s.label[k] = index_of(f.label[k]);
    s.pos = f.pos;
  }
  return s;
}

namespace {

FramePrediction make_prediction(std::size_t frame, double ts, const Eigen::Matrix<double, 6, 1>& y) {
  FramePrediction p;
  p.frame = frame;
  p.ts = ts;
  for (int c = 0; c < 4; ++c) p.probs[static_cast<std::size_t>(c)] = y(c);
  const auto best = static_cast<std::size_t>(std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin());
  p.event = static_cast<RealEvent>(best);
  p.confidence = p.probs[best];
  if (p.event != RealEvent::Absence) p.pos = Point2(y(4), y(5));
  return p;
}

}  // namespace

InferenceSession::InferenceSession(const InverseModel& model)
    : model_(&model), net_(model.config.shape()), stream_(net_, model.params) {}

std::optional<FramePrediction> InferenceSession::push(double ts, const std::array<double, kNumSlots>& raw) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(kNumSlots);
  bool valid = true;
  for (double v : raw) valid = valid && std::isfinite(v);
  if (valid) {
    for (std::size_t j = 0; j < kNumSlots; ++j) {
      if (model_->config.feature_mask[j]) {
        x(static_cast<Eigen::Index>(j)) = (raw[j] - model_->normalizer.mean[j]) / model_->normalizer.std[j];
      }
    }
  }
  const auto y = stream_.step(x, valid);
  const std::size_t frame = frame_++;
  if (!valid) return std::nullopt;
  return make_prediction(frame, ts, y);
}

std::vector<FramePrediction> infer(const InverseModel& model, const FrameSequence& frames, const WarningSink& warn) {
  std::vector<FramePrediction> out;
  InferenceSession session(model);
  for (std::size_t k = 0; k < frames.size(); ++k) {
    std::array<double, kNumSlots> raw{};
    for (std::size_t s = 0; s < kNumSlots; ++s) {
      raw[s] = frames.x(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k));
    }
    if (!frames.valid[k]) raw[0] = kSentinel;
    if (auto p = session.push(frames.ts[k], raw)) out.push_back(*p);
  }
  if (out.empty() && warn) warn("infer: no frame has all feature slots filled; nothing to predict");
  return out;
}

std::vector<FramePrediction> infer(const InverseModel& model, std::span<const FeatureFrame> features,
                                   const WarningSink& warn) {
  if (features.empty()) throw DataError("infer: empty feature sequence");
  return infer(model, to_frames(features, model.config.hop_s), warn);
}

GradCheckResult grad_check(const NetworkShape& shape, std::span<const Sample> batch, const LossWeights& w,
                           std::uint64_t seed, double step) {
  const Network net(shape);
  Eigen::VectorXd theta = net.init(seed, Eigen::Vector2d(1.0, 1.0));
  // Perturb so biases and attention terms are not exactly zero.
  Rng rng(derive_seed(seed, 1));
  std::normal_distribution<double> g(0.0, 0.1);
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) += g(rng);

  Eigen::VectorXd grad;
  std::vector<std::uint8_t> base_pattern;
  net.loss(theta, batch, w, &grad, &base_pattern);
  // Components far below their block's largest entry are dominated by
  // finite-difference roundoff, so they are compared against that scale.
  Eigen::VectorXd floor = Eigen::VectorXd::Constant(theta.size(), 1e-6);
  for (const auto& b : net.blocks()) {
    const auto n = static_cast<Eigen::Index>(b.rows * b.cols);
    if (n == 0) continue;
    const auto off = static_cast<Eigen::Index>(b.offset);
    const double scale = grad.segment(off, n).cwiseAbs().maxCoeff();
    floor.segment(off, n).array() = std::max(1e-6, 1e-3 * scale);
  }
  GradCheckResult r;
  std::vector<std::uint8_t> plus_pattern, minus_pattern;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double keep = theta(i);
    theta(i) = keep + step;
    const double lp = net.loss(theta, batch, w, nullptr, &plus_pattern).loss;
    theta(i) = keep - step;
    const double lm = net.loss(theta, batch, w, nullptr, &minus_pattern).loss;
    theta(i) = keep;
    if (plus_pattern != base_pattern || minus_pattern != base_pattern) {
      ++r.skipped;
      continue;
    }
    const double fd = (lp - lm) / (2.0 * step);
    const double denom = std::max({floor(i), std::abs(fd), std::abs(grad(i))});
    r.max_rel_error = std::max(r.max_rel_error, std::abs(fd - grad(i)) / denom);
    ++r.checked;
  }
  return r;
}

}  // namespace unifi
