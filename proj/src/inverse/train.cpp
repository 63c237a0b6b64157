#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "unifi/error.hpp"
#include "unifi/inverse.hpp"
#include "unifi/rng.hpp"

namespace unifi {
namespace {

LossStats evaluate(const Network& net, const Eigen::VectorXd& theta, const std::vector<Sample>& samples,
                   const LossWeights& w, std::size_t chunk) {
  LossStats total;
  for (std::size_t i = 0; i < samples.size(); i += chunk) {
    const std::size_t n = std::min(chunk, samples.size() - i);
    const LossStats s = net.loss(theta, std::span(samples.data() + i, n), w);
    total.loss += s.loss;
    total.ce += s.ce;
    total.pos += s.pos;
    total.frames += s.frames;
    total.pos_frames += s.pos_frames;
    total.correct += s.correct;
  }
  return total;
}

double per_frame(double v, std::size_t n) { return n == 0 ? 0.0 : v / static_cast<double>(n); }

}  // namespace

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double val_fraction,
                                                                              std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, 0x5b117));
  std::shuffle(idx.begin(), idx.end(), rng);
  std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  if (n >= 2) n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  else n_val = 0;
  std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> tr(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(val.begin(), val.end());
  std::sort(tr.begin(), tr.end());
  return {tr, val};
}

TrainResult train(std::span<const LabeledSequence> dataset, const ModelConfig& mcfg, const TrainConfig& tcfg) {
  tcfg.validate();
  if (dataset.size() < 2) throw TrainingError("train: need at least two sequences");
  std::vector<FrameSequence> frames;
  frames.reserve(dataset.size());
  for (const auto& seq : dataset) frames.push_back(to_frames(seq, mcfg.hop_s));
  return train(std::span<const FrameSequence>(frames), mcfg, tcfg);
}

TrainResult train(std::span<const FrameSequence> frames, const ModelConfig& mcfg, const TrainConfig& tcfg) {
  tcfg.validate();
  if (frames.size() < 2) throw TrainingError("train: need at least two sequences");
  const auto [tr_idx, val_idx] = split_indices(frames.size(), tcfg.val_fraction, tcfg.seed);
  std::vector<FrameSequence> tr, val;
  for (std::size_t i : tr_idx) tr.push_back(frames[i]);
  for (std::size_t i : val_idx) val.push_back(frames[i]);
  return train_frames(tr, val, mcfg, tcfg);
}

TrainResult train_frames(std::span<const FrameSequence> train_set, std::span<const FrameSequence> val_set,
                         const ModelConfig& mcfg, const TrainConfig& tcfg) {
  mcfg.validate();
  tcfg.validate();
  if (train_set.empty()) throw TrainingError("train: empty training set");

  std::array<std::size_t, kNumRealEvents> seen{};
  Eigen::Vector2d pos_sum = Eigen::Vector2d::Zero();
  std::size_t pos_n = 0;
  for (const auto& f : train_set) {
    if (!f.labeled()) throw TrainingError("train: unlabeled sequence in training set");
    for (std::size_t k = 0; k < f.size(); ++k) {
      if (!f.valid[k]) continue;
      ++seen[static_cast<std::size_t>(f.label[k])];
      if (f.label[k] != RealEvent::Absence) {
        pos_sum += f.pos.col(static_cast<Eigen::Index>(k));
        ++pos_n;
      }
    }
  }
  for (RealEvent e : kAllRealEvents) {
    if (seen[static_cast<std::size_t>(e)] == 0) {
      throw TrainingError("train: training data has no valid '" + std::string(to_string(e)) + "' frames");
    }
  }

  TrainResult result;
  InverseModel& model = result.model;
  model.config = mcfg;
  model.normalizer = Normalizer::fit(train_set);
  const Network net(mcfg.shape());
  model.params = net.init(mcfg.seed, pos_n ? Eigen::Vector2d(pos_sum / static_cast<double>(pos_n))
                                           : Eigen::Vector2d::Zero());

  std::vector<Sample> tr, val;
  for (const auto& f : train_set) tr.push_back(model.prepare(f));
  for (const auto& f : val_set) val.push_back(model.prepare(f));
  const LossWeights w{tcfg.lambda_sta, tcfg.lambda_pos, tcfg.huber_delta};

  Eigen::VectorXd theta = model.params;
  Eigen::VectorXd best = theta;
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(theta.size()), m2 = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd grad, chunk_grad;
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::size_t step = 0;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  Rng rng(derive_seed(tcfg.seed, 0xba7c4));
  std::vector<std::size_t> order(tr.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Sample> batch;

  result.log.train_sequences = tr.size();
  result.log.val_sequences = val.size();
  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    LossStats ep;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += tcfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + tcfg.batch_size);
      grad.setZero(theta.size());
      LossStats bs;
      for (std::size_t c0 = b0; c0 < b1; c0 += tcfg.chunk) {
        batch.clear();
        for (std::size_t i = c0; i < std::min(b1, c0 + tcfg.chunk); ++i) batch.push_back(tr[order[i]]);
        const LossStats s = net.loss(theta, batch, w, &chunk_grad);
        grad += chunk_grad;
        bs.loss += s.loss;
        bs.frames += s.frames;
        bs.correct += s.correct;
      }
      if (bs.frames == 0) continue;
      grad /= static_cast<double>(bs.frames);
      const double norm = grad.norm();
      if (!std::isfinite(bs.loss) || !std::isfinite(norm)) {
        std::ostringstream msg;
        msg << "train: loss diverged at epoch " << epoch << ", batch starting at " << b0 << " (loss " << bs.loss
            << ", gradient norm " << norm << ", step " << step << ")";
        throw TrainingError(msg.str());
      }
      if (norm > tcfg.clip_norm) grad *= tcfg.clip_norm / norm;
      ++step;
      if (tcfg.optimizer == Optimizer::Adam) {
        m1 = kBeta1 * m1 + (1.0 - kBeta1) * grad;
        m2 = kBeta2 * m2 + (1.0 - kBeta2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
        theta.array() -= tcfg.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + kEps);
      } else {
        theta -= tcfg.learning_rate * grad;
      }
      ep.loss += bs.loss;
      ep.frames += bs.frames;
      ep.correct += bs.correct;
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = per_frame(ep.loss, ep.frames);
    log.train_accuracy = per_frame(static_cast<double>(ep.correct), ep.frames);
    const auto& monitor = val.empty() ? tr : val;
    const LossStats vs = evaluate(net, theta, monitor, w, tcfg.chunk);
    log.val_loss = per_frame(vs.loss, vs.frames);
    log.val_accuracy = per_frame(static_cast<double>(vs.correct), vs.frames);
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.epochs.push_back(log);
    if (tcfg.on_epoch) tcfg.on_epoch(log);

    if (log.val_loss < best_val) {
      best_val = log.val_loss;
      best = theta;
      result.log.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= tcfg.early_stop_patience) {
      break;
    }
  }
  model.params = best;
  return result;
}

}  // namespace unifi
