#pragma once

// Aggregated inverse model: feature sequences -> per-frame event
// probabilities and positions, trained on simulated datasets.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "unifi/domain.hpp"
#include "unifi/features.hpp"
#include "unifi/network.hpp"
#include "unifi/simulator.hpp"

namespace unifi {

struct ModelConfig {
  std::size_t state_hidden = 256;
  std::size_t traj_hidden = 128;
  /// Causal attention window in frames.
  std::size_t context = 200;
  std::size_t n_heads_attn = 4;
  std::size_t attn_dim = 64;
  Architecture architecture = Architecture::SelfAttention;
  std::uint64_t seed = 1;
  /// Slots fed to the network; the others are zeroed after normalization.
  std::array<bool, kNumSlots> feature_mask{true, true, true, true, true};
  /// Frame spacing at model rate.
  double hop_s = 0.1;

  void validate() const;
  NetworkShape shape() const;
  bool operator==(const ModelConfig&) const = default;
};

enum class Optimizer { Adam, Sgd };

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;  // per frame
  double val_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainConfig {
  std::size_t batch_size = 128;
  double learning_rate = 2e-3;
  double lambda_pos = 1.0;
  double lambda_sta = 1.0;
  int epochs = 40;
  double val_fraction = 0.2;
  int early_stop_patience = 8;
  Optimizer optimizer = Optimizer::Adam;
  double clip_norm = 1.0;
  double huber_delta = 0.5;
  std::uint64_t seed = 1;
  /// Sequences per forward/backward chunk; bounds memory, not the result.
  std::size_t chunk = 16;
  std::function<void(const EpochLog&)> on_epoch;

  void validate() const;
};

struct Setting {
  ModelConfig model;
  TrainConfig train;
};
/// Named configurations 1..5 (state/trajectory widths 256/128, 128/128,
/// 512/128, 256/256; 5 uses lr 1e-3 with lambda_pos 0.5, lambda_sta 1.5).
Setting setting(int k);

/// One sequence resampled to model rate. Features are box-averaged over
/// each hop; labels and positions are taken at the hop's last step.
struct FrameSequence {
  double hop_s = 0.1;
  std::vector<double> ts;
  Eigen::MatrixXd x;  // kNumSlots x T, raw units, NaN allowed
  std::vector<std::uint8_t> valid;
  std::vector<RealEvent> label;  // empty when unlabeled
  Eigen::MatrixXd pos;           // 2 x T, empty when unlabeled
  std::size_t size() const { return ts.size(); }
  bool labeled() const { return label.size() == ts.size(); }
};

FrameSequence to_frames(const LabeledSequence& seq, double hop_s);
/// Unlabeled frames from a feature sequence; frames closer than hop_s are
/// averaged in groups.
FrameSequence to_frames(std::span<const FeatureFrame> features, double hop_s);

struct Normalizer {
  std::array<double, kNumSlots> mean{};
  std::array<double, kNumSlots> std{1.0, 1.0, 1.0, 1.0, 1.0};

  static Normalizer fit(std::span<const FrameSequence> data);
  bool operator==(const Normalizer&) const = default;
};

struct InverseModel {
  ModelConfig config;
  Normalizer normalizer;
  Eigen::VectorXd params;

  /// Normalized, masked network input for a frame sequence.
  Sample prepare(const FrameSequence& f) const;
  Network network() const { return Network(config.shape()); }
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
  std::size_t train_sequences = 0;
  std::size_t val_sequences = 0;
};

struct TrainResult {
  InverseModel model;
  TrainingLog log;
};

/// Deterministic split of sequence indices into (train, validation).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double val_fraction,
                                                                              std::uint64_t seed);

TrainResult train(std::span<const LabeledSequence> dataset, const ModelConfig& mcfg, const TrainConfig& tcfg);
/// Same split and training on sequences already at model rate.
TrainResult train(std::span<const FrameSequence> frames, const ModelConfig& mcfg, const TrainConfig& tcfg);
/// Training on pre-split frame data.
TrainResult train_frames(std::span<const FrameSequence> train_set, std::span<const FrameSequence> val_set,
                         const ModelConfig& mcfg, const TrainConfig& tcfg);

struct FramePrediction {
  std::size_t frame = 0;
  double ts = 0.0;
  std::array<double, 4> probs{};
  RealEvent event = RealEvent::Absence;
  std::optional<Point2> pos;
  double confidence = 0.0;
};

/// Causal per-frame inference. Frames with sentinel slots produce no
/// prediction; an all-sentinel input yields an empty result and a warning.
std::vector<FramePrediction> infer(const InverseModel& model, const FrameSequence& frames,
                                   const WarningSink& warn = {});
std::vector<FramePrediction> infer(const InverseModel& model, std::span<const FeatureFrame> features,
                                   const WarningSink& warn = {});

/// Online inference, one model-rate frame at a time.
class InferenceSession {
 public:
  explicit InferenceSession(const InverseModel& model);
  std::optional<FramePrediction> push(double ts, const std::array<double, kNumSlots>& raw);

 private:
  const InverseModel* model_;
  Network net_;
  StreamingNetwork stream_;
  std::size_t frame_ = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates whose +-step crosses a ReLU or Huber kink.
  std::size_t skipped = 0;
};

/// Analytic vs central-difference gradient (step 1e-5) of the summed loss.
GradCheckResult grad_check(const NetworkShape& shape, std::span<const Sample> batch, const LossWeights& w,
                           std::uint64_t seed, double step = 1e-5);

void save_model(std::ostream& os, const InverseModel& m);
InverseModel load_model(std::istream& is);
void save_model(const std::filesystem::path& path, const InverseModel& m);
InverseModel load_model(const std::filesystem::path& path);

std::string to_string(Architecture a);
Architecture architecture_from_string(std::string_view s);

}  // namespace unifi
