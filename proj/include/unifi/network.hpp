#pragma once

// Hand-differentiated sequence network behind the inverse model: per-frame
// encoder, causal temporal block (self-attention or LSTM) and two heads.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace unifi {

enum class Architecture { SelfAttention, Recurrent };

struct NetworkShape {
  std::size_t n_inputs = 5;
  std::size_t state_hidden = 256;
  std::size_t traj_hidden = 128;
  std::size_t attn_dim = 64;
  std::size_t n_heads = 4;
  std::size_t context = 200;
  Architecture architecture = Architecture::SelfAttention;
};

/// One sequence at model rate. `x` holds normalized inputs (zeros on
/// invalid frames); labels and positions are only read by the loss.
struct Sample {
  Eigen::MatrixXd x;  // n_inputs x T
  std::vector<std::uint8_t> valid;
  std::vector<int> label;  // RealEvent index per frame
  Eigen::MatrixXd pos;     // 2 x T
  std::size_t size() const { return static_cast<std::size_t>(x.cols()); }
};

struct LossWeights {
  double sta = 1.0;
  double pos = 1.0;
  double huber_delta = 0.5;
};

struct LossStats {
  double loss = 0.0;  // weighted sum over frames
  double ce = 0.0;
  double pos = 0.0;
  std::size_t frames = 0;      // valid frames
  std::size_t pos_frames = 0;  // valid, non-absence frames
  std::size_t correct = 0;
};

struct ParamBlock {
  std::string name;
  std::size_t rows;
  std::size_t cols;
  std::size_t offset;
};

class Network {
 public:
  explicit Network(const NetworkShape& shape);

  const NetworkShape& shape() const { return shape_; }
  std::size_t n_params() const { return n_params_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }

  struct Output {
    Eigen::MatrixXd probs;  // 4 x T
    Eigen::MatrixXd pos;    // 2 x T
  };

  /// Fresh parameters; the position head starts at `pos_mean`.
  Eigen::VectorXd init(std::uint64_t seed, const Eigen::Vector2d& pos_mean) const;

  /// Summed loss over all valid frames of the batch. When `grad` is given it
  /// receives the gradient of that sum (resized and overwritten).
  LossStats loss(const Eigen::VectorXd& theta, std::span<const Sample> batch, const LossWeights& w,
                 Eigen::VectorXd* grad = nullptr, std::vector<std::uint8_t>* kink_pattern = nullptr,
                 Output* outputs = nullptr) const;

  /// Frame-by-frame pass through StreamingNetwork.
  Output forward(const Eigen::VectorXd& theta, const Sample& sample) const;
  /// Whole-sequence pass as used in training.
  Output forward_batch(const Eigen::VectorXd& theta, const Sample& sample) const;

 private:
  NetworkShape shape_;
  std::vector<ParamBlock> blocks_;
  std::size_t n_params_ = 0;
};

/// Frame-by-frame evaluation with cached keys/values or recurrent state;
/// matches Network::forward on the same prefix.
class StreamingNetwork {
 public:
  StreamingNetwork(const Network& net, const Eigen::VectorXd& theta);
  /// Consumes one normalized input frame; returns probabilities (4) and
  /// position (2) stacked in a 6-vector.
  Eigen::Matrix<double, 6, 1> step(const Eigen::VectorXd& x, bool valid);
  void reset();

 private:
  const Network* net_;
  const Eigen::VectorXd* theta_;
  std::size_t t_ = 0;
  // attention ring buffers (attn_dim x context)
  Eigen::MatrixXd keys_, values_;
  std::vector<std::uint8_t> key_valid_;
  // recurrent state
  Eigen::VectorXd h_, c_;
};

}  // namespace unifi
