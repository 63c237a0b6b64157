#include "unifi/network.hpp"

#include <cmath>
#include <random>

#include "unifi/error.hpp"
#include "unifi/rng.hpp"

namespace unifi {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr int kClasses = 4;

template <class Scalar>
struct Views {
  using Mat = Eigen::Map<std::conditional_t<std::is_const_v<Scalar>, const MatrixXd, MatrixXd>>;
  using Vec = Eigen::Map<std::conditional_t<std::is_const_v<Scalar>, const VectorXd, VectorXd>>;

  Views(Scalar* base, const std::vector<ParamBlock>& blocks, Architecture arch)
      : W1(at(base, blocks[0])), b1(vec(base, blocks[1])), W2(at(base, blocks[2])), b2(vec(base, blocks[3])),
        Wo(at(base, blocks[4])), bo(vec(base, blocks[5])), We(at(base, blocks[6])), be(vec(base, blocks[7])),
        Wt1(at(base, blocks[8])), bt1(vec(base, blocks[9])), Wt2(at(base, blocks[10])), bt2(vec(base, blocks[11])),
        Wq(at(base, blocks[12])), bq(vec(base, blocks[13])), Wk(at(base, blocks[14])), bk(vec(base, blocks[15])),
        Wv(at(base, blocks[16])), bv(vec(base, blocks[17])), rel(at(base, blocks[18])), sink(vec(base, blocks[19])),
        Wx(at(base, blocks[12])), Wh(at(base, blocks[13])), bl(vec(base, blocks[14])) {
    (void)arch;
  }

  static Mat at(Scalar* base, const ParamBlock& b) {
    return Mat(base + b.offset, static_cast<Index>(b.rows), static_cast<Index>(b.cols));
  }
  static Vec vec(Scalar* base, const ParamBlock& b) {
    return Vec(base + b.offset, static_cast<Index>(b.rows * b.cols));
  }

  Mat W1;
  Vec b1;
  Mat W2;
  Vec b2;
  Mat Wo;
  Vec bo;
  Mat We;
  Vec be;
  Mat Wt1;
  Vec bt1;
  Mat Wt2;
  Vec bt2;
  // Attention blocks (indices 12..19) alias the recurrent ones (12..14);
  // only the set matching the architecture is meaningful.
  Mat Wq;
  Vec bq;
  Mat Wk;
  Vec bk;
  Mat Wv;
  Vec bv;
  Mat rel;
  Vec sink;
  Mat Wx;
  Mat Wh;
  Vec bl;
};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void softmax_cols(MatrixXd& m) {
  for (Index j = 0; j < m.cols(); ++j) {
    auto c = m.col(j);
    c.array() -= c.maxCoeff();
    c = c.array().exp();
    c /= c.sum();
  }
}

/// Ranges of sequence columns in the concatenated batch.
struct Layout {
  std::vector<Index> offset;
  std::vector<Index> length;
  Index total = 0;
};

Layout layout_of(std::span<const Sample> batch) {
  Layout l;
  for (const auto& s : batch) {
    l.offset.push_back(l.total);
    l.length.push_back(static_cast<Index>(s.size()));
    l.total += static_cast<Index>(s.size());
  }
  return l;
}

struct AttentionCache {
  // Per (sequence, head): softmax weights, keys x queries, and the weight
  // left on the sink per query.
  std::vector<MatrixXd> probs;
  std::vector<VectorXd> sink;
};

struct LstmCache {
  MatrixXd gates;  // 4D x N, post-activation (i, f, g, o)
  MatrixXd c;      // D x N
  MatrixXd h;      // D x N
};

}  // namespace

Network::Network(const NetworkShape& shape) : shape_(shape) {
  if (shape.n_inputs < 1 || shape.state_hidden < 1 || shape.traj_hidden < 1 || shape.attn_dim < 1 ||
      shape.n_heads < 1 || shape.context < 1) {
    throw ConfigError("network: all dimensions must be positive");
  }
  if (shape.attn_dim % shape.n_heads != 0) throw ConfigError("network: attn_dim must be divisible by n_heads");
  const std::size_t H = shape.state_hidden, D = shape.attn_dim, T = shape.traj_hidden;
  auto add = [&](const char* name, std::size_t r, std::size_t c) {
    blocks_.push_back({name, r, c, n_params_});
    n_params_ += r * c;
  };
  add("enc1.w", H, shape.n_inputs);
  add("enc1.b", H, 1);
  add("enc2.w", H, H);
  add("enc2.b", H, 1);
  add("ctx_out.w", H, D);
  add("ctx_out.b", H, 1);
  add("event.w", kClasses, H);
  add("event.b", kClasses, 1);
  add("traj1.w", T, H);
  add("traj1.b", T, 1);
  add("traj2.w", 2, T);
  add("traj2.b", 2, 1);
  if (shape.architecture == Architecture::SelfAttention) {
    add("attn.q.w", D, H);
    add("attn.q.b", D, 1);
    add("attn.k.w", D, H);
    add("attn.k.b", D, 1);
    add("attn.v.w", D, H);
    add("attn.v.b", D, 1);
    add("attn.rel", shape.n_heads, shape.context);
    add("attn.sink", shape.n_heads, 1);
  } else {
    add("lstm.wx", 4 * D, H);
    add("lstm.wh", 4 * D, D);
    add("lstm.b", 4 * D, 1);
    // Pad so the attention aliases in Views stay in range.
    for (int i = 0; i < 5; ++i) blocks_.push_back({"unused", 0, 0, n_params_});
  }
}

VectorXd Network::init(std::uint64_t seed, const Eigen::Vector2d& pos_mean) const {
  VectorXd theta = VectorXd::Zero(static_cast<Index>(n_params_));
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (const auto& b : blocks_) {
    const bool weight = b.cols > 1 && b.name.find(".w") != std::string::npos;
    if (!weight) continue;
    const bool relu_follows = b.name == "enc1.w" || b.name == "enc2.w" || b.name == "traj1.w";
    const double fan_in = static_cast<double>(b.cols);
    const double sd = relu_follows ? std::sqrt(2.0 / fan_in) : std::sqrt(1.0 / fan_in);
    for (std::size_t i = 0; i < b.rows * b.cols; ++i) theta(static_cast<Index>(b.offset + i)) = sd * g(rng);
  }
  for (const auto& b : blocks_) {
    if (b.name == "traj2.b") {
      theta(static_cast<Index>(b.offset)) = pos_mean.x();
      theta(static_cast<Index>(b.offset + 1)) = pos_mean.y();
    }
    if (b.name == "lstm.b") {
      // Forget gate starts open.
      const std::size_t D = shape_.attn_dim;
      for (std::size_t i = D; i < 2 * D; ++i) theta(static_cast<Index>(b.offset + i)) = 1.0;
    }
  }
  return theta;
}

LossStats Network::loss(const VectorXd& theta, std::span<const Sample> batch, const LossWeights& w, VectorXd* grad,
                        std::vector<std::uint8_t>* kink_pattern, Output* outputs) const {
  if (static_cast<std::size_t>(theta.size()) != n_params_) throw TrainingError("network: parameter size mismatch");
  const NetworkShape& s = shape_;
  const Index D = static_cast<Index>(s.attn_dim);
  const Index heads = static_cast<Index>(s.n_heads), dh = D / heads, C = static_cast<Index>(s.context);
  const bool attn = s.architecture == Architecture::SelfAttention;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Views<const double> P(theta.data(), blocks_, s.architecture);

  const Layout lay = layout_of(batch);
  const Index N = lay.total;
  MatrixXd X(static_cast<Index>(s.n_inputs), N);
  std::vector<std::uint8_t> valid(static_cast<std::size_t>(N));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch[b].x.rows() != X.rows()) throw TrainingError("network: sample has the wrong input width");
    X.middleCols(lay.offset[b], lay.length[b]) = batch[b].x;
    std::copy(batch[b].valid.begin(), batch[b].valid.end(), valid.begin() + lay.offset[b]);
  }

  // Encoder.
  MatrixXd Z1 = (P.W1 * X).colwise() + P.b1;
  MatrixXd H1 = Z1.cwiseMax(0.0);
  MatrixXd Z2 = (P.W2 * H1).colwise() + P.b2;
  MatrixXd E = Z2.cwiseMax(0.0);

  // Temporal block.
  MatrixXd A = MatrixXd::Zero(D, N);
  MatrixXd Q, K, V;
  AttentionCache ac;
  LstmCache lc;
  if (attn) {
    Q = (P.Wq * E).colwise() + P.bq;
    K = (P.Wk * E).colwise() + P.bk;
    V = (P.Wv * E).colwise() + P.bv;
    ac.probs.resize(batch.size() * static_cast<std::size_t>(heads));
    ac.sink.resize(batch.size() * static_cast<std::size_t>(heads));
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Index o = lay.offset[b], T = lay.length[b];
      for (Index h = 0; h < heads; ++h) {
        const std::size_t slot = b * static_cast<std::size_t>(heads) + static_cast<std::size_t>(h);
        // Scores: rows are keys, columns are queries.
        MatrixXd S = K.block(h * dh, o, dh, T).transpose() * Q.block(h * dh, o, dh, T);
        VectorXd p0(T);
        for (Index t = 0; t < T; ++t) {
          const Index s0 = std::max<Index>(0, t - C + 1);
          double m = P.sink(h);
          for (Index k = s0; k <= t; ++k) {
            if (!valid[static_cast<std::size_t>(o + k)]) continue;
            S(k, t) = scale * S(k, t) + P.rel(h, t - k);
            m = std::max(m, S(k, t));
          }
          double z = std::exp(P.sink(h) - m);
          p0(t) = z;
          for (Index k = 0; k < T; ++k) {
            if (k < s0 || k > t || !valid[static_cast<std::size_t>(o + k)]) {
              S(k, t) = 0.0;
            } else {
              S(k, t) = std::exp(S(k, t) - m);
              z += S(k, t);
            }
          }
          S.col(t) /= z;
          p0(t) /= z;
        }
        A.block(h * dh, o, dh, T).noalias() = V.block(h * dh, o, dh, T) * S;
        ac.probs[slot] = std::move(S);
        ac.sink[slot] = std::move(p0);
      }
    }
  } else {
    const MatrixXd GX = P.Wx * E;
    lc.gates.resize(4 * D, N);
    lc.c.resize(D, N);
    lc.h.resize(D, N);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      VectorXd h = VectorXd::Zero(D), c = VectorXd::Zero(D);
      const Index o = lay.offset[b];
      for (Index t = 0; t < lay.length[b]; ++t) {
        const Index col = o + t;
        if (valid[static_cast<std::size_t>(col)]) {
          VectorXd z = GX.col(col) + P.Wh * h + P.bl;
          for (Index i = 0; i < D; ++i) {
            z(i) = sigmoid(z(i));
            z(D + i) = sigmoid(z(D + i));
            z(2 * D + i) = std::tanh(z(2 * D + i));
            z(3 * D + i) = sigmoid(z(3 * D + i));
          }
          c = z.segment(D, D).cwiseProduct(c) + z.head(D).cwiseProduct(z.segment(2 * D, D));
          h = z.tail(D).cwiseProduct(c.array().tanh().matrix());
          lc.gates.col(col) = z;
        } else {
          lc.gates.col(col).setZero();
        }
        lc.c.col(col) = c;
        lc.h.col(col) = h;
      }
    }
    A = lc.h;
  }
  MatrixXd Zc = ((P.Wo * A).colwise() + P.bo) + E;

  // Heads.
  MatrixXd probs = (P.We * Zc).colwise() + P.be;
  softmax_cols(probs);
  MatrixXd G1 = (P.Wt1 * Zc).colwise() + P.bt1;
  MatrixXd G = G1.cwiseMax(0.0);
  MatrixXd pos = (P.Wt2 * G).colwise() + P.bt2;

  if (kink_pattern) {
    kink_pattern->clear();
    for (const MatrixXd* m : {&Z1, &Z2, &G1}) {
      for (Index i = 0; i < m->size(); ++i) kink_pattern->push_back(m->data()[i] > 0.0);
    }
  }

  if (outputs) {
    outputs->probs = probs;
    outputs->pos = pos;
  }

  LossStats st;
  MatrixXd dLogits = MatrixXd::Zero(kClasses, N);
  MatrixXd dPos = MatrixXd::Zero(2, N);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Sample& smp = batch[b];
    for (Index t = 0; t < lay.length[b]; ++t) {
      const Index col = lay.offset[b] + t;
      if (!valid[static_cast<std::size_t>(col)]) continue;
      const int y = smp.label[static_cast<std::size_t>(t)];
      ++st.frames;
      Index arg;
      probs.col(col).maxCoeff(&arg);
      st.correct += arg == y;
      const double ce = -std::log(std::max(probs(y, col), 1e-300));
      st.ce += ce;
      st.loss += w.sta * ce;
      dLogits.col(col) = w.sta * probs.col(col);
      dLogits(y, col) -= w.sta;
      if (y != 0) {
        ++st.pos_frames;
        const Eigen::Vector2d diff = pos.col(col) - smp.pos.col(t);
        const double r = diff.norm();
        double l;
        Eigen::Vector2d g;
        if (r <= w.huber_delta) {
          l = 0.5 * r * r;
          g = diff;
        } else {
          l = w.huber_delta * (r - 0.5 * w.huber_delta);
          g = w.huber_delta * diff / r;
        }
        if (kink_pattern) kink_pattern->push_back(r > w.huber_delta);
        st.pos += l;
        st.loss += w.pos * l;
        dPos.col(col) = w.pos * g;
      }
    }
  }
  if (!grad) return st;

  grad->setZero(static_cast<Index>(n_params_));
  Views<double> dP(grad->data(), blocks_, s.architecture);

  dP.Wt2.noalias() = dPos * G.transpose();
  dP.bt2 = dPos.rowwise().sum();
  MatrixXd dG1 = (P.Wt2.transpose() * dPos).cwiseProduct((G1.array() > 0.0).cast<double>().matrix());
  dP.Wt1.noalias() = dG1 * Zc.transpose();
  dP.bt1 = dG1.rowwise().sum();
  dP.We.noalias() = dLogits * Zc.transpose();
  dP.be = dLogits.rowwise().sum();
  MatrixXd dZc = P.Wt1.transpose() * dG1;
  dZc.noalias() += P.We.transpose() * dLogits;

  MatrixXd dE = dZc;
  dP.Wo.noalias() = dZc * A.transpose();
  dP.bo = dZc.rowwise().sum();
  MatrixXd dA = P.Wo.transpose() * dZc;

  if (attn) {
    MatrixXd dQ(D, N), dK(D, N), dV(D, N);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Index o = lay.offset[b], T = lay.length[b];
      for (Index h = 0; h < heads; ++h) {
        const std::size_t slot = b * static_cast<std::size_t>(heads) + static_cast<std::size_t>(h);
        const MatrixXd& Pr = ac.probs[slot];
        const VectorXd& p0 = ac.sink[slot];
        const auto dAh = dA.block(h * dh, o, dh, T);
        MatrixXd dS = V.block(h * dh, o, dh, T).transpose() * dAh;
        for (Index t = 0; t < T; ++t) {
          const double mean = Pr.col(t).dot(dS.col(t));
          dS.col(t) = Pr.col(t).cwiseProduct((dS.col(t).array() - mean).matrix());
          dP.sink(h) -= p0(t) * mean;
          const Index s0 = std::max<Index>(0, t - C + 1);
          for (Index k = s0; k <= t; ++k) dP.rel(h, t - k) += dS(k, t);
        }
        dV.block(h * dh, o, dh, T).noalias() = dAh * Pr.transpose();
        dQ.block(h * dh, o, dh, T).noalias() = scale * (K.block(h * dh, o, dh, T) * dS);
        dK.block(h * dh, o, dh, T).noalias() = scale * (Q.block(h * dh, o, dh, T) * dS.transpose());
      }
    }
    dP.Wq.noalias() = dQ * E.transpose();
    dP.bq = dQ.rowwise().sum();
    dP.Wk.noalias() = dK * E.transpose();
    dP.bk = dK.rowwise().sum();
    dP.Wv.noalias() = dV * E.transpose();
    dP.bv = dV.rowwise().sum();
    dE.noalias() += P.Wq.transpose() * dQ;
    dE.noalias() += P.Wk.transpose() * dK;
    dE.noalias() += P.Wv.transpose() * dV;
  } else {
    MatrixXd dZ = MatrixXd::Zero(4 * D, N);  // pre-activation gate gradients
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Index o = lay.offset[b];
      VectorXd dh_next = VectorXd::Zero(D), dc_next = VectorXd::Zero(D);
      for (Index t = lay.length[b] - 1; t >= 0; --t) {
        const Index col = o + t;
        VectorXd dh = dA.col(col) + dh_next;
        if (!valid[static_cast<std::size_t>(col)]) {
          dh_next = dh;  // state passes through unchanged
          continue;
        }
        const auto z = lc.gates.col(col);
        const VectorXd c_prev = t > 0 ? VectorXd(lc.c.col(col - 1)) : VectorXd::Zero(D);
        const VectorXd tc = lc.c.col(col).array().tanh();
        VectorXd dc = dc_next + dh.cwiseProduct(z.tail(D)).cwiseProduct((1.0 - tc.array().square()).matrix());
        auto dz = dZ.col(col);
        for (Index i = 0; i < D; ++i) {
          const double gi = z(i), gf = z(D + i), gg = z(2 * D + i), go = z(3 * D + i);
          dz(i) = dc(i) * gg * gi * (1.0 - gi);
          dz(D + i) = dc(i) * c_prev(i) * gf * (1.0 - gf);
          dz(2 * D + i) = dc(i) * gi * (1.0 - gg * gg);
          dz(3 * D + i) = dh(i) * tc(i) * go * (1.0 - go);
        }
        dc_next = dc.cwiseProduct(z.segment(D, D));
        dh_next = P.Wh.transpose() * dz;
      }
    }
    // h_{t-1} for each valid column (zero at sequence start, carried over invalid frames).
    MatrixXd Hprev = MatrixXd::Zero(D, N);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      for (Index t = 1; t < lay.length[b]; ++t) Hprev.col(lay.offset[b] + t) = lc.h.col(lay.offset[b] + t - 1);
    }
    dP.Wx.noalias() = dZ * E.transpose();
    dP.Wh.noalias() = dZ * Hprev.transpose();
    dP.bl = dZ.rowwise().sum();
    dE.noalias() += P.Wx.transpose() * dZ;
  }

  MatrixXd dZ2 = dE.cwiseProduct((Z2.array() > 0.0).cast<double>().matrix());
  dP.W2.noalias() = dZ2 * H1.transpose();
  dP.b2 = dZ2.rowwise().sum();
  MatrixXd dZ1 = (P.W2.transpose() * dZ2).cwiseProduct((Z1.array() > 0.0).cast<double>().matrix());
  dP.W1.noalias() = dZ1 * X.transpose();
  dP.b1 = dZ1.rowwise().sum();
  return st;
}

Network::Output Network::forward(const VectorXd& theta, const Sample& sample) const {
  StreamingNetwork sn(*this, theta);
  Output out;
  const Index T = static_cast<Index>(sample.size());
  out.probs.resize(kClasses, T);
  out.pos.resize(2, T);
  for (Index t = 0; t < T; ++t) {
    const auto y = sn.step(sample.x.col(t), sample.valid[static_cast<std::size_t>(t)] != 0);
    out.probs.col(t) = y.head(kClasses);
    out.pos.col(t) = y.tail(2);
  }
  return out;
}

Network::Output Network::forward_batch(const VectorXd& theta, const Sample& sample) const {
  Sample s = sample;
  s.label.assign(s.size(), 0);
  if (s.pos.cols() != s.x.cols()) s.pos = MatrixXd::Zero(2, s.x.cols());
  Output out;
  loss(theta, std::span(&s, 1), {}, nullptr, nullptr, &out);
  return out;
}

StreamingNetwork::StreamingNetwork(const Network& net, const VectorXd& theta) : net_(&net), theta_(&theta) {
  if (static_cast<std::size_t>(theta.size()) != net.n_params()) {
    throw TrainingError("network: parameter size mismatch");
  }
  reset();
}

void StreamingNetwork::reset() {
  const auto& s = net_->shape();
  const Index D = static_cast<Index>(s.attn_dim);
  t_ = 0;
  keys_ = MatrixXd::Zero(D, static_cast<Index>(s.context));
  values_ = MatrixXd::Zero(D, static_cast<Index>(s.context));
  key_valid_.assign(s.context, 0);
  h_ = VectorXd::Zero(D);
  c_ = VectorXd::Zero(D);
}

Eigen::Matrix<double, 6, 1> StreamingNetwork::step(const VectorXd& x, bool valid) {
  const auto& s = net_->shape();
  const Index D = static_cast<Index>(s.attn_dim);
  const Index heads = static_cast<Index>(s.n_heads), dh = D / heads, C = static_cast<Index>(s.context);
  const Views<const double> P(theta_->data(), net_->blocks(), s.architecture);

  const VectorXd e = (P.W2 * ((P.W1 * x + P.b1).cwiseMax(0.0)) + P.b2).cwiseMax(0.0);
  VectorXd a = VectorXd::Zero(D);
  if (s.architecture == Architecture::SelfAttention) {
    const Index slot = static_cast<Index>(t_ % s.context);
    keys_.col(slot) = P.Wk * e + P.bk;
    values_.col(slot) = P.Wv * e + P.bv;
    key_valid_[static_cast<std::size_t>(slot)] = valid ? 1 : 0;
    const VectorXd q = P.Wq * e + P.bq;
    const Index w = std::min<Index>(static_cast<Index>(t_) + 1, C);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    VectorXd sc(w + 1);
    for (Index h = 0; h < heads; ++h) {
      sc(0) = P.sink(h);
      // j indexes keys oldest-first, matching the batch pass.
      for (Index j = 0; j < w; ++j) {
        const Index lag = w - 1 - j;
        const Index col = static_cast<Index>((t_ + static_cast<std::size_t>(C) - static_cast<std::size_t>(lag)) %
                                             s.context);
        sc(j + 1) = key_valid_[static_cast<std::size_t>(col)]
                        ? scale * keys_.col(col).segment(h * dh, dh).dot(q.segment(h * dh, dh)) + P.rel(h, lag)
                        : -std::numeric_limits<double>::infinity();
      }
      sc = (sc.array() - sc.maxCoeff()).exp();
      sc /= sc.sum();
      for (Index j = 0; j < w; ++j) {
        if (sc(j + 1) == 0.0) continue;
        const Index lag = w - 1 - j;
        const Index col = static_cast<Index>((t_ + static_cast<std::size_t>(C) - static_cast<std::size_t>(lag)) %
                                             s.context);
        a.segment(h * dh, dh) += sc(j + 1) * values_.col(col).segment(h * dh, dh);
      }
    }
  } else {
    if (valid) {
      VectorXd z = P.Wx * e + P.Wh * h_ + P.bl;
      for (Index i = 0; i < D; ++i) {
        z(i) = sigmoid(z(i));
        z(D + i) = sigmoid(z(D + i));
        z(2 * D + i) = std::tanh(z(2 * D + i));
        z(3 * D + i) = sigmoid(z(3 * D + i));
      }
      c_ = z.segment(D, D).cwiseProduct(c_) + z.head(D).cwiseProduct(z.segment(2 * D, D));
      h_ = z.tail(D).cwiseProduct(c_.array().tanh().matrix());
    }
    a = h_;
  }
  ++t_;
  const VectorXd zc = P.Wo * a + P.bo + e;
  VectorXd logits = P.We * zc + P.be;
  logits.array() -= logits.maxCoeff();
  logits = logits.array().exp();
  logits /= logits.sum();
  const VectorXd pos = P.Wt2 * (P.Wt1 * zc + P.bt1).cwiseMax(0.0) + P.bt2;
  Eigen::Matrix<double, 6, 1> out;
  out.head<4>() = logits;
  out.tail<2>() = pos;
  return out;
}

}  // namespace unifi
