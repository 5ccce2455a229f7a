#pragma once

// Word-level multi-layer LSTM language model, trained with truncated BPTT
// and plain SGD.
//
// Cell (per layer, column-per-example):
//   z = Wx a + Wh h_prev + b,  z = [i f g o] stacked in that order
//   c = sigmoid(f) * c_prev + sigmoid(i) * tanh(g)
//   h = sigmoid(o) * tanh(c)
// Output scores are Wo h_top + bo. Dropout (inverted) is applied to the
// embedding output, between layers and before the output layer.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stegolstm/corpus.hpp"
#include "stegolstm/error.hpp"
#include "stegolstm/lm.hpp"
#include "stegolstm/random.hpp"

namespace stegolstm {

struct LstmHyperparams {
  int layers = 1;
  int units = 64;
  int embed_dim = 32;
  int unroll_steps = 20;
  int batch_size = 20;
  double lr_init = 20.0;
  double lr_decay = 4.0;
  std::optional<double> clip_norm = 0.25;
  double dropout = 0.0;

  void validate() const {
    if (layers < 1 || units < 1 || embed_dim < 1 || unroll_steps < 1 || batch_size < 1)
      fail(ErrorKind::invalid_argument, "LSTM sizes must be positive");
    if (!(lr_init > 0.0)) fail(ErrorKind::invalid_argument, "lr_init must be > 0");
    if (!(lr_decay > 1.0)) fail(ErrorKind::invalid_argument, "lr_decay must be > 1");
    if (clip_norm && !(*clip_norm > 0.0)) fail(ErrorKind::invalid_argument, "clip_norm must be > 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorKind::invalid_argument, "dropout must be in [0,1)");
  }

  friend bool operator==(const LstmHyperparams&, const LstmHyperparams&) = default;
};

namespace presets {

/// Small enough to train on a laptop CPU in seconds per epoch.
inline LstmHyperparams desk() { return {}; }

inline LstmHyperparams paper_twitter() {
  return {.layers = 2, .units = 600, .embed_dim = 200, .unroll_steps = 25, .batch_size = 20,
          .lr_init = 20.0, .lr_decay = 4.0, .clip_norm = 0.25, .dropout = 0.2};
}

inline LstmHyperparams paper_enron() {
  return {.layers = 3, .units = 600, .embed_dim = 200, .unroll_steps = 20, .batch_size = 20,
          .lr_init = 20.0, .lr_decay = 4.0, .clip_norm = std::nullopt, .dropout = 0.0};
}

}  // namespace presets

/// Offsets of each parameter block inside the flat parameter vector.
struct LstmLayout {
  struct Layer {
    std::size_t wx, wh, b, in;
  };
  std::size_t vocab, embed, units;
  std::size_t embedding;  // embed x vocab, one column per token
  std::vector<Layer> layers;
  std::size_t wo;  // vocab x units
  std::size_t bo;  // vocab
  std::size_t total;

  LstmLayout(std::size_t vocab_size, const LstmHyperparams& hp)
      : vocab(vocab_size), embed(static_cast<std::size_t>(hp.embed_dim)),
        units(static_cast<std::size_t>(hp.units)) {
    std::size_t off = 0;
    embedding = off;
    off += embed * vocab;
    for (int l = 0; l < hp.layers; ++l) {
      Layer layer{};
      layer.in = l == 0 ? embed : units;
      layer.wx = off;
      off += 4 * units * layer.in;
      layer.wh = off;
      off += 4 * units * units;
      layer.b = off;
      off += 4 * units;
      layers.push_back(layer);
    }
    wo = off;
    off += vocab * units;
    bo = off;
    off += vocab;
    total = off;
  }
};

class LstmModel {
 public:
  using Matrix = Eigen::MatrixXd;
  using Vector = Eigen::VectorXd;
  using MatMap = Eigen::Map<Matrix>;
  using ConstMatMap = Eigen::Map<const Matrix>;
  using ConstVecMap = Eigen::Map<const Vector>;

  struct Context {
    std::vector<Vector> h, c;
    friend bool operator==(const Context& a, const Context& b) {
      if (a.h.size() != b.h.size()) return false;
      for (std::size_t l = 0; l < a.h.size(); ++l)
        if (a.h[l] != b.h[l] || a.c[l] != b.c[l]) return false;
      return true;
    }
  };

  LstmModel(LstmHyperparams hp, std::size_t vocab_size, std::uint64_t vocab_hash, TokenId eos)
      : hp_(validated(hp)), vocab_size_(vocab_size), vocab_hash_(vocab_hash), eos_(eos),
        layout_(vocab_size, hp_), params_(layout_.total, 0.0) {
    if (vocab_size < 2) fail(ErrorKind::invalid_argument, "LSTM needs at least two tokens");
    if (eos >= vocab_size) fail(ErrorKind::invalid_argument, "eos id out of range");
  }

  LstmModel(LstmHyperparams hp, const Vocabulary& vocab)
      : LstmModel(hp, vocab.size(), vocab.hash(), vocab.eos_id()) {}

  /// Weights uniform in [-scale, scale]; biases zero.
  void initialize(std::uint64_t seed, double scale = 0.1) {
    Rng rng(seed);
    std::fill(params_.begin(), params_.end(), 0.0);
    auto fill = [&](std::size_t off, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) params_[off + i] = (2.0 * uniform_unit(rng) - 1.0) * scale;
    };
    fill(layout_.embedding, layout_.embed * layout_.vocab);
    for (const auto& l : layout_.layers) {
      fill(l.wx, 4 * layout_.units * l.in);
      fill(l.wh, 4 * layout_.units * layout_.units);
    }
    fill(layout_.wo, layout_.vocab * layout_.units);
  }

  const LstmHyperparams& hyperparams() const { return hp_; }
  const LstmLayout& layout() const { return layout_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::uint64_t vocab_hash() const { return vocab_hash_; }
  TokenId eos_id() const { return eos_; }

  std::span<const double> params() const { return params_; }
  std::span<double> mutable_params() { return params_; }

  // Views into the flat parameter vector.
  ConstMatMap embedding() const { return cmat(layout_.embedding, layout_.embed, layout_.vocab); }
  ConstMatMap wx(std::size_t l) const { return cmat(layout_.layers[l].wx, 4 * layout_.units, layout_.layers[l].in); }
  ConstMatMap wh(std::size_t l) const { return cmat(layout_.layers[l].wh, 4 * layout_.units, layout_.units); }
  ConstVecMap bias(std::size_t l) const { return {params_.data() + layout_.layers[l].b, static_cast<Eigen::Index>(4 * layout_.units)}; }
  ConstMatMap wo() const { return cmat(layout_.wo, layout_.vocab, layout_.units); }
  ConstVecMap bo() const { return {params_.data() + layout_.bo, static_cast<Eigen::Index>(layout_.vocab)}; }

  Context start_context() const {
    Context ctx;
    const auto n = static_cast<Eigen::Index>(layout_.units);
    for (std::size_t l = 0; l < layout_.layers.size(); ++l) {
      ctx.h.push_back(Vector::Zero(n));
      ctx.c.push_back(Vector::Zero(n));
    }
    return ctx;
  }

  /// Unnormalized log-probabilities for the next token.
  Vector next_scores(const Context& ctx) const {
    check_context(ctx);
    return wo() * ctx.h.back() + bo();
  }

  std::vector<double> next_distribution(const Context& ctx) const {
    Vector s = next_scores(ctx);
    return softmax(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())));
  }

  Context advance(const Context& ctx, TokenId token) const {
    if (token >= vocab_size_)
      fail(ErrorKind::invalid_argument, "advance: token index " + std::to_string(token) + " out of range");
    check_context(ctx);
    const auto H = static_cast<Eigen::Index>(layout_.units);
    Context next = ctx;
    Vector input = embedding().col(token);
    for (std::size_t l = 0; l < layout_.layers.size(); ++l) {
      Vector z = wx(l) * input + wh(l) * ctx.h[l] + bias(l);
      auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
      Vector i = z.segment(0, H).unaryExpr(sig);
      Vector f = z.segment(H, H).unaryExpr(sig);
      Vector g = z.segment(2 * H, H).array().tanh();
      Vector o = z.segment(3 * H, H).unaryExpr(sig);
      next.c[l] = f.cwiseProduct(ctx.c[l]) + i.cwiseProduct(g);
      next.h[l] = o.cwiseProduct(next.c[l].array().tanh().matrix());
      input = next.h[l];
    }
    return next;
  }

  friend bool operator==(const LstmModel& a, const LstmModel& b) {
    return a.hp_ == b.hp_ && a.vocab_size_ == b.vocab_size_ && a.vocab_hash_ == b.vocab_hash_ &&
           a.eos_ == b.eos_ && a.params_ == b.params_;
  }

 private:
  static LstmHyperparams validated(const LstmHyperparams& hp) {
    hp.validate();
    return hp;
  }

  ConstMatMap cmat(std::size_t off, std::size_t rows, std::size_t cols) const {
    return {params_.data() + off, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
  }

  void check_context(const Context& ctx) const {
    if (ctx.h.size() != layout_.layers.size() || ctx.c.size() != layout_.layers.size())
      fail(ErrorKind::invalid_argument, "LSTM context does not match model depth");
  }

  LstmHyperparams hp_;
  std::size_t vocab_size_;
  std::uint64_t vocab_hash_;
  TokenId eos_;
  LstmLayout layout_;
  std::vector<double> params_;
};

static_assert(LanguageModel<LstmModel>);

/// Recurrent state for a batch of parallel streams (one column per stream).
struct LstmBatchState {
  std::vector<Eigen::MatrixXd> h, c;

  static LstmBatchState zeros(const LstmModel& m, std::size_t batch) {
    LstmBatchState s;
    const auto H = static_cast<Eigen::Index>(m.layout().units);
    for (std::size_t l = 0; l < m.layout().layers.size(); ++l) {
      s.h.push_back(Eigen::MatrixXd::Zero(H, static_cast<Eigen::Index>(batch)));
      s.c.push_back(Eigen::MatrixXd::Zero(H, static_cast<Eigen::Index>(batch)));
    }
    return s;
  }
};

/// Dropout keep-masks for one segment, already scaled by 1/(1-p). Index
/// [t][k]: k = 0 is the embedding output, k = l feeds layer l, and
/// k = layers is the input to the output projection.
using DropoutMasks = std::vector<std::vector<Eigen::MatrixXd>>;

/// Mean cross-entropy (nats/token) of one time-major segment:
/// inputs[t * batch + b] predicts targets[t * batch + b]. `state` is read
/// as the initial state and overwritten with the final one. When `grad` is
/// non-null it receives dLoss/dParams (same layout as the parameters, not
/// accumulated across calls). Gradients do not flow into the initial state.
inline double lstm_segment_loss(const LstmModel& model, std::span<const TokenId> inputs,
                                std::span<const TokenId> targets, std::size_t batch,
                                LstmBatchState& state, std::vector<double>* grad = nullptr,
                                const DropoutMasks* masks = nullptr) {
  using Eigen::Index;
  using Eigen::MatrixXd;
  const auto& lay = model.layout();
  const std::size_t L = lay.layers.size();
  const auto H = static_cast<Index>(lay.units);
  const auto B = static_cast<Index>(batch);
  if (inputs.size() != targets.size() || batch == 0 || inputs.size() % batch != 0)
    fail(ErrorKind::invalid_argument, "segment shape mismatch");
  const std::size_t T = inputs.size() / batch;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    if (inputs[i] >= lay.vocab || targets[i] >= lay.vocab)
      fail(ErrorKind::invalid_argument, "segment token out of range");

  auto sigmoid = [](const MatrixXd& x) -> MatrixXd {
    return (1.0 + (-x.array()).exp()).inverse().matrix();
  };

  struct LayerCache {
    MatrixXd a, h_prev, c_prev, i, f, g, o, c, tc;
  };
  struct StepCache {
    std::vector<LayerCache> layers;
    MatrixXd top, probs;
  };
  std::vector<StepCache> cache(grad ? T : 0);

  const double scale = 1.0 / static_cast<double>(T * batch);
  double loss = 0.0;
  auto E = model.embedding();
  for (std::size_t t = 0; t < T; ++t) {
    MatrixXd a(static_cast<Index>(lay.embed), B);
    for (Index b = 0; b < B; ++b) a.col(b) = E.col(inputs[t * batch + static_cast<std::size_t>(b)]);
    if (masks) a = a.cwiseProduct((*masks)[t][0]);

    StepCache* sc = grad ? &cache[t] : nullptr;
    if (sc) sc->layers.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
      if (l > 0 && masks) a = a.cwiseProduct((*masks)[t][l]);
      MatrixXd z = model.wx(l) * a + model.wh(l) * state.h[l];
      z.colwise() += model.bias(l);
      MatrixXd i = sigmoid(z.topRows(H));
      MatrixXd f = sigmoid(z.middleRows(H, H));
      MatrixXd g = z.middleRows(2 * H, H).array().tanh().matrix();
      MatrixXd o = sigmoid(z.bottomRows(H));
      MatrixXd c = f.cwiseProduct(state.c[l]) + i.cwiseProduct(g);
      MatrixXd tc = c.array().tanh().matrix();
      MatrixXd h = o.cwiseProduct(tc);
      if (sc) {
        sc->layers[l] = {std::move(a), state.h[l], state.c[l], std::move(i), std::move(f),
                         std::move(g), std::move(o), c, std::move(tc)};
      }
      state.h[l] = h;
      state.c[l] = std::move(c);
      a = std::move(h);
    }
    if (masks) a = a.cwiseProduct((*masks)[t][L]);

    MatrixXd logits = model.wo() * a;
    logits.colwise() += model.bo();
    for (Index b = 0; b < B; ++b) {
      auto col = logits.col(b);
      const double mx = col.maxCoeff();
      col = (col.array() - mx).exp();
      const double sum = col.sum();
      col /= sum;
      const double p = col(static_cast<Index>(targets[t * batch + static_cast<std::size_t>(b)]));
      loss -= std::log(p);
    }
    if (sc) {
      sc->top = std::move(a);
      sc->probs = std::move(logits);
    }
  }
  loss *= scale;
  if (!grad) return loss;

  grad->assign(lay.total, 0.0);
  auto gmat = [&](std::size_t off, std::size_t rows, std::size_t cols) {
    return Eigen::Map<MatrixXd>(grad->data() + off, static_cast<Index>(rows), static_cast<Index>(cols));
  };
  auto dE = gmat(lay.embedding, lay.embed, lay.vocab);
  auto dWo = gmat(lay.wo, lay.vocab, lay.units);
  auto dbo = gmat(lay.bo, lay.vocab, 1);

  std::vector<MatrixXd> dh_next(L, MatrixXd::Zero(H, B));
  std::vector<MatrixXd> dc_next(L, MatrixXd::Zero(H, B));
  for (std::size_t t = T; t-- > 0;) {
    StepCache& sc = cache[t];
    MatrixXd dlogits = sc.probs;
    for (Index b = 0; b < B; ++b)
      dlogits(static_cast<Index>(targets[t * batch + static_cast<std::size_t>(b)]), b) -= 1.0;
    dlogits *= scale;
    dWo.noalias() += dlogits * sc.top.transpose();
    dbo += dlogits.rowwise().sum();
    MatrixXd dh_above = model.wo().transpose() * dlogits;
    if (masks) dh_above = dh_above.cwiseProduct((*masks)[t][L]);

    for (std::size_t l = L; l-- > 0;) {
      LayerCache& lc = sc.layers[l];
      const auto& ll = lay.layers[l];
      MatrixXd dh = dh_above + dh_next[l];
      MatrixXd dtc = dh.cwiseProduct(lc.o);
      MatrixXd dc = dtc.cwiseProduct((1.0 - lc.tc.array().square()).matrix()) + dc_next[l];

      MatrixXd dz(4 * H, B);
      dz.topRows(H) = dc.cwiseProduct(lc.g).cwiseProduct(lc.i.cwiseProduct((1.0 - lc.i.array()).matrix()));
      dz.middleRows(H, H) =
          dc.cwiseProduct(lc.c_prev).cwiseProduct(lc.f.cwiseProduct((1.0 - lc.f.array()).matrix()));
      dz.middleRows(2 * H, H) = dc.cwiseProduct(lc.i).cwiseProduct((1.0 - lc.g.array().square()).matrix());
      dz.bottomRows(H) = dh.cwiseProduct(lc.tc).cwiseProduct(lc.o.cwiseProduct((1.0 - lc.o.array()).matrix()));
      dc_next[l] = dc.cwiseProduct(lc.f);

      gmat(ll.wx, 4 * lay.units, ll.in).noalias() += dz * lc.a.transpose();
      gmat(ll.wh, 4 * lay.units, lay.units).noalias() += dz * lc.h_prev.transpose();
      gmat(ll.b, 4 * lay.units, 1) += dz.rowwise().sum();
      dh_next[l].noalias() = model.wh(l).transpose() * dz;

      MatrixXd da = model.wx(l).transpose() * dz;
      if (masks) da = da.cwiseProduct((*masks)[t][l]);
      if (l > 0) {
        dh_above = std::move(da);
      } else {
        for (Index b = 0; b < B; ++b) dE.col(inputs[t * batch + static_cast<std::size_t>(b)]) += da.col(b);
      }
    }
  }
  return loss;
}

/// params -= lr * grad, with grad first rescaled to global L2 norm
/// `clip_norm` when it is larger. Returns the pre-clip norm.
inline double sgd_step(std::span<double> params, std::span<const double> grad, double lr,
                       std::optional<double> clip_norm) {
  double norm = 0.0;
  for (double g : grad) norm += g * g;
  norm = std::sqrt(norm);
  const double factor = (clip_norm && norm > *clip_norm) ? *clip_norm / norm : 1.0;
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * (factor * grad[i]);
  return norm;
}

struct EpochStats {
  int epoch;            // 0 is the untrained model
  double train_ce;      // mean nats/token over the epoch, NaN for epoch 0
  double valid_ce;      // nats/token
  double learning_rate; // rate used during this epoch
  bool decayed;         // lr was divided by lr_decay after this epoch
};

struct LstmTrainResult {
  LstmModel model;
  std::vector<EpochStats> history;
};

namespace detail {

/// Column-major batchify: stream b occupies a contiguous slice of the data.
inline std::vector<std::vector<TokenId>> batchify(std::span<const TokenId> data, std::size_t batch) {
  const std::size_t per = data.size() / batch;
  std::vector<std::vector<TokenId>> cols(batch);
  for (std::size_t b = 0; b < batch; ++b)
    cols[b].assign(data.begin() + static_cast<std::ptrdiff_t>(b * per),
                   data.begin() + static_cast<std::ptrdiff_t>((b + 1) * per));
  return cols;
}

template <typename Fn>
void for_each_segment(const std::vector<std::vector<TokenId>>& cols, std::size_t unroll, Fn&& fn) {
  const std::size_t batch = cols.size();
  const std::size_t len = cols.front().size();
  std::vector<TokenId> in, out;
  for (std::size_t start = 0; start + 1 < len; start += unroll) {
    const std::size_t steps = std::min(unroll, len - 1 - start);
    in.resize(steps * batch);
    out.resize(steps * batch);
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t b = 0; b < batch; ++b) {
        in[t * batch + b] = cols[b][start + t];
        out[t * batch + b] = cols[b][start + t + 1];
      }
    fn(std::span<const TokenId>(in), std::span<const TokenId>(out), steps);
  }
}

}  // namespace detail

/// Mean cross-entropy of a held-out stream, without dropout.
inline double lstm_cross_entropy(const LstmModel& model, std::span<const TokenId> data,
                                 std::size_t batch, std::size_t unroll) {
  batch = std::max<std::size_t>(1, std::min(batch, data.size() / 2));
  auto cols = detail::batchify(data, batch);
  auto state = LstmBatchState::zeros(model, batch);
  double total = 0.0;
  std::size_t count = 0;
  detail::for_each_segment(cols, unroll, [&](auto in, auto out, std::size_t steps) {
    total += lstm_segment_loss(model, in, out, batch, state) * static_cast<double>(steps * batch);
    count += steps * batch;
  });
  if (count == 0) fail(ErrorKind::invalid_argument, "cross-entropy: stream too short");
  return total / static_cast<double>(count);
}

/// Trains on the first 90% of the stream and validates on the rest. After
/// each epoch the learning rate is divided by lr_decay unless validation
/// loss improved on the best so far by more than 1e-4.
inline LstmTrainResult train_lstm(std::span<const TokenId> stream, const Vocabulary& vocab,
                                  const LstmHyperparams& hp, int epochs, std::uint64_t seed) {
  hp.validate();
  const auto batch = static_cast<std::size_t>(hp.batch_size);
  const auto unroll = static_cast<std::size_t>(hp.unroll_steps);
  if (stream.size() < batch * unroll)
    fail(ErrorKind::training, "corpus has " + std::to_string(stream.size()) +
                                  " tokens, need at least unroll_steps*batch_size = " +
                                  std::to_string(batch * unroll));
  const std::size_t n_train = stream.size() * 9 / 10;
  auto train = stream.first(n_train);
  auto valid = stream.subspan(n_train);
  if (train.size() / batch < 2 || valid.size() < 2)
    fail(ErrorKind::training, "corpus too small for a 90/10 split at this batch size");

  LstmModel model(hp, vocab);
  model.initialize(seed);
  Rng dropout_rng(seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<EpochStats> history;
  double best = lstm_cross_entropy(model, valid, batch, unroll);
  history.push_back({0, std::nan(""), best, hp.lr_init, false});

  const auto cols = detail::batchify(train, batch);
  const std::size_t L = model.layout().layers.size();
  double lr = hp.lr_init;
  std::vector<double> grad;
  DropoutMasks masks;

  auto make_mask = [&](Eigen::Index rows) {
    Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(batch));
    const double keep = 1.0 - hp.dropout;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < rows; ++i)
        m(i, j) = uniform_unit(dropout_rng) < keep ? 1.0 / keep : 0.0;
    return m;
  };

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    auto state = LstmBatchState::zeros(model, batch);
    double total = 0.0;
    std::size_t count = 0;
    detail::for_each_segment(cols, unroll, [&](auto in, auto out, std::size_t steps) {
      const DropoutMasks* mptr = nullptr;
      if (hp.dropout > 0.0) {
        masks.assign(steps, {});
        for (std::size_t t = 0; t < steps; ++t) {
          masks[t].push_back(make_mask(static_cast<Eigen::Index>(model.layout().embed)));
          for (std::size_t l = 1; l <= L; ++l)
            masks[t].push_back(make_mask(static_cast<Eigen::Index>(model.layout().units)));
        }
        mptr = &masks;
      }
      const double loss = lstm_segment_loss(model, in, out, batch, state, &grad, mptr);
      if (!std::isfinite(loss))
        fail(ErrorKind::training, "training diverged at epoch " + std::to_string(epoch) +
                                      " (non-finite loss); try a lower learning rate");
      sgd_step(model.mutable_params(), grad, lr, hp.clip_norm);
      total += loss * static_cast<double>(steps * batch);
      count += steps * batch;
    });

    const double valid_ce = lstm_cross_entropy(model, valid, batch, unroll);
    if (!std::isfinite(valid_ce))
      fail(ErrorKind::training, "validation loss non-finite at epoch " + std::to_string(epoch));
    EpochStats stats{epoch, total / static_cast<double>(count), valid_ce, lr, false};
    if (valid_ce >= best - 1e-4) {
      lr /= hp.lr_decay;
      stats.decayed = true;
    }
    best = std::min(best, valid_ce);
    history.push_back(stats);
  }
  return {std::move(model), std::move(history)};
}

}  // namespace stegolstm
