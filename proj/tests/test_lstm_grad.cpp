#include <gtest/gtest.h>

#include <cmath>

#include "stegolstm/lstm.hpp"

namespace stegolstm {
namespace {

// Central differences on every parameter against the analytic backward pass.
void check_gradient(const LstmHyperparams& hp, std::size_t vocab, std::uint64_t seed, bool with_masks) {
  LstmModel model(hp, vocab, 0, 0);
  model.initialize(seed, 0.5);
  // nonzero biases so the bias gradient path is exercised
  Rng rng(seed + 1);
  for (std::size_t l = 0; l < model.layout().layers.size(); ++l)
    for (std::size_t i = 0; i < 4 * model.layout().units; ++i)
      model.mutable_params()[model.layout().layers[l].b + i] = uniform_unit(rng) - 0.5;
  for (std::size_t i = 0; i < vocab; ++i) model.mutable_params()[model.layout().bo + i] = uniform_unit(rng) - 0.5;

  const std::size_t batch = 2, steps = 5;
  std::vector<TokenId> in, out;
  for (std::size_t i = 0; i < batch * steps; ++i) {
    in.push_back(static_cast<TokenId>(uniform_below(rng, vocab)));
    out.push_back(static_cast<TokenId>(uniform_below(rng, vocab)));
  }

  DropoutMasks masks;
  if (with_masks) {
    const double keep = 0.7;
    for (std::size_t t = 0; t < steps; ++t) {
      masks.emplace_back();
      for (std::size_t k = 0; k <= static_cast<std::size_t>(hp.layers); ++k) {
        const auto rows = static_cast<Eigen::Index>(k == 0 ? model.layout().embed : model.layout().units);
        Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(batch));
        for (Eigen::Index j = 0; j < m.size(); ++j) m.data()[j] = uniform_unit(rng) < keep ? 1.0 / keep : 0.0;
        masks.back().push_back(m);
      }
    }
  }
  const DropoutMasks* mp = with_masks ? &masks : nullptr;

  // a non-zero starting state, so the recurrence into the segment matters
  auto start = LstmBatchState::zeros(model, batch);
  for (auto& h : start.h) h.setRandom();
  for (auto& c : start.c) c.setRandom();

  auto loss_at = [&](const LstmModel& m) {
    auto st = start;
    return lstm_segment_loss(m, in, out, batch, st, nullptr, mp);
  };

  std::vector<double> grad;
  auto st = start;
  lstm_segment_loss(model, in, out, batch, st, &grad, mp);
  ASSERT_EQ(grad.size(), model.params().size());

  const double h = 1e-5;
  std::size_t checked = 0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double orig = model.params()[i];
    model.mutable_params()[i] = orig + h;
    const double up = loss_at(model);
    model.mutable_params()[i] = orig - h;
    const double down = loss_at(model);
    model.mutable_params()[i] = orig;
    const double numeric = (up - down) / (2 * h);
    const double tol = 1e-4 * std::max(std::abs(numeric), std::abs(grad[i])) + 1e-8;
    ASSERT_NEAR(grad[i], numeric, tol) << "parameter " << i;
    ++checked;
  }
  EXPECT_EQ(checked, model.layout().total);
}

TEST(LstmGradient, SingleLayerMatchesFiniteDifferences) {
  LstmHyperparams hp;
  hp.layers = 1;
  hp.units = 8;
  hp.embed_dim = 4;
  check_gradient(hp, 6, 21, false);
}

TEST(LstmGradient, TwoLayersWithDropoutMatchFiniteDifferences) {
  LstmHyperparams hp;
  hp.layers = 2;
  hp.units = 5;
  hp.embed_dim = 3;
  hp.dropout = 0.3;
  check_gradient(hp, 6, 8, true);
}

}  // namespace
}  // namespace stegolstm
