#pragma once

// Common surface for next-token models.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stegolstm/corpus.hpp"
#include "stegolstm/error.hpp"

namespace stegolstm {

/// Max-shifted softmax over unnormalized log-probabilities.
inline std::vector<double> softmax(std::span<const double> scores) {
  if (scores.empty()) return {};
  double max = scores[0];
  for (double s : scores) {
    if (!std::isfinite(s)) fail(ErrorKind::invalid_argument, "softmax: non-finite score");
    max = std::max(max, s);
  }
  std::vector<double> out(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - max);
    sum += out[i];
  }
  for (auto& p : out) p /= sum;
  return out;
}

/// A model exposes a copyable, backend-specific Context and three pure
/// operations on it. `advance` never mutates its argument.
template <typename M>
concept LanguageModel = requires(const M& m, const typename M::Context& ctx, TokenId t) {
  typename M::Context;
  { m.vocab_size() } -> std::convertible_to<std::size_t>;
  { m.vocab_hash() } -> std::convertible_to<std::uint64_t>;
  { m.eos_id() } -> std::convertible_to<TokenId>;
  { m.start_context() } -> std::same_as<typename M::Context>;
  { m.next_distribution(ctx) } -> std::same_as<std::vector<double>>;
  { m.advance(ctx, t) } -> std::same_as<typename M::Context>;
};

/// Context at the beginning of a message: the start state after `<eos>`.
template <LanguageModel M>
typename M::Context message_start(const M& model) {
  return model.advance(model.start_context(), model.eos_id());
}

template <LanguageModel M>
void check_compatible(const M& model, const Vocabulary& vocab) {
  if (model.vocab_size() != vocab.size())
    fail(ErrorKind::hash_mismatch, "model vocabulary size " + std::to_string(model.vocab_size()) +
                                       " != " + std::to_string(vocab.size()));
  if (model.vocab_hash() != vocab.hash())
    fail(ErrorKind::hash_mismatch, "model was trained against a different vocabulary");
}

}  // namespace stegolstm
