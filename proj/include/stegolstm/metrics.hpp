#pragma once

// Perplexity, bin-averaged (steganographic) perplexity, and capacity.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "stegolstm/corpus.hpp"
#include "stegolstm/error.hpp"
#include "stegolstm/keying.hpp"
#include "stegolstm/lm.hpp"

namespace stegolstm {

struct PerplexityReport {
  std::size_t token_count = 0;
  double mean_nll = 0.0;  // nats/word
  double perplexity = 1.0;
};

inline PerplexityReport make_report(double total_nll, std::size_t n) {
  PerplexityReport r;
  r.token_count = n;
  r.mean_nll = n ? total_nll / static_cast<double>(n) : 0.0;
  r.perplexity = std::exp(r.mean_nll);
  return r;
}

/// exp of the mean negative log-probability of each token given its prefix,
/// starting from the message-start context.
template <LanguageModel M>
PerplexityReport perplexity(const M& model, std::span<const TokenId> stream) {
  if (stream.empty()) fail(ErrorKind::invalid_argument, "perplexity: empty stream");
  auto ctx = message_start(model);
  double nll = 0.0;
  for (TokenId t : stream) {
    if (t >= model.vocab_size()) fail(ErrorKind::vocabulary, "perplexity: token out of range");
    nll -= std::log(model.next_distribution(ctx)[t]);
    ctx = model.advance(ctx, t);
  }
  return make_report(nll, stream.size());
}

/// Per-bin probability mass of a distribution, with the common-token mass
/// added to every bin (the same mask generation uses).
inline std::vector<double> masked_bin_mass(std::span<const double> dist, const StegoKey& key) {
  std::vector<double> mass(key.bin_count(), 0.0);
  double common = 0.0;
  for (TokenId id = 0; id < dist.size(); ++id) {
    const auto role = key.role(id);
    if (role >= 0) {
      mass[static_cast<std::size_t>(role)] += dist[id];
    } else if (role == StegoKey::kCommon) {
      common += dist[id];
    }
  }
  for (auto& m : mass) m += common;
  return mass;
}

/// Average over all 2^|B| blocks of the word's probability under the
/// block's masked, renormalized distribution.
inline double stego_word_prob(std::span<const double> dist, std::span<const double> bin_mass,
                              const StegoKey& key, TokenId word) {
  if (word >= dist.size()) fail(ErrorKind::vocabulary, "stego_word_prob: token out of range");
  const auto role = key.role(word);
  const double nbins = static_cast<double>(key.bin_count());
  if (role >= 0) return dist[word] / bin_mass[static_cast<std::size_t>(role)] / nbins;
  if (role == StegoKey::kCommon) {
    double sum = 0.0;
    for (double m : bin_mass) sum += dist[word] / m;
    return sum / nbins;
  }
  return 0.0;
}

inline double stego_word_prob(std::span<const double> dist, const StegoKey& key, TokenId word) {
  const auto mass = masked_bin_mass(dist, key);
  return stego_word_prob(dist, mass, key, word);
}

template <LanguageModel M>
double stego_word_prob(const M& model, const typename M::Context& ctx, const StegoKey& key, TokenId word) {
  check_compatible(model, key.vocab());
  return stego_word_prob(model.next_distribution(ctx), key, word);
}

/// The bin-averaged distribution over the whole vocabulary.
inline std::vector<double> stego_distribution(std::span<const double> dist, const StegoKey& key) {
  const auto mass = masked_bin_mass(dist, key);
  std::vector<double> out(dist.size());
  for (TokenId id = 0; id < dist.size(); ++id) out[id] = stego_word_prob(dist, mass, key, id);
  return out;
}

struct StegoPerplexityReport {
  PerplexityReport report;              // over scored positions only
  std::size_t skipped_reserved = 0;     // reserved tokens outside every bin
  std::vector<std::size_t> zero_positions;  // non-reserved words with zero probability
};

/// Perplexity with each word's probability replaced by its bin average.
/// Reserved tokens that belong to no bin are skipped and counted; any other
/// zero-probability word makes the perplexity infinite.
template <LanguageModel M>
StegoPerplexityReport stego_perplexity(const M& model, const StegoKey& key, std::span<const TokenId> stream) {
  if (stream.empty()) fail(ErrorKind::invalid_argument, "stego_perplexity: empty stream");
  check_compatible(model, key.vocab());
  StegoPerplexityReport out;
  auto ctx = message_start(model);
  double nll = 0.0;
  std::size_t scored = 0;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const TokenId t = stream[i];
    if (t >= model.vocab_size()) fail(ErrorKind::vocabulary, "stego_perplexity: token out of range");
    if (key.role(t) == StegoKey::kNoRole) {
      ++out.skipped_reserved;
    } else {
      const double p = stego_word_prob(model.next_distribution(ctx), key, t);
      if (p > 0.0) {
        nll -= std::log(p);
      } else {
        out.zero_positions.push_back(i);
      }
      ++scored;
    }
    ctx = model.advance(ctx, t);
  }
  out.report = make_report(nll, scored);
  if (!out.zero_positions.empty()) {
    out.report.mean_nll = INFINITY;
    out.report.perplexity = INFINITY;
  }
  return out;
}

struct CapacityReport {
  int block_bits = 0;
  double common_fraction = 0.0;
  double bits_per_word = 0.0;
  std::optional<double> bits_per_message;
  // Filled by capacity_empirical.
  std::size_t total_tokens = 0;
  std::size_t common_tokens = 0;
  std::size_t carrier_tokens = 0;
};

/// (1 - p) * |B| bits per word.
inline CapacityReport capacity(int block_bits, double common_fraction,
                               std::optional<double> words_per_message = std::nullopt) {
  if (block_bits < 0) fail(ErrorKind::invalid_argument, "capacity: block_bits must be >= 0");
  if (!(common_fraction >= 0.0 && common_fraction < 1.0))
    fail(ErrorKind::invalid_argument, "capacity: common fraction must be in [0,1)");
  CapacityReport r;
  r.block_bits = block_bits;
  r.common_fraction = common_fraction;
  r.bits_per_word = (1.0 - common_fraction) * block_bits;
  if (words_per_message) r.bits_per_message = r.bits_per_word * *words_per_message;
  return r;
}

/// Observed capacity of generated stegotexts under `key`.
inline CapacityReport capacity_empirical(const std::vector<std::vector<TokenId>>& corpus, const StegoKey& key) {
  CapacityReport r;
  r.block_bits = key.block_bits();
  for (const auto& text : corpus) {
    for (std::size_t i = 0; i < text.size(); ++i) {
      const auto role = key.role(text[i]);
      if (role == StegoKey::kNoRole)
        fail(ErrorKind::decode, "capacity_empirical: token at position " + std::to_string(i) + " carries no bits");
      ++r.total_tokens;
      if (role == StegoKey::kCommon) {
        ++r.common_tokens;
      } else {
        ++r.carrier_tokens;
      }
    }
  }
  if (r.total_tokens == 0) fail(ErrorKind::invalid_argument, "capacity_empirical: empty corpus");
  const double total = static_cast<double>(r.total_tokens);
  r.common_fraction = static_cast<double>(r.common_tokens) / total;
  r.bits_per_word = static_cast<double>(r.carrier_tokens * static_cast<std::size_t>(r.block_bits)) / total;
  return r;
}

}  // namespace stegolstm
