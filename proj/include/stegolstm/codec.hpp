#pragma once

// Embedding and extraction: payload bits pick a bin per carrier token, the
// language model picks the token within the bin (plus any common tokens).

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stegolstm/corpus.hpp"
#include "stegolstm/error.hpp"
#include "stegolstm/keying.hpp"
#include "stegolstm/lm.hpp"
#include "stegolstm/random.hpp"

namespace stegolstm {

using Bits = std::vector<bool>;

inline Bits bits_from_string(std::string_view s) {
  Bits bits;
  for (char c : s) {
    if (c != '0' && c != '1') fail(ErrorKind::invalid_argument, "bit string may contain only 0 and 1");
    bits.push_back(c == '1');
  }
  return bits;
}

inline std::string bits_to_string(const Bits& bits) {
  std::string s;
  s.reserve(bits.size());
  for (bool b : bits) s += b ? '1' : '0';
  return s;
}

/// MSB-first within each byte.
inline Bits bytes_to_bits(std::span<const std::uint8_t> bytes) {
  Bits bits;
  bits.reserve(bytes.size() * 8);
  for (auto byte : bytes)
    for (int i = 7; i >= 0; --i) bits.push_back((byte >> i) & 1U);
  return bits;
}

/// Inverse of bytes_to_bits; a trailing partial byte is dropped.
inline std::vector<std::uint8_t> bits_to_bytes(const Bits& bits) {
  std::vector<std::uint8_t> out(bits.size() / 8, 0);
  for (std::size_t i = 0; i < out.size() * 8; ++i)
    if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(1U << (7 - i % 8));
  return out;
}

enum class Framing { raw, length_prefixed };

struct Payload {
  std::vector<std::uint8_t> data;
  Framing framing = Framing::raw;
};

inline constexpr std::size_t kLengthHeaderBits = 32;

/// Exactly the bits an encoder will embed. RAW keeps the largest prefix
/// that is a whole number of blocks; LENGTH_PREFIXED prepends a 32-bit
/// big-endian bit count and zero-pads to a block boundary.
inline Bits framed_bits(const Bits& payload_bits, Framing framing, int block_bits) {
  if (block_bits < 1) fail(ErrorKind::invalid_argument, "block_bits must be >= 1");
  const auto bb = static_cast<std::size_t>(block_bits);
  if (framing == Framing::raw) {
    Bits out(payload_bits.begin(),
             payload_bits.begin() + static_cast<std::ptrdiff_t>(payload_bits.size() / bb * bb));
    return out;
  }
  if (payload_bits.size() > UINT32_MAX) fail(ErrorKind::invalid_argument, "payload too large");
  const auto n = static_cast<std::uint32_t>(payload_bits.size());
  Bits out;
  for (int i = 31; i >= 0; --i) out.push_back((n >> i) & 1U);
  out.insert(out.end(), payload_bits.begin(), payload_bits.end());
  while (out.size() % bb != 0) out.push_back(false);
  return out;
}

/// Splits into blocks, leftmost bit most significant; a trailing partial
/// block is dropped.
inline std::vector<BitBlock> bits_to_blocks(const Bits& bits, int block_bits) {
  if (block_bits < 1) fail(ErrorKind::invalid_argument, "block_bits must be >= 1");
  const auto bb = static_cast<std::size_t>(block_bits);
  std::vector<BitBlock> blocks;
  for (std::size_t i = 0; i + bb <= bits.size(); i += bb) {
    BitBlock block{0, block_bits};
    for (std::size_t j = 0; j < bb; ++j) block.value = (block.value << 1) | (bits[i + j] ? 1U : 0U);
    blocks.push_back(block);
  }
  return blocks;
}

inline std::vector<BitBlock> to_bit_blocks(const Payload& payload, int block_bits) {
  return bits_to_blocks(framed_bits(bytes_to_bits(payload.data), payload.framing, block_bits), block_bits);
}

/// Strips the length header and truncates to the declared bit count.
inline Bits unframe(const Bits& bits, Framing framing) {
  if (framing == Framing::raw) return bits;
  if (bits.size() < kLengthHeaderBits)
    fail(ErrorKind::decode, "length header needs 32 bits, only " + std::to_string(bits.size()) + " decoded");
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < kLengthHeaderBits; ++i) n = (n << 1) | (bits[i] ? 1U : 0U);
  if (n > bits.size() - kLengthHeaderBits)
    fail(ErrorKind::decode, "length header declares " + std::to_string(n) + " bits, only " +
                                std::to_string(bits.size() - kLengthHeaderBits) + " available");
  return Bits(bits.begin() + kLengthHeaderBits,
              bits.begin() + static_cast<std::ptrdiff_t>(kLengthHeaderBits + n));
}

enum class SelectMode { greedy, sample };

struct GenPolicy {
  SelectMode mode = SelectMode::sample;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  int max_common_run = 5;

  void validate() const {
    if (!(temperature > 0.0)) fail(ErrorKind::invalid_argument, "temperature must be > 0");
    if (max_common_run < 1) fail(ErrorKind::invalid_argument, "max_common_run must be >= 1");
  }
};

/// Which tokens a single selection may return.
struct SelectionMask {
  std::uint32_t bin = 0;
  bool allow_common = true;
  /// Common tokens already emitted in the current run.
  std::vector<TokenId> excluded;

  bool allows(const StegoKey& key, TokenId id) const {
    const auto role = key.role(id);
    if (role == static_cast<std::int32_t>(bin)) return true;
    if (role != StegoKey::kCommon || !allow_common) return false;
    return std::find(excluded.begin(), excluded.end(), id) == excluded.end();
  }
};

/// Picks from `dist` restricted to the mask. GREEDY takes the argmax (lowest
/// index on ties); SAMPLE draws from the renormalized p^(1/T).
inline TokenId select_masked(std::span<const double> dist, const StegoKey& key, const SelectionMask& mask,
                             const GenPolicy& policy, Rng& rng) {
  if (dist.size() != key.vocab().size())
    fail(ErrorKind::hash_mismatch, "distribution length does not match key vocabulary");
  if (policy.mode == SelectMode::greedy) {
    std::optional<TokenId> best;
    for (TokenId id = 0; id < dist.size(); ++id) {
      if (!mask.allows(key, id)) continue;
      if (!best || dist[id] > dist[*best]) best = id;
    }
    if (!best || !(dist[*best] > 0.0))
      fail(ErrorKind::decode, "masked distribution has zero mass");
    return *best;
  }

  double max_logp = -INFINITY;
  for (TokenId id = 0; id < dist.size(); ++id)
    if (mask.allows(key, id) && dist[id] > 0.0) max_logp = std::max(max_logp, std::log(dist[id]));
  if (!std::isfinite(max_logp)) fail(ErrorKind::decode, "masked distribution has zero mass");
  std::vector<std::pair<TokenId, double>> weights;
  double total = 0.0;
  for (TokenId id = 0; id < dist.size(); ++id) {
    if (!mask.allows(key, id) || !(dist[id] > 0.0)) continue;
    const double w = std::exp((std::log(dist[id]) - max_logp) / policy.temperature);
    weights.emplace_back(id, w);
    total += w;
  }
  double u = uniform_unit(rng) * total;
  for (auto [id, w] : weights) {
    if (u < w) return id;
    u -= w;
  }
  return weights.back().first;
}

template <LanguageModel M>
TokenId constrained_select(const M& model, const typename M::Context& ctx, const StegoKey& key,
                           BitBlock block, const GenPolicy& policy, Rng& rng) {
  if (block.width != key.block_bits() || block.value >= key.bin_count())
    fail(ErrorKind::invalid_argument, "bit block does not fit the key");
  const auto dist = model.next_distribution(ctx);
  return select_masked(dist, key, SelectionMask{block.value, true, {}}, policy, rng);
}

struct Stegotext {
  std::vector<TokenId> tokens;
  std::size_t carrier_count = 0;
  int block_bits = 0;

  std::size_t encoded_bits() const { return carrier_count * static_cast<std::size_t>(block_bits); }
};

/// One carrier token per block. Common tokens are emitted without consuming
/// a block; within a run each common token is used at most once, and after
/// max_common_run of them the next pick is restricted to the carrier bin.
template <LanguageModel M>
Stegotext encode_blocks(const std::vector<BitBlock>& blocks, const StegoKey& key, const M& model,
                        const GenPolicy& policy, typename M::Context ctx) {
  policy.validate();
  check_compatible(model, key.vocab());
  Rng rng(policy.seed);
  Stegotext out;
  out.block_bits = key.block_bits();
  for (const auto& block : blocks) {
    if (block.width != key.block_bits() || block.value >= key.bin_count())
      fail(ErrorKind::invalid_argument, "bit block does not fit the key");
    SelectionMask mask{block.value, !key.common().empty(), {}};
    for (;;) {
      mask.allow_common = !key.common().empty() &&
                          static_cast<int>(mask.excluded.size()) < policy.max_common_run;
      const auto dist = model.next_distribution(ctx);
      const TokenId id = select_masked(dist, key, mask, policy, rng);
      out.tokens.push_back(id);
      ctx = model.advance(ctx, id);
      if (!key.is_common(id)) break;
      mask.excluded.push_back(id);
    }
    ++out.carrier_count;
  }
  return out;
}

template <LanguageModel M>
Stegotext encode_blocks(const std::vector<BitBlock>& blocks, const StegoKey& key, const M& model,
                        const GenPolicy& policy) {
  return encode_blocks(blocks, key, model, policy, message_start(model));
}

template <LanguageModel M>
Stegotext encode(const Payload& payload, const StegoKey& key, const M& model, const GenPolicy& policy) {
  if (key.unconstrained()) fail(ErrorKind::invalid_argument, "cannot embed bits with a single-bin key");
  auto blocks = to_bit_blocks(payload, key.block_bits());
  if (blocks.empty())
    fail(ErrorKind::invalid_argument, "payload holds fewer bits than one block");
  return encode_blocks(blocks, key, model, policy);
}

/// Concatenated bin labels of the carrier tokens; common tokens are
/// skipped. Needs no language model.
inline Bits decode(std::span<const TokenId> tokens, const StegoKey& key, Framing framing = Framing::raw) {
  Bits bits;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const TokenId id = tokens[i];
    const auto role = key.role(id);
    if (role == StegoKey::kCommon) continue;
    if (role == StegoKey::kNoRole) {
      const std::string what = id < key.vocab().size() ? "'" + key.vocab().token(id) + "'" : "id " + std::to_string(id);
      fail(ErrorKind::decode, "token " + what + " at position " + std::to_string(i) + " carries no bits");
    }
    for (int b = key.block_bits() - 1; b >= 0; --b) bits.push_back((static_cast<std::uint32_t>(role) >> b) & 1U);
  }
  return unframe(bits, framing);
}

inline std::vector<TokenId> lookup_tokens(const std::vector<Token>& tokens, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto id = vocab.find(tokens[i]);
    if (!id)
      fail(ErrorKind::decode, "token '" + tokens[i] + "' at position " + std::to_string(i) + " not in vocabulary");
    ids.push_back(*id);
  }
  return ids;
}

inline Bits decode(const std::vector<Token>& tokens, const StegoKey& key, Framing framing = Framing::raw) {
  return decode(lookup_tokens(tokens, key.vocab()), key, framing);
}

inline std::vector<Token> surfaces(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::vector<Token> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(vocab.token(id));
  return out;
}

struct RenderOptions {
  bool capitalize = false;
  /// Substitutes for `<user>`/`<url>`, used in order and cycled. When empty,
  /// deterministic mocks derived from `seed` are used.
  std::vector<std::string> users;
  std::vector<std::string> urls;
  std::uint64_t seed = 0;
};

/// Presentation only: decoding works on token sequences, not on this text.
inline std::string render(const std::vector<Token>& tokens, const RenderOptions& options = {}) {
  static constexpr std::string_view kAttachLeft = ".,!?;:";
  Rng rng(options.seed);
  std::size_t user_i = 0, url_i = 0;
  std::string out;
  bool line_start = true;
  bool sentence_start = true;
  for (const auto& tok : tokens) {
    if (tok == kEosToken) {
      out += '\n';
      line_start = sentence_start = true;
      continue;
    }
    std::string word;
    if (tok == kUserToken) {
      word = options.users.empty() ? "@user" + std::to_string(100 + uniform_below(rng, 900))
                                   : options.users[user_i++ % options.users.size()];
    } else if (tok == kUrlToken) {
      word = options.urls.empty() ? "http://t.co/" + std::to_string(10000 + uniform_below(rng, 90000))
                                  : options.urls[url_i++ % options.urls.size()];
    } else {
      word = tok;
    }
    const bool attach = tok.size() == 1 && kAttachLeft.find(tok[0]) != std::string_view::npos;
    if (options.capitalize && !is_sentinel(tok)) {
      const bool pronoun_i = word == "i" || word.rfind("i'", 0) == 0;
      if ((sentence_start || pronoun_i) && !word.empty() && std::islower(static_cast<unsigned char>(word[0])))
        word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
    }
    if (!line_start && !attach) out += ' ';
    out += word;
    line_start = false;
    if (tok == "." || tok == "!" || tok == "?") {
      sentence_start = true;
    } else if (!is_sentinel(tok) &&
               std::any_of(word.begin(), word.end(), [](unsigned char c) { return std::isalnum(c); })) {
      sentence_start = false;
    }
  }
  return out;
}

}  // namespace stegolstm
