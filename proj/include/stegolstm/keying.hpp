#pragma once

// Shared key: a seeded partition of the carrier vocabulary into 2^|B| bins,
// plus a set of common tokens that carry no payload.

#include <cstdint>
#include <istream>
#include <memory>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "stegolstm/corpus.hpp"
#include "stegolstm/error.hpp"
#include "stegolstm/random.hpp"

namespace stegolstm {

/// |B| bits read MSB-first; `value` indexes the bin.
struct BitBlock {
  std::uint32_t value = 0;
  int width = 0;

  std::string to_string() const {
    std::string s(static_cast<std::size_t>(width), '0');
    for (int i = 0; i < width; ++i)
      if ((value >> (width - 1 - i)) & 1U) s[static_cast<std::size_t>(i)] = '1';
    return s;
  }

  friend bool operator==(const BitBlock&, const BitBlock&) = default;
};

struct CommonMarker {
  friend bool operator==(CommonMarker, CommonMarker) { return true; }
};

using BinLookup = std::variant<BitBlock, CommonMarker>;

inline constexpr int kMaxBlockBits = 16;

class StegoKey {
 public:
  static constexpr std::int32_t kCommon = -1;
  static constexpr std::int32_t kNoRole = -2;

  /// Builds a key from explicit bins and checks every partition invariant.
  /// block_bits == 0 denotes the unconstrained single-bin key, whose one bin
  /// is the entire vocabulary.
  StegoKey(std::shared_ptr<const Vocabulary> vocab, int block_bits,
           std::vector<std::vector<TokenId>> bins, std::vector<TokenId> common, std::uint64_t seed)
      : vocab_(std::move(vocab)), block_bits_(block_bits), bins_(std::move(bins)),
        common_(std::move(common)), seed_(seed) {
    if (!vocab_) fail(ErrorKind::invalid_argument, "key requires a vocabulary");
    validate();
  }

  int block_bits() const { return block_bits_; }
  std::size_t bin_count() const { return bins_.size(); }
  const std::vector<std::vector<TokenId>>& bins() const { return bins_; }
  const std::vector<TokenId>& common() const { return common_; }
  std::uint64_t seed() const { return seed_; }
  const Vocabulary& vocab() const { return *vocab_; }
  std::shared_ptr<const Vocabulary> vocab_ptr() const { return vocab_; }
  std::uint64_t vocab_hash() const { return vocab_->hash(); }
  bool unconstrained() const { return block_bits_ == 0; }

  /// Bin index, kCommon, or kNoRole for each token id.
  std::int32_t role(TokenId id) const { return id < roles_.size() ? roles_[id] : kNoRole; }
  bool is_common(TokenId id) const { return role(id) == kCommon; }

  std::size_t carrier_count() const {
    std::size_t n = 0;
    for (const auto& b : bins_) n += b.size();
    return n;
  }

  friend bool operator==(const StegoKey& a, const StegoKey& b) {
    return a.vocab_hash() == b.vocab_hash() && a.block_bits_ == b.block_bits_ && a.bins_ == b.bins_ &&
           a.common_ == b.common_ && a.seed_ == b.seed_;
  }

 private:
  void validate() {
    const auto& v = *vocab_;
    if (block_bits_ < 0 || block_bits_ > kMaxBlockBits)
      fail(ErrorKind::invalid_argument, "block_bits out of range");
    const std::size_t nbins = std::size_t{1} << block_bits_;
    if (bins_.size() != nbins)
      fail(ErrorKind::format, "key has " + std::to_string(bins_.size()) + " bins, expected " +
                                  std::to_string(nbins));
    roles_.assign(v.size(), kNoRole);
    auto claim = [&](TokenId id, std::int32_t role) {
      if (id >= v.size()) fail(ErrorKind::format, "key references token id out of range");
      if (roles_[id] != kNoRole)
        fail(ErrorKind::format, "token '" + v.token(id) + "' appears more than once in key");
      roles_[id] = role;
    };
    for (TokenId id : common_) {
      if (id < v.size() && id == v.unk_id()) fail(ErrorKind::format, "<unk> cannot be a common token");
      claim(id, kCommon);
    }
    for (std::size_t b = 0; b < bins_.size(); ++b) {
      for (TokenId id : bins_[b]) {
        if (block_bits_ > 0 && id < v.size() && v.is_reserved(id))
          fail(ErrorKind::format, "reserved token '" + v.token(id) + "' cannot be a carrier");
        claim(id, static_cast<std::int32_t>(b));
      }
    }
    if (block_bits_ == 0 && !common_.empty())
      fail(ErrorKind::format, "unconstrained key cannot have common tokens");
    for (TokenId id = 0; id < v.size(); ++id) {
      const bool must_cover = block_bits_ == 0 || !v.is_reserved(id);
      if (must_cover && roles_[id] == kNoRole)
        fail(ErrorKind::format, "token '" + v.token(id) + "' is neither a carrier nor common");
    }
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& b : bins_) {
      lo = std::min(lo, b.size());
      hi = std::max(hi, b.size());
    }
    if (lo == 0) fail(ErrorKind::format, "key has an empty bin");
    if (hi - lo > 1) fail(ErrorKind::format, "bin sizes differ by more than one");
  }

  std::shared_ptr<const Vocabulary> vocab_;
  int block_bits_;
  std::vector<std::vector<TokenId>> bins_;
  std::vector<TokenId> common_;
  std::uint64_t seed_;
  std::vector<std::int32_t> roles_;
};

struct KeyOptions {
  /// Adds `<eos>` to the common set so generated text can end messages.
  bool eos_common = false;
  int max_block_bits = kMaxBlockBits;
};

/// Common tokens are the `common_count` most frequent non-reserved tokens.
/// The remaining carriers, in vocabulary order, are permuted by Fisher-Yates
/// driven by mt19937_64(seed) and dealt round-robin into the bins.
inline StegoKey generate_key(std::shared_ptr<const Vocabulary> vocab, int block_bits,
                             std::size_t common_count, std::uint64_t seed,
                             const KeyOptions& options = {}) {
  if (!vocab) fail(ErrorKind::invalid_argument, "generate_key: no vocabulary");
  if (block_bits < 1) fail(ErrorKind::invalid_argument, "generate_key: block_bits must be >= 1");
  if (block_bits > options.max_block_bits)
    fail(ErrorKind::invalid_argument, "generate_key: block_bits exceeds cap of " +
                                          std::to_string(options.max_block_bits));
  const std::size_t nbins = std::size_t{1} << block_bits;
  if (common_count + nbins > vocab->size())
    fail(ErrorKind::invalid_argument, "generate_key: common_count + 2^block_bits exceeds |V|");

  std::vector<TokenId> common;
  for (TokenId id : top_k_tokens(*vocab, std::min(vocab->size(), common_count + 2))) {
    if (common.size() == common_count) break;
    if (!vocab->is_reserved(id)) common.push_back(id);
  }
  if (options.eos_common) common.push_back(vocab->eos_id());

  std::vector<TokenId> carriers;
  std::vector<bool> taken(vocab->size(), false);
  for (TokenId id : common) taken[id] = true;
  for (TokenId id = 0; id < vocab->size(); ++id)
    if (!taken[id] && !vocab->is_reserved(id)) carriers.push_back(id);
  if (carriers.size() < nbins)
    fail(ErrorKind::invalid_argument, "generate_key: " + std::to_string(carriers.size()) +
                                          " carriers cannot fill " + std::to_string(nbins) + " bins");

  Rng rng(seed);
  shuffle(std::span<TokenId>(carriers), rng);
  std::vector<std::vector<TokenId>> bins(nbins);
  for (std::size_t i = 0; i < carriers.size(); ++i) bins[i % nbins].push_back(carriers[i]);
  return StegoKey(std::move(vocab), block_bits, std::move(bins), std::move(common), seed);
}

/// The single-bin key: nothing is masked and no bits are carried.
inline StegoKey unconstrained_key(std::shared_ptr<const Vocabulary> vocab) {
  std::vector<TokenId> all(vocab->size());
  for (TokenId id = 0; id < all.size(); ++id) all[id] = id;
  return StegoKey(std::move(vocab), 0, {std::move(all)}, {}, 0);
}

inline BinLookup bin_of_token(const StegoKey& key, TokenId id) {
  const auto& v = key.vocab();
  if (id >= v.size()) fail(ErrorKind::decode, "token id " + std::to_string(id) + " not in vocabulary");
  const auto role = key.role(id);
  if (role == StegoKey::kCommon) return CommonMarker{};
  if (role == StegoKey::kNoRole)
    fail(ErrorKind::decode, "token '" + v.token(id) + "' is reserved and carries no bits");
  return BitBlock{static_cast<std::uint32_t>(role), key.block_bits()};
}

inline std::string serialize_key(const StegoKey& key) {
  if (key.unconstrained()) fail(ErrorKind::invalid_argument, "the unconstrained key has no file form");
  const auto& v = key.vocab();
  std::string out = "STEGOKEY v1\n";
  out += "block_bits: " + std::to_string(key.block_bits()) + "\n";
  out += "vocab_hash: " + v.hash_hex() + "\n";
  out += "seed: " + std::to_string(key.seed()) + "\n";
  out += "common:";
  for (TokenId id : key.common()) out += "\t" + v.token(id);
  out += "\n";
  for (std::size_t b = 0; b < key.bin_count(); ++b) {
    out += "bin " + BitBlock{static_cast<std::uint32_t>(b), key.block_bits()}.to_string() + ":";
    for (TokenId id : key.bins()[b]) out += "\t" + v.token(id);
    out += "\n";
  }
  return out;
}

inline StegoKey deserialize_key(std::string_view text, std::shared_ptr<const Vocabulary> vocab) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  auto next = [&](const char* what) -> std::string {
    if (!std::getline(in, line)) fail(ErrorKind::format, std::string("key file: missing ") + what);
    ++lineno;
    return line;
  };
  auto value_after = [&](const std::string& l, std::string_view prefix) -> std::string {
    if (l.rfind(prefix, 0) != 0)
      fail(ErrorKind::format, "key file line " + std::to_string(lineno) + ": expected '" +
                                  std::string(prefix) + "'");
    return l.substr(prefix.size());
  };
  auto split_tabs = [](std::string_view rest) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < rest.size()) {
      if (rest[pos] != '\t') fail(ErrorKind::format, "key file: tokens must be tab-separated");
      auto tab = rest.find('\t', pos + 1);
      if (tab == std::string_view::npos) tab = rest.size();
      out.emplace_back(rest.substr(pos + 1, tab - pos - 1));
      pos = tab;
    }
    return out;
  };

  if (next("header") != "STEGOKEY v1") fail(ErrorKind::format, "key file: missing 'STEGOKEY v1' header");
  int block_bits = 0;
  std::uint64_t seed = 0;
  try {
    block_bits = std::stoi(value_after(next("block_bits"), "block_bits: "));
    auto hash = value_after(next("vocab_hash"), "vocab_hash: ");
    if (hash != vocab->hash_hex())
      fail(ErrorKind::hash_mismatch, "key vocab_hash " + hash + " does not match vocabulary " +
                                         vocab->hash_hex());
    seed = std::stoull(value_after(next("seed"), "seed: "));
  } catch (const std::logic_error&) {
    fail(ErrorKind::format, "key file: bad numeric field on line " + std::to_string(lineno));
  }
  if (block_bits < 1 || block_bits > kMaxBlockBits) fail(ErrorKind::format, "key file: bad block_bits");

  auto lookup = [&](const std::string& tok) {
    auto id = vocab->find(tok);
    if (!id) fail(ErrorKind::format, "key file line " + std::to_string(lineno) + ": unknown token '" + tok + "'");
    return *id;
  };
  std::vector<TokenId> common;
  for (const auto& t : split_tabs(value_after(next("common"), "common:"))) common.push_back(lookup(t));

  const std::size_t nbins = std::size_t{1} << block_bits;
  std::vector<std::vector<TokenId>> bins(nbins);
  for (std::size_t b = 0; b < nbins; ++b) {
    const std::string label =
        "bin " + BitBlock{static_cast<std::uint32_t>(b), block_bits}.to_string() + ":";
    for (const auto& t : split_tabs(value_after(next("bin line"), label))) bins[b].push_back(lookup(t));
  }
  while (std::getline(in, line))
    if (!line.empty()) fail(ErrorKind::format, "key file: unexpected trailing content");
  return StegoKey(std::move(vocab), block_bits, std::move(bins), std::move(common), seed);
}

}  // namespace stegolstm
