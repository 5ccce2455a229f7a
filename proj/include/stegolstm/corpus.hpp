#pragma once

// Tokenization, normalization and vocabulary construction.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stegolstm/error.hpp"
#include "stegolstm/hash.hpp"

namespace stegolstm {

using Token = std::string;
using TokenId = std::uint32_t;

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kEosToken = "<eos>";
inline constexpr std::string_view kUserToken = "<user>";
inline constexpr std::string_view kUrlToken = "<url>";

inline bool is_sentinel(std::string_view t) {
  return t == kUnkToken || t == kEosToken || t == kUserToken || t == kUrlToken;
}

inline bool is_valid_token(std::string_view t) {
  if (t.empty()) return false;
  return std::none_of(t.begin(), t.end(), [](unsigned char c) { return std::isspace(c); });
}

struct CorpusConfig {
  bool lowercase = true;
  bool replace_users_urls = true;
  bool drop_retweets = false;
  /// Total vocabulary size including `<unk>` and `<eos>`.
  std::optional<std::size_t> max_vocab;
  std::uint64_t min_count = 0;
};

namespace detail {

inline bool is_detachable(unsigned char c) {
  return std::ispunct(c) && c != '@' && c != '#' && c != '_' && c != '\'';
}

inline bool starts_with_icase(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
  }
  return true;
}

inline bool looks_like_url(std::string_view s) {
  return starts_with_icase(s, "http://") || starts_with_icase(s, "https://") ||
         starts_with_icase(s, "www.");
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline void tokenize_chunk(std::string_view chunk, const CorpusConfig& config,
                           std::vector<Token>& out) {
  auto normalize = [&](std::string_view s) {
    return config.lowercase ? ascii_lower(s) : std::string(s);
  };
  if (is_sentinel(chunk)) {
    out.emplace_back(chunk);
    return;
  }
  if (looks_like_url(chunk)) {
    std::size_t end = chunk.size();
    while (end > 0 && std::string_view(".,!?;:)\"").find(chunk[end - 1]) != std::string_view::npos)
      --end;
    out.push_back(config.replace_users_urls ? Token(kUrlToken) : normalize(chunk.substr(0, end)));
    for (std::size_t i = end; i < chunk.size(); ++i) out.emplace_back(1, chunk[i]);
    return;
  }

  std::size_t begin = 0;
  std::size_t end = chunk.size();
  while (begin < end && is_detachable(static_cast<unsigned char>(chunk[begin]))) {
    out.emplace_back(1, chunk[begin]);
    ++begin;
  }
  std::size_t trail = end;
  while (trail > begin && is_detachable(static_cast<unsigned char>(chunk[trail - 1]))) --trail;

  if (trail > begin) {
    std::string_view core = chunk.substr(begin, trail - begin);
    if (config.replace_users_urls && core.size() > 1 && core.front() == '@') {
      out.emplace_back(kUserToken);
    } else {
      out.push_back(normalize(core));
    }
  }
  for (std::size_t i = trail; i < end; ++i) out.emplace_back(1, chunk[i]);
}

inline std::vector<Token> tokenize_message(std::string_view line, const CorpusConfig& config) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) tokenize_chunk(line.substr(i, j - i), config, out);
    i = j;
  }
  return out;
}

}  // namespace detail

/// Splits text into messages (one per line), each into word and punctuation
/// tokens. Consecutive messages are separated by `<eos>`.
inline std::vector<Token> tokenize(std::string_view raw_text, const CorpusConfig& config = {}) {
  std::vector<Token> out;
  std::size_t pos = 0;
  bool first = true;
  while (pos <= raw_text.size()) {
    std::size_t nl = raw_text.find('\n', pos);
    if (nl == std::string_view::npos) nl = raw_text.size();
    auto message = detail::tokenize_message(raw_text.substr(pos, nl - pos), config);
    pos = nl + 1;
    if (message.empty()) continue;
    if (config.drop_retweets && detail::ascii_lower(message.front()) == "rt") continue;
    if (!first) out.emplace_back(kEosToken);
    first = false;
    out.insert(out.end(), std::make_move_iterator(message.begin()),
               std::make_move_iterator(message.end()));
  }
  return out;
}

/// Ordered token inventory with occurrence counts. Ordering is descending
/// count with ties broken by byte-wise comparison of the surface string.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Validates ordering, uniqueness and the presence of `<unk>`/`<eos>`.
  Vocabulary(std::vector<Token> tokens, std::vector<std::uint64_t> counts)
      : tokens_(std::move(tokens)), counts_(std::move(counts)) {
    if (tokens_.size() != counts_.size())
      fail(ErrorKind::vocabulary, "token and count lists differ in length");
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!is_valid_token(tokens_[i]))
        fail(ErrorKind::vocabulary, "invalid token at index " + std::to_string(i));
      if (i > 0 && !ordered_before(i - 1, i))
        fail(ErrorKind::vocabulary, "vocabulary not in canonical order at index " + std::to_string(i));
      if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
        fail(ErrorKind::vocabulary, "duplicate token '" + tokens_[i] + "'");
    }
    auto unk = find(kUnkToken);
    auto eos = find(kEosToken);
    if (!unk || !eos) fail(ErrorKind::vocabulary, "vocabulary lacks <unk> or <eos>");
    unk_ = *unk;
    eos_ = *eos;
    hash_ = compute_hash();
  }

  std::size_t size() const { return tokens_.size(); }
  const Token& token(TokenId id) const { return tokens_.at(id); }
  std::uint64_t count(TokenId id) const { return counts_.at(id); }
  const std::vector<Token>& tokens() const { return tokens_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  std::optional<TokenId> find(std::string_view t) const {
    auto it = index_.find(std::string(t));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  TokenId id_or_unk(std::string_view t) const { return find(t).value_or(unk_); }

  TokenId unk_id() const { return unk_; }
  TokenId eos_id() const { return eos_; }

  /// `<unk>` and `<eos>` never carry payload bits.
  bool is_reserved(TokenId id) const { return id == unk_ || id == eos_; }

  std::uint64_t total_count() const {
    std::uint64_t total = 0;
    for (auto c : counts_) total += c;
    return total;
  }

  std::uint64_t hash() const { return hash_; }
  std::string hash_hex() const { return to_hex(hash_); }

  std::vector<TokenId> encode(const std::vector<Token>& tokens) const {
    std::vector<TokenId> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id_or_unk(t));
    return ids;
  }

  std::string serialize() const {
    std::string out = "STEGOVOCAB v1\n";
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      out += tokens_[i];
      out += '\t';
      out += std::to_string(counts_[i]);
      out += '\n';
    }
    return out;
  }

  static Vocabulary parse(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "STEGOVOCAB v1")
      fail(ErrorKind::format, "vocabulary file: missing 'STEGOVOCAB v1' header");
    std::vector<Token> tokens;
    std::vector<std::uint64_t> counts;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos || tab == 0)
        fail(ErrorKind::format, "vocabulary file: malformed line " + std::to_string(lineno));
      tokens.push_back(line.substr(0, tab));
      try {
        std::size_t used = 0;
        counts.push_back(std::stoull(line.substr(tab + 1), &used));
        if (used != line.size() - tab - 1) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        fail(ErrorKind::format, "vocabulary file: bad count on line " + std::to_string(lineno));
      }
    }
    return Vocabulary(std::move(tokens), std::move(counts));
  }

  static Vocabulary parse(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse(in);
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.counts_ == b.counts_;
  }

 private:
  bool ordered_before(std::size_t a, std::size_t b) const {
    if (counts_[a] != counts_[b]) return counts_[a] > counts_[b];
    return tokens_[a] < tokens_[b];
  }

  std::uint64_t compute_hash() const {
    Fnv1a64 h;
    h.update(serialize());
    return h.digest();
  }

  std::vector<Token> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId unk_ = 0;
  TokenId eos_ = 0;
  std::uint64_t hash_ = 0;
};

/// Counts tokens and keeps those passing `min_count`, truncated to
/// `max_vocab` entries. Dropped occurrences are credited to `<unk>` so the
/// counts still sum to the stream length.
inline Vocabulary build_vocab(const std::vector<Token>& tokens, const CorpusConfig& config = {}) {
  if (tokens.empty()) fail(ErrorKind::invalid_argument, "build_vocab: empty token stream");
  if (config.max_vocab && *config.max_vocab < 4)
    fail(ErrorKind::invalid_argument, "build_vocab: max_vocab must leave room for two carriers");

  std::map<std::string, std::uint64_t> counts;
  for (const auto& t : tokens) {
    if (!is_valid_token(t)) fail(ErrorKind::invalid_argument, "build_vocab: invalid token");
    ++counts[t];
  }
  counts.try_emplace(std::string(kUnkToken), 0);
  counts.try_emplace(std::string(kEosToken), 0);

  auto reserved = [](std::string_view t) { return t == kUnkToken || t == kEosToken; };
  std::uint64_t dropped = 0;
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [tok, n] : counts) {
    if (!reserved(tok) && n < config.min_count) {
      dropped += n;
    } else {
      kept.emplace_back(tok, n);
    }
  }

  auto order = [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };
  std::sort(kept.begin(), kept.end(), order);

  if (config.max_vocab && kept.size() > *config.max_vocab) {
    std::vector<std::pair<std::string, std::uint64_t>> truncated;
    std::size_t carriers_left = *config.max_vocab - 2;
    for (auto& entry : kept) {
      if (reserved(entry.first)) {
        truncated.push_back(std::move(entry));
      } else if (carriers_left > 0) {
        truncated.push_back(std::move(entry));
        --carriers_left;
      } else {
        dropped += entry.second;
      }
    }
    kept = std::move(truncated);
  }
  for (auto& entry : kept)
    if (entry.first == kUnkToken) entry.second += dropped;
  std::sort(kept.begin(), kept.end(), order);

  if (kept.size() < 4)
    fail(ErrorKind::vocabulary, "build_vocab: fewer than two non-reserved tokens, cannot bin");

  std::vector<Token> out_tokens;
  std::vector<std::uint64_t> out_counts;
  for (auto& [tok, n] : kept) {
    out_tokens.push_back(tok);
    out_counts.push_back(n);
  }
  return Vocabulary(std::move(out_tokens), std::move(out_counts));
}

/// The k most frequent tokens under the vocabulary's canonical order.
inline std::vector<TokenId> top_k_tokens(const Vocabulary& vocab, std::size_t k) {
  if (k > vocab.size())
    fail(ErrorKind::invalid_argument, "top_k_tokens: k=" + std::to_string(k) +
                                          " exceeds vocabulary size " + std::to_string(vocab.size()));
  std::vector<TokenId> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = static_cast<TokenId>(i);
  return out;
}

// Token files: one token per line.

inline std::vector<Token> read_token_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open token file '" + path + "'");
  std::vector<Token> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) tokens.push_back(line);
  }
  return tokens;
}

inline void write_token_file(const std::string& path, const std::vector<Token>& tokens) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write token file '" + path + "'");
  for (const auto& t : tokens) out << t << '\n';
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

}  // namespace stegolstm
