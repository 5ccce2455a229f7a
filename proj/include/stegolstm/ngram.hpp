#pragma once

// Add-k smoothed n-gram model.

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "stegolstm/corpus.hpp"
#include "stegolstm/error.hpp"
#include "stegolstm/lm.hpp"

namespace stegolstm {

struct NgramConfig {
  int order = 3;
  double k = 0.01;
};

class NgramModel {
 public:
  struct Context {
    std::vector<TokenId> history;  // at most order-1 most recent tokens
    friend bool operator==(const Context&, const Context&) = default;
  };

  struct Row {
    std::uint64_t total = 0;
    std::map<TokenId, std::uint64_t> next;
    friend bool operator==(const Row&, const Row&) = default;
  };
  using Table = std::map<std::vector<TokenId>, Row>;

  NgramModel(NgramConfig config, std::size_t vocab_size, std::uint64_t vocab_hash, TokenId eos)
      : config_(config), vocab_size_(vocab_size), vocab_hash_(vocab_hash), eos_(eos),
        tables_(static_cast<std::size_t>(config.order)) {
    if (config.order < 1) fail(ErrorKind::invalid_argument, "n-gram order must be >= 1");
    if (!(config.k > 0.0)) fail(ErrorKind::invalid_argument, "add-k constant must be > 0");
    if (eos >= vocab_size) fail(ErrorKind::invalid_argument, "eos id out of range");
  }

  NgramModel(NgramConfig config, const Vocabulary& vocab)
      : NgramModel(config, vocab.size(), vocab.hash(), vocab.eos_id()) {}

  const NgramConfig& config() const { return config_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::uint64_t vocab_hash() const { return vocab_hash_; }
  TokenId eos_id() const { return eos_; }

  /// tables()[m] maps m-token contexts to next-token counts.
  const std::vector<Table>& tables() const { return tables_; }
  std::vector<Table>& mutable_tables() { return tables_; }

  Context start_context() const { return {}; }

  /// Uses the longest available context up to order-1 tokens; an empty
  /// context yields the unigram distribution.
  std::vector<double> next_distribution(const Context& ctx) const {
    const std::size_t m = std::min(ctx.history.size(), static_cast<std::size_t>(config_.order - 1));
    const Row* row = nullptr;
    const auto& table = tables_[m];
    auto it = table.find(std::vector<TokenId>(ctx.history.end() - static_cast<std::ptrdiff_t>(m),
                                              ctx.history.end()));
    if (it != table.end()) row = &it->second;

    const double denom = static_cast<double>(row ? row->total : 0) +
                         config_.k * static_cast<double>(vocab_size_);
    std::vector<double> dist(vocab_size_, config_.k / denom);
    if (row) {
      for (auto [tok, n] : row->next) dist[tok] = (static_cast<double>(n) + config_.k) / denom;
    }
    return dist;
  }

  Context advance(const Context& ctx, TokenId token) const {
    if (token >= vocab_size_)
      fail(ErrorKind::invalid_argument, "advance: token index " + std::to_string(token) + " out of range");
    Context next = ctx;
    next.history.push_back(token);
    const auto keep = static_cast<std::size_t>(config_.order - 1);
    if (next.history.size() > keep)
      next.history.erase(next.history.begin(),
                         next.history.end() - static_cast<std::ptrdiff_t>(keep));
    return next;
  }

  /// Adds counts for every order <= n. The stream is read as if preceded by
  /// `<eos>`, matching the context generation starts from.
  void observe(std::span<const TokenId> stream) {
    Context ctx = message_start(*this);
    for (TokenId t : stream) {
      if (t >= vocab_size_) fail(ErrorKind::invalid_argument, "train_ngram: token out of range");
      for (std::size_t m = 0; m < tables_.size() && m <= ctx.history.size(); ++m) {
        std::vector<TokenId> key(ctx.history.end() - static_cast<std::ptrdiff_t>(m), ctx.history.end());
        Row& row = tables_[m][std::move(key)];
        ++row.total;
        ++row.next[t];
      }
      ctx = advance(ctx, t);
    }
  }

  friend bool operator==(const NgramModel& a, const NgramModel& b) {
    return a.config_.order == b.config_.order && a.config_.k == b.config_.k &&
           a.vocab_size_ == b.vocab_size_ && a.vocab_hash_ == b.vocab_hash_ && a.eos_ == b.eos_ &&
           a.tables_ == b.tables_;
  }

 private:
  NgramConfig config_;
  std::size_t vocab_size_;
  std::uint64_t vocab_hash_;
  TokenId eos_;
  std::vector<Table> tables_;
};

inline NgramModel train_ngram(std::span<const TokenId> stream, const Vocabulary& vocab,
                              const NgramConfig& config) {
  NgramModel model(config, vocab);
  model.observe(stream);
  return model;
}

static_assert(LanguageModel<NgramModel>);

}  // namespace stegolstm
