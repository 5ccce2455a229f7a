#pragma once

#include <memory>
#include <string>
#include <vector>

#include "stegolstm/stegolstm.hpp"

namespace stegolstm::testing {

inline std::string desk_corpus_path() { return std::string(STEGOLSTM_DATA_DIR) + "/desk_corpus.txt"; }

/// Hand-written key: four bins over fourteen tokens, enough to spell
/// "I am attaching an NDA".
struct FourBinKey {
  std::shared_ptr<const Vocabulary> vocab;
  std::unique_ptr<StegoKey> key;

  FourBinKey() {
    const std::vector<std::vector<std::string>> bins = {
        {"This", "am", "weather"},
        {"was", "attaching", "today"},
        {"I", "better", "an", "Great"},
        {"great", "than", "NDA", "."},
    };
    std::vector<Token> all;
    for (const auto& b : bins) all.insert(all.end(), b.begin(), b.end());
    vocab = std::make_shared<const Vocabulary>(build_vocab(all));
    std::vector<std::vector<TokenId>> ids;
    for (const auto& b : bins) {
      ids.emplace_back();
      for (const auto& t : b) ids.back().push_back(*vocab->find(t));
    }
    key = std::make_unique<StegoKey>(vocab, 2, ids, std::vector<TokenId>{}, 0);
  }

  TokenId id(const std::string& t) const { return *vocab->find(t); }
};

/// Desk corpus tokenized with default settings and a vocabulary capped so
/// LSTM tests stay fast.
struct DeskCorpus {
  std::vector<Token> tokens;
  std::shared_ptr<const Vocabulary> vocab;
  std::vector<TokenId> ids;

  explicit DeskCorpus(std::size_t max_vocab = 0) {
    CorpusConfig cfg;
    if (max_vocab) cfg.max_vocab = max_vocab;
    tokens = tokenize(read_text_file(desk_corpus_path()), cfg);
    vocab = std::make_shared<const Vocabulary>(build_vocab(tokens, cfg));
    ids = vocab->encode(tokens);
  }
};

}  // namespace stegolstm::testing
