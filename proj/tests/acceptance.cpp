// Acceptance suite. Each test is named AC<n>_<what>; a listener prints one
// PASS/FAIL line per criterion after the run.

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "fixtures.hpp"

namespace stegolstm {
namespace {

std::map<std::string, std::string>& notes() {
  static std::map<std::string, std::string> n;
  return n;
}

void note(const std::string& ac, const std::string& text) {
  auto& s = notes()[ac];
  if (!s.empty()) s += "; ";
  s += text;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Shared models: a trigram on the first 90% of the desk corpus and a
// desk-preset LSTM trained for three epochs on the whole stream (its own
// 90/10 split).
struct Shared {
  testing::DeskCorpus desk;
  std::size_t split;
  NgramModel trigram;
  LstmTrainResult lstm;
  double lstm_seconds;

  Shared()
      : split(desk.ids.size() * 9 / 10),
        trigram(train_ngram(std::span<const TokenId>(desk.ids).first(split), *desk.vocab, {3, 0.01})),
        lstm(train_desk_lstm(desk, lstm_seconds)) {}

  std::span<const TokenId> valid() const { return std::span<const TokenId>(desk.ids).subspan(split); }

  static LstmTrainResult train_desk_lstm(const testing::DeskCorpus& d, double& secs) {
    auto t0 = std::chrono::steady_clock::now();
    auto r = train_lstm(d.ids, *d.vocab, presets::desk(), 3, 1);
    secs = seconds_since(t0);
    return r;
  }

  static Shared& get() {
    static Shared s;
    return s;
  }
};

/// Fixed next-token distribution independent of context.
struct FixedModel {
  struct Context {};
  std::vector<double> dist;
  std::uint64_t hash;
  TokenId eos;

  std::size_t vocab_size() const { return dist.size(); }
  std::uint64_t vocab_hash() const { return hash; }
  TokenId eos_id() const { return eos; }
  Context start_context() const { return {}; }
  std::vector<double> next_distribution(const Context&) const { return dist; }
  Context advance(const Context&, TokenId) const { return {}; }
};

// ---------------------------------------------------------------------------

TEST(Acceptance, AC1_RoundTrip) {
  auto& sh = Shared::get();
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(1);
  std::size_t ok = 0, total = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int bb = 1 + static_cast<int>(uniform_below(rng, 3));
    const std::size_t nc = uniform_below(rng, 2) ? 10 : 0;
    std::vector<std::uint8_t> data(1 + uniform_below(rng, 256));
    for (auto& b : data) b = static_cast<std::uint8_t>(uniform_below(rng, 256));
    const Framing framing = uniform_below(rng, 2) ? Framing::length_prefixed : Framing::raw;
    GenPolicy policy;
    policy.mode = uniform_below(rng, 2) ? SelectMode::greedy : SelectMode::sample;
    policy.seed = rng();
    auto key = generate_key(sh.desk.vocab, bb, nc, rng());
    const Payload payload{data, framing};
    Stegotext st = trial % 2 ? encode(payload, key, sh.lstm.model, policy) : encode(payload, key, sh.trigram, policy);

    // expected: exactly the embedded bits (payload for length framing,
    // whole-block prefix for raw)
    Bits expected = bytes_to_bits(data);
    if (framing == Framing::raw) expected.resize(expected.size() / static_cast<std::size_t>(bb) * static_cast<std::size_t>(bb));
    ++total;
    if (decode(st.tokens, key, framing) == expected) ++ok;
  }
  const double secs = seconds_since(t0);
  note("AC1", std::to_string(ok) + "/" + std::to_string(total) + " round trips in " + fmt("%.1f", secs) + " s");
  EXPECT_EQ(ok, 1000u);
  EXPECT_LT(secs, 300.0);
}

// ---------------------------------------------------------------------------

TEST(Acceptance, AC2_ExampleSentenceDecode) {
  testing::FourBinKey fx;
  const auto bits = bits_to_string(decode(std::vector<Token>{"I", "am", "attaching", "an", "NDA"}, *fx.key));
  note("AC2", "decoded " + bits);
  EXPECT_EQ(bits, "1000011011");
}

// ---------------------------------------------------------------------------

TEST(Acceptance, AC3_CapacityArithmetic) {
  EXPECT_EQ(capacity(2, 0.0).bits_per_word, 2.0);
  EXPECT_EQ(capacity(1, 0.35).bits_per_word, 0.65);
  auto msg = capacity(2, 0.0, 16.04);
  ASSERT_TRUE(msg.bits_per_message);
  EXPECT_EQ(*msg.bits_per_message, 32.08);

  // Empirical capacity vs. the carrier count of every generated text.
  auto& sh = Shared::get();
  Rng rng(3);
  std::size_t checked = 0;
  for (int i = 0; i < 200; ++i) {
    const int bb = 1 + static_cast<int>(uniform_below(rng, 4));
    auto key = generate_key(sh.desk.vocab, bb, uniform_below(rng, 2) ? 10 : 0, rng());
    std::vector<std::uint8_t> data(1 + uniform_below(rng, 64));
    for (auto& b : data) b = static_cast<std::uint8_t>(uniform_below(rng, 256));
    GenPolicy policy;
    policy.seed = rng();
    auto st = encode(Payload{data, Framing::length_prefixed}, key, sh.trigram, policy);
    auto r = capacity_empirical({st.tokens}, key);
    const std::size_t commons = st.tokens.size() - st.carrier_count;
    ASSERT_EQ(r.carrier_tokens, st.carrier_count);
    ASSERT_EQ(r.common_tokens, commons);
    ASSERT_EQ(r.total_tokens, st.tokens.size());
    ASSERT_EQ(r.bits_per_word, static_cast<double>(st.encoded_bits()) / static_cast<double>(st.tokens.size()));
    ++checked;
  }
  note("AC3", "2.000, 0.650 bits/word, 32.08 bits/message; " + std::to_string(checked) + " corpora consistent");
}

// ---------------------------------------------------------------------------

TEST(Acceptance, AC4_PerplexityTrend) {
  auto& sh = Shared::get();
  const auto t0 = std::chrono::steady_clock::now();
  auto valid = sh.valid();
  auto ppl = [&](int bb, std::size_t common) {
    if (bb == 0) return stego_perplexity(sh.trigram, unconstrained_key(sh.desk.vocab), valid).report.perplexity;
    auto key = generate_key(sh.desk.vocab, bb, common, 2017);
    return stego_perplexity(sh.trigram, key, valid).report.perplexity;
  };
  std::vector<double> plain, with_common;
  for (int bb = 0; bb <= 3; ++bb) plain.push_back(ppl(bb, 0));
  for (int bb = 1; bb <= 3; ++bb) with_common.push_back(ppl(bb, 10));

  std::ostringstream s;
  s.precision(1);
  s << std::fixed << "trigram ppl 1/2/4/8 bins: " << plain[0] << "/" << plain[1] << "/" << plain[2] << "/"
    << plain[3] << ", with 10 common 2/4/8: " << with_common[0] << "/" << with_common[1] << "/" << with_common[2];
  note("AC4", s.str());
  for (std::size_t i = 1; i < plain.size(); ++i) EXPECT_GT(plain[i], plain[i - 1]) << "bins " << (1 << i);
  for (std::size_t i = 0; i < with_common.size(); ++i)
    EXPECT_LT(with_common[i], plain[i + 1]) << "common tokens at " << (2 << i) << " bins";
  const double secs = seconds_since(t0) + sh.lstm_seconds;
  EXPECT_LT(secs, 1800.0);
}

// ---------------------------------------------------------------------------

TEST(Acceptance, AC5_MonteCarloOracle) {
  // |V| = 50: 48 words plus <eos>/<unk>, random fixed distribution
  std::vector<Token> toks;
  for (int i = 0; i < 48; ++i)
    for (int r = 0; r <= i % 7; ++r) toks.push_back("v" + std::to_string(i));
  auto vocab = std::make_shared<const Vocabulary>(build_vocab(toks));
  ASSERT_EQ(vocab->size(), 50u);
  Rng rng(50);
  std::vector<double> dist(50);
  double z = 0.0;
  for (auto& p : dist) z += (p = 0.05 + uniform_unit(rng));
  for (auto& p : dist) p /= z;
  auto key = generate_key(vocab, 2, 3, 8);

  const std::size_t n = 100000;
  std::vector<std::size_t> hits(50, 0);
  GenPolicy policy;  // sample, T = 1
  for (std::size_t i = 0; i < n; ++i) {
    SelectionMask mask{static_cast<std::uint32_t>(uniform_below(rng, 4)), true, {}};
    ++hits[select_masked(dist, key, mask, policy, rng)];
  }
  double worst = 0.0;
  for (TokenId w = 0; w < 50; ++w) {
    const double p = stego_word_prob(dist, key, w);
    const double freq = static_cast<double>(hits[w]) / n;
    if (p == 0.0) {
      EXPECT_EQ(hits[w], 0u) << vocab->token(w);
      continue;
    }
    const double se = std::sqrt(p * (1 - p) / n);
    worst = std::max(worst, std::abs(freq - p) / se);
    EXPECT_LE(std::abs(freq - p), 3 * se) << vocab->token(w) << " p=" << p << " freq=" << freq;
  }
  note("AC5", "max deviation " + fmt("%.2f", worst) + " standard errors over 50 words");
}

TEST(Acceptance, AC5_FourTokenHandValues) {
  auto vocab = std::make_shared<const Vocabulary>(
      build_vocab({"w1", "w1", "w1", "w1", "w2", "w2", "w2", "w3", "w3", "w4"}));
  StegoKey key(vocab, 1, {{0, 1}, {2, 3}}, {}, 0);
  std::vector<double> dist(vocab->size(), 0.0);
  dist[0] = 0.4;
  dist[1] = 0.3;
  dist[2] = 0.2;
  dist[3] = 0.1;
  // p / bin mass / number of bins, by hand
  EXPECT_NEAR(stego_word_prob(dist, key, 0), 2.0 / 7.0, 1e-9);
  EXPECT_NEAR(stego_word_prob(dist, key, 1), 1.5 / 7.0, 1e-9);
  EXPECT_NEAR(stego_word_prob(dist, key, 2), 1.0 / 3.0, 1e-9);
  EXPECT_NEAR(stego_word_prob(dist, key, 3), 1.0 / 6.0, 1e-9);
  note("AC5", "4-token example " + fmt("%.4f", stego_word_prob(dist, key, 0)) + "/" +
                  fmt("%.4f", stego_word_prob(dist, key, 1)) + "/" + fmt("%.4f", stego_word_prob(dist, key, 2)) +
                  "/" + fmt("%.4f", stego_word_prob(dist, key, 3)));
}

// ---------------------------------------------------------------------------

template <LanguageModel M>
void check_degenerate(const M& model, const StegoKey& key, std::span<const TokenId> stream,
                      std::span<const TokenId> corpus, std::uint64_t seed, const std::string& label) {
  const double plain = perplexity(model, stream).perplexity;
  const double stego = stego_perplexity(model, key, stream).report.perplexity;
  EXPECT_LE(std::abs(stego - plain), 1e-9 * plain) << label;

  Rng rng(seed);
  GenPolicy greedy;
  greedy.mode = SelectMode::greedy;
  std::size_t same = 0;
  for (int c = 0; c < 100; ++c) {
    auto ctx = message_start(model);
    const auto start = uniform_below(rng, corpus.size() - 20);
    const auto len = uniform_below(rng, 12);
    for (std::size_t i = 0; i < len; ++i) ctx = model.advance(ctx, corpus[start + i]);

    // plain greedy decoding, lowest index on ties
    std::vector<TokenId> expected;
    auto g = ctx;
    for (int i = 0; i < 15; ++i) {
      auto d = model.next_distribution(g);
      TokenId best = 0;
      for (TokenId t = 1; t < d.size(); ++t)
        if (d[t] > d[best]) best = t;
      expected.push_back(best);
      g = model.advance(g, best);
    }
    std::vector<BitBlock> blocks(15, BitBlock{0, 0});
    if (encode_blocks(blocks, key, model, greedy, ctx).tokens == expected) ++same;
  }
  EXPECT_EQ(same, 100u) << label;
  note("AC6", label + ": ppl " + fmt("%.3f", plain) + " vs " + fmt("%.3f", stego) + ", greedy " +
                  std::to_string(same) + "/100 identical");
}

TEST(Acceptance, AC6_DegenerateKey) {
  auto& sh = Shared::get();
  auto key = unconstrained_key(sh.desk.vocab);
  check_degenerate(sh.trigram, key, sh.valid(), sh.desk.ids, 6, "trigram");
  check_degenerate(sh.lstm.model, key, sh.valid().first(3000), sh.desk.ids, 7, "lstm");
}

// ---------------------------------------------------------------------------

TEST(Acceptance, AC7_GradientCheck) {
  LstmHyperparams hp;
  hp.layers = 1;
  hp.units = 8;
  hp.embed_dim = 4;
  LstmModel model(hp, 6, 0, 0);
  model.initialize(77, 0.5);
  Rng rng(78);
  const std::size_t batch = 2;
  std::vector<TokenId> in, out;
  for (int i = 0; i < 12; ++i) {
    in.push_back(static_cast<TokenId>(uniform_below(rng, 6)));
    out.push_back(static_cast<TokenId>(uniform_below(rng, 6)));
  }
  std::vector<double> grad;
  auto st = LstmBatchState::zeros(model, batch);
  lstm_segment_loss(model, in, out, batch, st, &grad);
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double orig = model.params()[i];
    auto loss = [&](double v) {
      model.mutable_params()[i] = v;
      auto s = LstmBatchState::zeros(model, batch);
      return lstm_segment_loss(model, in, out, batch, s);
    };
    const double numeric = (loss(orig + h) - loss(orig - h)) / (2 * h);
    model.mutable_params()[i] = orig;
    const double scale = std::max(std::abs(numeric), std::abs(grad[i]));
    if (scale < 1e-7) {
      EXPECT_LT(std::abs(numeric - grad[i]), 1e-9);
      continue;
    }
    const double rel = std::abs(numeric - grad[i]) / scale;
    worst = std::max(worst, rel);
    EXPECT_LE(rel, 1e-4) << "parameter " << i;
  }
  note("AC7", "gradient max relative error " + fmt("%.2e", worst));
}

TEST(Acceptance, AC7_TrainingReducesLoss) {
  auto& sh = Shared::get();
  const auto& hist = sh.lstm.history;
  ASSERT_EQ(hist.size(), 4u);
  const auto& hp = sh.lstm.model.hyperparams();
  double best = hist[0].valid_ce;
  std::ostringstream s;
  s.precision(3);
  s << std::fixed << "valid CE " << hist[0].valid_ce;
  for (std::size_t e = 1; e < hist.size(); ++e) {
    s << " -> " << hist[e].valid_ce << (hist[e].decayed ? " (lr decay)" : "");
    const bool improved = hist[e].valid_ce < hist[e - 1].valid_ce;
    const bool rule_fires = hist[e].valid_ce >= best - 1e-4;
    EXPECT_EQ(hist[e].decayed, rule_fires) << "epoch " << e;
    EXPECT_TRUE(improved || hist[e].decayed) << "epoch " << e;
    if (e + 1 < hist.size()) {
      const double next_lr = rule_fires ? hist[e].learning_rate / hp.lr_decay : hist[e].learning_rate;
      EXPECT_DOUBLE_EQ(hist[e + 1].learning_rate, next_lr);
    }
    best = std::min(best, hist[e].valid_ce);
  }
  EXPECT_LT(hist.back().valid_ce, hist[0].valid_ce);
  s << ", trained in " << sh.lstm_seconds << " s";
  note("AC7", s.str());
}

// ---------------------------------------------------------------------------

TEST(Acceptance, AC8_KeyInvariants) {
  auto& sh = Shared::get();
  const auto& v = *sh.desk.vocab;
  Rng rng(8);
  std::size_t failures = 0;
  for (int i = 0; i < 1000; ++i) {
    const int bb = 1 + static_cast<int>(uniform_below(rng, 8));
    const std::size_t nc = uniform_below(rng, 21);
    KeyOptions opts;
    opts.eos_common = uniform_below(rng, 2);
    auto key = generate_key(sh.desk.vocab, bb, nc, rng(), opts);

    std::vector<int> seen(v.size(), 0);
    for (const auto& bin : key.bins())
      for (TokenId t : bin) ++seen[t];
    for (TokenId t : key.common()) ++seen[t];
    bool good = key.bin_count() == (std::size_t{1} << bb);
    for (TokenId t = 0; t < v.size(); ++t) {
      if (seen[t] > 1) good = false;                        // disjoint
      if (seen[t] == 0 && !v.is_reserved(t)) good = false;  // covering
      if (seen[t] == 1 && t == v.unk_id()) good = false;
    }
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& bin : key.bins()) {
      lo = std::min(lo, bin.size());
      hi = std::max(hi, bin.size());
    }
    if (hi - lo > 1) good = false;
    const auto text = serialize_key(key);
    auto back = deserialize_key(text, sh.desk.vocab);
    if (!(back == key) || serialize_key(back) != text) good = false;
    if (!good) ++failures;
  }
  note("AC8", std::to_string(failures) + " failures in 1000 keys");
  EXPECT_EQ(failures, 0u);
}

// ---------------------------------------------------------------------------

TEST(Acceptance, AC9_CommonTokenTransparency) {
  auto& sh = Shared::get();
  Rng rng(9);
  std::size_t unchanged = 0;
  for (int i = 0; i < 100; ++i) {
    const int bb = 1 + static_cast<int>(uniform_below(rng, 3));
    auto key = generate_key(sh.desk.vocab, bb, 10, rng());
    std::vector<std::uint8_t> data(1 + uniform_below(rng, 32));
    for (auto& b : data) b = static_cast<std::uint8_t>(uniform_below(rng, 256));
    GenPolicy policy;
    policy.seed = rng();
    const Framing framing = i % 2 ? Framing::raw : Framing::length_prefixed;
    auto st = encode(Payload{data, framing}, key, sh.trigram, policy);
    const auto before = decode(st.tokens, key, framing);

    auto tokens = st.tokens;
    const auto inject = 1 + uniform_below(rng, 20);
    for (std::size_t k = 0; k < inject; ++k) {
      const auto pos = uniform_below(rng, tokens.size() + 1);
      const TokenId c = key.common()[uniform_below(rng, key.common().size())];
      tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(pos), c);
    }
    if (decode(tokens, key, framing) == before) ++unchanged;
  }
  note("AC9", std::to_string(unchanged) + "/100 decodes unchanged");
  EXPECT_EQ(unchanged, 100u);
}

// ---------------------------------------------------------------------------

class Summary : public ::testing::EmptyTestEventListener {
 public:
  void OnTestEnd(const ::testing::TestInfo& info) override {
    const std::string name = info.name();
    const auto us = name.find('_');
    if (name.rfind("AC", 0) != 0 || us == std::string::npos) return;
    const auto ac = name.substr(0, us);
    auto [it, fresh] = passed_.try_emplace(ac, true);
    it->second = it->second && info.result()->Passed();
  }

  void OnTestProgramEnd(const ::testing::UnitTest&) override {
    std::printf("\n==== acceptance summary ====\n");
    for (int i = 1; i <= 9; ++i) {
      const auto ac = "AC" + std::to_string(i);
      auto it = passed_.find(ac);
      const char* status = it == passed_.end() ? "NOT RUN" : it->second ? "PASS" : "FAIL";
      std::printf("%s %s  %s\n", ac.c_str(), status, notes()[ac].c_str());
    }
    std::fflush(stdout);
  }

 private:
  std::map<std::string, bool> passed_;
};

}  // namespace
}  // namespace stegolstm

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  ::testing::UnitTest::GetInstance()->listeners().Append(new stegolstm::Summary);
  return RUN_ALL_TESTS();
}
