#include <gtest/gtest.h>

#include <set>

#include "fixtures.hpp"
#include "stegolstm/keying.hpp"

namespace stegolstm {
namespace {

std::shared_ptr<const Vocabulary> vocab_with_carriers(std::size_t n) {
  std::vector<Token> toks;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r <= i; ++r) toks.push_back("t" + std::to_string(i));
  return std::make_shared<const Vocabulary>(build_vocab(toks));
}

void expect_partition(const StegoKey& key) {
  const auto& v = key.vocab();
  std::set<TokenId> seen;
  std::size_t lo = SIZE_MAX, hi = 0;
  for (std::size_t b = 0; b < key.bin_count(); ++b) {
    lo = std::min(lo, key.bins()[b].size());
    hi = std::max(hi, key.bins()[b].size());
    for (TokenId t : key.bins()[b]) {
      EXPECT_TRUE(seen.insert(t).second) << "duplicate carrier " << v.token(t);
      auto r = bin_of_token(key, t);
      ASSERT_TRUE(std::holds_alternative<BitBlock>(r));
      EXPECT_EQ(std::get<BitBlock>(r).value, b);
    }
  }
  for (TokenId t : key.common()) {
    EXPECT_FALSE(seen.count(t));
    EXPECT_TRUE(std::holds_alternative<CommonMarker>(bin_of_token(key, t)));
  }
  for (TokenId t = 0; t < v.size(); ++t) {
    const bool is_common = std::find(key.common().begin(), key.common().end(), t) != key.common().end();
    if (!v.is_reserved(t) && !is_common) {
      EXPECT_TRUE(seen.count(t)) << v.token(t) << " not covered";
    }
  }
  EXPECT_LE(hi - lo, 1u);
}

TEST(GenerateKey, EightCarriersFourBins) {
  auto v = vocab_with_carriers(8);
  auto key = generate_key(v, 2, 0, 42);
  ASSERT_EQ(key.bin_count(), 4u);
  for (const auto& b : key.bins()) EXPECT_EQ(b.size(), 2u);
  expect_partition(key);
}

TEST(GenerateKey, NineCarriersRoundRobin) {
  auto key = generate_key(vocab_with_carriers(9), 2, 0, 3);
  std::vector<std::size_t> sizes;
  for (const auto& b : key.bins()) sizes.push_back(b.size());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 2, 2, 2}));
}

TEST(GenerateKey, CommonTokensAreMostFrequentNonReserved) {
  auto v = vocab_with_carriers(20);
  auto key = generate_key(v, 1, 3, 5);
  std::vector<std::string> common;
  for (auto t : key.common()) common.push_back(v->token(t));
  EXPECT_EQ(common, (std::vector<std::string>{"t19", "t18", "t17"}));
  expect_partition(key);
  EXPECT_EQ(key.carrier_count(), 17u);

  KeyOptions opts;
  opts.eos_common = true;
  auto with_eos = generate_key(v, 1, 3, 5, opts);
  EXPECT_TRUE(with_eos.is_common(v->eos_id()));
}

TEST(GenerateKey, DeterministicInSeed) {
  auto v = vocab_with_carriers(50);
  EXPECT_EQ(generate_key(v, 3, 4, 99), generate_key(v, 3, 4, 99));
  EXPECT_NE(generate_key(v, 3, 4, 99).bins(), generate_key(v, 3, 4, 100).bins());
}

TEST(GenerateKey, Errors) {
  auto v = vocab_with_carriers(8);
  EXPECT_THROW(generate_key(v, 0, 0, 1), Error);
  EXPECT_THROW(generate_key(v, 4, 0, 1), Error);   // 16 bins > 8 carriers
  EXPECT_THROW(generate_key(v, 2, 6, 1), Error);   // too few carriers left
  EXPECT_THROW(generate_key(v, 17, 0, 1), Error);  // above the cap
  KeyOptions opts;
  opts.max_block_bits = 1;
  EXPECT_THROW(generate_key(v, 2, 0, 1, opts), Error);
}

TEST(BinOfToken, FourBinExample) {
  testing::FourBinKey fx;
  auto r = bin_of_token(*fx.key, fx.id("attaching"));
  ASSERT_TRUE(std::holds_alternative<BitBlock>(r));
  EXPECT_EQ(std::get<BitBlock>(r).to_string(), "01");
  EXPECT_EQ(std::get<BitBlock>(bin_of_token(*fx.key, fx.id("I"))).to_string(), "10");
  EXPECT_EQ(std::get<BitBlock>(bin_of_token(*fx.key, fx.id("am"))).to_string(), "00");
  EXPECT_EQ(std::get<BitBlock>(bin_of_token(*fx.key, fx.id("NDA"))).to_string(), "11");
  EXPECT_THROW(bin_of_token(*fx.key, fx.vocab->unk_id()), Error);
  EXPECT_THROW(bin_of_token(*fx.key, static_cast<TokenId>(fx.vocab->size())), Error);
}

TEST(KeyFile, RoundTripIsByteIdentical) {
  auto v = vocab_with_carriers(30);
  KeyOptions opts;
  opts.eos_common = true;
  auto key = generate_key(v, 2, 4, 1234, opts);
  const auto text = serialize_key(key);
  EXPECT_EQ(text.rfind("STEGOKEY v1\nblock_bits: 2\nvocab_hash: " + v->hash_hex() + "\nseed: 1234\ncommon:\t", 0), 0u);
  EXPECT_NE(text.find("\nbin 10:\t"), std::string::npos);
  auto back = deserialize_key(text, v);
  EXPECT_EQ(back, key);
  EXPECT_EQ(serialize_key(back), text);
}

TEST(KeyFile, RejectsDuplicateToken) {
  testing::FourBinKey fx;
  auto text = serialize_key(*fx.key);
  auto pos = text.find("bin 01:\t");
  text.insert(pos + 8, "am\t");  // "am" already in bin 00
  EXPECT_THROW(deserialize_key(text, fx.vocab), Error);
}

TEST(KeyFile, RejectsForeignVocabulary) {
  testing::FourBinKey fx;
  auto text = serialize_key(*fx.key);
  auto other = vocab_with_carriers(20);
  try {
    deserialize_key(text, other);
    FAIL() << "expected hash mismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::hash_mismatch);
  }
}

TEST(KeyFile, RejectsMalformed) {
  testing::FourBinKey fx;
  const auto good = serialize_key(*fx.key);
  EXPECT_THROW(deserialize_key("STEGOKEY v2\n", fx.vocab), Error);
  EXPECT_THROW(deserialize_key(good.substr(0, good.size() - 20), fx.vocab), Error);
  auto unbalanced = good;
  // move "weather" from bin 00 to bin 11 -> sizes 2,3,4,5
  unbalanced.replace(unbalanced.find("\tweather"), 8, "");
  unbalanced.replace(unbalanced.find("bin 11:\t"), 8, "bin 11:\tweather\t");
  EXPECT_THROW(deserialize_key(unbalanced, fx.vocab), Error);
  auto missing = good;
  missing.replace(missing.find("\tweather"), 8, "");  // not covered
  EXPECT_THROW(deserialize_key(missing, fx.vocab), Error);
  EXPECT_THROW(deserialize_key(good + "junk\n", fx.vocab), Error);
}

TEST(UnconstrainedKey, SingleBinCoversEverything) {
  auto v = vocab_with_carriers(5);
  auto key = unconstrained_key(v);
  EXPECT_EQ(key.bin_count(), 1u);
  EXPECT_EQ(key.block_bits(), 0);
  for (TokenId t = 0; t < v->size(); ++t) EXPECT_EQ(key.role(t), 0);
  EXPECT_THROW(serialize_key(key), Error);
}

}  // namespace
}  // namespace stegolstm
