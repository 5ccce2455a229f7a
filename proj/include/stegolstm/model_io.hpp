#pragma once

// Model container: a text header followed by a little-endian binary payload.
// Layout is documented in docs/FORMATS.md.

#include <bit>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>

#include "stegolstm/corpus.hpp"
#include "stegolstm/error.hpp"
#include "stegolstm/hash.hpp"
#include "stegolstm/lstm.hpp"
#include "stegolstm/ngram.hpp"

namespace stegolstm {

using AnyModel = std::variant<NgramModel, LstmModel>;

inline std::string_view backend_name(const AnyModel& m) {
  return std::holds_alternative<NgramModel>(m) ? "ngram" : "lstm";
}

namespace detail {

static_assert(std::endian::native == std::endian::little, "payload codec assumes little-endian host");

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    bytes_.append(buf, sizeof(T));
  }
  std::string take() { return std::move(bytes_); }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) fail(ErrorKind::format, "model payload truncated");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double parse_double(const std::string& s, const std::string& field) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') fail(ErrorKind::format, "model header: bad value for " + field);
  return v;
}

inline long long parse_int(const std::string& s, const std::string& field) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::format, "model header: bad value for " + field);
  }
}

inline std::string ngram_payload(const NgramModel& m) {
  ByteWriter w;
  for (const auto& table : m.tables()) {
    w.put<std::uint64_t>(table.size());
    for (const auto& [ctx, row] : table) {
      for (TokenId t : ctx) w.put<std::uint32_t>(t);
      w.put<std::uint64_t>(row.next.size());
      for (auto [tok, n] : row.next) {
        w.put<std::uint32_t>(tok);
        w.put<std::uint64_t>(n);
      }
    }
  }
  return w.take();
}

inline std::string lstm_payload(const LstmModel& m) {
  ByteWriter w;
  for (double p : m.params()) w.put<double>(p);
  return w.take();
}

}  // namespace detail

inline std::string serialize_model(const AnyModel& any) {
  std::ostringstream out;
  std::string payload;
  out << "STEGOLM v1\n";
  out << "backend: " << backend_name(any) << '\n';
  std::visit([&](const auto& m) {
    out << "vocab_hash: " << to_hex(m.vocab_hash()) << '\n';
    out << "vocab_size: " << m.vocab_size() << '\n';
    out << "eos_id: " << m.eos_id() << '\n';
  }, any);
  if (const auto* ng = std::get_if<NgramModel>(&any)) {
    out << "order: " << ng->config().order << '\n';
    out << "k: " << detail::hexfloat(ng->config().k) << '\n';
    payload = detail::ngram_payload(*ng);
  } else {
    const auto& lm = std::get<LstmModel>(any);
    const auto& hp = lm.hyperparams();
    out << "layers: " << hp.layers << '\n';
    out << "units: " << hp.units << '\n';
    out << "embed_dim: " << hp.embed_dim << '\n';
    out << "unroll_steps: " << hp.unroll_steps << '\n';
    out << "batch_size: " << hp.batch_size << '\n';
    out << "lr_init: " << detail::hexfloat(hp.lr_init) << '\n';
    out << "lr_decay: " << detail::hexfloat(hp.lr_decay) << '\n';
    out << "clip_norm: " << (hp.clip_norm ? detail::hexfloat(*hp.clip_norm) : "none") << '\n';
    out << "dropout: " << detail::hexfloat(hp.dropout) << '\n';
    payload = detail::lstm_payload(lm);
  }
  out << "payload_bytes: " << payload.size() << '\n';
  std::string text = out.str();
  text += payload;
  return text;
}

/// Parses a model container. When `vocab` is given the model must have been
/// trained against exactly that vocabulary.
inline AnyModel deserialize_model(std::string_view bytes, const Vocabulary* vocab = nullptr) {
  std::map<std::string, std::string> header;
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) fail(ErrorKind::format, "model header truncated");
    std::string line(bytes.substr(pos, nl - pos));
    pos = nl + 1;
    return line;
  };
  if (next_line() != "STEGOLM v1") fail(ErrorKind::format, "missing 'STEGOLM v1' header");
  for (;;) {
    std::string line = next_line();
    auto colon = line.find(": ");
    if (colon == std::string::npos) fail(ErrorKind::format, "model header: malformed line '" + line + "'");
    std::string key = line.substr(0, colon);
    header[key] = line.substr(colon + 2);
    if (key == "payload_bytes") break;
  }
  auto field = [&](const std::string& k) -> const std::string& {
    auto it = header.find(k);
    if (it == header.end()) fail(ErrorKind::format, "model header: missing field '" + k + "'");
    return it->second;
  };
  const auto payload_size = static_cast<std::size_t>(detail::parse_int(field("payload_bytes"), "payload_bytes"));
  if (bytes.size() - pos != payload_size) fail(ErrorKind::format, "model payload size mismatch");
  detail::ByteReader reader(bytes.substr(pos));

  const std::string& hash_hex = field("vocab_hash");
  char* end = nullptr;
  const std::uint64_t hash = std::strtoull(hash_hex.c_str(), &end, 16);
  if (hash_hex.size() != 16 || *end != '\0') fail(ErrorKind::format, "model header: bad vocab_hash");
  const auto vocab_size = static_cast<std::size_t>(detail::parse_int(field("vocab_size"), "vocab_size"));
  const auto eos = static_cast<TokenId>(detail::parse_int(field("eos_id"), "eos_id"));
  if (vocab) {
    if (hash != vocab->hash() || vocab_size != vocab->size())
      fail(ErrorKind::hash_mismatch, "model vocab_hash " + hash_hex + " does not match vocabulary " +
                                         vocab->hash_hex());
  }

  const std::string& backend = field("backend");
  if (backend == "ngram") {
    NgramConfig cfg{static_cast<int>(detail::parse_int(field("order"), "order")),
                    detail::parse_double(field("k"), "k")};
    NgramModel model(cfg, vocab_size, hash, eos);
    auto& tables = model.mutable_tables();
    for (std::size_t m = 0; m < tables.size(); ++m) {
      const auto rows = reader.get<std::uint64_t>();
      for (std::uint64_t r = 0; r < rows; ++r) {
        std::vector<TokenId> ctx(m);
        for (auto& t : ctx) t = reader.get<std::uint32_t>();
        NgramModel::Row row;
        const auto entries = reader.get<std::uint64_t>();
        for (std::uint64_t e = 0; e < entries; ++e) {
          const auto tok = reader.get<std::uint32_t>();
          const auto n = reader.get<std::uint64_t>();
          if (tok >= vocab_size) fail(ErrorKind::format, "n-gram payload: token out of range");
          row.next[tok] = n;
          row.total += n;
        }
        tables[m].emplace(std::move(ctx), std::move(row));
      }
    }
    if (!reader.done()) fail(ErrorKind::format, "n-gram payload has trailing bytes");
    return model;
  }
  if (backend == "lstm") {
    LstmHyperparams hp;
    hp.layers = static_cast<int>(detail::parse_int(field("layers"), "layers"));
    hp.units = static_cast<int>(detail::parse_int(field("units"), "units"));
    hp.embed_dim = static_cast<int>(detail::parse_int(field("embed_dim"), "embed_dim"));
    hp.unroll_steps = static_cast<int>(detail::parse_int(field("unroll_steps"), "unroll_steps"));
    hp.batch_size = static_cast<int>(detail::parse_int(field("batch_size"), "batch_size"));
    hp.lr_init = detail::parse_double(field("lr_init"), "lr_init");
    hp.lr_decay = detail::parse_double(field("lr_decay"), "lr_decay");
    const auto& clip = field("clip_norm");
    hp.clip_norm = clip == "none" ? std::nullopt : std::optional<double>(detail::parse_double(clip, "clip_norm"));
    hp.dropout = detail::parse_double(field("dropout"), "dropout");
    LstmModel model(hp, vocab_size, hash, eos);
    auto params = model.mutable_params();
    if (payload_size != params.size() * sizeof(double))
      fail(ErrorKind::format, "LSTM payload size does not match hyperparameters");
    for (auto& p : params) p = reader.get<double>();
    return model;
  }
  fail(ErrorKind::format, "unknown backend '" + backend + "'");
}

inline void save_model(const AnyModel& model, const std::string& path) {
  write_text_file(path, serialize_model(model));
}

inline AnyModel load_model(const std::string& path, const Vocabulary* vocab = nullptr) {
  return deserialize_model(read_text_file(path), vocab);
}

}  // namespace stegolstm
