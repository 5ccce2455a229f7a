#pragma once

// stegolstm command-line driver. Kept in a header so tests can call run()
// in-process with their own streams.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "stegolstm/stegolstm.hpp"

namespace stegolstm::cli {

struct Streams {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

namespace detail {

inline std::shared_ptr<const Vocabulary> load_vocab(const std::string& path) {
  std::istringstream in(read_text_file(path));
  return std::make_shared<const Vocabulary>(Vocabulary::parse(in));
}

inline StegoKey load_key(const std::string& path, std::shared_ptr<const Vocabulary> vocab) {
  return deserialize_key(read_text_file(path), std::move(vocab));
}

inline Framing parse_framing(const std::string& s) {
  if (s == "raw") return Framing::raw;
  if (s == "length") return Framing::length_prefixed;
  fail(ErrorKind::invalid_argument, "framing must be 'raw' or 'length'");
}

inline SelectMode parse_mode(const std::string& s) {
  if (s == "greedy") return SelectMode::greedy;
  if (s == "sample") return SelectMode::sample;
  fail(ErrorKind::invalid_argument, "mode must be 'greedy' or 'sample'");
}

inline std::string fixed3(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(3) << v;
  return ss.str();
}

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return 2;
    case ErrorKind::format:           return 3;
    case ErrorKind::hash_mismatch:    return 4;
    case ErrorKind::vocabulary:       return 5;
    case ErrorKind::decode:           return 6;
    case ErrorKind::training:         return 7;
    case ErrorKind::io:               return 8;
  }
  return 1;
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, Streams io) {
  CLI::App app{"Hide bit strings in language-model-generated text", "stegolstm"};
  app.require_subcommand(1);

  // prep
  auto* prep = app.add_subcommand("prep", "Tokenize a corpus and build its vocabulary");
  std::string prep_input, prep_tokens, prep_vocab;
  bool no_lowercase = false, keep_users = false, drop_rt = false;
  std::size_t max_vocab = 0;
  std::uint64_t min_count = 0;
  prep->add_option("--input", prep_input, "UTF-8 text, one message per line")->required()->check(CLI::ExistingFile);
  prep->add_option("--tokens", prep_tokens, "Output token file")->required();
  prep->add_option("--vocab", prep_vocab, "Output vocabulary file")->required();
  prep->add_flag("--no-lowercase", no_lowercase);
  prep->add_flag("--keep-users-urls", keep_users, "Do not replace @names and URLs");
  prep->add_flag("--drop-rt", drop_rt, "Drop messages starting with RT");
  prep->add_option("--max-vocab", max_vocab, "Cap on |V| including <unk>/<eos> (0 = none)");
  prep->add_option("--min-count", min_count);

  // train
  auto* train = app.add_subcommand("train", "Train a language model");
  std::string backend = "ngram", train_tokens, train_vocab, train_out, preset = "desk";
  int order = 3, epochs = 5;
  double add_k = 0.01;
  std::uint64_t train_seed = 0;
  LstmHyperparams hp;
  int layers = 0, units = 0, embed = 0, unroll = 0, batch = 0;
  double lr = 0, decay = 0, clip = -1, dropout = -1;
  train->add_option("--backend", backend)->check(CLI::IsMember({"ngram", "lstm"}));
  train->add_option("--tokens", train_tokens)->required()->check(CLI::ExistingFile);
  train->add_option("--vocab", train_vocab)->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out)->required();
  train->add_option("--order", order, "n-gram order");
  train->add_option("--k", add_k, "add-k smoothing constant");
  train->add_option("--preset", preset)->check(CLI::IsMember({"desk", "paper-twitter", "paper-enron"}));
  train->add_option("--layers", layers);
  train->add_option("--units", units);
  train->add_option("--embed", embed);
  train->add_option("--unroll", unroll);
  train->add_option("--batch", batch);
  train->add_option("--lr", lr);
  train->add_option("--decay", decay);
  train->add_option("--clip", clip, "Gradient norm clip (0 disables)");
  train->add_option("--dropout", dropout);
  train->add_option("--epochs", epochs);
  train->add_option("--seed", train_seed);

  // keygen
  auto* keygen = app.add_subcommand("keygen", "Generate a shared key");
  std::string kg_vocab, kg_out;
  int block_bits = 2;
  std::size_t common = 0;
  std::uint64_t kg_seed = 0;
  bool eos_common = false;
  keygen->add_option("--vocab", kg_vocab)->required()->check(CLI::ExistingFile);
  keygen->add_option("--block-bits", block_bits, "Bits per carrier token (2^b bins)")->required();
  keygen->add_option("--common", common, "Number of most frequent tokens added to all bins");
  keygen->add_option("--seed", kg_seed)->required();
  keygen->add_flag("--eos-common", eos_common, "Allow <eos> as a common token");
  keygen->add_option("--out", kg_out)->required();

  // encode
  auto* enc = app.add_subcommand("encode", "Hide a payload in generated text");
  std::string enc_vocab, enc_key, enc_model, enc_input, enc_output, emit_tokens;
  std::string mode = "sample", framing = "length";
  double temp = 1.0;
  std::uint64_t enc_seed = 0, render_seed = 0;
  int max_common_run = 5;
  bool capitalize = false;
  enc->add_option("--vocab", enc_vocab)->required()->check(CLI::ExistingFile);
  enc->add_option("--key", enc_key)->required()->check(CLI::ExistingFile);
  enc->add_option("--model", enc_model)->required()->check(CLI::ExistingFile);
  enc->add_option("--mode", mode)->check(CLI::IsMember({"greedy", "sample"}));
  enc->add_option("--temp", temp);
  enc->add_option("--seed", enc_seed);
  enc->add_option("--framing", framing)->check(CLI::IsMember({"raw", "length"}));
  enc->add_option("--max-common-run", max_common_run);
  enc->add_option("--input", enc_input, "Payload file (default: stdin)");
  enc->add_option("--output", enc_output, "Rendered stegotext (default: stdout)");
  enc->add_option("--emit-tokens", emit_tokens, "Also write the token sequence, one per line");
  enc->add_flag("--capitalize", capitalize);
  enc->add_option("--render-seed", render_seed, "Seed for mock usernames/URLs");

  // decode
  auto* dec = app.add_subcommand("decode", "Recover a payload from stegotext");
  std::string dec_vocab, dec_key, dec_tokens, dec_rendered, dec_output, dec_framing = "length";
  bool print_bits = false;
  dec->add_option("--vocab", dec_vocab)->required()->check(CLI::ExistingFile);
  dec->add_option("--key", dec_key)->required()->check(CLI::ExistingFile);
  auto* tok_opt = dec->add_option("--tokens", dec_tokens, "Token file")->check(CLI::ExistingFile);
  auto* ren_opt = dec->add_option("--rendered", dec_rendered, "Rendered stegotext (re-tokenized)")->check(CLI::ExistingFile);
  tok_opt->excludes(ren_opt);
  dec->add_option("--framing", dec_framing)->check(CLI::IsMember({"raw", "length"}));
  dec->add_option("--output", dec_output, "Payload file (default: stdout)");
  dec->add_flag("--bits", print_bits, "Print the bit string instead of bytes");

  // eval
  auto* ev = app.add_subcommand("eval", "Perplexity and capacity reports");
  bool ev_ppl = false, ev_stego = false, ev_cap = false, unconstrained = false;
  std::string ev_vocab, ev_model, ev_key, ev_tokens, ev_stego_tokens, ev_json;
  int ev_bits = -1;
  double ev_fraction = 0.0, ev_words = 0.0;
  ev->add_flag("--ppl", ev_ppl);
  ev->add_flag("--stego-ppl", ev_stego);
  ev->add_flag("--capacity", ev_cap);
  ev->add_option("--vocab", ev_vocab)->check(CLI::ExistingFile);
  ev->add_option("--model", ev_model)->check(CLI::ExistingFile);
  ev->add_option("--key", ev_key)->check(CLI::ExistingFile);
  ev->add_flag("--unconstrained", unconstrained, "Use the single-bin key for --stego-ppl");
  ev->add_option("--tokens", ev_tokens, "Validation token file")->check(CLI::ExistingFile);
  ev->add_option("--stego-tokens", ev_stego_tokens, "Generated token file for empirical capacity")
      ->check(CLI::ExistingFile);
  ev->add_option("--block-bits", ev_bits);
  ev->add_option("--common-fraction", ev_fraction);
  ev->add_option("--words-per-message", ev_words);
  ev->add_option("--json", ev_json, "Also write the report as JSON");

  // roundtrip
  auto* rt = app.add_subcommand("roundtrip", "Encode/decode self-test over random trials");
  std::size_t trials = 1000;
  std::uint64_t rt_seed = 0;
  std::string rt_vocab, rt_model;
  rt->add_option("--trials", trials);
  rt->add_option("--seed", rt_seed);
  rt->add_option("--vocab", rt_vocab)->check(CLI::ExistingFile);
  rt->add_option("--model", rt_model)->check(CLI::ExistingFile);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    io.out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    io.err << "error: usage: " << e.what() << '\n';
    return 64;
  }

  try {
    if (*prep) {
      CorpusConfig cfg;
      cfg.lowercase = !no_lowercase;
      cfg.replace_users_urls = !keep_users;
      cfg.drop_retweets = drop_rt;
      if (max_vocab) cfg.max_vocab = max_vocab;
      cfg.min_count = min_count;
      auto tokens = tokenize(read_text_file(prep_input), cfg);
      auto vocab = build_vocab(tokens, cfg);
      write_token_file(prep_tokens, tokens);
      write_text_file(prep_vocab, vocab.serialize());
      io.err << "tokens: " << tokens.size() << "\nvocab_size: " << vocab.size()
             << "\nvocab_hash: " << vocab.hash_hex() << '\n';
      return 0;
    }

    if (*train) {
      auto vocab = detail::load_vocab(train_vocab);
      const auto stream = vocab->encode(read_token_file(train_tokens));
      if (backend == "ngram") {
        save_model(train_ngram(stream, *vocab, {order, add_k}), train_out);
        io.err << "trained " << order << "-gram model on " << stream.size() << " tokens\n";
        return 0;
      }
      hp = preset == "paper-twitter" ? presets::paper_twitter()
           : preset == "paper-enron" ? presets::paper_enron()
                                     : presets::desk();
      if (layers) hp.layers = layers;
      if (units) hp.units = units;
      if (embed) hp.embed_dim = embed;
      if (unroll) hp.unroll_steps = unroll;
      if (batch) hp.batch_size = batch;
      if (lr > 0) hp.lr_init = lr;
      if (decay > 0) hp.lr_decay = decay;
      if (clip == 0) hp.clip_norm = std::nullopt;
      if (clip > 0) hp.clip_norm = clip;
      if (dropout >= 0) hp.dropout = dropout;
      auto result = train_lstm(stream, *vocab, hp, epochs, train_seed);
      for (const auto& e : result.history) {
        io.err << "epoch " << e.epoch << " train_ce " << e.train_ce << " valid_ce " << e.valid_ce
               << " lr " << e.learning_rate << (e.decayed ? " (decayed)" : "") << '\n';
      }
      save_model(std::move(result.model), train_out);
      return 0;
    }

    if (*keygen) {
      auto vocab = detail::load_vocab(kg_vocab);
      KeyOptions opts;
      opts.eos_common = eos_common;
      auto key = generate_key(vocab, block_bits, common, kg_seed, opts);
      write_text_file(kg_out, serialize_key(key));
      io.err << "bins: " << key.bin_count() << "\ncarriers: " << key.carrier_count()
             << "\ncommon: " << key.common().size() << '\n';
      return 0;
    }

    if (*enc) {
      auto vocab = detail::load_vocab(enc_vocab);
      auto key = detail::load_key(enc_key, vocab);
      auto model = load_model(enc_model, vocab.get());
      std::string raw = enc_input.empty()
                            ? std::string(std::istreambuf_iterator<char>(io.in), {})
                            : read_text_file(enc_input);
      Payload payload{{raw.begin(), raw.end()}, detail::parse_framing(framing)};
      GenPolicy policy{detail::parse_mode(mode), temp, enc_seed, max_common_run};
      auto text = std::visit([&](const auto& m) { return encode(payload, key, m, policy); }, model);
      auto toks = surfaces(text.tokens, *vocab);
      if (!emit_tokens.empty()) write_token_file(emit_tokens, toks);
      RenderOptions ropts;
      ropts.capitalize = capitalize;
      ropts.seed = render_seed;
      std::string rendered = render(toks, ropts) + "\n";
      if (enc_output.empty()) {
        io.out << rendered;
      } else {
        write_text_file(enc_output, rendered);
      }
      io.err << "tokens: " << text.tokens.size() << "\ncarriers: " << text.carrier_count
             << "\nencoded_bits: " << text.encoded_bits() << '\n';
      return 0;
    }

    if (*dec) {
      if (dec_tokens.empty() && dec_rendered.empty())
        fail(ErrorKind::invalid_argument, "decode needs --tokens or --rendered");
      auto vocab = detail::load_vocab(dec_vocab);
      auto key = detail::load_key(dec_key, vocab);
      std::vector<Token> toks = !dec_tokens.empty() ? read_token_file(dec_tokens)
                                                    : tokenize(read_text_file(dec_rendered));
      auto bits = decode(toks, key, detail::parse_framing(dec_framing));
      std::string payload;
      if (print_bits) {
        payload = bits_to_string(bits) + "\n";
      } else {
        auto bytes = bits_to_bytes(bits);
        payload.assign(bytes.begin(), bytes.end());
      }
      if (dec_output.empty()) {
        io.out << payload;
      } else {
        write_text_file(dec_output, payload);
      }
      return 0;
    }

    if (*ev) {
      if (!ev_ppl && !ev_stego && !ev_cap)
        fail(ErrorKind::invalid_argument, "eval needs at least one of --ppl, --stego-ppl, --capacity");
      nlohmann::ordered_json report;
      std::shared_ptr<const Vocabulary> vocab;
      if (!ev_vocab.empty()) vocab = detail::load_vocab(ev_vocab);
      auto need = [&](bool ok, const char* what) {
        if (!ok) fail(ErrorKind::invalid_argument, std::string("eval: missing ") + what);
      };

      if (ev_ppl || ev_stego) {
        need(vocab != nullptr, "--vocab");
        need(!ev_model.empty(), "--model");
        need(!ev_tokens.empty(), "--tokens");
        auto model = load_model(ev_model, vocab.get());
        const auto stream = vocab->encode(read_token_file(ev_tokens));
        if (ev_ppl) {
          auto r = std::visit([&](const auto& m) { return perplexity(m, stream); }, model);
          io.out << "ppl.tokens: " << r.token_count << "\nppl.mean_nll: " << r.mean_nll
                 << "\nppl.perplexity: " << r.perplexity << '\n';
          report["ppl"] = {{"tokens", r.token_count}, {"mean_nll", r.mean_nll}, {"perplexity", r.perplexity}};
        }
        if (ev_stego) {
          need(unconstrained || !ev_key.empty(), "--key or --unconstrained");
          auto key = unconstrained ? unconstrained_key(vocab) : detail::load_key(ev_key, vocab);
          auto r = std::visit([&](const auto& m) { return stego_perplexity(m, key, stream); }, model);
          io.out << "stego_ppl.bins: " << key.bin_count() << "\nstego_ppl.tokens: " << r.report.token_count
                 << "\nstego_ppl.skipped_reserved: " << r.skipped_reserved
                 << "\nstego_ppl.mean_nll: " << r.report.mean_nll
                 << "\nstego_ppl.perplexity: " << r.report.perplexity << '\n';
          report["stego_ppl"] = {{"bins", key.bin_count()},
                                 {"tokens", r.report.token_count},
                                 {"skipped_reserved", r.skipped_reserved},
                                 {"zero_positions", r.zero_positions},
                                 {"mean_nll", r.report.mean_nll},
                                 {"perplexity", r.report.perplexity}};
        }
      }

      if (ev_cap) {
        CapacityReport r;
        if (!ev_stego_tokens.empty()) {
          need(vocab != nullptr, "--vocab");
          need(!ev_key.empty(), "--key");
          auto key = detail::load_key(ev_key, vocab);
          r = capacity_empirical({lookup_tokens(read_token_file(ev_stego_tokens), *vocab)}, key);
        } else {
          need(ev_bits >= 0, "--block-bits");
          r = capacity(ev_bits, ev_fraction);
        }
        if (ev_words > 0) r.bits_per_message = r.bits_per_word * ev_words;
        io.out << "capacity.block_bits: " << r.block_bits
               << "\ncapacity.common_fraction: " << detail::fixed3(r.common_fraction)
               << "\ncapacity.bits_per_word: " << detail::fixed3(r.bits_per_word) << " bits/word\n";
        if (r.bits_per_message)
          io.out << "capacity.bits_per_message: " << detail::fixed3(*r.bits_per_message) << " bits/message\n";
        nlohmann::ordered_json j = {{"block_bits", r.block_bits},
                                    {"common_fraction", r.common_fraction},
                                    {"bits_per_word", r.bits_per_word}};
        if (r.bits_per_message) j["bits_per_message"] = *r.bits_per_message;
        if (r.total_tokens) {
          j["total_tokens"] = r.total_tokens;
          j["common_tokens"] = r.common_tokens;
          j["carrier_tokens"] = r.carrier_tokens;
        }
        report["capacity"] = j;
      }
      if (!ev_json.empty()) write_text_file(ev_json, report.dump(2) + "\n");
      return 0;
    }

    if (*rt) {
      std::shared_ptr<const Vocabulary> vocab;
      std::optional<AnyModel> model;
      if (!rt_vocab.empty()) {
        vocab = detail::load_vocab(rt_vocab);
        if (!rt_model.empty()) model = load_model(rt_model, vocab.get());
      } else {
        // Synthetic 40-token vocabulary with an n-gram trained on a random stream.
        std::vector<Token> stream;
        Rng gen(rt_seed);
        for (int i = 0; i < 4000; ++i) {
          const auto r = uniform_below(gen, 40);
          stream.push_back("w" + std::to_string(r * r / 40));
        }
        vocab = std::make_shared<const Vocabulary>(build_vocab(stream));
        model = train_ngram(vocab->encode(stream), *vocab, {2, 0.1});
      }
      if (!model) model = NgramModel({1, 1.0}, *vocab);

      Rng rng(rt_seed);
      std::size_t ok = 0;
      for (std::size_t trial = 0; trial < trials; ++trial) {
        const int bb = 1 + static_cast<int>(uniform_below(rng, 3));
        const std::size_t nc = uniform_below(rng, 2) ? 10 : 0;
        const std::size_t len = 1 + uniform_below(rng, 256);
        std::vector<std::uint8_t> data(len);
        for (auto& b : data) b = static_cast<std::uint8_t>(uniform_below(rng, 256));
        const Framing fr = uniform_below(rng, 2) ? Framing::length_prefixed : Framing::raw;
        GenPolicy pol{uniform_below(rng, 2) ? SelectMode::greedy : SelectMode::sample, 1.0, rng(), 5};
        auto key = generate_key(vocab, bb, std::min(nc, vocab->size() / 4), rng());
        const Payload payload{data, fr};
        auto text = std::visit([&](const auto& m) { return encode(payload, key, m, pol); }, *model);
        const auto expected = fr == Framing::raw ? framed_bits(bytes_to_bits(data), fr, bb) : bytes_to_bits(data);
        if (decode(text.tokens, key, fr) == expected) ++ok;
      }
      io.out << "roundtrip: " << ok << "/" << trials << " successes\n";
      return ok == trials ? 0 : 1;
    }
  } catch (const Error& e) {
    io.err << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return detail::exit_code(e.kind());
  } catch (const std::exception& e) {
    io.err << "error: internal: " << e.what() << '\n';
    return 70;
  }
  return 0;
}

}  // namespace stegolstm::cli
