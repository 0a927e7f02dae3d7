// Copyright 2026 The clinidedup Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CLINIDEDUP_REDUNDANCY_HPP_
#define CLINIDEDUP_REDUNDANCY_HPP_

#include <algorithm>
#include <cmath>
#include <cstring>
#include <optional>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "clinidedup/corpus.hpp"
#include "clinidedup/error.hpp"
#include "clinidedup/parallel.hpp"
#include "clinidedup/preprocess.hpp"

namespace clinidedup {

// Next-token probability model. Context is oldest-first and may be shorter
// than the model uses; `padded` says whether the sequence starts at the
// beginning of a note (so start padding applies).
class TokenModel {
 public:
  virtual ~TokenModel() = default;
  virtual double log_prob(std::span<const std::string> context, std::string_view token,
                          bool padded) const = 0;
};

enum class PplMode { kLastToken, kFullSequence };

inline std::string_view to_string(PplMode m) {
  return m == PplMode::kLastToken ? "last_token" : "full_sequence";
}

inline std::optional<PplMode> parse_ppl_mode(std::string_view s) {
  if (s == "last-token" || s == "last_token") return PplMode::kLastToken;
  if (s == "full-sequence" || s == "full_sequence") return PplMode::kFullSequence;
  return std::nullopt;
}

// Token stream of a note: its sentences' tokens in order.
inline std::vector<std::string> note_tokens(std::string_view text,
                                            const Abbreviations& abbreviations = Abbreviations::defaults()) {
  std::vector<std::string> out;
  for (const auto& s : split_sentences(text, {}, abbreviations)) {
    for (auto& t : tokenize(s.normalized, abbreviations)) out.push_back(std::move(t.text));
  }
  return out;
}

/// Add-k smoothed n-gram model. Counts are kept for every context length
/// from 0 to order-1 so that short contexts can back off. Sequences are
/// padded at the start with order-1 "<s>" symbols.
///
///   P(w | h) = (c(h, w) + k) / (c(h) + k * |V + UNK|)
class NgramModel : public TokenModel {
 public:
  static constexpr std::uint32_t kUnk = 0;
  static constexpr std::uint32_t kBos = 1;
  static constexpr std::string_view kUnkToken = "<unk>";
  static constexpr std::string_view kBosToken = "<s>";

  NgramModel(int order, double k_smooth) : order_(order), k_(k_smooth) {
    if (order < 1) throw ConfigError("n-gram order must be >= 1");
    if (!(k_smooth > 0)) throw ConfigError("k_smooth must be > 0");
    tokens_ = {std::string(kUnkToken), std::string(kBosToken)};
    ids_.emplace(tokens_[0], kUnk);
    ids_.emplace(tokens_[1], kBos);
    counts_.resize(static_cast<std::size_t>(order));
  }

  // Model with an explicit vocabulary and no counts: every token gets
  // probability 1 / (|vocab| + 1).
  static NgramModel uniform(const std::vector<std::string>& vocab, int order = 1, double k = 1.0) {
    NgramModel m(order, k);
    for (const auto& t : vocab) m.intern(t);
    return m;
  }

  int order() const { return order_; }
  double k_smooth() const { return k_; }
  // |V| + 1 for UNK; the start symbol is never predicted.
  std::size_t outcome_count() const { return tokens_.size() - 1; }

  std::uint32_t id_of(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    return it == ids_.end() || it->second == kBos ? kUnk : it->second;
  }

  // Counts one token sequence (a note).
  void add_sequence(const std::vector<std::string>& tokens) {
    std::vector<std::uint32_t> padded(static_cast<std::size_t>(order_ - 1), kBos);
    for (const auto& t : tokens) padded.push_back(intern(t));
    for (std::size_t i = static_cast<std::size_t>(order_ - 1); i < padded.size(); ++i) {
      for (int len = 0; len < order_; ++len) {
        auto& cell = counts_[static_cast<std::size_t>(len)][pack(&padded[i - static_cast<std::size_t>(len)],
                                                                  static_cast<std::size_t>(len))];
        ++cell.total;
        ++cell.next[padded[i]];
      }
    }
  }

  // Probability of `next` after `context` (ids, oldest first). Only the
  // last order-1 context ids are used.
  double prob(std::span<const std::uint32_t> context, std::uint32_t next) const {
    const std::size_t len = std::min(context.size(), static_cast<std::size_t>(order_ - 1));
    const auto key = pack(context.data() + (context.size() - len), len);
    const double v = static_cast<double>(outcome_count());
    const auto& table = counts_[len];
    auto it = table.find(key);
    if (it == table.end()) return k_ / (k_ * v);
    const auto& cell = it->second;
    auto nt = cell.next.find(next);
    const double c = nt == cell.next.end() ? 0.0 : static_cast<double>(nt->second);
    return (c + k_) / (static_cast<double>(cell.total) + k_ * v);
  }

  double log_prob(std::span<const std::string> context, std::string_view token,
                  bool padded) const override {
    std::vector<std::uint32_t> ids;
    if (padded) ids.assign(static_cast<std::size_t>(order_ - 1), kBos);
    for (const auto& t : context) ids.push_back(id_of(t));
    return std::log(prob(ids, id_of(token)));
  }

  // Every predictable outcome: UNK and the training vocabulary.
  std::vector<std::uint32_t> outcomes() const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 0; i < tokens_.size(); ++i) {
      if (i != kBos) out.push_back(i);
    }
    return out;
  }

  const std::string& token(std::uint32_t id) const { return tokens_.at(id); }

  ordered_json to_json() const {
    ordered_json j;
    j["format"] = "clinidedup-ngram";
    j["version"] = 1;
    j["order"] = order_;
    j["k_smooth"] = k_;
    j["vocab"] = std::vector<std::string>(tokens_.begin() + 2, tokens_.end());
    std::vector<std::pair<std::vector<std::string>, std::vector<std::pair<std::string, std::uint64_t>>>> rows;
    for (std::size_t len = 0; len < counts_.size(); ++len) {
      for (const auto& [key, cell] : counts_[len]) {
        std::vector<std::string> ctx;
        for (std::size_t i = 0; i < len; ++i) ctx.push_back(tokens_[unpack(key, i)]);
        std::vector<std::pair<std::string, std::uint64_t>> next;
        for (const auto& [id, c] : cell.next) next.emplace_back(tokens_[id], c);
        std::sort(next.begin(), next.end());
        rows.emplace_back(std::move(ctx), std::move(next));
      }
    }
    std::sort(rows.begin(), rows.end());
    ordered_json counts = ordered_json::array();
    for (const auto& [ctx, next] : rows) {
      ordered_json r;
      r["context"] = ctx;
      ordered_json nx = ordered_json::array();
      for (const auto& [t, c] : next) nx.push_back(ordered_json::array({t, c}));
      r["next"] = std::move(nx);
      counts.push_back(std::move(r));
    }
    j["counts"] = std::move(counts);
    return j;
  }

  static NgramModel from_json(const json& j) {
    try {
      if (j.at("format").get<std::string>() != "clinidedup-ngram" || j.at("version").get<int>() != 1) {
        throw DataError("unsupported n-gram model format");
      }
      NgramModel m(j.at("order").get<int>(), j.at("k_smooth").get<double>());
      for (const auto& t : j.at("vocab")) m.intern(t.get<std::string>());
      for (const auto& r : j.at("counts")) {
        const auto& ctx = r.at("context");
        const std::size_t len = ctx.size();
        if (len >= static_cast<std::size_t>(m.order_)) throw DataError("context longer than order - 1");
        std::vector<std::uint32_t> ids;
        for (const auto& t : ctx) ids.push_back(m.intern(t.get<std::string>()));
        auto& cell = m.counts_[len][pack(ids.data(), len)];
        for (const auto& e : r.at("next")) {
          const auto c = e.at(1).get<std::uint64_t>();
          cell.next[m.intern(e.at(0).get<std::string>())] += c;
          cell.total += c;
        }
      }
      return m;
    } catch (const json::exception& e) {
      throw DataError(std::string("malformed n-gram model: ") + e.what());
    }
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write model file: " + path);
    out << to_json().dump() << '\n';
  }

  static NgramModel load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read model file: " + path);
    try {
      return from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw DataError(std::string("malformed n-gram model: ") + e.what());
    }
  }

 private:
  struct Cell {
    std::uint64_t total = 0;
    std::unordered_map<std::uint32_t, std::uint64_t> next;
  };

  std::uint32_t intern(const std::string& t) {
    auto [it, inserted] = ids_.emplace(t, static_cast<std::uint32_t>(tokens_.size()));
    if (inserted) tokens_.push_back(t);
    return it->second;
  }

  static std::string pack(const std::uint32_t* ids, std::size_t len) {
    return std::string(reinterpret_cast<const char*>(ids), len * sizeof(std::uint32_t));
  }

  static std::uint32_t unpack(const std::string& key, std::size_t i) {
    std::uint32_t v = 0;
    std::memcpy(&v, key.data() + i * sizeof(std::uint32_t), sizeof(v));
    return v;
  }

  int order_;
  double k_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<std::unordered_map<std::string, Cell>> counts_;  // by context length
};

/// Trains the reference n-gram model on every note of a normalized corpus.
inline NgramModel train_ngram(const Corpus& corpus, int order, double k_smooth, unsigned threads = 1,
                              const Abbreviations& abbreviations = Abbreviations::defaults()) {
  NgramModel model(order, k_smooth);
  std::vector<std::vector<std::string>> streams(corpus.notes.size());
  parallel_for(corpus.notes.size(), threads,
               [&](std::size_t i) { streams[i] = note_tokens(corpus.notes[i].text, abbreviations); });
  std::size_t total = 0;
  for (const auto& s : streams) {
    total += s.size();
    model.add_sequence(s);
  }
  if (total == 0) throw DataError("cannot train an n-gram model on an empty corpus");
  return model;
}

// A scored instance: a window of at most max_len consecutive note tokens.
struct PplInstance {
  std::string instance_id;  // "<note_id>#<window>"
  std::vector<std::string> tokens;
  bool at_note_start = false;
};

/// Non-overlapping windows of `max_len` tokens per note, in corpus order.
inline std::vector<PplInstance> build_instances(const Corpus& corpus, std::size_t max_len,
                                                unsigned threads = 1,
                                                const Abbreviations& abbreviations = Abbreviations::defaults()) {
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
  std::vector<std::vector<PplInstance>> per(corpus.notes.size());
  parallel_for(corpus.notes.size(), threads, [&](std::size_t i) {
    const auto tokens = note_tokens(corpus.notes[i].text, abbreviations);
    for (std::size_t at = 0, w = 0; at < tokens.size(); at += max_len, ++w) {
      PplInstance inst;
      inst.instance_id = corpus.notes[i].note_id + "#" + std::to_string(w);
      const std::size_t end = std::min(tokens.size(), at + max_len);
      inst.tokens.assign(tokens.begin() + static_cast<std::ptrdiff_t>(at),
                         tokens.begin() + static_cast<std::ptrdiff_t>(end));
      inst.at_note_start = at == 0;
      per[i].push_back(std::move(inst));
    }
  });
  std::vector<PplInstance> out;
  for (auto& v : per) {
    for (auto& x : v) out.push_back(std::move(x));
  }
  return out;
}

struct PplResult {
  double ppl = 0.0;
  std::size_t n_instances = 0;  // S
  std::size_t n_scored = 0;     // scored tokens (S in last-token mode)
  PplMode mode = PplMode::kLastToken;
};

/// PPL = exp(-(1/N) * sum log P(token | preceding tokens of its instance)).
/// In last-token mode only the final token of each instance is scored and
/// N is the number of instances; in full-sequence mode every token is.
/// Summation order is fixed, so the value does not depend on `threads`.
inline PplResult perplexity(const TokenModel& model, const std::vector<PplInstance>& instances,
                            PplMode mode, unsigned threads = 1) {
  if (instances.empty()) throw DataError("perplexity: no evaluation instances");
  std::vector<double> sums(instances.size(), 0.0);
  std::vector<std::size_t> counts(instances.size(), 0);
  parallel_for(instances.size(), threads, [&](std::size_t i) {
    const auto& toks = instances[i].tokens;
    std::vector<double> terms;
    const std::size_t first = mode == PplMode::kLastToken ? toks.size() - 1 : 0;
    for (std::size_t t = first; t < toks.size(); ++t) {
      terms.push_back(model.log_prob(std::span<const std::string>(toks.data(), t), toks[t],
                                     instances[i].at_note_start));
    }
    sums[i] = pairwise_sum(terms);
    counts[i] = terms.size();
  });
  PplResult r;
  r.mode = mode;
  r.n_instances = instances.size();
  for (auto c : counts) r.n_scored += c;
  r.ppl = std::exp(-pairwise_sum(sums) / static_cast<double>(r.n_scored));
  return r;
}

inline PplResult perplexity(const TokenModel& model, const Corpus& eval_corpus, PplMode mode,
                            std::size_t max_len = 128, unsigned threads = 1,
                            const Abbreviations& abbreviations = Abbreviations::defaults()) {
  return perplexity(model, build_instances(eval_corpus, max_len, threads, abbreviations), mode,
                    threads);
}

/// PPL from externally scored instances: JSONL of {instance_id, log_prob}
/// with natural-log probabilities, one scored token per line.
inline PplResult perplexity_from_log_probs(std::istream& in) {
  std::vector<double> terms;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    try {
      const json j = json::parse(line);
      j.at("instance_id");
      const double lp = j.at("log_prob").get<double>();
      if (!(lp <= 0.0)) throw DataError("log_prob must be <= 0");
      terms.push_back(lp);
    } catch (const json::exception& e) {
      throw DataError("scores line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("scores line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (terms.empty()) throw DataError("no scored instances");
  PplResult r;
  r.mode = PplMode::kLastToken;
  r.n_instances = terms.size();
  r.n_scored = terms.size();
  r.ppl = std::exp(-pairwise_sum(terms) / static_cast<double>(terms.size()));
  return r;
}

/// (PPL_i - PPL_NONE) / PPL_NONE.
inline double relative_ppl(double ppl_i, double ppl_none) {
  if (!(ppl_none > 0)) throw DataError("relative_ppl: baseline PPL must be positive");
  return (ppl_i - ppl_none) / ppl_none;
}

/// Cross-entropy in bits per scored token: log2(PPL).
inline double information_content(double ppl) {
  if (!(ppl >= 1.0)) throw DataError("information_content: PPL must be >= 1");
  return std::log2(ppl);
}

inline ordered_json ppl_to_json(const PplResult& r) {
  ordered_json o;
  o["ppl"] = r.ppl;
  o["information_content"] = information_content(std::max(1.0, r.ppl));
  o["n_instances"] = r.n_instances;
  o["n_scored"] = r.n_scored;
  o["mode"] = to_string(r.mode);
  return o;
}

}  // namespace clinidedup

#endif  // CLINIDEDUP_REDUNDANCY_HPP_
