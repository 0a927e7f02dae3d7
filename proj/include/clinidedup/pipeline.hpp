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

#ifndef CLINIDEDUP_PIPELINE_HPP_
#define CLINIDEDUP_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "clinidedup/corpus.hpp"
#include "clinidedup/duplicates.hpp"
#include "clinidedup/emit.hpp"
#include "clinidedup/error.hpp"
#include "clinidedup/exact_substr.hpp"
#include "clinidedup/hash.hpp"
#include "clinidedup/preprocess.hpp"
#include "clinidedup/redundancy.hpp"
#include "clinidedup/relevance.hpp"

#ifndef CLINIDEDUP_VERSION
#define CLINIDEDUP_VERSION "1.0.0"
#endif

namespace clinidedup {

inline constexpr std::string_view kToolVersion = CLINIDEDUP_VERSION;
inline constexpr int kFormatVersion = 1;

// ---------------------------------------------------------------------------
// Duplicate detection.

struct Detection {
  std::vector<WithinNoteDuplicate> within_note;
  std::vector<MatchSpan> matches;
  std::vector<SentenceRecord> between_note;
  ClusterResult clusters;
};

/// Cross-note duplicate regions, picking the index width from corpus size.
inline std::vector<MatchSpan> find_duplicate_substrings(const Corpus& corpus, std::size_t k) {
  std::size_t total = corpus.notes.size();
  for (const auto& n : corpus.notes) total += n.text.size();
  if (total < static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
    return find_duplicate_substrings(build_index<std::int32_t>(corpus), k);
  }
  return find_duplicate_substrings(build_index<std::int64_t>(corpus), k);
}

/// Within-note and between-note detection plus clustering on a normalized
/// corpus.
inline Detection detect_duplicates(const Corpus& corpus, std::size_t k, std::size_t min_sentence_chars,
                                   std::size_t wn_min_sentence_chars, unsigned threads = 1,
                                   const Abbreviations& abbreviations = Abbreviations::defaults()) {
  Detection d;
  d.within_note = find_all_within_note_duplicates(corpus, wn_min_sentence_chars, threads, abbreviations);
  d.matches = find_duplicate_substrings(corpus, k);
  d.between_note = split_matches_to_sentences(corpus, d.matches, min_sentence_chars, abbreviations);
  const auto wn = sentences_of(d.within_note);
  d.clusters = cluster_duplicates(wn, d.between_note, corpus);
  return d;
}

// ---------------------------------------------------------------------------
// Configuration.

struct PipelineConfig {
  std::string corpus_path;
  std::string workdir;
  std::string lexicon_path;        // empty: built-in lexicon
  std::string labels_path;         // external labels TSV, optional
  std::string abbreviations_path;  // empty: built-in list
  bool use_lexicon = true;
  bool lenient = false;
  std::size_t k = 100;
  std::size_t min_sentence_chars = 5;
  std::size_t wn_min_sentence_chars = 5;
  std::vector<DedupConfig> configs{std::begin(kAllConfigs), std::end(kAllConfigs)};
  BnRule bn_rule = BnRule::kDropAll;
  bool redundancy = true;
  int ngram_order = 3;
  double k_smooth = 0.1;
  std::size_t max_len = 128;
  PplMode ppl_mode = PplMode::kLastToken;
  std::uint64_t seed = 42;
  unsigned threads = 1;
};

inline void validate(const PipelineConfig& c) {
  if (c.corpus_path.empty()) throw ConfigError("no input corpus given");
  if (c.workdir.empty()) throw ConfigError("no workdir given");
  if (c.k < 1) throw ConfigError("k (min match length) must be >= 1");
  if (c.configs.empty()) throw ConfigError("no deduplication configuration requested");
  const bool wnnr = std::find(c.configs.begin(), c.configs.end(), DedupConfig::kWNNR) != c.configs.end();
  if (wnnr && !c.use_lexicon && c.labels_path.empty()) {
    throw ConfigError("WNNR requires a label source (lexicon or labels file)");
  }
  if (c.ngram_order < 1) throw ConfigError("ngram order must be >= 1");
  if (!(c.k_smooth > 0)) throw ConfigError("k_smooth must be > 0");
  if (c.max_len < 1) throw ConfigError("max_len must be >= 1");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
}

namespace detail {

template <class T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field has wrong type: ") + key);
  }
}

}  // namespace detail

/// Overlays the fields present in a JSON config object onto `base`.
inline PipelineConfig config_from_json(const json& j, PipelineConfig base = {}) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  static const std::set<std::string> kKnown = {
      "corpus", "workdir", "lexicon", "labels", "abbreviations", "use_lexicon", "lenient",
      "k", "min_sentence_chars", "wn_min_sentence_chars", "configs", "bn_rule", "redundancy",
      "ngram_order", "k_smooth", "max_len", "ppl_mode", "seed", "threads"};
  for (const auto& [key, _] : j.items()) {
    if (!kKnown.count(key)) throw ConfigError("unknown config field: " + key);
  }
  detail::take(j, "corpus", base.corpus_path);
  detail::take(j, "workdir", base.workdir);
  detail::take(j, "lexicon", base.lexicon_path);
  detail::take(j, "labels", base.labels_path);
  detail::take(j, "abbreviations", base.abbreviations_path);
  detail::take(j, "use_lexicon", base.use_lexicon);
  detail::take(j, "lenient", base.lenient);
  detail::take(j, "k", base.k);
  detail::take(j, "min_sentence_chars", base.min_sentence_chars);
  detail::take(j, "wn_min_sentence_chars", base.wn_min_sentence_chars);
  detail::take(j, "redundancy", base.redundancy);
  detail::take(j, "ngram_order", base.ngram_order);
  detail::take(j, "k_smooth", base.k_smooth);
  detail::take(j, "max_len", base.max_len);
  detail::take(j, "seed", base.seed);
  detail::take(j, "threads", base.threads);
  if (j.contains("configs")) {
    std::vector<std::string> names;
    detail::take(j, "configs", names);
    base.configs.clear();
    for (const auto& n : names) {
      auto c = parse_config(n);
      if (!c) throw ConfigError("unknown configuration: " + n);
      base.configs.push_back(*c);
    }
  }
  if (j.contains("bn_rule")) {
    std::string s;
    detail::take(j, "bn_rule", s);
    auto r = parse_bn_rule(s);
    if (!r) throw ConfigError("unknown bn_rule: " + s);
    base.bn_rule = *r;
  }
  if (j.contains("ppl_mode")) {
    std::string s;
    detail::take(j, "ppl_mode", s);
    auto m = parse_ppl_mode(s);
    if (!m) throw ConfigError("unknown ppl_mode: " + s);
    base.ppl_mode = *m;
  }
  return base;
}

inline PipelineConfig load_pipeline_config(const std::string& path, PipelineConfig base = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path);
  try {
    return config_from_json(json::parse(in), std::move(base));
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config file: ") + e.what());
  }
}

/// The settings that determine outputs. Paths are replaced by content
/// hashes and the thread count is left out, since neither changes results.
inline ordered_json effective_config(const PipelineConfig& c) {
  const auto file_hash = [](const std::string& p) -> ordered_json {
    if (p.empty()) return nullptr;
    return sha256_file_hex(p);
  };
  ordered_json j;
  j["k"] = c.k;
  j["k_unit"] = "bytes of normalized text";
  j["min_sentence_chars"] = c.min_sentence_chars;
  j["wn_min_sentence_chars"] = c.wn_min_sentence_chars;
  ordered_json cfgs = ordered_json::array();
  for (auto x : c.configs) cfgs.push_back(to_string(x));
  j["configs"] = std::move(cfgs);
  j["bn_rule"] = to_string(c.bn_rule);
  j["use_lexicon"] = c.use_lexicon;
  j["lexicon_sha256"] = file_hash(c.lexicon_path);
  j["labels_sha256"] = file_hash(c.labels_path);
  j["abbreviations_sha256"] = file_hash(c.abbreviations_path);
  j["lenient"] = c.lenient;
  j["redundancy"] = c.redundancy;
  j["ngram_order"] = c.ngram_order;
  j["k_smooth"] = c.k_smooth;
  j["max_len"] = c.max_len;
  j["ppl_mode"] = to_string(c.ppl_mode);
  j["seed"] = c.seed;
  return j;
}

// ---------------------------------------------------------------------------
// Outputs.

// Collects outputs as "<name>.partial" files and renames them once every
// stage has succeeded.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw DataError("cannot create workdir " + dir_.string() + ": " + ec.message());
  }

  void write(const std::string& name, const std::string& content) {
    const auto path = dir_ / (name + ".partial");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) throw DataError("cannot write " + path.string());
    files_[name] = sha256_hex(content);
    sizes_[name] = content.size();
  }

  const std::map<std::string, std::string>& hashes() const { return files_; }
  std::size_t size_of(const std::string& name) const { return sizes_.at(name); }

  void commit() {
    for (const auto& [name, _] : files_) {
      std::error_code ec;
      std::filesystem::rename(dir_ / (name + ".partial"), dir_ / name, ec);
      if (ec) throw DataError("cannot finalize " + name + ": " + ec.message());
    }
  }

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::string> files_;
  std::map<std::string, std::size_t> sizes_;
};

inline std::string corpus_file_name(DedupConfig c) { return "corpus_" + std::string(to_string(c)) + ".jsonl"; }
inline std::string stats_file_name(DedupConfig c) { return "stats_" + std::string(to_string(c)) + ".json"; }

// Runs `fn`, prefixing any error with the stage name. The error category
// (and so the exit code) is kept.
template <class F>
auto run_stage(const char* stage, F&& fn) -> decltype(fn()) {
  const std::string prefix = std::string("stage ") + stage + ": ";
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  } catch (const std::exception& e) {
    throw Error(prefix + e.what());
  }
}

/// Deterministic train/dev split for redundancy runs: by note id and seed.
inline bool in_train_split(std::string_view note_id, std::uint64_t seed) {
  return stable_hash64(std::to_string(seed) + ":" + std::string(note_id)) % 2 == 0;
}

inline std::pair<Corpus, Corpus> split_train_dev(const Corpus& c, std::uint64_t seed) {
  std::pair<Corpus, Corpus> out;
  for (const auto& n : c.notes) (in_train_split(n.note_id, seed) ? out.first : out.second).notes.push_back(n);
  return out;
}

/// PPL of a model trained on each configuration's train split, evaluated on
/// every configuration's dev split, with relative PPL against the model
/// trained on NONE when NONE is present.
inline ordered_json redundancy_report(const std::map<DedupConfig, Corpus>& emitted, const PipelineConfig& cfg,
                                      const Abbreviations& abbreviations) {
  std::map<DedupConfig, std::pair<Corpus, Corpus>> splits;
  for (const auto& [c, corpus] : emitted) splits.emplace(c, split_train_dev(corpus, cfg.seed));
  std::map<DedupConfig, std::optional<NgramModel>> models;
  for (const auto& [c, s] : splits) {
    std::size_t non_empty = 0;
    for (const auto& n : s.first.notes) non_empty += detail::is_blank(n.text) ? 0 : 1;
    if (non_empty == 0) {
      models[c] = std::nullopt;
      continue;
    }
    try {
      models[c] = train_ngram(s.first, cfg.ngram_order, cfg.k_smooth, cfg.threads, abbreviations);
    } catch (const DataError&) {
      models[c] = std::nullopt;
    }
  }
  std::map<std::pair<DedupConfig, DedupConfig>, std::optional<PplResult>> ppl;
  for (const auto& [train, model] : models) {
    for (const auto& [dev, s] : splits) {
      std::optional<PplResult> r;
      if (model) {
        auto inst = build_instances(s.second, cfg.max_len, cfg.threads, abbreviations);
        if (!inst.empty()) r = perplexity(*model, inst, cfg.ppl_mode, cfg.threads);
      }
      ppl[{train, dev}] = r;
    }
  }
  ordered_json out;
  out["model"] = {{"type", "ngram"}, {"order", cfg.ngram_order}, {"k_smooth", cfg.k_smooth},
                  {"max_len", cfg.max_len}, {"mode", to_string(cfg.ppl_mode)}};
  out["split_seed"] = cfg.seed;
  ordered_json rows = ordered_json::array();
  for (const auto& [key, r] : ppl) {
    ordered_json row;
    row["train"] = to_string(key.first);
    row["dev"] = to_string(key.second);
    if (r) {
      row["ppl"] = r->ppl;
      row["information_content"] = information_content(std::max(1.0, r->ppl));
      row["n_instances"] = r->n_instances;
      auto base = ppl.find({DedupConfig::kNone, key.second});
      row["relative_ppl"] = base != ppl.end() && base->second
                                ? ordered_json(relative_ppl(r->ppl, base->second->ppl))
                                : ordered_json(nullptr);
    } else {
      row["ppl"] = nullptr;
      row["information_content"] = nullptr;
      row["n_instances"] = 0;
      row["relative_ppl"] = nullptr;
    }
    rows.push_back(std::move(row));
  }
  out["results"] = std::move(rows);
  return out;
}

inline std::string dump_json(const ordered_json& j) { return j.dump(2) + "\n"; }

/// Runs ingest, preprocessing, detection, classification, emission, stats
/// and redundancy, and returns the manifest written to workdir.
inline ordered_json run_pipeline(const PipelineConfig& cfg) {
  run_stage("config", [&] { validate(cfg); });
  const ordered_json effective = run_stage("config", [&] { return effective_config(cfg); });
  OutputSet outputs(cfg.workdir);
  const Abbreviations abbreviations = run_stage("config", [&] {
    return cfg.abbreviations_path.empty() ? Abbreviations::defaults()
                                          : Abbreviations::load(cfg.abbreviations_path);
  });

  LoadOptions lo;
  lo.lenient = cfg.lenient;
  const LoadResult loaded = run_stage("ingest", [&] { return load_corpus(cfg.corpus_path, lo); });
  if (loaded.corpus.notes.empty()) throw DataError("stage ingest: corpus has no notes");
  if (!loaded.errors.empty()) {
    std::ostringstream os;
    write_line_errors(loaded.errors, os);
    outputs.write("rejected_lines.jsonl", os.str());
  }

  const Corpus corpus = run_stage("preprocess", [&] { return normalize_corpus(loaded.corpus, cfg.threads); });

  Detection det = run_stage("detect", [&] {
    return detect_duplicates(corpus, cfg.k, cfg.min_sentence_chars, cfg.wn_min_sentence_chars, cfg.threads,
                             abbreviations);
  });
  run_stage("detect", [&] {
    std::ostringstream bn, wn;
    write_duplicates_tsv(det.between_note, bn);
    write_duplicates_tsv(sentences_of(det.within_note), wn);
    outputs.write("duplicates.tsv", bn.str());
    outputs.write("within_note.tsv", wn.str());
  });

  std::vector<DuplicateCluster>& clusters = det.clusters.clusters;
  std::size_t unmatched_labels = 0;
  run_stage("classify", [&] {
    if (cfg.use_lexicon) {
      const TopicLexicon lex = cfg.lexicon_path.empty() ? default_lexicon() : load_lexicon(cfg.lexicon_path);
      classify_clusters(clusters, lex, cfg.threads);
    }
    if (!cfg.labels_path.empty()) unmatched_labels = apply_external_labels(clusters, cfg.labels_path).unmatched.size();
    std::ostringstream cl, lb;
    write_clusters(clusters, cl);
    write_labels_tsv(clusters, lb);
    outputs.write("clusters.jsonl", cl.str());
    outputs.write("labels.tsv", lb.str());
  });

  std::map<DedupConfig, Corpus> emitted;
  run_stage("emit", [&] {
    for (auto c : cfg.configs) {
      if (emitted.count(c)) continue;
      Corpus out = emit_config(corpus, clusters, DedupPolicy{c, cfg.bn_rule}, cfg.threads, abbreviations);
      std::ostringstream os;
      write_corpus(out, os);
      outputs.write(corpus_file_name(c), os.str());
      emitted.emplace(c, std::move(out));
    }
  });

  run_stage("stats", [&] {
    ordered_json reduction = ordered_json::object();
    for (const auto& [c, out] : emitted) {
      const DupStats s = corpus_dup_stats(corpus, clusters, c, out, cfg.threads, abbreviations);
      outputs.write(stats_file_name(c), dump_json(dup_stats_to_json(s)));
      reduction[std::string(to_string(c))] = reduction_to_json(reduction_report(corpus, out, cfg.threads, abbreviations));
    }
    outputs.write("reduction.json", dump_json(reduction));
    ordered_json cf;
    cf["by_note_type"] = group_stats_to_json(copy_forward_stats(clusters, corpus, GroupBy::kNoteType, ClusterFilter::kAll));
    outputs.write("copy_forward.json", dump_json(cf));
  });

  if (cfg.redundancy) {
    run_stage("redundancy", [&] {
      outputs.write("redundancy.json", dump_json(redundancy_report(emitted, cfg, abbreviations)));
    });
  }

  ordered_json manifest;
  manifest["tool"] = "clinidedup";
  manifest["version"] = kToolVersion;
  manifest["format_version"] = kFormatVersion;
  manifest["seed"] = cfg.seed;
  manifest["config_hash"] = sha256_hex(effective.dump());
  manifest["config"] = effective;
  manifest["input"] = {{"sha256", sha256_file_hex(cfg.corpus_path)},
                       {"n_notes", corpus.notes.size()},
                       {"rejected_lines", loaded.errors.size()}};
  std::size_t wn_clusters = 0, bn_clusters = 0;
  for (const auto& c : clusters) (c.between_notes() ? bn_clusters : wn_clusters) += 1;
  manifest["counts"] = {{"within_note_occurrences", det.within_note.size()},
                        {"between_note_sentences", det.between_note.size()},
                        {"match_regions", det.matches.size()},
                        {"clusters", clusters.size()},
                        {"between_note_clusters", bn_clusters},
                        {"within_note_only_clusters", wn_clusters},
                        {"orphan_sentences", det.clusters.orphans.size()},
                        {"unmatched_labels", unmatched_labels}};
  ordered_json files = ordered_json::array();
  for (const auto& [name, hash] : outputs.hashes()) {
    files.push_back({{"path", name}, {"sha256", hash}, {"bytes", outputs.size_of(name)}});
  }
  manifest["outputs"] = std::move(files);

  outputs.write("manifest.json", dump_json(manifest));
  run_stage("finalize", [&] { outputs.commit(); });
  return manifest;
}

/// Re-hashes every output listed in a manifest. Returns mismatching paths.
inline std::vector<std::string> verify_manifest(const std::filesystem::path& workdir) {
  std::ifstream in(workdir / "manifest.json", std::ios::binary);
  if (!in) throw DataError("no manifest in " + workdir.string());
  const json m = json::parse(in);
  std::vector<std::string> bad;
  for (const auto& f : m.at("outputs")) {
    const auto path = f.at("path").get<std::string>();
    std::error_code ec;
    if (!std::filesystem::exists(workdir / path, ec) ||
        sha256_file_hex((workdir / path).string()) != f.at("sha256").get<std::string>()) {
      bad.push_back(path);
    }
  }
  return bad;
}

}  // namespace clinidedup

#endif  // CLINIDEDUP_PIPELINE_HPP_
