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

#ifndef CLINIDEDUP_DUPLICATES_HPP_
#define CLINIDEDUP_DUPLICATES_HPP_

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "clinidedup/corpus.hpp"
#include "clinidedup/error.hpp"
#include "clinidedup/hash.hpp"
#include "clinidedup/parallel.hpp"
#include "clinidedup/preprocess.hpp"

namespace clinidedup {

enum class Scope { kWN, kBN, kBoth };
enum class Relevance { kUnlabeled, kRelevant, kNotRelevant };
enum class LabelSource { kNone, kRule, kExternal, kGold };

inline std::string_view to_string(Scope s) {
  switch (s) {
    case Scope::kWN: return "WN";
    case Scope::kBN: return "BN";
    case Scope::kBoth: return "BOTH";
  }
  return "WN";
}

inline std::string_view to_string(Relevance r) {
  switch (r) {
    case Relevance::kUnlabeled: return "UNLABELED";
    case Relevance::kRelevant: return "RELEVANT";
    case Relevance::kNotRelevant: return "NOT_RELEVANT";
  }
  return "UNLABELED";
}

inline std::string_view to_string(LabelSource s) {
  switch (s) {
    case LabelSource::kNone: return "none";
    case LabelSource::kRule: return "rule";
    case LabelSource::kExternal: return "external";
    case LabelSource::kGold: return "gold";
  }
  return "none";
}

struct RelevanceLabel {
  Relevance label = Relevance::kUnlabeled;
  double score = 0.0;  // in [0, 1]
  LabelSource source = LabelSource::kNone;

  friend bool operator==(const RelevanceLabel&, const RelevanceLabel&) = default;
};

struct Occurrence {
  std::string note_id;
  std::string patient_id;
  std::size_t sentence_index = 0;

  friend bool operator==(const Occurrence&, const Occurrence&) = default;
};

/// One distinct duplicated sentence and every detected occurrence of it.
struct DuplicateCluster {
  std::string cluster_id;
  std::string sentence;
  std::vector<Occurrence> occurrences;  // canonical corpus order, then index
  Scope scope = Scope::kWN;
  std::size_t n_notes = 0;
  std::size_t n_patients = 0;
  // Cross-note occurrence pairs sharing a patient / all cross-note pairs.
  double copy_forward_fraction = 0.0;
  RelevanceLabel relevance;

  bool between_notes() const { return scope != Scope::kWN; }

  friend bool operator==(const DuplicateCluster&, const DuplicateCluster&) = default;
};

inline std::string cluster_id_for(std::string_view sentence) { return stable_id(sentence); }

// ---------------------------------------------------------------------------
// Within-note duplicates.

struct WithinNoteDuplicate {
  SentenceRecord sentence;
  bool first = false;  // first occurrence of this sentence in the note
};

/// Every occurrence of a sentence that appears at least twice in the note.
/// Sentences with `min_sentence_chars` code points or fewer are ignored.
inline std::vector<WithinNoteDuplicate> find_within_note_duplicates(
    const Note& note, std::size_t min_sentence_chars = 5,
    const Abbreviations& abbreviations = Abbreviations::defaults()) {
  auto sentences = split_sentences(note.text, note.note_id, abbreviations);
  std::unordered_map<std::string_view, std::size_t> counts;
  for (const auto& s : sentences) {
    if (utf8_length(s.normalized) > min_sentence_chars) ++counts[s.normalized];
  }
  std::vector<WithinNoteDuplicate> out;
  std::set<std::string_view> seen;
  for (const auto& s : sentences) {
    auto it = counts.find(s.normalized);
    if (it == counts.end() || it->second < 2) continue;
    const bool first = seen.insert(s.normalized).second;
    out.push_back({s, first});
  }
  return out;
}

// Within-note duplicates of every note, in corpus order.
inline std::vector<WithinNoteDuplicate> find_all_within_note_duplicates(
    const Corpus& corpus, std::size_t min_sentence_chars = 5, unsigned threads = 1,
    const Abbreviations& abbreviations = Abbreviations::defaults()) {
  std::vector<std::vector<WithinNoteDuplicate>> per(corpus.notes.size());
  parallel_for(corpus.notes.size(), threads, [&](std::size_t i) {
    per[i] = find_within_note_duplicates(corpus.notes[i], min_sentence_chars, abbreviations);
  });
  std::vector<WithinNoteDuplicate> out;
  for (auto& v : per) {
    for (auto& d : v) out.push_back(std::move(d));
  }
  return out;
}

inline std::vector<SentenceRecord> sentences_of(const std::vector<WithinNoteDuplicate>& wn) {
  std::vector<SentenceRecord> out;
  out.reserve(wn.size());
  for (const auto& d : wn) out.push_back(d.sentence);
  return out;
}

// ---------------------------------------------------------------------------
// Clustering.

namespace detail {

// Pair-based copy-forward fraction from per-note occurrence counts.
inline double copy_forward_fraction(const std::vector<Occurrence>& occ) {
  std::map<std::string, std::size_t> per_note;
  std::map<std::string, std::map<std::string, std::size_t>> per_patient;
  for (const auto& o : occ) {
    ++per_note[o.note_id];
    ++per_patient[o.patient_id][o.note_id];
  }
  const auto cross_pairs = [](const std::map<std::string, std::size_t>& counts) {
    std::size_t total = 0, sq = 0;
    for (const auto& [_, c] : counts) {
      total += c;
      sq += c * c;
    }
    return (total * total - sq) / 2;
  };
  const std::size_t all = cross_pairs(per_note);
  if (all == 0) return 0.0;
  std::size_t same = 0;
  for (const auto& [_, notes] : per_patient) same += cross_pairs(notes);
  return static_cast<double>(same) / static_cast<double>(all);
}

}  // namespace detail

struct ClusterResult {
  std::vector<DuplicateCluster> clusters;
  // Between-note sentences whose text occurs once, as a whole sentence, in
  // the detected set (the shared substring covered it in only one note's
  // segmentation). They are counted but form no cluster.
  std::vector<SentenceRecord> orphans;
};

/// Groups within-note and between-note duplicate sentences by exact
/// normalized text. Occurrences are deduplicated per (note, sentence index).
inline ClusterResult cluster_duplicates(std::span<const SentenceRecord> wn,
                                        std::span<const SentenceRecord> bn, const Corpus& corpus) {
  std::unordered_map<std::string_view, std::size_t> order;
  for (std::size_t i = 0; i < corpus.notes.size(); ++i) order[corpus.notes[i].note_id] = i;

  struct Entry {
    std::size_t note_pos;
    std::size_t index;
    const SentenceRecord* rec;
  };
  std::map<std::string, std::vector<Entry>> by_text;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (auto list : {wn, bn}) {
    for (const auto& r : list) {
      auto it = order.find(r.note_id);
      if (it == order.end()) throw DataError("duplicate refers to unknown note: " + r.note_id);
      if (!seen.insert({it->second, r.index_in_note}).second) continue;
      by_text[r.normalized].push_back({it->second, r.index_in_note, &r});
    }
  }

  ClusterResult result;
  for (auto& [text, entries] : by_text) {
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      return std::tie(a.note_pos, a.index) < std::tie(b.note_pos, b.index);
    });
    DuplicateCluster c;
    c.cluster_id = cluster_id_for(text);
    c.sentence = text;
    std::map<std::size_t, std::size_t> per_note;
    std::set<std::string_view> patients;
    for (const auto& e : entries) {
      const Note& note = corpus.notes[e.note_pos];
      c.occurrences.push_back({note.note_id, note.patient_id, e.index});
      ++per_note[e.note_pos];
      patients.insert(note.patient_id);
    }
    c.n_notes = per_note.size();
    c.n_patients = patients.size();
    const bool within = std::any_of(per_note.begin(), per_note.end(),
                                    [](const auto& kv) { return kv.second >= 2; });
    const bool between = c.n_notes >= 2;
    if (!within && !between) {
      result.orphans.push_back(*entries.front().rec);
      continue;
    }
    c.scope = within && between ? Scope::kBoth : (between ? Scope::kBN : Scope::kWN);
    c.copy_forward_fraction = detail::copy_forward_fraction(c.occurrences);
    result.clusters.push_back(std::move(c));
  }
  // Order by first occurrence in canonical corpus order.
  std::sort(result.clusters.begin(), result.clusters.end(),
            [&](const DuplicateCluster& a, const DuplicateCluster& b) {
              const auto ka = std::make_pair(order.at(a.occurrences.front().note_id),
                                             a.occurrences.front().sentence_index);
              const auto kb = std::make_pair(order.at(b.occurrences.front().note_id),
                                             b.occurrences.front().sentence_index);
              return std::tie(ka, a.cluster_id) < std::tie(kb, b.cluster_id);
            });
  std::sort(result.orphans.begin(), result.orphans.end(),
            [](const SentenceRecord& a, const SentenceRecord& b) {
              return std::tie(a.note_id, a.index_in_note) < std::tie(b.note_id, b.index_in_note);
            });
  return result;
}

// ---------------------------------------------------------------------------
// Serialization.

inline ordered_json cluster_to_json(const DuplicateCluster& c) {
  ordered_json o;
  o["cluster_id"] = c.cluster_id;
  o["sentence"] = c.sentence;
  ordered_json occ = ordered_json::array();
  for (const auto& x : c.occurrences) {
    ordered_json e;
    e["note_id"] = x.note_id;
    e["patient_id"] = x.patient_id;
    e["sentence_index"] = x.sentence_index;
    occ.push_back(std::move(e));
  }
  o["occurrences"] = std::move(occ);
  o["scope"] = to_string(c.scope);
  o["n_notes"] = c.n_notes;
  o["n_patients"] = c.n_patients;
  o["copy_forward_fraction"] = c.copy_forward_fraction;
  o["relevance"] = to_string(c.relevance.label);
  o["relevance_score"] = c.relevance.score;
  o["relevance_source"] = to_string(c.relevance.source);
  return o;
}

namespace detail {

template <class E, std::size_t N>
E parse_enum(const std::string& s, const E (&values)[N], const char* what) {
  for (E v : values) {
    if (to_string(v) == s) return v;
  }
  throw DataError(std::string("unknown ") + what + ": " + s);
}

}  // namespace detail

inline DuplicateCluster cluster_from_json(const json& j) {
  static constexpr Scope kScopes[] = {Scope::kWN, Scope::kBN, Scope::kBoth};
  static constexpr Relevance kLabels[] = {Relevance::kUnlabeled, Relevance::kRelevant,
                                          Relevance::kNotRelevant};
  static constexpr LabelSource kSources[] = {LabelSource::kNone, LabelSource::kRule,
                                             LabelSource::kExternal, LabelSource::kGold};
  try {
    DuplicateCluster c;
    c.cluster_id = j.at("cluster_id").get<std::string>();
    c.sentence = j.at("sentence").get<std::string>();
    for (const auto& e : j.at("occurrences")) {
      c.occurrences.push_back({e.at("note_id").get<std::string>(),
                               e.at("patient_id").get<std::string>(),
                               e.at("sentence_index").get<std::size_t>()});
    }
    c.scope = detail::parse_enum(j.at("scope").get<std::string>(), kScopes, "scope");
    c.n_notes = j.at("n_notes").get<std::size_t>();
    c.n_patients = j.at("n_patients").get<std::size_t>();
    c.copy_forward_fraction = j.at("copy_forward_fraction").get<double>();
    c.relevance.label =
        detail::parse_enum(j.value("relevance", std::string("UNLABELED")), kLabels, "relevance");
    c.relevance.score = j.value("relevance_score", 0.0);
    c.relevance.source = detail::parse_enum(j.value("relevance_source", std::string("none")),
                                            kSources, "label source");
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed cluster record: ") + e.what());
  }
}

inline void write_clusters(const std::vector<DuplicateCluster>& clusters, std::ostream& out) {
  for (const auto& c : clusters) out << cluster_to_json(c).dump() << '\n';
}

inline std::vector<DuplicateCluster> read_clusters(std::istream& in) {
  std::vector<DuplicateCluster> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    try {
      out.push_back(cluster_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError("clusters line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("clusters line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<DuplicateCluster> load_clusters(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read clusters file: " + path);
  return read_clusters(in);
}

// ---------------------------------------------------------------------------
// Statistics.

struct Summary {
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;

  friend bool operator==(const Summary&, const Summary&) = default;
};

// Median averages the two middle values for even sizes. Empty input gives
// all zeros.
inline Summary summarize(std::vector<double> values) {
  Summary s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  s.median = n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
  s.min = values.front();
  s.max = values.back();
  return s;
}

enum class GroupBy { kNoteType, kPatient };

enum class ClusterFilter { kAll, kWithinNote, kBetweenNote, kRelevant, kNotRelevant };

inline bool passes(const DuplicateCluster& c, ClusterFilter f) {
  switch (f) {
    case ClusterFilter::kAll: return true;
    case ClusterFilter::kWithinNote: return c.scope != Scope::kBN;
    case ClusterFilter::kBetweenNote: return c.between_notes();
    case ClusterFilter::kRelevant:
      return c.between_notes() && c.relevance.label == Relevance::kRelevant;
    case ClusterFilter::kNotRelevant:
      return c.between_notes() && c.relevance.label == Relevance::kNotRelevant;
  }
  return true;
}

struct GroupStat {
  std::string group;
  std::size_t n_patients = 0;
  Summary pct;  // per-patient copy-forward percentage
};

inline constexpr std::string_view kUnknownNoteType = "unknown";

/// Per group, the within-patient percentage of duplicated sentence
/// occurrences that are copy-forward (the same sentence also occurs in
/// another note of the same patient), summarized as median (min/max) over
/// patients.
inline std::vector<GroupStat> copy_forward_stats(const std::vector<DuplicateCluster>& clusters,
                                                 const Corpus& corpus, GroupBy group_by,
                                                 ClusterFilter filter = ClusterFilter::kAll) {
  std::unordered_map<std::string_view, const Note*> by_id;
  for (const auto& n : corpus.notes) by_id[n.note_id] = &n;
  // group -> patient -> (copy-forward, total)
  std::map<std::string, std::map<std::string, std::pair<std::size_t, std::size_t>>> tally;
  for (const auto& c : clusters) {
    if (!passes(c, filter)) continue;
    std::map<std::string_view, std::set<std::string_view>> notes_of_patient;
    for (const auto& o : c.occurrences) notes_of_patient[o.patient_id].insert(o.note_id);
    for (const auto& o : c.occurrences) {
      auto it = by_id.find(o.note_id);
      if (it == by_id.end()) throw DataError("cluster refers to unknown note: " + o.note_id);
      const Note& note = *it->second;
      std::string group = group_by == GroupBy::kPatient
                              ? note.patient_id
                              : note.note_type.value_or(std::string(kUnknownNoteType));
      auto& cell = tally[group][note.patient_id];
      ++cell.second;
      if (notes_of_patient[o.patient_id].size() >= 2) ++cell.first;
    }
  }
  std::vector<GroupStat> out;
  for (const auto& [group, patients] : tally) {
    std::vector<double> pcts;
    for (const auto& [_, cell] : patients) {
      pcts.push_back(100.0 * static_cast<double>(cell.first) / static_cast<double>(cell.second));
    }
    out.push_back({group, patients.size(), summarize(std::move(pcts))});
  }
  return out;
}

struct DupStats {
  DedupConfig config = DedupConfig::kNone;
  std::size_t n_notes = 0;
  double pct_notes_with_dup = 0.0;
  Summary median_dup_sentences_per_note;  // over notes with >= 1 duplicate
  Summary median_words_per_note;          // over the configuration's notes
  double word_reduction_pct = 0.0;        // of the median words per note
  std::size_t words_before = 0;
  std::size_t words_after = 0;
};

/// Duplicated sentence occurrences that a configuration targets, keyed by
/// (note_id, sentence index). WN: occurrences of sentences repeated inside
/// their note. WNNR: WN plus every occurrence of a not-relevant between-note
/// cluster. WNBN: every clustered occurrence. NONE: nothing.
inline std::set<std::pair<std::string, std::size_t>> targeted_occurrences(
    const std::vector<DuplicateCluster>& clusters, DedupConfig config) {
  std::set<std::pair<std::string, std::size_t>> out;
  if (config == DedupConfig::kNone) return out;
  for (const auto& c : clusters) {
    std::map<std::string_view, std::size_t> per_note;
    for (const auto& o : c.occurrences) ++per_note[o.note_id];
    const bool all = config == DedupConfig::kWNBN ||
                     (config == DedupConfig::kWNNR && c.between_notes() &&
                      c.relevance.label == Relevance::kNotRelevant);
    for (const auto& o : c.occurrences) {
      if (all || per_note[o.note_id] >= 2) out.insert({o.note_id, o.sentence_index});
    }
  }
  return out;
}

/// Duplication statistics for one configuration. `original` is the analysed
/// corpus and `emitted` the corpus the configuration produced from it.
inline DupStats corpus_dup_stats(const Corpus& original,
                                 const std::vector<DuplicateCluster>& clusters, DedupConfig config,
                                 const Corpus& emitted, unsigned threads = 1,
                                 const Abbreviations& abbreviations = Abbreviations::defaults()) {
  DupStats s;
  s.config = config;
  s.n_notes = original.notes.size();
  const auto targeted = targeted_occurrences(clusters, config);
  std::map<std::string_view, std::size_t> per_note;
  for (const auto& [note_id, _] : targeted) ++per_note[note_id];
  if (!original.notes.empty()) {
    s.pct_notes_with_dup =
        100.0 * static_cast<double>(per_note.size()) / static_cast<double>(original.notes.size());
  }
  std::vector<double> dup_counts;
  for (const auto& [_, c] : per_note) dup_counts.push_back(static_cast<double>(c));
  s.median_dup_sentences_per_note = summarize(std::move(dup_counts));

  const auto words_of = [&](const Corpus& c, std::size_t& total) {
    const WordCounts wc = count_words(c, threads, abbreviations);
    total = wc.total_words;
    std::vector<double> v;
    v.reserve(c.notes.size());
    for (const auto& n : c.notes) v.push_back(static_cast<double>(wc.per_note.at(n.note_id).words));
    return summarize(std::move(v));
  };
  const Summary before = words_of(original, s.words_before);
  s.median_words_per_note = words_of(emitted, s.words_after);
  if (before.median > 0) {
    s.word_reduction_pct = 100.0 * (before.median - s.median_words_per_note.median) / before.median;
  }
  return s;
}

inline ordered_json summary_to_json(const Summary& s) {
  ordered_json o;
  o["median"] = s.median;
  o["min"] = s.min;
  o["max"] = s.max;
  return o;
}

inline ordered_json dup_stats_to_json(const DupStats& s) {
  ordered_json o;
  o["config"] = to_string(s.config);
  o["n_notes"] = s.n_notes;
  o["pct_notes_with_dup"] = s.pct_notes_with_dup;
  o["median_dup_sentences_per_note"] = summary_to_json(s.median_dup_sentences_per_note);
  o["median_words_per_note"] = summary_to_json(s.median_words_per_note);
  o["word_reduction_pct"] = s.word_reduction_pct;
  o["words_before"] = s.words_before;
  o["words_after"] = s.words_after;
  return o;
}

inline ordered_json group_stats_to_json(const std::vector<GroupStat>& stats) {
  ordered_json arr = ordered_json::array();
  for (const auto& g : stats) {
    ordered_json o;
    o["group"] = g.group;
    o["n_patients"] = g.n_patients;
    o["median_pct"] = g.pct.median;
    o["min"] = g.pct.min;
    o["max"] = g.pct.max;
    arr.push_back(std::move(o));
  }
  return arr;
}

}  // namespace clinidedup

#endif  // CLINIDEDUP_DUPLICATES_HPP_
