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

#ifndef CLINIDEDUP_RELEVANCE_HPP_
#define CLINIDEDUP_RELEVANCE_HPP_

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "clinidedup/duplicates.hpp"
#include "clinidedup/error.hpp"
#include "clinidedup/hash.hpp"
#include "clinidedup/parallel.hpp"

namespace clinidedup {

// ---------------------------------------------------------------------------
// Lexicon.

struct Topic {
  std::string name;
  std::vector<std::string> phrases;  // lower-case; '*' matches any run of words
};

struct TopicLexicon {
  std::vector<Topic> topics;
};

// Default not-relevant lexicon. Topics follow the categories of boilerplate
// observed in ICU notes: attestations, result logistics, discharge
// instructions, contact details, confidentiality banners and procedural
// templates.
inline constexpr std::string_view kDefaultLexiconJson = R"json({
  "agreement_with_findings": [
    "i agree with * note above",
    "agree with * assessment and plan",
    "agree with the findings",
    "i have personally reviewed the images"
  ],
  "physical_presence": [
    "i saw and examined the patient",
    "was physically present with",
    "i have fully participated in the care",
    "present for key portions of the"
  ],
  "discussion_of_results": [
    "findings were discussed with the referring",
    "this case was also discussed with",
    "discussed with the referring physician"
  ],
  "review_of_results": [
    "results were personally reviewed with",
    "i have reviewed the medical record",
    "discussed with house staff"
  ],
  "notice": [
    "was notified in person of the results",
    "notified * of the results"
  ],
  "patients_care": [
    "was monitored by a nurse throughout the procedure",
    "patient presented and examined on rounds"
  ],
  "information_location": [
    "see flowsheet for further details",
    "see flowsheet for",
    "attending note for full plan details"
  ],
  "hypothetical_symptoms": [
    "please return to the hospital or call your pcp if you develop",
    "if you develop * please contact the office",
    "please contact the office during regular hours"
  ],
  "contact_information": [
    "answering service will contact",
    "please feel free to contact us",
    "contact on call person during off hours"
  ],
  "general_information": [
    "i would add the following remarks",
    "nothing to add",
    "confidential and privileged communication",
    "privileged and confidential communication",
    "please dispose of paper copies appropriately"
  ],
  "template_procedural_steps": [
    "preprocedural timeout and huddle was performed",
    "performed as per protocol",
    "needle sponge and instrument counts were correct"
  ]
})json";

namespace detail {

// Lower-case, every non-alphanumeric ASCII run turned into one space,
// trimmed. Bytes >= 0x80 are kept as word characters.
inline std::string canonical_words(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool gap = false;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || std::isalnum(c)) {
      if (gap && !out.empty()) out.push_back(' ');
      gap = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      gap = true;
    }
  }
  return out;
}

// Phrase pieces between '*' wildcards, canonicalized; empty pieces dropped.
inline std::vector<std::string> phrase_pieces(std::string_view phrase) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= phrase.size()) {
    std::size_t star = phrase.find('*', pos);
    if (star == std::string_view::npos) star = phrase.size();
    std::string piece = canonical_words(phrase.substr(pos, star - pos));
    if (!piece.empty()) out.push_back(std::move(piece));
    pos = star + 1;
  }
  return out;
}

}  // namespace detail

inline TopicLexicon parse_lexicon(std::string_view json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const ordered_json::exception& e) {
    throw DataError(std::string("lexicon is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("lexicon must be a JSON object of topic -> [phrases]");
  TopicLexicon lex;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_array() || it.value().empty()) {
      throw DataError("lexicon topic '" + it.key() + "' needs a non-empty phrase list");
    }
    Topic t;
    t.name = it.key();
    for (const auto& p : it.value()) {
      if (!p.is_string() || detail::phrase_pieces(p.get<std::string>()).empty()) {
        throw DataError("lexicon topic '" + it.key() + "' has an empty or non-string phrase");
      }
      t.phrases.push_back(detail::ascii_lower(p.get<std::string>()));
    }
    lex.topics.push_back(std::move(t));
  }
  return lex;
}

inline TopicLexicon load_lexicon(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read lexicon file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_lexicon(text);
}

inline const TopicLexicon& default_lexicon() {
  static const TopicLexicon kLexicon = parse_lexicon(kDefaultLexiconJson);
  return kLexicon;
}

inline std::string lexicon_to_json(const TopicLexicon& lex) {
  ordered_json j = ordered_json::object();
  for (const auto& t : lex.topics) j[t.name] = t.phrases;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Classification.

namespace detail {

// Length of the whole-word match of `pieces` (in order, each after the
// previous) in the canonical sentence, or 0 when absent. Matching uses the
// leftmost occurrence of each piece.
inline std::size_t match_length(std::string_view padded_sentence,
                                const std::vector<std::string>& pieces) {
  std::size_t from = 0;
  std::size_t first = std::string_view::npos;
  std::size_t end = 0;
  for (const auto& piece : pieces) {
    const std::string needle = " " + piece + " ";
    const std::size_t at = padded_sentence.find(needle, from);
    if (at == std::string_view::npos) return 0;
    if (first == std::string_view::npos) first = at + 1;
    end = at + needle.size() - 1;
    from = end;  // the trailing blank may start the next piece
  }
  return end - first;
}

}  // namespace detail

/// Rule classifier. A sentence is NOT_RELEVANT when any lexicon phrase
/// matches it (case-insensitive, whole words, '*' spanning any words); the
/// score is the longest match length over the sentence length, capped at 1.
/// Otherwise it is RELEVANT with score 0.5.
inline RelevanceLabel classify_sentence(const TopicLexicon& lexicon, std::string_view sentence) {
  const std::string canon = detail::canonical_words(sentence);
  const std::string padded = " " + canon + " ";
  std::size_t longest = 0;
  for (const auto& topic : lexicon.topics) {
    for (const auto& phrase : topic.phrases) {
      longest = std::max(longest, detail::match_length(padded, detail::phrase_pieces(phrase)));
    }
  }
  if (longest == 0) return {Relevance::kRelevant, 0.5, LabelSource::kRule};
  const double score =
      std::min(1.0, static_cast<double>(longest) / static_cast<double>(canon.size()));
  return {Relevance::kNotRelevant, score, LabelSource::kRule};
}

/// Labels between-note clusters with the rule classifier. Clusters that
/// already carry an external or gold label keep it; within-note-only
/// clusters stay unlabeled.
inline void classify_clusters(std::vector<DuplicateCluster>& clusters, const TopicLexicon& lexicon,
                              unsigned threads = 1) {
  parallel_for(clusters.size(), threads, [&](std::size_t i) {
    auto& c = clusters[i];
    if (!c.between_notes()) return;
    if (c.relevance.source == LabelSource::kExternal || c.relevance.source == LabelSource::kGold)
      return;
    c.relevance = classify_sentence(lexicon, c.sentence);
  });
}

// ---------------------------------------------------------------------------
// Label files.

struct LabelEntry {
  std::size_t line_no = 0;
  std::string cluster_id;
  std::string sentence;
  Relevance label = Relevance::kUnlabeled;
  double score = 1.0;
};

inline Relevance parse_label(std::string_view s, std::size_t line_no) {
  const std::string l = detail::ascii_lower(s);
  if (l == "relevant") return Relevance::kRelevant;
  if (l == "not_relevant") return Relevance::kNotRelevant;
  throw DataError("line " + std::to_string(line_no) + ": unknown label '" + std::string(s) + "'");
}

inline std::string_view label_file_string(Relevance r) {
  return r == Relevance::kNotRelevant ? "not_relevant"
                                      : (r == Relevance::kRelevant ? "relevant" : "");
}

namespace detail {

inline std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t tab = line.find('\t', pos);
    out.emplace_back(line.substr(pos, tab == std::string_view::npos ? std::string_view::npos
                                                                    : tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return out;
}

}  // namespace detail

/// Reads a labels TSV: cluster_id, sentence, label, score. Either key may
/// be empty (cluster_id wins when both are set); score defaults to 1. A
/// header row starting with "cluster_id" is skipped.
inline std::vector<LabelEntry> read_label_file(std::istream& in) {
  std::vector<LabelEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::is_blank(line)) continue;
    if (line_no == 1 && line.rfind("cluster_id\t", 0) == 0) continue;
    auto cols = detail::split_tabs(line);
    if (cols.size() < 3 || cols.size() > 4) {
      throw DataError("labels line " + std::to_string(line_no) + ": expected 3 or 4 tab-separated columns");
    }
    LabelEntry e;
    e.line_no = line_no;
    e.cluster_id = cols[0];
    e.sentence = cols[1];
    if (e.cluster_id.empty() && e.sentence.empty()) {
      throw DataError("labels line " + std::to_string(line_no) + ": neither cluster_id nor sentence");
    }
    e.label = parse_label(cols[2], line_no);
    if (cols.size() == 4 && !cols[3].empty()) {
      try {
        std::size_t used = 0;
        e.score = std::stod(cols[3], &used);
        if (used != cols[3].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw DataError("labels line " + std::to_string(line_no) + ": bad score '" + cols[3] + "'");
      }
      if (!(e.score >= 0.0 && e.score <= 1.0)) {
        throw DataError("labels line " + std::to_string(line_no) + ": score outside [0, 1]");
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

struct ApplyReport {
  std::size_t updated = 0;
  std::vector<LabelEntry> unmatched;
};

/// Applies externally produced labels to clusters. Gold labels are never
/// overwritten by non-gold ones.
inline ApplyReport apply_labels(std::vector<DuplicateCluster>& clusters,
                                const std::vector<LabelEntry>& entries,
                                LabelSource source = LabelSource::kExternal) {
  std::unordered_map<std::string_view, std::size_t> by_id, by_sentence;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    by_id[clusters[i].cluster_id] = i;
    by_sentence[clusters[i].sentence] = i;
  }
  ApplyReport report;
  for (const auto& e : entries) {
    const auto& index = e.cluster_id.empty() ? by_sentence : by_id;
    auto it = index.find(e.cluster_id.empty() ? std::string_view(e.sentence)
                                              : std::string_view(e.cluster_id));
    if (it == index.end()) {
      report.unmatched.push_back(e);
      continue;
    }
    auto& c = clusters[it->second];
    if (c.relevance.source == LabelSource::kGold && source != LabelSource::kGold) continue;
    c.relevance = {e.label, e.score, source};
    ++report.updated;
  }
  return report;
}

inline ApplyReport apply_external_labels(std::vector<DuplicateCluster>& clusters,
                                         const std::string& labels_path,
                                         LabelSource source = LabelSource::kExternal) {
  std::ifstream in(labels_path, std::ios::binary);
  if (!in) throw DataError("cannot read labels file: " + labels_path);
  return apply_labels(clusters, read_label_file(in), source);
}

// Labels TSV for every labeled cluster, in cluster order.
inline void write_labels_tsv(const std::vector<DuplicateCluster>& clusters, std::ostream& out) {
  out << "cluster_id\tsentence\tlabel\tscore\n";
  for (const auto& c : clusters) {
    if (c.relevance.label == Relevance::kUnlabeled) continue;
    out << c.cluster_id << '\t' << c.sentence << '\t' << label_file_string(c.relevance.label)
        << '\t' << json(c.relevance.score).dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Annotation bootstrap.

inline std::uint64_t sample_key(std::uint64_t seed, std::string_view cluster_id) {
  return stable_hash64(std::to_string(seed) + ":" + std::string(cluster_id));
}

/// Seeded sample without replacement of min(n, available) clusters carrying
/// `target`: candidates are ordered by sample_key(seed, cluster_id) and the
/// first n are taken. The batch keeps that order.
inline std::vector<const DuplicateCluster*> bootstrap_sample(
    const std::vector<DuplicateCluster>& clusters, long long n, Relevance target,
    std::uint64_t seed) {
  if (n <= 0) throw ConfigError("bootstrap sample size must be positive");
  std::vector<std::pair<std::uint64_t, const DuplicateCluster*>> keyed;
  for (const auto& c : clusters) {
    if (c.relevance.label == target) keyed.emplace_back(sample_key(seed, c.cluster_id), &c);
  }
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first, a.second->cluster_id) < std::tie(b.first, b.second->cluster_id);
  });
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(n), keyed.size());
  std::vector<const DuplicateCluster*> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(keyed[i].second);
  return out;
}

inline void write_annotation_batch(const std::vector<const DuplicateCluster*>& batch,
                                   std::ostream& out) {
  out << "cluster_id\tsentence\tpredicted_label\tscore\tgold\n";
  for (const auto* c : batch) {
    out << c->cluster_id << '\t' << c->sentence << '\t' << label_file_string(c->relevance.label)
        << '\t' << json(c->relevance.score).dump() << '\t' << '\n';
  }
}

/// Reads the gold column of a completed annotation batch as label entries.
/// Rows with an empty gold cell are skipped.
inline std::vector<LabelEntry> read_annotation_gold(std::istream& in) {
  std::vector<LabelEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::is_blank(line)) continue;
    if (line_no == 1 && line.rfind("cluster_id\t", 0) == 0) continue;
    auto cols = detail::split_tabs(line);
    if (cols.size() != 5) {
      throw DataError("annotation line " + std::to_string(line_no) + ": expected 5 columns");
    }
    if (cols[4].empty()) continue;
    out.push_back({line_no, cols[0], cols[1], parse_label(cols[4], line_no), 1.0});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation.

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold count
};

struct ClassifierMetrics {
  // For the NOT_RELEVANT class.
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::map<Relevance, ClassMetrics> per_class;
};

inline double f1_score(double p, double r) { return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0; }

/// Precision, recall and F1 of the NOT_RELEVANT class, plus per-class and
/// macro-averaged values. Both maps must have the same keys.
inline ClassifierMetrics evaluate_classifier(const std::map<std::string, Relevance>& predictions,
                                             const std::map<std::string, Relevance>& gold) {
  std::vector<std::string> diff;
  for (const auto& [k, _] : predictions) {
    if (!gold.count(k)) diff.push_back(k);
  }
  for (const auto& [k, _] : gold) {
    if (!predictions.count(k)) diff.push_back(k);
  }
  if (!diff.empty()) {
    std::string msg = "prediction and gold sets differ:";
    for (const auto& k : diff) msg += " " + k;
    throw DataError(msg);
  }
  ClassifierMetrics m;
  for (const auto& [key, g] : gold) {
    const bool gp = g == Relevance::kNotRelevant;
    const bool pp = predictions.at(key) == Relevance::kNotRelevant;
    if (gp && pp) ++m.tp;
    else if (!gp && pp) ++m.fp;
    else if (gp && !pp) ++m.fn;
    else ++m.tn;
  }
  const auto ratio = [](std::size_t a, std::size_t b) {
    return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0;
  };
  ClassMetrics nr{ratio(m.tp, m.tp + m.fp), ratio(m.tp, m.tp + m.fn), 0.0, m.tp + m.fn};
  nr.f1 = f1_score(nr.precision, nr.recall);
  ClassMetrics r{ratio(m.tn, m.tn + m.fn), ratio(m.tn, m.tn + m.fp), 0.0, m.tn + m.fp};
  r.f1 = f1_score(r.precision, r.recall);
  m.precision = nr.precision;
  m.recall = nr.recall;
  m.f1 = nr.f1;
  m.per_class[Relevance::kNotRelevant] = nr;
  m.per_class[Relevance::kRelevant] = r;
  m.macro_f1 = (nr.f1 + r.f1) / 2.0;
  m.accuracy = ratio(m.tp + m.tn, gold.size());
  return m;
}

// Keys label entries by cluster id (derived from the sentence when absent).
inline std::map<std::string, Relevance> labels_by_cluster(const std::vector<LabelEntry>& entries) {
  std::map<std::string, Relevance> out;
  for (const auto& e : entries) {
    out[e.cluster_id.empty() ? cluster_id_for(e.sentence) : e.cluster_id] = e.label;
  }
  return out;
}

inline ordered_json metrics_to_json(const ClassifierMetrics& m) {
  ordered_json o;
  o["precision"] = m.precision;
  o["recall"] = m.recall;
  o["f1"] = m.f1;
  o["accuracy"] = m.accuracy;
  o["macro_f1"] = m.macro_f1;
  o["confusion"] = {{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}};
  ordered_json pc = ordered_json::object();
  for (const auto& [label, c] : m.per_class) {
    pc[std::string(to_string(label))] = {
        {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}};
  }
  o["per_class"] = std::move(pc);
  return o;
}

}  // namespace clinidedup

#endif  // CLINIDEDUP_RELEVANCE_HPP_
