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

#ifndef CLINIDEDUP_EMIT_HPP_
#define CLINIDEDUP_EMIT_HPP_

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "clinidedup/corpus.hpp"
#include "clinidedup/duplicates.hpp"
#include "clinidedup/error.hpp"
#include "clinidedup/parallel.hpp"
#include "clinidedup/preprocess.hpp"

namespace clinidedup {

enum class BnRule { kDropAll, kKeepFirstGlobal };

inline std::string_view to_string(BnRule r) {
  return r == BnRule::kDropAll ? "drop-all" : "keep-first";
}

inline std::optional<BnRule> parse_bn_rule(std::string_view s) {
  if (s == "drop-all" || s == "drop_all") return BnRule::kDropAll;
  if (s == "keep-first" || s == "keep_first_global" || s == "keep-first-global")
    return BnRule::kKeepFirstGlobal;
  return std::nullopt;
}

struct DedupPolicy {
  DedupConfig config = DedupConfig::kNone;
  BnRule bn_rule = BnRule::kDropAll;
  // Within-note duplicates always keep their first occurrence in the note.
};

// note_id -> sentence indices to excise.
using RemovalPlan = std::map<std::string, std::set<std::size_t>>;

/// Decides which sentence occurrences a policy removes.
inline RemovalPlan plan_removals(const Corpus& corpus, const std::vector<DuplicateCluster>& clusters,
                                 const DedupPolicy& policy) {
  RemovalPlan plan;
  if (policy.config == DedupConfig::kNone) return plan;
  if (policy.config == DedupConfig::kWNNR) {
    for (const auto& c : clusters) {
      if (c.between_notes() && c.relevance.label == Relevance::kUnlabeled) {
        throw ConfigError("WNNR requires relevance labels; cluster " + c.cluster_id +
                          " is unlabeled");
      }
    }
  }
  std::unordered_map<std::string_view, std::size_t> order;
  for (std::size_t i = 0; i < corpus.notes.size(); ++i) order[corpus.notes[i].note_id] = i;

  for (const auto& c : clusters) {
    std::vector<const Occurrence*> occ;
    for (const auto& o : c.occurrences) {
      if (!order.count(o.note_id)) throw DataError("cluster refers to unknown note: " + o.note_id);
      occ.push_back(&o);
    }
    std::sort(occ.begin(), occ.end(), [&](const Occurrence* a, const Occurrence* b) {
      return std::make_pair(order.at(a->note_id), a->sentence_index) <
             std::make_pair(order.at(b->note_id), b->sentence_index);
    });
    // Within-note: keep the first occurrence in each note.
    std::map<std::string_view, std::size_t> seen_in_note;
    for (const Occurrence* o : occ) {
      if (seen_in_note[o->note_id]++ > 0) plan[o->note_id].insert(o->sentence_index);
    }
    if (!c.between_notes()) continue;
    bool drop = false;
    bool keep_first = false;
    if (policy.config == DedupConfig::kWNNR) {
      drop = c.relevance.label == Relevance::kNotRelevant;
    } else if (policy.config == DedupConfig::kWNBN) {
      drop = true;
      keep_first = policy.bn_rule == BnRule::kKeepFirstGlobal;
    }
    if (!drop) continue;
    for (std::size_t i = keep_first ? 1 : 0; i < occ.size(); ++i) {
      plan[occ[i]->note_id].insert(occ[i]->sentence_index);
    }
  }
  return plan;
}

/// Rebuilds `text` without the sentences listed in `remove`. Kept sentences
/// are copied byte for byte; the whitespace between two kept sentences is
/// kept verbatim when nothing between them was removed, and otherwise
/// collapses to "\n" (if any removed gap held a newline) or " ".
inline std::string excise_sentences(std::string_view text,
                                    const std::vector<SentenceRecord>& sentences,
                                    const std::set<std::size_t>& remove) {
  if (remove.empty()) return std::string(text);
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (!remove.count(i)) kept.push_back(i);
  }
  if (kept.empty()) return {};
  std::string out(text.substr(0, sentences.front().start));
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const auto& s = sentences[kept[k]];
    if (k > 0) {
      const std::size_t prev = kept[k - 1];
      if (kept[k] == prev + 1) {
        out.append(text.substr(sentences[prev].end, s.start - sentences[prev].end));
      } else {
        bool newline = false;
        for (std::size_t g = prev; g < kept[k]; ++g) {
          const auto gap = text.substr(sentences[g].end, sentences[g + 1].start - sentences[g].end);
          if (gap.find('\n') != std::string_view::npos) newline = true;
        }
        out.push_back(newline ? '\n' : ' ');
      }
    }
    out.append(text.substr(s.start, s.end - s.start));
  }
  out.append(text.substr(sentences.back().end));
  return out;
}

/// Materializes one deduplication configuration. NONE is the identity; WN
/// drops repeated sentences inside a note (first kept); WNNR adds every
/// occurrence of not-relevant between-note clusters; WNBN adds between-note
/// clusters per the BN rule. Notes are never dropped: a note left without
/// text keeps an empty text and the "emptied" flag.
inline Corpus emit_config(const Corpus& corpus, const std::vector<DuplicateCluster>& clusters,
                          const DedupPolicy& policy, unsigned threads = 1,
                          const Abbreviations& abbreviations = Abbreviations::defaults()) {
  const RemovalPlan plan = plan_removals(corpus, clusters, policy);
  // Expected sentence text of each occurrence, for consistency checks.
  std::map<std::pair<std::string_view, std::size_t>, std::string_view> expected;
  for (const auto& c : clusters) {
    for (const auto& o : c.occurrences) expected[{o.note_id, o.sentence_index}] = c.sentence;
  }

  Corpus out = corpus;
  out.config_tag = policy.config;
  parallel_for(out.notes.size(), threads, [&](std::size_t i) {
    Note& note = out.notes[i];
    auto it = plan.find(note.note_id);
    if (it == plan.end() || it->second.empty()) return;
    const auto sentences = split_sentences(note.text, note.note_id, abbreviations);
    for (std::size_t idx : it->second) {
      if (idx >= sentences.size()) {
        throw DataError("clusters do not match corpus: note " + note.note_id + " has no sentence " +
                        std::to_string(idx));
      }
      auto e = expected.find({std::string_view(note.note_id), idx});
      if (e != expected.end() && e->second != sentences[idx].normalized) {
        throw DataError("clusters do not match corpus: note " + note.note_id + " sentence " +
                        std::to_string(idx) + " differs");
      }
    }
    note.text = excise_sentences(note.text, sentences, it->second);
    if (detail::is_blank(note.text)) {
      note.text.clear();
      note.extras[std::string(kEmptiedField)] = true;
    }
  });
  return out;
}

struct ReductionReport {
  std::size_t words_before = 0;
  std::size_t words_after = 0;
  double pct_decrease = 0.0;
};

inline double percent_decrease(double before, double after) {
  if (!(before > 0)) throw DataError("reduction baseline is empty");
  return 100.0 * (before - after) / before;
}

inline ReductionReport reduction_report(const Corpus& before, const Corpus& after,
                                        unsigned threads = 1,
                                        const Abbreviations& abbreviations = Abbreviations::defaults()) {
  ReductionReport r;
  r.words_before = count_words(before, threads, abbreviations).total_words;
  r.words_after = count_words(after, threads, abbreviations).total_words;
  r.pct_decrease = percent_decrease(static_cast<double>(r.words_before),
                                    static_cast<double>(r.words_after));
  return r;
}

inline ordered_json reduction_to_json(const ReductionReport& r) {
  ordered_json o;
  o["words_before"] = r.words_before;
  o["words_after"] = r.words_after;
  o["pct_decrease"] = r.pct_decrease;
  return o;
}

}  // namespace clinidedup

#endif  // CLINIDEDUP_EMIT_HPP_
