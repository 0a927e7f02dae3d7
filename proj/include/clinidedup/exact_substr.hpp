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

#ifndef CLINIDEDUP_EXACT_SUBSTR_HPP_
#define CLINIDEDUP_EXACT_SUBSTR_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "clinidedup/corpus.hpp"
#include "clinidedup/error.hpp"
#include "clinidedup/hash.hpp"
#include "clinidedup/preprocess.hpp"
#include "clinidedup/suffix_array.hpp"

namespace clinidedup {

// Joins note texts inside the index. Normalization strips control bytes, so
// it cannot occur in normalized text.
inline constexpr char kSeparator = '\x01';

struct NoteBoundary {
  std::size_t start = 0;  // offset of the note's first byte in concat
  std::string note_id;
};

/// Suffix index over a corpus: note texts joined by kSeparator, the start of
/// each note, and the suffix array of the joined text.
template <class Index>
struct BasicSuffixIndex {
  std::string concat;
  std::vector<NoteBoundary> boundaries;
  std::vector<Index> sa;

  // Position of the note containing `offset` in `boundaries`. A separator
  // belongs to the note before it.
  std::size_t note_at(std::size_t offset) const {
    auto it = std::upper_bound(
        boundaries.begin(), boundaries.end(), offset,
        [](std::size_t off, const NoteBoundary& b) { return off < b.start; });
    return static_cast<std::size_t>(it - boundaries.begin()) - 1;
  }

  // One past the last byte of note `b` (the separator position or the end).
  std::size_t note_end(std::size_t b) const {
    return b + 1 < boundaries.size() ? boundaries[b + 1].start - 1 : concat.size();
  }
};

using SuffixIndex = BasicSuffixIndex<std::int32_t>;
using LargeSuffixIndex = BasicSuffixIndex<std::int64_t>;

/// Builds the index over the corpus texts in corpus order. Texts are used as
/// given and are expected to be normalized already.
template <class Index = std::int32_t>
BasicSuffixIndex<Index> build_index(const Corpus& corpus) {
  if (corpus.empty()) throw DataError("build_index: empty corpus");
  BasicSuffixIndex<Index> index;
  std::size_t total = corpus.notes.size() - 1;
  for (const auto& n : corpus.notes) total += n.text.size();
  if (total >= static_cast<std::size_t>(std::numeric_limits<Index>::max())) {
    throw DataError("build_index: corpus of " + std::to_string(total) +
                    " bytes is too large for this index width");
  }
  index.concat.reserve(total);
  index.boundaries.reserve(corpus.notes.size());
  for (std::size_t i = 0; i < corpus.notes.size(); ++i) {
    const auto& note = corpus.notes[i];
    if (note.text.find(kSeparator) != std::string::npos) {
      throw DataError("build_index: note " + note.note_id + " contains the reserved separator byte");
    }
    if (i) index.concat.push_back(kSeparator);
    index.boundaries.push_back({index.concat.size(), note.note_id});
    index.concat += note.text;
  }
  index.sa = build_suffix_array<Index>(index.concat);
  return index;
}

/// A duplicated region of one note: every byte in [start, end) lies inside
/// some substring of length >= k that also occurs in another note.
struct MatchSpan {
  std::string note_id;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string cluster_key;  // stable id of the region text

  friend bool operator==(const MatchSpan&, const MatchSpan&) = default;
};

/// For every text position p, the length of the longest prefix of the
/// suffix at p that also occurs in a different note, never crossing a note
/// boundary. Positions on separators get 0.
template <class Index>
std::vector<Index> cross_note_match_lengths(const BasicSuffixIndex<Index>& index) {
  const std::size_t n = index.concat.size();
  std::vector<Index> best(n, Index{0});
  if (n == 0) return best;

  // Note of every text position.
  std::vector<std::uint32_t> doc(n);
  for (std::size_t b = 0; b < index.boundaries.size(); ++b) {
    const std::size_t lo = index.boundaries[b].start;
    const std::size_t hi = b + 1 < index.boundaries.size() ? index.boundaries[b + 1].start : n;
    std::fill(doc.begin() + static_cast<std::ptrdiff_t>(lo),
              doc.begin() + static_cast<std::ptrdiff_t>(hi), static_cast<std::uint32_t>(b));
  }

  // Permuted LCP (Kasai in text order via phi), capped at the end of the
  // note that owns the suffix. With one shared separator byte the true LCP
  // may run across a boundary only when both suffixes meet a separator at
  // the same offset, so capping by the first suffix is enough.
  std::vector<Index> plcp(n);
  const Index none = -1;
  plcp[static_cast<std::size_t>(index.sa[0])] = none;
  for (std::size_t i = 1; i < n; ++i) {
    plcp[static_cast<std::size_t>(index.sa[i])] = index.sa[i - 1];
  }
  {
    std::size_t h = 0;
    std::size_t b = 0;
    for (std::size_t p = 0; p < n; ++p) {
      while (b + 1 < index.boundaries.size() && index.boundaries[b + 1].start <= p) ++b;
      const std::size_t end = index.note_end(b);
      const Index prev = plcp[p];
      if (prev == none) {
        h = 0;
        plcp[p] = 0;
        continue;
      }
      const auto q = static_cast<std::size_t>(prev);
      while (p + h < n && q + h < n && index.concat[p + h] == index.concat[q + h]) ++h;
      const std::size_t rem = p < end ? end - p : 0;
      plcp[p] = static_cast<Index>(std::min(h, rem));
      if (h > 0) --h;
    }
  }

  // Nearest entry from another note on each side of sa[i]; its range
  // minimum over the capped LCPs is the best match on that side.
  const auto sweep = [&](bool forward) {
    const Index inf = std::numeric_limits<Index>::max();
    bool has1 = false, has2 = false;
    std::uint32_t d1 = 0;
    Index m1 = inf, m2 = inf;
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t i = forward ? step : n - 1 - step;
      const auto p = static_cast<std::size_t>(index.sa[i]);
      Index link = 0;
      if (forward) {
        link = i > 0 ? plcp[p] : 0;
      } else {
        link = i + 1 < n ? plcp[static_cast<std::size_t>(index.sa[i + 1])] : 0;
      }
      m1 = std::min(m1, link);
      m2 = std::min(m2, link);
      const std::uint32_t d = doc[p];
      Index cand = 0;
      if (has1 && d != d1) {
        cand = m1;
      } else if (has2) {
        cand = m2;
      }
      if (cand > best[p]) best[p] = cand;
      if (has1 && d == d1) {
        m1 = inf;
      } else {
        if (has1) {
          m2 = m1;
          has2 = true;
        }
        d1 = d;
        m1 = inf;
        has1 = true;
      }
    }
  };
  sweep(true);
  sweep(false);
  return best;
}

/// Finds every region of every note covered by a substring of at least `k`
/// bytes that occurs verbatim in at least two distinct notes. Overlapping
/// or touching regions within a note are merged. Output is sorted by
/// note_id, then start.
template <class Index>
std::vector<MatchSpan> find_duplicate_substrings(const BasicSuffixIndex<Index>& index,
                                                 std::size_t k) {
  if (k < 1) throw ConfigError("minimum match length k must be >= 1");
  const std::vector<Index> best = cross_note_match_lengths(index);
  std::vector<MatchSpan> out;
  for (std::size_t b = 0; b < index.boundaries.size(); ++b) {
    const std::size_t lo = index.boundaries[b].start;
    const std::size_t hi = index.note_end(b);
    std::size_t run_start = 0, run_end = 0;
    bool open = false;
    const auto flush = [&] {
      if (!open) return;
      MatchSpan m;
      m.note_id = index.boundaries[b].note_id;
      m.start = run_start - lo;
      m.end = run_end - lo;
      m.cluster_key = stable_id(std::string_view(index.concat).substr(run_start, run_end - run_start));
      out.push_back(std::move(m));
      open = false;
    };
    for (std::size_t p = lo; p < hi; ++p) {
      const auto len = static_cast<std::size_t>(best[p]);
      if (len < k) continue;
      if (open && p <= run_end) {
        run_end = std::max(run_end, p + len);
      } else {
        flush();
        run_start = p;
        run_end = p + len;
        open = true;
      }
    }
    flush();
  }
  std::stable_sort(out.begin(), out.end(), [](const MatchSpan& a, const MatchSpan& b) {
    return std::tie(a.note_id, a.start) < std::tie(b.note_id, b.start);
  });
  return out;
}

/// Reduces duplicated regions to whole sentences: a sentence is kept when
/// its span lies entirely inside one region and its normalized form has
/// more than `min_sentence_chars` code points. Sorted by (note_id, index).
inline std::vector<SentenceRecord> split_matches_to_sentences(
    const Corpus& corpus, const std::vector<MatchSpan>& matches, std::size_t min_sentence_chars = 5,
    const Abbreviations& abbreviations = Abbreviations::defaults()) {
  std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> regions;
  for (const auto& m : matches) regions[m.note_id].emplace_back(m.start, m.end);
  std::map<std::string, const Note*> by_id;
  for (const auto& n : corpus.notes) by_id[n.note_id] = &n;

  std::vector<SentenceRecord> out;
  for (auto& [note_id, spans] : regions) {
    auto it = by_id.find(note_id);
    if (it == by_id.end()) throw DataError("match refers to unknown note: " + note_id);
    const Note& note = *it->second;
    std::sort(spans.begin(), spans.end());
    // Merge so that containment can be tested against one region.
    std::vector<std::pair<std::size_t, std::size_t>> merged;
    for (const auto& s : spans) {
      if (s.second > note.text.size() || s.first > s.second) {
        throw DataError("match span outside note " + note_id);
      }
      if (!merged.empty() && s.first <= merged.back().second) {
        merged.back().second = std::max(merged.back().second, s.second);
      } else {
        merged.push_back(s);
      }
    }
    for (auto& sent : split_sentences(note.text, note_id, abbreviations)) {
      auto r = std::upper_bound(merged.begin(), merged.end(), sent.start,
                                [](std::size_t v, const auto& iv) { return v < iv.first; });
      if (r == merged.begin()) continue;
      --r;
      if (sent.end > r->second) continue;
      if (utf8_length(sent.normalized) <= min_sentence_chars) continue;
      out.push_back(std::move(sent));
    }
  }
  return out;
}

inline void write_duplicates_tsv(const std::vector<SentenceRecord>& records, std::ostream& out) {
  out << "note_id\tstart\tend\tsentence_index\tnormalized_sentence\n";
  for (const auto& r : records) {
    out << r.note_id << '\t' << r.start << '\t' << r.end << '\t' << r.index_in_note << '\t'
        << r.normalized << '\n';
  }
}

}  // namespace clinidedup

#endif  // CLINIDEDUP_EXACT_SUBSTR_HPP_
