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

#ifndef CLINIDEDUP_SYNTHETIC_HPP_
#define CLINIDEDUP_SYNTHETIC_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "clinidedup/corpus.hpp"
#include "clinidedup/duplicates.hpp"
#include "clinidedup/error.hpp"

namespace clinidedup {

// Fixture generator for tests, benchmarks and the bundled sample corpus.
// Randomness is drawn only from a std::mt19937_64 through integer
// arithmetic, so a seed gives the same corpus on every platform.

struct SyntheticProfile {
  int n_patients = 20;
  int notes_per_patient = 10;
  int min_filler = 6;  // unique sentences per note
  int max_filler = 12;
  double wn_rate = 0.3;            // note repeats one of its own sentences
  double copy_forward_rate = 0.5;  // later note carries a block from the previous one
  double boilerplate_rate = 0.4;   // note carries a shared boilerplate block
  std::size_t min_block_chars = 120;
};

enum class PlantedKind { kWithinNote, kCopyForward, kBoilerplate };

inline std::string_view to_string(PlantedKind k) {
  switch (k) {
    case PlantedKind::kWithinNote: return "within_note";
    case PlantedKind::kCopyForward: return "copy_forward";
    case PlantedKind::kBoilerplate: return "boilerplate";
  }
  return "?";
}

// A sentence occurring more than once in the corpus, with every occurrence.
struct PlantedDuplicate {
  std::string sentence;
  PlantedKind kind = PlantedKind::kWithinNote;
  Relevance expected_relevance = Relevance::kRelevant;
  std::map<std::string, int> note_counts;  // note_id -> occurrences

  bool within_note() const {
    return std::any_of(note_counts.begin(), note_counts.end(), [](const auto& e) { return e.second >= 2; });
  }
  bool between_note() const { return note_counts.size() >= 2; }
};

struct SyntheticCorpus {
  Corpus corpus;
  std::vector<PlantedDuplicate> planted;  // sorted by sentence
};

namespace detail {

class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : gen_(seed) {}
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : gen_() % n; }
  bool chance(double p) { return static_cast<double>(gen_() >> 11) * 0x1.0p-53 < p; }
  template <typename C>
  const auto& pick(const C& c) { return c[below(std::size(c))]; }

 private:
  std::mt19937_64 gen_;
};

inline constexpr std::array<std::string_view, 12> kSubjects = {
    "Patient", "She", "He", "The patient", "Family", "Mother", "Nursing staff", "Wife",
    "Husband", "Daughter", "Son", "Team"};
inline constexpr std::array<std::string_view, 24> kVerbs = {
    "reports", "denies", "describes", "endorses", "tolerated", "received", "started",
    "continues", "developed", "requires", "declined", "completed", "noted", "resumed",
    "refused", "requested", "experienced", "improved with", "worsened with", "responded to",
    "remains on", "was given", "was weaned from", "was switched to"};
inline constexpr std::array<std::string_view, 48> kObjects = {
    "nausea", "chest pressure", "abdominal pain", "headache", "dyspnea", "back pain",
    "vomiting", "diarrhea", "constipation", "fatigue", "dizziness", "palpitations",
    "cough", "fever", "chills", "edema", "insomnia", "anxiety", "confusion", "rash",
    "heparin", "insulin", "furosemide", "metoprolol", "lisinopril", "vancomycin",
    "cefepime", "acetaminophen", "oxycodone", "ondansetron", "pantoprazole", "warfarin",
    "aspirin", "atorvastatin", "prednisone", "albuterol", "normal saline", "potassium",
    "magnesium", "oxygen", "physical therapy", "a clear diet", "ambulation", "tube feeds",
    "bipap", "a nasal cannula", "wound care", "a blood transfusion"};
inline constexpr std::array<std::string_view, 20> kModifiers = {
    "overnight", "since yesterday", "this morning", "after breakfast", "at rest",
    "with exertion", "without relief", "with good effect", "per cardiology", "per renal",
    "on the left side", "on the right side", "intermittently", "for three days",
    "for two weeks", "since admission", "before discharge", "during transport",
    "while ambulating", "after dialysis"};
inline constexpr std::array<std::string_view, 10> kUnits = {
    "mg", "mL", "units", "mmHg", "beats per minute", "percent", "liters", "hours", "kg", "mcg"};
inline constexpr std::array<std::string_view, 12> kLinks = {
    "and", "but", "although", "while", "because", "so", "and also", "yet", "whereas",
    "as", "since", "and then"};

// Boilerplate sentences, each recognized by the default topic lexicon.
// Blocks are disjoint so a block always matches as a whole.
inline const std::vector<std::vector<std::string>>& boilerplate_blocks() {
  static const std::vector<std::vector<std::string>> kBlocks = {
      {"I agree with the resident note above including assessment and plan.",
       "I saw and examined the patient and was physically present for key portions of the services provided."},
      {"See flowsheet for further details.",
       "Attending note for full plan details by systems.",
       "Please feel free to contact us if you should have any questions."},
      {"Please return to the hospital or call your PCP if you develop chest pain or worsening shortness of breath.",
       "Answering service will contact on call person during off hours."},
      {"This is a confidential and privileged communication.",
       "Please dispose of paper copies appropriately.",
       "All needle sponge and instrument counts were correct."},
  };
  return kBlocks;
}

}  // namespace detail

// One random clinically flavoured sentence. Not guaranteed unique.
inline std::string random_filler_sentence(detail::SynthRng& rng) {
  std::string s(rng.pick(detail::kSubjects));
  s += ' ';
  s += rng.pick(detail::kVerbs);
  s += ' ';
  s += rng.pick(detail::kObjects);
  s += ' ';
  s += rng.pick(detail::kModifiers);
  const auto extra = rng.below(3);
  for (std::uint64_t i = 0; i < extra; ++i) {
    s += ' ';
    s += rng.pick(detail::kLinks);
    s += ' ';
    s += rng.pick(detail::kVerbs);
    s += ' ';
    s += rng.pick(detail::kObjects);
  }
  s += " at " + std::to_string(1 + rng.below(999)) + ' ';
  s += rng.pick(detail::kUnits);
  s += '.';
  return s;
}

/// Generates a corpus with planted duplicates and the list of what was
/// planted. Inputs to the generator are already in normalized form.
inline SyntheticCorpus generate_synthetic_corpus(const SyntheticProfile& profile, std::uint64_t seed) {
  if (profile.n_patients < 1 || profile.notes_per_patient < 1 || profile.min_filler < 1 ||
      profile.max_filler < profile.min_filler) {
    throw ConfigError("synthetic profile sizes must be positive");
  }
  detail::SynthRng rng(seed);
  static constexpr std::array<std::string_view, 4> kTypes = {"progress", "nursing", "radiology",
                                                              "discharge"};
  const auto& blocks = detail::boilerplate_blocks();

  std::set<std::string> used;
  auto fresh = [&] {
    for (;;) {
      auto s = random_filler_sentence(rng);
      if (used.insert(s).second) return s;
    }
  };

  struct Info {
    PlantedKind kind;
    std::map<std::string, int> counts;
  };
  std::map<std::string, Info> seen;
  auto record = [&](const std::string& s, PlantedKind kind, const std::string& note_id) {
    auto& info = seen.try_emplace(s, Info{kind, {}}).first->second;
    if (kind == PlantedKind::kBoilerplate) info.kind = kind;
    ++info.counts[note_id];
  };

  // A note as a sequence of segments; a segment is verbatim text made of
  // whole sentences, so planted blocks stay contiguous.
  struct Segment {
    std::string text;
    std::vector<std::string> sentences;
    std::vector<PlantedKind> kinds;
  };
  auto single = [](const std::string& s, PlantedKind k) { return Segment{s, {s}, {k}}; };

  SyntheticCorpus out;
  for (int p = 0; p < profile.n_patients; ++p) {
    char pid[32];
    std::snprintf(pid, sizeof(pid), "P%04d", p);
    std::vector<Segment> prev;  // previous note, one segment per sentence
    for (int j = 0; j < profile.notes_per_patient; ++j) {
      char nid[48];
      std::snprintf(nid, sizeof(nid), "%s_N%03d", pid, j);
      char ts[32];
      std::snprintf(ts, sizeof(ts), "2150-%02d-%02dT%02d:00:00", 1 + (j / 28) % 12, 1 + j % 28,
                    static_cast<int>(8 + rng.below(10)));

      std::vector<Segment> segs;
      std::vector<std::string> filler;
      const auto n_fill =
          profile.min_filler +
          static_cast<int>(rng.below(static_cast<std::uint64_t>(profile.max_filler - profile.min_filler + 1)));
      for (int i = 0; i < n_fill; ++i) {
        filler.push_back(fresh());
        segs.push_back(single(filler.back(), PlantedKind::kWithinNote));
      }
      if (!prev.empty() && rng.chance(profile.copy_forward_rate)) {
        // A verbatim run of the previous note, separators included.
        std::size_t from = rng.below(prev.size());
        std::size_t to = from;
        std::size_t chars = 0;
        while (to < prev.size() && chars < profile.min_block_chars) chars += prev[to++].text.size();
        while (from > 0 && chars < profile.min_block_chars) chars += prev[--from].text.size();
        if (chars >= profile.min_block_chars) {
          Segment block;
          for (std::size_t i = from; i < to; ++i) {
            const auto& s = prev[i];
            block.text += i == from ? s.text.substr(1) : s.text;  // drop leading separator
            block.sentences.push_back(s.sentences.front());
            block.kinds.push_back(s.kinds.front() == PlantedKind::kBoilerplate ? PlantedKind::kBoilerplate
                                                                               : PlantedKind::kCopyForward);
          }
          const auto at = rng.below(segs.size() + 1);
          segs.insert(segs.begin() + static_cast<std::ptrdiff_t>(at), std::move(block));
        }
      }
      if (rng.chance(profile.boilerplate_rate)) {
        const auto& b = rng.pick(blocks);
        Segment block;
        for (const auto& s : b) {
          if (!block.text.empty()) block.text += ' ';
          block.text += s;
        }
        block.sentences = b;
        block.kinds.assign(b.size(), PlantedKind::kBoilerplate);
        if (rng.chance(0.5)) {
          segs.insert(segs.begin(), std::move(block));
        } else {
          segs.push_back(std::move(block));
        }
      }
      if (rng.chance(profile.wn_rate)) {
        const auto& s = filler[rng.below(filler.size())];
        std::size_t first = 0;
        while (segs[first].sentences.size() != 1 || segs[first].sentences.front() != s) ++first;
        const auto at = first + 1 + rng.below(segs.size() - first);
        segs.insert(segs.begin() + static_cast<std::ptrdiff_t>(at), single(s, PlantedKind::kWithinNote));
      }

      Note note;
      note.note_id = nid;
      note.patient_id = pid;
      note.note_type = std::string(rng.pick(kTypes));
      note.timestamp = ts;
      // Flattened with each sentence carrying the separator before it.
      std::vector<Segment> flat;
      for (std::size_t i = 0; i < segs.size(); ++i) {
        const std::string sep = i == 0 ? "" : (rng.chance(0.2) ? "\n" : " ");
        note.text += sep;
        note.text += segs[i].text;
        std::size_t at = 0;
        for (std::size_t k = 0; k < segs[i].sentences.size(); ++k) {
          const auto& sent = segs[i].sentences[k];
          const std::size_t pos = segs[i].text.find(sent, at);
          const std::string before = k == 0 ? (i == 0 ? " " : sep) : segs[i].text.substr(at, pos - at);
          flat.push_back({before + sent, {sent}, {segs[i].kinds[k]}});
          at = pos + sent.size();
          record(sent, segs[i].kinds[k], note.note_id);
        }
      }
      out.corpus.notes.push_back(std::move(note));
      prev = std::move(flat);
    }
  }

  for (auto& [sentence, info] : seen) {
    int total = 0;
    for (const auto& [n, c] : info.counts) total += c;
    if (total < 2) continue;
    PlantedDuplicate d;
    d.sentence = sentence;
    d.kind = info.kind;
    if (info.kind == PlantedKind::kWithinNote && info.counts.size() >= 2) d.kind = PlantedKind::kCopyForward;
    d.expected_relevance =
        d.kind == PlantedKind::kBoilerplate ? Relevance::kNotRelevant : Relevance::kRelevant;
    d.note_counts = std::move(info.counts);
    out.planted.push_back(std::move(d));
  }
  out.corpus.source_tag = "synthetic";
  out.corpus.canonicalize();
  return out;
}

inline ordered_json planted_to_json(const PlantedDuplicate& d) {
  ordered_json j;
  j["sentence"] = d.sentence;
  j["kind"] = to_string(d.kind);
  j["expected_relevance"] = to_string(d.expected_relevance);
  ordered_json occ = ordered_json::array();
  for (const auto& [n, c] : d.note_counts) occ.push_back({{"note_id", n}, {"count", c}});
  j["occurrences"] = std::move(occ);
  return j;
}

inline void write_planted(const std::vector<PlantedDuplicate>& planted, std::ostream& out) {
  for (const auto& d : planted) out << planted_to_json(d).dump() << '\n';
}

// Paired corpora for redundancy checks. `dup` is built from a small pool of
// sentences reused many times; `unique` has only fresh sentences and the
// same number of training sentences. Both are split by note into train and
// held-out parts.
struct RedundancyPair {
  Corpus dup_train, dup_eval, unique_train, unique_eval;
};

inline RedundancyPair make_redundancy_pair(std::uint64_t seed, int n_notes = 200, int sentences_per_note = 8,
                                           int pool_size = 60) {
  if (n_notes < 2 || sentences_per_note < 1 || pool_size < 1) throw ConfigError("bad redundancy pair sizes");
  detail::SynthRng rng(seed);
  std::set<std::string> used;
  auto fresh = [&] {
    for (;;) {
      auto s = random_filler_sentence(rng);
      if (used.insert(s).second) return s;
    }
  };
  std::vector<std::string> pool;
  for (int i = 0; i < pool_size; ++i) pool.push_back(fresh());

  RedundancyPair out;
  const int n_train = n_notes - n_notes / 4;
  for (int i = 0; i < n_notes; ++i) {
    Note d, u;
    char id[32];
    std::snprintf(id, sizeof(id), "R%05d", i);
    d.note_id = u.note_id = id;
    d.patient_id = u.patient_id = std::string("P") + id;
    for (int k = 0; k < sentences_per_note; ++k) {
      if (k > 0) {
        d.text += ' ';
        u.text += ' ';
      }
      d.text += pool[rng.below(pool.size())];
      u.text += fresh();
    }
    (i < n_train ? out.dup_train : out.dup_eval).notes.push_back(std::move(d));
    (i < n_train ? out.unique_train : out.unique_eval).notes.push_back(std::move(u));
  }
  return out;
}

}  // namespace clinidedup

#endif  // CLINIDEDUP_SYNTHETIC_HPP_
