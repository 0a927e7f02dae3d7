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

#include <cstdint>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "clinidedup/exact_substr.hpp"
#include "clinidedup/pipeline.hpp"
#include "clinidedup/synthetic.hpp"
#include "oracles.hpp"

namespace cd = clinidedup;

namespace {

cd::Corpus corpus_of(const std::vector<std::string>& texts) {
  cd::Corpus c;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    c.notes.push_back({"n" + std::to_string(i), "p" + std::to_string(i), std::nullopt, std::nullopt, texts[i],
                       cd::json::object()});
  }
  return c;
}

std::set<std::pair<std::string, std::size_t>> detected(const cd::Corpus& c, std::size_t k) {
  const auto idx = cd::build_index(c);
  const auto m = cd::find_duplicate_substrings(idx, k);
  std::set<std::pair<std::string, std::size_t>> out;
  for (const auto& s : cd::split_matches_to_sentences(c, m, 5)) out.insert({s.note_id, s.index_in_note});
  return out;
}

TEST(SuffixArray, Banana) {
  const auto sa = cd::build_suffix_array("banana");
  EXPECT_EQ(sa, (std::vector<std::int32_t>{5, 3, 1, 0, 4, 2}));
  const auto lcp = cd::build_lcp_array("banana", sa);
  EXPECT_EQ(lcp, (std::vector<std::int32_t>{0, 1, 3, 0, 0, 2}));
}

TEST(SuffixArray, EdgeCases) {
  EXPECT_TRUE(cd::build_suffix_array("").empty());
  EXPECT_EQ(cd::build_suffix_array("a"), (std::vector<std::int32_t>{0}));
  EXPECT_EQ(cd::build_suffix_array("aaaa"), (std::vector<std::int32_t>{3, 2, 1, 0}));
  const std::string bytes("\xff\x00\x80\x01", 4);
  EXPECT_EQ(cd::build_suffix_array(bytes), (std::vector<std::int32_t>{1, 3, 2, 0}));
}

TEST(SuffixArray, MatchesBruteForceSortAndLcp) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t alphabet = std::vector<std::size_t>{1, 2, 3, 4, 26, 256}[trial % 6];
    std::string s(rng() % 700, '\0');
    for (auto& ch : s) ch = static_cast<char>(alphabet == 256 ? rng() % 256 : 'a' + rng() % alphabet);
    const auto sa = cd::build_suffix_array(s);
    const auto expect = oracle::suffix_sort(s);
    ASSERT_EQ(std::vector<int>(sa.begin(), sa.end()), expect) << "alphabet " << alphabet;
    const auto lcp = cd::build_lcp_array(s, sa);
    ASSERT_EQ(std::vector<int>(lcp.begin(), lcp.end()), oracle::lcp_of(s, expect));
    const auto sa64 = cd::build_suffix_array<std::int64_t>(s);
    ASSERT_EQ(std::vector<int>(sa64.begin(), sa64.end()), expect);
  }
}

TEST(BuildIndex, LayoutAndErrors) {
  const auto idx = cd::build_index(corpus_of({"ab", "", "cd"}));
  EXPECT_EQ(idx.concat, std::string("ab\x01\x01" "cd"));
  ASSERT_EQ(idx.boundaries.size(), 3u);
  EXPECT_EQ(idx.boundaries[2].start, 4u);
  EXPECT_EQ(idx.note_at(0), 0u);
  EXPECT_EQ(idx.note_at(2), 0u);
  EXPECT_EQ(idx.note_at(4), 2u);
  EXPECT_EQ(idx.note_end(0), 2u);
  EXPECT_EQ(idx.note_end(2), 6u);
  EXPECT_THROW(cd::build_index(cd::Corpus{}), cd::DataError);
  EXPECT_THROW(cd::build_index(corpus_of({"a\x01" "b"})), cd::DataError);
}

TEST(FindDuplicates, TwoNotesSharingAString) {
  const std::string shared(100, 'x');
  const auto c = corpus_of({"aaa " + shared + " bbb", "ccc " + shared});
  const auto m = cd::find_duplicate_substrings(cd::build_index(c), 100);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].note_id, "n0");
  EXPECT_EQ(m[0].start, 3u);   // the shared run includes the blank before it
  EXPECT_EQ(m[0].end, 104u);
  EXPECT_EQ(m[1].start, 3u);
  EXPECT_EQ(m[1].end, 104u);
  EXPECT_EQ(m[0].cluster_key, m[1].cluster_key);
  EXPECT_TRUE(cd::find_duplicate_substrings(cd::build_index(c), 102).empty());
  EXPECT_THROW(cd::find_duplicate_substrings(cd::build_index(c), 0), cd::ConfigError);
}

TEST(FindDuplicates, IgnoresRepeatsInsideOneNote) {
  const std::string s(120, 'y');
  const auto c = corpus_of({s + " " + s, "unrelated"});
  EXPECT_TRUE(cd::find_duplicate_substrings(cd::build_index(c), 10).empty());
}

TEST(FindDuplicates, MatchNeverCrossesNoteBoundaries) {
  // "abc" ends note 0 and "abc" ends note 1; the separator must not extend it.
  const auto c = corpus_of({"xxabc", "yyabc", "abcabc"});
  const auto idx = cd::build_index(c);
  const auto best = cd::cross_note_match_lengths(idx);
  const auto oracle_best = oracle::all_pairs_best(c);
  for (std::size_t b = 0; b < c.notes.size(); ++b) {
    for (std::size_t i = 0; i < c.notes[b].text.size(); ++i) {
      EXPECT_EQ(static_cast<std::size_t>(best[idx.boundaries[b].start + i]), oracle_best[b][i]) << b << ":" << i;
    }
  }
}

TEST(FindDuplicates, MatchLengthsEqualAllPairsOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const auto c = oracle::random_corpus(rng, 2 + rng() % 15, 300);
    const auto idx = cd::build_index(c);
    const auto best = cd::cross_note_match_lengths(idx);
    const auto expect = oracle::all_pairs_best(c);
    for (std::size_t b = 0; b < c.notes.size(); ++b) {
      for (std::size_t i = 0; i < c.notes[b].text.size(); ++i) {
        ASSERT_EQ(static_cast<std::size_t>(best[idx.boundaries[b].start + i]), expect[b][i])
            << "trial " << trial << " note " << b << " pos " << i;
      }
    }
  }
}

TEST(FindDuplicates, RegionsAgreeWithKgramOracle) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    const auto c = oracle::random_corpus(rng, 2 + rng() % 20, 500);
    for (std::size_t k : {5u, 12u, 30u}) {
      const auto cov = oracle::covered_from_kgrams(c, k);
      const auto spans = cd::find_duplicate_substrings(cd::build_index(c), k);
      std::vector<std::vector<bool>> got(c.notes.size());
      for (std::size_t b = 0; b < c.notes.size(); ++b) got[b].assign(c.notes[b].text.size(), false);
      for (const auto& m : spans) {
        const std::size_t b = std::stoul(m.note_id.substr(1));
        for (std::size_t t = m.start; t < m.end; ++t) got[b][t] = true;
      }
      ASSERT_EQ(got, cov) << "trial " << trial << " k " << k;
      EXPECT_EQ(oracle::covered_sentences(c, cov, 5), detected(c, k));
    }
  }
}

TEST(FindDuplicates, LargeIndexWidthAgrees) {
  std::mt19937_64 rng(3);
  const auto c = oracle::random_corpus(rng, 30, 800);
  EXPECT_EQ(cd::find_duplicate_substrings(cd::build_index<std::int32_t>(c), 20),
            cd::find_duplicate_substrings(cd::build_index<std::int64_t>(c), 20));
}

TEST(SplitMatches, KeepsOnlyContainedLongSentences) {
  const std::string shared = "The patient was seen and examined at the bedside this morning with family present.";
  const auto c = corpus_of({"Alpha beta. " + shared + " Ok.", "Gamma. " + shared + " Fine delta."});
  const auto m = cd::find_duplicate_substrings(cd::build_index(c), 50);
  const auto s = cd::split_matches_to_sentences(c, m, 5);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].normalized, shared);
  EXPECT_EQ(s[0].index_in_note, 1u);
  EXPECT_EQ(s[1].note_id, "n1");
}

TEST(SplitMatches, ShortSentencesFiltered) {
  // The first sentence of each note carries its own prefix; the other
  // three are shared and have 7 characters each.
  const std::string shared = "Ok now. Ok now. Ok now. Ok now.";
  const auto c = corpus_of({"x " + shared, "y " + shared});
  const auto m = cd::find_duplicate_substrings(cd::build_index(c), 10);
  EXPECT_EQ(cd::split_matches_to_sentences(c, m, 5).size(), 6u);
  EXPECT_TRUE(cd::split_matches_to_sentences(c, m, 7).empty());
}

TEST(SplitMatches, RejectsForeignSpans) {
  const auto c = corpus_of({"abc"});
  EXPECT_THROW(cd::split_matches_to_sentences(c, {{"zz", 0, 1, ""}}), cd::DataError);
  EXPECT_THROW(cd::split_matches_to_sentences(c, {{"n0", 0, 10, ""}}), cd::DataError);
}

TEST(DuplicatesTsv, Header) {
  std::ostringstream os;
  cd::write_duplicates_tsv({{"n1", 2, 0, 10, "Hello there."}}, os);
  EXPECT_EQ(os.str(), "note_id\tstart\tend\tsentence_index\tnormalized_sentence\nn1\t0\t10\t2\tHello there.\n");
}

TEST(Synthetic, DetectorRecoversPlantedDuplicatesExactly) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const auto s = cd::generate_synthetic_corpus({}, seed);
    const auto det = cd::detect_duplicates(s.corpus, 100, 5, 5);
    std::set<std::string> planted_bn, planted_wn, got_bn, got_wn;
    for (const auto& p : s.planted) {
      if (p.between_note()) planted_bn.insert(p.sentence);
      if (p.within_note()) planted_wn.insert(p.sentence);
    }
    for (const auto& r : det.between_note) got_bn.insert(r.normalized);
    for (const auto& d : det.within_note) got_wn.insert(d.sentence.normalized);
    EXPECT_EQ(got_bn, planted_bn) << "seed " << seed;
    EXPECT_EQ(got_wn, planted_wn) << "seed " << seed;
    EXPECT_TRUE(det.clusters.orphans.empty());
  }
}

TEST(Synthetic, ZeroDuplicationFindsNothing) {
  cd::SyntheticProfile p;
  p.wn_rate = p.copy_forward_rate = p.boilerplate_rate = 0;
  const auto s = cd::generate_synthetic_corpus(p, 5);
  EXPECT_TRUE(s.planted.empty());
  const auto det = cd::detect_duplicates(s.corpus, 100, 5, 5);
  EXPECT_TRUE(det.between_note.empty());
  EXPECT_TRUE(det.within_note.empty());
  EXPECT_TRUE(det.clusters.clusters.empty());
}

}  // namespace
