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

#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "clinidedup/preprocess.hpp"
#include "clinidedup/synthetic.hpp"

namespace cd = clinidedup;

namespace {

std::vector<std::string> texts(const std::vector<cd::Token>& tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

std::vector<std::string> sentence_texts(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& s : cd::split_sentences(text)) out.push_back(s.normalized);
  return out;
}

TEST(Normalize, DateAndTime) {
  EXPECT_EQ(cd::normalize_text("Seen 01/02/2010 at 3:45 pm."), "Seen [DATE] at [TIME].");
  EXPECT_EQ(cd::normalize_text(""), "");
}

TEST(Normalize, EveryPatternFamily) {
  EXPECT_EQ(cd::normalize_text("on 3/4/21 and 2021-12-31"), "on [DATE] and [DATE]");
  EXPECT_EQ(cd::normalize_text("since January 5, 2020 and Sept. 12, 2019"), "since [DATE] and [DATE]");
  EXPECT_EQ(cd::normalize_text("at 23:59:01, 07:30 AM and 1400 hours"), "at [TIME], [TIME] and [TIME]");
  // Not dates or times.
  EXPECT_EQ(cd::normalize_text("bp 120/80, ratio 13/45/2000x, 25:61"), "bp 120/80, ratio 13/45/2000x, 25:61");
}

TEST(Normalize, ControlCharactersAndNfc) {
  EXPECT_EQ(cd::normalize_text("a\x01" "b\x7F" "c\nd\te"), "abc\nd e");
  EXPECT_EQ(cd::normalize_text("caf" "e\xCC\x81"), "caf\xC3\xA9");  // e + combining acute
  EXPECT_EQ(cd::normalize_text("x\xC2\x85y"), "xy");                  // C1 control
}

TEST(Normalize, IdempotentOnGeneratedStrings) {
  cd::detail::SynthRng rng(17);
  static const std::vector<std::string> kExtras = {"01/02/2010", "3:45 pm", "2020-02-29", "March 3, 2001",
                                                   "0930 hours", "\t", "caf" "e\xCC\x81", "\x02", "[**Name**]"};
  for (int i = 0; i < 500; ++i) {
    std::string s = cd::random_filler_sentence(rng);
    s.insert(rng.below(s.size() + 1), " " + kExtras[rng.below(kExtras.size())] + " ");
    const std::string once = cd::normalize_text(s);
    EXPECT_EQ(cd::normalize_text(once), once) << s;
  }
}

TEST(Patterns, DumpListsEveryPattern) {
  const std::string d = cd::dump_patterns();
  for (const auto& p : cd::default_patterns()) EXPECT_NE(d.find(p.name), std::string::npos);
}

TEST(Split, Basic) {
  EXPECT_EQ(sentence_texts("A b. C d!"), (std::vector<std::string>{"A b.", "C d!"}));
  EXPECT_TRUE(sentence_texts("").empty());
  EXPECT_EQ(sentence_texts("one; two? three"), (std::vector<std::string>{"one;", "two?", "three"}));
}

TEST(Split, ListItems) {
  EXPECT_EQ(sentence_texts("Plan:\n- rest\n- fluids"), (std::vector<std::string>{"Plan:", "- rest", "- fluids"}));
  EXPECT_EQ(sentence_texts("Meds\n1. aspirin daily\n2) lasix\n* diet"),
            (std::vector<std::string>{"Meds", "1. aspirin daily", "2) lasix", "* diet"}));
}

TEST(Split, AbbreviationsAndNumbers) {
  EXPECT_EQ(sentence_texts("Seen by Dr. Smith today. Take 7.5 mg b.i.d. with food."),
            (std::vector<std::string>{"Seen by Dr. Smith today.", "Take 7.5 mg b.i.d. with food."}));
  const auto custom = cd::Abbreviations::parse("# comment\nabd.\n");
  EXPECT_EQ(cd::split_sentences("soft abd. nontender.", {}, custom).size(), 1u);
  EXPECT_EQ(cd::split_sentences("soft abd. nontender.").size(), 2u);
}

TEST(Split, SpansTileTheInput) {
  const std::string text = "  First one.  Second\n\n- item a\n2. item b; tail  ";
  const auto s = cd::split_sentences(text, "n1");
  std::size_t prev_end = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(s[i].index_in_note, i);
    EXPECT_EQ(s[i].note_id, "n1");
    EXPECT_LE(prev_end, s[i].start);
    for (std::size_t j = prev_end; j < s[i].start; ++j) EXPECT_TRUE(std::isspace(static_cast<unsigned char>(text[j])));
    EXPECT_EQ(s[i].normalized, cd::collapse_whitespace(text.substr(s[i].start, s[i].end - s[i].start)));
    prev_end = s[i].end;
  }
  for (std::size_t j = prev_end; j < text.size(); ++j) EXPECT_TRUE(std::isspace(static_cast<unsigned char>(text[j])));
}

TEST(Split, RecoversCountOfConcatenatedSentences) {
  cd::detail::SynthRng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = 1 + rng.below(20);
    std::string text;
    for (std::uint64_t i = 0; i < n; ++i) {
      if (i) text += rng.chance(0.3) ? "\n" : " ";
      text += cd::random_filler_sentence(rng);
    }
    EXPECT_EQ(cd::split_sentences(text).size(), n) << text;
  }
}

TEST(Tokenize, Basic) {
  EXPECT_EQ(texts(cd::tokenize("bp 120/80 at [TIME] .")),
            (std::vector<std::string>{"bp", "120/80", "at", "[TIME]", "."}));
  EXPECT_TRUE(cd::tokenize("").empty());
  EXPECT_EQ(texts(cd::tokenize("5mg q.d. (7.5), done!")),
            (std::vector<std::string>{"5mg", "q.d.", "(", "7.5", ")", ",", "done", "!"}));
}

TEST(Tokenize, Placeholders) {
  const auto t = cd::tokenize("seen on[DATE] by [**Doctor Name 12**].");
  ASSERT_EQ(t.size(), 6u);
  EXPECT_EQ(t[2].text, "[DATE]");
  EXPECT_TRUE(t[2].is_special);
  EXPECT_EQ(t[4].text, "[**Doctor Name 12**]");
  EXPECT_TRUE(t[4].is_special);
  EXPECT_FALSE(t[5].is_special);
  EXPECT_FALSE(cd::tokenize("[not special]")[1].is_special);
}

TEST(Tokenize, RetokenizationIsAFixpoint) {
  cd::detail::SynthRng rng(23);
  static const std::vector<std::string> kBits = {"q.d.", "(bp 120/80),", "[DATE]", "7.5mg", "...", "\"quoted\"",
                                                 "Dr.", "e.g.", "[**Name**]", "x-ray", "50%", "b.i.d.,"};
  for (int i = 0; i < 200; ++i) {
    std::string s = cd::random_filler_sentence(rng);
    s.insert(0, kBits[rng.below(kBits.size())] + " ");
    s += " " + kBits[rng.below(kBits.size())];
    const auto first = cd::tokenize(s);
    std::string joined;
    for (const auto& t : first) {
      EXPECT_FALSE(t.text.empty());
      joined += (joined.empty() ? "" : " ") + t.text;
    }
    EXPECT_EQ(cd::tokenize(joined), first) << s;
  }
}

TEST(CountWords, Examples) {
  cd::Corpus empty;
  const auto e = cd::count_words(empty);
  EXPECT_EQ(e.total_words, 0u);
  EXPECT_EQ(e.total_sentences, 0u);
  cd::Corpus one;
  one.notes.push_back({"a", "p", std::nullopt, std::nullopt, "a b. c.", cd::json::object()});
  const auto c = cd::count_words(one);
  EXPECT_EQ(c.total_words, 3u);
  EXPECT_EQ(c.total_sentences, 2u);
  EXPECT_EQ(cd::count_sentence_words("seen [DATE] at [TIME] .", cd::Abbreviations::defaults()), 4u);
}

TEST(CountWords, MatchesSequentialRecount) {
  cd::SyntheticProfile p;
  p.n_patients = 10;
  auto s = cd::generate_synthetic_corpus(p, 8);
  ASSERT_EQ(s.corpus.notes.size(), 100u);
  const auto par = cd::count_words(s.corpus, 4);
  std::size_t words = 0, sentences = 0;
  for (const auto& n : s.corpus.notes) {
    // Independent recount: whitespace units, minus units made only of
    // punctuation, where trailing '.' is never part of a filler word.
    std::size_t nw = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= n.text.size(); ++i) {
      if (i == n.text.size() || std::isspace(static_cast<unsigned char>(n.text[i]))) {
        if (i > start) ++nw;
        start = i + 1;
      }
    }
    std::size_t ns = 0;
    for (std::size_t i = 0; i < n.text.size(); ++i) {
      if (n.text[i] == '.' && (i + 1 == n.text.size() || std::isspace(static_cast<unsigned char>(n.text[i + 1])))) ++ns;
    }
    EXPECT_EQ(par.per_note.at(n.note_id).words, nw) << n.note_id;
    EXPECT_EQ(par.per_note.at(n.note_id).sentences, ns) << n.note_id;
    words += nw;
    sentences += ns;
  }
  EXPECT_EQ(par.total_words, words);
  EXPECT_EQ(par.total_sentences, sentences);
}

TEST(CountWords, PermutationInvariant) {
  auto s = cd::generate_synthetic_corpus({}, 2);
  const auto a = cd::count_words(s.corpus);
  std::mt19937_64 rng(1);
  std::shuffle(s.corpus.notes.begin(), s.corpus.notes.end(), rng);
  const auto b = cd::count_words(s.corpus, 3);
  EXPECT_EQ(a.total_words, b.total_words);
  EXPECT_EQ(a.total_sentences, b.total_sentences);
  EXPECT_EQ(a.per_note, b.per_note);
}

TEST(Abbreviations, CaseInsensitiveAndDottedRuns) {
  const auto& a = cd::Abbreviations::defaults();
  EXPECT_TRUE(a.contains("DR."));
  EXPECT_TRUE(a.contains("q.i.d."));
  EXPECT_TRUE(a.contains("x.y.z."));
  EXPECT_FALSE(a.contains("today."));
}

}  // namespace
