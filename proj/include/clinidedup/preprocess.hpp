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

#ifndef CLINIDEDUP_PREPROCESS_HPP_
#define CLINIDEDUP_PREPROCESS_HPP_

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <boost/regex.hpp>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "clinidedup/corpus.hpp"
#include "clinidedup/error.hpp"
#include "clinidedup/parallel.hpp"

namespace clinidedup {

inline constexpr std::string_view kDateToken = "[DATE]";
inline constexpr std::string_view kTimeToken = "[TIME]";

// ---------------------------------------------------------------------------
// Date and time substitution patterns.

struct TextPattern {
  std::string name;
  std::string regex;        // Perl syntax
  std::string_view replacement;
};

// Applied in order; all dates before all times.
inline const std::vector<TextPattern>& default_patterns() {
  static const std::vector<TextPattern> kPatterns = {
      {"date_mdy",
       R"(\b(?:0?[1-9]|1[0-2])/(?:0?[1-9]|[12][0-9]|3[01])/(?:[0-9]{4}|[0-9]{2})\b)",
       kDateToken},
      {"date_iso", R"(\b[0-9]{4}-(?:0[1-9]|1[0-2])-(?:0[1-9]|[12][0-9]|3[01])\b)", kDateToken},
      {"date_month_name",
       R"((?i)\b(?:jan(?:uary)?|feb(?:ruary)?|mar(?:ch)?|apr(?:il)?|may|june?|july?|)"
       R"(aug(?:ust)?|sep(?:t(?:ember)?)?|oct(?:ober)?|nov(?:ember)?|dec(?:ember)?)\.? )"
       R"([0-9]{1,2}, [0-9]{4}\b)",
       kDateToken},
      {"time_clock",
       R"(\b(?:[01]?[0-9]|2[0-3]):[0-5][0-9](?::[0-5][0-9])?\b(?: ?[AaPp]\.?[Mm]\b)?)",
       kTimeToken},
      {"time_hours", R"(\b(?:[01][0-9]|2[0-3])[0-5][0-9] hours\b)", kTimeToken},
  };
  return kPatterns;
}

namespace detail {

struct CompiledPattern {
  boost::regex re;
  std::string replacement;
};

inline const std::vector<CompiledPattern>& compiled_patterns() {
  static const std::vector<CompiledPattern> kCompiled = [] {
    std::vector<CompiledPattern> out;
    for (const auto& p : default_patterns()) {
      out.push_back({boost::regex(p.regex, boost::regex::perl), std::string(p.replacement)});
    }
    return out;
  }();
  return kCompiled;
}

inline bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

// Drops C0 controls other than newline (tab becomes a space), DEL, and the
// UTF-8 encoded C1 range U+0080..U+009F. Sets `ascii` when no byte >= 0x80
// survives.
inline std::string strip_controls(std::string_view raw, bool& ascii) {
  std::string out;
  out.reserve(raw.size());
  ascii = true;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto c = static_cast<unsigned char>(raw[i]);
    if (c == '\n') {
      out.push_back('\n');
    } else if (c == '\t') {
      out.push_back(' ');
    } else if (c < 0x20 || c == 0x7F) {
      continue;
    } else if (c == 0xC2 && i + 1 < raw.size() &&
               static_cast<unsigned char>(raw[i + 1]) >= 0x80 &&
               static_cast<unsigned char>(raw[i + 1]) <= 0x9F) {
      ++i;
    } else {
      if (c >= 0x80) ascii = false;
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

inline std::string nfc(const std::string& utf8) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  icu::UnicodeString src = icu::UnicodeString::fromUTF8(utf8);
  icu::UnicodeString dst = norm->normalize(src, status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalization failed");
  std::string out;
  dst.toUTF8String(out);
  return out;
}

}  // namespace detail

/// Normalizes raw note text: removes control characters (newlines kept,
/// tabs turned into spaces), applies Unicode NFC, then replaces dates with
/// "[DATE]" and times with "[TIME]". Idempotent.
inline std::string normalize_text(std::string_view raw) {
  bool ascii = true;
  std::string text = detail::strip_controls(raw, ascii);
  if (!ascii) text = detail::nfc(text);
  for (const auto& p : detail::compiled_patterns()) {
    if (text.empty()) break;
    text = boost::regex_replace(text, p.re, p.replacement,
                                boost::match_default | boost::regex_constants::format_literal);
  }
  return text;
}

// One "name<TAB>regex<TAB>replacement" line per pattern, in application order.
inline std::string dump_patterns() {
  std::string out;
  for (const auto& p : default_patterns()) {
    out += p.name + "\t" + p.regex + "\t" + std::string(p.replacement) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Abbreviations.

inline constexpr std::string_view kDefaultAbbreviations = R"(# Tokens ending in '.' that do not end a sentence.
# One per line, matched case-insensitively.
dr.
mr.
mrs.
ms.
prof.
pt.
pts.
vs.
approx.
appt.
dept.
hosp.
e.g.
i.e.
a.c.
p.c.
h.s.
p.o.
p.r.n.
q.d.
q.h.
q.o.d.
b.i.d.
t.i.d.
q.i.d.
)";

class Abbreviations {
 public:
  Abbreviations() = default;

  // Parses one abbreviation per line; '#' starts a comment.
  static Abbreviations parse(std::string_view text) {
    Abbreviations a;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      std::string_view line = text.substr(pos, nl - pos);
      if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      while (!line.empty() && detail::is_space(static_cast<unsigned char>(line.front())))
        line.remove_prefix(1);
      while (!line.empty() && detail::is_space(static_cast<unsigned char>(line.back())))
        line.remove_suffix(1);
      if (!line.empty()) a.entries_.insert(detail::ascii_lower(line));
      pos = nl + 1;
    }
    return a;
  }

  static Abbreviations load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read abbreviation file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(text);
  }

  static const Abbreviations& defaults() {
    static const Abbreviations kDefaults = parse(kDefaultAbbreviations);
    return kDefaults;
  }

  // True for listed entries and for letter-dot runs such as "b.i.d.".
  bool contains(std::string_view token) const {
    if (token.empty() || token.back() != '.') return false;
    if (entries_.count(detail::ascii_lower(token))) return true;
    if (token.size() < 4 || token.size() % 2 != 0) return false;
    for (std::size_t i = 0; i < token.size(); i += 2) {
      if (!std::isalpha(static_cast<unsigned char>(token[i])) || token[i + 1] != '.') return false;
    }
    return true;
  }

  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_set<std::string> entries_;
};

// ---------------------------------------------------------------------------
// Sentences.

struct SentenceRecord {
  std::string note_id;
  std::size_t index_in_note = 0;
  // Byte offsets [start, end) into the note's normalized text.
  std::size_t start = 0;
  std::size_t end = 0;
  std::string normalized;

  friend bool operator==(const SentenceRecord&, const SentenceRecord&) = default;
};

// Runs of whitespace become one space; outer whitespace is trimmed.
inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char ch : s) {
    if (detail::is_space(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(ch);
    }
  }
  return out;
}

// Number of UTF-8 code points.
inline std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (char ch : s) {
    if ((static_cast<unsigned char>(ch) & 0xC0) != 0x80) ++n;
  }
  return n;
}

namespace detail {

// Length of a list marker starting at `i` ("- ", "* ", "12. ", "3) "),
// excluding the following blank, or 0.
inline std::size_t list_marker_length(std::string_view text, std::size_t i) {
  const auto followed_by_blank = [&](std::size_t j) {
    return j < text.size() && (text[j] == ' ' || text[j] == '\t');
  };
  if (i >= text.size()) return 0;
  if ((text[i] == '-' || text[i] == '*') && followed_by_blank(i + 1)) return 1;
  std::size_t j = i;
  while (j < text.size() && j - i < 3 && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
  if (j > i && j < text.size() && (text[j] == '.' || text[j] == ')') && followed_by_blank(j + 1))
    return j + 1 - i;
  return 0;
}

inline bool is_terminator(char c) { return c == '.' || c == '!' || c == '?' || c == ';'; }

// Token that ends at `end` (exclusive), with leading brackets and quotes
// removed.
inline std::string_view token_before(std::string_view text, std::size_t end) {
  std::size_t b = end;
  while (b > 0 && !is_space(static_cast<unsigned char>(text[b - 1]))) --b;
  std::string_view tok = text.substr(b, end - b);
  while (!tok.empty() && (tok.front() == '(' || tok.front() == '[' || tok.front() == '"' ||
                          tok.front() == '\'')) {
    tok.remove_prefix(1);
  }
  return tok;
}

}  // namespace detail

/// Splits normalized text into sentences.
///
/// A sentence ends at '.', '!', '?' or ';' followed by whitespace or the end
/// of the text, unless the '.' closes a known abbreviation. A line whose
/// first non-blank characters are a list marker ("-", "*", "N." or "N)"
/// followed by a blank) starts a new sentence, and the newline that ends
/// such a line ends the sentence. Spans exclude surrounding whitespace, so
/// the spans plus the whitespace between them tile the input.
inline std::vector<SentenceRecord> split_sentences(
    std::string_view text, std::string_view note_id = {},
    const Abbreviations& abbreviations = Abbreviations::defaults()) {
  std::vector<SentenceRecord> out;
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::size_t open = kNone;
  std::size_t last_nonspace = 0;  // one past the last non-space byte seen
  bool in_list_item = false;

  const auto close = [&](std::size_t end) {
    if (open == kNone) return;
    SentenceRecord rec;
    rec.note_id = std::string(note_id);
    rec.index_in_note = out.size();
    rec.start = open;
    rec.end = end;
    rec.normalized = collapse_whitespace(text.substr(open, end - open));
    out.push_back(std::move(rec));
    open = kNone;
  };

  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (i == 0 || text[i - 1] == '\n') {
      std::size_t j = i;
      while (j < n && (text[j] == ' ' || text[j] == '\t')) ++j;
      if (std::size_t m = detail::list_marker_length(text, j); m > 0) {
        close(last_nonspace);
        open = j;
        in_list_item = true;
        i = j + m;
        last_nonspace = i;
        continue;
      }
    }
    const char c = text[i];
    if (c == '\n' && in_list_item) {
      close(last_nonspace);
      in_list_item = false;
      ++i;
      continue;
    }
    if (detail::is_space(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (open == kNone) open = i;
    last_nonspace = i + 1;
    if (detail::is_terminator(c) &&
        (i + 1 == n || detail::is_space(static_cast<unsigned char>(text[i + 1])))) {
      if (c != '.' || !abbreviations.contains(detail::token_before(text, i + 1))) {
        close(i + 1);
      }
    }
    ++i;
  }
  close(last_nonspace);
  return out;
}

// ---------------------------------------------------------------------------
// Tokens.

struct Token {
  std::string text;
  bool is_special = false;

  friend bool operator==(const Token&, const Token&) = default;
};

namespace detail {

// End offset of a placeholder such as "[DATE]" or "[**Name 12**]" starting
// at `i`, or npos.
inline std::size_t placeholder_end(std::string_view s, std::size_t i) {
  if (i >= s.size() || s[i] != '[') return std::string_view::npos;
  const std::size_t close = s.find(']', i + 1);
  if (close == std::string_view::npos) return std::string_view::npos;
  std::string_view body = s.substr(i + 1, close - i - 1);
  if (body.empty() || body.size() > 64) return std::string_view::npos;
  if (body.find('[') != std::string_view::npos || body.find('\n') != std::string_view::npos)
    return std::string_view::npos;
  if (body.size() >= 4 && body.substr(0, 2) == "**" && body.substr(body.size() - 2) == "**")
    return close + 1;
  if (!std::isupper(static_cast<unsigned char>(body.front()))) return std::string_view::npos;
  for (char ch : body) {
    const auto u = static_cast<unsigned char>(ch);
    if (!(std::isupper(u) || std::isdigit(u) || ch == '_')) return std::string_view::npos;
  }
  return close + 1;
}

inline void split_unit(std::string_view unit, const Abbreviations& abbreviations,
                       std::vector<Token>& out) {
  while (!unit.empty() && is_ascii_punct(static_cast<unsigned char>(unit.front()))) {
    out.push_back({std::string(1, unit.front()), false});
    unit.remove_prefix(1);
  }
  std::vector<char> trailing;
  while (!unit.empty() && is_ascii_punct(static_cast<unsigned char>(unit.back()))) {
    if (unit.back() == '.' && abbreviations.contains(unit)) break;
    trailing.push_back(unit.back());
    unit.remove_suffix(1);
  }
  if (!unit.empty()) out.push_back({std::string(unit), false});
  for (auto it = trailing.rbegin(); it != trailing.rend(); ++it) {
    out.push_back({std::string(1, *it), false});
  }
}

}  // namespace detail

/// Word-level tokenizer. Placeholders ("[DATE]", "[TIME]", "[**...**]") are
/// single special tokens. Punctuation at either edge of a whitespace unit is
/// split off one character at a time; internal punctuation stays, so
/// "120/80", "7.5" and "5mg" are single tokens, and abbreviations such as
/// "q.d." keep their final period.
inline std::vector<Token> tokenize(std::string_view sentence,
                                   const Abbreviations& abbreviations = Abbreviations::defaults()) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = sentence.size();
  while (i < n) {
    if (detail::is_space(static_cast<unsigned char>(sentence[i]))) {
      ++i;
      continue;
    }
    if (std::size_t e = detail::placeholder_end(sentence, i); e != std::string_view::npos) {
      out.push_back({std::string(sentence.substr(i, e - i)), true});
      i = e;
      continue;
    }
    std::size_t j = i + 1;
    while (j < n && !detail::is_space(static_cast<unsigned char>(sentence[j])) &&
           detail::placeholder_end(sentence, j) == std::string_view::npos) {
      ++j;
    }
    detail::split_unit(sentence.substr(i, j - i), abbreviations, out);
    i = j;
  }
  return out;
}

// A token made only of ASCII punctuation. Placeholders are words.
inline bool is_punctuation_token(const Token& t) {
  if (t.is_special || t.text.empty()) return false;
  return std::all_of(t.text.begin(), t.text.end(),
                     [](char c) { return detail::is_ascii_punct(static_cast<unsigned char>(c)); });
}

inline std::size_t count_sentence_words(std::string_view sentence,
                                        const Abbreviations& abbreviations) {
  std::size_t words = 0;
  for (const auto& t : tokenize(sentence, abbreviations)) {
    if (!is_punctuation_token(t)) ++words;
  }
  return words;
}

struct NoteCounts {
  std::size_t words = 0;
  std::size_t sentences = 0;
  friend bool operator==(const NoteCounts&, const NoteCounts&) = default;
};

struct WordCounts {
  std::size_t total_words = 0;
  std::size_t total_sentences = 0;
  std::map<std::string, NoteCounts> per_note;
};

inline NoteCounts count_note_words(std::string_view text,
                                   const Abbreviations& abbreviations = Abbreviations::defaults()) {
  NoteCounts c;
  for (const auto& s : split_sentences(text, {}, abbreviations)) {
    ++c.sentences;
    c.words += count_sentence_words(s.normalized, abbreviations);
  }
  return c;
}

/// Word and sentence counts over a corpus whose texts are already
/// normalized. Standalone punctuation is not a word; placeholders are.
inline WordCounts count_words(const Corpus& corpus, unsigned threads = 1,
                              const Abbreviations& abbreviations = Abbreviations::defaults()) {
  std::vector<NoteCounts> per(corpus.notes.size());
  parallel_for(corpus.notes.size(), threads,
               [&](std::size_t i) { per[i] = count_note_words(corpus.notes[i].text, abbreviations); });
  WordCounts out;
  for (std::size_t i = 0; i < per.size(); ++i) {
    out.total_words += per[i].words;
    out.total_sentences += per[i].sentences;
    out.per_note[corpus.notes[i].note_id] = per[i];
  }
  return out;
}

// Returns a copy of the corpus with every text normalized.
inline Corpus normalize_corpus(const Corpus& corpus, unsigned threads = 1) {
  Corpus out = corpus;
  parallel_for(out.notes.size(), threads,
               [&](std::size_t i) { out.notes[i].text = normalize_text(corpus.notes[i].text); });
  return out;
}

}  // namespace clinidedup

#endif  // CLINIDEDUP_PREPROCESS_HPP_
