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

#ifndef CLINIDEDUP_CORPUS_HPP_
#define CLINIDEDUP_CORPUS_HPP_

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "clinidedup/error.hpp"

namespace clinidedup {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// The four deduplication configurations.
enum class DedupConfig { kNone, kWN, kWNNR, kWNBN };

inline constexpr DedupConfig kAllConfigs[] = {DedupConfig::kNone, DedupConfig::kWN,
                                              DedupConfig::kWNNR, DedupConfig::kWNBN};

inline std::string_view to_string(DedupConfig c) {
  switch (c) {
    case DedupConfig::kNone: return "NONE";
    case DedupConfig::kWN: return "WN";
    case DedupConfig::kWNNR: return "WNNR";
    case DedupConfig::kWNBN: return "WNBN";
  }
  return "NONE";
}

// Accepts the upper-case tags and their lower-case CLI spellings.
inline std::optional<DedupConfig> parse_config(std::string_view s) {
  std::string up(s);
  for (auto& ch : up) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  for (DedupConfig c : kAllConfigs) {
    if (up == to_string(c)) return c;
  }
  return std::nullopt;
}

// Field name carried by notes that deduplication emptied completely.
inline constexpr std::string_view kEmptiedField = "emptied";

struct Note {
  std::string note_id;
  std::string patient_id;
  std::optional<std::string> note_type;
  // Opaque sortable string; never parsed.
  std::optional<std::string> timestamp;
  std::string text;
  // Unknown input fields, preserved on round trip (always a JSON object).
  json extras = json::object();

  bool emptied() const {
    auto it = extras.find(kEmptiedField);
    return it != extras.end() && it->is_boolean() && it->get<bool>();
  }

  friend bool operator==(const Note&, const Note&) = default;
};

// Canonical order: patient, then timestamp (missing first), then note id.
inline bool canonical_less(const Note& a, const Note& b) {
  return std::tie(a.patient_id, a.timestamp, a.note_id) <
         std::tie(b.patient_id, b.timestamp, b.note_id);
}

struct Corpus {
  std::vector<Note> notes;
  std::string source_tag;
  DedupConfig config_tag = DedupConfig::kNone;

  void canonicalize() { std::sort(notes.begin(), notes.end(), canonical_less); }
  std::size_t size() const { return notes.size(); }
  bool empty() const { return notes.empty(); }

  // Equality is over the notes; tags are run metadata and are not persisted
  // in the JSONL body.
  friend bool operator==(const Corpus& a, const Corpus& b) { return a.notes == b.notes; }
};

// Validation failure for a single record.
class ValidationError : public DataError {
 public:
  explicit ValidationError(const std::string& what) : DataError(what) {}
};

namespace detail {

inline bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  });
}

inline std::optional<std::string> optional_string_field(const json& record, const char* key,
                                                        std::vector<std::string>& problems) {
  auto it = record.find(key);
  if (it == record.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    problems.push_back(std::string(key) + " is not a string");
    return std::nullopt;
  }
  return it->get<std::string>();
}

}  // namespace detail

/// Converts one raw JSON object into a Note.
///
/// Missing required fields are reported together ("missing patient_id,
/// text"). Unknown fields are kept in Note::extras. Empty text is rejected
/// unless the record carries `"emptied": true`, which marks a note that a
/// deduplication pass cleared.
inline Note validate_note(const json& record) {
  if (!record.is_object()) throw ValidationError("record is not a JSON object");
  std::vector<std::string> missing;
  for (const char* key : {"note_id", "patient_id", "text"}) {
    auto it = record.find(key);
    if (it == record.end() || it->is_null()) missing.emplace_back(key);
  }
  if (!missing.empty()) {
    std::string msg = "missing ";
    for (std::size_t i = 0; i < missing.size(); ++i) {
      if (i) msg += ", ";
      msg += missing[i];
    }
    throw ValidationError(msg);
  }
  std::vector<std::string> problems;
  Note note;
  for (const char* key : {"note_id", "patient_id", "text"}) {
    if (!record.at(key).is_string()) problems.push_back(std::string(key) + " is not a string");
  }
  if (!problems.empty()) throw ValidationError(problems.front());
  note.note_id = record.at("note_id").get<std::string>();
  note.patient_id = record.at("patient_id").get<std::string>();
  note.text = record.at("text").get<std::string>();
  note.note_type = detail::optional_string_field(record, "note_type", problems);
  note.timestamp = detail::optional_string_field(record, "timestamp", problems);
  if (!problems.empty()) throw ValidationError(problems.front());
  if (note.note_id.empty()) throw ValidationError("empty note_id");
  if (note.patient_id.empty()) throw ValidationError("empty patient_id");
  for (auto it = record.begin(); it != record.end(); ++it) {
    const auto& k = it.key();
    if (k == "note_id" || k == "patient_id" || k == "text" || k == "note_type" ||
        k == "timestamp") {
      continue;
    }
    note.extras[k] = it.value();
  }
  if (detail::is_blank(note.text) && !note.emptied()) throw ValidationError("empty text");
  return note;
}

struct LineError {
  std::size_t line_no = 0;  // 1-based
  std::string reason;
};

struct LoadOptions {
  // Skip malformed lines (recording them) instead of failing.
  bool lenient = false;
  std::string source_tag;
};

struct LoadResult {
  Corpus corpus;
  std::vector<LineError> errors;
};

inline std::string format_line_errors(const std::vector<LineError>& errors) {
  std::string out;
  for (const auto& e : errors) {
    if (!out.empty()) out += "; ";
    out += "line " + std::to_string(e.line_no) + ": " + e.reason;
  }
  return out;
}

/// Parses a JSONL note stream. Blank lines are ignored. Duplicate note ids
/// are always fatal; malformed lines are fatal unless `opts.lenient`.
inline LoadResult parse_corpus(std::istream& in, const LoadOptions& opts = {}) {
  LoadResult result;
  result.corpus.source_tag = opts.source_tag;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::is_blank(line)) continue;
    try {
      json record = json::parse(line);
      result.corpus.notes.push_back(validate_note(record));
    } catch (const json::exception& e) {
      result.errors.push_back({line_no, std::string("invalid JSON: ") + e.what()});
    } catch (const ValidationError& e) {
      result.errors.push_back({line_no, e.what()});
    }
  }
  if (!result.errors.empty() && !opts.lenient) {
    throw DataError("malformed corpus input: " + format_line_errors(result.errors));
  }
  std::set<std::string> seen;
  std::set<std::string> dups;
  for (const auto& n : result.corpus.notes) {
    if (!seen.insert(n.note_id).second) dups.insert(n.note_id);
  }
  if (!dups.empty()) {
    std::string ids;
    for (const auto& id : dups) ids += (ids.empty() ? "" : ", ") + id;
    throw DataError("duplicate note_id: " + ids);
  }
  result.corpus.canonicalize();
  return result;
}

inline LoadResult load_corpus(const std::string& path, LoadOptions opts = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read corpus file: " + path);
  return parse_corpus(in, opts);
}

// Serialised form of one note: fixed key order, extras last in key order.
inline std::string note_to_jsonl(const Note& n) {
  ordered_json o;
  o["note_id"] = n.note_id;
  o["patient_id"] = n.patient_id;
  o["note_type"] = n.note_type ? ordered_json(*n.note_type) : ordered_json(nullptr);
  o["timestamp"] = n.timestamp ? ordered_json(*n.timestamp) : ordered_json(nullptr);
  o["text"] = n.text;
  for (auto it = n.extras.begin(); it != n.extras.end(); ++it) {
    o[it.key()] = ordered_json::parse(it.value().dump());
  }
  return o.dump();
}

inline void write_corpus(const Corpus& corpus, std::ostream& out) {
  std::vector<const Note*> order;
  order.reserve(corpus.notes.size());
  for (const auto& n : corpus.notes) order.push_back(&n);
  std::stable_sort(order.begin(), order.end(),
                   [](const Note* a, const Note* b) { return canonical_less(*a, *b); });
  for (const Note* n : order) out << note_to_jsonl(*n) << '\n';
}

inline void write_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write corpus file: " + path);
  write_corpus(corpus, out);
  out.flush();
  if (!out) throw DataError("I/O error while writing: " + path);
}

inline void write_line_errors(const std::vector<LineError>& errors, std::ostream& out) {
  for (const auto& e : errors) {
    ordered_json o;
    o["line_no"] = e.line_no;
    o["reason"] = e.reason;
    out << o.dump() << '\n';
  }
}


}  // namespace clinidedup

#endif  // CLINIDEDUP_CORPUS_HPP_
