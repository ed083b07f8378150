// Copyright (c) 2026 The cbias Authors
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

// Readers for the tab-separated corpus files used by the command line.

#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cbias/decoder.h"
#include "cbias/error.h"
#include "cbias/eval.h"
#include "cbias/text.h"

namespace cbias {

struct IdText {
  std::string id;
  std::string text;
};

inline std::ifstream OpenInput(const std::string& path, std::string_view what) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIoFailure,
                "cannot open " + std::string(what) + " " + path);
  }
  return in;
}

inline double ParseSeconds(const std::string& field, std::size_t line_no) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (field.empty() || used != field.size() || !std::isfinite(x)) {
    throw Error(ErrorCode::kParseError, "bad time value '" + field + "'", line_no);
  }
  return x;
}

// `<id>\t<text>` lines in file order. A line without a tab has empty text.
inline std::vector<IdText> ReadIdTextFile(const std::string& path) {
  std::ifstream in = OpenInput(path, "corpus");
  std::vector<IdText> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = StripCarriageReturn(line);
    if (view.empty()) continue;
    auto tab = view.find('\t');
    IdText row;
    row.id = std::string(view.substr(0, tab));
    if (tab != std::string_view::npos) row.text = std::string(view.substr(tab + 1));
    if (row.id.empty() || row.id.find(' ') != std::string::npos) {
      throw Error(ErrorCode::kParseError, path + ": bad utterance id", line_no);
    }
    if (!seen.insert(row.id).second) {
      throw Error(ErrorCode::kParseError,
                  path + ": duplicate utterance id '" + row.id + "'", line_no);
    }
    out.push_back(std::move(row));
  }
  return out;
}

// `<utterance-id>\t<start>\t<end>\t<text>`; rows of one id keep file order.
inline std::map<std::string, std::vector<TranscriptSegment>> ReadSegmentFile(
    const std::string& path) {
  std::ifstream in = OpenInput(path, "segment file");
  std::map<std::string, std::vector<TranscriptSegment>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = StripCarriageReturn(line);
    if (view.empty()) continue;
    std::vector<std::string> f = SplitTabs(view);
    if (f.size() < 3 || f.size() > 4) {
      throw Error(ErrorCode::kParseError,
                  path + ": expected '<id>\\t<start>\\t<end>\\t<text>'", line_no);
    }
    TranscriptSegment seg{ParseSeconds(f[1], line_no), ParseSeconds(f[2], line_no),
                          f.size() == 4 ? f[3] : std::string()};
    out[f[0]].push_back(std::move(seg));
  }
  for (const auto& [id, segs] : out) {
    try {
      CheckSegments(segs);
    } catch (const Error& e) {
      throw Error(ErrorCode::kParseError, path + ": " + id + ": " + e.what());
    }
  }
  return out;
}

// `<phrase>\t<label>`; phrases are normalized on load.
inline std::vector<GazetteerEntry> ReadGazetteer(const std::string& path) {
  std::ifstream in = OpenInput(path, "gazetteer");
  std::vector<GazetteerEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = StripCarriageReturn(line);
    if (view.empty() || view.front() == '#') continue;
    std::vector<std::string> f = SplitTabs(view);
    std::optional<EntityLabel> label;
    if (f.size() == 2) label = ParseEntityLabel(f[1]);
    if (!label) {
      throw Error(ErrorCode::kParseError,
                  path + ": expected '<phrase>\\t<addressee|internal|external|"
                         "location>'",
                  line_no);
    }
    std::string phrase = CleanPhrase(f[0]);
    if (phrase.empty()) {
      throw Error(ErrorCode::kParseError, path + ": empty gazetteer phrase", line_no);
    }
    out.push_back({std::move(phrase), *label});
  }
  if (out.empty()) throw Error(ErrorCode::kParseError, path + ": empty gazetteer");
  return out;
}

struct Trigger {
  std::string id;
  std::string utterance_id;
  double time = 0.0;
  std::string keyword;
};

// `<trigger-id>\t<utterance-id>\t<trigger-time>\t<keyword>`.
inline std::vector<Trigger> ReadTriggers(const std::string& path) {
  std::ifstream in = OpenInput(path, "trigger file");
  std::vector<Trigger> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = StripCarriageReturn(line);
    if (view.empty()) continue;
    std::vector<std::string> f = SplitTabs(view);
    if (f.size() != 4 || f[0].empty() || f[1].empty()) {
      throw Error(ErrorCode::kParseError,
                  path + ": expected '<trigger-id>\\t<utterance-id>\\t<time>\\t"
                         "<keyword>'",
                  line_no);
    }
    if (!seen.insert(f[0]).second) {
      throw Error(ErrorCode::kParseError, path + ": duplicate trigger id", line_no);
    }
    out.push_back({f[0], f[1], ParseSeconds(f[2], line_no), f[3]});
  }
  return out;
}

// Parses a trace dump back into records.
inline DecodeTrace ReadTrace(std::istream& in, const std::string& source) {
  DecodeTrace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<std::string> f = SplitWords(line);
    if (f.empty()) continue;
    TraceRecord r;
    try {
      if (f.size() != 5 || (f[2] != "0" && f[2] != "1")) {
        throw std::invalid_argument(line);
      }
      r.step = std::stoul(f[0]);
      r.token = static_cast<TokenId>(std::stol(f[1]));
      r.fallback = f[2] == "1";
      r.valid_mass = std::stod(f[3]);
      if (f[4] != "-") r.completed = static_cast<PhraseId>(std::stoul(f[4]));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParseError, source + ": malformed trace record",
                  line_no);
    }
    trace.push_back(r);
  }
  return trace;
}

}  // namespace cbias
