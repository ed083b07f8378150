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

#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cbias/decoder.h"
#include "cbias/error.h"

namespace cbias {

// Everything a run can be configured with through `key = value` lines.
struct RunConfig {
  DecodeConfig decode;
  std::optional<std::size_t> fuzzy_threshold;  // nullopt: per-phrase default
  double miss_penalty = 1.0;
  int toy_order = 3;
  double toy_alpha = 0.01;
  double channel_confidence = 0.9;

  void Set(std::string_view key, std::string_view value) {
    const std::string k(key);
    const std::string v(value);
    auto number = [&]() {
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(v, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != v.size() || v.empty()) {
        throw Error(ErrorCode::kParseError,
                    "config key '" + k + "' expects a number, got '" + v + "'");
      }
      return x;
    };
    auto integer = [&]() {
      double x = number();
      if (x != static_cast<double>(static_cast<long long>(x))) {
        throw Error(ErrorCode::kParseError,
                    "config key '" + k + "' expects an integer, got '" + v + "'");
      }
      return static_cast<long long>(x);
    };
    if (k == "threshold") {
      decode.threshold = number();
    } else if (k == "generation-mode") {
      if (v == "fixed") {
        decode.mode = GenerationMode::kFixed;
      } else if (v == "mass-coupled") {
        decode.mode = GenerationMode::kMassCoupled;
      } else {
        throw Error(ErrorCode::kParseError,
                    "generation-mode must be 'fixed' or 'mass-coupled'");
      }
    } else if (k == "g") {
      decode.generation_prob = number();
    } else if (k == "beam-width") {
      decode.beam_width = static_cast<int>(integer());
    } else if (k == "max-steps") {
      decode.max_steps = static_cast<int>(integer());
    } else if (k == "epsilon") {
      decode.epsilon = number();
    } else if (k == "phrase-boundaries") {
      if (v != "0" && v != "1") {
        throw Error(ErrorCode::kParseError, "phrase-boundaries must be 0 or 1");
      }
      decode.phrase_boundaries = v == "1";
    } else if (k == "word-anchored") {
      if (v != "0" && v != "1") {
        throw Error(ErrorCode::kParseError, "word-anchored must be 0 or 1");
      }
      decode.word_anchored = v == "1";
    } else if (k == "fuzzy-threshold") {
      if (v == "auto") {
        fuzzy_threshold.reset();
      } else {
        long long t = integer();
        if (t < 0) throw Error(ErrorCode::kParseError, "fuzzy-threshold must be >= 0");
        fuzzy_threshold = static_cast<std::size_t>(t);
      }
    } else if (k == "miss-penalty") {
      miss_penalty = number();
    } else if (k == "toy-order") {
      toy_order = static_cast<int>(integer());
    } else if (k == "toy-alpha") {
      toy_alpha = number();
    } else if (k == "channel-confidence") {
      channel_confidence = number();
    } else {
      throw Error(ErrorCode::kParseError, "unknown config key '" + k + "'");
    }
  }

  // Accepts `key = value` (or `key=value`); throws ParseError otherwise.
  void SetAssignment(std::string_view line) {
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kParseError,
                  "expected 'key = value', got '" + std::string(line) + "'");
    }
    Set(Trim(line.substr(0, eq)), Trim(line.substr(eq + 1)));
  }

  void Read(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view view = Trim(line);
      if (view.empty() || view.front() == '#') continue;
      try {
        SetAssignment(view);
      } catch (const Error& e) {
        throw Error(ErrorCode::kParseError, e.what(), line_no);
      }
    }
  }

  void ReadFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIoFailure, "cannot open config " + path);
    Read(in);
  }

  // Canonical snapshot, one `key = value` per entry in a fixed order.
  std::vector<std::pair<std::string, std::string>> Snapshot() const {
    // Shortest text that parses back to the same double.
    auto num = [](double x) {
      char buf[40];
      auto res = std::to_chars(buf, buf + sizeof(buf), x);
      return std::string(buf, res.ptr);
    };
    return {
        {"threshold", num(decode.threshold)},
        {"generation-mode",
         decode.mode == GenerationMode::kFixed ? "fixed" : "mass-coupled"},
        {"g", num(decode.generation_prob)},
        {"beam-width", std::to_string(decode.beam_width)},
        {"max-steps", std::to_string(decode.max_steps)},
        {"epsilon", num(decode.epsilon)},
        {"phrase-boundaries", decode.phrase_boundaries ? "1" : "0"},
        {"word-anchored", decode.word_anchored ? "1" : "0"},
        {"fuzzy-threshold",
         fuzzy_threshold ? std::to_string(*fuzzy_threshold) : "auto"},
        {"miss-penalty", num(miss_penalty)},
        {"toy-order", std::to_string(toy_order)},
        {"toy-alpha", num(toy_alpha)},
        {"channel-confidence", num(channel_confidence)},
    };
  }

 private:
  static std::string_view Trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
      s.remove_suffix(1);
    }
    return s;
  }
};

}  // namespace cbias
