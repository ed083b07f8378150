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

#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cbias/error.h"
#include "cbias/text.h"

namespace cbias {

using TokenId = std::int32_t;

struct SpecialTokens {
  TokenId bos = 0;
  TokenId eos = 1;
  TokenId separator = 2;
};

// Subword inventory. Ids are dense 0..size()-1 and surfaces are unique.
// The separator token always renders as a single space, whatever surface
// the vocabulary file gives it.
class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> surfaces, SpecialTokens specials)
      : surfaces_(std::move(surfaces)), specials_(specials) {
    const auto n = static_cast<TokenId>(surfaces_.size());
    for (TokenId id : {specials_.bos, specials_.eos, specials_.separator}) {
      if (id < 0 || id >= n) {
        throw Error(ErrorCode::kInvalidArgument,
                    "special token id " + std::to_string(id) +
                        " outside vocabulary of size " + std::to_string(n));
      }
    }
    if (specials_.bos == specials_.eos || specials_.bos == specials_.separator ||
        specials_.eos == specials_.separator) {
      throw Error(ErrorCode::kInvalidArgument, "special token ids must differ");
    }
    for (TokenId id = 0; id < n; ++id) {
      const std::string& s = surfaces_[id];
      if (s.empty()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "empty surface for token " + std::to_string(id));
      }
      if (!by_surface_.emplace(s, id).second) {
        throw Error(ErrorCode::kInvalidArgument, "duplicate surface '" + s + "'");
      }
      if (!IsSpecial(id) && s.size() > max_surface_length_) {
        max_surface_length_ = s.size();
      }
    }
  }

  // a-z, 0-9 and the apostrophe, preceded by <s>, </s> and the separator.
  // Covers every character CleanPhrase can emit, so tokenization is total.
  static Vocabulary Characters() {
    std::vector<std::string> surfaces = {"<s>", "</s>", "<sp>"};
    for (char c = 'a'; c <= 'z'; ++c) surfaces.emplace_back(1, c);
    for (char c = '0'; c <= '9'; ++c) surfaces.emplace_back(1, c);
    surfaces.emplace_back("'");
    return Vocabulary(std::move(surfaces), SpecialTokens{0, 1, 2});
  }

  std::size_t size() const { return surfaces_.size(); }
  const SpecialTokens& specials() const { return specials_; }
  TokenId bos() const { return specials_.bos; }
  TokenId eos() const { return specials_.eos; }
  TokenId separator() const { return specials_.separator; }
  bool IsSpecial(TokenId id) const {
    return id == specials_.bos || id == specials_.eos ||
           id == specials_.separator;
  }
  bool Contains(TokenId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < surfaces_.size();
  }

  const std::string& Surface(TokenId id) const { return surfaces_.at(id); }
  const std::vector<std::string>& surfaces() const { return surfaces_; }

  // Only ordinary (non-special) tokens are returned.
  std::optional<TokenId> Find(std::string_view surface) const {
    auto it = by_surface_.find(std::string(surface));
    if (it == by_surface_.end() || IsSpecial(it->second)) return std::nullopt;
    return it->second;
  }

  std::size_t max_surface_length() const { return max_surface_length_; }

 private:
  std::vector<std::string> surfaces_;
  SpecialTokens specials_;
  std::unordered_map<std::string, TokenId> by_surface_;
  std::size_t max_surface_length_ = 0;
};

// Vocabulary file: a header line `bos=<id> eos=<id> sep=<id>`, then one
// `<id>\t<surface>` line per token with ids dense from 0.
inline Vocabulary ReadVocabulary(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<SpecialTokens> specials;
  std::vector<std::string> surfaces;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = StripCarriageReturn(line);
    if (view.empty()) continue;
    if (!specials) {
      SpecialTokens s;
      int seen = 0;
      for (const std::string& field : SplitWords(view)) {
        auto eq = field.find('=');
        if (eq == std::string::npos) break;
        std::string key = field.substr(0, eq);
        TokenId value = 0;
        try {
          value = static_cast<TokenId>(std::stoi(field.substr(eq + 1)));
        } catch (const std::exception&) {
          throw Error(ErrorCode::kParseError, "bad special id '" + field + "'",
                      line_no);
        }
        if (key == "bos") {
          s.bos = value;
        } else if (key == "eos") {
          s.eos = value;
        } else if (key == "sep") {
          s.separator = value;
        } else {
          break;
        }
        ++seen;
      }
      if (seen != 3) {
        throw Error(ErrorCode::kParseError,
                    "expected header 'bos=<id> eos=<id> sep=<id>'", line_no);
      }
      specials = s;
      continue;
    }
    auto tab = view.find('\t');
    if (tab == std::string_view::npos) {
      throw Error(ErrorCode::kParseError, "expected '<id>\\t<surface>'", line_no);
    }
    long id = -1;
    try {
      std::size_t used = 0;
      id = std::stol(std::string(view.substr(0, tab)), &used);
      if (used != tab) id = -1;
    } catch (const std::exception&) {
      id = -1;
    }
    if (id != static_cast<long>(surfaces.size())) {
      throw Error(ErrorCode::kParseError,
                  "token ids must be dense from 0; expected " +
                      std::to_string(surfaces.size()),
                  line_no);
    }
    surfaces.emplace_back(view.substr(tab + 1));
  }
  if (!specials) {
    throw Error(ErrorCode::kParseError, "vocabulary file has no header line");
  }
  try {
    return Vocabulary(std::move(surfaces), *specials);
  } catch (const Error& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
}

inline Vocabulary ReadVocabularyFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open vocabulary " + path);
  return ReadVocabulary(in);
}

inline void WriteVocabulary(const Vocabulary& vocab, std::ostream& out) {
  out << "bos=" << vocab.bos() << " eos=" << vocab.eos()
      << " sep=" << vocab.separator() << '\n';
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out << i << '\t' << vocab.surfaces()[i] << '\n';
  }
}

}  // namespace cbias
