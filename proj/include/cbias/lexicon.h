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

#include <fstream>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "cbias/error.h"
#include "cbias/text.h"
#include "cbias/vocabulary.h"

namespace cbias {

// Greedy longest-match segmentation of a normalized phrase. Words are
// segmented independently and joined with the separator token.
inline std::vector<TokenId> TokenizePhrase(std::string_view phrase,
                                           const Vocabulary& vocab) {
  std::vector<TokenId> out;
  const std::size_t max_len = vocab.max_surface_length();
  bool first_word = true;
  for (const std::string& word : SplitWords(phrase)) {
    if (!first_word) out.push_back(vocab.separator());
    first_word = false;
    std::size_t pos = 0;
    while (pos < word.size()) {
      std::size_t len = std::min(max_len, word.size() - pos);
      std::optional<TokenId> hit;
      for (; len > 0; --len) {
        hit = vocab.Find(std::string_view(word).substr(pos, len));
        if (hit) break;
      }
      if (!hit) {
        throw Error(ErrorCode::kUntokenizablePhrase,
                    "no token covers '" + word.substr(pos, 1) + "' in '" +
                        std::string(phrase) + "'");
      }
      out.push_back(*hit);
      pos += len;
    }
  }
  return out;
}

// Inverse of TokenizePhrase. Begin/end-of-sequence tokens are skipped.
inline std::string Detokenize(std::span<const TokenId> tokens,
                              const Vocabulary& vocab) {
  std::string out;
  for (TokenId t : tokens) {
    if (t == vocab.bos() || t == vocab.eos()) continue;
    if (t == vocab.separator()) {
      out.push_back(' ');
    } else {
      out += vocab.Surface(t);
    }
  }
  return out;
}

struct LexiconPhrase {
  std::string raw;
  std::string normalized;
  std::vector<TokenId> tokens;

  bool operator==(const LexiconPhrase&) const = default;
};

struct BiasingLexicon {
  std::vector<LexiconPhrase> phrases;
  std::string source_tag;
  // Non-blank lines that cleaned to nothing.
  std::size_t dropped = 0;
  // Lines whose normalized form was already present.
  std::size_t duplicates = 0;

  std::size_t size() const { return phrases.size(); }
  bool empty() const { return phrases.empty(); }
};

// One phrase per line; `#` lines are comments and blank lines are ignored.
inline BiasingLexicon LoadBiasingList(std::istream& in, const Vocabulary& vocab,
                                      std::string source_tag = "stream") {
  BiasingLexicon lexicon;
  lexicon.source_tag = std::move(source_tag);
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = StripCarriageReturn(line);
    if (!view.empty() && view.front() == '#') continue;
    if (SplitWords(view).empty()) continue;
    std::string normalized = CleanPhrase(view);
    if (normalized.empty()) {
      ++lexicon.dropped;
      continue;
    }
    if (!seen.insert(normalized).second) {
      ++lexicon.duplicates;
      continue;
    }
    std::vector<TokenId> tokens;
    try {
      tokens = TokenizePhrase(normalized, vocab);
    } catch (const Error& e) {
      throw Error(e.code(), e.message(), line_no);
    }
    lexicon.phrases.push_back(
        {std::string(view), std::move(normalized), std::move(tokens)});
  }
  if (in.bad()) {
    throw Error(ErrorCode::kIoFailure, "read error on " + lexicon.source_tag);
  }
  return lexicon;
}

inline BiasingLexicon LoadBiasingListFile(const std::string& path,
                                          const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open biasing list " + path);
  return LoadBiasingList(in, vocab, path);
}

}  // namespace cbias
