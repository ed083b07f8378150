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

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cbias/edit_distance.h"
#include "cbias/error.h"
#include "cbias/text.h"

namespace cbias {

inline std::vector<std::string> NormalizeForWer(std::string_view text) {
  return SplitWords(CleanPhrase(text));
}

struct WerBreakdown {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_words = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  double wer() const {
    return reference_words == 0 ? 0.0
                                : static_cast<double>(errors()) /
                                      static_cast<double>(reference_words);
  }
  WerBreakdown& operator+=(const WerBreakdown& o) {
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    reference_words += o.reference_words;
    return *this;
  }
};

inline WerBreakdown WordErrors(const std::vector<std::string>& ref,
                               const std::vector<std::string>& hyp) {
  if (ref.empty()) throw Error(ErrorCode::kEmptyReference, "reference has no words");
  EditCounts c = AlignCounts(std::span<const std::string>(ref),
                             std::span<const std::string>(hyp));
  return {c.substitutions, c.deletions, c.insertions, ref.size()};
}

// WER after normalization (lowercase, whitelist, whitespace split).
inline WerBreakdown ComputeWer(std::string_view reference,
                               std::string_view hypothesis) {
  return WordErrors(NormalizeForWer(reference), NormalizeForWer(hypothesis));
}

// WER over whitespace-split text with no normalization at all.
inline WerBreakdown ComputeRawWer(std::string_view reference,
                                  std::string_view hypothesis) {
  return WordErrors(SplitWords(reference), SplitWords(hypothesis));
}

// ---------------------------------------------------------------------------
// Entities

enum class EntityLabel { kAddressee, kInternal, kExternal, kLocation };

inline std::string_view EntityLabelName(EntityLabel label) {
  switch (label) {
    case EntityLabel::kAddressee: return "addressee";
    case EntityLabel::kInternal: return "internal";
    case EntityLabel::kExternal: return "external";
    case EntityLabel::kLocation: return "location";
  }
  return "?";
}

inline std::optional<EntityLabel> ParseEntityLabel(std::string_view name) {
  if (name == "addressee") return EntityLabel::kAddressee;
  if (name == "internal") return EntityLabel::kInternal;
  if (name == "external") return EntityLabel::kExternal;
  if (name == "location") return EntityLabel::kLocation;
  return std::nullopt;
}

struct GazetteerEntry {
  std::string phrase;  // normalized
  EntityLabel label;
};

struct EntityHit {
  std::string surface;
  std::string canonical;
  std::size_t begin = 0;  // word span [begin, end)
  std::size_t end = 0;
  std::size_t distance = 0;
  EntityLabel label = EntityLabel::kAddressee;

  bool operator==(const EntityHit&) const = default;
};

// One edit per five characters of the phrase, at most three.
inline std::size_t DefaultFuzzyThreshold(std::string_view phrase) {
  return std::min<std::size_t>(phrase.size() / 5, 3);
}

// Scans word n-grams (n up to the longest gazetteer phrase) and keeps those
// within `threshold` character edits of a gazetteer phrase. Overlaps are
// resolved by (lower distance, longer span, earlier start). Without an
// explicit threshold each phrase uses DefaultFuzzyThreshold.
inline std::vector<EntityHit> ExtractEntities(
    std::string_view transcript, const std::vector<GazetteerEntry>& gazetteer,
    std::optional<std::size_t> threshold = std::nullopt) {
  const std::vector<std::string> words = NormalizeForWer(transcript);
  std::size_t max_n = 0;
  for (const GazetteerEntry& g : gazetteer) {
    max_n = std::max(max_n, SplitWords(g.phrase).size());
  }
  std::vector<EntityHit> candidates;
  for (std::size_t i = 0; i < words.size(); ++i) {
    for (std::size_t n = 1; n <= max_n && i + n <= words.size(); ++n) {
      const std::string gram = JoinWords(words, i, i + n);
      for (const GazetteerEntry& g : gazetteer) {
        const std::size_t limit = threshold.value_or(DefaultFuzzyThreshold(g.phrase));
        const std::size_t len_gap = gram.size() > g.phrase.size()
                                        ? gram.size() - g.phrase.size()
                                        : g.phrase.size() - gram.size();
        if (len_gap > limit) continue;
        const std::size_t d = EditDistance(gram, g.phrase);
        if (d <= limit) candidates.push_back({gram, g.phrase, i, i + n, d, g.label});
      }
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const EntityHit& a, const EntityHit& b) {
                     if (a.distance != b.distance) return a.distance < b.distance;
                     if (a.end - a.begin != b.end - b.begin) {
                       return a.end - a.begin > b.end - b.begin;
                     }
                     return a.begin < b.begin;
                   });
  std::vector<bool> taken(words.size(), false);
  std::vector<EntityHit> hits;
  for (EntityHit& c : candidates) {
    bool free = true;
    for (std::size_t w = c.begin; w < c.end && free; ++w) free = !taken[w];
    if (!free) continue;
    for (std::size_t w = c.begin; w < c.end; ++w) taken[w] = true;
    hits.push_back(std::move(c));
  }
  std::sort(hits.begin(), hits.end(),
            [](const EntityHit& a, const EntityHit& b) { return a.begin < b.begin; });
  return hits;
}

using EntitySet = std::set<std::pair<std::string, EntityLabel>>;

inline EntitySet ToEntitySet(const std::vector<EntityHit>& hits) {
  EntitySet s;
  for (const EntityHit& h : hits) s.emplace(h.canonical, h.label);
  return s;
}

template <typename V>
void CheckSameIds(const std::map<std::string, V>& a,
                  const std::map<std::string, V>& b) {
  std::vector<std::string> missing;
  for (const auto& [id, _] : a) {
    if (!b.count(id)) missing.push_back(id);
  }
  for (const auto& [id, _] : b) {
    if (!a.count(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const std::string& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw Error(ErrorCode::kIdMismatch, "ids present on one side only: " + list);
  }
}

// Fraction of utterances whose predicted (canonical, label) set equals gold.
inline double EntityAccuracy(const std::map<std::string, EntitySet>& predicted,
                             const std::map<std::string, EntitySet>& gold) {
  CheckSameIds(predicted, gold);
  if (gold.empty()) return 1.0;
  std::size_t match = 0;
  for (const auto& [id, set] : gold) match += predicted.at(id) == set ? 1 : 0;
  return static_cast<double>(match) / static_cast<double>(gold.size());
}

// ---------------------------------------------------------------------------
// Keywords and response time

struct TranscriptSegment {
  double start = 0.0;
  double end = 0.0;
  std::string text;
};

struct KeywordHit {
  std::string keyword;
  std::size_t segment = 0;
  double timestamp = 0.0;

  bool operator==(const KeywordHit&) const = default;
};

inline void CheckSegments(const std::vector<TranscriptSegment>& segments) {
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const TranscriptSegment& s = segments[i];
    if (!(s.start >= 0.0 && s.start < s.end)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "segment " + std::to_string(i) + " has start >= end");
    }
    if (i > 0 && s.start < segments[i - 1].end) {
      throw Error(ErrorCode::kInvalidArgument,
                  "segment " + std::to_string(i) + " overlaps its predecessor");
    }
  }
}

inline bool ContainsPhrase(const std::vector<std::string>& words,
                           const std::vector<std::string>& phrase) {
  if (phrase.empty() || phrase.size() > words.size()) return false;
  for (std::size_t i = 0; i + phrase.size() <= words.size(); ++i) {
    if (std::equal(phrase.begin(), phrase.end(), words.begin() + i)) return true;
  }
  return false;
}

// First segment containing each keyword (exact after normalization); the
// timestamp is that segment's start.
inline std::vector<KeywordHit> ExtractKeywords(
    const std::vector<TranscriptSegment>& segments,
    const std::vector<std::string>& keywords) {
  CheckSegments(segments);
  std::vector<std::vector<std::string>> seg_words;
  for (const TranscriptSegment& s : segments) seg_words.push_back(NormalizeForWer(s.text));
  std::vector<KeywordHit> hits;
  for (const std::string& kw : keywords) {
    const std::vector<std::string> phrase = NormalizeForWer(kw);
    for (std::size_t i = 0; i < segments.size(); ++i) {
      if (ContainsPhrase(seg_words[i], phrase)) {
        hits.push_back({JoinWords(phrase), i, segments[i].start});
        break;
      }
    }
  }
  return hits;
}

struct KeywordTiming {
  double trigger_time = 0.0;
  std::optional<double> hit_time;

  std::optional<double> response_time() const {
    if (!hit_time) return std::nullopt;
    return *hit_time - trigger_time;
  }
};

// Mean squared difference of response times per trigger. A trigger detected
// on only one side contributes `miss_penalty` as its residual.
inline double ResponseTimeMse(const std::map<std::string, KeywordTiming>& predicted,
                              const std::map<std::string, KeywordTiming>& gold,
                              double miss_penalty = 1.0) {
  CheckSameIds(predicted, gold);
  if (gold.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [id, g] : gold) {
    const std::optional<double> gr = g.response_time();
    const std::optional<double> pr = predicted.at(id).response_time();
    double residual = 0.0;
    if (gr && pr) {
      residual = *pr - *gr;
    } else if (gr.has_value() != pr.has_value()) {
      residual = miss_penalty;
    }
    sum += residual * residual;
  }
  return sum / static_cast<double>(gold.size());
}

}  // namespace cbias
