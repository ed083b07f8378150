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
#include <cstddef>
#include <span>
#include <string_view>
#include <tuple>
#include <vector>

namespace cbias {

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;

  std::size_t total() const { return substitutions + deletions + insertions; }
  bool operator==(const EditCounts&) const = default;
};

// Unit-cost alignment of `hyp` against `ref`. Among minimum-cost alignments
// the one with fewest substitutions, then fewest insertions, is reported.
template <typename T>
EditCounts AlignCounts(std::span<const T> ref, std::span<const T> hyp) {
  // (cost, substitutions, insertions) compared lexicographically.
  using Cell = std::tuple<std::size_t, std::size_t, std::size_t>;
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<Cell> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = {j, 0, j};
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = {i, 0, 0};
    for (std::size_t j = 1; j <= m; ++j) {
      const bool same = ref[i - 1] == hyp[j - 1];
      auto [dc, ds, di] = prev[j - 1];
      Cell diag{dc + (same ? 0 : 1), ds + (same ? 0 : 1), di};
      auto [uc, us, ui] = prev[j];
      Cell del{uc + 1, us, ui};
      auto [lc, ls, li] = cur[j - 1];
      Cell ins{lc + 1, ls, li + 1};
      cur[j] = std::min({diag, del, ins});
    }
    std::swap(prev, cur);
  }
  auto [cost, subs, ins] = prev[m];
  return {subs, cost - subs - ins, ins};
}

template <typename T>
std::size_t EditDistance(std::span<const T> a, std::span<const T> b) {
  return AlignCounts(a, b).total();
}

inline std::size_t EditDistance(std::string_view a, std::string_view b) {
  return AlignCounts(std::span<const char>(a.data(), a.size()),
                     std::span<const char>(b.data(), b.size()))
      .total();
}

}  // namespace cbias
