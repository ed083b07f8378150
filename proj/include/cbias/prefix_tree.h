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
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cbias/error.h"
#include "cbias/lexicon.h"
#include "cbias/vocabulary.h"

namespace cbias {

using NodeIndex = std::uint32_t;
using PhraseId = std::uint32_t;

// Position of one hypothesis inside the tree.
struct TreeCursor {
  NodeIndex node = 0;
  std::uint32_t depth = 0;

  bool operator==(const TreeCursor&) const = default;
};

struct AdvanceResult {
  TreeCursor cursor;
  // True when the cursor had to return to the root, either because the
  // token left the tree or because the previous node was a childless leaf.
  bool reset = false;
};

struct TreeEdge {
  TokenId token;
  NodeIndex child;

  bool operator==(const TreeEdge&) const = default;
};

// Immutable trie over token sequences. Nodes are numbered in depth-first
// preorder with children visited in ascending token order; the root is 0.
// Each node owns a contiguous, token-sorted run of the edge table.
class PrefixTree {
 public:
  static constexpr std::int64_t kNoPhrase = -1;

  // Builds from raw token sequences; phrase ids are positions in `seqs`.
  // A repeated sequence keeps the id of its first occurrence.
  static PrefixTree Build(std::span<const std::vector<TokenId>> seqs) {
    if (seqs.empty()) throw Error(ErrorCode::kEmptyLexicon, "no phrases");
    struct Scratch {
      std::map<TokenId, std::size_t> children;
      std::int64_t phrase = kNoPhrase;
    };
    std::vector<Scratch> scratch(1);
    for (std::size_t id = 0; id < seqs.size(); ++id) {
      if (seqs[id].empty()) {
        throw Error(ErrorCode::kEmptyLexicon,
                    "phrase " + std::to_string(id) + " has no tokens");
      }
      std::size_t node = 0;
      for (TokenId t : seqs[id]) {
        auto it = scratch[node].children.find(t);
        if (it == scratch[node].children.end()) {
          scratch.emplace_back();
          it = scratch[node].children.emplace(t, scratch.size() - 1).first;
        }
        node = it->second;
      }
      if (scratch[node].phrase == kNoPhrase) {
        scratch[node].phrase = static_cast<std::int64_t>(id);
      }
    }

    // Renumber in preorder.
    PrefixTree tree;
    tree.phrase_count_ = seqs.size();
    std::vector<NodeIndex> new_index(scratch.size());
    std::vector<std::size_t> order;
    order.reserve(scratch.size());
    std::vector<std::pair<std::size_t, std::uint32_t>> stack = {{0, 0}};
    std::vector<std::uint32_t> depth_of(scratch.size());
    while (!stack.empty()) {
      auto [node, depth] = stack.back();
      stack.pop_back();
      new_index[node] = static_cast<NodeIndex>(order.size());
      depth_of[node] = depth;
      order.push_back(node);
      for (auto it = scratch[node].children.rbegin();
           it != scratch[node].children.rend(); ++it) {
        stack.emplace_back(it->second, depth + 1);
      }
    }
    tree.nodes_.reserve(order.size());
    for (std::size_t old : order) {
      Node n;
      n.edge_begin = static_cast<std::uint32_t>(tree.edges_.size());
      for (const auto& [token, child] : scratch[old].children) {
        tree.edges_.push_back({token, new_index[child]});
      }
      n.edge_end = static_cast<std::uint32_t>(tree.edges_.size());
      n.phrase = scratch[old].phrase;
      n.depth = depth_of[old];
      tree.nodes_.push_back(n);
    }
    return tree;
  }

  static PrefixTree Build(const BiasingLexicon& lexicon) {
    if (lexicon.empty()) {
      throw Error(ErrorCode::kEmptyLexicon,
                  "biasing list '" + lexicon.source_tag + "' has no phrases");
    }
    std::vector<std::vector<TokenId>> seqs;
    seqs.reserve(lexicon.size());
    for (const auto& p : lexicon.phrases) seqs.push_back(p.tokens);
    return Build(seqs);
  }

  TreeCursor Root() const { return {0, 0}; }

  bool IsValid(const TreeCursor& cursor) const {
    return cursor.node < nodes_.size() &&
           nodes_[cursor.node].depth == cursor.depth;
  }

  // Child edges of the cursor's node, sorted by token id.
  std::span<const TreeEdge> Children(const TreeCursor& cursor) const {
    CheckCursor(cursor);
    const Node& n = nodes_[cursor.node];
    return {edges_.data() + n.edge_begin, n.edge_end - n.edge_begin};
  }

  // The tokens that extend the current in-tree prefix, ascending.
  std::vector<TokenId> ValidTokens(const TreeCursor& cursor) const {
    std::vector<TokenId> out;
    for (const TreeEdge& e : Children(cursor)) out.push_back(e.token);
    return out;
  }

  AdvanceResult Advance(const TreeCursor& cursor, TokenId token) const {
    CheckCursor(cursor);
    const Node& n = nodes_[cursor.node];
    if (n.edge_begin == n.edge_end && n.phrase != kNoPhrase) {
      // Completed a leaf phrase: restart and let the token seed a new match.
      AdvanceResult seeded = Step(Root(), token);
      seeded.reset = true;
      return seeded;
    }
    return Step(cursor, token);
  }

  std::optional<PhraseId> PhraseCompleted(const TreeCursor& cursor) const {
    CheckCursor(cursor);
    std::int64_t p = nodes_[cursor.node].phrase;
    if (p == kNoPhrase) return std::nullopt;
    return static_cast<PhraseId>(p);
  }

  bool IsTerminal(const TreeCursor& cursor) const {
    return PhraseCompleted(cursor).has_value();
  }

  // Follows `path` from the root without resets; nullopt if it leaves the tree.
  std::optional<TreeCursor> Walk(std::span<const TokenId> path) const {
    TreeCursor c = Root();
    for (TokenId t : path) {
      std::optional<TreeCursor> next = Child(c, t);
      if (!next) return std::nullopt;
      c = *next;
    }
    return c;
  }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  std::size_t phrase_count() const { return phrase_count_; }

  // One line per node: `<index> <terminal 0|1> <phrase-id|-> <tok:child ...>`.
  void Dump(std::ostream& out) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      out << i << ' ' << (n.phrase != kNoPhrase ? 1 : 0) << ' ';
      if (n.phrase != kNoPhrase) {
        out << n.phrase;
      } else {
        out << '-';
      }
      for (std::uint32_t e = n.edge_begin; e < n.edge_end; ++e) {
        out << ' ' << edges_[e].token << ':' << edges_[e].child;
      }
      out << '\n';
    }
  }

  // Parses a Dump() and checks that it describes a preorder-numbered tree.
  static PrefixTree Load(std::istream& in) {
    PrefixTree tree;
    std::string line;
    std::size_t line_no = 0;
    std::int64_t max_phrase = -1;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view view = StripCarriageReturn(line);
      if (view.empty() || view.front() == '#') continue;
      std::istringstream fields{std::string(view)};
      std::size_t index = 0;
      int terminal = -1;
      std::string phrase;
      if (!(fields >> index >> terminal >> phrase) ||
          index != tree.nodes_.size() || (terminal != 0 && terminal != 1) ||
          ((phrase == "-") != (terminal == 0))) {
        throw Error(ErrorCode::kParseError, "malformed tree node line", line_no);
      }
      Node n;
      if (terminal == 1) {
        try {
          n.phrase = std::stoll(phrase);
        } catch (const std::exception&) {
          throw Error(ErrorCode::kParseError, "bad phrase id", line_no);
        }
        if (n.phrase < 0) {
          throw Error(ErrorCode::kParseError, "bad phrase id", line_no);
        }
        max_phrase = std::max(max_phrase, n.phrase);
      }
      n.edge_begin = static_cast<std::uint32_t>(tree.edges_.size());
      std::string pair;
      while (fields >> pair) {
        auto colon = pair.find(':');
        TreeEdge edge{};
        try {
          if (colon == std::string::npos) throw std::invalid_argument(pair);
          edge.token = static_cast<TokenId>(std::stol(pair.substr(0, colon)));
          edge.child = static_cast<NodeIndex>(std::stoul(pair.substr(colon + 1)));
        } catch (const std::exception&) {
          throw Error(ErrorCode::kParseError, "bad child pair '" + pair + "'",
                      line_no);
        }
        if (tree.edges_.size() > n.edge_begin &&
            tree.edges_.back().token >= edge.token) {
          throw Error(ErrorCode::kParseError, "children not sorted by token",
                      line_no);
        }
        tree.edges_.push_back(edge);
      }
      n.edge_end = static_cast<std::uint32_t>(tree.edges_.size());
      tree.nodes_.push_back(n);
    }
    if (tree.nodes_.empty()) throw Error(ErrorCode::kEmptyLexicon, "empty tree");
    // Every non-root node must be the child of exactly one earlier node.
    std::vector<int> parents(tree.nodes_.size(), 0);
    std::vector<bool> phrase_seen(static_cast<std::size_t>(max_phrase + 1));
    for (std::size_t i = 0; i < tree.nodes_.size(); ++i) {
      const Node& n = tree.nodes_[i];
      if (n.phrase != kNoPhrase) {
        if (phrase_seen[n.phrase]) {
          throw Error(ErrorCode::kParseError,
                      "phrase id " + std::to_string(n.phrase) + " repeated");
        }
        phrase_seen[n.phrase] = true;
      }
      for (std::uint32_t e = n.edge_begin; e < n.edge_end; ++e) {
        NodeIndex child = tree.edges_[e].child;
        if (child <= i || child >= tree.nodes_.size() || ++parents[child] > 1) {
          throw Error(ErrorCode::kParseError,
                      "node " + std::to_string(i) + " has an invalid child");
        }
        tree.nodes_[child].depth = n.depth + 1;
      }
    }
    for (std::size_t i = 1; i < parents.size(); ++i) {
      if (parents[i] != 1) {
        throw Error(ErrorCode::kParseError,
                    "node " + std::to_string(i) + " is unreachable");
      }
    }
    tree.phrase_count_ = static_cast<std::size_t>(max_phrase + 1);
    return tree;
  }

 private:
  struct Node {
    std::uint32_t edge_begin = 0;
    std::uint32_t edge_end = 0;
    std::int64_t phrase = kNoPhrase;
    std::uint32_t depth = 0;
  };

  void CheckCursor(const TreeCursor& cursor) const {
    if (!IsValid(cursor)) {
      throw Error(ErrorCode::kInvalidCursor,
                  "cursor (node " + std::to_string(cursor.node) + ", depth " +
                      std::to_string(cursor.depth) + ") is not in this tree");
    }
  }

  std::optional<TreeCursor> Child(const TreeCursor& cursor, TokenId token) const {
    const Node& n = nodes_[cursor.node];
    auto first = edges_.begin() + n.edge_begin;
    auto last = edges_.begin() + n.edge_end;
    auto it = std::lower_bound(
        first, last, token,
        [](const TreeEdge& e, TokenId t) { return e.token < t; });
    if (it == last || it->token != token) return std::nullopt;
    return TreeCursor{it->child, cursor.depth + 1};
  }

  AdvanceResult Step(const TreeCursor& cursor, TokenId token) const {
    if (std::optional<TreeCursor> next = Child(cursor, token)) {
      return {*next, false};
    }
    return {Root(), true};
  }

  std::vector<Node> nodes_;
  std::vector<TreeEdge> edges_;
  std::size_t phrase_count_ = 0;
};

}  // namespace cbias
