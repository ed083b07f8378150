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

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cbias/error.h"
#include "cbias/vocabulary.h"

namespace cbias {

struct ScorerCapabilities {
  bool supports_reset = false;
  bool supports_batch = false;
};

// What a scorer is told about the utterance it is about to score. Real
// model peers only need the id; synthetic scorers read the observation.
struct UtteranceInput {
  std::string id;
  std::vector<TokenId> observation;
};

// The base model seen from the decoder: token context in, next-token
// log-probabilities out. One instance serves one utterance at a time.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual ScorerCapabilities capabilities() const { return {}; }

  virtual void BeginUtterance(const UtteranceInput& /*utterance*/) {}
  virtual void EndUtterance() {}

  // Length vocab_size(); exp of the entries sums to 1.
  virtual std::vector<double> ScoreNext(std::span<const TokenId> context) = 0;
};

// Add-alpha smoothed n-gram model (order 1..3) with backoff to the longest
// context suffix that was seen in training. No padding: an empty context
// uses the unigram row.
class ToyScorer : public Scorer {
 public:
  static ToyScorer Uniform(std::size_t vocab_size) {
    ToyScorer s;
    s.vocab_size_ = vocab_size;
    s.order_ = 1;
    s.uniform_ = true;
    return s;
  }

  static ToyScorer Train(std::span<const std::vector<TokenId>> corpus,
                         int order, double alpha, std::size_t vocab_size) {
    if (order < 1 || order > 3) {
      throw Error(ErrorCode::kInvalidArgument, "toy scorer order must be 1..3");
    }
    if (!(alpha > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "smoothing alpha must be > 0");
    }
    if (vocab_size == 0) {
      throw Error(ErrorCode::kInvalidArgument, "vocabulary is empty");
    }
    ToyScorer s;
    s.vocab_size_ = vocab_size;
    s.order_ = order;
    s.alpha_ = alpha;
    std::size_t total = 0;
    for (const auto& seq : corpus) {
      for (std::size_t i = 0; i < seq.size(); ++i) {
        TokenId t = seq[i];
        if (t < 0 || static_cast<std::size_t>(t) >= vocab_size) {
          throw Error(ErrorCode::kInvalidArgument,
                      "corpus token " + std::to_string(t) + " out of range");
        }
        for (std::size_t k = 0; k < static_cast<std::size_t>(order) && k <= i;
             ++k) {
          std::vector<TokenId> ctx(seq.begin() + (i - k), seq.begin() + i);
          Row& row = s.rows_[ctx];
          if (row.counts.empty()) row.counts.assign(vocab_size, 0);
          ++row.counts[t];
          ++row.total;
        }
        ++total;
      }
    }
    if (total == 0) throw Error(ErrorCode::kEmptyCorpus, "no training tokens");
    return s;
  }

  std::size_t vocab_size() const override { return vocab_size_; }
  int order() const { return order_; }
  double alpha() const { return alpha_; }

  std::vector<double> Probabilities(std::span<const TokenId> context) const {
    for (TokenId t : context) {
      if (t < 0 || static_cast<std::size_t>(t) >= vocab_size_) {
        throw Error(ErrorCode::kInvalidArgument,
                    "context token " + std::to_string(t) + " out of range");
      }
    }
    const double v = static_cast<double>(vocab_size_);
    if (uniform_) return std::vector<double>(vocab_size_, 1.0 / v);
    std::size_t k = std::min<std::size_t>(order_ - 1, context.size());
    for (;; --k) {
      std::vector<TokenId> ctx(context.end() - k, context.end());
      auto it = rows_.find(ctx);
      if (it != rows_.end()) {
        const Row& row = it->second;
        std::vector<double> p(vocab_size_);
        const double denom = static_cast<double>(row.total) + alpha_ * v;
        for (std::size_t i = 0; i < vocab_size_; ++i) {
          p[i] = (static_cast<double>(row.counts[i]) + alpha_) / denom;
        }
        return p;
      }
      if (k == 0) break;
    }
    return std::vector<double>(vocab_size_, 1.0 / v);
  }

  std::vector<double> ScoreNext(std::span<const TokenId> context) override {
    std::vector<double> p = Probabilities(context);
    for (double& x : p) x = std::log(x);
    return p;
  }

  bool operator==(const ToyScorer& o) const {
    return vocab_size_ == o.vocab_size_ && order_ == o.order_ &&
           alpha_ == o.alpha_ && uniform_ == o.uniform_ && rows_ == o.rows_;
  }

 private:
  struct Row {
    std::vector<std::uint32_t> counts;
    std::uint64_t total = 0;
    bool operator==(const Row&) const = default;
  };

  std::size_t vocab_size_ = 0;
  int order_ = 1;
  double alpha_ = 1.0;
  bool uniform_ = false;
  std::map<std::vector<TokenId>, Row> rows_;
};

// Synthetic stand-in for an acoustic model: the observed token at the
// current position (one token per step) is boosted by `confidence`, every
// other token shares the remainder, and the result is multiplied with an
// n-gram prior. Past the end of the observation the evidence is `eos`.
class NoisyChannelScorer : public Scorer {
 public:
  NoisyChannelScorer(std::shared_ptr<const ToyScorer> prior, double confidence,
                     TokenId eos)
      : prior_(std::move(prior)), confidence_(confidence), eos_(eos) {
    if (!prior_) throw Error(ErrorCode::kInvalidArgument, "missing prior");
    if (!(confidence_ > 0.0 && confidence_ < 1.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "channel confidence must lie in (0,1)");
    }
  }

  std::size_t vocab_size() const override { return prior_->vocab_size(); }
  ScorerCapabilities capabilities() const override { return {true, false}; }

  void BeginUtterance(const UtteranceInput& utterance) override {
    observation_ = utterance.observation;
  }
  void EndUtterance() override { observation_.clear(); }

  std::vector<double> ScoreNext(std::span<const TokenId> context) override {
    std::vector<double> p = prior_->Probabilities(context);
    const std::size_t v = p.size();
    TokenId observed =
        context.size() < observation_.size() ? observation_[context.size()] : eos_;
    const double miss = (1.0 - confidence_) / static_cast<double>(v - 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < v; ++i) {
      p[i] *= static_cast<TokenId>(i) == observed ? confidence_ : miss;
      sum += p[i];
    }
    for (double& x : p) x = std::log(x / sum);
    return p;
  }

 private:
  std::shared_ptr<const ToyScorer> prior_;
  double confidence_;
  TokenId eos_;
  std::vector<TokenId> observation_;
};

}  // namespace cbias
