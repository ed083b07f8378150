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
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cbias/error.h"
#include "cbias/prefix_tree.h"
#include "cbias/scorer.h"
#include "cbias/vocabulary.h"

namespace cbias {

enum class GenerationMode {
  kFixed,        // g = generation_prob
  kMassCoupled,  // g = model mass on the valid tokens
};

struct DecodeConfig {
  // Fall back to the model when its mass on the valid tokens is below this.
  double threshold = 0.05;
  GenerationMode mode = GenerationMode::kFixed;
  double generation_prob = 0.8;
  int beam_width = 4;
  int max_steps = 448;
  // Floor applied only when taking logs of final-distribution entries.
  double epsilon = 1e-10;
  // At a node that completes a phrase, the separator and end-of-sequence
  // tokens also count as valid continuations.
  bool phrase_boundaries = true;
  // Phrases start only at word boundaries: after an out-of-tree token other
  // than the separator, the tree is ignored until the next separator.
  bool word_anchored = false;

  void Validate(std::size_t vocab_size) const {
    auto fail = [](const std::string& what) {
      throw Error(ErrorCode::kInvalidArgument, what);
    };
    if (!(threshold >= 0.0 && threshold <= 1.0)) fail("threshold must lie in [0,1]");
    if (!(generation_prob >= 0.0 && generation_prob <= 1.0)) {
      fail("generation probability must lie in [0,1]");
    }
    if (beam_width < 1) fail("beam width must be >= 1");
    if (max_steps < 0) fail("max steps must be >= 0");
    if (!(epsilon > 0.0)) fail("epsilon must be > 0");
    if (vocab_size > 0 && !(epsilon < 1.0 / static_cast<double>(vocab_size))) {
      fail("epsilon must be < 1/V");
    }
  }
};

struct StepDistribution {
  std::vector<double> model;
  std::vector<double> pointer;  // all zeros when there are no valid tokens
  std::vector<double> final;
  std::vector<TokenId> valid;   // ascending
  double valid_mass = 0.0;
  bool fallback = true;
};

// The biasing step. `boundary` lists tokens that become valid at nodes
// completing a phrase (empty: valid tokens are exactly the tree children).
inline StepDistribution ComputeStepDistribution(
    std::span<const double> model_dist, const PrefixTree& tree,
    const TreeCursor& cursor, const DecodeConfig& config,
    std::span<const TokenId> boundary = {}) {
  const std::size_t v = model_dist.size();
  double sum = 0.0;
  for (double p : model_dist) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorCode::kMalformedDistribution,
                  "negative or non-finite probability");
    }
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-6) {
    throw Error(ErrorCode::kMalformedDistribution,
                "distribution sums to " + std::to_string(sum));
  }

  StepDistribution out;
  out.model.resize(v);
  for (std::size_t i = 0; i < v; ++i) out.model[i] = model_dist[i] / sum;

  out.valid = tree.ValidTokens(cursor);
  if (!boundary.empty() && tree.IsTerminal(cursor)) {
    out.valid.insert(out.valid.end(), boundary.begin(), boundary.end());
    std::sort(out.valid.begin(), out.valid.end());
    out.valid.erase(std::unique(out.valid.begin(), out.valid.end()),
                    out.valid.end());
  }
  std::erase_if(out.valid, [v](TokenId t) {
    return t < 0 || static_cast<std::size_t>(t) >= v;
  });

  out.pointer.assign(v, 0.0);
  for (TokenId t : out.valid) out.valid_mass += out.model[t];
  if (out.valid_mass > 0.0) {
    for (TokenId t : out.valid) out.pointer[t] = out.model[t] / out.valid_mass;
  }

  // A zero-mass valid set cannot be renormalized, so it always falls back.
  if (out.valid.empty() || out.valid_mass <= 0.0 ||
      out.valid_mass < config.threshold) {
    out.fallback = true;
    out.final = out.model;
    return out;
  }
  const double g = config.mode == GenerationMode::kMassCoupled
                       ? std::min(1.0, out.valid_mass)
                       : config.generation_prob;
  out.fallback = false;
  out.final.resize(v);
  for (std::size_t i = 0; i < v; ++i) {
    out.final[i] = (1.0 - g) * out.model[i] + g * out.pointer[i];
  }
  return out;
}

struct TraceRecord {
  std::size_t step = 0;
  TokenId token = 0;
  bool fallback = true;
  double valid_mass = 0.0;
  std::optional<PhraseId> completed;

  bool operator==(const TraceRecord&) const = default;
};

using DecodeTrace = std::vector<TraceRecord>;

struct Hypothesis {
  std::vector<TokenId> tokens;
  double log_score = 0.0;
  TreeCursor cursor;
  bool detached = false;  // mid-word after leaving the tree
  bool finished = false;

  bool operator==(const Hypothesis&) const = default;
};

struct DecodeResult {
  Hypothesis hypothesis;
  DecodeTrace trace;
};

struct FallbackStats {
  std::size_t steps = 0;
  std::size_t fallbacks = 0;

  void Add(const DecodeTrace& trace) {
    steps += trace.size();
    for (const TraceRecord& r : trace) fallbacks += r.fallback ? 1 : 0;
  }
  double rate() const {
    return steps == 0 ? 0.0
                      : static_cast<double>(fallbacks) / static_cast<double>(steps);
  }
};

inline double FallbackRate(const DecodeTrace& trace) {
  FallbackStats stats;
  stats.Add(trace);
  return stats.rate();
}

// `<step> <token-id> <fallback 0|1> <valid-mass 6dp> <completed-phrase-id|->`
inline void WriteTrace(const DecodeTrace& trace, std::ostream& out) {
  char mass[32];
  for (const TraceRecord& r : trace) {
    std::snprintf(mass, sizeof(mass), "%.6f", r.valid_mass);
    out << r.step << ' ' << r.token << ' ' << (r.fallback ? 1 : 0) << ' '
        << mass << ' ';
    if (r.completed) {
      out << *r.completed;
    } else {
      out << '-';
    }
    out << '\n';
  }
}

// Drives a scorer with optional biasing. Without a tree every step uses the
// model distribution unchanged and is recorded as a fallback step.
class BiasedDecoder {
 public:
  BiasedDecoder(const PrefixTree* tree, const SpecialTokens& specials,
                DecodeConfig config)
      : tree_(tree), specials_(specials), config_(config) {
    if (config_.phrase_boundaries) {
      boundary_ = {specials_.separator, specials_.eos};
      std::sort(boundary_.begin(), boundary_.end());
    }
  }

  const DecodeConfig& config() const { return config_; }

  StepDistribution Step(std::span<const double> model_dist,
                        const TreeCursor& cursor, bool detached = false) const {
    if (tree_ == nullptr || detached) {
      StepDistribution out;
      out.model.assign(model_dist.begin(), model_dist.end());
      double sum = 0.0;
      for (double p : out.model) sum += p;
      for (double& p : out.model) p /= sum;
      out.pointer.assign(out.model.size(), 0.0);
      out.final = out.model;
      return out;
    }
    return ComputeStepDistribution(model_dist, *tree_, cursor, config_,
                                   boundary_);
  }

  DecodeResult Greedy(Scorer& scorer) const {
    config_.Validate(scorer.vocab_size());
    DecodeResult result;
    Hypothesis& hyp = result.hypothesis;
    hyp.cursor = Root();
    for (int step = 0; step < config_.max_steps; ++step) {
      StepDistribution sd = Step(ModelDistribution(scorer, hyp.tokens, step),
                                 hyp.cursor, hyp.detached);
      TokenId best = 0;
      for (std::size_t i = 1; i < sd.final.size(); ++i) {
        if (sd.final[i] > sd.final[best]) best = static_cast<TokenId>(i);
      }
      Extend(hyp, result.trace, sd, best, static_cast<std::size_t>(step));
      if (hyp.finished) return result;
    }
    hyp.finished = true;
    return result;
  }

  // Results sorted best first. Width 1 reproduces Greedy().
  std::vector<DecodeResult> Beam(Scorer& scorer) const {
    config_.Validate(scorer.vocab_size());
    const std::size_t width = static_cast<std::size_t>(config_.beam_width);
    std::vector<DecodeResult> live(1);
    live[0].hypothesis.cursor = Root();
    std::vector<DecodeResult> done;

    for (int step = 0; step < config_.max_steps && !live.empty(); ++step) {
      struct Candidate {
        double score;
        std::size_t parent;  // index into live, or done when from_done
        TokenId token;
        bool from_done;
      };
      std::vector<Candidate> pool;
      std::vector<StepDistribution> dists;
      dists.reserve(live.size());
      for (std::size_t h = 0; h < live.size(); ++h) {
        const Hypothesis& hyp = live[h].hypothesis;
        dists.push_back(
            Step(ModelDistribution(scorer, hyp.tokens, step), hyp.cursor,
                 hyp.detached));
        const std::vector<double>& fin = dists.back().final;
        std::vector<Candidate> local;
        local.reserve(fin.size());
        for (std::size_t t = 0; t < fin.size(); ++t) {
          local.push_back({hyp.log_score + LogFloor(fin[t]), h,
                           static_cast<TokenId>(t), false});
        }
        // Within one parent, ties go to the lower token id.
        auto by_score = [](const Candidate& a, const Candidate& b) {
          if (a.score != b.score) return a.score > b.score;
          return a.token < b.token;
        };
        std::size_t keep = std::min(width, local.size());
        std::partial_sort(local.begin(), local.begin() + keep, local.end(),
                          by_score);
        pool.insert(pool.end(), local.begin(), local.begin() + keep);
      }
      for (std::size_t d = 0; d < done.size(); ++d) {
        pool.push_back({done[d].hypothesis.log_score, d, 0, true});
      }

      auto tokens_of = [&](const Candidate& c) -> std::vector<TokenId> {
        if (c.from_done) return done[c.parent].hypothesis.tokens;
        std::vector<TokenId> t = live[c.parent].hypothesis.tokens;
        t.push_back(c.token);
        return t;
      };
      auto better = [&](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        std::vector<TokenId> ta = tokens_of(a);
        std::vector<TokenId> tb = tokens_of(b);
        if (ta.size() != tb.size()) return ta.size() < tb.size();
        return ta < tb;
      };
      std::size_t keep = std::min(width, pool.size());
      std::partial_sort(pool.begin(), pool.begin() + keep, pool.end(), better);
      pool.resize(keep);

      std::vector<DecodeResult> next_live;
      std::vector<DecodeResult> next_done;
      for (const Candidate& c : pool) {
        if (c.from_done) {
          next_done.push_back(done[c.parent]);
          continue;
        }
        DecodeResult r = live[c.parent];
        Extend(r.hypothesis, r.trace, dists[c.parent], c.token,
               static_cast<std::size_t>(step));
        (r.hypothesis.finished ? next_done : next_live).push_back(std::move(r));
      }
      live = std::move(next_live);
      done = std::move(next_done);
    }
    for (DecodeResult& r : live) {
      r.hypothesis.finished = true;
      done.push_back(std::move(r));
    }
    std::stable_sort(done.begin(), done.end(),
                     [](const DecodeResult& a, const DecodeResult& b) {
                       const Hypothesis& x = a.hypothesis;
                       const Hypothesis& y = b.hypothesis;
                       if (x.log_score != y.log_score) {
                         return x.log_score > y.log_score;
                       }
                       if (x.tokens.size() != y.tokens.size()) {
                         return x.tokens.size() < y.tokens.size();
                       }
                       return x.tokens < y.tokens;
                     });
    return done;
  }

 private:
  TreeCursor Root() const { return tree_ ? tree_->Root() : TreeCursor{}; }

  double LogFloor(double p) const {
    return std::log(std::max(p, config_.epsilon));
  }

  // Queries the scorer and converts its log-probabilities, attributing any
  // failure to `step`.
  static std::vector<double> ModelDistribution(Scorer& scorer,
                                               std::span<const TokenId> context,
                                               int step) {
    const auto where = static_cast<std::size_t>(step);
    std::vector<double> logp;
    try {
      logp = scorer.ScoreNext(context);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kScorerFailure ||
          e.code() == ErrorCode::kIoFailure) {
        throw Error(ErrorCode::kScorerFailure,
                    e.message() + " at step " + std::to_string(step),
                    where);
      }
      throw;
    }
    if (logp.size() != scorer.vocab_size()) {
      throw Error(ErrorCode::kScorerFailure,
                  "scorer returned " + std::to_string(logp.size()) +
                      " entries at step " + std::to_string(step),
                  where);
    }
    std::vector<double> p(logp.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logp.size(); ++i) {
      if (std::isnan(logp[i]) || logp[i] > 1e-9) {
        throw Error(ErrorCode::kScorerFailure,
                    "invalid log-probability at step " + std::to_string(step),
                    where);
      }
      p[i] = std::exp(logp[i]);
      sum += p[i];
    }
    if (std::fabs(sum - 1.0) > 1e-6) {
      throw Error(ErrorCode::kScorerFailure,
                  "scorer distribution sums to " + std::to_string(sum) +
                      " at step " + std::to_string(step),
                  where);
    }
    return p;
  }

  void Extend(Hypothesis& hyp, DecodeTrace& trace, const StepDistribution& sd,
              TokenId token, std::size_t step) const {
    hyp.tokens.push_back(token);
    hyp.log_score += LogFloor(sd.final[token]);
    TraceRecord record;
    record.step = step;
    record.token = token;
    record.fallback = sd.fallback;
    record.valid_mass = sd.valid_mass;
    if (tree_ != nullptr) {
      if (hyp.detached) {
        hyp.detached = token != specials_.separator;
      } else {
        AdvanceResult next = tree_->Advance(hyp.cursor, token);
        hyp.cursor = next.cursor;
        hyp.detached = config_.word_anchored && next.reset &&
                       token != specials_.separator;
        if (hyp.detached) hyp.cursor = tree_->Root();
      }
      record.completed = tree_->PhraseCompleted(hyp.cursor);
    }
    trace.push_back(record);
    hyp.finished = token == specials_.eos;
  }

  const PrefixTree* tree_;
  SpecialTokens specials_;
  DecodeConfig config_;
  std::vector<TokenId> boundary_;
};

inline DecodeResult DecodeGreedy(Scorer& scorer, const PrefixTree* tree,
                                 const SpecialTokens& specials,
                                 const DecodeConfig& config) {
  return BiasedDecoder(tree, specials, config).Greedy(scorer);
}

inline std::vector<DecodeResult> DecodeBeam(Scorer& scorer,
                                            const PrefixTree* tree,
                                            const SpecialTokens& specials,
                                            const DecodeConfig& config) {
  return BiasedDecoder(tree, specials, config).Beam(scorer);
}

}  // namespace cbias
