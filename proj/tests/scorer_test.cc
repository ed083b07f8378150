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

#include <sys/socket.h>
#include <sys/un.h>

#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "gtest/gtest.h"

#include "cbias/external_scorer.h"
#include "cbias/scorer.h"
#include "support/test_util.h"

namespace cbias {
namespace {

double SumExp(const std::vector<double>& logp) {
  double s = 0.0;
  for (double x : logp) s += std::exp(x);
  return s;
}

TEST(ToyScorerTest, UnigramAddAlpha) {
  // corpus "a a a b" over {a=0, b=1}
  std::vector<std::vector<TokenId>> corpus = {{0, 0, 0, 1}};
  for (double alpha : {0.5, 1.0, 3.0}) {
    ToyScorer s = ToyScorer::Train(corpus, 1, alpha, 2);
    std::vector<double> p = s.Probabilities({});
    EXPECT_NEAR(p[0], (3 + alpha) / (4 + 2 * alpha), 1e-15);
    EXPECT_NEAR(p[1], (1 + alpha) / (4 + 2 * alpha), 1e-15);
  }
  // corpus "ab", alpha 1: (1+1)/(2+2) each
  std::vector<std::vector<TokenId>> ab = {{0, 1}};
  std::vector<double> p = ToyScorer::Train(ab, 1, 1.0, 2).Probabilities({});
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(ToyScorerTest, EmptyContextBacksOffToUnigram) {
  std::vector<std::vector<TokenId>> corpus = {{0, 1, 0, 1, 2}};
  ToyScorer bigram = ToyScorer::Train(corpus, 2, 0.1, 3);
  ToyScorer unigram = ToyScorer::Train(corpus, 1, 0.1, 3);
  EXPECT_EQ(bigram.Probabilities({}), unigram.Probabilities({}));
  // Seen bigram context differs from the unigram row.
  std::vector<TokenId> ctx = {0};
  std::vector<double> p = bigram.Probabilities(ctx);
  EXPECT_NEAR(p[1], (2 + 0.1) / (2 + 0.3), 1e-15);
  // Unseen context "2" backs off to unigram.
  std::vector<TokenId> unseen = {2};
  EXPECT_EQ(bigram.Probabilities(unseen), unigram.Probabilities({}));
}

TEST(ToyScorerTest, UniformMode) {
  ToyScorer u = ToyScorer::Uniform(7);
  std::vector<TokenId> ctx = {1, 2, 3};
  for (double x : u.ScoreNext(ctx)) EXPECT_DOUBLE_EQ(x, std::log(1.0 / 7));
}

TEST(ToyScorerTest, RepeatedTokenIsMode) {
  std::vector<std::vector<TokenId>> corpus = {{3, 3, 3, 3, 3}};
  std::vector<double> p = ToyScorer::Train(corpus, 3, 0.5, 5).Probabilities({});
  EXPECT_EQ(std::max_element(p.begin(), p.end()) - p.begin(), 3);
}

TEST(ToyScorerTest, PermutedCorpusGivesIdenticalModel) {
  std::vector<std::vector<TokenId>> a = {{0, 1, 2}, {2, 1, 0}, {1, 1}};
  std::vector<std::vector<TokenId>> b = {{1, 1}, {2, 1, 0}, {0, 1, 2}};
  EXPECT_TRUE(ToyScorer::Train(a, 3, 0.2, 3) == ToyScorer::Train(b, 3, 0.2, 3));
}

TEST(ToyScorerTest, Errors) {
  std::vector<std::vector<TokenId>> empty;
  try {
    ToyScorer::Train(empty, 2, 1.0, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyCorpus);
  }
  std::vector<std::vector<TokenId>> ok = {{0}};
  EXPECT_THROW(ToyScorer::Train(ok, 4, 1.0, 3), Error);
  EXPECT_THROW(ToyScorer::Train(ok, 1, 0.0, 3), Error);
  std::vector<std::vector<TokenId>> out_of_range = {{5}};
  EXPECT_THROW(ToyScorer::Train(out_of_range, 1, 1.0, 3), Error);
}

TEST(ToyScorerProperty, RowsNormalizedAndDeterministic) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<TokenId> tok(0, 9);
  std::vector<std::vector<TokenId>> corpus(20);
  for (auto& seq : corpus) {
    seq.resize(1 + rng() % 15);
    for (auto& t : seq) t = tok(rng);
  }
  ToyScorer a = ToyScorer::Train(corpus, 3, 0.05, 10);
  ToyScorer b = ToyScorer::Train(corpus, 3, 0.05, 10);
  for (int i = 0; i < 200; ++i) {
    std::vector<TokenId> ctx(rng() % 4);
    for (auto& t : ctx) t = tok(rng);
    std::vector<double> la = a.ScoreNext(ctx);
    EXPECT_NEAR(SumExp(la), 1.0, 1e-12);
    for (double x : la) EXPECT_TRUE(std::isfinite(x));
    EXPECT_EQ(la, b.ScoreNext(ctx));
  }
}

TEST(NoisyChannelScorerTest, ObservedTokenBoosted) {
  auto prior = std::make_shared<const ToyScorer>(ToyScorer::Uniform(5));
  NoisyChannelScorer s(prior, 0.9, 1);
  s.BeginUtterance({"u", {3, 4}});
  std::vector<double> p0 = s.ScoreNext({});
  EXPECT_NEAR(std::exp(p0[3]), 0.9, 1e-12);
  EXPECT_NEAR(std::exp(p0[0]), 0.025, 1e-12);
  std::vector<TokenId> two = {3, 4};
  std::vector<double> end = s.ScoreNext(two);
  EXPECT_NEAR(std::exp(end[1]), 0.9, 1e-12);
  EXPECT_NEAR(SumExp(end), 1.0, 1e-12);
}

// ---------------------------------------------------------------------------
// Wire protocol

std::string PeerCommand(std::size_t v, const std::string& mode = "ok", long good = -1,
                        const std::string& script = "") {
  std::string cmd = std::string("exec:") + FAKE_PEER_PATH + " " + std::to_string(v) +
                    " " + mode + " " + std::to_string(good);
  if (!script.empty()) cmd += " " + script;
  return cmd;
}

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kIoFailure;
}

TEST(WireFormatTest, LogProbFormatting) {
  EXPECT_EQ(FormatLogProb(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(FormatLogProb(-0.1234567891234), "-0.123456789");
  EXPECT_EQ(FormatScoreRequest("u1", std::vector<TokenId>{4, 5}), "SCORE u1 2 4 5");
  std::vector<TokenId> none;
  EXPECT_EQ(FormatScoreRequest("u1", none), "SCORE u1 0");
}

TEST(WireFormatTest, ParseRejectsBadLines) {
  const std::string half = FormatLogProb(std::log(0.5));
  EXPECT_EQ(ParseLogProbLine("LOGP u " + half + " " + half, "u", 2).size(), 2u);
  // -inf entries are legal when the rest still sums to one.
  EXPECT_EQ(ParseLogProbLine("LOGP u 0 -inf", "u", 2)[1],
            -std::numeric_limits<double>::infinity());
  for (const std::string& line : std::vector<std::string>
       {std::string("LOGP u -0.69"), "LOGP v " + half + " " + half,
        "LOGP u nan " + half, "LOGP u -0.1 -0.1", "LOGP u 0.5 x", "HELLO 1 2",
        "ERROR boom", "LOGP u inf -inf", "", "LOGP u " + half + " " + half + " -9"}) {
    EXPECT_EQ(CodeOf([&] { ParseLogProbLine(line, "u", 2); }), ErrorCode::kScorerFailure)
        << line;
  }
}

TEST(WireFormatTest, FuzzedLinesNeverParseSilently) {
  // Random mutations of a valid line must either parse to a normalized
  // vector or raise ScorerFailure.
  std::vector<double> logp(6, std::log(1.0 / 6));
  const std::string good = FormatLogProbLine("u", logp);
  std::mt19937_64 rng(5);
  const std::string alphabet = "0123456789.-e naifLOGPu";
  for (int trial = 0; trial < 3000; ++trial) {
    std::string line = good;
    int edits = 1 + rng() % 4;
    for (int e = 0; e < edits; ++e) {
      std::size_t pos = rng() % (line.size() + 1);
      switch (rng() % 3) {
        case 0:
          if (pos < line.size()) line.erase(pos, 1 + rng() % 5);
          break;
        case 1: line.insert(pos, 1, alphabet[rng() % alphabet.size()]); break;
        default: line = line.substr(0, pos); break;
      }
    }
    try {
      std::vector<double> parsed = ParseLogProbLine(line, "u", 6);
      ASSERT_EQ(parsed.size(), 6u);
      EXPECT_NEAR(SumExp(parsed), 1.0, 1e-6);
      for (double x : parsed) EXPECT_FALSE(std::isnan(x));
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kScorerFailure);
    }
  }
}

TEST(ExternalScorerTest, HandshakeAndScore) {
  auto scorer = ConnectExternalScorer(PeerCommand(6, "ok", -1, "3,4"), 6);
  EXPECT_EQ(scorer->vocab_size(), 6u);
  scorer->BeginUtterance({"utt1", {}});
  std::vector<double> first = scorer->ScoreNext({});
  EXPECT_NEAR(std::exp(first[3]), 0.9, 1e-8);
  std::vector<TokenId> ctx = {3};
  EXPECT_NEAR(std::exp(scorer->ScoreNext(ctx)[4]), 0.9, 1e-8);
  // Repeated identical requests give identical vectors.
  EXPECT_EQ(scorer->ScoreNext({}), first);
  scorer->EndUtterance();
}

TEST(ExternalScorerTest, LargeVocabularyHandshake) {
  auto scorer = ConnectExternalScorer(PeerCommand(51865), 51865);
  scorer->BeginUtterance({"u", {}});
  EXPECT_NEAR(SumExp(scorer->ScoreNext({})), 1.0, 1e-6);
}

TEST(ExternalScorerTest, HandshakeMismatch) {
  EXPECT_EQ(CodeOf([] { ConnectExternalScorer(PeerCommand(100), 101); }),
            ErrorCode::kHandshakeMismatch);
}

TEST(ExternalScorerTest, UnreachablePeer) {
  EXPECT_EQ(CodeOf([] { ConnectExternalScorer("exec:/nonexistent/peer", 5); }),
            ErrorCode::kIoFailure);
  EXPECT_EQ(CodeOf([] { ConnectExternalScorer("unix:/nonexistent/sock", 5); }),
            ErrorCode::kIoFailure);
  EXPECT_EQ(CodeOf([] { ConnectExternalScorer("tcp:1", 5); }),
            ErrorCode::kInvalidArgument);
}

TEST(ExternalScorerTest, MidSessionFailuresAreScorerFailures) {
  for (const char* mode : {"wrong-length", "nan", "truncated", "error", "garbage", "exit"}) {
    auto scorer = ConnectExternalScorer(PeerCommand(5, mode, 2), 5);
    scorer->BeginUtterance({"u", {}});
    scorer->ScoreNext({});
    scorer->ScoreNext({});
    EXPECT_EQ(CodeOf([&] { scorer->ScoreNext({}); }), ErrorCode::kScorerFailure) << mode;
    // The session stays failed.
    EXPECT_EQ(CodeOf([&] { scorer->ScoreNext({}); }), ErrorCode::kScorerFailure) << mode;
  }
}

TEST(ExternalScorerTest, UnixSocketPeer) {
  testing::TempDir dir("sock");
  const std::string path = dir / "peer.sock";
  int listener = ::socket(AF_UNIX, SOCK_STREAM, 0);
  ASSERT_GE(listener, 0);
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  std::strncpy(addr.sun_path, path.c_str(), sizeof(addr.sun_path) - 1);
  ASSERT_EQ(::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)), 0);
  ASSERT_EQ(::listen(listener, 1), 0);

  std::thread peer([listener] {
    int fd = ::accept(listener, nullptr, nullptr);
    LineChannel channel(fd, fd);
    channel.WriteLine("HELLO 1 2");
    std::string line;
    while (channel.ReadLine(line)) {
      if (line == "BYE") break;
      if (line.rfind("SCORE", 0) == 0) {
        std::vector<double> logp = {std::log(0.25), std::log(0.75)};
        channel.WriteLine(FormatLogProbLine("s", logp));
      }
    }
  });
  {
    auto scorer = ConnectExternalScorer("unix:" + path, 2);
    scorer->BeginUtterance({"s", {}});
    EXPECT_NEAR(std::exp(scorer->ScoreNext({})[1]), 0.75, 1e-8);
  }
  peer.join();
  ::close(listener);
}

}  // namespace
}  // namespace cbias
