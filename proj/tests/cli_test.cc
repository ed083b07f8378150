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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "gtest/gtest.h"

#include "cbias/commands.h"
#include "support/test_util.h"

namespace cbias::cli {
namespace {

namespace fs = std::filesystem;
using testing::ReadFile;
using testing::TempDir;
using testing::WriteFile;

const std::string kSmoke = CBIAS_SMOKE_DIR;

std::string Smoke(const std::string& name) { return kSmoke + "/" + name; }

// Runs the real binary; returns its exit status.
int RunBinary(const std::string& args, std::string* stderr_text = nullptr) {
  TempDir tmp("bin");
  const std::string err_path = tmp / "stderr";
  const std::string cmd =
      std::string(CBIAS_BINARY) + " " + args + " >/dev/null 2>" + err_path;
  const int status = std::system(cmd.c_str());
  if (stderr_text) *stderr_text = ReadFile(err_path);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct Captured {
  std::ostringstream out, err;
};

BuildOptions SmokeBuild(const std::string& out_tree) {
  return {Smoke("biasing_list.txt"), Smoke("vocab.txt"), out_tree};
}

DecodeOptions SmokeDecode(const std::string& tree, const std::string& out) {
  DecodeOptions o;
  o.tree = tree;
  o.vocab = Smoke("vocab.txt");
  o.scorer = "channel:" + Smoke("scorer_corpus.txt");
  o.config = {Smoke("decode.conf")};
  o.utterances = Smoke("utterances.txt");
  o.out = out;
  return o;
}

TEST(CliBuildTest, ThreePhraseList) {
  TempDir dir("build");
  WriteFile(dir / "list.txt", "antenna\nanchor\nalarm\n");
  Captured c;
  ASSERT_EQ(RunBuild({dir / "list.txt", Smoke("vocab.txt"), dir / "tree.txt"}, c.out, c.err),
            kExitOk)
      << c.err.str();
  EXPECT_EQ(c.out.str(), "phrases = 3\ndropped = 0\nduplicates = 0\nnodes = 16\n");
  EXPECT_TRUE(fs::exists(dir / "tree.txt"));
  EXPECT_TRUE(fs::exists(dir / "tree.txt.manifest.json"));
}

TEST(CliBuildTest, DuplicatesAndEmptyList) {
  TempDir dir("build");
  WriteFile(dir / "dup.txt", "Anchor\nanchor\n");
  Captured c;
  ASSERT_EQ(RunBuild({dir / "dup.txt", Smoke("vocab.txt"), dir / "t"}, c.out, c.err), kExitOk);
  EXPECT_NE(c.out.str().find("duplicates = 1"), std::string::npos);
  EXPECT_NE(c.out.str().find("phrases = 1"), std::string::npos);

  WriteFile(dir / "empty.txt", "# nothing here\n\n");
  Captured e;
  EXPECT_EQ(RunBuild({dir / "empty.txt", Smoke("vocab.txt"), dir / "t2"}, e.out, e.err),
            kExitParse);
  EXPECT_NE(e.err.str().find("EmptyLexicon"), std::string::npos) << e.err.str();
  EXPECT_FALSE(fs::exists(dir / "t2"));
}

TEST(CliBuildTest, ParseErrorNamesLine) {
  TempDir dir("build");
  WriteFile(dir / "bad_vocab.txt", "bos=0 eos=1 sep=2\n0\t<s>\n1\t</s>\n2\t<sp>\n7\ta\n");
  Captured c;
  EXPECT_EQ(RunBuild({Smoke("biasing_list.txt"), dir / "bad_vocab.txt", dir / "t"}, c.out, c.err),
            kExitParse);
  EXPECT_NE(c.err.str().find("line 5"), std::string::npos) << c.err.str();
}

TEST(CliDecodeTest, SmokeCorpusMatchesGolden) {
  TempDir dir("decode");
  Captured b;
  ASSERT_EQ(RunBuild(SmokeBuild(dir / "tree.txt"), b.out, b.err), kExitOk);
  EXPECT_EQ(ReadFile(dir / "tree.txt"), ReadFile(Smoke("golden/tree.txt")));
  Captured d;
  ASSERT_EQ(RunDecode(SmokeDecode(dir / "tree.txt", dir / "out"), d.out, d.err), kExitOk)
      << d.err.str();
  EXPECT_EQ(ReadFile(dir / "out/hypotheses.txt"), ReadFile(Smoke("golden/hypotheses.txt")));
  EXPECT_EQ(ReadFile(dir / "out/summary.txt"), ReadFile(Smoke("golden/summary.txt")));
  for (const auto& entry : fs::directory_iterator(Smoke("golden/traces"))) {
    const std::string name = entry.path().filename().string();
    EXPECT_EQ(ReadFile(dir / ("out/traces/" + name)), ReadFile(entry.path())) << name;
  }

  EvalOptions e;
  e.refs = Smoke("references.txt");
  e.hyps = dir / "out/hypotheses.txt";
  e.gazetteer = Smoke("gazetteer.txt");
  e.segments = Smoke("segments.txt");
  e.triggers = Smoke("triggers.txt");
  e.traces = dir / "out/traces";
  e.out = dir / "eval";
  Captured ev;
  ASSERT_EQ(RunEval(e, ev.out, ev.err), kExitOk) << ev.err.str();
  EXPECT_EQ(ReadFile(dir / "eval/report.txt"), ReadFile(Smoke("golden/report.txt")));
}

TEST(CliDecodeTest, ParallelJobsKeepInputOrder) {
  TempDir dir("decode");
  Captured b, d1, d4;
  ASSERT_EQ(RunBuild(SmokeBuild(dir / "tree.txt"), b.out, b.err), kExitOk);
  DecodeOptions one = SmokeDecode(dir / "tree.txt", dir / "one");
  DecodeOptions four = SmokeDecode(dir / "tree.txt", dir / "four");
  four.jobs = 4;
  ASSERT_EQ(RunDecode(one, d1.out, d1.err), kExitOk);
  ASSERT_EQ(RunDecode(four, d4.out, d4.err), kExitOk);
  EXPECT_EQ(ReadFile(dir / "one/hypotheses.txt"), ReadFile(dir / "four/hypotheses.txt"));
  EXPECT_EQ(ReadFile(dir / "one/summary.txt"), ReadFile(dir / "four/summary.txt"));
}

TEST(CliDecodeTest, ZeroGenerationProbabilityEqualsNoTree) {
  TempDir dir("decode");
  Captured b, x, y;
  ASSERT_EQ(RunBuild(SmokeBuild(dir / "tree.txt"), b.out, b.err), kExitOk);
  DecodeOptions biased = SmokeDecode(dir / "tree.txt", dir / "g0");
  biased.config.push_back("g=0");
  DecodeOptions plain = SmokeDecode("", dir / "plain");
  ASSERT_EQ(RunDecode(biased, x.out, x.err), kExitOk);
  ASSERT_EQ(RunDecode(plain, y.out, y.err), kExitOk);
  EXPECT_EQ(ReadFile(dir / "g0/hypotheses.txt"), ReadFile(dir / "plain/hypotheses.txt"));
  EXPECT_EQ(y.out.str(), "fallback-rate = 1.000000\n");
}

TEST(CliDecodeTest, UnreachableScorerExitsThreeWithMarkers) {
  TempDir dir("decode");
  DecodeOptions o = SmokeDecode("", dir / "out");
  o.scorer = "unix:" + (dir / "no.sock");
  Captured c;
  EXPECT_EQ(RunDecode(o, c.out, c.err), kExitScorer);
  EXPECT_EQ(ReadFile(dir / "out/hypotheses.txt"),
            "r1/0\tFAILED\nr1/1\tFAILED\nr2/0\tFAILED\nr2/1\tFAILED\n");
}

TEST(CliDecodeTest, MidRunScorerFailureKeepsOtherUtterances) {
  TempDir dir("decode");
  // Each session serves 8 good rows, then answers with a short vector. Every
  // utterance takes three steps, so the third one fails at step 2 and the
  // fourth runs on a fresh session.
  DecodeOptions o = SmokeDecode("", dir / "out");
  o.scorer = std::string("exec:") + FAKE_PEER_PATH + " 40 wrong-length 8 3,4";
  Captured c;
  EXPECT_EQ(RunDecode(o, c.out, c.err), kExitScorer);
  EXPECT_EQ(ReadFile(dir / "out/hypotheses.txt"),
            "r1/0\tab\nr1/1\tab\nr2/0\tFAILED\nr2/1\tab\n");
  EXPECT_NE(c.err.str().find("r2/0"), std::string::npos) << c.err.str();
  EXPECT_NE(c.err.str().find("at step 2"), std::string::npos) << c.err.str();
  EXPECT_TRUE(fs::exists(dir / "out/traces/r2_1.trace"));
  EXPECT_FALSE(fs::exists(dir / "out/traces/r2_0.trace"));
}

TEST(CliDecodeTest, ExternalScorerDecode) {
  TempDir dir("decode");
  DecodeOptions o = SmokeDecode("", dir / "out");
  // Scripted peer: spells "ab" then eos.
  o.scorer = std::string("exec:") + FAKE_PEER_PATH + " 40 ok -1 3,4";
  o.config.push_back("beam-width=1");
  Captured c;
  ASSERT_EQ(RunDecode(o, c.out, c.err), kExitOk) << c.err.str();
  EXPECT_EQ(ReadFile(dir / "out/hypotheses.txt"), "r1/0\tab\nr1/1\tab\nr2/0\tab\nr2/1\tab\n");
}

TEST(CliEvalTest, IdenticalFilesGiveZeroWer) {
  TempDir dir("eval");
  EvalOptions e;
  e.refs = Smoke("references.txt");
  e.hyps = Smoke("references.txt");
  e.out = dir / "out";
  Captured c;
  ASSERT_EQ(RunEval(e, c.out, c.err), kExitOk) << c.err.str();
  const std::string report = ReadFile(dir / "out/report.txt");
  EXPECT_NE(report.find("wer = 0.000000\n"), std::string::npos) << report;
  // No gazetteer: entity metrics are omitted, the rest is still there.
  EXPECT_EQ(report.find("entity-accuracy"), std::string::npos);
  EXPECT_NE(report.find("N = 23\n"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "out/details.txt"));
}

TEST(CliEvalTest, IdMismatchExitsFourListingIds) {
  TempDir dir("eval");
  WriteFile(dir / "hyps.txt", "r1/0\tvts east\nzz/9\textra\n");
  EvalOptions e;
  e.refs = Smoke("references.txt");
  e.hyps = dir / "hyps.txt";
  e.out = dir / "out";
  Captured c;
  EXPECT_EQ(RunEval(e, c.out, c.err), kExitAlignment);
  EXPECT_NE(c.err.str().find("zz/9"), std::string::npos) << c.err.str();
  EXPECT_NE(c.err.str().find("r2/1"), std::string::npos) << c.err.str();
}

TEST(CliRerunTest, ManifestReproducesOutputs) {
  TempDir dir("rerun");
  Captured b, d, r;
  ASSERT_EQ(RunBuild(SmokeBuild(dir / "tree.txt"), b.out, b.err), kExitOk);
  ASSERT_EQ(RunDecode(SmokeDecode(dir / "tree.txt", dir / "first"), d.out, d.err), kExitOk);
  ASSERT_EQ(RunFromManifest(dir / "first/manifest.json", dir / "second", r.out, r.err), kExitOk)
      << r.err.str();
  for (const char* f : {"hypotheses.txt", "summary.txt", "traces/r1_0.trace"}) {
    EXPECT_EQ(ReadFile(dir / ("first/" + std::string(f))),
              ReadFile(dir / ("second/" + std::string(f))))
        << f;
  }
  // A changed input invalidates the manifest.
  WriteFile(dir / "tree.txt", ReadFile(dir / "tree.txt") + "\n");
  Captured bad;
  EXPECT_EQ(RunFromManifest(dir / "first/manifest.json", dir / "third", bad.out, bad.err),
            kExitParse);
  EXPECT_NE(bad.err.str().find("input changed"), std::string::npos) << bad.err.str();
}

TEST(CliBinaryTest, ExitCodes) {
  TempDir dir("bin");
  EXPECT_EQ(RunBinary("--help"), 0);
  EXPECT_EQ(RunBinary("decode --bogus"), 1);
  EXPECT_EQ(RunBinary(""), 1);
  WriteFile(dir / "empty.txt", "");
  EXPECT_EQ(RunBinary("build --biasing-list " + (dir / "empty.txt") + " --vocab " +
                      Smoke("vocab.txt") + " --out-tree " + (dir / "t")),
            2);
  std::string err;
  EXPECT_EQ(RunBinary("decode --vocab " + Smoke("vocab.txt") + " --scorer unix:" +
                          (dir / "missing.sock") + " --utterances " +
                          Smoke("utterances.txt") + " --out " + (dir / "d"),
                      &err),
            3);
  EXPECT_NE(err.find("cannot reach scorer"), std::string::npos) << err;
  WriteFile(dir / "h.txt", "other\tx\n");
  EXPECT_EQ(RunBinary("eval --refs " + Smoke("references.txt") + " --hyps " + (dir / "h.txt") +
                      " --out " + (dir / "e")),
            4);
  EXPECT_EQ(RunBinary("build --biasing-list " + Smoke("biasing_list.txt") + " --vocab " +
                      Smoke("vocab.txt") + " --out-tree " + (dir / "tree.txt")),
            0);
  EXPECT_EQ(ReadFile(dir / "tree.txt"), ReadFile(Smoke("golden/tree.txt")));
  EXPECT_EQ(RunBinary("rerun " + (dir / "tree.txt.manifest.json") + " --out " +
                      (dir / "tree2.txt")),
            0);
  EXPECT_EQ(ReadFile(dir / "tree2.txt"), ReadFile(dir / "tree.txt"));
}

}  // namespace
}  // namespace cbias::cli
