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

// The `cbias` subcommands as library calls. Each returns a process exit
// code and writes a manifest next to its outputs:
//   0 success, 1 usage, 2 input parse failure, 3 scorer failure,
//   4 id mismatch between aligned files.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cbias/config.h"
#include "cbias/corpus_io.h"
#include "cbias/decoder.h"
#include "cbias/error.h"
#include "cbias/eval.h"
#include "cbias/external_scorer.h"
#include "cbias/lexicon.h"
#include "cbias/manifest.h"
#include "cbias/prefix_tree.h"
#include "cbias/scorer.h"
#include "cbias/vocabulary.h"

namespace cbias::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitParse = 2,
  kExitScorer = 3,
  kExitAlignment = 4,
};

inline int ExitCodeFor(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kIdMismatch: return kExitAlignment;
    case ErrorCode::kScorerFailure:
    case ErrorCode::kHandshakeMismatch: return kExitScorer;
    default: return kExitParse;
  }
}

// Error text for the terminal, with the line number of parse failures.
inline std::string Describe(const Error& e) {
  std::string text = e.what();
  if (e.location() && e.code() != ErrorCode::kScorerFailure) {
    text += " (line " + std::to_string(*e.location()) + ")";
  }
  return text;
}

inline std::string FormatFixed(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

inline void WriteFileOrThrow(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << content)) {
    throw Error(ErrorCode::kIoFailure, "cannot write " + path);
  }
}

// Trace files are named after the utterance id with path separators made safe.
inline std::string TraceFileName(const std::string& utterance_id) {
  std::string name = utterance_id;
  std::replace(name.begin(), name.end(), '/', '_');
  return name + ".trace";
}

// Applies `--config` values in order: `key=value` assignments, or paths of
// `key = value` files (recorded as inputs).
inline RunConfig ResolveConfig(const std::vector<std::string>& entries,
                               RunManifest* manifest) {
  RunConfig config;
  for (const std::string& entry : entries) {
    if (entry.find('=') != std::string::npos && !std::filesystem::exists(entry)) {
      config.SetAssignment(entry);
    } else {
      config.ReadFile(entry);
      if (manifest) manifest->AddInput(entry);
    }
  }
  return config;
}

// ---------------------------------------------------------------------------
// build

struct BuildOptions {
  std::string biasing_list;
  std::string vocab;
  std::string out_tree;
};

inline RunManifest BuildManifest(const BuildOptions& o) {
  RunManifest m;
  m.command = "build";
  m.options = {{"biasing-list", o.biasing_list},
               {"vocab", o.vocab},
               {"out-tree", o.out_tree}};
  return m;
}

inline int RunBuild(const BuildOptions& options, std::ostream& out,
                    std::ostream& err) {
  try {
    RunManifest manifest = BuildManifest(options);
    Vocabulary vocab = ReadVocabularyFile(options.vocab);
    BiasingLexicon lexicon = LoadBiasingListFile(options.biasing_list, vocab);
    PrefixTree tree = PrefixTree::Build(lexicon);
    std::ostringstream dump;
    tree.Dump(dump);
    WriteFileOrThrow(options.out_tree, dump.str());
    manifest.AddInput(options.vocab);
    manifest.AddInput(options.biasing_list);
    manifest.timestamp = UtcTimestamp();
    manifest.Write(options.out_tree + ".manifest.json");
    out << "phrases = " << lexicon.size() << '\n'
        << "dropped = " << lexicon.dropped << '\n'
        << "duplicates = " << lexicon.duplicates << '\n'
        << "nodes = " << tree.node_count() << '\n';
    return kExitOk;
  } catch (const Error& e) {
    err << "build: " << Describe(e) << '\n';
    return ExitCodeFor(e);
  }
}

// ---------------------------------------------------------------------------
// decode

struct DecodeOptions {
  std::string tree;  // empty: unbiased decoding
  std::string vocab;
  std::string scorer;
  std::vector<std::string> config;
  std::string utterances;
  std::string out;
  int jobs = 1;
};

// Scorers are created per worker thread; toy priors are trained once.
struct ScorerFactory {
  std::function<std::unique_ptr<Scorer>()> make;
  std::vector<std::string> inputs;
};

// Wraps a shared, read-only n-gram prior.
class SharedToyScorer : public Scorer {
 public:
  explicit SharedToyScorer(std::shared_ptr<const ToyScorer> model)
      : model_(std::move(model)) {}
  std::size_t vocab_size() const override { return model_->vocab_size(); }
  std::vector<double> ScoreNext(std::span<const TokenId> context) override {
    std::vector<double> p = model_->Probabilities(context);
    for (double& x : p) x = std::log(x);
    return p;
  }

 private:
  std::shared_ptr<const ToyScorer> model_;
};

// One utterance per line (plain text, or `<id>\t<text>`), cleaned and
// tokenized, with end-of-sequence appended.
inline std::vector<std::vector<TokenId>> ReadTrainingCorpus(const std::string& path,
                                                            const Vocabulary& vocab) {
  std::ifstream in = OpenInput(path, "scorer corpus");
  std::vector<std::vector<TokenId>> corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = StripCarriageReturn(line);
    auto tab = view.find('\t');
    if (tab != std::string_view::npos) view = view.substr(tab + 1);
    std::string text = CleanPhrase(view);
    if (text.empty()) continue;
    try {
      corpus.push_back(TokenizePhrase(text, vocab));
    } catch (const Error& e) {
      throw Error(e.code(), path + ": " + e.message(), line_no);
    }
    corpus.back().push_back(vocab.eos());
  }
  return corpus;
}

// `uniform`, `toy:<corpus>`, `channel:<corpus>`, `exec:<cmd>`, `unix:<path>`.
inline ScorerFactory MakeScorerFactory(const std::string& spec,
                                       const Vocabulary& vocab,
                                       const RunConfig& config) {
  ScorerFactory f;
  const std::size_t v = vocab.size();
  if (spec == "uniform") {
    f.make = [v] { return std::make_unique<ToyScorer>(ToyScorer::Uniform(v)); };
  } else if (spec.rfind("toy:", 0) == 0 || spec.rfind("channel:", 0) == 0) {
    const bool channel = spec.rfind("channel:", 0) == 0;
    const std::string path = spec.substr(channel ? 8 : 4);
    auto prior = std::make_shared<const ToyScorer>(ToyScorer::Train(
        ReadTrainingCorpus(path, vocab), config.toy_order, config.toy_alpha, v));
    f.inputs.push_back(path);
    if (channel) {
      const double confidence = config.channel_confidence;
      const TokenId eos = vocab.eos();
      f.make = [prior, confidence, eos]() -> std::unique_ptr<Scorer> {
        return std::make_unique<NoisyChannelScorer>(prior, confidence, eos);
      };
    } else {
      f.make = [prior]() -> std::unique_ptr<Scorer> {
        return std::make_unique<SharedToyScorer>(prior);
      };
    }
  } else if (spec.rfind("exec:", 0) == 0 || spec.rfind("unix:", 0) == 0) {
    f.make = [spec, v]() -> std::unique_ptr<Scorer> {
      try {
        return ConnectExternalScorer(spec, v);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kHandshakeMismatch) throw;
        throw Error(ErrorCode::kScorerFailure,
                    "cannot reach scorer '" + spec + "': " + e.what());
      }
    };
  } else {
    throw Error(ErrorCode::kParseError, "unknown scorer spec '" + spec + "'");
  }
  return f;
}

inline RunManifest DecodeManifest(const DecodeOptions& o) {
  RunManifest m;
  m.command = "decode";
  m.options = {{"tree", o.tree},         {"vocab", o.vocab},
               {"scorer", o.scorer},     {"config", o.config},
               {"utterances", o.utterances}, {"out", o.out},
               {"jobs", o.jobs}};
  return m;
}

inline int RunDecode(const DecodeOptions& options, std::ostream& out,
                     std::ostream& err) {
  namespace fs = std::filesystem;
  RunManifest manifest = DecodeManifest(options);
  Vocabulary vocab = Vocabulary::Characters();
  std::optional<PrefixTree> tree;
  RunConfig config;
  std::vector<IdText> utterances;
  std::vector<std::vector<TokenId>> observations;
  ScorerFactory factory;
  try {
    config = ResolveConfig(options.config, &manifest);
    vocab = ReadVocabularyFile(options.vocab);
    config.decode.Validate(vocab.size());
    manifest.AddInput(options.vocab);
    if (!options.tree.empty()) {
      std::ifstream in = OpenInput(options.tree, "tree");
      tree = PrefixTree::Load(in);
      manifest.AddInput(options.tree);
    }
    utterances = ReadIdTextFile(options.utterances);
    manifest.AddInput(options.utterances);
    for (const IdText& u : utterances) {
      try {
        observations.push_back(TokenizePhrase(CleanPhrase(u.text), vocab));
      } catch (const Error& e) {
        throw Error(ErrorCode::kParseError,
                    options.utterances + ": utterance " + u.id + ": " + e.what());
      }
    }
    factory = MakeScorerFactory(options.scorer, vocab, config);
    for (const std::string& p : factory.inputs) manifest.AddInput(p);
    fs::create_directories(fs::path(options.out) / "traces");
  } catch (const Error& e) {
    err << "decode: " << Describe(e) << '\n';
    return ExitCodeFor(e);
  } catch (const fs::filesystem_error& e) {
    err << "decode: " << e.what() << '\n';
    return kExitParse;
  }
  manifest.config = config.Snapshot();

  const PrefixTree* tree_ptr = tree ? &*tree : nullptr;
  BiasedDecoder decoder(tree_ptr, vocab.specials(), config.decode);
  struct Outcome {
    std::optional<DecodeResult> result;
    std::string error;
  };
  std::vector<Outcome> outcomes(utterances.size());
  std::atomic<std::size_t> next{0};
  // A failed utterance is marked and skipped; its session is discarded and
  // the next utterance opens a fresh one.
  auto worker = [&] {
    std::unique_ptr<Scorer> scorer;
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= utterances.size()) return;
      try {
        if (!scorer) scorer = factory.make();
        scorer->BeginUtterance({utterances[i].id, observations[i]});
        if (config.decode.beam_width == 1) {
          outcomes[i].result = decoder.Greedy(*scorer);
        } else {
          outcomes[i].result = std::move(decoder.Beam(*scorer).front());
        }
        scorer->EndUtterance();
      } catch (const Error& e) {
        outcomes[i].error = Describe(e);
        scorer.reset();
      }
    }
  };
  const int jobs = std::max(1, options.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  // Outputs are written in input order whatever the completion order.
  std::string hyps;
  FallbackStats stats;
  std::size_t failures = 0;
  try {
    for (std::size_t i = 0; i < utterances.size(); ++i) {
      const Outcome& o = outcomes[i];
      if (!o.error.empty()) {
        ++failures;
        hyps += utterances[i].id + "\tFAILED\n";
        err << "decode: utterance " << utterances[i].id << ": " << o.error << '\n';
        continue;
      }
      hyps += utterances[i].id + '\t' +
              Detokenize(o.result->hypothesis.tokens, vocab) + '\n';
      std::ostringstream trace;
      WriteTrace(o.result->trace, trace);
      WriteFileOrThrow(
          (fs::path(options.out) / "traces" / TraceFileName(utterances[i].id)).string(),
          trace.str());
      stats.Add(o.result->trace);
    }
    WriteFileOrThrow((fs::path(options.out) / "hypotheses.txt").string(), hyps);
    std::ostringstream summary;
    summary << "utterances = " << utterances.size() << '\n'
            << "failed = " << failures << '\n'
            << "steps = " << stats.steps << '\n'
            << "fallback-steps = " << stats.fallbacks << '\n'
            << "fallback-rate = " << FormatFixed(stats.rate()) << '\n';
    WriteFileOrThrow((fs::path(options.out) / "summary.txt").string(), summary.str());
    manifest.timestamp = UtcTimestamp();
    manifest.Write((fs::path(options.out) / "manifest.json").string());
  } catch (const Error& e) {
    err << "decode: " << Describe(e) << '\n';
    return ExitCodeFor(e);
  }
  out << "fallback-rate = " << FormatFixed(stats.rate()) << '\n';
  return failures > 0 ? kExitScorer : kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  std::string refs;
  std::string hyps;
  std::string gazetteer;  // optional
  std::string segments;   // optional, needs triggers
  std::string triggers;   // optional, needs segments
  std::string traces;     // optional directory of decode traces
  std::vector<std::string> config;
  std::string out;
};

inline RunManifest EvalManifest(const EvalOptions& o) {
  RunManifest m;
  m.command = "eval";
  m.options = {{"refs", o.refs},         {"hyps", o.hyps},
               {"gazetteer", o.gazetteer}, {"segments", o.segments},
               {"triggers", o.triggers},   {"traces", o.traces},
               {"config", o.config},       {"out", o.out}};
  return m;
}

// Hypothesis text for segment k of recording `id`: the hypothesis with id
// `<id>/<k>`, or `<id>` itself when the recording has a single segment.
inline std::vector<TranscriptSegment> HypothesisSegments(
    const std::string& id, const std::vector<TranscriptSegment>& ref_segments,
    const std::map<std::string, std::string>& hyps) {
  std::vector<TranscriptSegment> out = ref_segments;
  for (std::size_t k = 0; k < out.size(); ++k) {
    auto it = hyps.find(id + "/" + std::to_string(k));
    if (it == hyps.end() && out.size() == 1) it = hyps.find(id);
    if (it == hyps.end()) {
      throw Error(ErrorCode::kIdMismatch,
                  "no hypothesis for segment " + id + "/" + std::to_string(k));
    }
    out[k].text = it->second;
  }
  return out;
}

inline int RunEval(const EvalOptions& options, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  try {
    RunManifest manifest = EvalManifest(options);
    RunConfig config = ResolveConfig(options.config, &manifest);
    manifest.config = config.Snapshot();
    if (options.segments.empty() != options.triggers.empty()) {
      throw Error(ErrorCode::kParseError,
                  "--segments and --triggers must be given together");
    }

    std::vector<IdText> refs = ReadIdTextFile(options.refs);
    std::vector<IdText> hyps = ReadIdTextFile(options.hyps);
    manifest.AddInput(options.refs);
    manifest.AddInput(options.hyps);
    std::map<std::string, std::string> ref_map, hyp_map;
    for (const IdText& r : refs) ref_map[r.id] = r.text;
    for (const IdText& h : hyps) hyp_map[h.id] = h.text;
    CheckSameIds(ref_map, hyp_map);

    std::ostringstream details;
    WerBreakdown total, raw_total;
    std::size_t skipped = 0;
    std::map<std::string, EntitySet> gold_entities, predicted_entities;
    std::vector<GazetteerEntry> gazetteer;
    if (!options.gazetteer.empty()) {
      gazetteer = ReadGazetteer(options.gazetteer);
      manifest.AddInput(options.gazetteer);
    }
    for (const IdText& r : refs) {
      const std::string& hyp = hyp_map.at(r.id);
      details << r.id;
      if (NormalizeForWer(r.text).empty()) {
        ++skipped;
        details << "\t-\t-\t-\t0\t-";
      } else {
        WerBreakdown w = ComputeWer(r.text, hyp);
        total += w;
        if (!SplitWords(r.text).empty()) raw_total += ComputeRawWer(r.text, hyp);
        details << '\t' << w.substitutions << '\t' << w.deletions << '\t'
                << w.insertions << '\t' << w.reference_words << '\t'
                << FormatFixed(w.wer());
      }
      if (!gazetteer.empty()) {
        gold_entities[r.id] =
            ToEntitySet(ExtractEntities(r.text, gazetteer, config.fuzzy_threshold));
        predicted_entities[r.id] =
            ToEntitySet(ExtractEntities(hyp, gazetteer, config.fuzzy_threshold));
        details << '\t'
                << (gold_entities[r.id] == predicted_entities[r.id] ? "1" : "0");
      }
      details << '\n';
    }

    std::ostringstream report;
    report << "utterances = " << refs.size() << '\n'
           << "wer = " << FormatFixed(total.wer()) << '\n'
           << "S = " << total.substitutions << '\n'
           << "D = " << total.deletions << '\n'
           << "I = " << total.insertions << '\n'
           << "N = " << total.reference_words << '\n'
           << "raw-wer = " << FormatFixed(raw_total.wer()) << '\n';
    if (skipped > 0) report << "empty-references = " << skipped << '\n';

    if (!options.traces.empty()) {
      FallbackStats stats;
      for (const IdText& h : hyps) {
        const std::string path =
            (fs::path(options.traces) / TraceFileName(h.id)).string();
        std::ifstream in = OpenInput(path, "trace");
        stats.Add(ReadTrace(in, path));
        manifest.AddInput(path);
      }
      report << "fallback-rate = " << FormatFixed(stats.rate()) << '\n';
    }
    if (!gazetteer.empty()) {
      report << "entity-accuracy = "
             << FormatFixed(EntityAccuracy(predicted_entities, gold_entities)) << '\n';
    }
    if (!options.segments.empty()) {
      auto segments = ReadSegmentFile(options.segments);
      std::vector<Trigger> triggers = ReadTriggers(options.triggers);
      manifest.AddInput(options.segments);
      manifest.AddInput(options.triggers);
      std::map<std::string, KeywordTiming> gold, predicted;
      for (const Trigger& t : triggers) {
        auto it = segments.find(t.utterance_id);
        if (it == segments.end()) {
          throw Error(ErrorCode::kIdMismatch, "trigger " + t.id +
                                                  " names unknown utterance " +
                                                  t.utterance_id);
        }
        auto time_of = [&](const std::vector<TranscriptSegment>& segs) {
          KeywordTiming timing{t.time, std::nullopt};
          std::vector<KeywordHit> hit = ExtractKeywords(segs, {t.keyword});
          if (!hit.empty()) timing.hit_time = hit.front().timestamp;
          return timing;
        };
        gold[t.id] = time_of(it->second);
        predicted[t.id] = time_of(HypothesisSegments(it->first, it->second, hyp_map));
      }
      report << "response-mse = "
             << FormatFixed(ResponseTimeMse(predicted, gold, config.miss_penalty))
             << '\n';
    }

    fs::create_directories(options.out);
    WriteFileOrThrow((fs::path(options.out) / "report.txt").string(), report.str());
    WriteFileOrThrow((fs::path(options.out) / "details.txt").string(), details.str());
    manifest.timestamp = UtcTimestamp();
    manifest.Write((fs::path(options.out) / "manifest.json").string());
    out << report.str();
    return kExitOk;
  } catch (const Error& e) {
    err << "eval: " << Describe(e) << '\n';
    return ExitCodeFor(e);
  } catch (const fs::filesystem_error& e) {
    err << "eval: " << e.what() << '\n';
    return kExitParse;
  }
}

// ---------------------------------------------------------------------------
// rerun

// Repeats the run a manifest describes after checking its input digests.
// `out_override` redirects the outputs (tree path for build, directory
// otherwise).
inline int RunFromManifest(const std::string& manifest_path,
                           const std::string& out_override, std::ostream& out,
                           std::ostream& err) {
  RunManifest m;
  try {
    m = RunManifest::Read(manifest_path);
    m.VerifyInputs();
  } catch (const Error& e) {
    err << "rerun: " << Describe(e) << '\n';
    return ExitCodeFor(e);
  }
  auto str = [&](const char* key) { return m.options.at(key).get<std::string>(); };
  try {
    if (m.command == "build") {
      BuildOptions o{str("biasing-list"), str("vocab"), str("out-tree")};
      if (!out_override.empty()) o.out_tree = out_override;
      return RunBuild(o, out, err);
    }
    if (m.command == "decode") {
      DecodeOptions o;
      o.tree = str("tree");
      o.vocab = str("vocab");
      o.scorer = str("scorer");
      o.config = m.options.at("config").get<std::vector<std::string>>();
      o.utterances = str("utterances");
      o.out = out_override.empty() ? str("out") : out_override;
      o.jobs = m.options.at("jobs").get<int>();
      return RunDecode(o, out, err);
    }
    if (m.command == "eval") {
      EvalOptions o;
      o.refs = str("refs");
      o.hyps = str("hyps");
      o.gazetteer = str("gazetteer");
      o.segments = str("segments");
      o.triggers = str("triggers");
      o.traces = str("traces");
      o.config = m.options.at("config").get<std::vector<std::string>>();
      o.out = out_override.empty() ? str("out") : out_override;
      return RunEval(o, out, err);
    }
  } catch (const nlohmann::json::exception& e) {
    err << "rerun: bad manifest options: " << e.what() << '\n';
    return kExitParse;
  }
  err << "rerun: unknown command '" << m.command << "'\n";
  return kExitParse;
}

}  // namespace cbias::cli
