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

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cbias/commands.h"

int main(int argc, char** argv) {
  CLI::App app{"Prefix-tree contextual biasing for autoregressive decoders"};
  app.set_version_flag("--version", std::string(cbias::kToolVersion));
  app.require_subcommand(1);

  cbias::cli::BuildOptions build;
  CLI::App* build_cmd =
      app.add_subcommand("build", "Clean a biasing list and compile its prefix tree");
  build_cmd->add_option("--biasing-list", build.biasing_list, "One phrase per line")
      ->required();
  build_cmd->add_option("--vocab", build.vocab, "Vocabulary file")->required();
  build_cmd->add_option("--out-tree", build.out_tree, "Tree dump to write")->required();

  cbias::cli::DecodeOptions decode;
  CLI::App* decode_cmd =
      app.add_subcommand("decode", "Decode utterances with or without biasing");
  decode_cmd->add_option("--tree", decode.tree, "Tree dump (omit for unbiased)");
  decode_cmd->add_option("--vocab", decode.vocab, "Vocabulary file")->required();
  decode_cmd
      ->add_option("--scorer", decode.scorer,
                   "uniform | toy:<corpus> | channel:<corpus> | exec:<cmd> | "
                   "unix:<socket>")
      ->required();
  decode_cmd->add_option("--config", decode.config,
                         "Config file or key=value override (repeatable)");
  decode_cmd
      ->add_option("--utterances", decode.utterances, "<id>\\t<observation> lines")
      ->required();
  decode_cmd->add_option("--out", decode.out, "Output directory")->required();
  decode_cmd->add_option("--jobs", decode.jobs, "Parallel utterances")
      ->check(CLI::PositiveNumber);

  cbias::cli::EvalOptions eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score hypotheses against references");
  eval_cmd->add_option("--refs", eval.refs, "<id>\\t<text> references")->required();
  eval_cmd->add_option("--hyps", eval.hyps, "<id>\\t<text> hypotheses")->required();
  eval_cmd->add_option("--gazetteer", eval.gazetteer, "<phrase>\\t<label> entities");
  eval_cmd->add_option("--segments", eval.segments, "Timed reference segments");
  eval_cmd->add_option("--triggers", eval.triggers, "Keyword triggers");
  eval_cmd->add_option("--traces", eval.traces, "Directory of decode traces");
  eval_cmd->add_option("--config", eval.config,
                       "Config file or key=value override (repeatable)");
  eval_cmd->add_option("--out", eval.out, "Output directory")->required();

  std::string manifest;
  std::string rerun_out;
  CLI::App* rerun_cmd =
      app.add_subcommand("rerun", "Repeat a run from its manifest");
  rerun_cmd->add_option("manifest", manifest, "manifest.json of a previous run")
      ->required();
  rerun_cmd->add_option("--out", rerun_out, "Write outputs here instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : cbias::cli::kExitUsage;
  }

  if (*build_cmd) return cbias::cli::RunBuild(build, std::cout, std::cerr);
  if (*decode_cmd) return cbias::cli::RunDecode(decode, std::cout, std::cerr);
  if (*eval_cmd) return cbias::cli::RunEval(eval, std::cout, std::cerr);
  return cbias::cli::RunFromManifest(manifest, rerun_out, std::cout, std::cerr);
}
