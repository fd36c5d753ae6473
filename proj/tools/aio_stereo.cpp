/*
 * Copyright 2026 The aio-stereo Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "aio/commands.hpp"
#include "aio/data_gen.hpp"
#include "aio/errors.hpp"

namespace fs = std::filesystem;
using namespace aio;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string ablation;
  bool force = false;
  std::string checkpoint, manifest, sample, out, inject_fault;
};

// Config, overrides and validation; nothing touches the disk before this
// returns.
RunConfig resolve(const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (o.seed) {
    // the data seed follows the run seed unless the config pins its own
    if (cfg.data.seed == cfg.seed) cfg.data.seed = *o.seed;
    cfg.seed = *o.seed;
  }
  if (!o.ablation.empty()) cfg.train.ablation = parse_ablation(o.ablation);
  cfg.validate();
  return cfg;
}

fs::path default_checkpoint(const Options& o, const RunConfig& cfg) {
  return o.checkpoint.empty() ? cfg.output_dir / "checkpoint.ftck" : fs::path(o.checkpoint);
}

fs::path default_manifest(const Options& o, const RunConfig& cfg) {
  return o.manifest.empty() ? dataset_paths(cfg.data).val : fs::path(o.manifest);
}

int run(const std::string& cmd, const Options& o) {
  if (cmd == "gradcheck") return cmd_gradcheck(std::cout, o.inject_fault);
  const RunConfig cfg = resolve(o);
  if (cmd == "gen-data") return cmd_gen_data(cfg, o.force, std::cout);
  if (cmd == "train") return cmd_train(cfg, std::cout);
  if (cmd == "eval") {
    EvalRequest req;
    req.checkpoint = default_checkpoint(o, cfg);
    req.manifest = default_manifest(o, cfg);
    req.output_dir = o.out.empty() ? cfg.output_dir / "eval" : fs::path(o.out);
    req.eval = cfg.eval;
    if (!o.config.empty()) req.expected_model = &cfg.model;
    cmd_eval(req, std::cout);
    return kExitOk;
  }
  // export-gates
  const DatasetManifest m = read_manifest(default_manifest(o, cfg));
  const ManifestItem* item = nullptr;
  for (const auto& it : m.items)
    if (o.sample.empty() || it.id == o.sample) {
      item = &it;
      break;
    }
  if (!item) throw ContractError("sample '" + o.sample + "' is not in the manifest");
  const fs::path dir = o.out.empty() ? cfg.output_dir / "gates" : fs::path(o.out);
  for (const auto& p : cmd_export_gates(default_checkpoint(o, cfg), load_sample(*item), dir))
    std::cout << p.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stereo matching with selective multi-teacher knowledge transfer"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the configured seed")->each([&](const std::string&) { o.seed = seed; });
  };
  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic stereo dataset");
  add_common(gen);
  gen->add_flag("--force", o.force, "Regenerate even if the manifests exist");

  auto* train = app.add_subcommand("train", "Train a model and write checkpoints and logs");
  add_common(train);
  train->add_option("--ablation", o.ablation, "full | no_selection | no_distillation | no_fusion | baseline");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
  add_common(eval);
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint (default <output_dir>/checkpoint.ftck)");
  eval->add_option("--manifest", o.manifest, "Manifest (default the validation split)");
  eval->add_option("--out", o.out, "Output directory (default <output_dir>/eval)");

  auto* gates = app.add_subcommand("export-gates", "Write per-teacher gate maps for one sample");
  add_common(gates);
  gates->add_option("--checkpoint", o.checkpoint, "Checkpoint (default <output_dir>/checkpoint.ftck)");
  gates->add_option("--manifest", o.manifest, "Manifest holding the sample (default the validation split)");
  gates->add_option("--sample", o.sample, "Sample id (default the first manifest entry)");
  gates->add_option("--out", o.out, "Output directory (default <output_dir>/gates)");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
  grad->add_option("--inject-fault", o.inject_fault, "Add a deliberately broken op")
      ->check(CLI::IsMember({"bad_backward"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    return run(cmd, o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << cmd << " failed: " << e.what() << "\n";
    return kExitFailure;
  }
}
