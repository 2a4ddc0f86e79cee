// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

// xlkd command line: data generation, source training, transfer runs,
// baselines, evaluation and reports over one run directory.

#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "xlkd/cli/workspace.hpp"

namespace {

using xlkd::cli::CommandResult;
using xlkd::cli::RunConfig;
using xlkd::cli::Workspace;

struct Overrides {
  std::string config;
  std::optional<std::string> out;
  std::optional<uint64_t> seed;
  std::optional<std::string> task;
  std::optional<std::string> arch;
  std::optional<std::string> target_arch;
  std::optional<int> pivot_size;
  bool balanced = false;
  bool augment = false;
  bool grid = false;
};

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
  if (o.out) c.out = *o.out;
  if (o.seed) c.seed = *o.seed;
  if (o.task) c.task = xlkd::models::parse_task(*o.task);
  if (o.arch) c.arch = xlkd::models::parse_family(*o.arch);
  if (o.target_arch) c.target_arch = xlkd::models::parse_family(*o.target_arch);
  if (o.pivot_size) {
    if (*o.pivot_size < 0 || *o.pivot_size > 1) throw xlkd::SchemaError("--pivot-size must be 0 or 1");
    c.pivot.size = *o.pivot_size;
  }
  c.balanced = c.balanced || o.balanced;
  c.augment = c.augment || o.augment;
  return c;
}

void print(const CommandResult& r) {
  for (const auto& row : r.rows) {
    std::printf("%-26s %-24s", row.label.c_str(), (row.source_arch + "->" + row.target_arch).c_str());
    if (row.metrics.source_score) std::printf(" source %.4f", *row.metrics.source_score);
    for (const auto& [lang, v] : row.metrics.scores) std::printf(" %s %.4f", lang.c_str(), v);
    if (!row.metrics.scores.empty()) std::printf(" avg %.4f", row.metrics.average());
    std::printf("\n");
  }
  std::printf("label reads outside test: %llu (unannotated %llu), denied %llu\n",
              static_cast<unsigned long long>(r.gate.successful), static_cast<unsigned long long>(r.gate.unannotated),
              static_cast<unsigned long long>(r.gate.denied));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xlkd: label-free cross-lingual transfer by two-step distillation"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  app.add_option("--config", o.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--out", o.out, "Run directory");
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--task", o.task, "sentence or word")->check(CLI::IsMember({"sentence", "word"}));
  app.add_option("--arch", o.arch, "Source architecture")->check(CLI::IsMember({"transformer", "bilstm", "cnn"}));
  app.add_option("--target-arch", o.target_arch, "Target architecture")
      ->check(CLI::IsMember({"transformer", "bilstm", "cnn"}));
  app.add_option("--pivot-size", o.pivot_size, "Pivot size class, 0 or 1");
  app.add_flag("--balanced", o.balanced, "Add translated copies to the first distillation step");
  app.add_flag("--augment", o.augment, "Mix target paraphrases into the second step");
  app.add_flag("--grid", o.grid, "Run all 3x3 source/target architecture pairs");

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic benchmark");
  auto* src = app.add_subcommand("train-source", "Train the off-the-shelf source model");
  auto* pipe = app.add_subcommand("pipeline", "Two-step distillation to every target language");
  auto* base = app.add_subcommand("baseline", "Translation baselines");
  std::string which;
  base->add_option("which", which, "translate-test or translate-train-pseudo")
      ->required()
      ->check(CLI::IsMember({"translate-test", "translate-train-pseudo"}));
  auto* ref = app.add_subcommand("reference", "Gold-supervised reference");
  std::string ref_which;
  ref->add_option("which", ref_which, "gold-supervised")->required()->check(CLI::IsMember({"gold-supervised"}));
  auto* ev = app.add_subcommand("eval", "Score a saved model on a test split");
  std::string model_path, lang;
  ev->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  ev->add_option("--lang", lang, "Language of the test split")->required();
  auto* rep = app.add_subcommand("report", "Render report.json, report.md and grid.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig config = resolve(o);
    Workspace ws(config);
    const auto task = config.task;
    if (gen->parsed()) {
      auto m = ws.gen_data();
      for (const auto& [l, splits] : m["splits"].items())
        for (const auto& [split, info] : splits.items())
          std::printf("%s/%s: %zu\n", l.c_str(), split.c_str(), info["count"].get<std::size_t>());
    } else if (src->parsed()) {
      print(ws.train_source(task, config.arch));
    } else if (pipe->parsed()) {
      xlkd::distill::PipelineOptions opts{config.balanced, config.augment};
      if (o.grid) {
        if (config.balanced || config.augment) throw xlkd::SchemaError("--grid runs the plain pipeline only");
        print(ws.pipeline_grid(task, config.pivot.size));
      } else {
        print(ws.pipeline(task, config.arch, config.target_arch, opts, config.pivot.size));
      }
    } else if (base->parsed()) {
      print(which == "translate-test" ? ws.translate_test(task, config.arch)
                                      : ws.translate_train_pseudo(task, config.arch, config.target_arch));
    } else if (ref->parsed()) {
      print(ws.gold_supervised(task, config.target_arch, config.pivot.size));
    } else if (ev->parsed()) {
      std::printf("%s %s %.6f\n", lang.c_str(), xlkd::models::to_string(task).c_str(), ws.evaluate(model_path, lang, task));
    } else if (rep->parsed()) {
      ws.report();
      std::printf("%s\n", (config.out / "report.md").string().c_str());
    }
    return 0;
  } catch (const xlkd::cli::GateViolation& e) {
    std::cerr << "label gate violation: " << e.what() << "\n";
    return 2;
  } catch (const xlkd::LabelAccessError& e) {
    std::cerr << "label gate violation: " << e.what() << "\n";
    return 2;
  } catch (const xlkd::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 3;
  } catch (const xlkd::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
