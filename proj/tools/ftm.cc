// ftm: data generation, training, evaluation, trajectories and benchmarks.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 data error,
// 4 numeric failure, 1 anything else.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "ftm/commands.h"
#include "ftm/errors.h"

namespace {

using namespace ftm;

std::vector<SummaryKind> parse_kinds(const std::vector<std::string>& names) {
  std::vector<SummaryKind> out;
  for (const auto& n : names) out.push_back(parse_summary_kind(n));
  return out;
}

template <typename Fn>
auto as_config_error(Fn&& fn) {
  try {
    return fn();
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

std::vector<Invocation> parse_sets(const std::vector<std::string>& names) {
  std::vector<Invocation> out;
  for (const auto& n : names) out.push_back(as_config_error([&] { return parse_invocation(n); }));
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"False trigger mitigation: streaming encoders and sequence summary layers"};
  app.require_subcommand(1);
  std::ostream& log = std::cout;

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic corpus directory");
  gen_cmd->add_option("--spec", gen.spec_path, "INI file with a [corpus] section")
      ->check(CLI::ExistingFile);
  gen_cmd->add_option("--set", gen.overrides, "corpus.key=value override (repeatable)");
  gen_cmd->add_option("--from-manifest", gen.from_manifest, "Regenerate from a run_manifest.json");
  gen_cmd->add_option("--out", gen.out_dir, "Output directory")->required();
  gen_cmd->add_flag("--force", gen.force, "Overwrite a non-empty output directory");

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Pre-train and fine-tune one model");
  train_cmd->add_option("--config", train.config_path, "INI run configuration")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--set", train.overrides, "section.key=value override (repeatable)");
  train_cmd->add_option("--from-manifest", train.from_manifest,
                        "Repeat the run recorded in a run_manifest.json");
  train_cmd->add_option("--corpus", train.corpus_dir, "Corpus directory");
  train_cmd->add_option("--init", train.init_dir,
                        "Checkpoint directory to take the encoder and phone head from");
  train_cmd->add_option("--out", train.out_dir, "Checkpoint directory to write")->required();
  train_cmd->add_flag("--force", train.force, "Overwrite a non-empty output directory");

  EvalOptions ev;
  std::vector<std::string> eval_sets{"vt", "tb"};
  std::string eval_split = "eval";
  auto* eval_cmd = app.add_subcommand("eval", "EER, FAR at an operating FRR, DET and "
                                              "early-mitigation curves");
  eval_cmd->add_option("--checkpoint", ev.checkpoint_dir, "Checkpoint directory")->required();
  eval_cmd->add_option("--corpus", ev.corpus_dir, "Corpus directory")->required();
  eval_cmd->add_option("--op", ev.op, "Operating point: vt (FRR 1%) or tb (FRR 3%); "
                                      "default matches each eval set")
      ->check(CLI::IsMember({"vt", "tb"}));
  eval_cmd->add_option("--train-tag", ev.train_tag, "Label for the train_sets column");
  eval_cmd->add_option("--eval-sets", eval_sets, "Invocation types to evaluate")->delimiter(',');
  eval_cmd->add_option("--split", eval_split, "Corpus split")
      ->check(CLI::IsMember({"train", "eval"}));
  eval_cmd->add_option("--set", ev.overrides, "section.key=value applied to the checkpoint "
                                              "configuration");
  eval_cmd->add_option("--results", ev.results_dir, "Directory for CSV output");

  TrajOptions traj;
  std::string traj_split = "eval";
  auto* traj_cmd = app.add_subcommand("traj", "Export per-emission score trajectories");
  traj_cmd->add_option("--checkpoint", traj.checkpoint_dir, "Checkpoint directory")->required();
  traj_cmd->add_option("--corpus", traj.corpus_dir, "Corpus directory")->required();
  traj_cmd->add_option("--split", traj_split, "Corpus split")
      ->check(CLI::IsMember({"train", "eval"}));
  traj_cmd->add_option("--out", traj.out_csv, "CSV file to write")->required();

  BenchOptions bench;
  std::vector<std::string> bench_kinds{"stcn", "slstm", "save", "a2a"};
  auto* bench_cmd = app.add_subcommand("bench", "Peak memory and latency of inference");
  bench_cmd->add_option("--kinds", bench_kinds, "Summary kinds")->delimiter(',');
  bench_cmd->add_option("--lengths", bench.lengths, "Input lengths in frames")->delimiter(',');
  bench_cmd->add_option("--repeats", bench.repeats, "Timed runs per row");
  bench_cmd->add_option("--seed", bench.seed, "Weight and input seed");
  bench_cmd->add_option("--set", bench.overrides, "model.key=value override (repeatable)");
  bench_cmd->add_option("--results", bench.results_dir, "Directory for CSV output");

  MatrixOptions matrix;
  std::vector<std::string> matrix_kinds{"stcn", "slstm", "save", "a2a"};
  auto* matrix_cmd = app.add_subcommand("matrix", "Train sets x eval sets x summary kinds grid");
  matrix_cmd->add_option("--config", matrix.config_path, "INI run configuration")
      ->check(CLI::ExistingFile);
  matrix_cmd->add_option("--set", matrix.overrides, "section.key=value override (repeatable)");
  matrix_cmd->add_option("--corpus", matrix.corpus_dir, "Corpus directory")->required();
  matrix_cmd->add_option("--out", matrix.out_dir, "Output directory")->required();
  matrix_cmd->add_option("--kinds", matrix_kinds, "Summary kinds")->delimiter(',');
  matrix_cmd->add_option("--train-sets", matrix.train_tags, "Train set tags")->delimiter(',');
  matrix_cmd->add_flag("--force", matrix.force, "Overwrite a non-empty output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (gen_cmd->parsed()) {
    cmd_gen_data(gen, log);
  } else if (train_cmd->parsed()) {
    cmd_train(train, log);
  } else if (eval_cmd->parsed()) {
    ev.eval_sets = parse_sets(eval_sets);
    ev.split = as_config_error([&] { return parse_split(eval_split); });
    cmd_eval(ev, log);
  } else if (traj_cmd->parsed()) {
    traj.split = as_config_error([&] { return parse_split(traj_split); });
    cmd_traj(traj, log);
  } else if (bench_cmd->parsed()) {
    bench.kinds = parse_kinds(bench_kinds);
    cmd_bench(bench, log);
  } else if (matrix_cmd->parsed()) {
    matrix.kinds = parse_kinds(matrix_kinds);
    cmd_matrix(matrix, log);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ftm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ftm::ShapeError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ftm::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const ftm::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
