// Command implementations behind the ftm executable. Each command writes only
// under its output directory and reports progress on `log`.
//
// Checkpoint directory layout:
//   model.ftmc         parameters
//   config.ini         resolved run configuration
//   train_log.csv      one row per step
//   run_manifest.json

#ifndef FTM_COMMANDS_H_
#define FTM_COMMANDS_H_

#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ftm/bench.h"
#include "ftm/checkpoint.h"
#include "ftm/config.h"
#include "ftm/eval.h"
#include "ftm/run_manifest.h"
#include "ftm/train.h"

namespace ftm {

struct GenDataOptions {
  std::string spec_path;  // INI with a [corpus] section; empty for defaults
  std::vector<std::string> overrides;
  std::string from_manifest;
  std::string out_dir;
  bool force = false;
};

// Returns the corpus content hash.
std::string cmd_gen_data(const GenDataOptions& opt, std::ostream& log);

struct TrainOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string from_manifest;  // replaces config_path, overrides and corpus_dir
  std::string corpus_dir;
  std::string init_dir;  // start encoder and phone head from this checkpoint
  std::string out_dir;
  bool force = false;
};

struct TrainSummary {
  RunConfig config;
  std::optional<TrainResult> pretrain;
  std::optional<TrainResult> finetune;
};

// Phonetic pre-training (skipped when init_dir is set or pretrain_steps is
// 0), then discriminative fine-tuning (skipped when finetune_steps is 0).
TrainSummary cmd_train(const TrainOptions& opt, std::ostream& log);

struct LoadedModel {
  RunConfig config;
  std::unique_ptr<FtmModel<float>> model;
};

// Throws ConfigError listing both geometries when the checkpoint was not
// produced by a model of this configuration.
void check_checkpoint_fits(const Checkpoint& ck, const ModelConfig& cfg);

// config.ini of the checkpoint, then overrides.
LoadedModel load_checkpoint_dir(const std::string& dir,
                                const std::vector<std::string>& overrides = {});

struct EvalOptions {
  std::string checkpoint_dir;
  std::string corpus_dir;
  std::vector<std::string> overrides;
  std::string op;         // "vt" or "tb"; empty uses the preset of each eval set
  std::string train_tag;  // empty: train_sets from the checkpoint config
  std::vector<Invocation> eval_sets{Invocation::kVt, Invocation::kTb};
  Split split = Split::kEval;
  std::string results_dir = "results";
  bool write_curves = true;
};

struct MetricRecord {
  std::string metric;
  Invocation invocation;
  std::string train_sets;
  SummaryKind kind;
  double value;
};

std::vector<MetricRecord> cmd_eval(const EvalOptions& opt, std::ostream& log);

void write_metrics_csv(std::ostream& out, const std::vector<MetricRecord>& rows);

struct TrajOptions {
  std::string checkpoint_dir;
  std::string corpus_dir;
  Split split = Split::kEval;
  std::string out_csv;
};

void cmd_traj(const TrajOptions& opt, std::ostream& log);

struct BenchOptions {
  std::vector<SummaryKind> kinds{SummaryKind::kStcn, SummaryKind::kSlstm, SummaryKind::kSave,
                                 SummaryKind::kA2aLstm};
  std::vector<int> lengths{133};  // 4 s at 30 ms
  int repeats = 5;
  std::uint64_t seed = 1;
  std::vector<std::string> overrides;  // model.* keys
  std::string results_dir = "results";
};

std::vector<BenchRow> cmd_bench(const BenchOptions& opt, std::ostream& log);

struct MatrixOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string corpus_dir;
  std::string out_dir;
  std::vector<SummaryKind> kinds{SummaryKind::kStcn, SummaryKind::kSlstm, SummaryKind::kSave,
                                 SummaryKind::kA2aLstm};
  std::vector<std::string> train_tags{"vt", "tb", "vt+tb"};
  bool force = false;
};

struct MatrixRow {
  SummaryKind kind;
  std::string train_sets;
  Invocation eval_set;
  double eer, far, frr, frr_target, threshold;
};

// One shared pre-training run, then one fine-tune per (kind, train set) and
// an evaluation on each eval set. Writes <out_dir>/results/matrix.csv.
std::vector<MatrixRow> cmd_matrix(const MatrixOptions& opt, std::ostream& log);

void write_matrix_csv(std::ostream& out, const std::vector<MatrixRow>& rows);

}  // namespace ftm

#endif  // FTM_COMMANDS_H_
