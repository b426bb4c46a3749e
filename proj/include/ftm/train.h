// Training loops: phonetic (CTC-only) pre-training, then joint
// discriminative + phonetic fine-tuning on a chosen set of invocation types.
//
// A batch is a sum of per-utterance graphs, so utterances are never padded.
// Gradients are accumulated over the batch, clipped by global norm, and
// applied with Adam.

#ifndef FTM_TRAIN_H_
#define FTM_TRAIN_H_

#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "ftm/model.h"
#include "ftm/synthdata.h"

namespace ftm {

struct TrainConfig {
  double lr = 5e-4;
  double clip_norm = 20.0;
  int batch_size = 8;
  int pretrain_steps = 2000;
  int finetune_steps = 3000;
  double lambda_ctc = 1.0;
  std::vector<Invocation> train_sets{Invocation::kVt, Invocation::kTb};
  double holdout_fraction = 0.1;
  std::uint64_t seed = 1;
  bool freeze_encoder = false;
  bool payload_augmentation = true;
  int max_payloads = -1;  // -1: one payload per VT-directed utterance
  int eval_every = 100;   // steps between held-out evaluations
  bool early_stopping = true;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

std::string train_sets_tag(const std::vector<Invocation>& sets);  // "vt", "tb", "vt+tb"
std::vector<Invocation> parse_train_sets(const std::string& tag);

struct TrainLogRow {
  long step = 0;
  std::string phase;
  double xe = 0, ctc = 0, total = 0;
  double grad_norm = 0;  // after clipping
  double lr = 0;
  double holdout = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  double initial_holdout = 0;
  double best_holdout = 0;
  long best_step = 0;
  int train_utterances = 0;
  int holdout_utterances = 0;
};

// Utterances used for training a given selection: the train split filtered by
// invocation, plus keyword-stripped VT payloads when VT is selected.
std::vector<Utterance> select_training_data(const std::vector<Utterance>& corpus,
                                            const TrainConfig& cfg, bool phonetic_only);

TrainResult pretrain_phonetic(FtmModel<float>& model, const TrainConfig& cfg,
                              const std::vector<Utterance>& corpus);

TrainResult train_discriminative(FtmModel<float>& model, const TrainConfig& cfg,
                                 const std::vector<Utterance>& corpus);

// Mean per-utterance loss in inference mode. With phonetic_only the loss is
// CTC alone, otherwise XE + lambda * CTC.
double mean_loss(const FtmModel<float>& model, const std::vector<const Utterance*>& utts,
                 bool phonetic_only, double lambda_ctc);

void write_train_log_csv(std::ostream& out, const std::vector<TrainLogRow>& rows);

}  // namespace ftm

#endif  // FTM_TRAIN_H_
