// Seeded synthetic corpus of voice-trigger (VT) and touch-based (TB)
// utterances.
//
// Each phone id owns a mean vector in raw feature space. A frame is its
// phone's mean plus a per-utterance channel offset plus white noise. Phone
// inventory (ids are 1-based, 0 is the CTC blank):
//   keyword     1..4   fixed prefix of every VT-directed utterance
//   command     next n_command ids, the vocabulary of directed speech
//   background  next n_distractor ids, near-copies of command phones found in
//               VT false triggers
//   chatter     next n_distractor ids, near-copies of command phones in a
//               different direction, found in TB false triggers
// VT-undirected utterances may open with a confusable prefix sharing 3 of the
// 4 keyword phones. Undirected bodies mix distractor and command phones.
//
// Utterance i of a split draws from its own generator seeded with
// mix_seed(seed, split, i), so output does not depend on generation order.

#ifndef FTM_SYNTHDATA_H_
#define FTM_SYNTHDATA_H_

#include <cstdint>
#include <string>
#include <vector>

#include "ftm/featext.h"
#include "ftm/tensor.h"

namespace ftm {

enum class Invocation { kVt, kTb };
enum class Split { kTrain, kEval };

std::string to_string(Invocation inv);
std::string to_string(Split split);
Invocation parse_invocation(const std::string& s);
Split parse_split(const std::string& s);

struct Utterance {
  std::string id;
  Tensor<float> raw;  // T_raw x base_dim at 10 ms
  bool directed = false;
  Invocation invocation = Invocation::kVt;
  Split split = Split::kTrain;
  std::vector<int> phones;
  std::vector<int> durations;  // raw frames per phone, same length as phones
  int keyword_frames = 0;  // raw frames taken by the keyword prefix

  int frames() const { return raw.rows(); }
  // Network input: context-stacked and subsampled.
  FeatureSequence features() const;
};

struct CellCounts {
  int vt_directed = 0, vt_undirected = 0, tb_directed = 0, tb_undirected = 0;
  int total() const { return vt_directed + vt_undirected + tb_directed + tb_undirected; }
};

struct CorpusSpec {
  std::uint64_t seed = 1;
  CellCounts train{833, 167, 833, 167};
  CellCounts eval{175, 25, 150, 50};
  double vt_mean_s = 5.2, vt_std_s = 2.1;
  double tb_mean_s = 4.1, tb_std_s = 3.7;
  double min_s = 1.92;  // 2S subsampled frames at 30 ms
  double max_s = 10.0;
  int base_dim = 40;
  int n_command = 12;
  int n_distractor = 8;
  int min_phone_frames = 9;  // raw frames
  int max_phone_frames = 24;
  double mean_scale = 1.0;      // spread of phone means
  double distractor_shift = 0.45;  // distance of a distractor from its command phone
  double channel_std = 0.3;
  double noise_std = 1.2;
  double distractor_rate = 0.5;  // share of distractor phones in undirected speech
  double confusable_rate = 0.5;  // VT-undirected with a keyword-like prefix

  int phone_alphabet() const { return 4 + n_command + 2 * n_distractor; }
  // Throws ConfigError naming the offending field.
  void validate() const;
};

inline constexpr int kKeywordPhones = 4;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

// Phone mean vectors, row k - 1 for phone id k.
Tensor<float> phone_means(const CorpusSpec& spec);

std::vector<Utterance> generate(const CorpusSpec& spec);

// VT-directed utterance with its keyword removed, relabelled as TB.
Utterance segment_payload(const Utterance& u);

// Appends payloads of up to max_payloads VT-directed utterances (in corpus
// order). Returns the number added.
int augment_with_payloads(std::vector<Utterance>& corpus, int max_payloads);

}  // namespace ftm

#endif  // FTM_SYNTHDATA_H_
