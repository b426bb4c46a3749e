#ifndef FTM_MODEL_CONFIG_H_
#define FTM_MODEL_CONFIG_H_

#include <map>
#include <string>

namespace ftm {

enum class SummaryKind { kStcn, kSlstm, kSave, kA2aLstm };

std::string to_string(SummaryKind kind);
SummaryKind parse_summary_kind(const std::string& name);
bool is_streaming(SummaryKind kind);

// Architecture hyperparameters. Defaults are the full-size on-device model;
// desk() is the reduced configuration used for CPU training runs.
struct ModelConfig {
  int input_dim = 280;
  int n_layers = 6;
  int d_model = 256;
  int n_heads = 4;
  int d_ff = 1024;
  int block_shift = 32;  // S; attention block is 2S frames
  SummaryKind summary_kind = SummaryKind::kStcn;
  int k1 = 4, s1 = 4, k2 = 16, s2 = 8;
  int tcn_channels = 256;
  int tcn_units = 1;
  int lstm_hidden = 256;
  int lstm_tail = 10;  // frames averaged for an LSTM decision
  double dropout = 0.1;
  int n_classes = 2;
  int phone_alphabet = 32;  // labels 1..alphabet, 0 is blank

  static ModelConfig desk();

  int block_size() const { return 2 * block_shift; }
  int head_dim() const { return d_model / n_heads; }
  int receptive_field() const { return k1 + (k2 - 1) * s1; }

  // Throws ConfigError naming the violated constraint.
  void validate() const;

  std::map<std::string, std::string> to_kv() const;
  // Keys absent from kv keep their value from base.
  static ModelConfig from_kv(const std::map<std::string, std::string>& kv,
                             const ModelConfig& base);
};

}  // namespace ftm

#endif  // FTM_MODEL_CONFIG_H_
