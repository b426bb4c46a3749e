#include "ftm/model_config.h"

#include "ftm/config.h"
#include "ftm/errors.h"

namespace ftm {

std::string to_string(SummaryKind kind) {
  switch (kind) {
    case SummaryKind::kStcn: return "stcn";
    case SummaryKind::kSlstm: return "slstm";
    case SummaryKind::kSave: return "save";
    case SummaryKind::kA2aLstm: return "a2a";
  }
  return "?";
}

SummaryKind parse_summary_kind(const std::string& name) {
  if (name == "stcn" || name == "s-tcn") return SummaryKind::kStcn;
  if (name == "slstm" || name == "s-lstm") return SummaryKind::kSlstm;
  if (name == "save" || name == "s-ave") return SummaryKind::kSave;
  if (name == "a2a" || name == "a2a_lstm") return SummaryKind::kA2aLstm;
  throw ConfigError("unknown summary kind '" + name + "' (expected stcn|slstm|save|a2a)");
}

bool is_streaming(SummaryKind kind) { return kind != SummaryKind::kA2aLstm; }

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.n_layers = 2;
  c.d_model = 64;
  c.n_heads = 4;
  c.d_ff = 256;
  c.tcn_channels = 64;
  c.lstm_hidden = 64;
  return c;
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string("model.") + name + " must be positive");
  };
  positive(input_dim, "input_dim");
  positive(n_layers, "n_layers");
  positive(d_model, "d_model");
  positive(n_heads, "n_heads");
  positive(d_ff, "d_ff");
  positive(block_shift, "block_shift");
  positive(k1, "k1");
  positive(s1, "s1");
  positive(k2, "k2");
  positive(s2, "s2");
  positive(tcn_channels, "tcn_channels");
  positive(tcn_units, "tcn_units");
  positive(lstm_hidden, "lstm_hidden");
  positive(lstm_tail, "lstm_tail");
  positive(phone_alphabet, "phone_alphabet");
  if (d_model % n_heads != 0)
    throw ConfigError("model.d_model (" + std::to_string(d_model) +
                      ") must be divisible by model.n_heads (" + std::to_string(n_heads) + ")");
  if (k1 != s1)
    throw ConfigError("TCN geometry: first convolution must be non-overlapping (k1 == s1), got k1=" +
                      std::to_string(k1) + " s1=" + std::to_string(s1));
  if (s1 * s2 != block_shift)
    throw ConfigError("TCN geometry: stride product s1*s2 = " + std::to_string(s1 * s2) +
                      " must equal block_shift " + std::to_string(block_shift));
  if (k1 * k2 > block_size())
    throw ConfigError("TCN geometry: receptive field k1*k2 = " + std::to_string(k1 * k2) +
                      " exceeds block size " + std::to_string(block_size()));
  if (k2 < s2 || k2 % s2 != 0)
    throw ConfigError("TCN geometry: k2 must be a positive multiple of s2, got k2=" +
                      std::to_string(k2) + " s2=" + std::to_string(s2));
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model.dropout must be in [0, 1)");
  if (n_classes != 2) throw ConfigError("model.n_classes must be 2");
}

std::map<std::string, std::string> ModelConfig::to_kv() const {
  return {
      {"input_dim", std::to_string(input_dim)},
      {"n_layers", std::to_string(n_layers)},
      {"d_model", std::to_string(d_model)},
      {"n_heads", std::to_string(n_heads)},
      {"d_ff", std::to_string(d_ff)},
      {"block_shift", std::to_string(block_shift)},
      {"summary_kind", to_string(summary_kind)},
      {"k1", std::to_string(k1)},
      {"s1", std::to_string(s1)},
      {"k2", std::to_string(k2)},
      {"s2", std::to_string(s2)},
      {"tcn_channels", std::to_string(tcn_channels)},
      {"tcn_units", std::to_string(tcn_units)},
      {"lstm_hidden", std::to_string(lstm_hidden)},
      {"lstm_tail", std::to_string(lstm_tail)},
      {"dropout", format_number(dropout)},
      {"n_classes", std::to_string(n_classes)},
      {"phone_alphabet", std::to_string(phone_alphabet)},
  };
}

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv,
                                 const ModelConfig& base) {
  ModelConfig c = base;
  auto int_field = [&](const char* key, int& dst) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    try {
      std::size_t pos = 0;
      dst = std::stoi(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError(std::string("model.") + key + ": expected integer, got '" +
                        it->second + "'");
    }
  };
  for (const auto& [k, v] : kv) {
    static const char* known[] = {"input_dim", "n_layers", "d_model", "n_heads", "d_ff",
                                  "block_shift", "summary_kind", "k1", "s1", "k2", "s2",
                                  "tcn_channels", "tcn_units", "lstm_hidden", "lstm_tail",
                                  "dropout", "n_classes", "phone_alphabet", "preset"};
    bool ok = false;
    for (const char* name : known) ok = ok || k == name;
    if (!ok) throw ConfigError("model." + k + ": unknown key");
  }
  int_field("input_dim", c.input_dim);
  int_field("n_layers", c.n_layers);
  int_field("d_model", c.d_model);
  int_field("n_heads", c.n_heads);
  int_field("d_ff", c.d_ff);
  int_field("block_shift", c.block_shift);
  int_field("k1", c.k1);
  int_field("s1", c.s1);
  int_field("k2", c.k2);
  int_field("s2", c.s2);
  int_field("tcn_channels", c.tcn_channels);
  int_field("tcn_units", c.tcn_units);
  int_field("lstm_hidden", c.lstm_hidden);
  int_field("lstm_tail", c.lstm_tail);
  int_field("n_classes", c.n_classes);
  int_field("phone_alphabet", c.phone_alphabet);
  if (auto it = kv.find("summary_kind"); it != kv.end()) c.summary_kind = parse_summary_kind(it->second);
  if (auto it = kv.find("dropout"); it != kv.end()) {
    try {
      c.dropout = std::stod(it->second);
    } catch (const std::exception&) {
      throw ConfigError("model.dropout: expected number, got '" + it->second + "'");
    }
  }
  c.validate();
  return c;
}

}  // namespace ftm
