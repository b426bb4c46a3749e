#include "ftm/config.h"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ftm/errors.h"
#include "ftm/featext.h"

namespace ftm {
namespace {

struct Field {
  std::string name;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& want,
                            const std::string& got) {
  throw ConfigError(key + ": expected " + want + ", got '" + got + "'");
}

Field int_field(const std::string& key, int& dst) {
  return {key,
          [&dst, key](const std::string& v) {
            try {
              std::size_t pos = 0;
              dst = std::stoi(v, &pos);
              if (pos != v.size()) bad_value(key, "integer", v);
            } catch (const std::logic_error&) {
              bad_value(key, "integer", v);
            }
          },
          [&dst] { return std::to_string(dst); }};
}

Field u64_field(const std::string& key, std::uint64_t& dst) {
  return {key,
          [&dst, key](const std::string& v) {
            try {
              std::size_t pos = 0;
              if (!v.empty() && v[0] == '-') bad_value(key, "non-negative integer", v);
              dst = std::stoull(v, &pos);
              if (pos != v.size()) bad_value(key, "non-negative integer", v);
            } catch (const std::logic_error&) {
              bad_value(key, "non-negative integer", v);
            }
          },
          [&dst] { return std::to_string(dst); }};
}

Field double_field(const std::string& key, double& dst) {
  return {key,
          [&dst, key](const std::string& v) {
            try {
              std::size_t pos = 0;
              dst = std::stod(v, &pos);
              if (pos != v.size()) bad_value(key, "number", v);
            } catch (const std::logic_error&) {
              bad_value(key, "number", v);
            }
          },
          [&dst] { return format_number(dst); }};
}

Field bool_field(const std::string& key, bool& dst) {
  return {key,
          [&dst, key](const std::string& v) {
            std::string l = v;
            std::transform(l.begin(), l.end(), l.begin(), ::tolower);
            if (l == "true" || l == "1" || l == "yes") dst = true;
            else if (l == "false" || l == "0" || l == "no") dst = false;
            else bad_value(key, "true or false", v);
          },
          [&dst] { return std::string(dst ? "true" : "false"); }};
}

std::vector<Field> train_fields(TrainConfig& c) {
  return {
      double_field("train.lr", c.lr),
      double_field("train.clip_norm", c.clip_norm),
      int_field("train.batch_size", c.batch_size),
      int_field("train.pretrain_steps", c.pretrain_steps),
      int_field("train.finetune_steps", c.finetune_steps),
      double_field("train.lambda_ctc", c.lambda_ctc),
      {"train.train_sets", [&c](const std::string& v) { c.train_sets = parse_train_sets(v); },
       [&c] { return train_sets_tag(c.train_sets); }},
      double_field("train.holdout_fraction", c.holdout_fraction),
      u64_field("train.seed", c.seed),
      bool_field("train.freeze_encoder", c.freeze_encoder),
      bool_field("train.payload_augmentation", c.payload_augmentation),
      int_field("train.max_payloads", c.max_payloads),
      int_field("train.eval_every", c.eval_every),
      bool_field("train.early_stopping", c.early_stopping),
  };
}

std::vector<Field> corpus_fields(CorpusSpec& c) {
  return {
      u64_field("corpus.seed", c.seed),
      int_field("corpus.train_vt_directed", c.train.vt_directed),
      int_field("corpus.train_vt_undirected", c.train.vt_undirected),
      int_field("corpus.train_tb_directed", c.train.tb_directed),
      int_field("corpus.train_tb_undirected", c.train.tb_undirected),
      int_field("corpus.eval_vt_directed", c.eval.vt_directed),
      int_field("corpus.eval_vt_undirected", c.eval.vt_undirected),
      int_field("corpus.eval_tb_directed", c.eval.tb_directed),
      int_field("corpus.eval_tb_undirected", c.eval.tb_undirected),
      double_field("corpus.vt_mean_s", c.vt_mean_s),
      double_field("corpus.vt_std_s", c.vt_std_s),
      double_field("corpus.tb_mean_s", c.tb_mean_s),
      double_field("corpus.tb_std_s", c.tb_std_s),
      double_field("corpus.min_s", c.min_s),
      double_field("corpus.max_s", c.max_s),
      int_field("corpus.base_dim", c.base_dim),
      int_field("corpus.n_command", c.n_command),
      int_field("corpus.n_distractor", c.n_distractor),
      int_field("corpus.min_phone_frames", c.min_phone_frames),
      int_field("corpus.max_phone_frames", c.max_phone_frames),
      double_field("corpus.mean_scale", c.mean_scale),
      double_field("corpus.distractor_shift", c.distractor_shift),
      double_field("corpus.channel_std", c.channel_std),
      double_field("corpus.noise_std", c.noise_std),
      double_field("corpus.distractor_rate", c.distractor_rate),
      double_field("corpus.confusable_rate", c.confusable_rate),
  };
}

std::vector<std::string> model_keys() {
  std::vector<std::string> keys{"model.preset"};
  for (const auto& [k, v] : ModelConfig().to_kv()) keys.push_back("model." + k);
  return keys;
}

}  // namespace

std::string format_number(double v) {
  char buf[40];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

KeyValues parse_ini(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
  KeyValues kv;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config: key '" + section + "' is outside a section");
    for (const auto& [key, value] : body) kv[section + "." + key] = value.data();
  }
  return kv;
}

KeyValues read_ini(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_ini(ss.str());
}

std::string write_ini(const KeyValues& kv) {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  for (const auto& [k, v] : kv) {
    const auto dot = k.find('.');
    if (dot == std::string::npos) throw ConfigError("config: key '" + k + "' has no section");
    sections[k.substr(0, dot)].emplace_back(k.substr(dot + 1), v);
  }
  std::ostringstream out;
  bool first = true;
  for (const auto& [name, entries] : sections) {
    if (!first) out << '\n';
    first = false;
    out << '[' << name << "]\n";
    for (const auto& [k, v] : entries) out << k << " = " << v << '\n';
  }
  return out.str();
}

std::vector<std::string> known_keys() {
  std::vector<std::string> keys = model_keys();
  TrainConfig t;
  CorpusSpec c;
  for (const auto& f : train_fields(t)) keys.push_back(f.name);
  for (const auto& f : corpus_fields(c)) keys.push_back(f.name);
  return keys;
}

std::string env_name(const std::string& key) {
  std::string out = "FTM_";
  for (char ch : key) out += ch == '.' ? '_' : static_cast<char>(std::toupper(ch));
  return out;
}

void apply_env(KeyValues& kv, const EnvLookup& getenv_fn) {
  for (const auto& key : known_keys())
    if (const char* v = getenv_fn(env_name(key).c_str())) kv[key] = v;
}

void apply_overrides(KeyValues& kv, const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override '" + a + "' is not of the form section.key=value");
    std::string key = a.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    std::string value = a.substr(eq + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    kv[key] = value;
  }
}

RunConfig resolve_run_config(const KeyValues& kv) {
  RunConfig c;
  std::map<std::string, std::string> model_kv;
  auto train = train_fields(c.train);
  auto corpus = corpus_fields(c.corpus);
  for (const auto& [key, value] : kv) {
    if (key.rfind("model.", 0) == 0) {
      model_kv[key.substr(6)] = value;
      continue;
    }
    bool found = false;
    for (auto* table : {&train, &corpus})
      for (auto& f : *table)
        if (f.name == key) {
          f.set(value);
          found = true;
        }
    if (!found) throw ConfigError(key + ": unknown key");
  }
  ModelConfig base;
  if (auto it = model_kv.find("preset"); it != model_kv.end()) {
    if (it->second == "desk") base = ModelConfig::desk();
    else if (it->second != "default") bad_value("model.preset", "desk or default", it->second);
  }
  c.model = ModelConfig::from_kv(model_kv, base);
  c.train.validate();
  c.corpus.validate();
  const int want_dim = c.corpus.base_dim * (2 * kDefaultContext + 1);
  if (c.model.input_dim != want_dim)
    throw ConfigError("model.input_dim = " + std::to_string(c.model.input_dim) +
                      " does not match corpus features (" + std::to_string(want_dim) + ")");
  if (c.model.phone_alphabet != c.corpus.phone_alphabet())
    throw ConfigError("model.phone_alphabet = " + std::to_string(c.model.phone_alphabet) +
                      " does not match corpus phone inventory (" +
                      std::to_string(c.corpus.phone_alphabet()) + ")");
  return c;
}

KeyValues to_kv(const RunConfig& c) {
  KeyValues kv;
  for (const auto& [k, v] : c.model.to_kv()) kv["model." + k] = v;
  RunConfig copy = c;
  for (const auto& f : train_fields(copy.train)) kv[f.name] = f.get();
  for (const auto& f : corpus_fields(copy.corpus)) kv[f.name] = f.get();
  return kv;
}

CorpusSpec resolve_corpus(const KeyValues& kv) {
  CorpusSpec spec;
  auto fields = corpus_fields(spec);
  for (const auto& [key, value] : kv) {
    auto it = std::find_if(fields.begin(), fields.end(),
                           [&](const Field& f) { return f.name == key; });
    if (it == fields.end()) throw ConfigError(key + ": not a corpus key");
    it->set(value);
  }
  spec.validate();
  return spec;
}

KeyValues corpus_to_kv(const CorpusSpec& spec) {
  CorpusSpec copy = spec;
  KeyValues kv;
  for (const auto& f : corpus_fields(copy)) kv[f.name] = f.get();
  return kv;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides,
                          KeyValues* resolved) {
  KeyValues kv = path.empty() ? KeyValues{} : read_ini(path);
  apply_env(kv, [](const char* name) { return std::getenv(name); });
  apply_overrides(kv, overrides);
  RunConfig c = resolve_run_config(kv);
  if (resolved) *resolved = to_kv(c);
  return c;
}

}  // namespace ftm
