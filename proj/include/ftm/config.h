// Layered run configuration.
//
// Values are flat "section.key" strings, resolved in three layers: an INI
// file, then environment variables named FTM_<SECTION>_<KEY> (upper case),
// then explicit "section.key=value" overrides. Sections are [model], [train]
// and [corpus]; model.preset=desk starts the model section from the desk
// preset instead of the full-size defaults.

#ifndef FTM_CONFIG_H_
#define FTM_CONFIG_H_

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ftm/model_config.h"
#include "ftm/synthdata.h"
#include "ftm/train.h"

namespace ftm {

using KeyValues = std::map<std::string, std::string>;

// Round-trippable text for a double.
std::string format_number(double v);

KeyValues parse_ini(const std::string& text);
KeyValues read_ini(const std::string& path);
std::string write_ini(const KeyValues& kv);

// Every key the resolver understands, as "section.key".
std::vector<std::string> known_keys();

using EnvLookup = std::function<const char*(const char*)>;
// Name of the variable that overrides a key, e.g. FTM_MODEL_D_MODEL.
std::string env_name(const std::string& key);
void apply_env(KeyValues& kv, const EnvLookup& getenv_fn);
// Each assignment is "section.key=value".
void apply_overrides(KeyValues& kv, const std::vector<std::string>& assignments);

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  CorpusSpec corpus;
};

// Throws ConfigError naming the key for unknown keys, bad values, or a model
// that does not fit the corpus (input_dim, phone_alphabet).
RunConfig resolve_run_config(const KeyValues& kv);
// Complete snapshot; resolve_run_config(to_kv(c)) reproduces c.
KeyValues to_kv(const RunConfig& c);

// The [corpus] section alone, e.g. a corpus spec file. Keys of other
// sections are rejected.
CorpusSpec resolve_corpus(const KeyValues& kv);
KeyValues corpus_to_kv(const CorpusSpec& spec);

// The three layers in order. An empty path skips the file layer.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides,
                          KeyValues* resolved = nullptr);

}  // namespace ftm

#endif  // FTM_CONFIG_H_
