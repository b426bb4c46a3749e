// run_manifest.json: what a command was asked to do and what it produced.
//
//   {"command": "train", "config": {"section.key": "value", ...},
//    "seed": 1, "inputs": [{"role": "corpus", "path": "...", "hash": "..."}],
//    "input_hash": "...", "outputs": ["model.ftmc", ...]}
//
// input_hash is the SHA-1 of the "<role> <hash>\n" lines in input order.
// Output paths are relative to the directory holding the manifest.

#ifndef FTM_RUN_MANIFEST_H_
#define FTM_RUN_MANIFEST_H_

#include <cstdint>
#include <string>
#include <vector>

#include "ftm/config.h"

namespace ftm {

struct ManifestInput {
  std::string role;
  std::string path;
  std::string hash;
  bool operator==(const ManifestInput&) const = default;
};

struct RunManifest {
  std::string command;
  KeyValues config;
  std::uint64_t seed = 0;
  std::vector<ManifestInput> inputs;
  std::string input_hash;
  std::vector<std::string> outputs;

  void add_input(const std::string& role, const std::string& path, const std::string& hash);
  // Null when no input has that role.
  const ManifestInput* input(const std::string& role) const;

  std::string to_json() const;
  // Throws ConfigError on malformed text or an input_hash that does not match
  // the inputs.
  static RunManifest from_json(const std::string& text);

  void save(const std::string& path) const;
  static RunManifest load(const std::string& path);

  bool operator==(const RunManifest&) const = default;
};

inline constexpr const char* kRunManifestFile = "run_manifest.json";

}  // namespace ftm

#endif  // FTM_RUN_MANIFEST_H_
