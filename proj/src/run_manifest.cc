#include "ftm/run_manifest.h"

#include <json.hpp>

#include "ftm/corpus_io.h"
#include "ftm/errors.h"

namespace ftm {
namespace {

std::string combined_hash(const std::vector<ManifestInput>& inputs) {
  std::string lines;
  for (const auto& in : inputs) lines += in.role + " " + in.hash + "\n";
  return sha1_hex(lines);
}

}  // namespace

void RunManifest::add_input(const std::string& role, const std::string& path,
                            const std::string& hash) {
  inputs.push_back({role, path, hash});
  input_hash = combined_hash(inputs);
}

const ManifestInput* RunManifest::input(const std::string& role) const {
  for (const auto& in : inputs)
    if (in.role == role) return &in;
  return nullptr;
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config"] = config;
  j["seed"] = seed;
  j["inputs"] = nlohmann::ordered_json::array();
  for (const auto& in : inputs)
    j["inputs"].push_back({{"role", in.role}, {"path", in.path}, {"hash", in.hash}});
  j["input_hash"] = inputs.empty() ? std::string() : input_hash;
  j["outputs"] = outputs;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  RunManifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config").get<KeyValues>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& in : j.at("inputs"))
      m.inputs.push_back({in.at("role").get<std::string>(), in.at("path").get<std::string>(),
                          in.at("hash").get<std::string>()});
    m.input_hash = j.at("input_hash").get<std::string>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run manifest: ") + e.what());
  }
  if (!m.inputs.empty() && m.input_hash != combined_hash(m.inputs))
    throw ConfigError("run manifest: input_hash does not match the listed inputs");
  return m;
}

void RunManifest::save(const std::string& path) const { write_file(path, to_json()); }

RunManifest RunManifest::load(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return from_json(text);
}

}  // namespace ftm
