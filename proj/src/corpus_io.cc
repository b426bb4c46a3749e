#include "ftm/corpus_io.h"

#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "ftm/config.h"
#include "ftm/errors.h"
#include "ftm/featext.h"

namespace ftm {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.jsonl";
constexpr const char* kSpec = "corpus.ini";
constexpr const char* kFeats = "feats";

std::string corpus_ini(const CorpusSpec& spec) { return write_ini(corpus_to_kv(spec)); }

CorpusSpec parse_corpus_ini(const std::string& text) {
  try {
    return resolve_corpus(parse_ini(text));
  } catch (const ConfigError& e) {
    throw DataError(std::string(kSpec) + ": " + e.what());
  }
}

bool safe_relative(const std::string& p) {
  const fs::path path(p);
  if (path.empty() || path.is_absolute()) return false;
  for (const auto& part : path)
    if (part == "..") return false;
  return true;
}

}  // namespace

std::string sha1_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha1(), nullptr) != 1)
    throw std::runtime_error("sha1 failed");
  std::ostringstream out;
  out << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) out << std::setw(2) << static_cast<int>(md[i]);
  return out.str();
}

std::string blob_hash(const std::string& bytes) {
  std::string header = "blob " + std::to_string(bytes.size());
  header.push_back('\0');
  return sha1_hex(header + bytes);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path);
}

std::string file_hash(const std::string& path) { return blob_hash(read_file(path)); }

std::string tree_hash(const std::string& root, std::vector<std::string> files) {
  std::sort(files.begin(), files.end());
  std::string listing;
  for (const auto& f : files) listing += file_hash((fs::path(root) / f).string()) + " " + f + "\n";
  return sha1_hex(listing);
}

void prepare_output_dir(const std::string& dir, bool force,
                        const std::vector<std::string>& owned_entries) {
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir)) throw ConfigError(dir + " exists and is not a directory");
    if (!fs::is_empty(dir)) {
      if (!force) throw ConfigError(dir + " is not empty (use --force to overwrite)");
      for (const auto& e : owned_entries) fs::remove_all(fs::path(dir) / e);
    }
  }
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir + ": " + ec.message());
}

std::string write_corpus(const std::string& dir, const CorpusSpec& spec,
                         const std::vector<Utterance>& utts) {
  fs::create_directories(fs::path(dir) / kFeats);
  write_file((fs::path(dir) / kSpec).string(), corpus_ini(spec));
  std::string manifest;
  for (const auto& u : utts) {
    const std::string rel = std::string(kFeats) + "/" + u.id + ".ftmf";
    write_raw_features((fs::path(dir) / rel).string(), u.raw);
    json rec = {{"id", u.id},
                {"path", rel},
                {"directed", u.directed},
                {"invocation", to_string(u.invocation)},
                {"split", to_string(u.split)},
                {"phones", u.phones},
                {"durations", u.durations},
                {"keyword_frames", u.keyword_frames},
                {"frames", u.frames()}};
    manifest += rec.dump() + "\n";
  }
  write_file((fs::path(dir) / kManifest).string(), manifest);
  return corpus_hash(dir);
}

std::string corpus_hash(const std::string& dir) {
  std::vector<std::string> files{kSpec, kManifest};
  std::istringstream lines(read_file((fs::path(dir) / kManifest).string()));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    ++n;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
      files.push_back(rec.at("path").get<std::string>());
    } catch (const json::exception& e) {
      throw DataError(std::string(kManifest) + " line " + std::to_string(n) + ": " + e.what());
    }
    if (!safe_relative(files.back()))
      throw DataError(std::string(kManifest) + " line " + std::to_string(n) +
                      ": path escapes the corpus directory: " + files.back());
  }
  return tree_hash(dir, files);
}

CorpusOnDisk read_corpus(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("corpus directory not found: " + dir);
  CorpusOnDisk out;
  out.spec = parse_corpus_ini(read_file((fs::path(dir) / kSpec).string()));
  out.hash = corpus_hash(dir);
  std::istringstream lines(read_file((fs::path(dir) / kManifest).string()));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    ++n;
    if (line.empty()) continue;
    const std::string where = std::string(kManifest) + " line " + std::to_string(n);
    Utterance u;
    std::string rel;
    int frames = 0;
    try {
      const json rec = json::parse(line);
      u.id = rec.at("id").get<std::string>();
      rel = rec.at("path").get<std::string>();
      u.directed = rec.at("directed").get<bool>();
      u.invocation = parse_invocation(rec.at("invocation").get<std::string>());
      u.split = parse_split(rec.at("split").get<std::string>());
      u.phones = rec.at("phones").get<std::vector<int>>();
      u.durations = rec.at("durations").get<std::vector<int>>();
      u.keyword_frames = rec.at("keyword_frames").get<int>();
      frames = rec.at("frames").get<int>();
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    } catch (const ConfigError& e) {
      throw DataError(where + ": " + e.what());
    }
    u.raw = read_raw_features((fs::path(dir) / rel).string());
    if (u.frames() != frames)
      throw DataError(where + ": " + rel + " has " + std::to_string(u.frames()) +
                      " frames, record says " + std::to_string(frames));
    if (u.raw.cols() != out.spec.base_dim)
      throw DataError(where + ": " + rel + " has dim " + std::to_string(u.raw.cols()) +
                      ", corpus base_dim is " + std::to_string(out.spec.base_dim));
    if (u.phones.size() != u.durations.size())
      throw DataError(where + ": phones and durations differ in length");
    out.utterances.push_back(std::move(u));
  }
  return out;
}

}  // namespace ftm
