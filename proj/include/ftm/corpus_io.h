// Corpus directories and content hashing.
//
// Layout of a corpus directory:
//   corpus.ini       [corpus] section the utterances were generated from
//   manifest.jsonl   one JSON record per utterance: id, path, directed,
//                    invocation, split, phones, durations, keyword_frames,
//                    frames (raw 10 ms frames)
//   feats/<id>.ftmf  raw features, see featext.h
//
// Hashes are lowercase hex SHA-1. A file hashes like a git blob
// (sha1("blob <size>\0" + bytes)); a set of files hashes the sorted
// "<blob hash> <relative path>\n" lines.

#ifndef FTM_CORPUS_IO_H_
#define FTM_CORPUS_IO_H_

#include <string>
#include <utility>
#include <vector>

#include "ftm/synthdata.h"

namespace ftm {

std::string sha1_hex(const std::string& bytes);
std::string blob_hash(const std::string& bytes);
std::string file_hash(const std::string& path);
// Files given relative to root.
std::string tree_hash(const std::string& root, std::vector<std::string> files);

// Throws ConfigError when dir exists and is not empty, unless force is set.
// With force, only entries the caller is about to write are removed.
void prepare_output_dir(const std::string& dir, bool force,
                        const std::vector<std::string>& owned_entries);

// Writes the corpus and returns its content hash.
std::string write_corpus(const std::string& dir, const CorpusSpec& spec,
                         const std::vector<Utterance>& utts);

struct CorpusOnDisk {
  CorpusSpec spec;
  std::vector<Utterance> utterances;
  std::string hash;
};

// Throws DataError on a malformed manifest, a path escaping the directory,
// or a feature file that disagrees with its record.
CorpusOnDisk read_corpus(const std::string& dir);

// Content hash without loading features.
std::string corpus_hash(const std::string& dir);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace ftm

#endif  // FTM_CORPUS_IO_H_
