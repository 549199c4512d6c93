#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lexer.hpp"
#include "vocab.hpp"

namespace codelm {

// A fixed-length window of consecutive token ids; one training or
// evaluation unit.
struct Sentence {
  std::vector<uint32_t> ids;

  size_t length() const { return ids.size(); }
  bool operator==(const Sentence&) const = default;
};

// Consecutive non-overlapping windows of exactly sent_len ids; a trailing
// remainder shorter than sent_len is dropped.
std::vector<Sentence> split_sentences(const std::vector<uint32_t>& ids,
                                      size_t sent_len);

struct SplitManifest {
  uint64_t documents = 0;
  uint64_t sentences = 0;
  uint64_t source_hash = 0;               // FNV-1a over the sorted source ids
  std::vector<std::string> source_ids;    // documents assigned to this split
};

struct PartitionConfig {
  uint32_t sentence_length = 100;
  uint32_t sentences_per_split = 10000;
  uint32_t vocab_size = 1000;
  uint32_t min_count = 2;
  uint64_t seed = 42;
};

struct CorpusPartition {
  std::vector<Sentence> train;
  std::vector<Sentence> validation;
  std::vector<Sentence> test;
  SplitManifest train_manifest;
  SplitManifest validation_manifest;
  SplitManifest test_manifest;
  PartitionConfig config;
};

struct PreparedCorpus {
  Vocabulary vocab;
  CorpusPartition partition;
  uint64_t total_tokens = 0;    // across every document
  uint64_t unique_tokens = 0;   // distinct normalized texts across documents
  uint64_t document_count = 0;
};

// Assigns whole documents to train/validation/test (seeded shuffle, greedy
// fill), builds the vocabulary from the training documents, encodes, splits
// into fixed-length sentences and truncates each split to
// sentences_per_split. Sentences never span document boundaries.
PreparedCorpus partition_corpus(const std::vector<TokenSequence>& documents,
                                const PartitionConfig& config);

inline Vocabulary build_vocabulary(const std::vector<TokenSequence>& sequences,
                                   uint32_t max_size, uint32_t min_count) {
  return Vocabulary::build(sequences, max_size, min_count);
}

// Corpus directory layout: train.txt / valid.txt / test.txt (one sentence
// per line, space-separated ids), vocab.tsv, manifest.json.
void write_corpus_dir(const std::filesystem::path& dir,
                      const PreparedCorpus& corpus);

struct LoadedCorpus {
  Vocabulary vocab;
  std::vector<Sentence> train;
  std::vector<Sentence> validation;
  std::vector<Sentence> test;
};

LoadedCorpus load_corpus_dir(const std::filesystem::path& dir);

const std::vector<Sentence>& corpus_split(const LoadedCorpus& corpus,
                                          std::string_view name);

}  // namespace codelm
