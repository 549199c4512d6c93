#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "evaluation.hpp"
#include "model.hpp"
#include "training.hpp"

namespace codelm {

// High-level pipeline entry points; the C API and CLI are thin wrappers
// around these.

struct PreprocessOptions {
  std::filesystem::path source_dir;
  std::filesystem::path out_dir;
  std::string extension = ".java";
  uint32_t vocab_size = 1000;
  uint32_t min_count = 2;
  uint32_t sentence_length = 100;
  uint32_t sentences_per_split = 10000;
  uint64_t seed = 42;
};

struct PreprocessStats {
  uint64_t total_tokens = 0;
  uint64_t unique_tokens = 0;
  uint32_t vocab_size = 0;
  uint64_t document_count = 0;
  uint64_t train_sentences = 0;
  uint64_t valid_sentences = 0;
  uint64_t test_sentences = 0;
};

// Recursively collects files with the given extension (sorted paths, so the
// result is independent of directory enumeration order), lexes and
// normalizes each into one token stream.
std::vector<TokenSequence> scan_and_lex(const std::filesystem::path& source_dir,
                                        const std::string& extension);

PreprocessStats preprocess(const PreprocessOptions& options);

struct TrainOutcome {
  uint32_t best_epoch = 0;
  uint32_t epochs_run = 0;
  double best_validation_perplexity = 0.0;
};

// Trains from a corpus directory and writes the best checkpoint (model +
// optimizer state) and a training log.
TrainOutcome train_to_file(const std::filesystem::path& corpus_dir,
                           ModelKind kind, const TrainingConfig& cfg,
                           const std::filesystem::path& model_path,
                           const std::filesystem::path& log_path);

// Evaluates a saved model on one split of a corpus directory; the corpus
// vocabulary hash must match the model's.
PerplexityReport evaluate_model(const SavedModel& model,
                                const std::filesystem::path& corpus_dir,
                                std::string_view split);

struct Suggestion {
  uint32_t token_id = 0;
  double probability = 0.0;
};

struct SuggestResult {
  std::vector<Suggestion> suggestions;  // probability descending, id ascending
  uint32_t context_length = 0;          // tokens after lexing
  uint32_t unknown_count = 0;           // context tokens that encoded to <unk>
};

// Lexes and normalizes the context text, encodes it against the model
// vocabulary (<unk> for out-of-vocabulary tokens), feeds it through the
// model and ranks the next-token distribution.
SuggestResult suggest(const SavedModel& model, std::string_view context_text,
                      uint32_t top_k);

// Mean-pooled hidden representation of the lexed context.
Vector represent(const SavedModel& model, std::string_view context_text);

struct GridOptions {
  std::filesystem::path source_dir;
  std::filesystem::path out_dir;
  std::string extension = ".java";
  GridSpec spec;
  TrainingConfig training;  // shared knobs; per-kind rates applied internally
};

// Runs the grid and writes grid.tsv and grid.md under out_dir; returns the
// TSV rendering.
std::string grid_to_files(const GridOptions& options);

}  // namespace codelm
