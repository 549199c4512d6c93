#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "model.hpp"
#include "training.hpp"

namespace codelm {

struct PerplexityReport {
  double perplexity = 0.0;
  uint64_t token_count = 0;
  uint64_t sentence_count = 0;
  ModelKind kind = ModelKind::rnn;
  uint32_t vocab_size = 0;
  uint32_t embed_dim = 0;
  uint32_t hidden_dim = 0;
};

// exp of total negative log-probability over total token count, always under
// the exact softmax. Dropout plays no part in evaluation.
PerplexityReport perplexity(const std::vector<Sentence>& sentences,
                            const ModelParameters& m);

// 100 * (rnn - lstm) / rnn, reported to one decimal.
double improvement_percent(double rnn_ppl, double lstm_ppl);

struct GridSpec {
  std::vector<uint32_t> sentence_lengths;
  std::vector<uint32_t> embed_dims;
  uint32_t vocab_size = 1000;
  uint32_t min_count = 2;
  uint32_t sentences_per_split = 10000;
  uint32_t repetitions = 1;
  uint64_t base_seed = 42;
};

struct GridCell {
  uint32_t sent_len = 0;
  uint32_t embed_dim = 0;
  std::optional<double> rnn_perplexity;
  std::optional<double> lstm_perplexity;
  std::optional<double> improvement;
  std::string error;  // non-empty when the cell failed
};

struct GridResult {
  std::vector<GridCell> cells;
};

// One experiment per (sentence length, embedding dimension) pair: re-splits
// the corpus at that length, trains both kinds from scratch with their
// per-kind RMSprop settings, and evaluates test perplexity. Per-cell
// failures are recorded and the grid continues. Cells with an existing
// result file under out_dir/runs are reused, which makes grids resumable.
GridResult run_grid(const std::vector<TokenSequence>& documents,
                    const GridSpec& spec, const TrainingConfig& base_cfg,
                    const std::filesystem::path& out_dir);

enum class TableFormat { tsv, markdown };

// Columns sent-len, embed-dim, RNN, LSTM, improv %; perplexities to two
// decimals, improvement to one, failed cells rendered as an em dash.
std::string emit_table(const GridResult& result, TableFormat format);

}  // namespace codelm
