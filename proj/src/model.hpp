#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "corpus.hpp"
#include "numerics.hpp"
#include "rng.hpp"
#include "vocab.hpp"

namespace codelm {

enum class ModelKind { rnn, lstm };

std::string_view kind_name(ModelKind kind);
ModelKind kind_from_name(std::string_view name);

// h_t = tanh(b + W_tran h_{t-1} + W_in x_t)
struct RnnParameters {
  Vector b;        // K
  Matrix w_tran;   // K x K
  Matrix w_in;     // K x D
};

struct LstmGate {
  Matrix w_in;   // K x D
  Matrix w_rec;  // K x K
  Vector b;      // K
};

// Standard non-peephole LSTM: sigmoid forget/input/output gates, tanh
// candidate, c = f*c_prev + i*g, h = o*tanh(c).
struct LstmParameters {
  LstmGate forget;
  LstmGate input;
  LstmGate output;
  LstmGate candidate;
};

using CellParameters = std::variant<RnnParameters, LstmParameters>;

// Hidden state h_t, plus the memory cell c_t for LSTM (empty for RNN).
struct StepState {
  Vector h;
  Vector c;
};

struct ModelParameters {
  Matrix embedding;     // D x N, one column per vocabulary id
  CellParameters cell;  // variant selects the model kind
  Matrix output;        // N x K, one row per vocabulary id

  ModelKind kind() const {
    return std::holds_alternative<RnnParameters>(cell) ? ModelKind::rnn
                                                       : ModelKind::lstm;
  }
  uint32_t vocab_size() const { return static_cast<uint32_t>(output.rows); }
  uint32_t embed_dim() const { return static_cast<uint32_t>(embedding.rows); }
  uint32_t hidden_dim() const { return static_cast<uint32_t>(output.cols); }
};

// Weights uniform in [-0.05, 0.05]; biases zero except the LSTM forget-gate
// bias, which starts at 1 so early training preserves memory.
ModelParameters init_parameters(ModelKind kind, uint32_t vocab_size,
                                uint32_t embed_dim, uint32_t hidden_dim,
                                SeededRng& rng);

StepState initial_state(const ModelParameters& m);

// Column `id` of the embedding table.
Vector embed(const ModelParameters& m, uint32_t id);

StepState rnn_step(const StepState& prev, const Vector& x,
                   const RnnParameters& p);
StepState lstm_step(const StepState& prev, const Vector& x,
                    const LstmParameters& p);
StepState step(const ModelParameters& m, const StepState& prev,
               const Vector& x);

// softmax(U h) over the vocabulary.
Vector output_distribution(const Vector& h, const ModelParameters& m);

// log softmax(U h)[id], computed stably.
double output_log_prob(const Vector& h, uint32_t id, const ModelParameters& m);

struct ForwardResult {
  std::vector<StepState> states;       // state after each token
  std::vector<Vector> distributions;   // softmax(U h_t) per state
};

ForwardResult forward_sequence(const Sentence& sentence,
                               const ModelParameters& m);

// log P(w_1) + sum_t log P(w_t | prefix); the first factor conditions on the
// zero initial state.
double sequence_log_prob(const Sentence& sentence, const ModelParameters& m);

// Arithmetic mean of the hidden states; a fixed-size representation of the
// whole sequence.
Vector mean_pool_representation(const std::vector<StepState>& states);

namespace detail {

// Flattens any owner of (embedding, cell, output) into spans over the
// learnable arrays, in the documented fixed order: embedding, cell
// parameters (RNN: b, W_tran, W_in; LSTM: per gate forget/input/output/
// candidate: W_in, W_rec, b), output matrix. Serialization, optimizer state
// and gradient flattening all share this order.
template <class Span, class Owner>
std::vector<Span> collect_blocks(Owner& owner) {
  std::vector<Span> blocks;
  blocks.emplace_back(owner.embedding.data);
  if (auto* rnn = std::get_if<RnnParameters>(&owner.cell)) {
    blocks.emplace_back(rnn->b);
    blocks.emplace_back(rnn->w_tran.data);
    blocks.emplace_back(rnn->w_in.data);
  } else {
    auto& lstm = std::get<LstmParameters>(owner.cell);
    for (auto* g : {&lstm.forget, &lstm.input, &lstm.output, &lstm.candidate}) {
      blocks.emplace_back(g->w_in.data);
      blocks.emplace_back(g->w_rec.data);
      blocks.emplace_back(g->b);
    }
  }
  blocks.emplace_back(owner.output.data);
  return blocks;
}

}  // namespace detail

std::vector<std::span<double>> parameter_blocks(ModelParameters& m);
std::vector<std::span<const double>> parameter_blocks(const ModelParameters& m);
std::vector<std::string> parameter_block_names(const ModelParameters& m);

size_t parameter_count(const ModelParameters& m);
uint64_t model_checksum(const ModelParameters& m);

// RMSprop accumulators (and the NCE normalization offset) carried alongside
// a checkpoint so training state survives serialization.
struct OptimizerBlock {
  std::vector<Vector> acc;  // squared-gradient accumulator per block
  double nce_bias = 0.0;
  double nce_bias_acc = 0.0;
};

struct SavedModel {
  ModelParameters params;
  Vocabulary vocab;
  std::optional<OptimizerBlock> optimizer;
};

// Binary model file: magic/version header, kind and dimensions, vocabulary
// hash, vocabulary entries, parameter blocks as little-endian 64-bit floats,
// then an optional optimizer section.
void save_model(const std::filesystem::path& path, const ModelParameters& m,
                const Vocabulary& vocab,
                const OptimizerBlock* optimizer = nullptr);
SavedModel load_model(const std::filesystem::path& path);

}  // namespace codelm
