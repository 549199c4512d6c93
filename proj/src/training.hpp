#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "model.hpp"
#include "numerics.hpp"
#include "rng.hpp"

namespace codelm {

struct TrainingConfig {
  uint32_t embed_dim = 50;    // D
  uint32_t hidden_dim = 0;    // K; 0 means same as embed_dim
  double learning_rate = 0.01;    // eta
  double adaptation_rate = 0.9;   // rho
  double smoothing_eps = 1e-8;    // epsilon
  uint32_t nce_k = 0;             // 0 = exact softmax objective
  double dropout_rate = 0.5;
  double clip_norm = 5.0;
  uint32_t max_epochs = 50;
  uint32_t patience = 5;
  uint32_t batch_size = 32;
  uint64_t seed = 42;

  // RMSprop settings tuned per model kind: RNN eta=0.01, rho=0.9, eps=1e-8;
  // LSTM eta=0.02, rho=0.99, eps=1e-7.
  static TrainingConfig defaults(ModelKind kind);

  uint32_t effective_hidden_dim() const {
    return hidden_dim == 0 ? embed_dim : hidden_dim;
  }
  void validate() const;
};

// Same shape tree as ModelParameters, plus the NCE normalization offset.
struct Gradients {
  Matrix embedding;
  CellParameters cell;
  Matrix output;
  double nce_bias = 0.0;

  static Gradients zeros_like(const ModelParameters& m);
  std::vector<std::span<double>> blocks() {
    return detail::collect_blocks<std::span<double>>(*this);
  }
  std::vector<std::span<const double>> blocks() const {
    return detail::collect_blocks<std::span<const double>>(*this);
  }
  void scale(double factor);
};

// Pre-drawn inverted-dropout masks, one per time step and site. Mask values
// are 0 (dropped) or 1/(1-rate) (kept and rescaled); inactive plans leave
// activations untouched, which makes inference an exact identity.
struct DropoutPlan {
  std::vector<Vector> input;   // per step, embed_dim entries
  std::vector<Vector> output;  // per step, hidden_dim entries

  bool active() const { return !input.empty(); }
};

DropoutPlan make_dropout_plan(size_t steps, size_t embed_dim,
                              size_t hidden_dim, double rate, SeededRng& rng);

// Element-wise inverted dropout: training mode zeroes each element with
// probability `rate` and rescales survivors by 1/(1-rate); inference mode is
// the identity.
Vector apply_dropout(const Vector& v, double rate, SeededRng& rng,
                     bool training);

// -log P(sentence) under the model; Eq.-style sum of per-token log losses.
double log_loss(const Sentence& sentence, const ModelParameters& m);

// Softmax objective with dropout masks applied (empty plan = no dropout).
double sentence_loss(const Sentence& sentence, const ModelParameters& m,
                     const DropoutPlan& plan);

// Exact BPTT through the whole sentence. Accumulates into `grads` and
// returns the loss. Only embedding columns of tokens present in the sentence
// receive gradient.
double bptt_gradients(const Sentence& sentence, const ModelParameters& m,
                      const DropoutPlan& plan, Gradients& grads);

// Smoothed unigram distribution over the vocabulary, used as the NCE noise
// q(w); strictly positive by construction (add-1 smoothing).
struct NoiseDistribution {
  Vector probs;
  Vector cdf;

  static NoiseDistribution from_counts(const std::vector<uint64_t>& counts);
  static NoiseDistribution from_training_set(
      const std::vector<Sentence>& sentences, uint32_t vocab_size);

  double prob(uint32_t id) const { return probs[id]; }
  uint32_t sample(SeededRng& rng) const;
};

// P(data | w) = exp(s) / (exp(s) + k q(w)), as a function of the corrected
// score z = s - log(k q(w)).
double nce_posterior(double score, double k_times_q);

// k noise ids per step, drawn in step order.
std::vector<std::vector<uint32_t>> draw_sentence_noise(
    size_t steps, uint32_t k, const NoiseDistribution& noise, SeededRng& rng);

// Single prediction step: binary-classification NCE loss for a target
// against the given noise samples, scored from hidden state h. Accumulates
// the U-row and offset gradients into `grads`; dh is returned for the
// caller's backward pass through the recurrent stack.
struct NceStepResult {
  double loss = 0.0;
  Vector dh;
};
NceStepResult nce_step_gradients(const Vector& h, uint32_t target,
                                 const ModelParameters& m,
                                 const NoiseDistribution& noise,
                                 uint32_t k,
                                 const std::vector<uint32_t>& noise_ids,
                                 double nce_bias, Gradients& grads);

// Same, drawing the k noise samples from rng.
NceStepResult nce_step_gradients(const Vector& h, uint32_t target,
                                 const ModelParameters& m,
                                 const NoiseDistribution& noise, uint32_t k,
                                 SeededRng& rng, double nce_bias,
                                 Gradients& grads);

// Whole-sentence NCE objective and exact gradients through the stack.
double nce_sentence_gradients(const Sentence& sentence,
                              const ModelParameters& m,
                              const DropoutPlan& plan,
                              const NoiseDistribution& noise, uint32_t k,
                              const std::vector<std::vector<uint32_t>>& noise_ids,
                              double nce_bias, Gradients& grads);

// Loss only, same frozen noise; the finite-difference target for NCE checks.
double nce_sentence_loss(const Sentence& sentence, const ModelParameters& m,
                         const DropoutPlan& plan,
                         const NoiseDistribution& noise, uint32_t k,
                         const std::vector<std::vector<uint32_t>>& noise_ids,
                         double nce_bias);

double gradient_global_norm(const Gradients& grads);

// Rescales so the global L2 norm never exceeds max_norm. Raises
// ErrorKind::numeric on non-finite gradients.
void clip_gradients(Gradients& grads, double max_norm);

struct RmspropState {
  std::vector<Vector> acc;  // squared-gradient accumulators, block order
  double nce_bias_acc = 0.0;

  static RmspropState zeros_like(const ModelParameters& m);
};

// Per coordinate: acc <- rho acc + (1-rho) g^2; param <- param - eta g /
// sqrt(acc + eps).
void rmsprop_update(ModelParameters& m, double& nce_bias,
                    const Gradients& grads, RmspropState& state,
                    const TrainingConfig& cfg);

// Tracks the best validation perplexity and a snapshot of the model that
// achieved it; signals a stop after `patience` consecutive non-improving
// epochs.
template <class Snapshot>
class EarlyStopping {
 public:
  explicit EarlyStopping(uint32_t patience) : patience_(patience) {}

  // Returns true when training should halt.
  bool observe(uint32_t epoch, double validation_perplexity,
               const Snapshot& snapshot) {
    if (validation_perplexity < best_) {
      best_ = validation_perplexity;
      best_epoch_ = epoch;
      epochs_since_improvement_ = 0;
      best_snapshot_ = snapshot;
      return false;
    }
    return ++epochs_since_improvement_ >= patience_;
  }

  double best_validation_perplexity() const { return best_; }
  uint32_t best_epoch() const { return best_epoch_; }
  uint32_t epochs_since_improvement() const { return epochs_since_improvement_; }
  const Snapshot& best_snapshot() const { return best_snapshot_; }

 private:
  uint32_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  uint32_t best_epoch_ = 0;
  uint32_t epochs_since_improvement_ = 0;
  Snapshot best_snapshot_{};
};

struct EpochLog {
  uint32_t epoch = 0;
  double train_loss_per_token = 0.0;
  double validation_perplexity = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  ModelParameters model;  // snapshot from the best epoch
  OptimizerBlock optimizer;
  std::vector<EpochLog> log;
  uint32_t best_epoch = 0;
  uint32_t epochs_run = 0;
  double best_validation_perplexity =
      std::numeric_limits<double>::infinity();
};

// Mini-batch RMSprop over seeded-shuffled sentences with per-epoch
// validation and early stopping. Deterministic given (seed, config, corpus).
// Raises ErrorKind::numeric naming the epoch and batch if the loss goes
// non-finite.
TrainResult train(const std::vector<Sentence>& train_set,
                  const std::vector<Sentence>& valid_set, uint32_t vocab_size,
                  ModelKind kind, const TrainingConfig& cfg);

// On-disk training log: '#'-prefixed config echo, then one tab-separated
// line per epoch (epoch, mean train loss per token, validation perplexity,
// elapsed seconds).
void write_training_log_file(const std::filesystem::path& path, ModelKind kind,
                             uint32_t vocab_size, const TrainingConfig& cfg,
                             const TrainResult& result);

// ---------------------------------------------------------------------------
// Gradient verification harness.

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::string worst_block;
  size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  size_t coordinates = 0;
  double tolerance = 1e-4;
  bool passed = false;
};

struct ExtraCoordinate {
  double* value = nullptr;
  double analytic = 0.0;
  const char* name = "";
};

// Central-difference comparison of an analytic gradient against the loss
// function evaluated at perturbed parameters. Relative error is
// |a - n| / max(|a|, |n|, 1e-8).
GradientCheckReport compare_gradient_to_finite_difference(
    ModelParameters& m, const Gradients& analytic,
    const std::function<double()>& loss, double h, double tolerance,
    std::vector<ExtraCoordinate> extras = {});

GradientCheckReport gradient_check(ModelKind kind, uint32_t vocab_size,
                                   uint32_t embed_dim, uint32_t hidden_dim,
                                   size_t sentence_len, uint64_t seed,
                                   double tolerance = 1e-4);

GradientCheckReport nce_gradient_check(ModelKind kind, uint32_t vocab_size,
                                       uint32_t embed_dim, uint32_t hidden_dim,
                                       size_t sentence_len, uint32_t nce_k,
                                       uint64_t seed, double tolerance = 1e-4);

}  // namespace codelm
