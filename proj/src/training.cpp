#include "training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "error.hpp"

namespace codelm {

namespace {

double softplus(double x) {
  // log(1 + exp(x)) without overflow.
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

void axpy(double a, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// Per-step activations retained for the backward pass.
struct StepCache {
  Vector x;      // masked embedding input
  Vector h_out;  // masked h_{t-1} feeding the output layer
  // LSTM internals (unused for RNN):
  Vector f, i, o, g, c_tanh;
};

struct ForwardCache {
  std::vector<StepState> states;  // states[0] = initial, states[t+1] after token t
  std::vector<StepCache> steps;
};

Vector masked(const Vector& v, const DropoutPlan& plan,
              const std::vector<Vector>& masks, size_t t) {
  if (!plan.active()) return v;
  Vector out(v.size());
  const Vector& m = masks[t];
  for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] * m[i];
  return out;
}

ForwardCache run_forward(const Sentence& sentence, const ModelParameters& m,
                         const DropoutPlan& plan) {
  if (sentence.ids.empty()) {
    raise(ErrorKind::invalid_argument, "cannot train on an empty sentence");
  }
  const size_t k = m.hidden_dim();
  const bool lstm = m.kind() == ModelKind::lstm;
  const auto* cell = lstm ? &std::get<LstmParameters>(m.cell) : nullptr;
  const auto* rnn = lstm ? nullptr : &std::get<RnnParameters>(m.cell);

  ForwardCache cache;
  cache.states.reserve(sentence.length() + 1);
  cache.steps.reserve(sentence.length());
  cache.states.push_back(initial_state(m));

  for (size_t t = 0; t < sentence.length(); ++t) {
    const StepState& prev = cache.states.back();
    StepCache sc;
    sc.x = masked(embed(m, sentence.ids[t]), plan, plan.input, t);
    sc.h_out = masked(prev.h, plan, plan.output, t);

    StepState next;
    next.h.assign(k, 0.0);
    if (lstm) {
      next.c.assign(k, 0.0);
      sc.f.resize(k);
      sc.i.resize(k);
      sc.o.resize(k);
      sc.g.resize(k);
      sc.c_tanh.resize(k);
      auto preact = [&](const LstmGate& gate, size_t r) {
        return gate.b[r] + dot(gate.w_in.row(r), sc.x.data(), sc.x.size()) +
               dot(gate.w_rec.row(r), prev.h.data(), prev.h.size());
      };
      for (size_t r = 0; r < k; ++r) {
        sc.f[r] = sigmoid_scalar(preact(cell->forget, r));
        sc.i[r] = sigmoid_scalar(preact(cell->input, r));
        sc.o[r] = sigmoid_scalar(preact(cell->output, r));
        sc.g[r] = std::tanh(preact(cell->candidate, r));
        next.c[r] = sc.f[r] * prev.c[r] + sc.i[r] * sc.g[r];
        sc.c_tanh[r] = std::tanh(next.c[r]);
        next.h[r] = sc.o[r] * sc.c_tanh[r];
      }
    } else {
      for (size_t r = 0; r < k; ++r) {
        const double a = rnn->b[r] +
                         dot(rnn->w_tran.row(r), prev.h.data(), prev.h.size()) +
                         dot(rnn->w_in.row(r), sc.x.data(), sc.x.size());
        next.h[r] = std::tanh(a);
      }
    }
    cache.steps.push_back(std::move(sc));
    cache.states.push_back(std::move(next));
  }
  return cache;
}

// Gradient of the loss with respect to the output scores at one step:
// dense over the whole vocabulary (softmax objective) or sparse rows (NCE).
struct OutputGrad {
  Vector dense;
  std::vector<std::pair<uint32_t, double>> sparse;
};

// Shared backward pass over the recurrent stack. `outputs[t]` carries the
// score gradients for the prediction made from states[t].
void backward_through_stack(const Sentence& sentence, const ModelParameters& m,
                            const DropoutPlan& plan, const ForwardCache& cache,
                            const std::vector<OutputGrad>& outputs,
                            Gradients& grads) {
  const size_t k = m.hidden_dim();
  const size_t d = m.embed_dim();
  const bool lstm = m.kind() == ModelKind::lstm;
  const auto* cell = lstm ? &std::get<LstmParameters>(m.cell) : nullptr;
  const auto* rnn = lstm ? nullptr : &std::get<RnnParameters>(m.cell);
  auto* grad_cell = lstm ? &std::get<LstmParameters>(grads.cell) : nullptr;
  auto* grad_rnn = lstm ? nullptr : &std::get<RnnParameters>(grads.cell);

  Vector dh(k, 0.0);  // gradient w.r.t. states[t+1].h flowing from the future
  Vector dc(k, 0.0);
  Vector dh_prev(k), dc_prev(k), dx(d);
  Vector da_f(k), da_i(k), da_o(k), da_g(k), dh_out(k);

  for (size_t t = sentence.length(); t-- > 0;) {
    const StepCache& sc = cache.steps[t];
    const StepState& prev = cache.states[t];
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    std::fill(dx.begin(), dx.end(), 0.0);

    if (lstm) {
      const StepState& next = cache.states[t + 1];
      (void)next;
      std::fill(dc_prev.begin(), dc_prev.end(), 0.0);
      for (size_t r = 0; r < k; ++r) {
        const double do_r = dh[r] * sc.c_tanh[r];
        const double dct = dc[r] + dh[r] * sc.o[r] * (1.0 - sc.c_tanh[r] * sc.c_tanh[r]);
        const double df = dct * prev.c[r];
        const double di = dct * sc.g[r];
        const double dg = dct * sc.i[r];
        dc_prev[r] = dct * sc.f[r];
        da_f[r] = df * sc.f[r] * (1.0 - sc.f[r]);
        da_i[r] = di * sc.i[r] * (1.0 - sc.i[r]);
        da_o[r] = do_r * sc.o[r] * (1.0 - sc.o[r]);
        da_g[r] = dg * (1.0 - sc.g[r] * sc.g[r]);
      }
      const std::pair<const Vector*, LstmGate*> gates[4] = {
          {&da_f, &grad_cell->forget},
          {&da_i, &grad_cell->input},
          {&da_o, &grad_cell->output},
          {&da_g, &grad_cell->candidate},
      };
      const LstmGate* params[4] = {&cell->forget, &cell->input, &cell->output,
                                   &cell->candidate};
      for (int gi = 0; gi < 4; ++gi) {
        const Vector& da = *gates[gi].first;
        LstmGate& gg = *gates[gi].second;
        outer_add(gg.w_in, da.data(), sc.x.data());
        outer_add(gg.w_rec, da.data(), prev.h.data());
        for (size_t r = 0; r < k; ++r) gg.b[r] += da[r];
        matvec_transposed_add(params[gi]->w_rec, da.data(), dh_prev.data());
        matvec_transposed_add(params[gi]->w_in, da.data(), dx.data());
      }
    } else {
      // da = dh * (1 - h^2) through h = tanh(a)
      const Vector& h_next = cache.states[t + 1].h;
      for (size_t r = 0; r < k; ++r) {
        da_f[r] = dh[r] * (1.0 - h_next[r] * h_next[r]);
      }
      for (size_t r = 0; r < k; ++r) grad_rnn->b[r] += da_f[r];
      outer_add(grad_rnn->w_tran, da_f.data(), prev.h.data());
      outer_add(grad_rnn->w_in, da_f.data(), sc.x.data());
      matvec_transposed_add(rnn->w_tran, da_f.data(), dh_prev.data());
      matvec_transposed_add(rnn->w_in, da_f.data(), dx.data());
    }

    // Embedding gradient for token t; the backward mask mirrors the forward
    // one (sc.x already carries the mask, dx is w.r.t. the masked input).
    {
      const uint32_t id = sentence.ids[t];
      if (plan.active()) {
        const Vector& mask = plan.input[t];
        for (size_t r = 0; r < d; ++r) {
          grads.embedding.at(r, id) += dx[r] * mask[r];
        }
      } else {
        for (size_t r = 0; r < d; ++r) grads.embedding.at(r, id) += dx[r];
      }
    }

    // Output side: the prediction of token t was scored from sc.h_out.
    const OutputGrad& og = outputs[t];
    std::fill(dh_out.begin(), dh_out.end(), 0.0);
    if (!og.dense.empty()) {
      outer_add(grads.output, og.dense.data(), sc.h_out.data());
      matvec_transposed_add(m.output, og.dense.data(), dh_out.data());
    } else {
      for (const auto& [id, ds] : og.sparse) {
        axpy(ds, sc.h_out.data(), grads.output.row(id), k);
        axpy(ds, m.output.row(id), dh_out.data(), k);
        grads.nce_bias += ds;
      }
    }
    if (plan.active()) {
      const Vector& mask = plan.output[t];
      for (size_t r = 0; r < k; ++r) dh_prev[r] += dh_out[r] * mask[r];
    } else {
      for (size_t r = 0; r < k; ++r) dh_prev[r] += dh_out[r];
    }

    dh.swap(dh_prev);
    if (lstm) dc.swap(dc_prev);
  }
}

}  // namespace

TrainingConfig TrainingConfig::defaults(ModelKind kind) {
  TrainingConfig cfg;
  if (kind == ModelKind::rnn) {
    cfg.learning_rate = 0.01;
    cfg.adaptation_rate = 0.9;
    cfg.smoothing_eps = 1e-8;
  } else {
    cfg.learning_rate = 0.02;
    cfg.adaptation_rate = 0.99;
    cfg.smoothing_eps = 1e-7;
  }
  return cfg;
}

void TrainingConfig::validate() const {
  if (embed_dim < 1) raise(ErrorKind::invalid_argument, "embed_dim must be positive");
  if (learning_rate <= 0) raise(ErrorKind::invalid_argument, "learning rate must be positive");
  if (adaptation_rate <= 0 || adaptation_rate >= 1) {
    raise(ErrorKind::invalid_argument, "adaptation rate must be in (0, 1)");
  }
  if (smoothing_eps <= 0) raise(ErrorKind::invalid_argument, "smoothing epsilon must be positive");
  if (dropout_rate < 0 || dropout_rate >= 1) {
    raise(ErrorKind::invalid_argument, "dropout rate must be in [0, 1)");
  }
  if (clip_norm <= 0) raise(ErrorKind::invalid_argument, "clip norm must be positive");
  if (max_epochs < 1) raise(ErrorKind::invalid_argument, "max_epochs must be positive");
  if (patience < 1) raise(ErrorKind::invalid_argument, "patience must be positive");
  if (batch_size < 1) raise(ErrorKind::invalid_argument, "batch size must be positive");
}

Gradients Gradients::zeros_like(const ModelParameters& m) {
  Gradients g;
  g.embedding = Matrix(m.embedding.rows, m.embedding.cols);
  g.output = Matrix(m.output.rows, m.output.cols);
  const size_t k = m.hidden_dim();
  const size_t d = m.embed_dim();
  if (m.kind() == ModelKind::rnn) {
    g.cell = RnnParameters{Vector(k, 0.0), Matrix(k, k), Matrix(k, d)};
  } else {
    auto gate = [&] { return LstmGate{Matrix(k, d), Matrix(k, k), Vector(k, 0.0)}; };
    g.cell = LstmParameters{gate(), gate(), gate(), gate()};
  }
  return g;
}

void Gradients::scale(double factor) {
  for (auto block : blocks()) {
    for (double& v : block) v *= factor;
  }
  nce_bias *= factor;
}

DropoutPlan make_dropout_plan(size_t steps, size_t embed_dim,
                              size_t hidden_dim, double rate, SeededRng& rng) {
  if (rate < 0 || rate >= 1) {
    raise(ErrorKind::invalid_argument, "dropout rate must be in [0, 1)");
  }
  DropoutPlan plan;
  if (rate == 0.0) return plan;
  const double scale = 1.0 / (1.0 - rate);
  plan.input.reserve(steps);
  plan.output.reserve(steps);
  for (size_t t = 0; t < steps; ++t) {
    Vector in(embed_dim), out(hidden_dim);
    for (double& v : in) v = rng.next_bernoulli(rate) ? 0.0 : scale;
    for (double& v : out) v = rng.next_bernoulli(rate) ? 0.0 : scale;
    plan.input.push_back(std::move(in));
    plan.output.push_back(std::move(out));
  }
  return plan;
}

Vector apply_dropout(const Vector& v, double rate, SeededRng& rng,
                     bool training) {
  if (rate < 0 || rate >= 1) {
    raise(ErrorKind::invalid_argument, "dropout rate must be in [0, 1)");
  }
  if (!training || rate == 0.0) return v;
  const double scale = 1.0 / (1.0 - rate);
  Vector out(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    out[i] = rng.next_bernoulli(rate) ? 0.0 : v[i] * scale;
  }
  return out;
}

double log_loss(const Sentence& sentence, const ModelParameters& m) {
  return -sequence_log_prob(sentence, m);
}

double sentence_loss(const Sentence& sentence, const ModelParameters& m,
                     const DropoutPlan& plan) {
  const ForwardCache cache = run_forward(sentence, m, plan);
  Vector logits(m.vocab_size());
  double loss = 0.0;
  for (size_t t = 0; t < sentence.length(); ++t) {
    matvec_into(m.output, cache.steps[t].h_out.data(), logits.data());
    loss += log_sum_exp(logits.data(), logits.size()) - logits[sentence.ids[t]];
  }
  return loss;
}

double bptt_gradients(const Sentence& sentence, const ModelParameters& m,
                      const DropoutPlan& plan, Gradients& grads) {
  const ForwardCache cache = run_forward(sentence, m, plan);
  const size_t n = m.vocab_size();

  std::vector<OutputGrad> outputs(sentence.length());
  Vector logits(n);
  double loss = 0.0;
  for (size_t t = 0; t < sentence.length(); ++t) {
    matvec_into(m.output, cache.steps[t].h_out.data(), logits.data());
    const double lse = log_sum_exp(logits.data(), n);
    loss += lse - logits[sentence.ids[t]];
    OutputGrad& og = outputs[t];
    og.dense.resize(n);
    softmax_into(logits.data(), n, og.dense.data());
    og.dense[sentence.ids[t]] -= 1.0;
  }
  backward_through_stack(sentence, m, plan, cache, outputs, grads);
  return loss;
}

NoiseDistribution NoiseDistribution::from_counts(
    const std::vector<uint64_t>& counts) {
  if (counts.empty()) {
    raise(ErrorKind::invalid_argument, "noise distribution needs counts");
  }
  NoiseDistribution nd;
  nd.probs.resize(counts.size());
  double total = 0.0;
  for (uint64_t c : counts) total += static_cast<double>(c) + 1.0;
  for (size_t i = 0; i < counts.size(); ++i) {
    nd.probs[i] = (static_cast<double>(counts[i]) + 1.0) / total;
  }
  nd.cdf.resize(counts.size());
  double acc = 0.0;
  for (size_t i = 0; i < counts.size(); ++i) {
    acc += nd.probs[i];
    nd.cdf[i] = acc;
  }
  nd.cdf.back() = 1.0;
  return nd;
}

NoiseDistribution NoiseDistribution::from_training_set(
    const std::vector<Sentence>& sentences, uint32_t vocab_size) {
  std::vector<uint64_t> counts(vocab_size, 0);
  for (const Sentence& s : sentences) {
    for (uint32_t id : s.ids) {
      if (id >= vocab_size) {
        raise(ErrorKind::corpus, "sentence id exceeds vocabulary size");
      }
      ++counts[id];
    }
  }
  return from_counts(counts);
}

uint32_t NoiseDistribution::sample(SeededRng& rng) const {
  const double u = rng.next_double();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return static_cast<uint32_t>(std::min<size_t>(it - cdf.begin(), cdf.size() - 1));
}

double nce_posterior(double score, double k_times_q) {
  return sigmoid_scalar(score - std::log(k_times_q));
}

std::vector<std::vector<uint32_t>> draw_sentence_noise(
    size_t steps, uint32_t k, const NoiseDistribution& noise, SeededRng& rng) {
  std::vector<std::vector<uint32_t>> out(steps);
  for (auto& step : out) {
    step.reserve(k);
    for (uint32_t j = 0; j < k; ++j) step.push_back(noise.sample(rng));
  }
  return out;
}

namespace {

// Loss and score gradients for one NCE prediction; shared by the gradient
// and loss-only paths.
double nce_step_scores(const Vector& h, uint32_t target,
                       const ModelParameters& m, const NoiseDistribution& noise,
                       uint32_t k, const std::vector<uint32_t>& noise_ids,
                       double nce_bias,
                       std::vector<std::pair<uint32_t, double>>* dscores) {
  const double kd = static_cast<double>(k);
  auto score = [&](uint32_t id) {
    return dot(m.output.row(id), h.data(), h.size()) + nce_bias;
  };
  const double z_target = score(target) - std::log(kd * noise.prob(target));
  double loss = softplus(-z_target);
  if (dscores) {
    dscores->emplace_back(target, sigmoid_scalar(z_target) - 1.0);
  }
  for (uint32_t id : noise_ids) {
    const double z = score(id) - std::log(kd * noise.prob(id));
    loss += softplus(z);
    if (dscores) dscores->emplace_back(id, sigmoid_scalar(z));
  }
  return loss;
}

}  // namespace

NceStepResult nce_step_gradients(const Vector& h, uint32_t target,
                                 const ModelParameters& m,
                                 const NoiseDistribution& noise, uint32_t k,
                                 const std::vector<uint32_t>& noise_ids,
                                 double nce_bias, Gradients& grads) {
  NceStepResult result;
  std::vector<std::pair<uint32_t, double>> dscores;
  dscores.reserve(noise_ids.size() + 1);
  result.loss =
      nce_step_scores(h, target, m, noise, k, noise_ids, nce_bias, &dscores);
  result.dh.assign(h.size(), 0.0);
  for (const auto& [id, ds] : dscores) {
    axpy(ds, h.data(), grads.output.row(id), h.size());
    axpy(ds, m.output.row(id), result.dh.data(), h.size());
    grads.nce_bias += ds;
  }
  return result;
}

NceStepResult nce_step_gradients(const Vector& h, uint32_t target,
                                 const ModelParameters& m,
                                 const NoiseDistribution& noise, uint32_t k,
                                 SeededRng& rng, double nce_bias,
                                 Gradients& grads) {
  std::vector<uint32_t> noise_ids;
  noise_ids.reserve(k);
  for (uint32_t j = 0; j < k; ++j) noise_ids.push_back(noise.sample(rng));
  return nce_step_gradients(h, target, m, noise, k, noise_ids, nce_bias, grads);
}

double nce_sentence_gradients(const Sentence& sentence,
                              const ModelParameters& m,
                              const DropoutPlan& plan,
                              const NoiseDistribution& noise, uint32_t k,
                              const std::vector<std::vector<uint32_t>>& noise_ids,
                              double nce_bias, Gradients& grads) {
  const ForwardCache cache = run_forward(sentence, m, plan);
  std::vector<OutputGrad> outputs(sentence.length());
  double loss = 0.0;
  for (size_t t = 0; t < sentence.length(); ++t) {
    loss += nce_step_scores(cache.steps[t].h_out, sentence.ids[t], m, noise, k,
                            noise_ids[t], nce_bias, &outputs[t].sparse);
  }
  backward_through_stack(sentence, m, plan, cache, outputs, grads);
  return loss;
}

double nce_sentence_loss(const Sentence& sentence, const ModelParameters& m,
                         const DropoutPlan& plan,
                         const NoiseDistribution& noise, uint32_t k,
                         const std::vector<std::vector<uint32_t>>& noise_ids,
                         double nce_bias) {
  const ForwardCache cache = run_forward(sentence, m, plan);
  double loss = 0.0;
  for (size_t t = 0; t < sentence.length(); ++t) {
    loss += nce_step_scores(cache.steps[t].h_out, sentence.ids[t], m, noise, k,
                            noise_ids[t], nce_bias, nullptr);
  }
  return loss;
}

double gradient_global_norm(const Gradients& grads) {
  double sq = grads.nce_bias * grads.nce_bias;
  for (const auto& block : grads.blocks()) {
    for (double v : block) sq += v * v;
  }
  return std::sqrt(sq);
}

void clip_gradients(Gradients& grads, double max_norm) {
  if (max_norm <= 0) {
    raise(ErrorKind::invalid_argument, "clip norm must be positive");
  }
  const double norm = gradient_global_norm(grads);
  if (!std::isfinite(norm)) {
    raise(ErrorKind::numeric, "non-finite gradient norm");
  }
  if (norm > max_norm) grads.scale(max_norm / norm);
}

RmspropState RmspropState::zeros_like(const ModelParameters& m) {
  RmspropState s;
  for (const auto& block : parameter_blocks(m)) {
    s.acc.emplace_back(block.size(), 0.0);
  }
  return s;
}

void rmsprop_update(ModelParameters& m, double& nce_bias,
                    const Gradients& grads, RmspropState& state,
                    const TrainingConfig& cfg) {
  const double rho = cfg.adaptation_rate;
  const double eta = cfg.learning_rate;
  const double eps = cfg.smoothing_eps;
  auto params = parameter_blocks(m);
  auto gblocks = grads.blocks();
  if (params.size() != gblocks.size() || params.size() != state.acc.size()) {
    raise(ErrorKind::invalid_argument, "rmsprop: block shape mismatch");
  }
  for (size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    auto g = gblocks[b];
    Vector& acc = state.acc[b];
    if (p.size() != g.size() || p.size() != acc.size()) {
      raise(ErrorKind::invalid_argument, "rmsprop: block size mismatch");
    }
    for (size_t i = 0; i < p.size(); ++i) {
      acc[i] = rho * acc[i] + (1.0 - rho) * g[i] * g[i];
      p[i] -= eta * g[i] / std::sqrt(acc[i] + eps);
    }
  }
  state.nce_bias_acc =
      rho * state.nce_bias_acc + (1.0 - rho) * grads.nce_bias * grads.nce_bias;
  nce_bias -= eta * grads.nce_bias / std::sqrt(state.nce_bias_acc + eps);
}

namespace {

struct TrainingSnapshot {
  ModelParameters model;
  RmspropState optimizer;
  double nce_bias = 0.0;
};

double validation_perplexity(const std::vector<Sentence>& sentences,
                             const ModelParameters& m) {
  double nll = 0.0;
  uint64_t tokens = 0;
  for (const Sentence& s : sentences) {
    nll -= sequence_log_prob(s, m);
    tokens += s.length();
  }
  return std::exp(nll / static_cast<double>(tokens));
}

}  // namespace

TrainResult train(const std::vector<Sentence>& train_set,
                  const std::vector<Sentence>& valid_set, uint32_t vocab_size,
                  ModelKind kind, const TrainingConfig& cfg) {
  cfg.validate();
  if (train_set.empty() || valid_set.empty()) {
    raise(ErrorKind::corpus, "training and validation sets must be non-empty");
  }
  if (cfg.nce_k > 0 && cfg.nce_k >= vocab_size) {
    raise(ErrorKind::invalid_argument,
          "nce_k must be smaller than the vocabulary size");
  }

  const uint32_t d = cfg.embed_dim;
  const uint32_t k = cfg.effective_hidden_dim();
  SeededRng rng(cfg.seed);
  ModelParameters m = init_parameters(kind, vocab_size, d, k, rng);
  RmspropState opt = RmspropState::zeros_like(m);
  double nce_bias = -std::log(static_cast<double>(vocab_size));

  NoiseDistribution noise;
  if (cfg.nce_k > 0) {
    noise = NoiseDistribution::from_training_set(train_set, vocab_size);
  }

  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  EarlyStopping<TrainingSnapshot> stopper(cfg.patience);
  TrainResult result;

  for (uint32_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.next_index(i)]);
    }

    double epoch_loss = 0.0;
    uint64_t epoch_tokens = 0;
    const size_t batches =
        (order.size() + cfg.batch_size - 1) / cfg.batch_size;
    for (size_t batch = 0; batch < batches; ++batch) {
      const size_t begin = batch * cfg.batch_size;
      const size_t end = std::min(begin + cfg.batch_size, order.size());

      Gradients grads = Gradients::zeros_like(m);
      double batch_loss = 0.0;
      try {
        for (size_t i = begin; i < end; ++i) {
          const Sentence& s = train_set[order[i]];
          DropoutPlan plan = make_dropout_plan(s.length(), d, k,
                                               cfg.dropout_rate, rng);
          if (cfg.nce_k > 0) {
            const auto noise_ids =
                draw_sentence_noise(s.length(), cfg.nce_k, noise, rng);
            batch_loss += nce_sentence_gradients(s, m, plan, noise, cfg.nce_k,
                                                 noise_ids, nce_bias, grads);
          } else {
            batch_loss += bptt_gradients(s, m, plan, grads);
          }
          epoch_tokens += s.length();
        }
        if (!std::isfinite(batch_loss)) {
          raise(ErrorKind::numeric, "non-finite loss");
        }
        grads.scale(1.0 / static_cast<double>(end - begin));
        clip_gradients(grads, cfg.clip_norm);
        rmsprop_update(m, nce_bias, grads, opt, cfg);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::numeric) {
          raise(ErrorKind::numeric,
                "training aborted at epoch " + std::to_string(epoch) +
                    ", batch " + std::to_string(batch + 1) + ": " + e.what());
        }
        throw;
      }
      epoch_loss += batch_loss;
    }

    const double val_ppl = validation_perplexity(valid_set, m);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      epoch_start)
            .count();
    result.log.push_back(EpochLog{
        epoch, epoch_loss / static_cast<double>(epoch_tokens), val_ppl,
        seconds});
    result.epochs_run = epoch;

    if (stopper.observe(epoch, val_ppl, {m, opt, nce_bias})) break;
  }

  const TrainingSnapshot& best = stopper.best_snapshot();
  result.model = best.model;
  result.best_epoch = stopper.best_epoch();
  result.best_validation_perplexity = stopper.best_validation_perplexity();
  result.optimizer.nce_bias = best.nce_bias;
  result.optimizer.nce_bias_acc = best.optimizer.nce_bias_acc;
  result.optimizer.acc = best.optimizer.acc;
  return result;
}

void write_training_log_file(const std::filesystem::path& path, ModelKind kind,
                             uint32_t vocab_size, const TrainingConfig& cfg,
                             const TrainResult& result) {
  auto fmt = [](const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return std::string(buf);
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::io, "cannot write " + path.string());
  out << "# kind\t" << kind_name(kind) << '\n';
  out << "# objective\t" << (cfg.nce_k > 0 ? "nce" : "softmax") << '\n';
  out << "# vocab_size\t" << vocab_size << '\n';
  out << "# embed_dim\t" << cfg.embed_dim << '\n';
  out << "# hidden_dim\t" << cfg.effective_hidden_dim() << '\n';
  out << "# learning_rate\t" << fmt("%g", cfg.learning_rate) << '\n';
  out << "# adaptation_rate\t" << fmt("%g", cfg.adaptation_rate) << '\n';
  out << "# smoothing_eps\t" << fmt("%g", cfg.smoothing_eps) << '\n';
  out << "# nce_k\t" << cfg.nce_k << '\n';
  out << "# dropout_rate\t" << fmt("%g", cfg.dropout_rate) << '\n';
  out << "# clip_norm\t" << fmt("%g", cfg.clip_norm) << '\n';
  out << "# max_epochs\t" << cfg.max_epochs << '\n';
  out << "# patience\t" << cfg.patience << '\n';
  out << "# batch_size\t" << cfg.batch_size << '\n';
  out << "# seed\t" << cfg.seed << '\n';
  out << "# best_epoch\t" << result.best_epoch << '\n';
  out << "epoch\ttrain_loss_per_token\tvalidation_perplexity\tseconds\n";
  for (const EpochLog& e : result.log) {
    out << e.epoch << '\t' << fmt("%.6f", e.train_loss_per_token) << '\t'
        << fmt("%.6f", e.validation_perplexity) << '\t'
        << fmt("%.3f", e.seconds) << '\n';
  }
  if (!out) raise(ErrorKind::io, "failed writing " + path.string());
}

GradientCheckReport compare_gradient_to_finite_difference(
    ModelParameters& m, const Gradients& analytic,
    const std::function<double()>& loss, double h, double tolerance,
    std::vector<ExtraCoordinate> extras) {
  GradientCheckReport report;
  report.tolerance = tolerance;
  const auto names = parameter_block_names(m);
  auto params = parameter_blocks(m);
  auto gblocks = analytic.blocks();

  // Five-point central stencil. The criterion floors relative error at
  // |grad| = 1e-8 while the loss itself is O(10), so the plain two-point
  // quotient drowns tiny coordinates in rounding noise; the higher-order
  // stencil with a wider step keeps both truncation and roundoff below
  // the tolerance.
  auto check_coordinate = [&](double* p, double a, const std::string& block,
                              size_t index) {
    const double saved = *p;
    *p = saved + 2.0 * h;
    const double f2 = loss();
    *p = saved + h;
    const double f1 = loss();
    *p = saved - h;
    const double fm1 = loss();
    *p = saved - 2.0 * h;
    const double fm2 = loss();
    *p = saved;
    const double numeric = (fm2 - 8.0 * fm1 + 8.0 * f1 - f2) / (12.0 * h);
    const double rel =
        std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    ++report.coordinates;
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_block = block;
      report.worst_index = index;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  };

  for (size_t b = 0; b < params.size(); ++b) {
    for (size_t i = 0; i < params[b].size(); ++i) {
      check_coordinate(&params[b][i], gblocks[b][i], names[b], i);
    }
  }
  for (const ExtraCoordinate& extra : extras) {
    check_coordinate(extra.value, extra.analytic, extra.name, 0);
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

GradientCheckReport gradient_check(ModelKind kind, uint32_t vocab_size,
                                   uint32_t embed_dim, uint32_t hidden_dim,
                                   size_t sentence_len, uint64_t seed,
                                   double tolerance) {
  SeededRng rng(seed);
  ModelParameters m =
      init_parameters(kind, vocab_size, embed_dim, hidden_dim, rng);
  Sentence s;
  for (size_t t = 0; t < sentence_len; ++t) {
    s.ids.push_back(static_cast<uint32_t>(rng.next_index(vocab_size)));
  }
  DropoutPlan no_dropout;
  Gradients grads = Gradients::zeros_like(m);
  bptt_gradients(s, m, no_dropout, grads);
  return compare_gradient_to_finite_difference(
      m, grads, [&] { return log_loss(s, m); }, 1e-2, tolerance);
}

GradientCheckReport nce_gradient_check(ModelKind kind, uint32_t vocab_size,
                                       uint32_t embed_dim, uint32_t hidden_dim,
                                       size_t sentence_len, uint32_t nce_k,
                                       uint64_t seed, double tolerance) {
  SeededRng rng(seed);
  ModelParameters m =
      init_parameters(kind, vocab_size, embed_dim, hidden_dim, rng);
  Sentence s;
  for (size_t t = 0; t < sentence_len; ++t) {
    s.ids.push_back(static_cast<uint32_t>(rng.next_index(vocab_size)));
  }
  // A mildly non-uniform noise distribution so q(w) participates.
  std::vector<uint64_t> counts(vocab_size);
  for (uint32_t i = 0; i < vocab_size; ++i) counts[i] = (i % 3) + 1;
  const NoiseDistribution noise = NoiseDistribution::from_counts(counts);
  const auto noise_ids = draw_sentence_noise(sentence_len, nce_k, noise, rng);

  double nce_bias = -std::log(static_cast<double>(vocab_size));
  DropoutPlan no_dropout;
  Gradients grads = Gradients::zeros_like(m);
  nce_sentence_gradients(s, m, no_dropout, noise, nce_k, noise_ids, nce_bias,
                         grads);
  return compare_gradient_to_finite_difference(
      m, grads,
      [&] {
        return nce_sentence_loss(s, m, no_dropout, noise, nce_k, noise_ids,
                                 nce_bias);
      },
      1e-2, tolerance,
      {ExtraCoordinate{&nce_bias, grads.nce_bias, "nce_bias"}});
}

}  // namespace codelm
