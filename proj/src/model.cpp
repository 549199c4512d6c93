#include "model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "error.hpp"

namespace codelm {

namespace {

constexpr char kMagic[4] = {'C', 'L', 'M', 'F'};
constexpr char kOptMagic[4] = {'O', 'P', 'T', 'S'};
constexpr uint32_t kFormatVersion = 1;

void check_dims(bool ok, const char* what) {
  if (!ok) {
    raise(ErrorKind::invalid_argument,
          std::string("dimension mismatch in ") + what);
  }
}

}  // namespace

std::string_view kind_name(ModelKind kind) {
  return kind == ModelKind::rnn ? "rnn" : "lstm";
}

ModelKind kind_from_name(std::string_view name) {
  if (name == "rnn") return ModelKind::rnn;
  if (name == "lstm") return ModelKind::lstm;
  raise(ErrorKind::invalid_argument,
        "unknown model kind '" + std::string(name) + "' (expected rnn or lstm)");
}

ModelParameters init_parameters(ModelKind kind, uint32_t vocab_size,
                                uint32_t embed_dim, uint32_t hidden_dim,
                                SeededRng& rng) {
  if (vocab_size < 1 || embed_dim < 1 || hidden_dim < 1) {
    raise(ErrorKind::invalid_argument,
          "model dimensions must all be positive");
  }
  const auto n = vocab_size, d = embed_dim, k = hidden_dim;
  ModelParameters m;
  m.embedding = Matrix(d, n);
  if (kind == ModelKind::rnn) {
    m.cell = RnnParameters{Vector(k, 0.0), Matrix(k, k), Matrix(k, d)};
  } else {
    auto gate = [&] { return LstmGate{Matrix(k, d), Matrix(k, k), Vector(k, 0.0)}; };
    m.cell = LstmParameters{gate(), gate(), gate(), gate()};
  }
  m.output = Matrix(n, k);

  // Matrices are drawn in block order; biases stay at their constants and
  // consume no draws.
  auto draw = [&](Matrix& mat) {
    for (double& w : mat.data) w = rng.next_uniform(-0.05, 0.05);
  };
  draw(m.embedding);
  if (auto* rnn = std::get_if<RnnParameters>(&m.cell)) {
    draw(rnn->w_tran);
    draw(rnn->w_in);
  } else {
    auto& lstm = std::get<LstmParameters>(m.cell);
    for (LstmGate* g : {&lstm.forget, &lstm.input, &lstm.output, &lstm.candidate}) {
      draw(g->w_in);
      draw(g->w_rec);
    }
    std::fill(lstm.forget.b.begin(), lstm.forget.b.end(), 1.0);
  }
  draw(m.output);
  return m;
}

StepState initial_state(const ModelParameters& m) {
  StepState s;
  s.h.assign(m.hidden_dim(), 0.0);
  if (m.kind() == ModelKind::lstm) s.c.assign(m.hidden_dim(), 0.0);
  return s;
}

Vector embed(const ModelParameters& m, uint32_t id) {
  if (id >= m.vocab_size()) {
    raise(ErrorKind::invalid_argument,
          "token id " + std::to_string(id) + " out of range (vocabulary size " +
              std::to_string(m.vocab_size()) + ")");
  }
  Vector x(m.embed_dim());
  for (size_t r = 0; r < m.embedding.rows; ++r) x[r] = m.embedding.at(r, id);
  return x;
}

StepState rnn_step(const StepState& prev, const Vector& x,
                   const RnnParameters& p) {
  const size_t k = p.b.size();
  check_dims(p.w_tran.rows == k && p.w_tran.cols == prev.h.size() &&
                 p.w_in.rows == k && p.w_in.cols == x.size(),
             "rnn_step");
  StepState next;
  next.h.assign(k, 0.0);
  Vector a = p.b;
  for (size_t r = 0; r < k; ++r) {
    a[r] += dot(p.w_tran.row(r), prev.h.data(), prev.h.size());
    a[r] += dot(p.w_in.row(r), x.data(), x.size());
    next.h[r] = std::tanh(a[r]);
  }
  return next;
}

StepState lstm_step(const StepState& prev, const Vector& x,
                    const LstmParameters& p) {
  const size_t k = p.forget.b.size();
  check_dims(prev.c.size() == k && prev.h.size() == p.forget.w_rec.cols &&
                 x.size() == p.forget.w_in.cols,
             "lstm_step");
  auto preact = [&](const LstmGate& g, size_t r) {
    return g.b[r] + dot(g.w_in.row(r), x.data(), x.size()) +
           dot(g.w_rec.row(r), prev.h.data(), prev.h.size());
  };
  StepState next;
  next.h.assign(k, 0.0);
  next.c.assign(k, 0.0);
  for (size_t r = 0; r < k; ++r) {
    const double f = sigmoid_scalar(preact(p.forget, r));
    const double i = sigmoid_scalar(preact(p.input, r));
    const double o = sigmoid_scalar(preact(p.output, r));
    const double g = std::tanh(preact(p.candidate, r));
    next.c[r] = f * prev.c[r] + i * g;
    next.h[r] = o * std::tanh(next.c[r]);
  }
  return next;
}

StepState step(const ModelParameters& m, const StepState& prev,
               const Vector& x) {
  if (const auto* rnn = std::get_if<RnnParameters>(&m.cell)) {
    return rnn_step(prev, x, *rnn);
  }
  return lstm_step(prev, x, std::get<LstmParameters>(m.cell));
}

Vector output_distribution(const Vector& h, const ModelParameters& m) {
  check_dims(h.size() == m.output.cols, "output_distribution");
  Vector logits(m.output.rows);
  matvec_into(m.output, h.data(), logits.data());
  return softmax(logits);
}

double output_log_prob(const Vector& h, uint32_t id, const ModelParameters& m) {
  check_dims(h.size() == m.output.cols, "output_log_prob");
  Vector logits(m.output.rows);
  matvec_into(m.output, h.data(), logits.data());
  return logits[id] - log_sum_exp(logits.data(), logits.size());
}

ForwardResult forward_sequence(const Sentence& sentence,
                               const ModelParameters& m) {
  if (sentence.ids.empty()) {
    raise(ErrorKind::invalid_argument, "forward_sequence: empty sentence");
  }
  ForwardResult result;
  result.states.reserve(sentence.length());
  result.distributions.reserve(sentence.length());
  StepState state = initial_state(m);
  for (uint32_t id : sentence.ids) {
    state = step(m, state, embed(m, id));
    result.distributions.push_back(output_distribution(state.h, m));
    result.states.push_back(state);
  }
  return result;
}

double sequence_log_prob(const Sentence& sentence, const ModelParameters& m) {
  if (sentence.ids.empty()) {
    raise(ErrorKind::invalid_argument, "sequence_log_prob: empty sentence");
  }
  StepState state = initial_state(m);
  double log_prob = 0.0;
  for (uint32_t id : sentence.ids) {
    log_prob += output_log_prob(state.h, id, m);
    state = step(m, state, embed(m, id));
  }
  return log_prob;
}

Vector mean_pool_representation(const std::vector<StepState>& states) {
  if (states.empty()) {
    raise(ErrorKind::invalid_argument, "mean_pool_representation: no states");
  }
  Vector mean(states.front().h.size(), 0.0);
  for (const StepState& s : states) {
    for (size_t i = 0; i < mean.size(); ++i) mean[i] += s.h[i];
  }
  const double inv = 1.0 / static_cast<double>(states.size());
  for (double& v : mean) v *= inv;
  return mean;
}

std::vector<std::span<double>> parameter_blocks(ModelParameters& m) {
  return detail::collect_blocks<std::span<double>>(m);
}

std::vector<std::span<const double>> parameter_blocks(
    const ModelParameters& m) {
  return detail::collect_blocks<std::span<const double>>(m);
}

std::vector<std::string> parameter_block_names(const ModelParameters& m) {
  if (m.kind() == ModelKind::rnn) {
    return {"embedding", "rnn.b", "rnn.w_tran", "rnn.w_in", "output"};
  }
  std::vector<std::string> names = {"embedding"};
  for (const char* gate : {"forget", "input", "output_gate", "candidate"}) {
    names.push_back(std::string("lstm.") + gate + ".w_in");
    names.push_back(std::string("lstm.") + gate + ".w_rec");
    names.push_back(std::string("lstm.") + gate + ".b");
  }
  names.push_back("output");
  return names;
}

size_t parameter_count(const ModelParameters& m) {
  size_t n = 0;
  for (const auto& block : parameter_blocks(m)) n += block.size();
  return n;
}

// ---------------------------------------------------------------------------
// Serialization. All integers and floats little-endian.

namespace {

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

struct Reader {
  const std::string& bytes;
  size_t pos = 0;
  std::string context;

  void need(size_t n) {
    if (pos + n > bytes.size()) {
      raise(ErrorKind::io, context + ": truncated model file");
    }
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * i);
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(size_t n) {
    need(n);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
  bool done() const { return pos == bytes.size(); }
};

std::string serialize_model(const ModelParameters& m, const Vocabulary& vocab,
                            const OptimizerBlock* optimizer) {
  if (vocab.size() != m.vocab_size()) {
    raise(ErrorKind::vocab_mismatch,
          "model expects vocabulary of size " + std::to_string(m.vocab_size()) +
              " but got " + std::to_string(vocab.size()));
  }
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kFormatVersion);
  put_u32(out, m.kind() == ModelKind::rnn ? 0u : 1u);
  put_u32(out, m.vocab_size());
  put_u32(out, m.embed_dim());
  put_u32(out, m.hidden_dim());
  put_u64(out, vocab.hash());
  for (uint32_t id = 0; id < vocab.size(); ++id) {
    const std::string& text = vocab.text_of(id);
    put_u32(out, static_cast<uint32_t>(text.size()));
    out += text;
    put_u64(out, vocab.count_of(id));
  }
  for (const auto& block : parameter_blocks(m)) {
    for (double v : block) put_f64(out, v);
  }
  if (optimizer) {
    out.append(kOptMagic, 4);
    put_f64(out, optimizer->nce_bias);
    put_f64(out, optimizer->nce_bias_acc);
    for (const Vector& acc : optimizer->acc) {
      for (double v : acc) put_f64(out, v);
    }
  }
  return out;
}

}  // namespace

uint64_t model_checksum(const ModelParameters& m) {
  std::string header;
  put_u32(header, m.kind() == ModelKind::rnn ? 0u : 1u);
  put_u32(header, m.vocab_size());
  put_u32(header, m.embed_dim());
  put_u32(header, m.hidden_dim());
  uint64_t h = fnv1a64(header.data(), header.size());
  for (const auto& block : parameter_blocks(m)) {
    h = fnv1a64(block.data(), block.size() * sizeof(double), h);
  }
  return h;
}

void save_model(const std::filesystem::path& path, const ModelParameters& m,
                const Vocabulary& vocab, const OptimizerBlock* optimizer) {
  const std::string bytes = serialize_model(m, vocab, optimizer);
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::io, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(ErrorKind::io, "failed writing " + path.string());
}

SavedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::io, "cannot open model file " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  Reader r{bytes, 0, path.string()};

  if (r.str(4) != std::string(kMagic, 4)) {
    raise(ErrorKind::io, path.string() + ": not a model file (bad magic)");
  }
  const uint32_t version = r.u32();
  if (version != kFormatVersion) {
    raise(ErrorKind::io, path.string() + ": unsupported format version " +
                             std::to_string(version));
  }
  const uint32_t kind_tag = r.u32();
  if (kind_tag > 1) {
    raise(ErrorKind::io, path.string() + ": unknown model kind tag");
  }
  const ModelKind kind = kind_tag == 0 ? ModelKind::rnn : ModelKind::lstm;
  const uint32_t n = r.u32();
  const uint32_t d = r.u32();
  const uint32_t k = r.u32();
  if (n == 0 || d == 0 || k == 0) {
    raise(ErrorKind::io, path.string() + ": invalid dimensions");
  }
  const uint64_t stored_hash = r.u64();

  std::vector<std::string> texts;
  std::vector<uint64_t> counts;
  texts.reserve(n);
  for (uint32_t id = 0; id < n; ++id) {
    const uint32_t len = r.u32();
    texts.push_back(r.str(len));
    counts.push_back(r.u64());
  }

  SavedModel model{
      .params = {},
      .vocab = Vocabulary::from_entries(std::move(texts), std::move(counts)),
      .optimizer = std::nullopt,
  };
  if (model.vocab.hash() != stored_hash) {
    raise(ErrorKind::vocab_mismatch,
          path.string() + ": vocabulary hash mismatch (file corrupt or "
                          "vocabulary rewritten)");
  }

  SeededRng unused(0);
  model.params = init_parameters(kind, n, d, k, unused);
  for (auto block : parameter_blocks(model.params)) {
    for (double& v : block) v = r.f64();
  }

  if (!r.done()) {
    if (r.str(4) != std::string(kOptMagic, 4)) {
      raise(ErrorKind::io, path.string() + ": unexpected trailing bytes");
    }
    OptimizerBlock opt;
    opt.nce_bias = r.f64();
    opt.nce_bias_acc = r.f64();
    for (const auto& block : parameter_blocks(model.params)) {
      Vector acc(block.size());
      for (double& v : acc) v = r.f64();
      opt.acc.push_back(std::move(acc));
    }
    model.optimizer = std::move(opt);
  }
  if (!r.done()) {
    raise(ErrorKind::io, path.string() + ": unexpected trailing bytes");
  }
  return model;
}

}  // namespace codelm
