#include "evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "error.hpp"

namespace codelm {

namespace {

std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace

PerplexityReport perplexity(const std::vector<Sentence>& sentences,
                            const ModelParameters& m) {
  if (sentences.empty()) {
    raise(ErrorKind::invalid_argument, "perplexity over an empty sentence set");
  }
  PerplexityReport report;
  report.kind = m.kind();
  report.vocab_size = m.vocab_size();
  report.embed_dim = m.embed_dim();
  report.hidden_dim = m.hidden_dim();
  report.sentence_count = sentences.size();
  double nll = 0.0;
  for (const Sentence& s : sentences) {
    if (s.ids.empty()) {
      raise(ErrorKind::invalid_argument, "perplexity over an empty sentence");
    }
    nll -= sequence_log_prob(s, m);
    report.token_count += s.length();
  }
  report.perplexity = std::exp(nll / static_cast<double>(report.token_count));
  return report;
}

double improvement_percent(double rnn_ppl, double lstm_ppl) {
  if (rnn_ppl <= 0) {
    raise(ErrorKind::invalid_argument, "rnn perplexity must be positive");
  }
  const double raw = 100.0 * (rnn_ppl - lstm_ppl) / rnn_ppl;
  return std::round(raw * 10.0) / 10.0;
}

namespace {

std::string cell_dir_name(uint32_t sent_len, uint32_t embed_dim,
                          ModelKind kind) {
  return std::to_string(sent_len) + "_" + std::to_string(embed_dim) + "_" +
         std::string(kind_name(kind));
}

std::string cell_fingerprint(const GridSpec& spec, const TrainingConfig& cfg,
                             uint32_t sent_len, uint32_t embed_dim,
                             ModelKind kind) {
  nlohmann::json j = {
      {"sent_len", sent_len},
      {"embed_dim", embed_dim},
      {"kind", std::string(kind_name(kind))},
      {"vocab_size", spec.vocab_size},
      {"min_count", spec.min_count},
      {"per_split", spec.sentences_per_split},
      {"repetitions", spec.repetitions},
      {"base_seed", spec.base_seed},
      {"nce_k", cfg.nce_k},
      {"dropout", cfg.dropout_rate},
      {"clip", cfg.clip_norm},
      {"epochs", cfg.max_epochs},
      {"patience", cfg.patience},
      {"batch", cfg.batch_size},
  };
  return j.dump();
}

// Trains one (cell, kind) with the per-kind RMSprop settings layered over
// the shared knobs, averaging test perplexity over repetitions.
double run_cell_kind(const PreparedCorpus& corpus, const GridSpec& spec,
                     const TrainingConfig& base_cfg, uint32_t sent_len,
                     uint32_t embed_dim, ModelKind kind, size_t cell_index,
                     const std::filesystem::path& runs_dir) {
  const std::filesystem::path dir =
      runs_dir / cell_dir_name(sent_len, embed_dim, kind);
  const std::filesystem::path result_path = dir / "result.json";
  const std::string fingerprint =
      cell_fingerprint(spec, base_cfg, sent_len, embed_dim, kind);

  if (std::filesystem::exists(result_path)) {
    std::ifstream in(result_path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (!j.is_discarded() && j.value("fingerprint", "") == fingerprint) {
      return j.at("mean_perplexity").get<double>();
    }
  }
  std::filesystem::create_directories(dir);

  TrainingConfig cfg = TrainingConfig::defaults(kind);
  cfg.embed_dim = embed_dim;
  cfg.hidden_dim = embed_dim;  // D = K
  cfg.nce_k = base_cfg.nce_k;
  cfg.dropout_rate = base_cfg.dropout_rate;
  cfg.clip_norm = base_cfg.clip_norm;
  cfg.max_epochs = base_cfg.max_epochs;
  cfg.patience = base_cfg.patience;
  cfg.batch_size = base_cfg.batch_size;

  std::vector<double> perplexities;
  std::vector<uint64_t> seeds;
  for (uint32_t rep = 0; rep < spec.repetitions; ++rep) {
    cfg.seed = spec.base_seed + cell_index * spec.repetitions + rep;
    seeds.push_back(cfg.seed);
    TrainResult trained =
        train(corpus.partition.train, corpus.partition.validation,
              corpus.vocab.size(), kind, cfg);
    write_training_log_file(dir / ("train_rep" + std::to_string(rep) + ".log"),
                            kind, corpus.vocab.size(), cfg, trained);
    perplexities.push_back(
        perplexity(corpus.partition.test, trained.model).perplexity);
  }
  double mean = 0.0;
  for (double p : perplexities) mean += p;
  mean /= static_cast<double>(perplexities.size());

  nlohmann::json j = {
      {"fingerprint", fingerprint},
      {"seeds", seeds},
      {"perplexities", perplexities},
      {"mean_perplexity", mean},
  };
  std::ofstream out(result_path);
  out << j.dump(2) << '\n';
  return mean;
}

}  // namespace

GridResult run_grid(const std::vector<TokenSequence>& documents,
                    const GridSpec& spec, const TrainingConfig& base_cfg,
                    const std::filesystem::path& out_dir) {
  if (spec.sentence_lengths.empty() || spec.embed_dims.empty()) {
    raise(ErrorKind::invalid_argument, "grid axes must be non-empty");
  }
  if (spec.repetitions < 1) {
    raise(ErrorKind::invalid_argument, "repetitions must be at least 1");
  }
  const std::filesystem::path runs_dir = out_dir / "runs";
  std::filesystem::create_directories(runs_dir);

  GridResult result;
  size_t cell_index = 0;
  for (uint32_t sent_len : spec.sentence_lengths) {
    for (uint32_t embed_dim : spec.embed_dims) {
      GridCell cell;
      cell.sent_len = sent_len;
      cell.embed_dim = embed_dim;
      try {
        PartitionConfig pc;
        pc.sentence_length = sent_len;
        pc.sentences_per_split = spec.sentences_per_split;
        pc.vocab_size = spec.vocab_size;
        pc.min_count = spec.min_count;
        pc.seed = spec.base_seed;
        const PreparedCorpus corpus = partition_corpus(documents, pc);
        cell.rnn_perplexity =
            run_cell_kind(corpus, spec, base_cfg, sent_len, embed_dim,
                          ModelKind::rnn, cell_index, runs_dir);
        cell.lstm_perplexity =
            run_cell_kind(corpus, spec, base_cfg, sent_len, embed_dim,
                          ModelKind::lstm, cell_index, runs_dir);
        cell.improvement =
            improvement_percent(*cell.rnn_perplexity, *cell.lstm_perplexity);
      } catch (const Error& e) {
        cell.error = e.what();
      }
      result.cells.push_back(std::move(cell));
      ++cell_index;
    }
  }
  return result;
}

std::string emit_table(const GridResult& result, TableFormat format) {
  if (result.cells.empty()) {
    raise(ErrorKind::invalid_argument, "cannot render an empty grid");
  }
  constexpr const char* kEmpty = "—";  // em dash for failed cells
  auto ppl_text = [&](const std::optional<double>& v) {
    return v ? format_double("%.2f", *v) : std::string(kEmpty);
  };
  auto improv_text = [&](const std::optional<double>& v) {
    return v ? format_double("%.1f", *v) : std::string(kEmpty);
  };

  std::string out;
  if (format == TableFormat::tsv) {
    out += "sent-len\tembed-dim\tRNN\tLSTM\timprov %\n";
    for (const GridCell& c : result.cells) {
      out += std::to_string(c.sent_len) + '\t' + std::to_string(c.embed_dim) +
             '\t' + ppl_text(c.rnn_perplexity) + '\t' +
             ppl_text(c.lstm_perplexity) + '\t' + improv_text(c.improvement) +
             '\n';
    }
  } else {
    out += "| sent-len | embed-dim | RNN | LSTM | improv % |\n";
    out += "| ---: | ---: | ---: | ---: | ---: |\n";
    for (const GridCell& c : result.cells) {
      out += "| " + std::to_string(c.sent_len) + " | " +
             std::to_string(c.embed_dim) + " | " + ppl_text(c.rnn_perplexity) +
             " | " + ppl_text(c.lstm_perplexity) + " | " +
             improv_text(c.improvement) + " |\n";
    }
  }
  return out;
}

}  // namespace codelm
