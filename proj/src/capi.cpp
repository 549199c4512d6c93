#include "codelm.h"

#include <cstring>
#include <new>
#include <string>

#include "error.hpp"
#include "toolkit.hpp"

using namespace codelm;

namespace {

thread_local std::string g_last_error;

clm_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return CLM_ERR_INVALID_ARGUMENT;
    case ErrorKind::io: return CLM_ERR_IO;
    case ErrorKind::lex: return CLM_ERR_LEX;
    case ErrorKind::corpus: return CLM_ERR_CORPUS;
    case ErrorKind::vocab_mismatch: return CLM_ERR_VOCAB_MISMATCH;
    case ErrorKind::numeric: return CLM_ERR_NUMERIC;
  }
  return CLM_ERR_INTERNAL;
}

// Runs the body, translating exceptions into status codes and recording the
// message for clm_last_error.
template <class Fn>
clm_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    return fn();
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CLM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CLM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return CLM_ERR_INTERNAL;
  }
}

clm_status require(bool ok, const char* message) {
  if (ok) return CLM_OK;
  g_last_error = message;
  return CLM_ERR_INVALID_ARGUMENT;
}

ModelKind to_kind(clm_model_kind kind) {
  return kind == CLM_MODEL_RNN ? ModelKind::rnn : ModelKind::lstm;
}

TrainingConfig to_config(const clm_train_params& p) {
  TrainingConfig cfg;
  cfg.embed_dim = p.embed_dim;
  cfg.hidden_dim = p.hidden_dim;
  cfg.learning_rate = p.learning_rate;
  cfg.adaptation_rate = p.adaptation_rate;
  cfg.smoothing_eps = p.smoothing_eps;
  cfg.nce_k = p.nce_k;
  cfg.dropout_rate = p.dropout_rate;
  cfg.clip_norm = p.clip_norm;
  cfg.max_epochs = p.max_epochs;
  cfg.patience = p.patience;
  cfg.batch_size = p.batch_size;
  cfg.seed = p.seed;
  return cfg;
}

}  // namespace

struct clm_model {
  SavedModel saved;
};

extern "C" {

const char* clm_version(void) { return "1.0.0"; }

const char* clm_status_name(clm_status status) {
  switch (status) {
    case CLM_OK: return "ok";
    case CLM_ERR_INVALID_ARGUMENT: return "invalid argument";
    case CLM_ERR_IO: return "io error";
    case CLM_ERR_LEX: return "lexing error";
    case CLM_ERR_CORPUS: return "corpus error";
    case CLM_ERR_VOCAB_MISMATCH: return "vocabulary mismatch";
    case CLM_ERR_NUMERIC: return "numeric error";
    case CLM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* clm_last_error(void) { return g_last_error.c_str(); }

clm_status clm_lex(const char* text, char*** out_tokens, size_t* out_count) {
  if (clm_status s = require(text && out_tokens && out_count,
                             "clm_lex: NULL argument")) {
    return s;
  }
  return guarded([&]() -> clm_status {
    TokenSequence seq = lex_source(text);
    const auto texts = normalized_texts(seq);
    char** tokens = new char*[texts.size() ? texts.size() : 1];
    for (size_t i = 0; i < texts.size(); ++i) {
      tokens[i] = new char[texts[i].size() + 1];
      std::memcpy(tokens[i], texts[i].c_str(), texts[i].size() + 1);
    }
    *out_tokens = tokens;
    *out_count = texts.size();
    return CLM_OK;
  });
}

void clm_tokens_free(char** tokens, size_t count) {
  if (!tokens) return;
  for (size_t i = 0; i < count; ++i) delete[] tokens[i];
  delete[] tokens;
}

void clm_preprocess_params_init(clm_preprocess_params* params) {
  if (!params) return;
  *params = clm_preprocess_params{
      .source_dir = nullptr,
      .out_dir = nullptr,
      .extension = ".java",
      .vocab_size = 1000,
      .min_count = 2,
      .sentence_length = 100,
      .sentences_per_split = 10000,
      .seed = 42,
  };
}

clm_status clm_preprocess(const clm_preprocess_params* params,
                          clm_preprocess_stats* out_stats) {
  if (clm_status s = require(params && params->source_dir && params->out_dir,
                             "clm_preprocess: NULL argument")) {
    return s;
  }
  return guarded([&]() -> clm_status {
    PreprocessOptions options;
    options.source_dir = params->source_dir;
    options.out_dir = params->out_dir;
    if (params->extension) options.extension = params->extension;
    options.vocab_size = params->vocab_size;
    options.min_count = params->min_count;
    options.sentence_length = params->sentence_length;
    options.sentences_per_split = params->sentences_per_split;
    options.seed = params->seed;
    const PreprocessStats stats = preprocess(options);
    if (out_stats) {
      *out_stats = clm_preprocess_stats{
          .total_tokens = stats.total_tokens,
          .unique_tokens = stats.unique_tokens,
          .vocab_size = stats.vocab_size,
          .document_count = stats.document_count,
          .train_sentences = stats.train_sentences,
          .valid_sentences = stats.valid_sentences,
          .test_sentences = stats.test_sentences,
      };
    }
    return CLM_OK;
  });
}

void clm_train_params_init(clm_train_params* params, clm_model_kind kind) {
  if (!params) return;
  const TrainingConfig cfg = TrainingConfig::defaults(to_kind(kind));
  *params = clm_train_params{
      .kind = kind,
      .embed_dim = cfg.embed_dim,
      .hidden_dim = cfg.hidden_dim,
      .learning_rate = cfg.learning_rate,
      .adaptation_rate = cfg.adaptation_rate,
      .smoothing_eps = cfg.smoothing_eps,
      .nce_k = cfg.nce_k,
      .dropout_rate = cfg.dropout_rate,
      .clip_norm = cfg.clip_norm,
      .max_epochs = cfg.max_epochs,
      .patience = cfg.patience,
      .batch_size = cfg.batch_size,
      .seed = cfg.seed,
  };
}

clm_status clm_train(const char* corpus_dir, const clm_train_params* params,
                     const char* model_path, const char* log_path,
                     clm_train_result* out_result) {
  if (clm_status s = require(corpus_dir && params && model_path,
                             "clm_train: NULL argument")) {
    return s;
  }
  return guarded([&]() -> clm_status {
    const std::string log =
        log_path ? log_path : std::string(model_path) + ".log";
    const TrainOutcome outcome = train_to_file(
        corpus_dir, to_kind(params->kind), to_config(*params), model_path, log);
    if (out_result) {
      *out_result = clm_train_result{
          .best_epoch = outcome.best_epoch,
          .epochs_run = outcome.epochs_run,
          .best_validation_perplexity = outcome.best_validation_perplexity,
      };
    }
    return CLM_OK;
  });
}

clm_status clm_model_load(const char* path, clm_model** out_model) {
  if (clm_status s = require(path && out_model, "clm_model_load: NULL argument")) {
    return s;
  }
  return guarded([&]() -> clm_status {
    auto* model = new clm_model{load_model(path)};
    *out_model = model;
    return CLM_OK;
  });
}

void clm_model_free(clm_model* model) { delete model; }

clm_model_kind clm_model_get_kind(const clm_model* model) {
  return model->saved.params.kind() == ModelKind::rnn ? CLM_MODEL_RNN
                                                      : CLM_MODEL_LSTM;
}

uint32_t clm_model_vocab_size(const clm_model* model) {
  return model->saved.params.vocab_size();
}

uint32_t clm_model_embed_dim(const clm_model* model) {
  return model->saved.params.embed_dim();
}

uint32_t clm_model_hidden_dim(const clm_model* model) {
  return model->saved.params.hidden_dim();
}

uint64_t clm_model_vocab_hash(const clm_model* model) {
  return model->saved.vocab.hash();
}

const char* clm_model_token_text(const clm_model* model, uint32_t id) {
  if (!model || id >= model->saved.vocab.size()) return nullptr;
  return model->saved.vocab.text_of(id).c_str();
}

uint32_t clm_model_token_id(const clm_model* model, const char* text) {
  if (!model || !text) return Vocabulary::kUnkId;
  return model->saved.vocab.id_of(text);
}

uint32_t clm_model_unk_id(const clm_model* model) {
  (void)model;
  return Vocabulary::kUnkId;
}

clm_status clm_evaluate(const clm_model* model, const char* corpus_dir,
                        const char* split, clm_eval_report* out_report) {
  if (clm_status s = require(model && corpus_dir && split && out_report,
                             "clm_evaluate: NULL argument")) {
    return s;
  }
  return guarded([&]() -> clm_status {
    const PerplexityReport report =
        evaluate_model(model->saved, corpus_dir, split);
    *out_report = clm_eval_report{
        .perplexity = report.perplexity,
        .token_count = report.token_count,
        .sentence_count = report.sentence_count,
    };
    return CLM_OK;
  });
}

clm_status clm_suggest(const clm_model* model, const char* context_text,
                       uint32_t top_k, clm_suggestion* out_suggestions,
                       uint32_t* out_count, uint32_t* out_context_length,
                       uint32_t* out_unknown_count) {
  if (clm_status s =
          require(model && context_text && out_suggestions && out_count,
                  "clm_suggest: NULL argument")) {
    return s;
  }
  return guarded([&]() -> clm_status {
    const SuggestResult result = suggest(model->saved, context_text, top_k);
    for (size_t i = 0; i < result.suggestions.size(); ++i) {
      out_suggestions[i] = clm_suggestion{
          .token_id = result.suggestions[i].token_id,
          .probability = result.suggestions[i].probability,
      };
    }
    *out_count = static_cast<uint32_t>(result.suggestions.size());
    if (out_context_length) *out_context_length = result.context_length;
    if (out_unknown_count) *out_unknown_count = result.unknown_count;
    return CLM_OK;
  });
}

clm_status clm_represent(const clm_model* model, const char* context_text,
                         double* out) {
  if (clm_status s = require(model && context_text && out,
                             "clm_represent: NULL argument")) {
    return s;
  }
  return guarded([&]() -> clm_status {
    const Vector rep = represent(model->saved, context_text);
    std::memcpy(out, rep.data(), rep.size() * sizeof(double));
    return CLM_OK;
  });
}

void clm_grid_params_init(clm_grid_params* params) {
  if (!params) return;
  std::memset(params, 0, sizeof(*params));
  params->extension = ".java";
  params->vocab_size = 1000;
  params->min_count = 2;
  params->sentences_per_split = 10000;
  params->repetitions = 1;
  params->base_seed = 42;
  clm_train_params_init(&params->train, CLM_MODEL_LSTM);
}

clm_status clm_grid(const clm_grid_params* params, char** out_table_tsv) {
  if (clm_status s = require(params && params->source_dir && params->out_dir &&
                                 params->sentence_lengths &&
                                 params->sentence_length_count > 0 &&
                                 params->embed_dims &&
                                 params->embed_dim_count > 0,
                             "clm_grid: NULL or empty argument")) {
    return s;
  }
  return guarded([&]() -> clm_status {
    GridOptions options;
    options.source_dir = params->source_dir;
    options.out_dir = params->out_dir;
    if (params->extension) options.extension = params->extension;
    options.spec.sentence_lengths.assign(
        params->sentence_lengths,
        params->sentence_lengths + params->sentence_length_count);
    options.spec.embed_dims.assign(
        params->embed_dims, params->embed_dims + params->embed_dim_count);
    options.spec.vocab_size = params->vocab_size;
    options.spec.min_count = params->min_count;
    options.spec.sentences_per_split = params->sentences_per_split;
    options.spec.repetitions = params->repetitions;
    options.spec.base_seed = params->base_seed;
    options.training = to_config(params->train);

    const std::string tsv = grid_to_files(options);
    if (out_table_tsv) {
      char* copy = new char[tsv.size() + 1];
      std::memcpy(copy, tsv.c_str(), tsv.size() + 1);
      *out_table_tsv = copy;
    }
    return CLM_OK;
  });
}

void clm_string_free(char* text) { delete[] text; }

}  // extern "C"
