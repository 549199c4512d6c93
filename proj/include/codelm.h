/*
 * codelm — a token-level language-modeling toolkit for source code.
 *
 * C API over the C++ core: plain structs in, error codes out, opaque
 * handles for loaded models. Every function that can fail returns a
 * clm_status; CLM_OK is 0 and clm_last_error() carries a human-readable
 * message for the most recent failure on the calling thread.
 */

#ifndef CODELM_H
#define CODELM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum clm_status {
  CLM_OK = 0,
  CLM_ERR_INVALID_ARGUMENT = 1,
  CLM_ERR_IO = 2,
  CLM_ERR_LEX = 3,
  CLM_ERR_CORPUS = 4,
  CLM_ERR_VOCAB_MISMATCH = 5,
  CLM_ERR_NUMERIC = 6,
  CLM_ERR_INTERNAL = 7,
} clm_status;

typedef enum clm_model_kind {
  CLM_MODEL_RNN = 0,
  CLM_MODEL_LSTM = 1,
} clm_model_kind;

const char* clm_version(void);
const char* clm_status_name(clm_status status);

/* Message for the most recent failure on this thread; empty string when the
 * last call succeeded. The pointer stays valid until the next API call on
 * the same thread. */
const char* clm_last_error(void);

/* --------------------------------------------------------------------------
 * Lexing. Splits source text into normalized code tokens (number literals
 * become <num>, string/char literals <str>; comments vanish). The returned
 * array is freed with clm_tokens_free. */
clm_status clm_lex(const char* text, char*** out_tokens, size_t* out_count);
void clm_tokens_free(char** tokens, size_t count);

/* --------------------------------------------------------------------------
 * Corpus preprocessing: lex a source tree, build the vocabulary, split into
 * fixed-length sentences, partition into train/valid/test and write the
 * corpus directory (train.txt, valid.txt, test.txt, vocab.tsv,
 * manifest.json). */

typedef struct clm_preprocess_params {
  const char* source_dir;
  const char* out_dir;
  const char* extension;        /* default ".java" when NULL */
  uint32_t vocab_size;          /* top-N tokens incl. the 3 specials */
  uint32_t min_count;           /* tokens rarer than this map to <unk> */
  uint32_t sentence_length;
  uint32_t sentences_per_split;
  uint64_t seed;
} clm_preprocess_params;

typedef struct clm_preprocess_stats {
  uint64_t total_tokens;
  uint64_t unique_tokens;
  uint32_t vocab_size;
  uint64_t document_count;
  uint64_t train_sentences;
  uint64_t valid_sentences;
  uint64_t test_sentences;
} clm_preprocess_stats;

void clm_preprocess_params_init(clm_preprocess_params* params);
clm_status clm_preprocess(const clm_preprocess_params* params,
                          clm_preprocess_stats* out_stats);

/* --------------------------------------------------------------------------
 * Training. clm_train_params_init fills the per-kind defaults (RNN:
 * eta=0.01, rho=0.9, eps=1e-8; LSTM: eta=0.02, rho=0.99, eps=1e-7; dropout
 * 0.5, clip 5.0, 50 epochs, patience 5, batch 32). Training writes the best
 * checkpoint (model + optimizer state) and a tab-separated epoch log. */

typedef struct clm_train_params {
  clm_model_kind kind;
  uint32_t embed_dim;       /* D */
  uint32_t hidden_dim;      /* K; 0 means same as embed_dim */
  double learning_rate;     /* eta */
  double adaptation_rate;   /* rho */
  double smoothing_eps;     /* epsilon */
  uint32_t nce_k;           /* 0 = exact softmax objective */
  double dropout_rate;
  double clip_norm;
  uint32_t max_epochs;
  uint32_t patience;
  uint32_t batch_size;
  uint64_t seed;
} clm_train_params;

typedef struct clm_train_result {
  uint32_t best_epoch;
  uint32_t epochs_run;
  double best_validation_perplexity;
} clm_train_result;

void clm_train_params_init(clm_train_params* params, clm_model_kind kind);
clm_status clm_train(const char* corpus_dir, const clm_train_params* params,
                     const char* model_path, const char* log_path,
                     clm_train_result* out_result);

/* --------------------------------------------------------------------------
 * Model handle. */

typedef struct clm_model clm_model;

clm_status clm_model_load(const char* path, clm_model** out_model);
void clm_model_free(clm_model* model);

clm_model_kind clm_model_get_kind(const clm_model* model);
uint32_t clm_model_vocab_size(const clm_model* model);
uint32_t clm_model_embed_dim(const clm_model* model);
uint32_t clm_model_hidden_dim(const clm_model* model);
uint64_t clm_model_vocab_hash(const clm_model* model);

/* Token text for an id; NULL when out of range. Valid until the model is
 * freed. */
const char* clm_model_token_text(const clm_model* model, uint32_t id);
/* Id for a token text; the <unk> id when absent. */
uint32_t clm_model_token_id(const clm_model* model, const char* text);
uint32_t clm_model_unk_id(const clm_model* model);

/* --------------------------------------------------------------------------
 * Evaluation: perplexity of a model on one split ("train", "valid" or
 * "test") of a corpus directory. Fails with CLM_ERR_VOCAB_MISMATCH when the
 * corpus was built with a different vocabulary. */

typedef struct clm_eval_report {
  double perplexity;
  uint64_t token_count;
  uint64_t sentence_count;
} clm_eval_report;

clm_status clm_evaluate(const clm_model* model, const char* corpus_dir,
                        const char* split, clm_eval_report* out_report);

/* --------------------------------------------------------------------------
 * Next-token suggestion. context_text is lexed and normalized like corpus
 * input; out-of-vocabulary context tokens proceed as <unk> and are counted
 * in out_unknown_count. Suggestions arrive probability-descending, ties by
 * id ascending; out_suggestions must hold top_k entries. */

typedef struct clm_suggestion {
  uint32_t token_id;
  double probability;
} clm_suggestion;

clm_status clm_suggest(const clm_model* model, const char* context_text,
                       uint32_t top_k, clm_suggestion* out_suggestions,
                       uint32_t* out_count, uint32_t* out_context_length,
                       uint32_t* out_unknown_count);

/* Mean-pooled hidden representation of the lexed context; out must hold
 * clm_model_hidden_dim(model) doubles. */
clm_status clm_represent(const clm_model* model, const char* context_text,
                         double* out);

/* --------------------------------------------------------------------------
 * Experiment grid over sentence length x embedding dimension. Each cell
 * re-splits the corpus at its sentence length and trains both kinds from
 * scratch with their per-kind RMSprop settings (learning_rate /
 * adaptation_rate / smoothing_eps / kind in `train` are ignored; the shared
 * knobs nce_k, dropout_rate, clip_norm, max_epochs, patience and batch_size
 * apply to every cell). Writes grid.tsv, grid.md and per-cell logs under
 * out_dir; finished cells are reused on rerun. */

typedef struct clm_grid_params {
  const char* source_dir;
  const char* out_dir;
  const char* extension;  /* default ".java" when NULL */
  const uint32_t* sentence_lengths;
  size_t sentence_length_count;
  const uint32_t* embed_dims;
  size_t embed_dim_count;
  uint32_t vocab_size;
  uint32_t min_count;
  uint32_t sentences_per_split;
  uint32_t repetitions;
  uint64_t base_seed;
  clm_train_params train;
} clm_grid_params;

void clm_grid_params_init(clm_grid_params* params);

/* When out_table_tsv is non-NULL it receives the rendered TSV table; free
 * it with clm_string_free. */
clm_status clm_grid(const clm_grid_params* params, char** out_table_tsv);
void clm_string_free(char* text);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CODELM_H */
