// codelm command line: preprocess / train / eval / grid / suggest over the
// shared-library C API.

#include <cinttypes>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "codelm.h"

namespace {

int fail(clm_status status, const char* what) {
  std::fprintf(stderr, "error: %s: %s (%s)\n", what, clm_last_error(),
               clm_status_name(status));
  return 1;
}

clm_model_kind parse_kind(const std::string& kind, bool& ok) {
  ok = true;
  if (kind == "rnn") return CLM_MODEL_RNN;
  if (kind == "lstm") return CLM_MODEL_LSTM;
  ok = false;
  return CLM_MODEL_RNN;
}

struct ModelHandle {
  clm_model* model = nullptr;
  ~ModelHandle() { clm_model_free(model); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"codelm - a token-level language model for source code"};
  app.require_subcommand(1);
  app.fallthrough();

  uint64_t seed = 42;
  std::string out;
  app.add_option("--seed", seed, "random seed (applies to any subcommand)");
  app.add_option("--out", out, "output path (directory or file per subcommand)");

  // ---- preprocess ----------------------------------------------------------
  auto* preprocess =
      app.add_subcommand("preprocess", "lex a source tree into a corpus dir");
  std::string pre_source, pre_ext = ".java";
  uint32_t pre_vocab = 1000, pre_min_count = 2, pre_sent_len = 100,
           pre_per_split = 10000;
  preprocess->add_option("--source", pre_source, "source directory")->required();
  preprocess->add_option("--ext", pre_ext, "file extension filter");
  preprocess->add_option("--vocab-size", pre_vocab, "vocabulary size N");
  preprocess->add_option("--min-count", pre_min_count,
                         "minimum token count to stay out of <unk>");
  preprocess->add_option("--sent-len", pre_sent_len, "sentence length");
  preprocess->add_option("--per-split", pre_per_split,
                         "sentences per train/valid/test split");

  // ---- train ---------------------------------------------------------------
  auto* train = app.add_subcommand("train", "train a model on a corpus dir");
  std::string tr_corpus, tr_kind = "lstm", tr_log;
  clm_train_params tr_params;
  clm_train_params_init(&tr_params, CLM_MODEL_LSTM);
  bool tr_lr_set = false, tr_rho_set = false, tr_eps_set = false;
  double tr_lr = 0, tr_rho = 0, tr_eps = 0;
  train->add_option("--corpus", tr_corpus, "corpus directory")->required();
  train->add_option("--kind", tr_kind, "model kind: rnn or lstm");
  train->add_option("--log", tr_log, "training log path (default <model>.log)");
  train->add_option("--embed-dim", tr_params.embed_dim, "embedding dimension D");
  train->add_option("--hidden-dim", tr_params.hidden_dim,
                    "hidden dimension K (0 = same as D)");
  train->add_option("--lr", tr_lr, "learning rate eta")->each([&](const std::string&) {
    tr_lr_set = true;
  });
  train->add_option("--rho", tr_rho, "adaptation rate rho")->each([&](const std::string&) {
    tr_rho_set = true;
  });
  train->add_option("--eps", tr_eps, "smoothing epsilon")->each([&](const std::string&) {
    tr_eps_set = true;
  });
  train->add_option("--nce-k", tr_params.nce_k,
                    "NCE noise samples per step (0 = exact softmax)");
  train->add_option("--dropout", tr_params.dropout_rate, "dropout rate");
  train->add_option("--clip", tr_params.clip_norm, "gradient clipping norm");
  train->add_option("--epochs", tr_params.max_epochs, "maximum epochs");
  train->add_option("--patience", tr_params.patience, "early-stopping patience");
  train->add_option("--batch", tr_params.batch_size, "mini-batch size");

  // ---- eval ----------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "perplexity of a model on a split");
  std::string ev_model, ev_corpus, ev_split = "test";
  eval->add_option("--model", ev_model, "model file")->required();
  eval->add_option("--corpus", ev_corpus, "corpus directory")->required();
  eval->add_option("--split", ev_split, "train, valid or test");

  // ---- grid ----------------------------------------------------------------
  auto* grid = app.add_subcommand(
      "grid", "perplexity grid over sentence length x embedding dimension");
  std::string gr_source, gr_ext = ".java";
  std::vector<uint32_t> gr_sent_lens, gr_embed_dims;
  uint32_t gr_vocab = 1000, gr_min_count = 2, gr_per_split = 10000, gr_reps = 1;
  clm_train_params gr_train;
  clm_train_params_init(&gr_train, CLM_MODEL_LSTM);
  grid->add_option("--source", gr_source, "source directory")->required();
  grid->add_option("--ext", gr_ext, "file extension filter");
  grid->add_option("--sent-lens", gr_sent_lens, "sentence lengths")
      ->required()
      ->delimiter(',');
  grid->add_option("--embed-dims", gr_embed_dims, "embedding dimensions")
      ->required()
      ->delimiter(',');
  grid->add_option("--vocab-size", gr_vocab, "vocabulary size N");
  grid->add_option("--min-count", gr_min_count, "minimum token count");
  grid->add_option("--per-split", gr_per_split, "sentences per split");
  grid->add_option("--reps", gr_reps, "repetitions per cell");
  grid->add_option("--nce-k", gr_train.nce_k, "NCE noise samples per step");
  grid->add_option("--dropout", gr_train.dropout_rate, "dropout rate");
  grid->add_option("--clip", gr_train.clip_norm, "gradient clipping norm");
  grid->add_option("--epochs", gr_train.max_epochs, "maximum epochs per cell");
  grid->add_option("--patience", gr_train.patience, "early-stopping patience");
  grid->add_option("--batch", gr_train.batch_size, "mini-batch size");

  // ---- suggest ---------------------------------------------------------------
  auto* suggest = app.add_subcommand("suggest", "rank next-token continuations");
  std::string sg_model, sg_code;
  uint32_t sg_top_k = 10;
  std::vector<std::string> sg_tokens;
  suggest->add_option("--model", sg_model, "model file")->required();
  suggest->add_option("--top-k", sg_top_k, "number of continuations to print");
  suggest->add_option("--code", sg_code, "context as a code snippet (lexed)");
  suggest->add_option("tokens", sg_tokens, "context tokens");

  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand(preprocess)) {
    clm_preprocess_params params;
    clm_preprocess_params_init(&params);
    params.source_dir = pre_source.c_str();
    const std::string out_dir = out.empty() ? "corpus" : out;
    params.out_dir = out_dir.c_str();
    params.extension = pre_ext.c_str();
    params.vocab_size = pre_vocab;
    params.min_count = pre_min_count;
    params.sentence_length = pre_sent_len;
    params.sentences_per_split = pre_per_split;
    params.seed = seed;

    clm_preprocess_stats stats;
    if (clm_status s = clm_preprocess(&params, &stats)) {
      return fail(s, "preprocess");
    }
    std::printf("tokens\t%" PRIu64 "\n", stats.total_tokens);
    std::printf("unique_tokens\t%" PRIu64 "\n", stats.unique_tokens);
    std::printf("vocab_size\t%u\n", stats.vocab_size);
    std::printf("documents\t%" PRIu64 "\n", stats.document_count);
    std::printf("sentences\ttrain=%" PRIu64 " valid=%" PRIu64 " test=%" PRIu64
                "\n",
                stats.train_sentences, stats.valid_sentences,
                stats.test_sentences);
    std::printf("out\t%s\n", out_dir.c_str());
    return 0;
  }

  if (app.got_subcommand(train)) {
    bool kind_ok = false;
    const clm_model_kind kind = parse_kind(tr_kind, kind_ok);
    if (!kind_ok) {
      std::fprintf(stderr, "error: unknown model kind '%s'\n", tr_kind.c_str());
      return 1;
    }
    clm_train_params params;
    clm_train_params_init(&params, kind);
    params.embed_dim = tr_params.embed_dim;
    params.hidden_dim = tr_params.hidden_dim;
    if (tr_lr_set) params.learning_rate = tr_lr;
    if (tr_rho_set) params.adaptation_rate = tr_rho;
    if (tr_eps_set) params.smoothing_eps = tr_eps;
    params.nce_k = tr_params.nce_k;
    params.dropout_rate = tr_params.dropout_rate;
    params.clip_norm = tr_params.clip_norm;
    params.max_epochs = tr_params.max_epochs;
    params.patience = tr_params.patience;
    params.batch_size = tr_params.batch_size;
    params.seed = seed;

    const std::string model_path = out.empty() ? "model.clm" : out;
    const std::string log_path = tr_log.empty() ? model_path + ".log" : tr_log;
    clm_train_result result;
    if (clm_status s = clm_train(tr_corpus.c_str(), &params, model_path.c_str(),
                                 log_path.c_str(), &result)) {
      return fail(s, "train");
    }
    std::printf("model\t%s\n", model_path.c_str());
    std::printf("log\t%s\n", log_path.c_str());
    std::printf("epochs_run\t%u\n", result.epochs_run);
    std::printf("best_epoch\t%u\n", result.best_epoch);
    std::printf("best_validation_perplexity\t%.6f\n",
                result.best_validation_perplexity);
    return 0;
  }

  if (app.got_subcommand(eval)) {
    ModelHandle handle;
    if (clm_status s = clm_model_load(ev_model.c_str(), &handle.model)) {
      return fail(s, "eval");
    }
    clm_eval_report report;
    if (clm_status s = clm_evaluate(handle.model, ev_corpus.c_str(),
                                    ev_split.c_str(), &report)) {
      return fail(s, "eval");
    }
    std::printf("perplexity\t%.2f\n", report.perplexity);
    std::printf("token_count\t%" PRIu64 "\n", report.token_count);
    std::printf("sentence_count\t%" PRIu64 "\n", report.sentence_count);
    std::printf("split\t%s\n", ev_split.c_str());
    std::printf("kind\t%s\n",
                clm_model_get_kind(handle.model) == CLM_MODEL_RNN ? "rnn"
                                                                  : "lstm");
    std::printf("vocab_size\t%u\n", clm_model_vocab_size(handle.model));
    std::printf("embed_dim\t%u\n", clm_model_embed_dim(handle.model));
    std::printf("hidden_dim\t%u\n", clm_model_hidden_dim(handle.model));
    return 0;
  }

  if (app.got_subcommand(grid)) {
    clm_grid_params params;
    clm_grid_params_init(&params);
    params.source_dir = gr_source.c_str();
    const std::string out_dir = out.empty() ? "grid" : out;
    params.out_dir = out_dir.c_str();
    params.extension = gr_ext.c_str();
    params.sentence_lengths = gr_sent_lens.data();
    params.sentence_length_count = gr_sent_lens.size();
    params.embed_dims = gr_embed_dims.data();
    params.embed_dim_count = gr_embed_dims.size();
    params.vocab_size = gr_vocab;
    params.min_count = gr_min_count;
    params.sentences_per_split = gr_per_split;
    params.repetitions = gr_reps;
    params.base_seed = seed;
    params.train = gr_train;

    char* table = nullptr;
    if (clm_status s = clm_grid(&params, &table)) {
      return fail(s, "grid");
    }
    std::fputs(table, stdout);
    clm_string_free(table);
    return 0;
  }

  if (app.got_subcommand(suggest)) {
    std::string context = sg_code;
    for (const std::string& token : sg_tokens) {
      if (!context.empty()) context += ' ';
      context += token;
    }
    if (context.empty()) {
      std::fprintf(stderr, "error: empty context (pass tokens or --code)\n");
      return 1;
    }
    ModelHandle handle;
    if (clm_status s = clm_model_load(sg_model.c_str(), &handle.model)) {
      return fail(s, "suggest");
    }
    const uint32_t top_k =
        std::min(sg_top_k, clm_model_vocab_size(handle.model));
    std::vector<clm_suggestion> suggestions(top_k);
    uint32_t count = 0, context_len = 0, unknown = 0;
    if (clm_status s =
            clm_suggest(handle.model, context.c_str(), top_k,
                        suggestions.data(), &count, &context_len, &unknown)) {
      return fail(s, "suggest");
    }
    if (unknown == context_len) {
      std::fprintf(stderr,
                   "warning: every context token is out of vocabulary; "
                   "proceeding with <unk>\n");
    }
    for (uint32_t r = 0; r < count; ++r) {
      std::printf("%u\t%s\t%.8g\n", r + 1,
                  clm_model_token_text(handle.model, suggestions[r].token_id),
                  suggestions[r].probability);
    }
    return 0;
  }

  return 0;
}
