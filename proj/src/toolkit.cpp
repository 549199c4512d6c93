#include "toolkit.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "error.hpp"

namespace codelm {

std::vector<TokenSequence> scan_and_lex(const std::filesystem::path& source_dir,
                                        const std::string& extension) {
  if (!std::filesystem::is_directory(source_dir)) {
    raise(ErrorKind::io, "source directory " + source_dir.string() +
                             " does not exist or is not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry :
       std::filesystem::recursive_directory_iterator(source_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == extension) {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) {
    raise(ErrorKind::corpus, "no '" + extension + "' files under " +
                                 source_dir.string());
  }
  std::sort(files.begin(), files.end());

  std::vector<TokenSequence> documents;
  documents.reserve(files.size());
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::io, "cannot read " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    const std::string source_id =
        std::filesystem::relative(path, source_dir).generic_string();
    try {
      TokenSequence seq = lex_source(text, source_id);
      normalize_sequence(seq);
      documents.push_back(std::move(seq));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::lex) {
        raise(ErrorKind::lex, source_id + ": " + e.what());
      }
      throw;
    }
  }
  return documents;
}

PreprocessStats preprocess(const PreprocessOptions& options) {
  const auto documents = scan_and_lex(options.source_dir, options.extension);

  PartitionConfig pc;
  pc.sentence_length = options.sentence_length;
  pc.sentences_per_split = options.sentences_per_split;
  pc.vocab_size = options.vocab_size;
  pc.min_count = options.min_count;
  pc.seed = options.seed;
  const PreparedCorpus corpus = partition_corpus(documents, pc);
  write_corpus_dir(options.out_dir, corpus);

  return PreprocessStats{
      .total_tokens = corpus.total_tokens,
      .unique_tokens = corpus.unique_tokens,
      .vocab_size = corpus.vocab.size(),
      .document_count = corpus.document_count,
      .train_sentences = corpus.partition.train.size(),
      .valid_sentences = corpus.partition.validation.size(),
      .test_sentences = corpus.partition.test.size(),
  };
}

TrainOutcome train_to_file(const std::filesystem::path& corpus_dir,
                           ModelKind kind, const TrainingConfig& cfg,
                           const std::filesystem::path& model_path,
                           const std::filesystem::path& log_path) {
  const LoadedCorpus corpus = load_corpus_dir(corpus_dir);
  const TrainResult result =
      train(corpus.train, corpus.validation, corpus.vocab.size(), kind, cfg);
  save_model(model_path, result.model, corpus.vocab, &result.optimizer);
  write_training_log_file(log_path, kind, corpus.vocab.size(), cfg, result);
  return TrainOutcome{
      .best_epoch = result.best_epoch,
      .epochs_run = result.epochs_run,
      .best_validation_perplexity = result.best_validation_perplexity,
  };
}

PerplexityReport evaluate_model(const SavedModel& model,
                                const std::filesystem::path& corpus_dir,
                                std::string_view split) {
  const LoadedCorpus corpus = load_corpus_dir(corpus_dir);
  if (corpus.vocab.hash() != model.vocab.hash()) {
    raise(ErrorKind::vocab_mismatch,
          "corpus vocabulary does not match the model's (corpus " +
              corpus_dir.string() + ")");
  }
  return perplexity(corpus_split(corpus, split), model.params);
}

namespace {

std::vector<uint32_t> encode_context(const SavedModel& model,
                                     std::string_view context_text,
                                     uint32_t* unknown_count) {
  TokenSequence seq = lex_source(context_text, "<context>");
  const auto texts = normalized_texts(seq);
  if (texts.empty()) {
    raise(ErrorKind::invalid_argument, "context is empty after lexing");
  }
  std::vector<uint32_t> ids = model.vocab.encode(texts);
  if (unknown_count) {
    *unknown_count = 0;
    for (size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] == Vocabulary::kUnkId && texts[i] != kUnkToken) {
        ++*unknown_count;
      }
    }
  }
  return ids;
}

}  // namespace

SuggestResult suggest(const SavedModel& model, std::string_view context_text,
                      uint32_t top_k) {
  SuggestResult result;
  const auto ids = encode_context(model, context_text, &result.unknown_count);
  result.context_length = static_cast<uint32_t>(ids.size());

  StepState state = initial_state(model.params);
  for (uint32_t id : ids) {
    state = step(model.params, state, embed(model.params, id));
  }
  const Vector dist = output_distribution(state.h, model.params);

  std::vector<uint32_t> ranked(dist.size());
  std::iota(ranked.begin(), ranked.end(), 0);
  std::sort(ranked.begin(), ranked.end(), [&](uint32_t a, uint32_t b) {
    if (dist[a] != dist[b]) return dist[a] > dist[b];
    return a < b;
  });
  const uint32_t n = std::min<uint32_t>(top_k, static_cast<uint32_t>(dist.size()));
  result.suggestions.reserve(n);
  for (uint32_t r = 0; r < n; ++r) {
    result.suggestions.push_back(Suggestion{ranked[r], dist[ranked[r]]});
  }
  return result;
}

Vector represent(const SavedModel& model, std::string_view context_text) {
  const auto ids = encode_context(model, context_text, nullptr);
  const ForwardResult forward =
      forward_sequence(Sentence{ids}, model.params);
  return mean_pool_representation(forward.states);
}

std::string grid_to_files(const GridOptions& options) {
  const auto documents = scan_and_lex(options.source_dir, options.extension);
  std::filesystem::create_directories(options.out_dir);
  const GridResult result =
      run_grid(documents, options.spec, options.training, options.out_dir);

  const std::string tsv = emit_table(result, TableFormat::tsv);
  {
    std::ofstream out(options.out_dir / "grid.tsv", std::ios::binary);
    if (!out) raise(ErrorKind::io, "cannot write grid.tsv");
    out << tsv;
  }
  {
    std::ofstream out(options.out_dir / "grid.md", std::ios::binary);
    if (!out) raise(ErrorKind::io, "cannot write grid.md");
    out << emit_table(result, TableFormat::markdown);
  }
  return tsv;
}

}  // namespace codelm
