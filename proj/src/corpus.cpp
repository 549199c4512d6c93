#include "corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "error.hpp"
#include "rng.hpp"

namespace codelm {

namespace {

uint64_t hash_source_ids(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  uint64_t h = 0xcbf29ce484222325ull;
  for (const std::string& id : ids) {
    h = fnv1a64(id.data(), id.size(), h);
    h = fnv1a64("\n", 1, h);
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_sentences(const std::filesystem::path& path,
                     const std::vector<Sentence>& sentences) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::io, "cannot open " + path.string() + " for writing");
  for (const Sentence& s : sentences) {
    for (size_t i = 0; i < s.ids.size(); ++i) {
      if (i) out << ' ';
      out << s.ids[i];
    }
    out << '\n';
  }
  if (!out) raise(ErrorKind::io, "failed writing " + path.string());
}

std::vector<Sentence> read_sentences(const std::filesystem::path& path,
                                     uint32_t vocab_size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::io, "cannot open " + path.string());
  std::vector<Sentence> sentences;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Sentence s;
    std::istringstream fields(line);
    uint64_t id;
    while (fields >> id) {
      if (id >= vocab_size) {
        raise(ErrorKind::corpus,
              path.string() + ":" + std::to_string(lineno) + ": token id " +
                  std::to_string(id) + " exceeds vocabulary size " +
                  std::to_string(vocab_size));
      }
      s.ids.push_back(static_cast<uint32_t>(id));
    }
    sentences.push_back(std::move(s));
  }
  return sentences;
}

}  // namespace

std::vector<Sentence> split_sentences(const std::vector<uint32_t>& ids,
                                      size_t sent_len) {
  if (sent_len < 2) {
    raise(ErrorKind::invalid_argument,
          "sentence length must be at least 2, got " + std::to_string(sent_len));
  }
  std::vector<Sentence> out;
  out.reserve(ids.size() / sent_len);
  for (size_t start = 0; start + sent_len <= ids.size(); start += sent_len) {
    out.push_back(Sentence{{ids.begin() + start, ids.begin() + start + sent_len}});
  }
  return out;
}

PreparedCorpus partition_corpus(const std::vector<TokenSequence>& documents,
                                const PartitionConfig& config) {
  if (config.sentence_length < 2) {
    raise(ErrorKind::invalid_argument, "sentence length must be at least 2");
  }
  if (config.sentences_per_split < 1) {
    raise(ErrorKind::invalid_argument, "sentences per split must be positive");
  }
  if (documents.empty()) {
    raise(ErrorKind::corpus, "no documents to partition");
  }

  // Stable starting order regardless of how callers enumerated files.
  std::vector<size_t> order(documents.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return documents[a].source_id < documents[b].source_id;
  });
  {
    std::set<std::string_view> seen;
    for (const TokenSequence& doc : documents) {
      if (!seen.insert(doc.source_id).second) {
        raise(ErrorKind::corpus,
              "duplicate document source id: " + doc.source_id);
      }
    }
  }

  SeededRng rng(config.seed);
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.next_index(i)]);
  }

  auto sentences_in = [&](size_t doc) {
    return documents[doc].tokens.size() / config.sentence_length;
  };

  std::vector<std::vector<size_t>> split_docs(3);
  size_t cursor = 0;
  for (int split = 0; split < 3; ++split) {
    uint64_t have = 0;
    while (have < config.sentences_per_split && cursor < order.size()) {
      const size_t doc = order[cursor++];
      split_docs[split].push_back(doc);
      have += sentences_in(doc);
    }
    if (have < config.sentences_per_split) {
      uint64_t total = 0;
      for (const TokenSequence& doc : documents) {
        total += doc.tokens.size() / config.sentence_length;
      }
      raise(ErrorKind::corpus,
            "insufficient corpus: need " +
                std::to_string(3ull * config.sentences_per_split) +
                " sentences of length " +
                std::to_string(config.sentence_length) + " but the " +
                std::to_string(documents.size()) + " documents yield " +
                std::to_string(total) + " in total (split " +
                std::to_string(split) + " reached " + std::to_string(have) +
                ")");
    }
  }

  std::vector<TokenSequence> train_docs;
  for (size_t doc : split_docs[0]) train_docs.push_back(documents[doc]);

  PreparedCorpus corpus{
      .vocab = Vocabulary::build(train_docs, config.vocab_size,
                                 config.min_count),
      .partition = {},
      .total_tokens = 0,
      .unique_tokens = 0,
      .document_count = documents.size(),
  };
  corpus.partition.config = config;

  std::set<std::string> distinct;
  for (const TokenSequence& doc : documents) {
    corpus.total_tokens += doc.tokens.size();
    for (const Token& t : doc.tokens) distinct.insert(normalize_token(t).text);
  }
  corpus.unique_tokens = distinct.size();

  auto extract = [&](const std::vector<size_t>& docs,
                     std::vector<Sentence>& sentences, SplitManifest& manifest) {
    std::vector<std::string> source_ids;
    for (size_t doc : docs) {
      source_ids.push_back(documents[doc].source_id);
      const auto ids = corpus.vocab.encode(normalized_texts(documents[doc]));
      for (Sentence& s : split_sentences(ids, config.sentence_length)) {
        if (sentences.size() < config.sentences_per_split) {
          sentences.push_back(std::move(s));
        }
      }
    }
    manifest.documents = docs.size();
    manifest.sentences = sentences.size();
    manifest.source_hash = hash_source_ids(source_ids);
    manifest.source_ids = std::move(source_ids);
  };
  extract(split_docs[0], corpus.partition.train, corpus.partition.train_manifest);
  extract(split_docs[1], corpus.partition.validation,
          corpus.partition.validation_manifest);
  extract(split_docs[2], corpus.partition.test, corpus.partition.test_manifest);
  return corpus;
}

void write_corpus_dir(const std::filesystem::path& dir,
                      const PreparedCorpus& corpus) {
  std::filesystem::create_directories(dir);
  write_sentences(dir / "train.txt", corpus.partition.train);
  write_sentences(dir / "valid.txt", corpus.partition.validation);
  write_sentences(dir / "test.txt", corpus.partition.test);
  corpus.vocab.save_tsv(dir / "vocab.tsv");

  const PartitionConfig& cfg = corpus.partition.config;
  nlohmann::json manifest;
  manifest["seed"] = cfg.seed;
  manifest["config"] = {
      {"sentence_length", cfg.sentence_length},
      {"sentences_per_split", cfg.sentences_per_split},
      {"vocab_size_requested", cfg.vocab_size},
      {"min_count", cfg.min_count},
  };
  manifest["vocab_size"] = corpus.vocab.size();
  manifest["vocab_hash"] = hex64(corpus.vocab.hash());
  manifest["total_tokens"] = corpus.total_tokens;
  manifest["unique_tokens"] = corpus.unique_tokens;
  manifest["documents"] = corpus.document_count;
  auto split_json = [](const SplitManifest& m) {
    return nlohmann::json{{"documents", m.documents},
                          {"sentences", m.sentences},
                          {"source_hash", hex64(m.source_hash)}};
  };
  manifest["splits"] = {
      {"train", split_json(corpus.partition.train_manifest)},
      {"valid", split_json(corpus.partition.validation_manifest)},
      {"test", split_json(corpus.partition.test_manifest)},
  };

  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) raise(ErrorKind::io, "cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

LoadedCorpus load_corpus_dir(const std::filesystem::path& dir) {
  LoadedCorpus corpus{
      .vocab = Vocabulary::load_tsv(dir / "vocab.tsv"),
      .train = {},
      .validation = {},
      .test = {},
  };
  corpus.train = read_sentences(dir / "train.txt", corpus.vocab.size());
  corpus.validation = read_sentences(dir / "valid.txt", corpus.vocab.size());
  corpus.test = read_sentences(dir / "test.txt", corpus.vocab.size());
  return corpus;
}

const std::vector<Sentence>& corpus_split(const LoadedCorpus& corpus,
                                          std::string_view name) {
  if (name == "train") return corpus.train;
  if (name == "valid" || name == "validation") return corpus.validation;
  if (name == "test") return corpus.test;
  raise(ErrorKind::invalid_argument,
        "unknown corpus split '" + std::string(name) +
            "' (expected train, valid or test)");
}

}  // namespace codelm
