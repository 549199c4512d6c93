#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <doctest.h>

#include "corpus.hpp"
#include "error.hpp"
#include "rng.hpp"

using namespace codelm;

namespace {

TokenSequence doc_of(const std::string& id, size_t tokens, uint64_t seed) {
  // Small deterministic pseudo-code documents.
  static const std::vector<std::string> pool = {
      "int",  "x",  "=",  "<num>", ";",    "if", "(",  "x",
      ">",    "y",  ")",  "{",     "call", "(", ")",  "}",
      "while", "for", "+", "return"};
  SeededRng rng(seed);
  TokenSequence seq;
  seq.source_id = id;
  for (size_t i = 0; i < tokens; ++i) {
    seq.tokens.push_back(
        Token{pool[rng.next_index(pool.size())], TokenKind::identifier});
  }
  return seq;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE_BEGIN("corpus");

TEST_CASE("split_sentences window arithmetic") {
  std::vector<uint32_t> ids(25);
  for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<uint32_t>(i);

  // floor(25 / 10) = 2 sentences, 5 ids dropped.
  auto sentences = split_sentences(ids, 10);
  CHECK(sentences.size() == 2);
  CHECK(sentences[0].ids.front() == 0);
  CHECK(sentences[1].ids.front() == 10);
  CHECK(sentences[1].ids.back() == 19);

  ids.resize(10);
  CHECK(split_sentences(ids, 10).size() == 1);
  ids.resize(9);
  CHECK(split_sentences(ids, 10).empty());
}

TEST_CASE("split_sentences count property over random lengths") {
  SeededRng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const size_t len = rng.next_index(200);
    const size_t sent_len = 2 + rng.next_index(20);
    std::vector<uint32_t> ids(len, 1);
    CHECK(split_sentences(ids, sent_len).size() == len / sent_len);
  }
}

TEST_CASE("split_sentences rejects sentence length below 2") {
  CHECK_THROWS_AS(split_sentences({1, 2, 3}, 1), Error);
  CHECK_THROWS_AS(split_sentences({1, 2, 3}, 0), Error);
}

TEST_CASE("partition assigns documents disjointly and truncates splits") {
  std::vector<TokenSequence> docs;
  for (int i = 0; i < 30; ++i) {
    docs.push_back(doc_of("doc" + std::to_string(i), 120, 100 + i));
  }
  PartitionConfig cfg;
  cfg.sentence_length = 10;
  cfg.sentences_per_split = 20;
  cfg.vocab_size = 64;
  cfg.min_count = 1;
  cfg.seed = 7;

  const PreparedCorpus corpus = partition_corpus(docs, cfg);
  CHECK(corpus.partition.train.size() == 20);
  CHECK(corpus.partition.validation.size() == 20);
  CHECK(corpus.partition.test.size() == 20);
  CHECK(corpus.document_count == 30);
  CHECK(corpus.total_tokens == 30 * 120);

  const auto& tm = corpus.partition.train_manifest;
  const auto& vm = corpus.partition.validation_manifest;
  const auto& sm = corpus.partition.test_manifest;
  CHECK(tm.documents >= 1);
  CHECK(vm.documents >= 1);
  CHECK(sm.documents >= 1);
  // Document-level disjointness: no source id appears in two splits.
  std::set<std::string> seen;
  for (const auto* manifest : {&tm, &vm, &sm}) {
    CHECK(manifest->source_ids.size() == manifest->documents);
    for (const std::string& id : manifest->source_ids) {
      CHECK(seen.insert(id).second);
    }
  }
  CHECK(tm.source_hash != vm.source_hash);
  CHECK(vm.source_hash != sm.source_hash);
  CHECK(tm.source_hash != sm.source_hash);

  for (const Sentence& s : corpus.partition.train) {
    CHECK(s.length() == 10);
    for (uint32_t id : s.ids) CHECK(id < corpus.vocab.size());
  }
}

TEST_CASE("partition is deterministic in its seed") {
  std::vector<TokenSequence> docs;
  for (int i = 0; i < 12; ++i) {
    docs.push_back(doc_of("d" + std::to_string(i), 80, 40 + i));
  }
  PartitionConfig cfg;
  cfg.sentence_length = 8;
  cfg.sentences_per_split = 10;
  cfg.vocab_size = 64;
  cfg.min_count = 1;
  cfg.seed = 1234;

  const PreparedCorpus a = partition_corpus(docs, cfg);
  const PreparedCorpus b = partition_corpus(docs, cfg);
  CHECK(a.partition.train == b.partition.train);
  CHECK(a.partition.validation == b.partition.validation);
  CHECK(a.partition.test == b.partition.test);
  CHECK(a.partition.train_manifest.source_hash ==
        b.partition.train_manifest.source_hash);
  CHECK(a.vocab.hash() == b.vocab.hash());

  cfg.seed = 4321;
  const PreparedCorpus c = partition_corpus(docs, cfg);
  CHECK(a.partition.train_manifest.source_hash !=
        c.partition.train_manifest.source_hash);
}

TEST_CASE("insufficient corpus reports achievable counts") {
  std::vector<TokenSequence> docs = {doc_of("only", 50, 3)};
  PartitionConfig cfg;
  cfg.sentence_length = 10;
  cfg.sentences_per_split = 100;
  CHECK_THROWS_WITH_AS(partition_corpus(docs, cfg),
                       doctest::Contains("insufficient corpus"), Error);
  CHECK_THROWS_AS(partition_corpus({}, cfg), Error);
}

TEST_CASE("duplicate source ids are rejected") {
  std::vector<TokenSequence> docs = {doc_of("same", 40, 1),
                                     doc_of("same", 40, 2)};
  PartitionConfig cfg;
  cfg.sentence_length = 4;
  cfg.sentences_per_split = 2;
  CHECK_THROWS_WITH_AS(partition_corpus(docs, cfg),
                       doctest::Contains("duplicate"), Error);
}

TEST_CASE("corpus directory round-trip and byte-stable rewrite") {
  std::vector<TokenSequence> docs;
  for (int i = 0; i < 15; ++i) {
    docs.push_back(doc_of("f" + std::to_string(i) + ".java", 90, 60 + i));
  }
  PartitionConfig cfg;
  cfg.sentence_length = 9;
  cfg.sentences_per_split = 12;
  cfg.vocab_size = 40;
  cfg.min_count = 1;
  cfg.seed = 99;
  const PreparedCorpus corpus = partition_corpus(docs, cfg);

  const auto dir_a = temp_dir("codelm_corpus_a");
  const auto dir_b = temp_dir("codelm_corpus_b");
  write_corpus_dir(dir_a, corpus);
  write_corpus_dir(dir_b, corpus);

  for (const char* name :
       {"train.txt", "valid.txt", "test.txt", "vocab.tsv", "manifest.json"}) {
    CHECK_MESSAGE(slurp(dir_a / name) == slurp(dir_b / name), name);
  }

  const LoadedCorpus loaded = load_corpus_dir(dir_a);
  CHECK(loaded.vocab.hash() == corpus.vocab.hash());
  CHECK(loaded.train == corpus.partition.train);
  CHECK(loaded.validation == corpus.partition.validation);
  CHECK(loaded.test == corpus.partition.test);

  CHECK(&corpus_split(loaded, "train") == &loaded.train);
  CHECK(&corpus_split(loaded, "valid") == &loaded.validation);
  CHECK(&corpus_split(loaded, "test") == &loaded.test);
  CHECK_THROWS_AS(corpus_split(loaded, "bogus"), Error);

  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
}

TEST_SUITE_END();
