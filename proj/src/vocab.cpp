#include "vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "error.hpp"
#include "rng.hpp"

namespace codelm {

namespace {

bool is_special_text(std::string_view text) {
  return text == kNumToken || text == kStrToken || text == kUnkToken;
}

}  // namespace

void Vocabulary::insert(std::string text, uint64_t count) {
  const auto id = static_cast<uint32_t>(texts_.size());
  ids_.emplace(text, id);
  texts_.push_back(std::move(text));
  counts_.push_back(count);
}

Vocabulary Vocabulary::build(const std::vector<TokenSequence>& sequences,
                             uint32_t max_size, uint32_t min_count) {
  if (max_size < 4) {
    raise(ErrorKind::invalid_argument,
          "vocabulary size must be at least 4 (3 specials + 1 token)");
  }
  if (min_count < 1) {
    raise(ErrorKind::invalid_argument, "min_count must be at least 1");
  }

  std::map<std::string, uint64_t> freq;  // ordered: deterministic iteration
  uint64_t total = 0;
  for (const TokenSequence& seq : sequences) {
    for (const Token& t : seq.tokens) {
      ++freq[normalize_token(t).text];
      ++total;
    }
  }
  if (total == 0) {
    raise(ErrorKind::corpus, "cannot build a vocabulary from an empty corpus");
  }

  auto count_of_special = [&](std::string_view text) {
    auto it = freq.find(std::string(text));
    return it == freq.end() ? 0 : it->second;
  };

  Vocabulary v;
  v.insert(std::string(kNumToken), count_of_special(kNumToken));
  v.insert(std::string(kStrToken), count_of_special(kStrToken));
  v.insert(std::string(kUnkToken), 0);  // count filled with leftovers below

  std::vector<std::pair<std::string_view, uint64_t>> ranked;
  ranked.reserve(freq.size());
  for (const auto& [text, count] : freq) {
    if (!is_special_text(text)) ranked.emplace_back(text, count);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  uint64_t unk_count = 0;
  for (const auto& [text, count] : ranked) {
    if (v.size() < max_size && count >= min_count) {
      v.insert(std::string(text), count);
    } else {
      unk_count += count;
    }
  }
  v.counts_[kUnkId] = unk_count;
  return v;
}

bool Vocabulary::contains(std::string_view text) const {
  return ids_.find(std::string(text)) != ids_.end();
}

uint32_t Vocabulary::id_of(std::string_view text) const {
  auto it = ids_.find(std::string(text));
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::text_of(uint32_t id) const {
  if (id >= texts_.size()) {
    raise(ErrorKind::invalid_argument,
          "token id " + std::to_string(id) + " out of range (vocabulary size " +
              std::to_string(texts_.size()) + ")");
  }
  return texts_[id];
}

uint64_t Vocabulary::count_of(uint32_t id) const {
  if (id >= counts_.size()) {
    raise(ErrorKind::invalid_argument,
          "token id " + std::to_string(id) + " out of range");
  }
  return counts_[id];
}

std::vector<uint32_t> Vocabulary::encode(
    const std::vector<std::string>& texts) const {
  std::vector<uint32_t> ids;
  ids.reserve(texts.size());
  for (const std::string& text : texts) ids.push_back(id_of(text));
  return ids;
}

std::vector<std::string> Vocabulary::decode(
    const std::vector<uint32_t>& ids) const {
  std::vector<std::string> texts;
  texts.reserve(ids.size());
  for (uint32_t id : ids) texts.push_back(text_of(id));
  return texts;
}

uint64_t Vocabulary::hash() const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const std::string& text : texts_) {
    h = fnv1a64(text.data(), text.size(), h);
    h = fnv1a64("\n", 1, h);
  }
  return h;
}

void Vocabulary::save_tsv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    raise(ErrorKind::io, "cannot open " + path.string() + " for writing");
  }
  for (uint32_t id = 0; id < size(); ++id) {
    out << id << '\t' << texts_[id] << '\t' << counts_[id] << '\n';
  }
  if (!out) {
    raise(ErrorKind::io, "failed writing " + path.string());
  }
}

Vocabulary Vocabulary::load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    raise(ErrorKind::io, "cannot open " + path.string());
  }
  std::vector<std::string> texts;
  std::vector<uint64_t> counts;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string id_text, token, count_text;
    if (!std::getline(fields, id_text, '\t') ||
        !std::getline(fields, token, '\t') ||
        !std::getline(fields, count_text)) {
      raise(ErrorKind::corpus, path.string() + ":" + std::to_string(lineno) +
                                   ": malformed vocabulary line");
    }
    if (std::stoull(id_text) != texts.size()) {
      raise(ErrorKind::corpus, path.string() + ":" + std::to_string(lineno) +
                                   ": ids must be dense and in order");
    }
    texts.push_back(token);
    counts.push_back(std::stoull(count_text));
  }
  return from_entries(std::move(texts), std::move(counts));
}

Vocabulary Vocabulary::from_entries(std::vector<std::string> texts,
                                    std::vector<uint64_t> counts) {
  if (texts.size() != counts.size()) {
    raise(ErrorKind::invalid_argument, "texts/counts size mismatch");
  }
  if (texts.size() < 3 || texts[kNumId] != kNumToken ||
      texts[kStrId] != kStrToken || texts[kUnkId] != kUnkToken) {
    raise(ErrorKind::corpus,
          "vocabulary must start with the specials <num>, <str>, <unk>");
  }
  Vocabulary v;
  for (size_t i = 0; i < texts.size(); ++i) {
    if (v.ids_.count(texts[i])) {
      raise(ErrorKind::corpus, "duplicate vocabulary entry: " + texts[i]);
    }
    v.insert(std::move(texts[i]), counts[i]);
  }
  return v;
}

}  // namespace codelm
