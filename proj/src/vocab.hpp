#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lexer.hpp"

namespace codelm {

// Bidirectional token <-> id map over normalized token texts. Ids are dense
// in [0, size()); the specials <num>, <str>, <unk> always occupy ids 0, 1, 2.
class Vocabulary {
 public:
  static constexpr uint32_t kNumId = 0;
  static constexpr uint32_t kStrId = 1;
  static constexpr uint32_t kUnkId = 2;

  // Frequency-ranked construction: the most frequent normalized tokens fill
  // ids up to max_size (specials included); tokens ranked below that or with
  // count < min_count encode to <unk>. Ties break frequency descending, then
  // text ascending.
  static Vocabulary build(const std::vector<TokenSequence>& sequences,
                          uint32_t max_size, uint32_t min_count);

  uint32_t size() const { return static_cast<uint32_t>(texts_.size()); }
  bool contains(std::string_view text) const;
  uint32_t id_of(std::string_view text) const;  // kUnkId when absent
  const std::string& text_of(uint32_t id) const;
  uint64_t count_of(uint32_t id) const;

  std::vector<uint32_t> encode(const std::vector<std::string>& texts) const;
  std::vector<std::string> decode(const std::vector<uint32_t>& ids) const;

  // FNV-1a over the token texts in id order; identifies vocabulary identity
  // for model/corpus compatibility checks (counts excluded).
  uint64_t hash() const;

  // "id\ttoken\tcount" per line, id order.
  void save_tsv(const std::filesystem::path& path) const;
  static Vocabulary load_tsv(const std::filesystem::path& path);

  // For serialization and noise-distribution construction.
  const std::vector<std::string>& texts() const { return texts_; }
  const std::vector<uint64_t>& counts() const { return counts_; }

  // Assembles a vocabulary from parallel text/count arrays (model loading).
  static Vocabulary from_entries(std::vector<std::string> texts,
                                 std::vector<uint64_t> counts);

 private:
  Vocabulary() = default;
  void insert(std::string text, uint64_t count);

  std::unordered_map<std::string, uint32_t> ids_;
  std::vector<std::string> texts_;
  std::vector<uint64_t> counts_;
};

}  // namespace codelm
