#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "csls/tokenize.hpp"

namespace csls {

inline constexpr std::size_t kDefaultLineCap = 100;
inline constexpr std::size_t kDefaultLineTokens = 20;

// Splits on '\n'. Indentation and interior spacing stay in the line, blank
// lines become empty strings, and a single trailing newline does not open an
// extra line.
std::vector<std::string> split_lines(std::string_view code);

// Aligned per-line token ids for one batch.
struct LineTokenBatch {
  std::size_t batch = 0;
  std::size_t lines = 0;        // k
  std::size_t line_tokens = 0;  // p
  std::vector<TokenId> tokens;          // [batch, k, p]
  std::vector<std::uint8_t> token_mask;  // [batch, k, p]
  std::vector<std::uint8_t> line_mask;   // [batch, k]
  std::vector<std::size_t> real_lines;   // lines kept per snippet (<= k)
  std::vector<std::size_t> source_lines;  // lines before the cap
  std::vector<std::uint8_t> line_truncated;  // [batch, k]

  std::size_t tok_index(std::size_t b, std::size_t j, std::size_t t) const {
    return (b * lines + j) * line_tokens + t;
  }
};

struct AlignOptions {
  std::size_t k_cap = kDefaultLineCap;
  std::size_t p = kDefaultLineTokens;
  // Pin k to k_cap instead of the batch maximum, so a snippet's rows do not
  // depend on its batch companions.
  bool pad_to_cap = false;
};

LineTokenBatch align_batch(const std::vector<std::vector<std::string>>& line_lists,
                           const Tokenizer& tok, const AlignOptions& opts = {});

// One debug record per snippet: k, real line count and per-line truncation.
std::vector<nlohmann::json> align_debug_records(const LineTokenBatch& batch);

}  // namespace csls
