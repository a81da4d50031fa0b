#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "csls/tokenize.hpp"

namespace csls {

// Raised when input data violates a documented invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CodeSnippet {
  std::int64_t id = 0;
  std::string code;  // verbatim, including all whitespace
  int label = 0;     // 1 = vulnerable

  bool operator==(const CodeSnippet&) const = default;
};

struct DatasetSplit {
  std::vector<CodeSnippet> train;
  std::vector<CodeSnippet> valid;
  std::vector<CodeSnippet> test;
};

// JSONL with {"idx": int, "func": string, "target": 0|1} per line. Missing
// idx defaults to the 0-based line number. Blank lines are skipped.
std::vector<CodeSnippet> load_jsonl(const std::filesystem::path& path);
std::vector<CodeSnippet> parse_jsonl(const std::string& text);
std::string to_jsonl(const std::vector<CodeSnippet>& snippets);
void save_jsonl(const std::filesystem::path& path, const std::vector<CodeSnippet>& snippets);

using SplitRatios = std::array<double, 3>;

// Seeded shuffle, floor-allocated sizes, remainder to train.
DatasetSplit split_dataset(const std::vector<CodeSnippet>& snippets, const SplitRatios& ratios,
                           std::uint64_t seed);

struct SnippetCounts {
  std::int64_t id = 0;
  std::size_t structured_tokens = 0;
  std::size_t baseline_tokens = 0;
  std::size_t lines = 0;
};

struct CorpusStats {
  double mean_tokens_structured = 0.0;
  double mean_tokens_baseline = 0.0;
  double ratio = 0.0;  // baseline / structured
  double mean_lines = 0.0;
  double frac_over_limit = 0.0;
  std::size_t limit = 0;
  std::size_t count = 0;
  std::vector<SnippetCounts> per_snippet;
};

// Token counts exclude special tokens.
CorpusStats corpus_stats(const std::vector<CodeSnippet>& snippets, const Tokenizer& tok,
                         std::size_t limit);

nlohmann::json to_json(const CorpusStats& stats);
std::string per_snippet_csv(const CorpusStats& stats);

}  // namespace csls
