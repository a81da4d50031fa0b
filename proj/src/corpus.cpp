#include "csls/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "csls/linealign.hpp"

namespace csls {

std::vector<CodeSnippet> parse_jsonl(const std::string& text) {
  std::vector<CodeSnippet> out;
  std::unordered_set<std::int64_t> ids;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": malformed JSON: " + e.what());
    }
    if (!obj.is_object()) throw ValidationError("line " + std::to_string(lineno) + ": expected a JSON object");
    if (!obj.contains("func") || !obj["func"].is_string())
      throw ValidationError("line " + std::to_string(lineno) + ": missing string field \"func\"");
    if (!obj.contains("target") || !obj["target"].is_number_integer())
      throw ValidationError("line " + std::to_string(lineno) + ": missing integer field \"target\"");
    auto target = obj["target"].get<std::int64_t>();
    if (target != 0 && target != 1)
      throw ValidationError("line " + std::to_string(lineno) + ": label " + std::to_string(target) +
                            " outside {0,1}");
    CodeSnippet s;
    s.code = obj["func"].get<std::string>();
    s.label = static_cast<int>(target);
    if (obj.contains("idx")) {
      if (!obj["idx"].is_number_integer())
        throw ValidationError("line " + std::to_string(lineno) + ": \"idx\" must be an integer");
      s.id = obj["idx"].get<std::int64_t>();
    } else {
      s.id = static_cast<std::int64_t>(lineno - 1);
    }
    if (s.code.empty()) throw ValidationError("line " + std::to_string(lineno) + ": empty \"func\"");
    if (!ids.insert(s.id).second)
      throw ValidationError("line " + std::to_string(lineno) + ": duplicate idx " + std::to_string(s.id));
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<CodeSnippet> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_jsonl(buf.str());
}

std::string to_jsonl(const std::vector<CodeSnippet>& snippets) {
  std::string out;
  for (const auto& s : snippets) {
    out += nlohmann::json{{"idx", s.id}, {"func", s.code}, {"target", s.label}}.dump();
    out += '\n';
  }
  return out;
}

void save_jsonl(const std::filesystem::path& path, const std::vector<CodeSnippet>& snippets) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_jsonl(snippets);
}

DatasetSplit split_dataset(const std::vector<CodeSnippet>& snippets, const SplitRatios& ratios,
                           std::uint64_t seed) {
  if (snippets.empty()) throw std::invalid_argument("split_dataset: no snippets");
  for (double r : ratios)
    if (!(r >= 0.0)) throw std::invalid_argument("split_dataset: ratios must be non-negative");
  double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("split_dataset: ratios sum to " + std::to_string(total) + ", expected 1");

  std::vector<std::size_t> order(snippets.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with explicit draws so the permutation only depends on the
  // engine, not on the standard library's shuffle.
  for (std::size_t i = order.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }

  const auto n = snippets.size();
  // small epsilon guards 0.1*10 landing at 0.999...
  auto n_valid = static_cast<std::size_t>(std::floor(ratios[1] * static_cast<double>(n) + 1e-9));
  auto n_test = static_cast<std::size_t>(std::floor(ratios[2] * static_cast<double>(n) + 1e-9));
  std::size_t n_train = n - n_valid - n_test;

  DatasetSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = snippets[order[i]];
    if (i < n_train)
      split.train.push_back(s);
    else if (i < n_train + n_valid)
      split.valid.push_back(s);
    else
      split.test.push_back(s);
  }
  return split;
}

CorpusStats corpus_stats(const std::vector<CodeSnippet>& snippets, const Tokenizer& tok,
                         std::size_t limit) {
  if (snippets.empty()) throw std::invalid_argument("corpus_stats: empty corpus");
  if (limit == 0) throw std::invalid_argument("corpus_stats: limit must be > 0");
  CorpusStats st;
  st.limit = limit;
  st.count = snippets.size();
  double sum_s = 0.0, sum_b = 0.0, sum_l = 0.0;
  std::size_t over = 0;
  for (const auto& s : snippets) {
    SnippetCounts c;
    c.id = s.id;
    c.structured_tokens = tok.encode(normalize_structured(s.code)).size();
    c.baseline_tokens = tok.encode(normalize_baseline(s.code)).size();
    c.lines = split_lines(s.code).size();
    sum_s += static_cast<double>(c.structured_tokens);
    sum_b += static_cast<double>(c.baseline_tokens);
    sum_l += static_cast<double>(c.lines);
    if (c.structured_tokens > limit) ++over;
    st.per_snippet.push_back(c);
  }
  const double n = static_cast<double>(snippets.size());
  st.mean_tokens_structured = sum_s / n;
  st.mean_tokens_baseline = sum_b / n;
  st.ratio = sum_s > 0.0 ? sum_b / sum_s : 0.0;
  st.mean_lines = sum_l / n;
  st.frac_over_limit = static_cast<double>(over) / n;
  return st;
}

nlohmann::json to_json(const CorpusStats& stats) {
  return {{"count", stats.count},
          {"mean_tokens_structured", stats.mean_tokens_structured},
          {"mean_tokens_baseline", stats.mean_tokens_baseline},
          {"ratio", stats.ratio},
          {"mean_lines", stats.mean_lines},
          {"limit", stats.limit},
          {"frac_over_limit", stats.frac_over_limit}};
}

std::string per_snippet_csv(const CorpusStats& stats) {
  std::ostringstream os;
  os << "id,structured_tokens,baseline_tokens,lines\n";
  for (const auto& c : stats.per_snippet)
    os << c.id << ',' << c.structured_tokens << ',' << c.baseline_tokens << ',' << c.lines << '\n';
  return os.str();
}

}  // namespace csls
