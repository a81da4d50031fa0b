#include "csls/linealign.hpp"

#include <algorithm>
#include <stdexcept>

namespace csls {

std::vector<std::string> split_lines(std::string_view code) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < code.size()) {
    auto nl = code.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.emplace_back(code.substr(start));
      break;
    }
    lines.emplace_back(code.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

LineTokenBatch align_batch(const std::vector<std::vector<std::string>>& line_lists,
                           const Tokenizer& tok, const AlignOptions& opts) {
  if (line_lists.empty()) throw std::invalid_argument("align_batch: empty batch");
  if (opts.k_cap < 1) throw std::invalid_argument("align_batch: k_cap must be >= 1");
  if (opts.p < 2) throw std::invalid_argument("align_batch: p must be >= 2");

  std::size_t longest = 0;
  for (std::size_t i = 0; i < line_lists.size(); ++i) {
    if (line_lists[i].empty())
      throw std::invalid_argument("align_batch: snippet " + std::to_string(i) + " has zero lines");
    longest = std::max(longest, line_lists[i].size());
  }

  LineTokenBatch out;
  out.batch = line_lists.size();
  out.lines = opts.pad_to_cap ? opts.k_cap : std::min(longest, opts.k_cap);
  out.line_tokens = opts.p;
  const std::size_t k = out.lines, p = out.line_tokens;
  out.tokens.assign(out.batch * k * p, tok.pad_id());
  out.token_mask.assign(out.batch * k * p, 0);
  out.line_mask.assign(out.batch * k, 0);
  out.line_truncated.assign(out.batch * k, 0);

  for (std::size_t b = 0; b < out.batch; ++b) {
    const auto& lines = line_lists[b];
    const std::size_t kept = std::min(lines.size(), k);
    out.real_lines.push_back(kept);
    out.source_lines.push_back(lines.size());
    for (std::size_t j = 0; j < kept; ++j) {
      auto seq = encode_text(tok, lines[j], p);
      std::copy(seq.ids.begin(), seq.ids.end(), out.tokens.begin() + static_cast<std::ptrdiff_t>(out.tok_index(b, j, 0)));
      std::copy(seq.mask.begin(), seq.mask.end(), out.token_mask.begin() + static_cast<std::ptrdiff_t>(out.tok_index(b, j, 0)));
      out.line_mask[b * k + j] = 1;
      out.line_truncated[b * k + j] = seq.truncated ? 1 : 0;
    }
  }
  return out;
}

std::vector<nlohmann::json> align_debug_records(const LineTokenBatch& batch) {
  std::vector<nlohmann::json> records;
  for (std::size_t b = 0; b < batch.batch; ++b) {
    std::vector<int> trunc;
    for (std::size_t j = 0; j < batch.real_lines[b]; ++j) trunc.push_back(batch.line_truncated[b * batch.lines + j]);
    records.push_back({{"k", batch.lines},
                       {"p", batch.line_tokens},
                       {"real_lines", batch.real_lines[b]},
                       {"source_lines", batch.source_lines[b]},
                       {"line_truncated", trunc}});
  }
  return records;
}

}  // namespace csls
