#include "csls/sensitive.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace csls {

std::vector<double> line_means(std::span<const double> line_embeddings, std::size_t batch,
                               std::size_t lines, std::size_t hidden) {
  if (hidden == 0) throw std::invalid_argument("line_means: hidden must be >= 1");
  if (line_embeddings.size() != batch * lines * hidden)
    throw std::invalid_argument("line_means: size does not match [b, k, h]");
  std::vector<double> means(batch * lines);
  for (std::size_t r = 0; r < batch * lines; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < hidden; ++c) s += line_embeddings[r * hidden + c];
    means[r] = s / static_cast<double>(hidden);
  }
  return means;
}

std::vector<std::size_t> sensitive_indices(std::span<const double> means,
                                           std::span<const std::uint8_t> line_mask,
                                           std::size_t batch, std::size_t lines, SensitiveMode mode) {
  if (means.size() != batch * lines || line_mask.size() != batch * lines)
    throw std::invalid_argument("sensitive_indices: means/mask do not match [b, k]");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> idx(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    double best = kInf;
    bool found = false;
    for (std::size_t j = 0; j < lines; ++j) {
      double key = line_mask[b * lines + j] ? means[b * lines + j] : kInf;
      if (mode == SensitiveMode::kAbsolute && line_mask[b * lines + j]) key = std::abs(key);
      // strict < keeps the first of equal keys
      if (line_mask[b * lines + j] && (!found || key < best)) {
        best = key;
        idx[b] = j;
        found = true;
      }
    }
    if (!found) throw std::invalid_argument("select_sensitive: snippet " + std::to_string(b) + " has no real lines");
  }
  return idx;
}

SensitiveSelection select_sensitive(const ag::Var& line_embeddings,
                                    std::span<const std::uint8_t> line_mask, SensitiveMode mode) {
  if (line_embeddings->shape.size() != 3)
    throw std::invalid_argument("select_sensitive: expected [b, k, h], got " + ag::shape_str(line_embeddings->shape));
  const std::size_t b = line_embeddings->dim(0), k = line_embeddings->dim(1), h = line_embeddings->dim(2);
  SensitiveSelection sel;
  sel.line_means = line_means(line_embeddings->value, b, k, h);
  sel.min_index = sensitive_indices(sel.line_means, line_mask, b, k, mode);
  std::vector<std::size_t> rows(b);
  for (std::size_t i = 0; i < b; ++i) rows[i] = i * k + sel.min_index[i];
  sel.l_repr = ag::gather_rows(ag::reshape(line_embeddings, {b * k, h}), rows);
  return sel;
}

}  // namespace csls
