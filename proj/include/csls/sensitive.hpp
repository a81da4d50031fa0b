#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "csls/autograd.hpp"

namespace csls {

// kRaw picks the smallest mean; kAbsolute picks the mean nearest zero.
enum class SensitiveMode { kRaw, kAbsolute };

struct SensitiveSelection {
  std::vector<double> line_means;      // [b, k]
  std::vector<std::size_t> min_index;  // [b]
  ag::Var l_repr;                      // [b, h], gathered from the live LE
};

// Mean over the hidden dimension for every (snippet, line) of a [b, k, h]
// array.
std::vector<double> line_means(std::span<const double> line_embeddings, std::size_t batch,
                               std::size_t lines, std::size_t hidden);

// Index of the selected line per snippet. Padded lines never win; ties go
// to the smallest index. Throws if a snippet has no real line.
std::vector<std::size_t> sensitive_indices(std::span<const double> means,
                                           std::span<const std::uint8_t> line_mask,
                                           std::size_t batch, std::size_t lines,
                                           SensitiveMode mode = SensitiveMode::kRaw);

SensitiveSelection select_sensitive(const ag::Var& line_embeddings,
                                    std::span<const std::uint8_t> line_mask,
                                    SensitiveMode mode = SensitiveMode::kRaw);

}  // namespace csls
