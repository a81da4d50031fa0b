#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "json.hpp"

#include "csls/autograd.hpp"
#include "csls/encoders.hpp"

namespace csls {

enum class StructurePooling { kMaskedMean, kFirstLine };

struct StructureConfig {
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t hidden = 32;
  std::size_t ffn = 64;
  std::size_t max_lines = 128;
  double dropout = 0.0;
  StructurePooling pooling = StructurePooling::kMaskedMean;

  void validate() const;
  static StructureConfig desk();
  static StructureConfig paper_scale();  // 8 layers, 8 heads, h = 768
};

void to_json(nlohmann::json& j, const StructureConfig& c);
void from_json(const nlohmann::json& j, StructureConfig& c);

// Gradient barrier: same values, no path back to the producer.
inline ag::Var detach(const ag::Var& line_embeddings) { return ag::detach(line_embeddings); }

// Transformer over line vectors with line-index positions.
class StructureModel {
 public:
  StructureModel(const StructureConfig& cfg, ParamInit& init);

  const StructureConfig& config() const { return cfg_; }
  void collect(const std::string& prefix, ParamList& out) const;

  // line_embeddings: [b, k, h]; line_mask: [b, k]. Returns S_repr [b, h].
  ag::Var structure_repr(const ag::Var& line_embeddings, std::span<const std::uint8_t> line_mask,
                         const ForwardContext& ctx = {}) const;

 private:
  StructureConfig cfg_;
  TransformerStack stack_;
};

}  // namespace csls
