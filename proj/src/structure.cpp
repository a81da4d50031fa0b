#include "csls/structure.hpp"

#include <algorithm>
#include <stdexcept>

namespace csls {

void StructureConfig::validate() const {
  if (layers < 1 || heads < 1 || hidden < 1 || ffn < 1 || max_lines < 1)
    throw std::invalid_argument("structure config: all dimensions must be >= 1");
  if (hidden % heads != 0)
    throw std::invalid_argument("structure config: hidden " + std::to_string(hidden) +
                                " not divisible by heads " + std::to_string(heads));
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("structure config: dropout must be in [0,1)");
}

StructureConfig StructureConfig::desk() { return {}; }

StructureConfig StructureConfig::paper_scale() {
  StructureConfig c;
  c.layers = 8;
  c.heads = 8;
  c.hidden = 768;
  c.ffn = 3072;
  c.max_lines = 128;
  c.dropout = 0.1;
  return c;
}

void to_json(nlohmann::json& j, const StructureConfig& c) {
  j = {{"layers", c.layers}, {"heads", c.heads},         {"hidden", c.hidden},
       {"ffn", c.ffn},       {"max_lines", c.max_lines}, {"dropout", c.dropout},
       {"pooling", c.pooling == StructurePooling::kMaskedMean ? "mean" : "first"}};
}

void from_json(const nlohmann::json& j, StructureConfig& c) {
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.hidden = j.value("hidden", c.hidden);
  c.ffn = j.value("ffn", c.ffn);
  c.max_lines = j.value("max_lines", c.max_lines);
  c.dropout = j.value("dropout", c.dropout);
  if (j.contains("pooling")) {
    auto p = j.at("pooling").get<std::string>();
    if (p == "mean")
      c.pooling = StructurePooling::kMaskedMean;
    else if (p == "first")
      c.pooling = StructurePooling::kFirstLine;
    else
      throw std::invalid_argument("structure config: unknown pooling '" + p + "'");
  }
}

StructureModel::StructureModel(const StructureConfig& cfg, ParamInit& init)
    : cfg_((cfg.validate(), cfg)),
      stack_(cfg.layers, cfg.hidden, cfg.heads, cfg.ffn, cfg.dropout, init) {}

void StructureModel::collect(const std::string& prefix, ParamList& out) const {
  stack_.collect(prefix, out);
}

ag::Var StructureModel::structure_repr(const ag::Var& line_embeddings,
                                       std::span<const std::uint8_t> line_mask,
                                       const ForwardContext& ctx) const {
  if (line_embeddings->shape.size() != 3 || line_embeddings->dim(2) != cfg_.hidden)
    throw std::invalid_argument("structure_repr: expected [b, k, " + std::to_string(cfg_.hidden) + "], got " +
                                ag::shape_str(line_embeddings->shape));
  const std::size_t b = line_embeddings->dim(0), k = line_embeddings->dim(1), h = cfg_.hidden;
  if (line_mask.size() != b * k) throw std::invalid_argument("structure_repr: line mask size mismatch");
  if (k > cfg_.max_lines)
    throw std::invalid_argument("structure_repr: " + std::to_string(k) + " lines exceed max_lines " +
                                std::to_string(cfg_.max_lines));
  for (std::size_t i = 0; i < b; ++i) {
    auto row = line_mask.subspan(i * k, k);
    if (std::none_of(row.begin(), row.end(), [](std::uint8_t m) { return m != 0; }))
      throw std::invalid_argument("structure_repr: snippet " + std::to_string(i) + " has no real lines");
  }

  // position = line number
  auto table = sinusoidal_table(k, h);
  std::vector<double> pe(b * k * h);
  for (std::size_t i = 0; i < b; ++i) std::copy(table.begin(), table.end(), pe.begin() + static_cast<std::ptrdiff_t>(i * k * h));
  auto x = ag::add(ag::reshape(line_embeddings, {b * k, h}), ag::constant({b * k, h}, std::move(pe)));
  x = stack_.forward(x, line_mask, b, k, ctx);

  if (cfg_.pooling == StructurePooling::kFirstLine) {
    std::vector<std::size_t> rows(b);
    for (std::size_t i = 0; i < b; ++i) rows[i] = i * k;
    return ag::gather_rows(x, rows);
  }
  return ag::masked_mean_rows(x, line_mask, b, k);
}

}  // namespace csls
