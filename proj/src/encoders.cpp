#include "csls/encoders.hpp"

#include <cmath>
#include <stdexcept>

namespace csls {

std::vector<double> sinusoidal_table(std::size_t len, std::size_t hidden) {
  std::vector<double> pe(len * hidden, 0.0);
  for (std::size_t pos = 0; pos < len; ++pos) {
    for (std::size_t i = 0; i < hidden; i += 2) {
      double freq = std::pow(10000.0, static_cast<double>(i) / static_cast<double>(hidden));
      pe[pos * hidden + i] = std::sin(static_cast<double>(pos) / freq);
      if (i + 1 < hidden) pe[pos * hidden + i + 1] = std::cos(static_cast<double>(pos) / freq);
    }
  }
  return pe;
}

ag::Var ParamInit::normal(ag::Shape shape, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> data(ag::numel(shape));
  for (auto& v : data) v = dist(rng_);
  return ag::parameter(std::move(shape), std::move(data));
}

ag::Var ParamInit::fan_in(std::size_t in, std::size_t out) {
  return normal({in, out}, 1.0 / std::sqrt(static_cast<double>(in)));
}

ag::Var ParamInit::filled(ag::Shape shape, double value) {
  auto n = ag::numel(shape);
  return ag::parameter(std::move(shape), std::vector<double>(n, value));
}

TransformerLayer::TransformerLayer(std::size_t hidden, std::size_t heads, std::size_t ffn,
                                   double dropout, ParamInit& init)
    : heads_(heads), dropout_(dropout) {
  ln1_g_ = init.filled({hidden}, 1.0);
  ln1_b_ = init.filled({hidden}, 0.0);
  wq_ = init.fan_in(hidden, hidden);
  bq_ = init.filled({hidden}, 0.0);
  wk_ = init.fan_in(hidden, hidden);
  bk_ = init.filled({hidden}, 0.0);
  wv_ = init.fan_in(hidden, hidden);
  bv_ = init.filled({hidden}, 0.0);
  wo_ = init.fan_in(hidden, hidden);
  bo_ = init.filled({hidden}, 0.0);
  ln2_g_ = init.filled({hidden}, 1.0);
  ln2_b_ = init.filled({hidden}, 0.0);
  w1_ = init.fan_in(hidden, ffn);
  b1_ = init.filled({ffn}, 0.0);
  w2_ = init.fan_in(ffn, hidden);
  b2_ = init.filled({hidden}, 0.0);
}

ag::Var TransformerLayer::forward(const ag::Var& x, std::span<const std::uint8_t> mask,
                                  std::size_t batch, std::size_t len, const ForwardContext& ctx) const {
  auto maybe_drop = [&](const ag::Var& v) {
    return ctx.training() && dropout_ > 0.0 ? ag::dropout(v, dropout_, *ctx.rng) : v;
  };
  auto h1 = ag::layer_norm(x, ln1_g_, ln1_b_);
  auto q = ag::linear(h1, wq_, bq_);
  auto k = ag::linear(h1, wk_, bk_);
  auto v = ag::linear(h1, wv_, bv_);
  auto attn = ag::attention(q, k, v, mask, batch, len, heads_);
  auto x1 = ag::add(x, maybe_drop(ag::linear(attn, wo_, bo_)));
  auto h2 = ag::layer_norm(x1, ln2_g_, ln2_b_);
  auto ff = ag::linear(ag::gelu(ag::linear(h2, w1_, b1_)), w2_, b2_);
  return ag::add(x1, maybe_drop(ff));
}

void TransformerLayer::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + "ln1.gamma", ln1_g_});
  out.push_back({prefix + "ln1.beta", ln1_b_});
  out.push_back({prefix + "attn.wq", wq_});
  out.push_back({prefix + "attn.bq", bq_});
  out.push_back({prefix + "attn.wk", wk_});
  out.push_back({prefix + "attn.bk", bk_});
  out.push_back({prefix + "attn.wv", wv_});
  out.push_back({prefix + "attn.bv", bv_});
  out.push_back({prefix + "attn.wo", wo_});
  out.push_back({prefix + "attn.bo", bo_});
  out.push_back({prefix + "ln2.gamma", ln2_g_});
  out.push_back({prefix + "ln2.beta", ln2_b_});
  out.push_back({prefix + "ffn.w1", w1_});
  out.push_back({prefix + "ffn.b1", b1_});
  out.push_back({prefix + "ffn.w2", w2_});
  out.push_back({prefix + "ffn.b2", b2_});
}

TransformerStack::TransformerStack(std::size_t layers, std::size_t hidden, std::size_t heads,
                                   std::size_t ffn, double dropout, ParamInit& init) {
  layers_.reserve(layers);
  for (std::size_t i = 0; i < layers; ++i) layers_.emplace_back(hidden, heads, ffn, dropout, init);
}

ag::Var TransformerStack::forward(ag::Var x, std::span<const std::uint8_t> mask, std::size_t batch,
                                  std::size_t len, const ForwardContext& ctx) const {
  for (const auto& layer : layers_) x = layer.forward(x, mask, batch, len, ctx);
  return x;
}

void TransformerStack::collect(const std::string& prefix, ParamList& out) const {
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i].collect(prefix + "layers." + std::to_string(i) + ".", out);
}

void EncoderConfig::validate() const {
  if (vocab_size < 1 || hidden < 1 || layers < 1 || heads < 1 || ffn < 1 || max_positions < 1)
    throw std::invalid_argument("encoder config: all dimensions must be >= 1");
  if (hidden % heads != 0)
    throw std::invalid_argument("encoder config: hidden " + std::to_string(hidden) +
                                " not divisible by heads " + std::to_string(heads));
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("encoder config: dropout must be in [0,1)");
}

EncoderConfig EncoderConfig::desk() { return {}; }

EncoderConfig EncoderConfig::paper_scale() {
  EncoderConfig c;
  c.hidden = 768;
  c.layers = 12;
  c.heads = 12;
  c.ffn = 3072;
  c.max_positions = 1024;
  c.dropout = 0.1;
  return c;
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"vocab_size", c.vocab_size}, {"hidden", c.hidden}, {"layers", c.layers},
       {"heads", c.heads},           {"ffn", c.ffn},       {"max_positions", c.max_positions},
       {"dropout", c.dropout}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.hidden = j.value("hidden", c.hidden);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.ffn = j.value("ffn", c.ffn);
  c.max_positions = j.value("max_positions", c.max_positions);
  c.dropout = j.value("dropout", c.dropout);
}

SequenceEncoder::SequenceEncoder(const EncoderConfig& cfg, ParamInit& init)
    : cfg_((cfg.validate(), cfg)),
      token_embedding_(init.normal({cfg.vocab_size, cfg.hidden}, 1.0)),
      stack_(cfg.layers, cfg.hidden, cfg.heads, cfg.ffn, cfg.dropout, init) {}

void SequenceEncoder::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + "token_embedding", token_embedding_});
  stack_.collect(prefix, out);
}

ag::Var SequenceEncoder::encode_sequences(std::span<const TokenId> tokens,
                                          std::span<const std::uint8_t> mask, std::size_t batch,
                                          std::size_t len, const ForwardContext& ctx) const {
  if (tokens.size() != batch * len || mask.size() != batch * len)
    throw std::invalid_argument("encode_sequences: tokens/mask sizes do not match [" +
                                std::to_string(batch) + ", " + std::to_string(len) + "]");
  if (len == 0) throw std::invalid_argument("encode_sequences: empty sequence dimension");
  if (len > cfg_.max_positions)
    throw std::invalid_argument("encode_sequences: length " + std::to_string(len) +
                                " exceeds max_positions " + std::to_string(cfg_.max_positions));
  for (auto m : mask)
    if (m > 1) throw std::invalid_argument("encode_sequences: mask must be binary");

  const std::size_t h = cfg_.hidden;
  auto x = ag::embedding(token_embedding_, tokens);
  auto table = sinusoidal_table(len, h);
  std::vector<double> pe(batch * len * h);
  for (std::size_t b = 0; b < batch; ++b) std::copy(table.begin(), table.end(), pe.begin() + static_cast<std::ptrdiff_t>(b * len * h));
  x = ag::add(x, ag::constant({batch * len, h}, std::move(pe)));
  x = stack_.forward(x, mask, batch, len, ctx);
  return ag::reshape(x, {batch, len, h});
}

ag::Var cls_pool(const ag::Var& hidden) {
  if (hidden->shape.size() != 3) throw std::invalid_argument("cls_pool: expected [B, l, h]");
  const std::size_t batch = hidden->dim(0), len = hidden->dim(1);
  if (len == 0) throw std::invalid_argument("cls_pool: empty sequence dimension");
  std::vector<std::size_t> rows(batch);
  for (std::size_t b = 0; b < batch; ++b) rows[b] = b * len;
  return ag::gather_rows(ag::reshape(hidden, {batch * len, hidden->dim(2)}), rows);
}

ag::Var line_embed(const SequenceEncoder& line_model, const LineTokenBatch& batch,
                   const ForwardContext& ctx) {
  const std::size_t flat = batch.batch * batch.lines;
  auto hidden = line_model.encode_sequences(batch.tokens, batch.token_mask, flat, batch.line_tokens, ctx);
  return ag::reshape(cls_pool(hidden), {batch.batch, batch.lines, line_model.config().hidden});
}

ag::Var global_embed(const SequenceEncoder& global_model, const GlobalTokenBatch& batch,
                     const ForwardContext& ctx) {
  return cls_pool(global_model.encode_sequences(batch.tokens, batch.mask, batch.batch, batch.len, ctx));
}

}  // namespace csls
