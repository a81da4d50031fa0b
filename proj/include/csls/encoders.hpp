#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "csls/autograd.hpp"
#include "csls/linealign.hpp"
#include "csls/tokenize.hpp"

namespace csls {

struct NamedParam {
  std::string name;
  ag::Var var;
};
using ParamList = std::vector<NamedParam>;

// Dropout source for a forward pass; a null rng means evaluation mode.
struct ForwardContext {
  std::mt19937_64* rng = nullptr;
  bool training() const { return rng != nullptr; }
};

// Sinusoidal position table [len, hidden].
std::vector<double> sinusoidal_table(std::size_t len, std::size_t hidden);

// Deterministic parameter initializer shared by all modules.
class ParamInit {
 public:
  explicit ParamInit(std::uint64_t seed) : rng_(seed) {}
  ag::Var normal(ag::Shape shape, double stddev);
  ag::Var fan_in(std::size_t in, std::size_t out);  // N(0, 1/in)
  ag::Var filled(ag::Shape shape, double value);

 private:
  std::mt19937_64 rng_;
};

// Pre-norm transformer block. With all weights zero the block reduces to
// the identity through its residual paths.
class TransformerLayer {
 public:
  TransformerLayer(std::size_t hidden, std::size_t heads, std::size_t ffn, double dropout, ParamInit& init);

  ag::Var forward(const ag::Var& x, std::span<const std::uint8_t> mask, std::size_t batch,
                  std::size_t len, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  std::size_t heads_;
  double dropout_;
  ag::Var ln1_g_, ln1_b_, wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
  ag::Var ln2_g_, ln2_b_, w1_, b1_, w2_, b2_;
};

class TransformerStack {
 public:
  TransformerStack(std::size_t layers, std::size_t hidden, std::size_t heads, std::size_t ffn,
                   double dropout, ParamInit& init);
  ag::Var forward(ag::Var x, std::span<const std::uint8_t> mask, std::size_t batch, std::size_t len,
                  const ForwardContext& ctx) const;
  void collect(const std::string& prefix, ParamList& out) const;
  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<TransformerLayer> layers_;
};

struct EncoderConfig {
  std::size_t vocab_size = Vocab::kSize;
  std::size_t hidden = 32;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ffn = 64;
  std::size_t max_positions = 1024;
  double dropout = 0.0;

  void validate() const;
  static EncoderConfig desk();
  static EncoderConfig paper_scale();
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

// Token embedding + sinusoidal positions + transformer stack. No norm on the
// output: a unit-gain norm would give every line vector a zero hidden mean
// and leave the sensitive-line argmin to rounding noise.
// Realizes both the line model and the global model.
class SequenceEncoder {
 public:
  SequenceEncoder(const EncoderConfig& cfg, ParamInit& init);

  const EncoderConfig& config() const { return cfg_; }
  void collect(const std::string& prefix, ParamList& out) const;

  // tokens/mask are [batch, len]; output has shape [batch, len, hidden].
  ag::Var encode_sequences(std::span<const TokenId> tokens, std::span<const std::uint8_t> mask,
                           std::size_t batch, std::size_t len, const ForwardContext& ctx = {}) const;

 private:
  EncoderConfig cfg_;
  ag::Var token_embedding_;
  TransformerStack stack_;
};

// First-position hidden state of each sequence: [B, l, h] -> [B, h].
ag::Var cls_pool(const ag::Var& hidden);

// Encodes all lines of a batch in one pass: [b,k,p] -> [b*k,p] -> [b,k,h].
// Rows for padding lines are finite but carry no meaning.
ag::Var line_embed(const SequenceEncoder& line_model, const LineTokenBatch& batch,
                   const ForwardContext& ctx = {});

// CLS state of the whole-fragment encoding: [b, h].
ag::Var global_embed(const SequenceEncoder& global_model, const GlobalTokenBatch& batch,
                     const ForwardContext& ctx = {});

}  // namespace csls
