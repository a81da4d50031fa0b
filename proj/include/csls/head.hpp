#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "csls/autograd.hpp"
#include "csls/encoders.hpp"

namespace csls {

inline constexpr double kProbEpsilon = 1e-7;

// [S_repr, L_repr, G_repr] -> [b, 3h]
ag::Var fuse(const ag::Var& structure, const ag::Var& sensitive, const ag::Var& global);

// MLP 3h -> h -> 1 with GELU, followed by a sigmoid.
class ClassifierHead {
 public:
  ClassifierHead(std::size_t hidden, double threshold, ParamInit& init);

  std::size_t hidden() const { return hidden_; }
  double threshold() const { return threshold_; }
  void collect(const std::string& prefix, ParamList& out) const;

  ag::Var logits(const ag::Var& fused) const;   // [b]
  ag::Var predict(const ag::Var& fused) const;  // sigmoid(logits), [b]
  std::vector<int> classify(std::span<const double> probabilities) const;

 private:
  std::size_t hidden_;
  double threshold_;
  ag::Var w1_, b1_, w2_, b2_;
};

// Mean binary cross-entropy over the batch with eps clamping.
ag::Var bce_loss(std::span<const int> labels, const ag::Var& probabilities, double eps = kProbEpsilon);

}  // namespace csls
