#include "csls/head.hpp"

#include <stdexcept>

namespace csls {

ag::Var fuse(const ag::Var& structure, const ag::Var& sensitive, const ag::Var& global) {
  for (const auto* v : {&structure, &sensitive, &global})
    if ((*v)->shape.size() != 2) throw std::invalid_argument("fuse: inputs must be [b, h]");
  if (structure->shape != sensitive->shape || structure->shape != global->shape)
    throw std::invalid_argument("fuse: width mismatch " + ag::shape_str(structure->shape) + ", " +
                                ag::shape_str(sensitive->shape) + ", " + ag::shape_str(global->shape));
  return ag::concat_cols({structure, sensitive, global});
}

ClassifierHead::ClassifierHead(std::size_t hidden, double threshold, ParamInit& init)
    : hidden_(hidden), threshold_(threshold) {
  if (hidden == 0) throw std::invalid_argument("classifier head: hidden must be >= 1");
  w1_ = init.fan_in(3 * hidden, hidden);
  b1_ = init.filled({hidden}, 0.0);
  w2_ = init.fan_in(hidden, 1);
  b2_ = init.filled({1}, 0.0);
}

void ClassifierHead::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + "w1", w1_});
  out.push_back({prefix + "b1", b1_});
  out.push_back({prefix + "w2", w2_});
  out.push_back({prefix + "b2", b2_});
}

ag::Var ClassifierHead::logits(const ag::Var& fused) const {
  if (fused->shape.size() != 2 || fused->dim(1) != 3 * hidden_)
    throw std::invalid_argument("classifier head: expected width " + std::to_string(3 * hidden_) + ", got " +
                                ag::shape_str(fused->shape));
  auto z = ag::linear(ag::gelu(ag::linear(fused, w1_, b1_)), w2_, b2_);
  return ag::reshape(z, {fused->dim(0)});
}

ag::Var ClassifierHead::predict(const ag::Var& fused) const { return ag::sigmoid(logits(fused)); }

std::vector<int> ClassifierHead::classify(std::span<const double> probabilities) const {
  std::vector<int> out;
  out.reserve(probabilities.size());
  for (double p : probabilities) out.push_back(p >= threshold_ ? 1 : 0);
  return out;
}

ag::Var bce_loss(std::span<const int> labels, const ag::Var& probabilities, double eps) {
  return ag::bce(probabilities, labels, eps);
}

}  // namespace csls
