#pragma once

// Minimal reverse-mode automatic differentiation over dense float64 arrays.
//
// Every op returns a fresh node. A node records its parents and a backward
// closure only when gradient recording is enabled and at least one parent
// requires a gradient, so evaluation under NoGradGuard builds no graph.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace csls::ag {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  std::size_t size() const { return value.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  // Allocates the gradient buffer on first use.
  std::vector<double>& grad_buffer();
};

// Disables graph recording for its lifetime (thread-local).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

Var constant(Shape shape, std::vector<double> data);
Var zeros(Shape shape);
Var parameter(Shape shape, std::vector<double> data);

// Runs reverse accumulation from a scalar output.
void backward(const Var& loss);

// Dense ops. Row-major; "rows" means all leading dimensions flattened.
Var matmul(const Var& x, const Var& w);                // [N,in] x [in,out]
Var linear(const Var& x, const Var& w, const Var& b);  // x w + b
Var add(const Var& a, const Var& b);                   // same shape
Var add_bias(const Var& x, const Var& bias);           // [N,h] + [h]
Var scale(const Var& x, double factor);
Var gelu(const Var& x);
Var sigmoid(const Var& x);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta,
               double eps = 1e-5);
Var embedding(const Var& table, std::span<const std::int32_t> ids);
Var dropout(const Var& x, double rate, std::mt19937_64& rng);
Var reshape(const Var& x, Shape shape);

// Multi-head scaled dot-product attention. q, k, v are [batch*len, h];
// key_mask is [batch*len] with 1 for real positions. Masked keys receive
// no weight at all and masked query rows come out as zeros.
Var attention(const Var& q, const Var& k, const Var& v,
              std::span<const std::uint8_t> key_mask, std::size_t batch,
              std::size_t len, std::size_t heads);

Var gather_rows(const Var& x, std::span<const std::size_t> rows);
Var masked_mean_rows(const Var& x, std::span<const std::uint8_t> mask,
                     std::size_t batch, std::size_t len);
Var concat_cols(const std::vector<Var>& parts);
Var row_mean(const Var& x);  // [N,h] -> [N]
Var detach(const Var& x);

// Mean binary cross-entropy with probabilities clamped to [eps, 1-eps].
Var bce(const Var& prob, std::span<const int> labels, double eps = 1e-7);

// Sum of elementwise products with a fixed weight vector; used to build
// scalar probes for gradient checks.
Var weighted_sum(const Var& x, std::span<const double> weights);

}  // namespace csls::ag
