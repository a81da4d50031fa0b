#include "csls/autograd.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace csls::ag {

namespace {

thread_local bool g_grad_enabled = true;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  throw std::invalid_argument(std::string(op) + ": " + detail);
}

std::size_t rows_of(const Node& n) {
  if (n.shape.empty()) return 1;
  return n.size() / n.shape.back();
}

std::size_t cols_of(const Node& n) { return n.shape.empty() ? 1 : n.shape.back(); }

Var make_node(Shape shape, std::vector<double> value, std::vector<Var> parents,
              std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool needs = std::any_of(parents.begin(), parents.end(),
                             [](const Var& p) { return p->requires_grad; });
    if (needs) {
      node->requires_grad = true;
      node->parents = std::move(parents);
      node->backward_fn = std::move(fn);
    }
  }
  return node;
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<double>& Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Var constant(Shape shape, std::vector<double> data) {
  if (numel(shape) != data.size()) shape_error("constant", "data size does not match " + shape_str(shape));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  return node;
}

Var zeros(Shape shape) {
  auto n = numel(shape);
  return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Var parameter(Shape shape, std::vector<double> data) {
  auto node = constant(std::move(shape), std::move(data));
  node->requires_grad = true;
  return node;
}

void backward(const Var& loss) {
  if (loss->size() != 1) throw std::invalid_argument("backward: loss must be a scalar");
  if (!loss->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.get(), 0}};
  seen.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && parent->backward_fn && !seen.count(parent)) {
        seen.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
  // Intermediate gradients are no longer needed; leaves keep theirs.
  for (Node* node : order) {
    if (node != loss.get() && node->backward_fn) {
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

Var matmul(const Var& x, const Var& w) {
  if (w->shape.size() != 2 || cols_of(*x) != w->dim(0))
    shape_error("matmul", shape_str(x->shape) + " x " + shape_str(w->shape));
  const std::size_t n = rows_of(*x), in = w->dim(0), out = w->dim(1);
  std::vector<double> y(n * out);
  MapMat(y.data(), n, out).noalias() =
      ConstMapMat(x->value.data(), n, in) * ConstMapMat(w->value.data(), in, out);
  Shape shape = x->shape;
  if (shape.empty()) shape = {1};
  shape.back() = out;
  return make_node(std::move(shape), std::move(y), {x, w}, [n, in, out](Node& self) {
    auto& xs = *self.parents[0];
    auto& ws = *self.parents[1];
    ConstMapMat dy(self.grad.data(), n, out);
    if (xs.requires_grad)
      MapMat(xs.grad_buffer().data(), n, in).noalias() +=
          dy * ConstMapMat(ws.value.data(), in, out).transpose();
    if (ws.requires_grad)
      MapMat(ws.grad_buffer().data(), in, out).noalias() +=
          ConstMapMat(xs.value.data(), n, in).transpose() * dy;
  });
}

Var linear(const Var& x, const Var& w, const Var& b) { return add_bias(matmul(x, w), b); }

Var add(const Var& a, const Var& b) {
  if (a->shape != b->shape) shape_error("add", shape_str(a->shape) + " vs " + shape_str(b->shape));
  std::vector<double> y(a->size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a->value[i] + b->value[i];
  return make_node(a->shape, std::move(y), {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var add_bias(const Var& x, const Var& bias) {
  const std::size_t h = cols_of(*x);
  if (bias->size() != h) shape_error("add_bias", "bias width " + std::to_string(bias->size()) + " vs " + std::to_string(h));
  const std::size_t n = rows_of(*x);
  std::vector<double> y(x->value);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < h; ++c) y[r * h + c] += bias->value[c];
  return make_node(x->shape, std::move(y), {x, bias}, [n, h](Node& self) {
    auto& xs = *self.parents[0];
    auto& bs = *self.parents[1];
    if (xs.requires_grad) {
      auto& g = xs.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (bs.requires_grad) {
      auto& g = bs.grad_buffer();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < h; ++c) g[c] += self.grad[r * h + c];
    }
  });
}

Var scale(const Var& x, double factor) {
  std::vector<double> y(x->value);
  for (auto& v : y) v *= factor;
  return make_node(x->shape, std::move(y), {x}, [factor](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Var gelu(const Var& x) {
  // tanh approximation
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  std::vector<double> y(x->size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    double v = x->value[i];
    y[i] = 0.5 * v * (1.0 + std::tanh(kC * (v + kA * v * v * v)));
  }
  return make_node(x->shape, std::move(y), {x}, [](Node& self) {
    auto& xs = *self.parents[0];
    auto& g = xs.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      double v = xs.value[i];
      double u = kC * (v + kA * v * v * v);
      double t = std::tanh(u);
      double du = kC * (1.0 + 3.0 * kA * v * v);
      double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
      g[i] += d * self.grad[i];
    }
  });
}

Var sigmoid(const Var& x) {
  std::vector<double> y(x->size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    double v = x->value[i];
    y[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return make_node(x->shape, y, {x}, [y](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += y[i] * (1.0 - y[i]) * self.grad[i];
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const std::size_t h = cols_of(*x), n = rows_of(*x);
  if (gamma->size() != h || beta->size() != h) shape_error("layer_norm", "affine width mismatch");
  std::vector<double> y(x->size()), xhat(x->size()), inv_std(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = x->value.data() + r * h;
    double mean = 0.0;
    for (std::size_t c = 0; c < h; ++c) mean += row[c];
    mean /= static_cast<double>(h);
    double var = 0.0;
    for (std::size_t c = 0; c < h; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= static_cast<double>(h);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < h; ++c) {
      xhat[r * h + c] = (row[c] - mean) * inv_std[r];
      y[r * h + c] = xhat[r * h + c] * gamma->value[c] + beta->value[c];
    }
  }
  return make_node(x->shape, std::move(y), {x, gamma, beta},
                   [n, h, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
    auto& xs = *self.parents[0];
    auto& gs = *self.parents[1];
    auto& bs = *self.parents[2];
    if (gs.requires_grad || bs.requires_grad) {
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < h; ++c) {
          double dy = self.grad[r * h + c];
          if (gs.requires_grad) gs.grad_buffer()[c] += dy * xhat[r * h + c];
          if (bs.requires_grad) bs.grad_buffer()[c] += dy;
        }
    }
    if (!xs.requires_grad) return;
    auto& gx = xs.grad_buffer();
    const double inv_h = 1.0 / static_cast<double>(h);
    for (std::size_t r = 0; r < n; ++r) {
      double sum_d = 0.0, sum_dx = 0.0;
      for (std::size_t c = 0; c < h; ++c) {
        double d = self.grad[r * h + c] * gs.value[c];
        sum_d += d;
        sum_dx += d * xhat[r * h + c];
      }
      for (std::size_t c = 0; c < h; ++c) {
        double d = self.grad[r * h + c] * gs.value[c];
        gx[r * h + c] += inv_std[r] * (d - inv_h * sum_d - xhat[r * h + c] * inv_h * sum_dx);
      }
    }
  });
}

Var embedding(const Var& table, std::span<const std::int32_t> ids) {
  if (table->shape.size() != 2) shape_error("embedding", "table must be 2-D");
  const std::size_t vocab = table->dim(0), h = table->dim(1);
  std::vector<double> y(ids.size() * h);
  std::vector<std::int32_t> idx(ids.begin(), ids.end());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= vocab)
      throw std::out_of_range("embedding: token id " + std::to_string(idx[i]) +
                              " outside vocabulary of size " + std::to_string(vocab));
    std::copy_n(table->value.data() + static_cast<std::size_t>(idx[i]) * h, h, y.data() + i * h);
  }
  const std::size_t count = idx.size();
  return make_node({count, h}, std::move(y), {table}, [h, idx = std::move(idx)](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < h; ++c)
        g[static_cast<std::size_t>(idx[i]) * h + c] += self.grad[i * h + c];
  });
}

Var dropout(const Var& x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) shape_error("dropout", "rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  const double inv = 1.0 / (1.0 - rate);
  std::vector<double> m(x->size());
  for (auto& v : m) v = keep(rng) ? inv : 0.0;
  std::vector<double> y(x->size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x->value[i] * m[i];
  return make_node(x->shape, std::move(y), {x}, [m = std::move(m)](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += m[i] * self.grad[i];
  });
}

Var reshape(const Var& x, Shape shape) {
  if (numel(shape) != x->size())
    shape_error("reshape", shape_str(x->shape) + " -> " + shape_str(shape));
  return make_node(std::move(shape), x->value, {x}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Var attention(const Var& q, const Var& k, const Var& v, std::span<const std::uint8_t> key_mask,
              std::size_t batch, std::size_t len, std::size_t heads) {
  const std::size_t h = cols_of(*q);
  if (q->shape != k->shape || q->shape != v->shape) shape_error("attention", "q/k/v shapes differ");
  if (rows_of(*q) != batch * len) shape_error("attention", "rows != batch*len");
  if (key_mask.size() != batch * len) shape_error("attention", "mask size != batch*len");
  if (heads == 0 || h % heads != 0) shape_error("attention", "hidden not divisible by heads");
  const auto d = static_cast<Eigen::Index>(h / heads);
  const double sc = 1.0 / std::sqrt(static_cast<double>(d));

  // Only unmasked positions take part, as queries and as keys. Rows of
  // masked positions come out as zeros.
  std::vector<std::vector<std::size_t>> real(batch);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < len; ++j)
      if (key_mask[b * len + j]) real[b].push_back(b * len + j);

  auto gather = [h, d](const std::vector<double>& src, const std::vector<std::size_t>& rows, std::size_t off) {
    RowMat m(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t r = 0; r < rows.size(); ++r)
      std::copy_n(src.data() + rows[r] * h + off, d, m.data() + static_cast<Eigen::Index>(r) * d);
    return m;
  };

  std::vector<RowMat> probs(batch * heads);
  std::vector<double> out(q->size(), 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& rows = real[b];
    if (rows.empty()) continue;
    for (std::size_t hd = 0; hd < heads; ++hd) {
      const std::size_t off = hd * static_cast<std::size_t>(d);
      RowMat qh = gather(q->value, rows, off), kh = gather(k->value, rows, off), vh = gather(v->value, rows, off);
      RowMat s = (qh * kh.transpose()) * sc;
      for (Eigen::Index i = 0; i < s.rows(); ++i) {
        auto row = s.row(i);
        row = (row.array() - row.maxCoeff()).exp().matrix();
        row /= row.sum();
      }
      RowMat o = s * vh;
      for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy_n(o.data() + static_cast<Eigen::Index>(r) * d, d, out.data() + rows[r] * h + off);
      probs[b * heads + hd] = std::move(s);
    }
  }

  return make_node(q->shape, std::move(out), {q, k, v},
                   [heads, h, d, sc, real = std::move(real), probs = std::move(probs), gather](Node& self) {
    auto& qs = *self.parents[0];
    auto& ks = *self.parents[1];
    auto& vs = *self.parents[2];
    auto scatter_add = [&](std::vector<double>& dst, const RowMat& m, const std::vector<std::size_t>& rows,
                           std::size_t off) {
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const double* src = m.data() + static_cast<Eigen::Index>(r) * d;
        double* o = dst.data() + rows[r] * h + off;
        for (Eigen::Index c = 0; c < d; ++c) o[c] += src[c];
      }
    };
    for (std::size_t b = 0; b < real.size(); ++b) {
      const auto& rows = real[b];
      if (rows.empty()) continue;
      for (std::size_t hd = 0; hd < heads; ++hd) {
        const std::size_t off = hd * static_cast<std::size_t>(d);
        const RowMat& p = probs[b * heads + hd];
        RowMat dout = gather(self.grad, rows, off);
        RowMat qh = gather(qs.value, rows, off), kh = gather(ks.value, rows, off), vh = gather(vs.value, rows, off);
        if (vs.requires_grad) scatter_add(vs.grad_buffer(), p.transpose() * dout, rows, off);
        RowMat dp = dout * vh.transpose();
        Eigen::VectorXd dot = (dp.array() * p.array()).rowwise().sum();
        RowMat ds = (p.array() * (dp.colwise() - dot).array()).matrix() * sc;
        if (qs.requires_grad) scatter_add(qs.grad_buffer(), ds * kh, rows, off);
        if (ks.requires_grad) scatter_add(ks.grad_buffer(), ds.transpose() * qh, rows, off);
      }
    }
  });
}

Var gather_rows(const Var& x, std::span<const std::size_t> rows) {
  const std::size_t h = cols_of(*x), n = rows_of(*x);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  std::vector<double> y(idx.size() * h);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= n) throw std::out_of_range("gather_rows: row " + std::to_string(idx[i]) + " >= " + std::to_string(n));
    std::copy_n(x->value.data() + idx[i] * h, h, y.data() + i * h);
  }
  const std::size_t count = idx.size();
  return make_node({count, h}, std::move(y), {x}, [h, idx = std::move(idx)](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < h; ++c) g[idx[i] * h + c] += self.grad[i * h + c];
  });
}

Var masked_mean_rows(const Var& x, std::span<const std::uint8_t> mask, std::size_t batch,
                     std::size_t len) {
  const std::size_t h = cols_of(*x);
  if (rows_of(*x) != batch * len || mask.size() != batch * len)
    shape_error("masked_mean_rows", "rows/mask do not match batch*len");
  std::vector<double> inv_count(batch);
  std::vector<double> y(batch * h, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < len; ++j) {
      if (!mask[b * len + j]) continue;
      ++count;
      const double* row = x->value.data() + (b * len + j) * h;
      for (std::size_t c = 0; c < h; ++c) y[b * h + c] += row[c];
    }
    if (count == 0) throw std::invalid_argument("masked_mean_rows: sequence " + std::to_string(b) + " has no unmasked rows");
    inv_count[b] = 1.0 / static_cast<double>(count);
    for (std::size_t c = 0; c < h; ++c) y[b * h + c] *= inv_count[b];
  }
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  return make_node({batch, h}, std::move(y), {x},
                   [batch, len, h, m = std::move(m), inv_count = std::move(inv_count)](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < len; ++j) {
        if (!m[b * len + j]) continue;
        for (std::size_t c = 0; c < h; ++c)
          g[(b * len + j) * h + c] += inv_count[b] * self.grad[b * h + c];
      }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) shape_error("concat_cols", "no inputs");
  const std::size_t n = rows_of(*parts[0]);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p->shape.size() != 2 || rows_of(*p) != n)
      shape_error("concat_cols", "inputs must be 2-D with equal rows");
    widths.push_back(cols_of(*p));
    total += widths.back();
  }
  std::vector<double> y(n * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    for (std::size_t r = 0; r < n; ++r)
      std::copy_n(parts[k]->value.data() + r * widths[k], widths[k], y.data() + r * total + off);
    off += widths[k];
  }
  return make_node({n, total}, std::move(y), parts, [n, total, widths](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = *self.parents[k];
      if (p.requires_grad) {
        auto& g = p.grad_buffer();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < widths[k]; ++c)
            g[r * widths[k] + c] += self.grad[r * total + off + c];
      }
      off += widths[k];
    }
  });
}

Var row_mean(const Var& x) {
  const std::size_t h = cols_of(*x), n = rows_of(*x);
  std::vector<double> y(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < h; ++c) s += x->value[r * h + c];
    y[r] = s / static_cast<double>(h);
  }
  Shape shape(x->shape.begin(), x->shape.end() - 1);
  if (shape.empty()) shape = {1};
  return make_node(std::move(shape), std::move(y), {x}, [n, h](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    const double inv = 1.0 / static_cast<double>(h);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < h; ++c) g[r * h + c] += inv * self.grad[r];
  });
}

Var detach(const Var& x) { return constant(x->shape, x->value); }

Var bce(const Var& prob, std::span<const int> labels, double eps) {
  if (prob->size() != labels.size()) shape_error("bce", "labels do not match predictions");
  if (labels.empty()) shape_error("bce", "empty batch");
  std::vector<int> y(labels.begin(), labels.end());
  for (int v : y)
    if (v != 0 && v != 1) throw std::invalid_argument("bce: label " + std::to_string(v) + " is not in {0,1}");
  const double inv_b = 1.0 / static_cast<double>(y.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double p = std::clamp(prob->value[i], eps, 1.0 - eps);
    loss += y[i] ? -std::log(p) : -std::log(1.0 - p);
  }
  return make_node({1}, {loss * inv_b}, {prob}, [y = std::move(y), eps, inv_b](Node& self) {
    auto& ps = *self.parents[0];
    auto& g = ps.grad_buffer();
    for (std::size_t i = 0; i < y.size(); ++i) {
      double raw = ps.value[i];
      if (raw < eps || raw > 1.0 - eps) continue;  // clamp is flat
      double d = y[i] ? -1.0 / raw : 1.0 / (1.0 - raw);
      g[i] += self.grad[0] * inv_b * d;
    }
  });
}

Var weighted_sum(const Var& x, std::span<const double> weights) {
  if (weights.size() != x->size()) shape_error("weighted_sum", "weight count mismatch");
  std::vector<double> w(weights.begin(), weights.end());
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x->value[i];
  return make_node({1}, {s}, {x}, [w = std::move(w)](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < w.size(); ++i) g[i] += w[i] * self.grad[0];
  });
}

}  // namespace csls::ag
