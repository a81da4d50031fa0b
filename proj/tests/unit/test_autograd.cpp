#include "doctest.h"

#include <random>

#include "csls/autograd.hpp"
#include "test_support.hpp"

using namespace csls;
using csls::testing::grad_check;

namespace {

ag::Var random_param(ag::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(ag::numel(shape));
  for (auto& x : v) x = d(rng);
  return ag::parameter(std::move(shape), std::move(v));
}

std::vector<double> random_weights(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> w(n);
  for (auto& x : w) x = d(rng);
  return w;
}

}  // namespace

TEST_CASE("elementwise and dense ops pass finite-difference checks") {
  std::mt19937_64 rng(1);
  auto x = random_param({4, 6}, rng);
  auto w = random_param({6, 5}, rng);
  auto b = random_param({5}, rng);
  auto g = random_param({5}, rng);
  auto beta = random_param({5}, rng);
  auto probe = random_weights(4 * 5, rng);
  auto fn = [&] {
    auto y = ag::gelu(ag::layer_norm(ag::linear(x, w, b), g, beta));
    return ag::weighted_sum(ag::add(y, ag::scale(y, 0.5)), probe);
  };
  auto r = grad_check(fn, {x, w, b, g, beta}, 8, 11);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("attention gradient with a partial key mask") {
  std::mt19937_64 rng(2);
  const std::size_t batch = 3, len = 5, h = 8;
  auto q = random_param({batch * len, h}, rng);
  auto k = random_param({batch * len, h}, rng);
  auto v = random_param({batch * len, h}, rng);
  std::vector<std::uint8_t> mask = {1, 1, 1, 0, 0, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  auto probe = random_weights(batch * len * h, rng);
  auto fn = [&] { return ag::weighted_sum(ag::attention(q, k, v, mask, batch, len, 2), probe); };
  auto r = grad_check(fn, {q, k, v}, 20, 12);
  CHECK(r.max_rel_error < 1e-6);

  ag::NoGradGuard ng;
  auto out = ag::attention(q, k, v, mask, batch, len, 2);
  for (std::size_t row : {3u, 4u, 10u, 11u, 14u})
    for (std::size_t c = 0; c < h; ++c) CHECK(out->value[row * h + c] == 0.0);
}

TEST_CASE("gather, masked mean, concat, sigmoid and bce gradients") {
  std::mt19937_64 rng(3);
  auto x = random_param({6, 4}, rng);
  auto y = random_param({2, 4}, rng);
  std::vector<std::size_t> rows = {5, 0};
  std::vector<std::uint8_t> mask = {1, 0, 1, 1, 1, 0};
  std::vector<int> labels = {1, 0};
  auto wcol = random_param({12, 1}, rng, 0.3);
  auto fn = [&] {
    auto pooled = ag::masked_mean_rows(x, mask, 2, 3);
    auto picked = ag::gather_rows(x, rows);
    auto cat = ag::concat_cols({pooled, picked, y});
    auto p = ag::sigmoid(ag::reshape(ag::matmul(cat, wcol), {2}));
    return ag::bce(p, labels);
  };
  auto r = grad_check(fn, {x, y, wcol}, 10, 13);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("embedding gradient accumulates repeated ids") {
  std::mt19937_64 rng(4);
  auto table = random_param({7, 3}, rng);
  std::vector<std::int32_t> ids = {2, 2, 5, 0};
  auto probe = random_weights(12, rng);
  auto fn = [&] { return ag::weighted_sum(ag::embedding(table, ids), probe); };
  auto r = grad_check(fn, {table}, 15, 14);
  CHECK(r.max_rel_error < 1e-6);
  std::vector<std::int32_t> bad = {9};
  CHECK_THROWS_AS(ag::embedding(table, bad), std::out_of_range);
}

TEST_CASE("detach passes values and blocks gradients") {
  std::mt19937_64 rng(5);
  auto x = random_param({2, 3}, rng);
  auto d = ag::detach(x);
  CHECK(d->value == x->value);
  CHECK_FALSE(d->requires_grad);
  std::vector<double> w(6, 1.0);
  x->grad.assign(6, 0.0);
  ag::backward(ag::add(ag::weighted_sum(d, w), ag::weighted_sum(ag::scale(x, 0.0), w)));
  for (double g : x->grad) CHECK(g == 0.0);
}

TEST_CASE("no-grad mode records nothing") {
  std::mt19937_64 rng(6);
  auto x = random_param({2, 2}, rng);
  ag::NoGradGuard g;
  auto y = ag::gelu(x);
  CHECK_FALSE(y->requires_grad);
  CHECK(y->parents.empty());
}

TEST_CASE("shape errors are reported") {
  auto a = ag::zeros({2, 3});
  auto b = ag::zeros({3, 2});
  CHECK_THROWS_AS(ag::add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(ag::matmul(a, a), std::invalid_argument);
  CHECK_THROWS_AS(ag::reshape(a, {4}), std::invalid_argument);
  std::vector<std::uint8_t> none = {0, 0};
  CHECK_THROWS_AS(ag::masked_mean_rows(ag::zeros({2, 1}), none, 1, 2), std::invalid_argument);
}
