#include "doctest.h"

#include <random>

#include "csls/model.hpp"
#include "csls/structure.hpp"
#include "csls/synthetic.hpp"
#include "test_support.hpp"

using namespace csls;

namespace {

ag::Var random_le(std::size_t b, std::size_t k, std::size_t h, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  std::vector<double> v(b * k * h);
  for (auto& x : v) x = d(rng);
  return ag::constant({b, k, h}, std::move(v));
}

// Loss that only reaches the line encoder through S_repr.
double max_line_encoder_grad(bool detach_flag) {
  auto cfg = ModelConfig::desk();
  cfg.align.k_cap = 5;
  cfg.detach = detach_flag;
  cfg.scales.sensitive = 0.0;
  cfg.scales.global = 0.0;
  CslsModel model(cfg);
  ByteTokenizer tok;
  auto data = synthetic_corpus(2, 7);
  auto batch = prepare_batch(data, tok, cfg);
  model.zero_grad();
  ag::backward(bce_loss(batch.labels, model.forward(batch).probabilities));
  double m = 0.0;
  for (const auto& p : model.parameters())
    if (p.name.starts_with("line_encoder."))
      for (double g : p.var->grad) m = std::max(m, std::abs(g));
  return m;
}

}  // namespace

TEST_CASE("detach keeps values") {
  std::mt19937_64 rng(1);
  auto le = random_le(2, 3, 4, rng);
  CHECK(csls::detach(le)->value == le->value);
  CHECK(csls::detach(le)->shape == le->shape);
}

TEST_CASE("structure branch does not reach the line encoder when detached") {
  CHECK(max_line_encoder_grad(true) == 0.0);
  CHECK(max_line_encoder_grad(false) > 0.0);
}

TEST_CASE("structure_repr shape and error paths") {
  ParamInit init(2);
  StructureModel sm(StructureConfig::desk(), init);
  std::mt19937_64 rng(2);
  auto le = random_le(2, 5, 32, rng);
  std::vector<std::uint8_t> mask = {1, 1, 1, 0, 0, 1, 1, 1, 1, 1};
  ag::NoGradGuard ng;
  CHECK(sm.structure_repr(le, mask)->shape == ag::Shape{2, 32});
  std::vector<std::uint8_t> empty = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  CHECK_THROWS(sm.structure_repr(le, empty));
  CHECK_THROWS(sm.structure_repr(random_le(1, 129, 32, rng), std::vector<std::uint8_t>(129, 1)));
}

TEST_CASE("padded lines do not change the structure vector") {
  ParamInit init(3);
  StructureModel sm(StructureConfig::desk(), init);
  std::mt19937_64 rng(3);
  auto le = random_le(1, 4, 32, rng);
  ag::NoGradGuard ng;
  auto base = sm.structure_repr(le, std::vector<std::uint8_t>(4, 1));
  auto padded_v = le->value;
  for (int i = 0; i < 3 * 32; ++i) padded_v.push_back(std::normal_distribution<double>(0, 5)(rng));
  auto padded = sm.structure_repr(ag::constant({1, 7, 32}, padded_v), std::vector<std::uint8_t>{1, 1, 1, 1, 0, 0, 0});
  for (std::size_t c = 0; c < 32; ++c) CHECK(std::abs(base->value[c] - padded->value[c]) <= 1e-6);
}

TEST_CASE("single line with a zeroed stack returns the line plus its position code") {
  ParamInit init(4);
  StructureModel sm(StructureConfig::desk(), init);
  ParamList params;
  sm.collect("", params);
  for (auto& p : params)
    if (p.name.find("ln") == std::string::npos) std::fill(p.var->value.begin(), p.var->value.end(), 0.0);
  std::mt19937_64 rng(4);
  auto le = random_le(1, 1, 32, rng);
  ag::NoGradGuard ng;
  auto s = sm.structure_repr(le, std::vector<std::uint8_t>{1});
  auto pe = sinusoidal_table(1, 32);
  for (std::size_t c = 0; c < 32; ++c) CHECK(s->value[c] == doctest::Approx(le->value[c] + pe[c]).epsilon(1e-12));
}

TEST_CASE("line order matters") {
  ParamInit init(5);
  StructureModel sm(StructureConfig::desk(), init);
  std::mt19937_64 rng(5);
  int changed = 0;
  ag::NoGradGuard ng;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng() % 6;
    auto le = random_le(1, k, 32, rng);
    std::size_t a = rng() % k, b = (a + 1 + rng() % (k - 1)) % k;
    auto swapped = le->value;
    std::swap_ranges(swapped.begin() + static_cast<std::ptrdiff_t>(a * 32),
                     swapped.begin() + static_cast<std::ptrdiff_t>(a * 32 + 32),
                     swapped.begin() + static_cast<std::ptrdiff_t>(b * 32));
    std::vector<std::uint8_t> mask(k, 1);
    auto x = sm.structure_repr(le, mask);
    auto y = sm.structure_repr(ag::constant({1, k, 32}, swapped), mask);
    double diff = 0;
    for (std::size_t c = 0; c < 32; ++c) diff = std::max(diff, std::abs(x->value[c] - y->value[c]));
    if (diff > 1e-9) ++changed;
  }
  CHECK(changed >= 95);
}

TEST_CASE("structure layer passes finite differences") {
  ParamInit init(6);
  StructureConfig cfg;
  cfg.layers = 1;
  StructureModel sm(cfg, init);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> d;
  std::vector<double> lev(2 * 3 * 32);
  for (auto& x : lev) x = d(rng);
  auto le = ag::parameter({2, 3, 32}, lev);
  std::vector<std::uint8_t> mask = {1, 1, 0, 1, 1, 1};
  std::vector<double> probe(64);
  for (auto& w : probe) w = d(rng);
  ParamList params;
  sm.collect("", params);
  std::vector<ag::Var> vars = {le};
  for (auto& p : params) vars.push_back(p.var);
  auto r = testing::grad_check([&] { return ag::weighted_sum(sm.structure_repr(le, mask), probe); }, vars, 3, 7);
  CHECK(r.max_rel_error <= 1e-3);
}
