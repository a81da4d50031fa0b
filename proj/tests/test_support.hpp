#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "csls/autograd.hpp"
#include "csls/corpus.hpp"
#include "csls/encoders.hpp"

namespace csls::testing {

#ifndef CSLS_SOURCE_DIR
#define CSLS_SOURCE_DIR "."
#endif

inline std::string source_path(const std::string& rel) { return std::string(CSLS_SOURCE_DIR) + "/" + rel; }

// Random byte strings biased toward code-like characters and whitespace.
inline std::string random_code_text(std::mt19937_64& rng, std::size_t max_len) {
  static const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_(){}[];,.+-*/=<>!&|^%#\"' \t\n\r";
  std::size_t len = rng() % (max_len + 1);
  std::string s;
  for (std::size_t i = 0; i < len; ++i) {
    if (rng() % 16 == 0)
      s.push_back(static_cast<char>(rng() % 256));
    else
      s.push_back(alphabet[rng() % alphabet.size()]);
  }
  return s;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

inline double relative_error(double a, double b) {
  double scale = std::max(std::abs(a), std::abs(b));
  if (scale < 1e-9) return 0.0;
  return std::abs(a - b) / scale;
}

// Central differences on the chosen coordinates of the chosen parameters.
inline GradCheckResult grad_check(const std::function<ag::Var()>& loss_fn, const std::vector<ag::Var>& params,
                                  std::size_t per_param, std::uint64_t seed, double step = 1e-5) {
  for (auto& p : params) p->grad.assign(p->size(), 0.0);
  auto loss = loss_fn();
  ag::backward(loss);
  std::mt19937_64 rng(seed);
  GradCheckResult res;
  for (auto& p : params) {
    for (std::size_t n = 0; n < per_param; ++n) {
      std::size_t i = rng() % p->size();
      double orig = p->value[i];
      p->value[i] = orig + step;
      double up;
      {
        ag::NoGradGuard g;
        up = loss_fn()->value[0];
      }
      p->value[i] = orig - step;
      double down;
      {
        ag::NoGradGuard g;
        down = loss_fn()->value[0];
      }
      p->value[i] = orig;
      double numeric = (up - down) / (2 * step);
      res.max_rel_error = std::max(res.max_rel_error, relative_error(p->grad[i], numeric));
      ++res.checked;
    }
  }
  return res;
}

inline const NamedParam& find_param(const ParamList& params, const std::string& name) {
  for (const auto& p : params)
    if (p.name == name) return p;
  throw std::out_of_range("no parameter named " + name);
}

}  // namespace csls::testing
