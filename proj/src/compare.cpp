#include "csls/trainkit.hpp"

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace csls {

double pearson_chi2(const Contingency& t) {
  double row[2] = {0, 0}, col[2] = {0, 0}, total = 0;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      double v = static_cast<double>(t[r][c]);
      row[r] += v;
      col[c] += v;
      total += v;
    }
  if (total == 0.0) return 0.0;
  double stat = 0.0;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      double expected = row[r] * col[c] / total;
      // A zero margin leaves the cell without information.
      if (expected <= 0.0) continue;
      double d = static_cast<double>(t[r][c]) - expected;
      stat += d * d / expected;
    }
  return stat;
}

double mcnemar_chi2(const Contingency& t) {
  double b = static_cast<double>(t[0][1]), c = static_cast<double>(t[1][0]);
  if (b + c == 0.0) return 0.0;
  return (b - c) * (b - c) / (b + c);
}

double chi2_survival_df1(double statistic) {
  if (statistic <= 0.0) return 1.0;
  return std::erfc(std::sqrt(statistic / 2.0));
}

ComparisonReport compare_models(const EvalReport& a, const EvalReport& b, ChiSquareTest test) {
  std::map<std::int64_t, const EvalRecord*> by_id;
  for (const auto& r : a.records)
    if (!by_id.emplace(r.id, &r).second)
      throw std::invalid_argument("compare_models: duplicate id " + std::to_string(r.id) + " in report A");
  if (a.records.size() != b.records.size())
    throw std::invalid_argument("compare_models: reports cover different snippet sets");

  ComparisonReport out;
  out.test = test;
  std::set<std::int64_t> seen;
  for (const auto& rb : b.records) {
    auto it = by_id.find(rb.id);
    if (it == by_id.end() || !seen.insert(rb.id).second)
      throw std::invalid_argument("compare_models: id " + std::to_string(rb.id) + " not matched between reports");
    const auto& ra = *it->second;
    if (ra.label != rb.label)
      throw std::invalid_argument("compare_models: label disagreement for id " + std::to_string(rb.id));
    bool a_ok = ra.prediction == ra.label, b_ok = rb.prediction == rb.label;
    out.contingency[a_ok ? 0 : 1][b_ok ? 0 : 1]++;

    if (ra.label == 1) {
      bool a_tp = ra.prediction == 1, b_tp = rb.prediction == 1;
      VennCounts& v = out.true_positives;
      VennCounts& w = out.false_negatives;
      if (a_tp && b_tp) v.shared++;
      else if (a_tp) v.only_a++;
      else if (b_tp) v.only_b++;
      if (!a_tp && !b_tp) w.shared++;
      else if (!a_tp) w.only_a++;
      else if (!b_tp) w.only_b++;
    }
  }
  out.chi2_statistic = test == ChiSquareTest::kMcNemar ? mcnemar_chi2(out.contingency) : pearson_chi2(out.contingency);
  out.p_value = chi2_survival_df1(out.chi2_statistic);
  return out;
}

void to_json(nlohmann::json& j, const ComparisonReport& r) {
  auto venn = [](const VennCounts& v) { return nlohmann::json{{"only_a", v.only_a}, {"only_b", v.only_b}, {"shared", v.shared}}; };
  j = {{"test", r.test == ChiSquareTest::kPearson ? "pearson" : "mcnemar"},
       {"contingency", r.contingency},
       {"chi2_statistic", r.chi2_statistic},
       {"p_value", r.p_value},
       {"true_positives", venn(r.true_positives)},
       {"false_negatives", venn(r.false_negatives)}};
}

}  // namespace csls
