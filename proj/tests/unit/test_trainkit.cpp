#include "doctest.h"

#include <limits>
#include <random>

#include "csls/synthetic.hpp"
#include "csls/trainkit.hpp"
#include "test_support.hpp"

using namespace csls;

namespace {

double closed_form_chi2(const Contingency& t) {
  double a = static_cast<double>(t[0][0]), b = static_cast<double>(t[0][1]);
  double c = static_cast<double>(t[1][0]), d = static_cast<double>(t[1][1]);
  double n = a + b + c + d;
  return n * (a * d - b * c) * (a * d - b * c) / ((a + b) * (c + d) * (a + c) * (b + d));
}

EvalReport report(const std::vector<int>& labels, const std::vector<int>& preds) {
  EvalReport r;
  for (std::size_t i = 0; i < labels.size(); ++i)
    r.records.push_back({static_cast<std::int64_t>(i), labels[i], preds[i] ? 0.9 : 0.1, preds[i]});
  return r;
}

TrainConfig quick_train() {
  auto t = TrainConfig::desk();
  t.epochs = 2;
  t.batch_size = 4;
  return t;
}

ModelConfig small_model() {
  auto m = ModelConfig::desk();
  m.line_encoder.layers = 1;
  m.global_encoder.layers = 1;
  m.structure.layers = 1;
  m.align.k_cap = 10;
  return m;
}

}  // namespace

TEST_CASE("metrics from confusion counts") {
  auto m = compute_metrics(2, 1, 1, 6);
  CHECK(m.precision == 2.0 / 3.0);
  CHECK(m.recall == 2.0 / 3.0);
  CHECK(m.f1 == 2.0 / 3.0);
  CHECK(m.accuracy == 0.8);

  auto fn2 = compute_metrics(2, 1, 2, 6);
  CHECK(fn2.precision == 2.0 / 3.0);
  CHECK(fn2.recall == 0.5);
  // harmonic mean of the two ratios, not 2TP/(2TP+FP+FN): can differ in the last bit
  CHECK(std::abs(fn2.f1 - 4.0 / 7.0) <= 4 * std::numeric_limits<double>::epsilon());
  CHECK(fn2.accuracy == 8.0 / 11.0);

  auto none = compute_metrics(0, 0, 5, 5);
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);
  CHECK(none.accuracy == 0.5);
  CHECK(compute_metrics(0, 0, 0, 0).accuracy == 0.0);
  CHECK(compute_metrics(3, 0, 0, 0).f1 == 1.0);
}

TEST_CASE("pearson chi-square") {
  CHECK(pearson_chi2({{{20, 5}, {10, 15}}}) == doctest::Approx(25.0 / 3.0).epsilon(1e-12));
  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) {
    Contingency t;
    for (auto& row : t)
      for (auto& v : row) v = 1 + rng() % 200;
    CHECK(testing::relative_error(pearson_chi2(t), closed_form_chi2(t)) <= 1e-9);
  }
  CHECK(pearson_chi2({{{5, 0}, {3, 0}}}) == 0.0);
  CHECK(pearson_chi2({{{0, 0}, {0, 0}}}) == 0.0);
  CHECK(mcnemar_chi2({{{10, 6}, {2, 10}}}) == 2.0);
  CHECK(chi2_survival_df1(3.841458820694124) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(chi2_survival_df1(0.0) == 1.0);
}

TEST_CASE("comparison report") {
  // A finds positives 1,2,3; B finds 2,3,4
  std::vector<int> labels = {0, 1, 1, 1, 1, 0};
  auto a = report(labels, {0, 1, 1, 1, 0, 0});
  auto b = report(labels, {0, 0, 1, 1, 1, 0});
  auto r = compare_models(a, b);
  CHECK(r.true_positives.shared == 2);
  CHECK(r.true_positives.only_a == 1);
  CHECK(r.true_positives.only_b == 1);
  CHECK(r.false_negatives.only_a == 1);
  CHECK(r.false_negatives.only_b == 1);
  CHECK(r.false_negatives.shared == 0);
  CHECK(r.contingency[0][0] == 4);
  CHECK(r.contingency[0][1] == 1);
  CHECK(r.contingency[1][0] == 1);

  auto self = compare_models(a, a);
  CHECK(self.contingency[0][1] == 0);
  CHECK(self.contingency[1][0] == 0);
  CHECK(self.true_positives.only_a == 0);
  CHECK(self.true_positives.only_b == 0);
  CHECK(compare_models(a, a, ChiSquareTest::kMcNemar).p_value == 1.0);

  auto shorter = report({0, 1}, {0, 1});
  CHECK_THROWS(compare_models(a, shorter));
  auto relabel = b;
  relabel.records[0].label = 1;
  CHECK_THROWS(compare_models(a, relabel));
  CHECK(nlohmann::json(r)["contingency"].size() == 2);
}

TEST_CASE("eval report json round trip") {
  auto r = report({1, 0, 1}, {1, 1, 0});
  r.metrics = compute_metrics(1, 1, 1, 0);
  nlohmann::json j = r;
  auto back = j.get<EvalReport>();
  CHECK(back.records.size() == 3);
  CHECK(back.metrics.f1 == r.metrics.f1);
  CHECK(back.records[1].prediction == 1);
}

TEST_CASE("train config presets and json") {
  auto p = TrainConfig::paper_scale();
  CHECK(p.batch_size == 12);
  CHECK(p.learning_rate == 2e-5);
  CHECK(p.seed == 123456);
  CHECK(p.epochs == 10);
  CHECK_THROWS(TrainConfig::preset_named("x"));
  auto d = TrainConfig::desk();
  d.max_steps = 7;
  nlohmann::json j = d;
  CHECK(nlohmann::json(j.get<TrainConfig>()) == j);
  auto bad = d;
  bad.learning_rate = -1;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  ByteTokenizer tok;
  DatasetSplit split;
  split.train = synthetic_corpus(8, 1);
  CslsModel model(small_model());
  auto before = model.snapshot();
  auto cfg = quick_train();
  cfg.learning_rate = 0.0;
  auto res = train(model, split, cfg, tok);
  CHECK(res.steps == 4);
  CHECK(model.snapshot() == before);
}

TEST_CASE("training is deterministic and caps steps") {
  ByteTokenizer tok;
  DatasetSplit split;
  split.train = synthetic_corpus(8, 2);
  split.valid = synthetic_corpus(4, 3, 100);
  auto run = [&] {
    CslsModel model(small_model());
    auto res = train(model, split, quick_train(), tok);
    return std::make_pair(model.snapshot(), history_csv(res));
  };
  auto a = run();
  auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.second.starts_with("epoch,steps,loss,train_acc,acc,prec,rec,f1\n"));

  CslsModel model(small_model());
  auto cfg = quick_train();
  cfg.max_steps = 3;
  CHECK(train(model, split, cfg, tok).steps == 3);
  CHECK_THROWS(train(model, DatasetSplit{}, cfg, tok));
}

TEST_CASE("evaluate covers every snippet") {
  ByteTokenizer tok;
  CslsModel model(small_model());
  auto data = synthetic_corpus(5, 4);
  auto r = evaluate(model, data, tok, 0.5, 2);
  REQUIRE(r.records.size() == 5);
  const auto& m = r.metrics;
  CHECK(m.tp + m.fp + m.fn + m.tn == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(r.records[i].id == data[i].id);
    CHECK(r.records[i].prediction == (r.records[i].probability >= 0.5 ? 1 : 0));
  }
}

TEST_CASE("sweep rows are reproducible") {
  ByteTokenizer tok;
  DatasetSplit split;
  split.train = synthetic_corpus(6, 5);
  split.test = synthetic_corpus(4, 6, 50);
  auto cfg = quick_train();
  cfg.epochs = 1;
  auto rows = sweep({{10, 8}, {10, 8}, {12, 4}}, small_model(), cfg, split, tok);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].metrics.has_value());
  CHECK(rows[0].metrics->f1 == rows[1].metrics->f1);
  CHECK(rows[0].metrics->accuracy == rows[1].metrics->accuracy);
  auto csv = sweep_csv(rows);
  CHECK(csv.starts_with("p,k_cap,acc,recall,prec,f1,status\n10,8,"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  auto bad = sweep({{1, 8}}, small_model(), cfg, split, tok);
  CHECK_FALSE(bad[0].metrics.has_value());
  CHECK(sweep_csv(bad).find("error:") != std::string::npos);
  CHECK(default_sweep_grid().size() == 6);
}
