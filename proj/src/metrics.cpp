#include "csls/trainkit.hpp"

#include <algorithm>
#include <stdexcept>

namespace csls {

Metrics compute_metrics(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  Metrics m{tp, fp, fn, tn};
  const auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = ratio(tp + tn, tp + fp + fn + tn);
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

void to_json(nlohmann::json& j, const Metrics& m) {
  j = {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
       {"tp", m.tp},             {"fp", m.fp},               {"fn", m.fn},         {"tn", m.tn}};
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& rec : r.records)
    records.push_back({{"id", rec.id}, {"label", rec.label}, {"probability", rec.probability}, {"prediction", rec.prediction}});
  j = {{"metrics", r.metrics}, {"threshold", r.threshold}, {"records", std::move(records)}};
}

void from_json(const nlohmann::json& j, EvalReport& r) {
  r.threshold = j.value("threshold", 0.5);
  r.records.clear();
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& rec : j.at("records")) {
    EvalRecord e;
    e.id = rec.at("id").get<std::int64_t>();
    e.label = rec.at("label").get<int>();
    e.probability = rec.at("probability").get<double>();
    e.prediction = rec.at("prediction").get<int>();
    if ((e.label != 0 && e.label != 1) || (e.prediction != 0 && e.prediction != 1))
      throw ValidationError("eval report record " + std::to_string(e.id) + " has a non-binary label or prediction");
    (e.label ? (e.prediction ? tp : fn) : (e.prediction ? fp : tn))++;
    r.records.push_back(e);
  }
  r.metrics = compute_metrics(tp, fp, fn, tn);
}

EvalReport evaluate(const CslsModel& model, const std::vector<CodeSnippet>& snippets,
                    const Tokenizer& tok, double threshold, std::size_t batch_size) {
  if (snippets.empty()) throw std::invalid_argument("evaluate: no snippets");
  if (batch_size == 0) throw std::invalid_argument("evaluate: batch_size must be >= 1");
  ag::NoGradGuard no_grad;
  EvalReport report;
  report.threshold = threshold;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t start = 0; start < snippets.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, snippets.size() - start);
    auto batch = prepare_batch(std::span(snippets).subspan(start, n), tok, model.config());
    auto out = model.forward(batch);
    for (std::size_t i = 0; i < n; ++i) {
      EvalRecord rec;
      rec.id = batch.ids[i];
      rec.label = batch.labels[i];
      rec.probability = out.probabilities->value[i];
      rec.prediction = rec.probability >= threshold ? 1 : 0;
      (rec.label ? (rec.prediction ? tp : fn) : (rec.prediction ? fp : tn))++;
      report.records.push_back(rec);
    }
  }
  report.metrics = compute_metrics(tp, fp, fn, tn);
  return report;
}

}  // namespace csls
