#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "csls/corpus.hpp"
#include "csls/model.hpp"
#include "csls/tokenize.hpp"

namespace csls {

struct TrainConfig {
  std::size_t batch_size = 12;
  double learning_rate = 2e-5;
  std::uint64_t seed = 123456;
  std::size_t epochs = 10;
  double clip_norm = 1.0;
  double threshold = 0.5;
  std::string preset = "paper-scale";
  std::size_t max_steps = 0;  // 0 = no cap
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  static TrainConfig desk();
  static TrainConfig paper_scale();
  static TrainConfig preset_named(const std::string& name);
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct Metrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
};

// Ratios from confusion counts; any ratio with a zero denominator is 0.
Metrics compute_metrics(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);

struct EvalRecord {
  std::int64_t id = 0;
  int label = 0;
  double probability = 0.0;
  int prediction = 0;
};

struct EvalReport {
  Metrics metrics;
  double threshold = 0.5;
  std::vector<EvalRecord> records;
};

void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);
void to_json(nlohmann::json& j, const Metrics& m);

EvalReport evaluate(const CslsModel& model, const std::vector<CodeSnippet>& snippets,
                    const Tokenizer& tok, double threshold, std::size_t batch_size = 12);

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t steps = 0;  // cumulative
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<Metrics> valid;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
};

// Adam on the joint loss with global-norm clipping. The model ends up
// holding the parameters of the epoch with the best validation F1 (or the
// last epoch when there is no validation set).
TrainResult train(CslsModel& model, const DatasetSplit& split, const TrainConfig& cfg,
                  const Tokenizer& tok);

std::string history_csv(const TrainResult& result);

// Two-sided paired comparison of classifiers over the same snippets.
enum class ChiSquareTest { kPearson, kMcNemar };

using Contingency = std::array<std::array<std::size_t, 2>, 2>;

double pearson_chi2(const Contingency& table);
double mcnemar_chi2(const Contingency& table);
double chi2_survival_df1(double statistic);

struct VennCounts {
  std::size_t only_a = 0;
  std::size_t only_b = 0;
  std::size_t shared = 0;
};

struct ComparisonReport {
  ChiSquareTest test = ChiSquareTest::kPearson;
  Contingency contingency{};  // rows: A correct / wrong; cols: B correct / wrong
  double chi2_statistic = 0.0;
  double p_value = 1.0;
  VennCounts true_positives;
  VennCounts false_negatives;
};

ComparisonReport compare_models(const EvalReport& a, const EvalReport& b,
                                ChiSquareTest test = ChiSquareTest::kPearson);
void to_json(nlohmann::json& j, const ComparisonReport& r);

struct SweepRow {
  std::size_t p = 0;
  std::size_t k_cap = 0;
  std::optional<Metrics> metrics;
  std::string error;
};

std::vector<std::pair<std::size_t, std::size_t>> default_sweep_grid();

// One model per (p, k_cap) cell, all built from the same seeds and data and
// scored on split.test. Cell failures are recorded in the row.
std::vector<SweepRow> sweep(const std::vector<std::pair<std::size_t, std::size_t>>& grid,
                            const ModelConfig& base_model, const TrainConfig& train_cfg,
                            const DatasetSplit& split, const Tokenizer& tok);

std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace csls
