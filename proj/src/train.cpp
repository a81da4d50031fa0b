#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "csls/trainkit.hpp"

namespace csls {

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("train config: learning_rate must be finite and >= 0");
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("train config: threshold must be in (0,1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("train config: Adam betas must be in [0,1)");
}

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.preset = "desk";
  c.learning_rate = 1e-3;
  c.epochs = 10;
  return c;
}

TrainConfig TrainConfig::paper_scale() { return {}; }

TrainConfig TrainConfig::preset_named(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper-scale") return paper_scale();
  throw std::invalid_argument("unknown preset '" + name + "' (expected desk|paper-scale)");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"preset", c.preset},       {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
       {"seed", c.seed},           {"epochs", c.epochs},         {"clip_norm", c.clip_norm},
       {"threshold", c.threshold}, {"max_steps", c.max_steps},   {"beta1", c.beta1},
       {"beta2", c.beta2},         {"adam_eps", c.adam_eps}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (j.contains("preset")) c = TrainConfig::preset_named(j.at("preset").get<std::string>());
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.seed = j.value("seed", c.seed);
  c.epochs = j.value("epochs", c.epochs);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.threshold = j.value("threshold", c.threshold);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
}

namespace {

class Adam {
 public:
  Adam(const ParamList& params, const TrainConfig& cfg) : params_(params), cfg_(cfg) {
    for (const auto& p : params_) {
      m_.emplace_back(p.var->size(), 0.0);
      v_.emplace_back(p.var->size(), 0.0);
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& node = *params_[i].var;
      if (node.grad.empty()) continue;
      for (std::size_t k = 0; k < node.size(); ++k) {
        const double g = node.grad[k];
        m_[i][k] = cfg_.beta1 * m_[i][k] + (1.0 - cfg_.beta1) * g;
        v_[i][k] = cfg_.beta2 * v_[i][k] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m_[i][k] / bc1, vhat = v_[i][k] / bc2;
        node.value[k] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
      }
    }
  }

 private:
  const ParamList& params_;
  const TrainConfig& cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

void clip_grad_norm(const ParamList& params, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p.var->grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double f = max_norm / (norm + 1e-12);
  for (const auto& p : params)
    for (double& g : p.var->grad) g *= f;
}

}  // namespace

TrainResult train(CslsModel& model, const DatasetSplit& split, const TrainConfig& cfg,
                  const Tokenizer& tok) {
  cfg.validate();
  if (split.train.empty()) throw std::invalid_argument("train: empty training split");

  std::mt19937_64 shuffle_rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  ForwardContext ctx{&dropout_rng};
  const ParamList params = model.parameters();
  Adam optimizer(params, cfg);

  TrainResult result;
  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<CodeSnippet> batch_snippets;
  double best_f1 = -1.0;
  std::vector<std::vector<double>> best_params;
  std::size_t step = 0;
  bool capped = false;

  for (std::size_t epoch = 1; epoch <= cfg.epochs && !capped; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng() % i]);

    double loss_sum = 0.0;
    std::size_t seen = 0, correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      if (cfg.max_steps && step >= cfg.max_steps) {
        capped = true;
        break;
      }
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      batch_snippets.clear();
      for (std::size_t i = 0; i < n; ++i) batch_snippets.push_back(split.train[order[start + i]]);
      auto batch = prepare_batch(batch_snippets, tok, model.config());
      auto out = model.forward(batch, ctx);
      auto loss = bce_loss(batch.labels, out.probabilities);
      ++step;
      if (!std::isfinite(loss->value[0]))
        throw std::runtime_error("train: loss diverged (non-finite) at step " + std::to_string(step));

      model.zero_grad();
      ag::backward(loss);
      clip_grad_norm(params, cfg.clip_norm);
      optimizer.step();

      loss_sum += loss->value[0] * static_cast<double>(n);
      seen += n;
      for (std::size_t i = 0; i < n; ++i)
        correct += ((out.probabilities->value[i] >= cfg.threshold ? 1 : 0) == batch.labels[i]) ? 1 : 0;
    }
    if (seen == 0) break;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.steps = step;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    if (!split.valid.empty()) {
      rec.valid = evaluate(model, split.valid, tok, cfg.threshold, cfg.batch_size).metrics;
      if (rec.valid->f1 > best_f1) {
        best_f1 = rec.valid->f1;
        best_params = model.snapshot();
        result.best_epoch = epoch;
      }
    } else {
      result.best_epoch = epoch;
    }
    result.history.push_back(rec);
  }
  if (!best_params.empty()) model.restore(best_params);
  result.steps = step;
  return result;
}

std::string history_csv(const TrainResult& result) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,steps,loss,train_acc,acc,prec,rec,f1\n";
  for (const auto& r : result.history) {
    os << r.epoch << ',' << r.steps << ',' << r.train_loss << ',' << r.train_accuracy;
    if (r.valid)
      os << ',' << r.valid->accuracy << ',' << r.valid->precision << ',' << r.valid->recall << ',' << r.valid->f1;
    else
      os << ",,,,";
    os << '\n';
  }
  return os.str();
}

}  // namespace csls
