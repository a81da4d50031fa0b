#include <sstream>

#include "csls/trainkit.hpp"

namespace csls {

std::vector<std::pair<std::size_t, std::size_t>> default_sweep_grid() {
  std::vector<std::pair<std::size_t, std::size_t>> grid;
  for (std::size_t p : {10, 20})
    for (std::size_t k : {70, 100, 120}) grid.emplace_back(p, k);
  return grid;
}

std::vector<SweepRow> sweep(const std::vector<std::pair<std::size_t, std::size_t>>& grid,
                            const ModelConfig& base_model, const TrainConfig& train_cfg,
                            const DatasetSplit& split, const Tokenizer& tok) {
  if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
  std::vector<SweepRow> rows;
  for (const auto& [p, k] : grid) {
    SweepRow row;
    row.p = p;
    row.k_cap = k;
    try {
      ModelConfig cfg = base_model;
      cfg.align.p = p;
      cfg.align.k_cap = k;
      cfg.structure.max_lines = std::max(cfg.structure.max_lines, k);
      CslsModel model(cfg);
      train(model, split, train_cfg, tok);
      const auto& eval_set = split.test.empty() ? split.train : split.test;
      row.metrics = evaluate(model, eval_set, tok, train_cfg.threshold, train_cfg.batch_size).metrics;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "p,k_cap,acc,recall,prec,f1,status\n";
  for (const auto& r : rows) {
    os << r.p << ',' << r.k_cap << ',';
    if (r.metrics) {
      os << r.metrics->accuracy << ',' << r.metrics->recall << ',' << r.metrics->precision << ',' << r.metrics->f1
         << ",ok";
    } else {
      std::string msg = r.error;
      for (char& c : msg)
        if (c == ',' || c == '\n' || c == '"') c = ' ';
      os << ",,,,error: " << msg;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace csls
