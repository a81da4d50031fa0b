// csls: command-line driver for preprocessing, statistics, training,
// evaluation, model comparison and hyperparameter sweeps.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "csls/corpus.hpp"
#include "csls/model.hpp"
#include "csls/synthetic.hpp"
#include "csls/trainkit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace csls;

namespace {

// Flags shared by every subcommand. Unset optionals fall back to the config
// file, then to the preset.
struct CommonFlags {
  std::string config_path;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset;
  std::optional<std::string> mode;
};

struct DataFlags {
  std::string dataset;
  std::string train, valid, test;
};

struct RunConfig {
  std::string preset = "desk";
  std::uint64_t seed = 123456;
  SplitRatios split{0.8, 0.1, 0.1};
  std::size_t limit = 1024;
  ModelConfig model;
  TrainConfig train;
  json data;
};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// Precedence: preset < config file < flags.
RunConfig resolve(const CommonFlags& f, const DataFlags* d) {
  json file = f.config_path.empty() ? json::object() : read_json(f.config_path);
  RunConfig rc;
  rc.preset = f.preset.value_or(file.value("preset", rc.preset));
  rc.seed = f.seed.value_or(file.value("seed", rc.seed));
  rc.limit = file.value("limit", rc.limit);
  if (file.contains("split")) rc.split = file.at("split").get<SplitRatios>();

  rc.model = ModelConfig::preset_named(rc.preset);
  rc.train = TrainConfig::preset_named(rc.preset);
  if (file.contains("model")) {
    json m = file.at("model");
    m.erase("preset");
    from_json(m, rc.model);
  }
  if (file.contains("train")) {
    json t = file.at("train");
    t.erase("preset");
    from_json(t, rc.train);
  }
  if (f.mode) rc.model.mode = parse_normalize_mode(*f.mode);
  rc.model.init_seed = rc.seed;
  rc.train.seed = rc.seed;
  rc.train.threshold = rc.model.threshold;
  rc.model.validate();
  rc.train.validate();

  rc.data = file.value("data", json::object());
  if (d) {
    if (!d->dataset.empty()) rc.data["dataset"] = d->dataset;
    if (!d->train.empty()) rc.data["train"] = d->train;
    if (!d->valid.empty()) rc.data["valid"] = d->valid;
    if (!d->test.empty()) rc.data["test"] = d->test;
  }
  return rc;
}

json effective(const RunConfig& rc) {
  return {{"preset", rc.preset}, {"seed", rc.seed},   {"split", rc.split}, {"limit", rc.limit},
          {"model", rc.model},   {"train", rc.train}, {"data", rc.data}};
}

fs::path prepare_out(const CommonFlags& f, const RunConfig& rc) {
  fs::path out(f.out);
  fs::create_directories(out);
  write_json(out / "config.json", effective(rc));
  return out;
}

std::vector<CodeSnippet> load_required(const json& data, const char* key) {
  if (!data.contains(key)) throw std::runtime_error(std::string("no '") + key + "' dataset given");
  fs::path p = data.at(key).get<std::string>();
  if (!fs::exists(p)) throw std::runtime_error("dataset not found: " + p.string());
  return load_jsonl(p);
}

// Either explicit train/valid/test files or one file split by ratio.
DatasetSplit load_split(const RunConfig& rc) {
  if (rc.data.contains("train")) {
    DatasetSplit s;
    s.train = load_required(rc.data, "train");
    if (rc.data.contains("valid")) s.valid = load_required(rc.data, "valid");
    if (rc.data.contains("test")) s.test = load_required(rc.data, "test");
    return s;
  }
  return split_dataset(load_required(rc.data, "dataset"), rc.split, rc.seed);
}

std::vector<CodeSnippet> load_eval_set(const RunConfig& rc) {
  if (rc.data.contains("test")) return load_required(rc.data, "test");
  return load_required(rc.data, "dataset");
}

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--seed", f.seed, "seed for splits, initialization and shuffling");
  sub->add_option("--preset", f.preset, "model/training preset")->check(CLI::IsMember({"desk", "paper-scale"}));
  sub->add_option("--mode", f.mode, "whitespace handling")->check(CLI::IsMember({"structured", "baseline"}));
}

void add_data(CLI::App* sub, DataFlags& d) {
  sub->add_option("--dataset", d.dataset, "JSONL corpus (split by ratio for training)");
  sub->add_option("--train", d.train, "explicit training JSONL");
  sub->add_option("--valid", d.valid, "explicit validation JSONL");
  sub->add_option("--test", d.test, "explicit test JSONL");
}

int cmd_preprocess(const CommonFlags& f, const DataFlags& d) {
  auto rc = resolve(f, &d);
  auto corpus = load_required(rc.data, "dataset");
  auto out = prepare_out(f, rc);
  ByteTokenizer tok;
  std::ofstream dump(out / "preprocess.jsonl", std::ios::binary);
  for (const auto& s : corpus) {
    auto text = normalize(s.code, rc.model.mode);
    auto global = build_global_batch(tok, {text}, rc.model.max_len);
    auto lines = split_lines(s.code);
    if (rc.model.mode == NormalizeMode::kBaseline)
      for (auto& l : lines) l = normalize_baseline(l);
    json rec = {{"id", s.id},
                {"label", s.label},
                {"mode", rc.model.mode == NormalizeMode::kStructured ? "structured" : "baseline"},
                {"text", text},
                {"global_tokens", global.tokens},
                {"global_truncated", global.truncated[0] != 0}};
    if (!lines.empty()) {
      auto batch = align_batch({lines}, tok, rc.model.align);
      rec["lines"] = align_debug_records(batch)[0];
    }
    dump << rec.dump() << '\n';
  }
  if (!dump) throw std::runtime_error("cannot write preprocess.jsonl");
  std::cout << "preprocessed " << corpus.size() << " snippets -> " << (out / "preprocess.jsonl").string() << '\n';
  return 0;
}

int cmd_stats(const CommonFlags& f, const DataFlags& d, std::optional<std::size_t> limit) {
  auto rc = resolve(f, &d);
  if (limit) rc.limit = *limit;
  auto corpus = load_required(rc.data, "dataset");
  auto out = prepare_out(f, rc);
  ByteTokenizer tok;
  auto st = corpus_stats(corpus, tok, rc.limit);
  write_json(out / "stats.json", to_json(st));
  write_text(out / "per_snippet.csv", per_snippet_csv(st));
  std::cout << to_json(st).dump(2) << '\n';
  return 0;
}

int cmd_train(const CommonFlags& f, const DataFlags& d) {
  auto rc = resolve(f, &d);
  auto split = load_split(rc);
  auto out = prepare_out(f, rc);
  ByteTokenizer tok;
  CslsModel model(rc.model);
  std::cout << "train " << split.train.size() << " / valid " << split.valid.size() << " / test "
            << split.test.size() << ", " << model.parameter_count() << " parameters\n";
  auto res = train(model, split, rc.train, tok);
  for (const auto& e : res.history)
    std::cout << "epoch " << e.epoch << " steps " << e.steps << " loss " << e.train_loss << " acc "
              << e.train_accuracy << (e.valid ? " valid f1 " + std::to_string(e.valid->f1) : "") << '\n';
  save_checkpoint(out / "model.ckpt", model);
  write_text(out / "history.csv", history_csv(res));
  if (!split.test.empty()) {
    auto report = evaluate(model, split.test, tok, rc.model.threshold, rc.train.batch_size);
    write_json(out / "eval_test.json", report);
    std::cout << "test " << json(report.metrics).dump() << '\n';
  }
  return 0;
}

int cmd_eval(const CommonFlags& f, const DataFlags& d, const std::string& checkpoint) {
  auto rc = resolve(f, &d);
  auto snippets = load_eval_set(rc);
  auto model = load_checkpoint(checkpoint);
  rc.model = model.config();
  auto out = prepare_out(f, rc);
  ByteTokenizer tok;
  auto report = evaluate(model, snippets, tok, model.config().threshold, rc.train.batch_size);
  write_json(out / "eval.json", report);
  std::cout << json(report.metrics).dump() << '\n';
  return 0;
}

int cmd_compare(const CommonFlags& f, const std::string& a, const std::string& b, const std::string& test) {
  auto rc = resolve(f, nullptr);
  auto ra = read_json(a).get<EvalReport>();
  auto rb = read_json(b).get<EvalReport>();
  auto rep = compare_models(ra, rb, test == "mcnemar" ? ChiSquareTest::kMcNemar : ChiSquareTest::kPearson);
  auto out = prepare_out(f, rc);
  json j = rep;
  j["a"] = a;
  j["b"] = b;
  write_json(out / "compare.json", j);
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_sweep(const CommonFlags& f, const DataFlags& d) {
  auto rc = resolve(f, &d);
  auto split = load_split(rc);
  auto out = prepare_out(f, rc);
  ByteTokenizer tok;
  auto rows = sweep(default_sweep_grid(), rc.model, rc.train, split, tok);
  auto csv = sweep_csv(rows);
  write_text(out / "sweep.csv", csv);
  std::cout << csv;
  for (const auto& r : rows)
    if (!r.metrics) return 1;
  return 0;
}

int cmd_synth(std::size_t count, std::uint64_t seed, const std::string& path) {
  if (count == 0) throw std::runtime_error("synth: count must be >= 1");
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  save_jsonl(p, synthetic_corpus(count, seed));
  std::cout << "wrote " << count << " snippets -> " << p.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Code vulnerability detection with line-structure semantics"};
  app.require_subcommand(1);

  CommonFlags common;
  DataFlags data;

  auto* pre = app.add_subcommand("preprocess", "dump global and line token views per snippet");
  add_common(pre, common);
  add_data(pre, data);

  std::optional<std::size_t> limit;
  auto* stats = app.add_subcommand("stats", "token and line statistics for a corpus");
  add_common(stats, common);
  add_data(stats, data);
  stats->add_option("--limit", limit, "token length threshold (default 1024)");

  auto* tr = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(tr, common);
  add_data(tr, data);

  std::string checkpoint;
  auto* ev = app.add_subcommand("eval", "score a checkpoint on a corpus");
  add_common(ev, common);
  add_data(ev, data);
  ev->add_option("--checkpoint", checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);

  std::string report_a, report_b, test = "pearson";
  auto* cmp = app.add_subcommand("compare", "paired comparison of two eval reports");
  add_common(cmp, common);
  cmp->add_option("a", report_a, "eval JSON of model A")->required()->check(CLI::ExistingFile);
  cmp->add_option("b", report_b, "eval JSON of model B")->required()->check(CLI::ExistingFile);
  cmp->add_option("--test", test, "chi-square variant")->check(CLI::IsMember({"pearson", "mcnemar"}));

  auto* sw = app.add_subcommand("sweep", "train and score one model per (p, k_cap) cell");
  add_common(sw, common);
  add_data(sw, data);

  std::size_t synth_count = 80;
  std::uint64_t synth_seed = 123456;
  std::string synth_path = "synthetic.jsonl";
  auto* syn = app.add_subcommand("synth", "write the synthetic planted-line corpus");
  syn->add_option("--count", synth_count, "number of snippets");
  syn->add_option("--seed", synth_seed, "generator seed");
  syn->add_option("--out", synth_path, "output JSONL path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pre) return cmd_preprocess(common, data);
    if (*stats) return cmd_stats(common, data, limit);
    if (*tr) return cmd_train(common, data);
    if (*ev) return cmd_eval(common, data, checkpoint);
    if (*cmp) return cmd_compare(common, report_a, report_b, test);
    if (*sw) return cmd_sweep(common, data);
    if (*syn) return cmd_synth(synth_count, synth_seed, synth_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
