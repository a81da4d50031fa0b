#include "csls/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace csls {

namespace {

constexpr char kMagic[8] = {'C', 'S', 'L', 'S', 'C', 'K', 'P', '1'};

const char* mode_name(NormalizeMode m) { return m == NormalizeMode::kBaseline ? "baseline" : "structured"; }

}  // namespace

void ModelConfig::validate() const {
  line_encoder.validate();
  global_encoder.validate();
  structure.validate();
  if (line_encoder.hidden != global_encoder.hidden || structure.hidden != line_encoder.hidden)
    throw std::invalid_argument("model config: line, global and structure hidden sizes must match");
  if (align.k_cap < 1 || align.p < 2) throw std::invalid_argument("model config: need k_cap >= 1 and p >= 2");
  if (align.k_cap > structure.max_lines)
    throw std::invalid_argument("model config: k_cap exceeds structure max_lines");
  if (align.p > line_encoder.max_positions)
    throw std::invalid_argument("model config: p exceeds line encoder max_positions");
  if (max_len < 2 || max_len > global_encoder.max_positions)
    throw std::invalid_argument("model config: max_len must be in [2, global max_positions]");
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("model config: threshold must be in (0,1)");
}

ModelConfig ModelConfig::desk() { return {}; }

ModelConfig ModelConfig::paper_scale() {
  ModelConfig c;
  c.preset = "paper-scale";
  c.line_encoder = EncoderConfig::paper_scale();
  c.global_encoder = EncoderConfig::paper_scale();
  c.structure = StructureConfig::paper_scale();
  return c;
}

ModelConfig ModelConfig::preset_named(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper-scale") return paper_scale();
  throw std::invalid_argument("unknown preset '" + name + "' (expected desk|paper-scale)");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"preset", c.preset},
       {"line_encoder", c.line_encoder},
       {"global_encoder", c.global_encoder},
       {"structure", c.structure},
       {"threshold", c.threshold},
       {"max_len", c.max_len},
       {"k_cap", c.align.k_cap},
       {"p", c.align.p},
       {"pad_to_cap", c.align.pad_to_cap},
       {"mode", mode_name(c.mode)},
       {"detach", c.detach},
       {"sensitive_mode", c.sensitive_mode == SensitiveMode::kRaw ? "raw" : "abs"},
       {"branch_scales", {{"structure", c.scales.structure}, {"sensitive", c.scales.sensitive}, {"global", c.scales.global}}},
       {"init_seed", c.init_seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (j.contains("preset")) {
    auto seed = c.init_seed;
    c = ModelConfig::preset_named(j.at("preset").get<std::string>());
    c.init_seed = seed;
  }
  if (j.contains("line_encoder")) from_json(j.at("line_encoder"), c.line_encoder);
  if (j.contains("global_encoder")) from_json(j.at("global_encoder"), c.global_encoder);
  if (j.contains("structure")) from_json(j.at("structure"), c.structure);
  c.threshold = j.value("threshold", c.threshold);
  c.max_len = j.value("max_len", c.max_len);
  c.align.k_cap = j.value("k_cap", c.align.k_cap);
  c.align.p = j.value("p", c.align.p);
  c.align.pad_to_cap = j.value("pad_to_cap", c.align.pad_to_cap);
  if (j.contains("mode")) c.mode = parse_normalize_mode(j.at("mode").get<std::string>());
  c.detach = j.value("detach", c.detach);
  if (j.contains("sensitive_mode")) {
    auto m = j.at("sensitive_mode").get<std::string>();
    if (m == "raw")
      c.sensitive_mode = SensitiveMode::kRaw;
    else if (m == "abs")
      c.sensitive_mode = SensitiveMode::kAbsolute;
    else
      throw std::invalid_argument("unknown sensitive_mode '" + m + "' (expected raw|abs)");
  }
  if (j.contains("branch_scales")) {
    const auto& s = j.at("branch_scales");
    c.scales.structure = s.value("structure", c.scales.structure);
    c.scales.sensitive = s.value("sensitive", c.scales.sensitive);
    c.scales.global = s.value("global", c.scales.global);
  }
  c.init_seed = j.value("init_seed", c.init_seed);
}

PreparedBatch prepare_batch(std::span<const CodeSnippet> snippets, const Tokenizer& tok,
                            const ModelConfig& cfg) {
  if (snippets.empty()) throw std::invalid_argument("prepare_batch: empty batch");
  std::vector<std::string> texts;
  std::vector<std::vector<std::string>> lines;
  PreparedBatch out;
  for (const auto& s : snippets) {
    texts.push_back(normalize(s.code, cfg.mode));
    auto split = split_lines(texts.back());
    // whitespace-only input collapses to nothing under the baseline mode
    if (split.empty()) split.emplace_back();
    lines.push_back(std::move(split));
    out.labels.push_back(s.label);
    out.ids.push_back(s.id);
  }
  out.global = build_global_batch(tok, texts, cfg.max_len);
  out.lines = align_batch(lines, tok, cfg.align);
  return out;
}

CslsModel::CslsModel(const ModelConfig& cfg)
    : cfg_((cfg.validate(), cfg)),
      init_(cfg.init_seed),
      line_encoder_(cfg.line_encoder, init_),
      global_encoder_(cfg.global_encoder, init_),
      structure_(cfg.structure, init_),
      head_(cfg.hidden(), cfg.threshold, init_) {}

ForwardResult CslsModel::forward(const PreparedBatch& batch, const ForwardContext& ctx) const {
  ForwardResult r;
  r.line_embeddings = line_embed(line_encoder_, batch.lines, ctx);
  auto structure_in = cfg_.detach ? csls::detach(r.line_embeddings) : r.line_embeddings;
  r.structure = structure_.structure_repr(structure_in, batch.lines.line_mask, ctx);
  r.selection = select_sensitive(r.line_embeddings, batch.lines.line_mask, cfg_.sensitive_mode);
  r.sensitive = r.selection.l_repr;
  r.global = global_embed(global_encoder_, batch.global, ctx);

  auto scaled = [](const ag::Var& v, double s) { return s == 1.0 ? v : ag::scale(v, s); };
  r.fused = fuse(scaled(r.structure, cfg_.scales.structure), scaled(r.sensitive, cfg_.scales.sensitive),
                 scaled(r.global, cfg_.scales.global));
  r.probabilities = head_.predict(r.fused);
  return r;
}

ParamList CslsModel::parameters() const {
  ParamList out;
  line_encoder_.collect("line_encoder.", out);
  global_encoder_.collect("global_encoder.", out);
  structure_.collect("structure.", out);
  head_.collect("head.", out);
  return out;
}

std::size_t CslsModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.var->size();
  return n;
}

void CslsModel::zero_grad() const {
  for (const auto& p : parameters()) p.var->grad.assign(p.var->size(), 0.0);
}

std::vector<std::vector<double>> CslsModel::snapshot() const {
  std::vector<std::vector<double>> out;
  for (const auto& p : parameters()) out.push_back(p.var->value);
  return out;
}

void CslsModel::restore(const std::vector<std::vector<double>>& values) const {
  auto params = parameters();
  if (values.size() != params.size()) throw std::invalid_argument("restore: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (values[i].size() != params[i].var->size())
      throw std::invalid_argument("restore: size mismatch for " + params[i].name);
    params[i].var->value = values[i];
  }
}

void save_checkpoint(const std::filesystem::path& path, const CslsModel& model) {
  static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes little-endian hosts");
  nlohmann::json index = nlohmann::json::array();
  std::uint64_t offset = 0;
  auto params = model.parameters();
  for (const auto& p : params) {
    index.push_back({{"name", p.name}, {"shape", p.var->shape}, {"dtype", "f64"}, {"offset", offset}});
    offset += p.var->size();
  }
  nlohmann::json header = {{"format", "csls-checkpoint"}, {"version", 1}, {"config", model.config()}, {"params", index}};
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : params)
    out.write(reinterpret_cast<const char*>(p.var->value.data()),
              static_cast<std::streamsize>(p.var->size() * sizeof(double)));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

CslsModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error(path.string() + " is not a checkpoint archive");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1u << 30)) throw std::runtime_error("corrupt checkpoint header in " + path.string());
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  auto header = nlohmann::json::parse(text);

  ModelConfig cfg = header.at("config").get<ModelConfig>();
  CslsModel model(cfg);
  auto params = model.parameters();
  const auto& index = header.at("params");
  if (index.size() != params.size()) throw std::runtime_error("checkpoint parameter count does not match config");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& entry = index[i];
    if (entry.at("name").get<std::string>() != params[i].name ||
        entry.at("shape").get<ag::Shape>() != params[i].var->shape || entry.at("dtype") != "f64")
      throw std::runtime_error("checkpoint entry " + entry.at("name").get<std::string>() + " does not match model");
    in.read(reinterpret_cast<char*>(params[i].var->value.data()),
            static_cast<std::streamsize>(params[i].var->size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated checkpoint payload at " + params[i].name);
  }
  return model;
}

}  // namespace csls
