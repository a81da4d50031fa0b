#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "csls/corpus.hpp"
#include "csls/encoders.hpp"
#include "csls/head.hpp"
#include "csls/linealign.hpp"
#include "csls/sensitive.hpp"
#include "csls/structure.hpp"
#include "csls/tokenize.hpp"

namespace csls {

// Multipliers applied to each branch before fusion; 0 ablates a branch
// while keeping the fused width.
struct BranchScales {
  double structure = 1.0;
  double sensitive = 1.0;
  double global = 1.0;
};

struct ModelConfig {
  std::string preset = "desk";
  EncoderConfig line_encoder = EncoderConfig::desk();
  EncoderConfig global_encoder = EncoderConfig::desk();
  StructureConfig structure = StructureConfig::desk();
  double threshold = 0.5;
  std::size_t max_len = 1024;
  AlignOptions align;
  NormalizeMode mode = NormalizeMode::kStructured;
  bool detach = true;
  SensitiveMode sensitive_mode = SensitiveMode::kRaw;
  BranchScales scales;
  std::uint64_t init_seed = 123456;

  std::size_t hidden() const { return line_encoder.hidden; }
  void validate() const;

  static ModelConfig desk();
  static ModelConfig paper_scale();
  static ModelConfig preset_named(const std::string& name);
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct PreparedBatch {
  GlobalTokenBatch global;
  LineTokenBatch lines;
  std::vector<int> labels;
  std::vector<std::int64_t> ids;
};

PreparedBatch prepare_batch(std::span<const CodeSnippet> snippets, const Tokenizer& tok,
                            const ModelConfig& cfg);

struct ForwardResult {
  ag::Var line_embeddings;  // LE [b, k, h]
  SensitiveSelection selection;
  ag::Var structure;  // S_repr [b, h]
  ag::Var sensitive;  // L_repr [b, h]
  ag::Var global;     // G_repr [b, h]
  ag::Var fused;      // H [b, 3h]
  ag::Var probabilities;  // [b]
};

// Line encoder, global encoder, structure transformer and classifier head.
class CslsModel {
 public:
  explicit CslsModel(const ModelConfig& cfg);
  // Parameters are shared handles; copying would alias them.
  CslsModel(const CslsModel&) = delete;
  CslsModel& operator=(const CslsModel&) = delete;
  CslsModel(CslsModel&&) = default;
  CslsModel& operator=(CslsModel&&) = default;

  const ModelConfig& config() const { return cfg_; }
  ModelConfig& mutable_config() { return cfg_; }

  ForwardResult forward(const PreparedBatch& batch, const ForwardContext& ctx = {}) const;

  // Stable order; names are namespaced line_encoder.*, global_encoder.*,
  // structure.*, head.*
  ParamList parameters() const;
  std::size_t parameter_count() const;

  const SequenceEncoder& line_encoder() const { return line_encoder_; }
  const SequenceEncoder& global_encoder() const { return global_encoder_; }
  const StructureModel& structure() const { return structure_; }
  const ClassifierHead& head() const { return head_; }

  void zero_grad() const;
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values) const;

 private:
  ModelConfig cfg_;
  ParamInit init_;
  SequenceEncoder line_encoder_;
  SequenceEncoder global_encoder_;
  StructureModel structure_;
  ClassifierHead head_;
};

// Binary archive: 8-byte magic, u64 header length, JSON header (config +
// parameter index: name, shape, dtype, offset), then little-endian float64
// payload in row-major order.
void save_checkpoint(const std::filesystem::path& path, const CslsModel& model);
CslsModel load_checkpoint(const std::filesystem::path& path);

}  // namespace csls
