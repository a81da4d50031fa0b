#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace csls {

using TokenId = std::int32_t;

// Text normalizations applied before tokenization.
//
// normalize_baseline collapses every whitespace run to one space and trims
// the ends, which is what flat-sequence preprocessing does. The structured
// variant is the identity: newlines and indentation reach the tokenizer.
std::string normalize_baseline(std::string_view code);
std::string normalize_structured(std::string_view code);

enum class NormalizeMode { kStructured, kBaseline };
std::string normalize(std::string_view code, NormalizeMode mode);
NormalizeMode parse_normalize_mode(std::string_view name);

// Seam for subword tokenizers. encode() returns content ids only; the
// specials are added by encode_text().
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<TokenId> encode(std::string_view text) const = 0;
  virtual std::string decode(const std::vector<TokenId>& ids) const = 0;
  virtual std::size_t vocab_size() const = 0;
  virtual TokenId pad_id() const = 0;
  virtual TokenId cls_id() const = 0;
  virtual TokenId sep_id() const = 0;
  virtual TokenId unk_id() const = 0;
};

// Byte-level vocabulary: four specials followed by the 256 byte values.
struct Vocab {
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kCls = 1;
  static constexpr TokenId kSep = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr TokenId kByteOffset = 4;
  static constexpr std::size_t kSize = 260;

  static constexpr TokenId byte_to_id(unsigned char b) { return static_cast<TokenId>(b) + kByteOffset; }
  static bool is_special(TokenId id) { return id >= 0 && id < kByteOffset; }

  static nlohmann::json to_json();
};

class ByteTokenizer final : public Tokenizer {
 public:
  std::vector<TokenId> encode(std::string_view text) const override;
  // Specials are skipped; ids outside the vocabulary throw std::out_of_range.
  std::string decode(const std::vector<TokenId>& ids) const override;
  std::size_t vocab_size() const override { return Vocab::kSize; }
  TokenId pad_id() const override { return Vocab::kPad; }
  TokenId cls_id() const override { return Vocab::kCls; }
  TokenId sep_id() const override { return Vocab::kSep; }
  TokenId unk_id() const override { return Vocab::kUnk; }
};

struct TokenSeq {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> mask;  // 1 = real token
  bool truncated = false;
};

// [CLS] ++ content ids, head-truncated to max_len and padded with PAD.
TokenSeq encode_text(const Tokenizer& tok, std::string_view text, std::size_t max_len);
std::string decode(const Tokenizer& tok, const TokenSeq& seq);

// Whole-fragment batch [b, n]. n is the longest real length in the batch
// (never more than max_len); the trailing columns are all padding anyway.
struct GlobalTokenBatch {
  std::size_t batch = 0;
  std::size_t len = 0;
  std::vector<TokenId> tokens;        // [batch, len]
  std::vector<std::uint8_t> mask;     // [batch, len]
  std::vector<std::uint8_t> truncated;  // [batch]
};

GlobalTokenBatch build_global_batch(const Tokenizer& tok, const std::vector<std::string>& texts,
                                    std::size_t max_len);

}  // namespace csls
