#include "csls/tokenize.hpp"

#include <algorithm>
#include <stdexcept>

namespace csls {

namespace {

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

}  // namespace

std::string normalize_baseline(std::string_view code) {
  std::string out;
  out.reserve(code.size());
  bool pending_space = false;
  for (char c : code) {
    if (is_ws(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string normalize_structured(std::string_view code) { return std::string(code); }

std::string normalize(std::string_view code, NormalizeMode mode) {
  return mode == NormalizeMode::kBaseline ? normalize_baseline(code) : normalize_structured(code);
}

NormalizeMode parse_normalize_mode(std::string_view name) {
  if (name == "structured") return NormalizeMode::kStructured;
  if (name == "baseline") return NormalizeMode::kBaseline;
  throw std::invalid_argument("unknown normalization mode '" + std::string(name) +
                              "' (expected structured|baseline)");
}

nlohmann::json Vocab::to_json() {
  nlohmann::json bytes = nlohmann::json::array();
  for (int b = 0; b < 256; ++b) bytes.push_back({{"byte", b}, {"id", byte_to_id(static_cast<unsigned char>(b))}});
  return {{"kind", "byte"},
          {"size", kSize},
          {"specials", {{"PAD", kPad}, {"CLS", kCls}, {"SEP", kSep}, {"UNK", kUnk}}},
          {"bytes", std::move(bytes)}};
}

std::vector<TokenId> ByteTokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  ids.reserve(text.size());
  for (char c : text) ids.push_back(Vocab::byte_to_id(static_cast<unsigned char>(c)));
  return ids;
}

std::string ByteTokenizer::decode(const std::vector<TokenId>& ids) const {
  std::string out;
  out.reserve(ids.size());
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= Vocab::kSize)
      throw std::out_of_range("token id " + std::to_string(id) + " outside byte vocabulary");
    if (Vocab::is_special(id)) continue;
    out.push_back(static_cast<char>(id - Vocab::kByteOffset));
  }
  return out;
}

TokenSeq encode_text(const Tokenizer& tok, std::string_view text, std::size_t max_len) {
  if (max_len < 2) throw std::invalid_argument("encode_text: max_len must be >= 2, got " + std::to_string(max_len));
  auto content = tok.encode(text);
  TokenSeq seq;
  seq.ids.assign(max_len, tok.pad_id());
  seq.mask.assign(max_len, 0);
  seq.ids[0] = tok.cls_id();
  seq.mask[0] = 1;
  const std::size_t keep = std::min(content.size(), max_len - 1);
  seq.truncated = keep < content.size();
  for (std::size_t i = 0; i < keep; ++i) {
    seq.ids[i + 1] = content[i];
    seq.mask[i + 1] = 1;
  }
  return seq;
}

std::string decode(const Tokenizer& tok, const TokenSeq& seq) {
  std::vector<TokenId> real;
  real.reserve(seq.ids.size());
  for (std::size_t i = 0; i < seq.ids.size(); ++i)
    if (i >= seq.mask.size() || seq.mask[i]) real.push_back(seq.ids[i]);
  return tok.decode(real);
}

GlobalTokenBatch build_global_batch(const Tokenizer& tok, const std::vector<std::string>& texts,
                                    std::size_t max_len) {
  if (texts.empty()) throw std::invalid_argument("build_global_batch: empty batch");
  std::vector<TokenSeq> seqs;
  seqs.reserve(texts.size());
  std::size_t len = 1;
  for (const auto& t : texts) {
    seqs.push_back(encode_text(tok, t, max_len));
    auto real = static_cast<std::size_t>(std::count(seqs.back().mask.begin(), seqs.back().mask.end(), 1));
    len = std::max(len, real);
  }
  GlobalTokenBatch out;
  out.batch = texts.size();
  out.len = len;
  out.tokens.reserve(out.batch * len);
  out.mask.reserve(out.batch * len);
  for (const auto& s : seqs) {
    out.tokens.insert(out.tokens.end(), s.ids.begin(), s.ids.begin() + static_cast<std::ptrdiff_t>(len));
    out.mask.insert(out.mask.end(), s.mask.begin(), s.mask.begin() + static_cast<std::ptrdiff_t>(len));
    out.truncated.push_back(s.truncated ? 1 : 0);
  }
  return out;
}

}  // namespace csls
