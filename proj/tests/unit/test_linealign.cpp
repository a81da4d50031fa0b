#include "doctest.h"

#include <random>

#include "csls/linealign.hpp"
#include "test_support.hpp"

using namespace csls;

namespace {

std::vector<std::string> numbered_lines(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back("line " + std::to_string(i));
  return v;
}

}  // namespace

TEST_CASE("split_lines keeps indentation and blank lines") {
  CHECK(split_lines("a\nb") == std::vector<std::string>{"a", "b"});
  CHECK(split_lines("a\n\nb") == std::vector<std::string>{"a", "", "b"});
  CHECK(split_lines("  x();\n") == std::vector<std::string>{"  x();"});
  CHECK(split_lines("").empty());
  CHECK(split_lines("\n") == std::vector<std::string>{""});
  CHECK(split_lines("a\n\n") == std::vector<std::string>{"a", ""});
}

TEST_CASE("align_batch pads short snippets to the batch maximum") {
  ByteTokenizer tok;
  auto b = align_batch({numbered_lines(3), numbered_lines(5)}, tok);
  CHECK(b.lines == 5);
  CHECK(b.line_tokens == 20);
  CHECK(b.tokens.size() == 2 * 5 * 20);
  CHECK(b.line_mask.size() == 10);
  // hand-written mini oracle for the line mask
  CHECK(b.line_mask == std::vector<std::uint8_t>{1, 1, 1, 0, 0, 1, 1, 1, 1, 1});
  for (std::size_t j = 3; j < 5; ++j)
    for (std::size_t t = 0; t < 20; ++t) {
      CHECK(b.tokens[b.tok_index(0, j, t)] == Vocab::kPad);
      CHECK(b.token_mask[b.tok_index(0, j, t)] == 0);
    }
  for (std::size_t j = 0; j < 5; ++j) CHECK(b.tokens[b.tok_index(1, j, 0)] == Vocab::kCls);
}

TEST_CASE("align_batch caps the line count") {
  ByteTokenizer tok;
  auto b = align_batch({numbered_lines(120), numbered_lines(4)}, tok);
  CHECK(b.lines == 100);
  CHECK(b.real_lines[0] == 100);
  CHECK(b.source_lines[0] == 120);
  CHECK(tok.decode({b.tokens.begin() + static_cast<std::ptrdiff_t>(b.tok_index(0, 99, 0)),
                    b.tokens.begin() + static_cast<std::ptrdiff_t>(b.tok_index(0, 99, 20))}) == "line 99");
}

TEST_CASE("align_batch truncates long lines to p tokens including CLS") {
  ByteTokenizer tok;
  std::string line(30, 'q');
  auto b = align_batch({{line}}, tok);
  CHECK(b.tokens[0] == Vocab::kCls);
  for (std::size_t t = 1; t < 20; ++t) CHECK(b.tokens[t] == 'q' + 4);
  for (std::size_t t = 0; t < 20; ++t) CHECK(b.token_mask[t] == 1);
  CHECK(b.line_truncated[0] == 1);
}

TEST_CASE("align_batch error paths") {
  ByteTokenizer tok;
  CHECK_THROWS(align_batch({}, tok));
  CHECK_THROWS(align_batch({{"a"}, {}}, tok));
  CHECK_THROWS(align_batch({{"a"}}, tok, {.k_cap = 0}));
  CHECK_THROWS(align_batch({{"a"}}, tok, {.p = 1}));
}

TEST_CASE("pad_to_cap pins k") {
  ByteTokenizer tok;
  auto b = align_batch({numbered_lines(2)}, tok, {.k_cap = 7, .p = 10, .pad_to_cap = true});
  CHECK(b.lines == 7);
  CHECK(b.tokens.size() == 70);
}

TEST_CASE("alignment properties over random batches") {
  ByteTokenizer tok;
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<std::string>> batch;
    std::size_t b = 1 + rng() % 4;
    for (std::size_t i = 0; i < b; ++i) {
      std::size_t n = 1 + rng() % 12;
      std::vector<std::string> lines;
      for (std::size_t j = 0; j < n; ++j) {
        auto s = testing::random_code_text(rng, 30);
        std::erase(s, '\n');
        lines.push_back(s);
      }
      batch.push_back(lines);
    }
    AlignOptions opts{.k_cap = 1 + rng() % 10, .p = 2 + rng() % 20};
    auto out = align_batch(batch, tok, opts);
    const std::size_t k = out.lines, p = out.line_tokens;
    CHECK(k <= opts.k_cap);
    CHECK(out.tokens.size() == b * k * p);
    CHECK(out.token_mask.size() == b * k * p);
    CHECK(out.line_mask.size() == b * k);
    for (std::size_t i = 0; i < b; ++i) {
      // rows are independent of companions: align alone with the same k
      auto solo = align_batch({batch[i]}, tok, {.k_cap = k, .p = p, .pad_to_cap = true});
      for (std::size_t j = 0; j < k; ++j) {
        bool real = out.line_mask[i * k + j];
        CHECK(real == static_cast<bool>(solo.line_mask[j]));
        std::vector<TokenId> row;
        for (std::size_t t = 0; t < p; ++t) {
          CHECK(out.tokens[out.tok_index(i, j, t)] == solo.tokens[solo.tok_index(0, j, t)]);
          if (!real) {
            CHECK(out.token_mask[out.tok_index(i, j, t)] == 0);
            CHECK(out.tokens[out.tok_index(i, j, t)] == Vocab::kPad);
          }
          if (out.token_mask[out.tok_index(i, j, t)]) row.push_back(out.tokens[out.tok_index(i, j, t)]);
        }
        if (real) {
          CHECK(out.tokens[out.tok_index(i, j, 0)] == Vocab::kCls);
          CHECK(batch[i][j].starts_with(tok.decode(row)));
        }
      }
    }
  }
}

TEST_CASE("debug records describe each snippet") {
  ByteTokenizer tok;
  auto b = align_batch({numbered_lines(2), {std::string(40, 'x')}}, tok);
  auto recs = align_debug_records(b);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0]["k"] == 2);
  CHECK(recs[0]["real_lines"] == 2);
  CHECK(recs[1]["line_truncated"][0] == 1);
}
