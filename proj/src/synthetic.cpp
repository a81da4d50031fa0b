#include "csls/synthetic.hpp"

#include <array>
#include <random>

namespace csls {

namespace {

constexpr std::array<const char*, 8> kFiller = {
    "    int n = 0;",
    "    size_t len = strlen(user_input);",
    "    n = len * 2;",
    "    log_debug(\"value %d\", n);",
    "    flags |= 0x4;",
    "",
    "    counter++;",
    "    state = next_state(state);",
};

constexpr std::array<const char*, 4> kNames = {"handle_request", "parse_input", "process_packet", "read_config"};

}  // namespace

std::vector<CodeSnippet> synthetic_corpus(std::size_t count, std::uint64_t seed, std::int64_t first_id) {
  std::mt19937_64 rng(seed);
  std::vector<CodeSnippet> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % 2);
    const std::size_t fillers = 1 + static_cast<std::size_t>(rng() % 4);
    const std::size_t slot = static_cast<std::size_t>(rng() % (fillers + 1));
    std::string code = std::string("int ") + kNames[rng() % kNames.size()] + "(char *user_input) {\n    char buf[16];\n";
    for (std::size_t f = 0; f <= fillers; ++f) {
      if (f == slot) {
        code += label ? kPlantedVulnerableLine : kPlantedSecureLine;
        code += '\n';
      }
      if (f < fillers) {
        code += kFiller[rng() % kFiller.size()];
        code += '\n';
      }
    }
    code += "    return 0;\n}\n";
    out.push_back({first_id + static_cast<std::int64_t>(i), std::move(code), label});
  }
  return out;
}

}  // namespace csls
