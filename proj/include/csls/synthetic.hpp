#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "csls/corpus.hpp"

namespace csls {

// Vulnerable snippets carry an unbounded copy line; secure ones carry a
// bounded formatted write in the same slot. Everything else is drawn from
// a shared pool of filler statements. Labels alternate, so any even count
// is balanced.
inline constexpr const char* kPlantedVulnerableLine = "    strcpy(buf, user_input);";
inline constexpr const char* kPlantedSecureLine = "    snprintf(buf, sizeof(buf), \"%s\", user_input);";

std::vector<CodeSnippet> synthetic_corpus(std::size_t count, std::uint64_t seed, std::int64_t first_id = 0);

}  // namespace csls
