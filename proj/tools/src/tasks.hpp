#pragma once

#include <iosfwd>
#include <string>

#include "run_config.hpp"

namespace lhts::cli {

/// Sequence spaces up to this size get exact oracle metrics.
inline constexpr std::size_t kOracleLimit = 1'000'000;

/// Runs `config.task`, writing every artifact under `config.out`, and prints
/// a short human-readable report to `report`. `config_text` is echoed
/// verbatim as config.json.
void run_task(const RunConfig& config, const std::string& config_text, std::ostream& report);

/// Space-separated tokens, one sequence per line.
std::vector<ar::Sequence> read_sequences(const std::filesystem::path& path, int vocab_size, int length);
void write_sequences(std::span<const ar::Sequence> sequences, const std::filesystem::path& path);

}  // namespace lhts::cli
