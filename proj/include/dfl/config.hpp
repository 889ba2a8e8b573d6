#pragma once

// YAML experiment files.
//
// Unknown keys are errors. Every problem found is reported with its line and
// column; parsing does not stop at the first one.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "dfl/experiment.hpp"

namespace dfl {

/// Throws ConfigError listing every problem. `overrides` are "dotted.key=value"
/// assignments applied to the document before it is read; values are YAML.
ExperimentConfig parse_config_string(std::string_view text, const std::string& source = "<string>",
                                     std::span<const std::string> overrides = {});
ExperimentConfig parse_config(const std::filesystem::path& path, std::span<const std::string> overrides = {});

/// Range and consistency checks on an already-built config. Returns the
/// problems without throwing.
std::vector<std::string> validate_config(const ExperimentConfig& cfg);

/// Full YAML dump with every field spelled out; parses back to an equal config.
std::string dump_config(const ExperimentConfig& cfg);

std::string_view to_string(AttackKind kind);
std::string_view to_string(PartitionMode mode);

}  // namespace dfl
