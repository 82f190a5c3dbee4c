#pragma once
// Flat key-value config files ("key = value", '#' comments). Unknown keys
// are rejected so typos fail loudly.

#include <filesystem>
#include <map>
#include <string>

#include "lrgcn/trainer.hpp"

namespace lrgcn {

// Parses and validates a config file into TrainConfig; missing keys keep
// their defaults. Throws on unknown keys or unparseable values.
TrainConfig parse_config_file(const std::filesystem::path& path);

// Applies one "key=value" override (same validation as the file parser).
void apply_config_entry(TrainConfig& cfg, const std::string& key,
                        const std::string& value);

// Resolved config as an ordered key -> value map (for manifests and logs).
std::map<std::string, std::string> config_to_map(const TrainConfig& cfg);

}  // namespace lrgcn
