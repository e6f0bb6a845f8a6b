#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "cdgan/data.hpp"
#include "cdgan/infer.hpp"
#include "cdgan/training.hpp"

namespace cdgan {

using KeyValues = std::map<std::string, std::string>;

// UTF-8 "key = value" lines; '#' starts a comment; blank lines ignored.
// Duplicate keys are hard errors (typo safety for long runs).
KeyValues parse_config_file(const std::filesystem::path& path);
KeyValues parse_config_text(const std::string& text, const std::string& origin);

// Each applier consumes (erases) the keys it understands and writes the
// matching fields; malformed values raise ConfigError naming the key.
void apply_config(KeyValues& kv, TrainConfig& cfg);
void apply_config(KeyValues& kv, SimConfig& cfg);
void apply_config(KeyValues& kv, TileConfig& cfg);

// Leftover keys after all appliers ran are unknown: hard error.
void require_consumed(const KeyValues& kv, const std::string& context);

}  // namespace cdgan
