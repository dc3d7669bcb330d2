// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fedhlm/sim_engine.hpp"

namespace fedhlm {

class ConfigError : public std::runtime_error {
 public:
  enum class Kind { MissingFile, InvalidValue };

  ConfigError(Kind kind, std::string key, const std::string &what)
      : std::runtime_error(what), kind_(kind), key_(std::move(key)) {}

  Kind kind() const { return kind_; }
  /// Offending dotted key; empty for MissingFile.
  const std::string &key() const { return key_; }

 private:
  Kind kind_;
  std::string key_;
};

/// Flat `section.key = value` text, one entry per line, `#` comments.
/// Unspecified keys keep their defaults; the result is validated.
SimulationConfig parse_config_text(std::string_view text);
SimulationConfig parse_config(const std::filesystem::path &path);

/// Every key with its effective value, in canonical order. Parsing the
/// output yields an equal config.
std::string serialize_config(const SimulationConfig &cfg);

/// Canonical key list, in serialization order.
std::vector<std::string> config_keys();

Mode parse_mode(std::string_view name);

/// Sets one key, throwing ConfigError(InvalidValue) on a bad value or key.
void apply_config_value(SimulationConfig &cfg, std::string_view key,
                        std::string_view value);

}  // namespace fedhlm
