// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace jar {

/// Flat `key = value` text. Blank lines and lines starting with '#' are
/// ignored; a repeated key keeps its last value.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config(std::string_view text);
ConfigMap load_config(const std::filesystem::path& path);

}  // namespace jar
