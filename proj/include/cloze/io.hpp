#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cloze::io {

std::string read_text(const std::filesystem::path& path);

nlohmann::json read_json(const std::filesystem::path& path);

// One JSON value per non-blank line; line numbers are reported on parse errors.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it over the target.
void write_atomic(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace cloze::io
