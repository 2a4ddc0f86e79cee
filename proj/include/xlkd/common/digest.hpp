// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xlkd {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string base64_encode(std::span<const uint8_t> bytes);
std::vector<uint8_t> base64_decode(std::string_view text);

std::string read_file(const std::filesystem::path& path);
// Writes atomically enough for our purposes: truncate + write + close.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace xlkd
