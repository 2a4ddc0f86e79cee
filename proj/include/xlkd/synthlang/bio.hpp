// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xlkd::synthlang {

struct Span {
  std::size_t begin = 0;  // inclusive word index
  std::size_t end = 0;    // exclusive
  std::string type;
  auto operator<=>(const Span&) const = default;
};

// "B-x" -> "x", "I-x" -> "x", "O" -> "".
std::string_view tag_type(std::string_view tag);
bool is_begin(std::string_view tag);
bool is_inside(std::string_view tag);

// No I- tag without a preceding B- or I- of the same type.
bool well_formed(std::span<const std::string> tags);
// Turns every I- tag that does not continue a span of its type into B-.
std::vector<std::string> repair(std::span<const std::string> tags);
// Spans of the repaired sequence.
std::vector<Span> spans(std::span<const std::string> tags);

}  // namespace xlkd::synthlang
