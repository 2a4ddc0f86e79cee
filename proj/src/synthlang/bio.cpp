// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/synthlang/bio.hpp"

namespace xlkd::synthlang {

std::string_view tag_type(std::string_view tag) {
  if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') return tag.substr(2);
  return {};
}

bool is_begin(std::string_view tag) { return tag.size() > 2 && tag.starts_with("B-"); }
bool is_inside(std::string_view tag) { return tag.size() > 2 && tag.starts_with("I-"); }

bool well_formed(std::span<const std::string> tags) {
  std::string_view open;
  for (const std::string& t : tags) {
    if (is_inside(t) && tag_type(t) != open) return false;
    open = tag_type(t);
  }
  return true;
}

std::vector<std::string> repair(std::span<const std::string> tags) {
  std::vector<std::string> out(tags.begin(), tags.end());
  std::string_view open;
  for (std::string& t : out) {
    if (is_inside(t) && tag_type(t) != open) t[0] = 'B';
    open = tag_type(t);
  }
  return out;
}

std::vector<Span> spans(std::span<const std::string> tags) {
  std::vector<std::string> fixed = repair(tags);
  std::vector<Span> out;
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    if (!is_begin(fixed[i])) continue;
    std::size_t j = i + 1;
    while (j < fixed.size() && is_inside(fixed[j]) && tag_type(fixed[j]) == tag_type(fixed[i])) ++j;
    out.push_back({i, j, std::string(tag_type(fixed[i]))});
  }
  return out;
}

}  // namespace xlkd::synthlang
