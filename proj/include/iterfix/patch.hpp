#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "iterfix/benchmark.hpp"
#include "iterfix/error.hpp"

namespace iterfix {

struct ExtractedPatch {
  std::string code;
  std::optional<std::string> fence_tag;
  bool extraction_ok = false;
  bool operator==(const ExtractedPatch&) const = default;
};

namespace detail {

inline bool is_tag_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '_' || c == '-' || c == '+' || c == '#' || c == '.';
}

inline std::string_view trim_blank(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

}  // namespace detail

// Content of the first complete fenced block. An opening fence is three
// backquotes, an optional word tag, then a newline; the closing fence is a
// line holding only three backquotes. Never throws.
inline ExtractedPatch extract_code(std::string_view raw) noexcept {
  constexpr std::string_view fence = "```";
  std::size_t search = 0;
  while (true) {
    auto open = raw.find(fence, search);
    if (open == std::string_view::npos) return {};
    std::size_t i = open + fence.size();
    std::size_t tag_begin = i;
    while (i < raw.size() && detail::is_tag_char(raw[i])) ++i;
    std::size_t tag_end = i;
    while (i < raw.size() && (raw[i] == ' ' || raw[i] == '\t' || raw[i] == '\r')) ++i;
    if (i >= raw.size() || raw[i] != '\n') {
      search = open + 1;
      continue;
    }
    const std::size_t body_begin = i + 1;
    std::size_t line = body_begin;
    while (line <= raw.size()) {
      auto nl = raw.find('\n', line);
      auto line_end = nl == std::string_view::npos ? raw.size() : nl;
      if (detail::trim_blank(raw.substr(line, line_end - line)) == fence) {
        ExtractedPatch p;
        auto body_end = line == body_begin ? body_begin : line - 1;  // drop the newline
        p.code = std::string(raw.substr(body_begin, body_end - body_begin));
        if (!p.code.empty() && p.code.back() == '\r') p.code.pop_back();
        if (p.code.empty()) return {};
        if (tag_end > tag_begin) p.fence_tag = std::string(raw.substr(tag_begin, tag_end - tag_begin));
        p.extraction_ok = true;
        return p;
      }
      if (nl == std::string_view::npos) break;
      line = nl + 1;
    }
    return {};
  }
}

// Replaces the problem's replacement region with code and removes the bug
// markers from the surrounding text. Markers inside code are left alone.
inline std::string splice(const Problem& problem, std::string_view code) {
  if (code.empty()) throw SpliceError("cannot splice empty code into problem '" + problem.id + "'");
  const auto& src = problem.source_text;
  const auto r = problem.replace_region;
  if (r.begin > r.end || r.end > src.size())
    throw SpliceError("replacement region of problem '" + problem.id + "' is out of range");
  std::string out = strip_markers(std::string_view(src).substr(0, r.begin));
  out.append(code);
  out.append(strip_markers(std::string_view(src).substr(r.end)));
  return out;
}

}  // namespace iterfix
