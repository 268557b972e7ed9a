#pragma once

// Benchmark manifests: a single JSON document listing the buggy problems,
// the commands that build and test them, and the test sources used as
// feedback.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "iterfix/error.hpp"

namespace iterfix {

inline constexpr std::string_view kBugStart = "<bug_start>";
inline constexpr std::string_view kBugEnd = "<bug_end>";

inline constexpr int kDefaultTestTimeoutSeconds = 60;
inline constexpr int kDefaultBuildTimeoutSeconds = 300;

// Half-open character span [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

struct TimeoutPolicy {
  int test_timeout_seconds = kDefaultTestTimeoutSeconds;
  int build_timeout_seconds = kDefaultBuildTimeoutSeconds;
  bool operator==(const TimeoutPolicy&) const = default;
};

// Line-oriented test report format. Each regex must have one capture group
// holding the test name. Lines are matched in output order.
struct HarnessFormat {
  std::string failure_regex = R"(^\s*FAIL(?:ED)?:?\s+(\S+))";
  std::string timeout_regex = R"(^\s*TIMEOUT:?\s+(\S+))";
  // Marks a test as started; used to name the test that was running when
  // the wall-clock bound killed the harness.
  std::string running_regex = R"(^\s*RUN:?\s+(\S+))";
  bool operator==(const HarnessFormat&) const = default;
};

struct Problem {
  std::string id;
  std::string source_text;
  Span bug_region;  // from the start of <bug_start> to the end of <bug_end>
  std::string buggy_function_text;
  Span replace_region;  // part of source_text replaced by a candidate patch
  bool replace_region_explicit = false;
  std::string build_command;
  std::string test_command;
  std::map<std::string, std::string> test_index;
  int timeout_seconds = kDefaultTestTimeoutSeconds;
  int build_timeout_seconds = kDefaultBuildTimeoutSeconds;
  // Path of the patched file inside a workspace, relative to its root.
  std::filesystem::path target_file;
  std::filesystem::path workspace_template;

  bool operator==(const Problem&) const = default;
};

struct BenchmarkManifest {
  std::string name;
  std::vector<Problem> problems;
  std::filesystem::path workspace_template;
  TimeoutPolicy defaults;
  HarnessFormat harness;

  const Problem* find(std::string_view id) const {
    for (const auto& p : problems)
      if (p.id == id) return &p;
    return nullptr;
  }

  bool operator==(const BenchmarkManifest&) const = default;
};

inline std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size()))
    ++n;
  return n;
}

inline std::string strip_markers(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, kBugStart.size(), kBugStart) == 0) {
      i += kBugStart.size();
    } else if (text.compare(i, kBugEnd.size(), kBugEnd) == 0) {
      i += kBugEnd.size();
    } else {
      out.push_back(text[i++]);
    }
  }
  return out;
}

// Returns the stored source of a test. An empty stored source is returned
// as-is; only an absent name is an error.
inline const std::string& lookup_test_source(const Problem& problem,
                                             const std::string& test_name) {
  auto it = problem.test_index.find(test_name);
  if (it == problem.test_index.end()) throw TestLookupError(test_name);
  return it->second;
}

namespace detail {

inline std::string read_text_file(const std::filesystem::path& path, const std::string& id,
                                  const std::string& field) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec))
    throw ManifestError(id, field, "missing file " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError(id, field, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::optional<Span> marker_span(std::string_view text) {
  if (count_occurrences(text, kBugStart) != 1 || count_occurrences(text, kBugEnd) != 1)
    return std::nullopt;
  auto s = text.find(kBugStart);
  auto e = text.find(kBugEnd);
  if (e < s + kBugStart.size()) return std::nullopt;
  return Span{s, e + kBugEnd.size()};
}

inline int positive_int(const nlohmann::json& j, const char* key, int fallback,
                        const std::string& id) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() <= 0)
    throw ManifestError(id, key, "must be a positive integer");
  return v.get<int>();
}

inline std::string required_string(const nlohmann::json& j, const char* key,
                                   const std::string& id) {
  if (!j.contains(key) || !j.at(key).is_string())
    throw ManifestError(id, key, "missing or not a string");
  return j.at(key).get<std::string>();
}

// A test entry is either inline source, a path relative to the manifest
// directory, or an explicit {"source": ...} / {"path": ...} object. A bare
// string is read as a path only when it names an existing regular file.
inline std::string resolve_test_source(const nlohmann::json& v,
                                       const std::filesystem::path& base,
                                       const std::string& id, const std::string& name) {
  const std::string field = "tests." + name;
  if (v.is_object()) {
    if (v.contains("source") && v.at("source").is_string())
      return v.at("source").get<std::string>();
    if (v.contains("path") && v.at("path").is_string())
      return read_text_file(base / v.at("path").get<std::string>(), id, field);
    throw ManifestError(id, field, "expected \"source\" or \"path\"");
  }
  if (!v.is_string()) throw ManifestError(id, field, "must be a string or object");
  auto s = v.get<std::string>();
  if (!s.empty() && s.size() < 4096 && s.find('\n') == std::string::npos) {
    std::error_code ec;
    auto candidate = base / s;
    if (std::filesystem::is_regular_file(candidate, ec))
      return read_text_file(candidate, id, field);
  }
  return s;
}

inline bool is_within(const std::filesystem::path& child, const std::filesystem::path& root) {
  auto rel = child.lexically_relative(root);
  return !rel.empty() && *rel.begin() != "..";
}

inline Problem parse_problem(const nlohmann::json& j, const std::filesystem::path& base,
                             const BenchmarkManifest& m) {
  namespace fs = std::filesystem;
  if (!j.is_object()) throw ManifestError("", "problems", "entry is not an object");
  Problem p;
  p.id = required_string(j, "id", "");
  if (p.id.empty()) throw ManifestError("", "id", "must be non-empty");

  p.workspace_template = m.workspace_template;
  if (j.contains("workspace_template")) {
    auto w = required_string(j, "workspace_template", p.id);
    if (!w.empty()) p.workspace_template = (base / w).lexically_normal();
  }

  std::optional<fs::path> source_path;
  if (j.contains("source_file")) {
    source_path = (base / required_string(j, "source_file", p.id)).lexically_normal();
    p.source_text = read_text_file(*source_path, p.id, "source_file");
  } else if (j.contains("source")) {
    p.source_text = required_string(j, "source", p.id);
  } else {
    throw ManifestError(p.id, "source_file", "missing");
  }

  if (j.contains("buggy_function_file"))
    p.buggy_function_text =
        read_text_file(base / required_string(j, "buggy_function_file", p.id), p.id,
                       "buggy_function_file");
  else if (j.contains("buggy_function"))
    p.buggy_function_text = required_string(j, "buggy_function", p.id);
  else
    throw ManifestError(p.id, "buggy_function_file", "missing");

  auto bug = marker_span(p.source_text);
  if (!bug)
    throw ManifestError(p.id, "source_file",
                        "source must contain exactly one <bug_start> followed by one <bug_end>");
  p.bug_region = *bug;
  if (!marker_span(p.buggy_function_text))
    throw ManifestError(p.id, "buggy_function_file",
                        "buggy function must contain exactly one <bug_start> followed by one "
                        "<bug_end>");

  if (j.contains("replace_range")) {
    const auto& r = j.at("replace_range");
    auto offset = [](const nlohmann::json& v) { return v.is_number_integer() && v >= 0; };
    if (!r.is_array() || r.size() != 2 || !offset(r[0]) || !offset(r[1]))
      throw ManifestError(p.id, "replace_range", "expected [begin, end]");
    Span s{r[0].get<std::size_t>(), r[1].get<std::size_t>()};
    if (s.begin > s.end || s.end > p.source_text.size() || s.begin > p.bug_region.begin ||
        s.end < p.bug_region.end)
      throw ManifestError(p.id, "replace_range", "range must lie in the source and cover the "
                                                 "bug markers");
    p.replace_region = s;
    p.replace_region_explicit = true;
  } else {
    auto n = count_occurrences(p.source_text, p.buggy_function_text);
    if (n != 1)
      throw ManifestError(p.id, "buggy_function_file",
                          "buggy function text occurs " + std::to_string(n) +
                              " times in the source; give replace_range to disambiguate");
    auto at = p.source_text.find(p.buggy_function_text);
    p.replace_region = Span{at, at + p.buggy_function_text.size()};
  }

  p.build_command = required_string(j, "build_command", p.id);
  p.test_command = required_string(j, "test_command", p.id);
  if (p.test_command.empty()) throw ManifestError(p.id, "test_command", "must be non-empty");

  if (!j.contains("tests") || !j.at("tests").is_object() || j.at("tests").empty())
    throw ManifestError(p.id, "tests", "must be a non-empty object");
  for (const auto& [name, v] : j.at("tests").items())
    p.test_index.emplace(name, resolve_test_source(v, base, p.id, name));

  p.timeout_seconds = positive_int(j, "timeout_seconds", m.defaults.test_timeout_seconds, p.id);
  p.build_timeout_seconds =
      positive_int(j, "build_timeout_seconds", m.defaults.build_timeout_seconds, p.id);

  if (j.contains("target_file")) {
    p.target_file = fs::path(required_string(j, "target_file", p.id)).lexically_normal();
    if (p.target_file.is_absolute() || !is_within(p.target_file, "."))
      throw ManifestError(p.id, "target_file", "must be a relative path inside the workspace");
  } else if (source_path && !p.workspace_template.empty() &&
             is_within(*source_path, p.workspace_template)) {
    p.target_file = source_path->lexically_relative(p.workspace_template);
  } else if (source_path) {
    p.target_file = source_path->filename();
  } else {
    throw ManifestError(p.id, "target_file", "required when the source is inline");
  }
  return p;
}

}  // namespace detail

inline BenchmarkManifest parse_manifest(const nlohmann::json& doc,
                                        const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ManifestError("", "", "top level must be an object");
  BenchmarkManifest m;
  m.name = detail::required_string(doc, "name", "");
  if (doc.contains("workspace_template")) {
    auto w = detail::required_string(doc, "workspace_template", "");
    if (!w.empty()) m.workspace_template = (base_dir / w).lexically_normal();
  }
  if (doc.contains("defaults")) {
    const auto& d = doc.at("defaults");
    if (!d.is_object()) throw ManifestError("", "defaults", "must be an object");
    m.defaults.test_timeout_seconds =
        detail::positive_int(d, "test_timeout_seconds", kDefaultTestTimeoutSeconds, "");
    m.defaults.build_timeout_seconds =
        detail::positive_int(d, "build_timeout_seconds", kDefaultBuildTimeoutSeconds, "");
  }
  if (doc.contains("harness")) {
    const auto& h = doc.at("harness");
    if (!h.is_object()) throw ManifestError("", "harness", "must be an object");
    if (h.contains("failure_regex"))
      m.harness.failure_regex = detail::required_string(h, "failure_regex", "");
    if (h.contains("timeout_regex"))
      m.harness.timeout_regex = detail::required_string(h, "timeout_regex", "");
    if (h.contains("running_regex"))
      m.harness.running_regex = detail::required_string(h, "running_regex", "");
  }
  if (!doc.contains("problems") || !doc.at("problems").is_array())
    throw ManifestError("", "problems", "missing or not an array");

  std::set<std::string> seen;
  for (const auto& entry : doc.at("problems")) {
    auto p = detail::parse_problem(entry, base_dir, m);
    if (!seen.insert(p.id).second) throw ManifestError(p.id, "id", "duplicate problem id");
    m.problems.push_back(std::move(p));
  }
  return m;
}

inline BenchmarkManifest load_manifest(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec))
    throw ManifestError("", "", "missing file " + path.string());
  std::ifstream in(path);
  if (!in) throw ManifestError("", "", "cannot read " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ManifestError("", "", std::string("malformed JSON: ") + e.what());
  }
  auto base = std::filesystem::absolute(path).parent_path();
  return parse_manifest(doc, base);
}

// Self-contained form: every text inlined, every path absolute. Reloading
// it reproduces the manifest exactly.
inline nlohmann::json manifest_to_json(const BenchmarkManifest& m) {
  nlohmann::json doc;
  doc["name"] = m.name;
  doc["workspace_template"] = m.workspace_template.string();
  doc["defaults"] = {{"test_timeout_seconds", m.defaults.test_timeout_seconds},
                     {"build_timeout_seconds", m.defaults.build_timeout_seconds}};
  doc["harness"] = {{"failure_regex", m.harness.failure_regex},
                    {"timeout_regex", m.harness.timeout_regex},
                    {"running_regex", m.harness.running_regex}};
  auto problems = nlohmann::json::array();
  for (const auto& p : m.problems) {
    nlohmann::json e;
    e["id"] = p.id;
    e["source"] = p.source_text;
    e["buggy_function"] = p.buggy_function_text;
    if (p.replace_region_explicit)
      e["replace_range"] = {p.replace_region.begin, p.replace_region.end};
    e["build_command"] = p.build_command;
    e["test_command"] = p.test_command;
    nlohmann::json tests = nlohmann::json::object();
    for (const auto& [name, src] : p.test_index) tests[name] = {{"source", src}};
    e["tests"] = std::move(tests);
    e["timeout_seconds"] = p.timeout_seconds;
    e["build_timeout_seconds"] = p.build_timeout_seconds;
    e["target_file"] = p.target_file.generic_string();
    e["workspace_template"] = p.workspace_template.string();
    problems.push_back(std::move(e));
  }
  doc["problems"] = std::move(problems);
  return doc;
}

}  // namespace iterfix
