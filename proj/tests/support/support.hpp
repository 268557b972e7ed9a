#pragma once

// Helpers shared by the unit and acceptance suites.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "iterfix/iterfix.hpp"

namespace iterfix::testing {

inline std::filesystem::path source_dir() { return ITERFIX_SOURCE_DIR; }
inline std::filesystem::path mini_dir() { return source_dir() / "benchmarks" / "mini"; }

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

class TempDir {
 public:
  TempDir() {
    auto root = std::filesystem::temp_directory_path() / "iterfix-test";
    std::filesystem::create_directories(root);
    std::string pattern = (root / "t-XXXXXX").string();
    if (!::mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// A problem built in memory: source "prefix + function + suffix".
inline Problem make_problem(const std::string& id, const std::string& function_with_markers,
                            const std::string& prefix = "class C {\n",
                            const std::string& suffix = "\n}\n") {
  nlohmann::json j = {{"name", "mem"},
                      {"problems",
                       {{{"id", id},
                         {"source", prefix + function_with_markers + suffix},
                         {"buggy_function", function_with_markers},
                         {"target_file", "C.java"},
                         {"build_command", "true"},
                         {"test_command", "true"},
                         {"tests", {{"testA", "assertA"}, {"testB", "assertB"}}}}}}};
  return parse_manifest(j, std::filesystem::temp_directory_path()).problems.front();
}

// Validator that decides by the patched source, logging each call.
class ScriptedValidator {
 public:
  using Rule = std::function<Verdict(const Problem&, const std::string&)>;
  explicit ScriptedValidator(Rule rule) : rule_(std::move(rule)) {}

  Verdict operator()(const Problem& p, const std::string& src) const {
    {
      std::lock_guard lock(mutex_);
      calls_.push_back(p.id + ":" + src);
    }
    return rule_(p, src);
  }

  std::vector<std::string> calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
  }

 private:
  Rule rule_;
  mutable std::mutex mutex_;
  mutable std::vector<std::string> calls_;
};

// Verdict encoded in the patch text itself: code "PLAUSIBLE", "WRONG:<test>",
// "TIMEOUT:<test>" or anything else (Uncompilable with that text).
inline Verdict verdict_from_code(const std::string& code) {
  if (code.find("PLAUSIBLE") != std::string::npos) return Verdict::plausible();
  if (auto at = code.find("WRONG:"); at != std::string::npos)
    return Verdict::wrong(code.substr(at + 6, code.find_first_of(" \n;", at + 6) - (at + 6)));
  if (auto at = code.find("TIMEOUT:"); at != std::string::npos)
    return Verdict::timeout(code.substr(at + 8, code.find_first_of(" \n;", at + 8) - (at + 8)));
  return Verdict::uncompilable("error: " + code);
}

inline std::string fenced(const std::string& code, const std::string& tag = "java") {
  return "```" + tag + "\n" + code + "\n```";
}

// Records a synthetic attempt for analytics tests.
inline AttemptRecord attempt(const std::string& run_id, const std::string& problem, int position,
                             std::optional<VerdictKind> kind, const std::string& manifest = "m",
                             const std::string& model = "toy") {
  AttemptRecord a;
  a.run = {run_id, manifest, model};
  a.problem_id = problem;
  a.strategy_label = "A";
  a.plan = {10, 0, 0};
  a.turn_index = 0;
  a.rank_in_turn = position;
  a.global_position = position;
  a.raw_output = "x";
  a.evaluated = kind.has_value();
  if (kind) a.verdict = Verdict{*kind, *kind == VerdictKind::Plausible ? "" : "t"};
  return a;
}

}  // namespace iterfix::testing
