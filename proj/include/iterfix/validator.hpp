#pragma once

// Compile-and-test validation of a patched program and the four-way verdict
// that drives the feedback loop.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <regex>
#include <string>
#include <string_view>

#include <unistd.h>

#include "iterfix/benchmark.hpp"
#include "iterfix/error.hpp"
#include "iterfix/process.hpp"

namespace iterfix {

enum class VerdictKind { Plausible, Wrong, Timeout, Uncompilable };

inline std::string_view to_string(VerdictKind k) {
  switch (k) {
    case VerdictKind::Plausible: return "Plausible";
    case VerdictKind::Wrong: return "Wrong";
    case VerdictKind::Timeout: return "Timeout";
    case VerdictKind::Uncompilable: return "Uncompilable";
  }
  return "?";
}

inline VerdictKind verdict_kind_from_string(std::string_view s) {
  if (s == "Plausible") return VerdictKind::Plausible;
  if (s == "Wrong") return VerdictKind::Wrong;
  if (s == "Timeout") return VerdictKind::Timeout;
  if (s == "Uncompilable") return VerdictKind::Uncompilable;
  throw Error("unknown verdict kind '" + std::string(s) + "'");
}

// detail: failing test name (Wrong, Timeout), error log excerpt
// (Uncompilable), empty (Plausible).
struct Verdict {
  VerdictKind kind = VerdictKind::Plausible;
  std::string detail;

  static Verdict plausible() { return {VerdictKind::Plausible, {}}; }
  static Verdict wrong(std::string test) { return {VerdictKind::Wrong, std::move(test)}; }
  static Verdict timeout(std::string test) { return {VerdictKind::Timeout, std::move(test)}; }
  static Verdict uncompilable(std::string log) {
    return {VerdictKind::Uncompilable, std::move(log)};
  }

  bool is_plausible() const { return kind == VerdictKind::Plausible; }
  bool operator==(const Verdict&) const = default;
};

inline constexpr std::string_view kNoCodeBlockFeedback = "model output contained no code block";

enum class FeedbackVariant { None, FailingTest, CompileErrors };

struct Feedback {
  FeedbackVariant variant = FeedbackVariant::None;
  std::string text;
  bool operator==(const Feedback&) const = default;
};

inline constexpr std::size_t kCompileLogMaxLines = 50;
inline constexpr std::size_t kCompileLogMaxChars = 4000;
inline constexpr std::string_view kTruncatedNote = "(truncated)";

// Keeps the first 50 lines or 4000 characters, whichever is shorter, and
// notes the cut.
inline std::string truncate_compile_log(std::string_view log) {
  std::size_t cut = log.size();
  std::size_t lines = 0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (log[i] == '\n' && ++lines == kCompileLogMaxLines) {
      cut = i;
      break;
    }
  }
  cut = std::min(cut, kCompileLogMaxChars);
  if (cut >= log.size() || (cut + 1 == log.size() && log.back() == '\n'))
    return std::string(log);
  std::string out(log.substr(0, cut));
  if (!out.empty() && out.back() != '\n') out.push_back('\n');
  out.append(kTruncatedNote);
  return out;
}

// Failing-test feedback carries the test's source; a name missing from the
// test index degrades to the bare name.
inline Feedback extract_feedback(const Problem& problem, const Verdict& verdict) {
  switch (verdict.kind) {
    case VerdictKind::Plausible: return {};
    case VerdictKind::Wrong:
    case VerdictKind::Timeout: {
      auto it = problem.test_index.find(verdict.detail);
      return {FeedbackVariant::FailingTest,
              it == problem.test_index.end() ? verdict.detail : it->second};
    }
    case VerdictKind::Uncompilable: return {FeedbackVariant::CompileErrors, verdict.detail};
  }
  return {};
}

// Compiled form of a HarnessFormat.
class HarnessAdapter {
 public:
  explicit HarnessAdapter(const HarnessFormat& f)
      : failure_(compile(f.failure_regex, "failure_regex")),
        timeout_(compile(f.timeout_regex, "timeout_regex")),
        running_(compile(f.running_regex, "running_regex")) {}

  // Interprets a finished test run. Returns nullopt when the run neither
  // succeeded nor reported a failing or timed-out test.
  std::optional<Verdict> classify(const CommandResult& run, const Problem& problem) const {
    std::optional<std::string> last_running;
    std::size_t pos = 0;
    const auto& out = run.output;
    while (pos < out.size()) {
      auto nl = out.find('\n', pos);
      auto end = nl == std::string::npos ? out.size() : nl;
      std::string line = out.substr(pos, end - pos);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::smatch m;
      if (std::regex_search(line, m, timeout_)) return Verdict::timeout(name_of(m));
      if (std::regex_search(line, m, failure_)) return Verdict::wrong(name_of(m));
      if (std::regex_search(line, m, running_)) last_running = name_of(m);
      if (nl == std::string::npos) break;
      pos = nl + 1;
    }
    if (run.timed_out) {
      if (last_running) return Verdict::timeout(*last_running);
      // Nothing identifies the running test; blame the first one.
      return Verdict::timeout(problem.test_index.begin()->first);
    }
    if (run.exit_code == 0) return Verdict::plausible();
    return std::nullopt;
  }

 private:
  static std::regex compile(const std::string& pattern, const char* field) {
    try {
      return std::regex(pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw ManifestError("", std::string("harness.") + field,
                          "invalid regex: " + std::string(e.what()));
    }
  }
  static std::string name_of(const std::smatch& m) {
    return m.size() > 1 && m[1].matched ? m[1].str() : m[0].str();
  }

  std::regex failure_;
  std::regex timeout_;
  std::regex running_;
};

struct ValidatorOptions {
  std::filesystem::path work_root;  // defaults to the system temp directory
  bool keep_workspaces = false;
};

// Owns a temporary directory and removes it on destruction.
class Workspace {
 public:
  explicit Workspace(const std::filesystem::path& root, bool keep = false) : keep_(keep) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(root, ec);
    std::string pattern = (root / "iterfix-ws-XXXXXX").string();
    if (!::mkdtemp(pattern.data()))
      throw InfrastructureError("cannot create workspace under " + root.string());
    path_ = pattern;
  }
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;
  ~Workspace() {
    if (!keep_) {
      std::error_code ec;
      std::filesystem::remove_all(path_, ec);
    }
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  bool keep_;
};

class WorkspaceValidator {
 public:
  explicit WorkspaceValidator(const HarnessFormat& harness, ValidatorOptions options = {})
      : adapter_(harness), options_(std::move(options)) {
    if (options_.work_root.empty())
      options_.work_root = std::filesystem::temp_directory_path() / "iterfix";
  }

  Verdict operator()(const Problem& problem, const std::string& patched_source) const {
    return validate(problem, patched_source);
  }

  Verdict validate(const Problem& problem, const std::string& patched_source) const {
    Workspace ws(options_.work_root, options_.keep_workspaces);
    prepare(problem, ws.path());
    return validate_in(problem, patched_source, ws.path());
  }

  // Copies the problem's project skeleton into an empty directory.
  static void prepare(const Problem& problem, const std::filesystem::path& workspace) {
    namespace fs = std::filesystem;
    if (problem.workspace_template.empty()) return;
    std::error_code ec;
    if (!fs::is_directory(problem.workspace_template, ec))
      throw InfrastructureError("workspace template " + problem.workspace_template.string() +
                                " is not a directory");
    fs::copy(problem.workspace_template, workspace,
             fs::copy_options::recursive | fs::copy_options::copy_symlinks |
                 fs::copy_options::overwrite_existing,
             ec);
    if (ec)
      throw InfrastructureError("cannot copy workspace template: " + ec.message());
  }

  // workspace must already hold a fresh copy of the project skeleton.
  Verdict validate_in(const Problem& problem, const std::string& patched_source,
                      const std::filesystem::path& workspace) const {
    namespace fs = std::filesystem;
    auto target = workspace / problem.target_file;
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    {
      std::ofstream out(target, std::ios::binary | std::ios::trunc);
      if (!out) throw InfrastructureError("cannot write " + target.string());
      out << patched_source;
      if (!out) throw InfrastructureError("cannot write " + target.string());
    }

    if (!problem.build_command.empty()) {
      auto build = run_command(problem.build_command, workspace,
                               std::chrono::seconds(problem.build_timeout_seconds));
      if (build.timed_out)
        return Verdict::uncompilable(truncate_compile_log(
            "build timed out after " + std::to_string(problem.build_timeout_seconds) + "s\n" +
            build.output));
      if (build.exit_code != 0) {
        auto log = build.output.empty()
                       ? "build failed with exit code " + std::to_string(build.exit_code)
                       : build.output;
        return Verdict::uncompilable(truncate_compile_log(log));
      }
    }

    auto tests = run_command(problem.test_command, workspace,
                             std::chrono::seconds(problem.timeout_seconds));
    auto verdict = adapter_.classify(tests, problem);
    if (!verdict)
      throw InfrastructureError("test harness for problem '" + problem.id + "' exited with " +
                                std::to_string(tests.exit_code) +
                                " without reporting a failing test");
    return *verdict;
  }

 private:
  HarnessAdapter adapter_;
  ValidatorOptions options_;
};

}  // namespace iterfix
