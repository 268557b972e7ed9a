#include <gtest/gtest.h>

#include "support/support.hpp"

using namespace iterfix;
using namespace iterfix::testing;

namespace {

struct Mini {
  BenchmarkManifest manifest = load_manifest(mini_dir() / "manifest.json");
  nlohmann::json fixes = nlohmann::json::parse(read_file(mini_dir() / "reference_fixes.json"));
  WorkspaceValidator validator{manifest.harness};

  Problem problem(const std::string& id) const { return *manifest.find(id); }
  Verdict run(const std::string& id, const std::string& fn) const {
    auto p = problem(id);
    return validator(p, splice(p, fn));
  }
};

}  // namespace

TEST(WorkspaceValidator, ReferenceFixesArePlausible) {
  Mini m;
  for (const auto& p : m.manifest.problems)
    EXPECT_EQ(m.run(p.id, m.fixes[p.id].get<std::string>()), Verdict::plausible()) << p.id;
}

TEST(WorkspaceValidator, UnchangedBugFailsFirstTest) {
  Mini m;
  EXPECT_EQ(m.run("add", strip_markers(m.problem("add").buggy_function_text)),
            Verdict::wrong("testAddSmall"));
  EXPECT_EQ(m.run("max", "max() {\n  echo \"$2\"\n}"), Verdict::wrong("testMaxFirst"));
}

TEST(WorkspaceValidator, SyntaxErrorIsUncompilable) {
  Mini m;
  auto v = m.run("add", "add() {\n  echo $(( $1 + $2 )\n");
  EXPECT_EQ(v.kind, VerdictKind::Uncompilable);
  EXPECT_FALSE(v.detail.empty());
}

TEST(WorkspaceValidator, HangingPatchTimesOutNamingTheRunningTest) {
  Mini m;
  auto p = m.problem("add");
  p.timeout_seconds = 2;
  auto started = std::chrono::steady_clock::now();
  auto v = m.validator(p, splice(p, "add() {\n  while :; do :; done\n}"));
  EXPECT_EQ(v, Verdict::timeout("testAddSmall"));
  EXPECT_LT(std::chrono::steady_clock::now() - started, std::chrono::seconds(10));
}

TEST(WorkspaceValidator, BuildTimeoutIsUncompilable) {
  Mini m;
  auto p = m.problem("add");
  p.build_command = "sleep 30";
  p.build_timeout_seconds = 1;
  auto v = m.validator(p, splice(p, m.fixes["add"].get<std::string>()));
  EXPECT_EQ(v.kind, VerdictKind::Uncompilable);
  EXPECT_NE(v.detail.find("timed out"), std::string::npos);
}

TEST(WorkspaceValidator, SilentHarnessFailureIsInfrastructureError) {
  Mini m;
  auto p = m.problem("add");
  p.test_command = "exit 2";
  EXPECT_THROW(m.validator(p, strip_markers(p.source_text)), InfrastructureError);
}

TEST(WorkspaceValidator, WorkspacesAreRemovedUnlessKept) {
  Mini m;
  TempDir root;
  WorkspaceValidator v(m.manifest.harness, {root.path(), false});
  auto p = m.problem("abs");
  v(p, splice(p, m.fixes["abs"].get<std::string>()));
  EXPECT_TRUE(std::filesystem::is_empty(root.path()));
  WorkspaceValidator keep(m.manifest.harness, {root.path(), true});
  keep(p, splice(p, m.fixes["abs"].get<std::string>()));
  EXPECT_FALSE(std::filesystem::is_empty(root.path()));
}

TEST(HarnessAdapter, FirstReportedFailureDecides) {
  HarnessAdapter a(HarnessFormat{});
  auto p = make_problem("P", "<bug_start>x<bug_end>");
  CommandResult r{1, false, "RUN testA\nFAIL testA\nRUN testB\nTIMEOUT testB\n", {}};
  EXPECT_EQ(a.classify(r, p), Verdict::wrong("testA"));
  r.output = "RUN testB\r\nTIMEOUT testB\r\nFAIL testA\r\n";
  EXPECT_EQ(a.classify(r, p), Verdict::timeout("testB"));
  r.output = "all good";
  EXPECT_EQ(a.classify(r, p), std::nullopt);
  r.exit_code = 0;
  EXPECT_EQ(a.classify(r, p), Verdict::plausible());
}

TEST(HarnessAdapter, WallClockKillBlamesLastRunningTest) {
  HarnessAdapter a(HarnessFormat{});
  auto p = make_problem("P", "<bug_start>x<bug_end>");
  CommandResult r{-1, true, "RUN testA\nPASS testA\nRUN testB\n", {}};
  EXPECT_EQ(a.classify(r, p), Verdict::timeout("testB"));
  r.output.clear();
  EXPECT_EQ(a.classify(r, p), Verdict::timeout("testA"));
}

TEST(HarnessAdapter, InvalidRegexIsAManifestError) {
  HarnessFormat f;
  f.failure_regex = "(";
  EXPECT_THROW(HarnessAdapter{f}, ManifestError);
}

TEST(TruncateCompileLog, KeepsShortLogs) {
  EXPECT_EQ(truncate_compile_log("a\nb\n"), "a\nb\n");
  EXPECT_EQ(truncate_compile_log(""), "");
}

TEST(TruncateCompileLog, CutsAtFiftyLines) {
  std::string log;
  for (int k = 1; k <= 80; ++k) log += "line " + std::to_string(k) + "\n";
  auto out = truncate_compile_log(log);
  EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), 50);
  EXPECT_TRUE(out.ends_with("line 50\n(truncated)"));
}

TEST(TruncateCompileLog, CutsAtFourThousandChars) {
  std::string log(10000, 'x');
  auto out = truncate_compile_log(log);
  EXPECT_EQ(out, std::string(4000, 'x') + "\n(truncated)");
  std::string exact(4000, 'y');
  EXPECT_EQ(truncate_compile_log(exact), exact);
}

TEST(ExtractFeedback, Variants) {
  auto p = make_problem("P", "<bug_start>x<bug_end>");
  EXPECT_EQ(extract_feedback(p, Verdict::plausible()).variant, FeedbackVariant::None);
  EXPECT_EQ(extract_feedback(p, Verdict::wrong("testA")),
            (Feedback{FeedbackVariant::FailingTest, "assertA"}));
  EXPECT_EQ(extract_feedback(p, Verdict::timeout("testB")),
            (Feedback{FeedbackVariant::FailingTest, "assertB"}));
  EXPECT_EQ(extract_feedback(p, Verdict::wrong("testGone")),
            (Feedback{FeedbackVariant::FailingTest, "testGone"}));
  EXPECT_EQ(extract_feedback(p, Verdict::uncompilable("E1\nE2")),
            (Feedback{FeedbackVariant::CompileErrors, "E1\nE2"}));
}

TEST(VerdictKind, StringRoundTrip) {
  for (auto k : {VerdictKind::Plausible, VerdictKind::Wrong, VerdictKind::Timeout,
                 VerdictKind::Uncompilable})
    EXPECT_EQ(verdict_kind_from_string(to_string(k)), k);
  EXPECT_THROW(verdict_kind_from_string("Maybe"), Error);
}
