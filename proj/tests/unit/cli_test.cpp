#include <gtest/gtest.h>

#include <cstdio>

#include "support/support.hpp"

using namespace iterfix;
using namespace iterfix::testing;

namespace {

struct Exec {
  int status;
  std::string output;
};

Exec cli(const std::string& args) {
  std::string cmd = std::string(ITERFIX_CLI_PATH) + " " + args + " 2>&1";
  Exec r{-1, {}};
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) r.output.append(buf, n);
  int st = ::pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string mini_run_args(const TempDir& dir, const std::string& out, int workers) {
  return "run --manifest " + (mini_dir() / "manifest.json").string() +
         " --strategy C --backend scripted:" + (mini_dir() / "fixture_strategy_c.json").string() +
         " --model toy --workers " + std::to_string(workers) + " --out " + (dir / out).string() +
         " --workdir " + (dir / "ws").string();
}

}  // namespace

TEST(Cli, RunAnalyzeReport) {
  TempDir dir;
  auto run = cli(mini_run_args(dir, "rec.jsonl", 2));
  ASSERT_EQ(run.status, 0) << run.output;
  EXPECT_NE(run.output.find("mini-C-toy: 3/3"), std::string::npos);

  auto set = load_records(dir / "rec.jsonl");
  EXPECT_EQ(set.sessions.size(), 3u);
  EXPECT_EQ(set.attempts.size(), 30u);
  for (const auto& s : set.sessions) EXPECT_EQ(s.first_plausible_global_position, 6);
  auto meta = nlohmann::json::parse(read_file(dir / "rec.jsonl.meta.json"));
  EXPECT_EQ(meta["run_id"], "mini-C-toy");
  EXPECT_EQ(meta["timings"].size(), 30u);

  auto analyze = cli("analyze --records " + (dir / "rec.jsonl").string() + " --out " +
                     (dir / "sum.json").string());
  ASSERT_EQ(analyze.status, 0) << analyze.output;
  auto sum = nlohmann::json::parse(read_file(dir / "sum.json"));
  ASSERT_EQ(sum["runs"].size(), 1u);
  EXPECT_EQ(sum["runs"][0]["plausible_problem_count"], 3);
  EXPECT_EQ(sum["runs"][0]["first_plausible_counts"][5], 3);

  auto report = cli("report --summaries " + (dir / "sum.json").string() + " --format csv --out-dir " +
                    (dir / "report").string());
  ASSERT_EQ(report.status, 0) << report.output;
  EXPECT_NE(report.output.find("mini,toy,C,\"5,5,1\",3,3"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "report"));
}

TEST(Cli, RecordsDoNotDependOnWorkerCount) {
  TempDir dir;
  ASSERT_EQ(cli(mini_run_args(dir, "w1.jsonl", 1)).status, 0);
  ASSERT_EQ(cli(mini_run_args(dir, "w3.jsonl", 3)).status, 0);
  EXPECT_EQ(read_file(dir / "w1.jsonl"), read_file(dir / "w3.jsonl"));
}

TEST(Cli, AbortedSessionsGiveExitCodeTwo) {
  TempDir dir;
  write_file(dir / "fx.json", R"({"add": [["no code"]]})");
  auto r = cli("run --manifest " + (mini_dir() / "manifest.json").string() +
               " --strategy C --backend scripted:" + (dir / "fx.json").string() +
               " --model toy --out " + (dir / "rec.jsonl").string());
  EXPECT_EQ(r.status, 2) << r.output;
  auto set = load_records(dir / "rec.jsonl");
  EXPECT_EQ(set.sessions.size(), 3u);
  for (const auto& s : set.sessions) EXPECT_TRUE(s.aborted);
}

TEST(Cli, BadArgumentsFail) {
  TempDir dir;
  EXPECT_NE(cli("run --manifest " + (mini_dir() / "manifest.json").string() +
                " --strategy 9,9,9 --backend scripted:x --model toy --out " +
                (dir / "r").string())
                .status,
            0);
  EXPECT_NE(cli("run --manifest /nonexistent.json --backend scripted:x --model toy --out " +
                (dir / "r").string())
                .status,
            0);
  EXPECT_NE(cli("report --summaries " + (dir / "none.json").string()).status, 0);
  EXPECT_NE(cli("").status, 0);
}
