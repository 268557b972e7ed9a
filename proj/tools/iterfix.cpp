// iterfix: run iterative repair over a benchmark manifest and analyze the
// resulting records.
//
//   iterfix run --manifest m.json --strategy C --backend scripted:fixture.json
//               --model toy --workers 4 --out records.jsonl
//   iterfix analyze --records records.jsonl --out summary.json
//   iterfix report --summaries summary.json --format text

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "iterfix/iterfix.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hostname() {
  char buf[256] = {};
  if (::gethostname(buf, sizeof buf - 1) != 0) return "unknown";
  return buf;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw iterfix::Error("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw iterfix::Error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw iterfix::Error("cannot write " + path.string());
  out << text;
}

struct RunArgs {
  std::string manifest;
  std::string strategy = "A";
  std::string backend;
  std::string model;
  int workers = 1;
  std::string out;
  std::string run_id;
  std::string workdir;
  bool keep_workspaces = false;
  std::size_t max_transcript_chars = 0;
  std::string decoding;
  std::string auth_env = "ITERFIX_API_KEY";
  bool emulate_n = false;
  int max_attempts = 3;
};

std::unique_ptr<iterfix::Backend> make_backend(const RunArgs& a) {
  auto colon = a.backend.find(':');
  if (colon == std::string::npos)
    throw iterfix::Error("--backend must be scripted:<path> or remote:<url>");
  auto kind = a.backend.substr(0, colon);
  auto target = a.backend.substr(colon + 1);
  if (kind == "scripted")
    return std::make_unique<iterfix::ScriptedBackend>(iterfix::ScriptedBackend::from_file(target));
  if (kind == "remote") {
    iterfix::RemoteConfig cfg;
    cfg.endpoint = target;
    cfg.model_id = a.model;
    if (const char* key = std::getenv(a.auth_env.c_str())) cfg.auth = key;
    if (!a.decoding.empty()) cfg.decoding = read_json_file(a.decoding);
    cfg.emulate_n_by_repeats = a.emulate_n;
    cfg.max_attempts = a.max_attempts;
    return std::make_unique<iterfix::RemoteBackend>(std::move(cfg));
  }
  throw iterfix::Error("unknown backend kind '" + kind + "'");
}

int cmd_run(const RunArgs& a) {
  auto manifest = iterfix::load_manifest(a.manifest);
  auto plan = iterfix::parse_plan(a.strategy);
  auto backend = make_backend(a);

  iterfix::SessionOptions options;
  options.run.manifest = manifest.name;
  options.run.model = a.model;
  options.run.run_id =
      a.run_id.empty() ? manifest.name + "-" + plan.label() + "-" + a.model : a.run_id;
  if (a.max_transcript_chars > 0) options.max_transcript_chars = a.max_transcript_chars;

  iterfix::ValidatorOptions vopts;
  if (!a.workdir.empty()) vopts.work_root = a.workdir;
  vopts.keep_workspaces = a.keep_workspaces;
  iterfix::WorkspaceValidator validator(manifest.harness, vopts);

  iterfix::OrderedRecordSink sink(a.out);
  json timings = json::array();
  std::mutex timing_mutex;
  std::map<std::size_t, json> timing_by_index;

  const auto started = utc_now();
  auto result = iterfix::run_benchmark(
      manifest, plan, *backend, validator, a.workers, options,
      [&](std::size_t idx, const iterfix::SessionResult& s) {
        json t = json::array();
        for (const auto& at : s.attempts)
          t.push_back({{"problem_id", at.problem_id},
                       {"global_position", at.global_position},
                       {"generate_ms", at.timing.generate_ms},
                       {"validate_ms", at.timing.validate_ms}});
        {
          std::lock_guard lock(timing_mutex);
          timing_by_index[idx] = std::move(t);
        }
        sink.commit(idx, iterfix::session_lines(s));
      });
  for (auto& [idx, t] : timing_by_index)
    for (auto& row : t) timings.push_back(std::move(row));

  json meta;
  meta["run_id"] = options.run.run_id;
  meta["manifest"] = {{"name", manifest.name}, {"path", fs::absolute(a.manifest).string()}};
  meta["model"] = a.model;
  meta["strategy"] = {{"label", plan.label()},
                      {"plan",
                       {plan.initial_outputs(), plan.outputs_per_iteration(),
                        plan.feedback_iterations()}}};
  meta["backend"] = backend->describe();
  meta["workers"] = a.workers;
  meta["started_at"] = started;
  meta["finished_at"] = utc_now();
  meta["host"] = hostname();
  meta["failed_problem_ids"] = result.failed_problem_ids;
  meta["timings"] = std::move(timings);
  write_text_file(a.out + ".meta.json", meta.dump(2) + "\n");

  int solved = 0;
  for (const auto& s : result.sessions) solved += s.solved ? 1 : 0;
  std::cout << options.run.run_id << ": " << solved << "/" << result.sessions.size()
            << " problems with a plausible patch\n";
  if (!result.failed_problem_ids.empty()) {
    std::cerr << "sessions aborted:";
    for (const auto& id : result.failed_problem_ids) std::cerr << ' ' << id;
    std::cerr << '\n';
    for (const auto& s : result.sessions)
      if (s.aborted) std::cerr << "  " << s.problem_id << ": " << s.error << '\n';
    return 2;
  }
  return 0;
}

// Splits a records file into runs keyed by run id, in order of appearance.
std::vector<iterfix::RecordSet> split_runs(const iterfix::RecordSet& all) {
  std::vector<std::string> order;
  std::map<std::string, iterfix::RecordSet> runs;
  auto slot = [&](const std::string& id) -> iterfix::RecordSet& {
    if (!runs.count(id)) order.push_back(id);
    auto& r = runs[id];
    r.source = all.source;
    return r;
  };
  for (const auto& a : all.attempts) slot(a.run.run_id).attempts.push_back(a);
  for (const auto& s : all.sessions) slot(s.run.run_id).sessions.push_back(s);
  std::vector<iterfix::RecordSet> out;
  for (const auto& id : order) out.push_back(std::move(runs[id]));
  return out;
}

int cmd_analyze(const std::vector<std::string>& files, const std::string& out) {
  json runs = json::array();
  std::vector<iterfix::RunSummary> summaries;
  for (const auto& f : files)
    for (const auto& run : split_runs(iterfix::load_records(f))) {
      summaries.push_back(iterfix::summarize(run));
      runs.push_back(iterfix::to_json(summaries.back()));
    }

  json overlaps = json::object();
  std::map<std::string, std::map<std::string, iterfix::ProblemSet>> by_manifest;
  for (const auto& s : summaries)
    by_manifest[s.run.manifest][s.config_name() + "#" + s.run.run_id] =
        iterfix::ProblemSet(s.solved_ids.begin(), s.solved_ids.end());
  for (const auto& [manifest, group] : by_manifest) {
    if (group.size() > iterfix::kMaxOverlapConfigs) continue;
    auto o = iterfix::overlap_sets(group);
    json regions = json::array();
    for (const auto& r : o.regions) regions.push_back({{"configs", r.members}, {"problems", r.problems}});
    json unique = json::object();
    for (const auto& [name, ids] : o.unique) unique[name] = ids;
    overlaps[manifest] = {{"regions", regions}, {"unique", unique}, {"union", o.all_solved}};
  }

  json doc = {{"schema_version", 1}, {"runs", runs}, {"overlaps", overlaps}};
  write_text_file(out, doc.dump(2) + "\n");
  for (const auto& s : summaries)
    std::cout << s.run.run_id << ": " << s.plausible_problem_count << "/" << s.problem_count
              << " plausible\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& files, const std::string& format,
               const std::string& out_dir) {
  std::vector<iterfix::RunSummary> summaries;
  for (const auto& f : files) {
    auto doc = read_json_file(f);
    const json& runs = doc.is_object() && doc.contains("runs") ? doc.at("runs") : doc;
    if (runs.is_array())
      for (const auto& r : runs) summaries.push_back(iterfix::summary_from_json(r));
    else
      summaries.push_back(iterfix::summary_from_json(runs));
  }
  auto report = iterfix::build_report(summaries);
  auto rendered = iterfix::render_report(report, format);
  if (!out_dir.empty()) {
    fs::path dir(out_dir);
    write_text_file(dir / "counts.csv", iterfix::render_csv(report.counts));
    write_text_file(dir / "histograms.csv", iterfix::render_csv(report.histograms));
    write_text_file(dir / "deltas.csv", iterfix::render_csv(report.deltas));
    write_text_file(dir / "overlaps.csv", iterfix::render_csv(report.overlaps));
    write_text_file(dir / "report.txt", iterfix::render_report(report, "text"));
  }
  std::cout << rendered;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative program repair with execution feedback"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Repair every problem of a benchmark manifest");
  run_cmd->add_option("--manifest", run.manifest, "Benchmark manifest (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--strategy", run.strategy, "Strategy A..G or n_o,n_i,i");
  run_cmd->add_option("--backend", run.backend, "scripted:<fixture.json> or remote:<url>")
      ->required();
  run_cmd->add_option("--model", run.model, "Model identifier")->required();
  run_cmd->add_option("--workers", run.workers, "Concurrent problem sessions")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--out", run.out, "Records file (JSONL)")->required();
  run_cmd->add_option("--seeded-run-id", run.run_id, "Run identifier written into records");
  run_cmd->add_option("--workdir", run.workdir, "Directory for validation workspaces");
  run_cmd->add_flag("--keep-workspaces", run.keep_workspaces, "Do not delete workspaces");
  run_cmd->add_option("--max-transcript-chars", run.max_transcript_chars,
                      "Drop oldest feedback rounds beyond this many characters (0 = no cap)");
  run_cmd->add_option("--decoding", run.decoding, "JSON file of pinned decoding parameters")
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--auth-env", run.auth_env, "Environment variable holding the API key");
  run_cmd->add_flag("--emulate-n-by-repeats", run.emulate_n,
                    "Issue n single-output calls when the provider cannot rank n candidates");
  run_cmd->add_option("--max-attempts", run.max_attempts, "Attempts per remote call")
      ->check(CLI::PositiveNumber);

  std::vector<std::string> records;
  std::string summary_out;
  auto* analyze_cmd = app.add_subcommand("analyze", "Summarize records files");
  analyze_cmd->add_option("--records", records, "Records files (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  analyze_cmd->add_option("--out", summary_out, "Summary JSON")->required();

  std::vector<std::string> summaries;
  std::string format = "text";
  std::string out_dir;
  auto* report_cmd = app.add_subcommand("report", "Render tables from summaries");
  report_cmd->add_option("--summaries", summaries, "Summary JSON files")
      ->required()
      ->check(CLI::ExistingFile);
  report_cmd->add_option("--format", format, "text or csv");
  report_cmd->add_option("--out-dir", out_dir, "Also write CSV tables and report.txt here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(run);
    if (*analyze_cmd) return cmd_analyze(records, summary_out);
    if (*report_cmd) return cmd_report(summaries, format, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "iterfix: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
