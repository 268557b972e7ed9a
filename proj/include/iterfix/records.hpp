#pragma once

// Per-attempt and per-session records, persisted as JSONL.
//
// Each line is one JSON object with "schema_version" and "record_type"
// ("attempt" or "session"). Wall-clock data never enters the records file;
// it goes to a sidecar so that identical runs produce identical records.

#include <array>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "iterfix/error.hpp"
#include "iterfix/plan.hpp"
#include "iterfix/prompt.hpp"
#include "iterfix/validator.hpp"

namespace iterfix {

inline constexpr int kRecordSchemaVersion = 1;

struct RunInfo {
  std::string run_id;
  std::string manifest;
  std::string model;
  bool operator==(const RunInfo&) const = default;
};

struct AttemptTiming {
  long long generate_ms = 0;  // whole batch, shared by every output of the turn
  long long validate_ms = 0;
  bool operator==(const AttemptTiming&) const = default;
};

struct AttemptRecord {
  RunInfo run;
  std::string problem_id;
  std::string strategy_label;
  std::array<int, 3> plan{};  // n_o, n_i, i
  int turn_index = 0;         // 0-based
  int rank_in_turn = 1;       // 1-based
  int global_position = 1;    // 1-based over generated outputs
  std::string raw_output;
  std::string extracted_code;
  std::optional<std::string> fence_tag;
  bool extraction_ok = false;
  bool evaluated = false;
  std::optional<Verdict> verdict;  // present iff evaluated
  bool feedback_used = false;      // the prompt of this turn carried feedback
  AttemptTiming timing;            // sidecar only

  bool operator==(const AttemptRecord&) const = default;
};

struct SessionResult {
  RunInfo run;
  std::string problem_id;
  std::string strategy_label;
  std::array<int, 3> plan{};
  std::vector<AttemptRecord> attempts;
  bool solved = false;
  std::optional<int> first_plausible_global_position;
  int generations_consumed = 0;
  int evaluated_count = 0;
  bool aborted = false;
  std::string error;  // set iff aborted
  ChatTranscript transcript;

  bool operator==(const SessionResult&) const = default;
};

inline nlohmann::json plan_json(const std::array<int, 3>& p) { return {p[0], p[1], p[2]}; }

inline nlohmann::json to_json(const AttemptRecord& r) {
  nlohmann::json j;
  j["schema_version"] = kRecordSchemaVersion;
  j["record_type"] = "attempt";
  j["run_id"] = r.run.run_id;
  j["manifest"] = r.run.manifest;
  j["model"] = r.run.model;
  j["problem_id"] = r.problem_id;
  j["strategy_label"] = r.strategy_label;
  j["plan"] = plan_json(r.plan);
  j["turn_index"] = r.turn_index;
  j["rank_in_turn"] = r.rank_in_turn;
  j["global_position"] = r.global_position;
  j["raw_output"] = r.raw_output;
  j["extracted_code"] = r.extracted_code;
  j["fence_tag"] = r.fence_tag ? nlohmann::json(*r.fence_tag) : nlohmann::json(nullptr);
  j["extraction_ok"] = r.extraction_ok;
  j["evaluated"] = r.evaluated;
  if (r.verdict) {
    j["verdict_kind"] = std::string(to_string(r.verdict->kind));
    j["verdict_detail"] = r.verdict->detail;
  }
  j["feedback_used"] = r.feedback_used;
  return j;
}

inline nlohmann::json to_json(const SessionResult& s) {
  nlohmann::json j;
  j["schema_version"] = kRecordSchemaVersion;
  j["record_type"] = "session";
  j["run_id"] = s.run.run_id;
  j["manifest"] = s.run.manifest;
  j["model"] = s.run.model;
  j["problem_id"] = s.problem_id;
  j["strategy_label"] = s.strategy_label;
  j["plan"] = plan_json(s.plan);
  j["solved"] = s.solved;
  j["first_plausible_global_position"] = s.first_plausible_global_position
                                             ? nlohmann::json(*s.first_plausible_global_position)
                                             : nlohmann::json(nullptr);
  j["generations_consumed"] = s.generations_consumed;
  j["evaluated_count"] = s.evaluated_count;
  j["status"] = s.aborted ? "aborted" : "ok";
  if (s.aborted) j["error"] = s.error;
  j["transcript"] = to_json(s.transcript);
  return j;
}

// Every violation found in one records line; empty when the line conforms.
inline std::vector<std::string> schema_violations(const nlohmann::json& j) {
  std::vector<std::string> v;
  if (!j.is_object()) return {"record is not an object"};
  auto need = [&](const char* key, auto pred, const char* type) {
    if (!j.contains(key))
      v.push_back(std::string("missing field '") + key + "'");
    else if (!pred(j.at(key)))
      v.push_back(std::string("field '") + key + "' is not " + type);
  };
  auto is_str = [](const nlohmann::json& x) { return x.is_string(); };
  auto is_bool = [](const nlohmann::json& x) { return x.is_boolean(); };
  auto is_nat = [](const nlohmann::json& x) { return x.is_number_integer() && x >= 0; };
  auto is_pos = [](const nlohmann::json& x) { return x.is_number_integer() && x >= 1; };
  auto is_plan = [&](const nlohmann::json& x) {
    return x.is_array() && x.size() == 3 && is_nat(x[0]) && is_nat(x[1]) && is_nat(x[2]);
  };

  if (!j.contains("schema_version") || j.at("schema_version") != kRecordSchemaVersion)
    v.push_back("schema_version must be " + std::to_string(kRecordSchemaVersion));
  need("record_type", is_str, "a string");
  for (auto key : {"run_id", "manifest", "model", "problem_id", "strategy_label"})
    need(key, is_str, "a string");
  need("plan", is_plan, "an [n_o, n_i, i] triple");
  if (!j.contains("record_type") || !j.at("record_type").is_string()) return v;

  const auto type = j.at("record_type").get<std::string>();
  if (type == "attempt") {
    need("turn_index", is_nat, "a non-negative integer");
    need("rank_in_turn", is_pos, "a positive integer");
    need("global_position", is_pos, "a positive integer");
    need("raw_output", is_str, "a string");
    need("extracted_code", is_str, "a string");
    need("fence_tag", [](const nlohmann::json& x) { return x.is_null() || x.is_string(); },
         "a string or null");
    need("extraction_ok", is_bool, "a boolean");
    need("evaluated", is_bool, "a boolean");
    need("feedback_used", is_bool, "a boolean");
    if (j.contains("evaluated") && j.at("evaluated").is_boolean()) {
      bool evaluated = j.at("evaluated").get<bool>();
      if (evaluated) {
        need("verdict_kind", [](const nlohmann::json& x) {
          if (!x.is_string()) return false;
          try {
            verdict_kind_from_string(x.get<std::string>());
            return true;
          } catch (const Error&) {
            return false;
          }
        }, "a verdict kind");
        need("verdict_detail", is_str, "a string");
      } else if (j.contains("verdict_kind") || j.contains("verdict_detail")) {
        v.push_back("verdict fields present on an unevaluated attempt");
      }
    }
    if (j.contains("extraction_ok") && j.at("extraction_ok") == false &&
        j.contains("extracted_code") && j.at("extracted_code") != "")
      v.push_back("extracted_code must be empty when extraction failed");
    if (v.empty()) {
      auto p = j.at("plan");
      int turn = j.at("turn_index").get<int>();
      int rank = j.at("rank_in_turn").get<int>();
      int pos = j.at("global_position").get<int>();
      int n_o = p[0].get<int>();
      int n_i = p[1].get<int>();
      int expected = turn == 0 ? rank : n_o + (turn - 1) * n_i + rank;
      int width = turn == 0 ? n_o : n_i;
      if (pos != expected || rank > width || turn > p[2].get<int>())
        v.push_back("global_position inconsistent with turn_index and rank_in_turn");
    }
  } else if (type == "session") {
    need("solved", is_bool, "a boolean");
    need("first_plausible_global_position",
         [](const nlohmann::json& x) {
           return x.is_null() ||
                  (x.is_number_integer() && x >= 1 && x <= kPatchBudget);
         },
         "null or a position in [1, 10]");
    need("generations_consumed", is_nat, "a non-negative integer");
    need("evaluated_count", is_nat, "a non-negative integer");
    need("status", [](const nlohmann::json& x) { return x == "ok" || x == "aborted"; },
         "\"ok\" or \"aborted\"");
    need("transcript", [](const nlohmann::json& x) { return x.is_array(); }, "an array");
    if (v.empty()) {
      bool solved = j.at("solved").get<bool>();
      if (solved == j.at("first_plausible_global_position").is_null())
        v.push_back("solved must agree with first_plausible_global_position");
      if (j.at("generations_consumed").get<int>() > kPatchBudget)
        v.push_back("generations_consumed exceeds the patch budget");
      if ((j.at("status") == "aborted") != j.contains("error"))
        v.push_back("error must be present exactly when status is aborted");
    }
  } else {
    v.push_back("unknown record_type '" + type + "'");
  }
  return v;
}

inline AttemptRecord attempt_from_json(const nlohmann::json& j) {
  AttemptRecord r;
  r.run = {j.at("run_id").get<std::string>(), j.at("manifest").get<std::string>(),
           j.at("model").get<std::string>()};
  r.problem_id = j.at("problem_id").get<std::string>();
  r.strategy_label = j.at("strategy_label").get<std::string>();
  r.plan = {j.at("plan")[0].get<int>(), j.at("plan")[1].get<int>(), j.at("plan")[2].get<int>()};
  r.turn_index = j.at("turn_index").get<int>();
  r.rank_in_turn = j.at("rank_in_turn").get<int>();
  r.global_position = j.at("global_position").get<int>();
  r.raw_output = j.at("raw_output").get<std::string>();
  r.extracted_code = j.at("extracted_code").get<std::string>();
  if (!j.at("fence_tag").is_null()) r.fence_tag = j.at("fence_tag").get<std::string>();
  r.extraction_ok = j.at("extraction_ok").get<bool>();
  r.evaluated = j.at("evaluated").get<bool>();
  if (r.evaluated)
    r.verdict = Verdict{verdict_kind_from_string(j.at("verdict_kind").get<std::string>()),
                        j.at("verdict_detail").get<std::string>()};
  r.feedback_used = j.at("feedback_used").get<bool>();
  return r;
}

// Session line without its attempts; RecordSet reattaches them.
inline SessionResult session_from_json(const nlohmann::json& j) {
  SessionResult s;
  s.run = {j.at("run_id").get<std::string>(), j.at("manifest").get<std::string>(),
           j.at("model").get<std::string>()};
  s.problem_id = j.at("problem_id").get<std::string>();
  s.strategy_label = j.at("strategy_label").get<std::string>();
  s.plan = {j.at("plan")[0].get<int>(), j.at("plan")[1].get<int>(), j.at("plan")[2].get<int>()};
  s.solved = j.at("solved").get<bool>();
  if (!j.at("first_plausible_global_position").is_null())
    s.first_plausible_global_position = j.at("first_plausible_global_position").get<int>();
  s.generations_consumed = j.at("generations_consumed").get<int>();
  s.evaluated_count = j.at("evaluated_count").get<int>();
  s.aborted = j.at("status") == "aborted";
  if (s.aborted) s.error = j.at("error").get<std::string>();
  const auto& t = j.at("transcript");
  if (!t.empty()) {
    ChatTranscript tr(ChatMessage{role_from_string(t[0].at("role").get<std::string>()),
                                  t[0].at("content").get<std::string>()});
    for (std::size_t k = 1; k + 1 < t.size(); k += 2)
      tr = extend(tr, t[k].at("content").get<std::string>(),
                  {role_from_string(t[k + 1].at("role").get<std::string>()),
                   t[k + 1].at("content").get<std::string>()});
    if (tr.size() != t.size()) throw RecordError("transcript does not alternate user/assistant");
    s.transcript = std::move(tr);
  }
  return s;
}

// Records from one or more JSONL files, in file order.
struct RecordSet {
  std::vector<AttemptRecord> attempts;
  std::vector<SessionResult> sessions;  // attempts reattached when loaded
  std::string source;

  bool empty() const { return attempts.empty() && sessions.empty(); }
};

inline RecordSet parse_records(std::istream& in, const std::string& source = "<stream>") {
  RecordSet set;
  set.source = source;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw RecordError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
    auto errs = schema_violations(j);
    if (!errs.empty())
      throw RecordError(source + ":" + std::to_string(lineno) + ": " + errs.front());
    if (j.at("record_type") == "attempt")
      set.attempts.push_back(attempt_from_json(j));
    else
      set.sessions.push_back(session_from_json(j));
  }
  for (auto& s : set.sessions)
    for (const auto& a : set.attempts)
      if (a.problem_id == s.problem_id && a.run == s.run) s.attempts.push_back(a);
  return set;
}

inline RecordSet load_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RecordError("cannot read records file " + path.string());
  return parse_records(in, path.string());
}

inline std::vector<std::string> session_lines(const SessionResult& s) {
  std::vector<std::string> lines;
  lines.reserve(s.attempts.size() + 1);
  for (const auto& a : s.attempts) lines.push_back(to_json(a).dump());
  lines.push_back(to_json(s).dump());
  return lines;
}

// Serialized JSONL writer. Sessions are committed by manifest index and
// written in index order, whatever order they finish in.
class OrderedRecordSink {
 public:
  explicit OrderedRecordSink(const std::filesystem::path& path)
      : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw RecordError("cannot open records file " + path.string());
  }

  void commit(std::size_t index, std::vector<std::string> lines) {
    std::lock_guard lock(mutex_);
    pending_.emplace(index, std::move(lines));
    while (!pending_.empty() && pending_.begin()->first == next_) {
      for (const auto& l : pending_.begin()->second) out_ << l << '\n';
      pending_.erase(pending_.begin());
      ++next_;
    }
    out_.flush();
    if (!out_) throw RecordError("write to records file failed");
  }

  std::size_t written() const {
    std::lock_guard lock(mutex_);
    return next_;
  }

 private:
  mutable std::mutex mutex_;
  std::ofstream out_;
  std::map<std::size_t, std::vector<std::string>> pending_;
  std::size_t next_ = 0;
};

}  // namespace iterfix
