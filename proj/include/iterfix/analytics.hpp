#pragma once

// Evaluation over attempt records: plausible-problem counts, first-plausible
// position histograms, strategy deltas, solved-set overlaps and relative
// improvements.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "iterfix/error.hpp"
#include "iterfix/plan.hpp"
#include "iterfix/records.hpp"

namespace iterfix {

using ProblemSet = std::set<std::string>;

inline bool is_plausible_attempt(const AttemptRecord& a) {
  return a.evaluated && a.verdict && a.verdict->kind == VerdictKind::Plausible;
}

// Throws unless every record belongs to the same run.
inline void require_single_run(std::span<const AttemptRecord> attempts) {
  for (const auto& a : attempts)
    if (a.run.run_id != attempts.front().run.run_id)
      throw AnalyticsError("records mix runs '" + attempts.front().run.run_id + "' and '" +
                           a.run.run_id + "'");
}

inline void require_single_run(const RecordSet& set) {
  require_single_run(set.attempts);
  const std::string* id = set.attempts.empty() ? nullptr : &set.attempts.front().run.run_id;
  for (const auto& s : set.sessions) {
    if (!id) id = &s.run.run_id;
    if (s.run.run_id != *id)
      throw AnalyticsError("records mix runs '" + *id + "' and '" + s.run.run_id + "'");
  }
}

inline ProblemSet solved_problems(std::span<const AttemptRecord> attempts) {
  ProblemSet out;
  for (const auto& a : attempts)
    if (is_plausible_attempt(a)) out.insert(a.problem_id);
  return out;
}

inline int plausible_problem_count(std::span<const AttemptRecord> attempts) {
  require_single_run(attempts);
  return static_cast<int>(solved_problems(attempts).size());
}

inline int plausible_problem_count(const RecordSet& set) {
  require_single_run(set);
  return static_cast<int>(solved_problems(set.attempts).size());
}

struct PositionHistogram {
  std::array<int, kPatchBudget> counts{};
  std::array<double, kPatchBudget> proportions{};  // all zero when solved == 0
  int solved = 0;

  bool operator==(const PositionHistogram&) const = default;
};

inline PositionHistogram histogram_from_counts(const std::array<int, kPatchBudget>& counts) {
  PositionHistogram h;
  h.counts = counts;
  for (int c : counts) h.solved += c;
  if (h.solved > 0)
    for (std::size_t k = 0; k < counts.size(); ++k)
      h.proportions[k] = static_cast<double>(counts[k]) / h.solved;
  return h;
}

// Bucket k counts problems whose first plausible attempt sits at global
// position k + 1.
inline PositionHistogram first_plausible_position_histogram(
    std::span<const AttemptRecord> attempts) {
  std::map<std::string, int> first;
  for (const auto& a : attempts) {
    if (!is_plausible_attempt(a)) continue;
    if (a.global_position < 1 || a.global_position > kPatchBudget)
      throw AnalyticsError("plausible attempt of '" + a.problem_id + "' at position " +
                           std::to_string(a.global_position) + " outside [1, 10]");
    auto [it, inserted] = first.emplace(a.problem_id, a.global_position);
    if (!inserted) it->second = std::min(it->second, a.global_position);
  }
  std::array<int, kPatchBudget> counts{};
  for (const auto& [id, pos] : first) ++counts[static_cast<std::size_t>(pos - 1)];
  return histogram_from_counts(counts);
}

// Sums counts across runs, then renormalizes.
inline PositionHistogram pooled_histogram(std::span<const PositionHistogram> runs) {
  std::array<int, kPatchBudget> counts{};
  for (const auto& h : runs)
    for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += h.counts[k];
  return histogram_from_counts(counts);
}

inline std::optional<RunInfo> run_of(const RecordSet& set) {
  if (!set.attempts.empty()) return set.attempts.front().run;
  if (!set.sessions.empty()) return set.sessions.front().run;
  return std::nullopt;
}

inline int strategy_delta(const RecordSet& baseline, const RecordSet& other) {
  auto a = run_of(baseline);
  auto b = run_of(other);
  if (a && b) {
    if (a->manifest != b->manifest)
      throw AnalyticsError("strategy delta across manifests '" + a->manifest + "' and '" +
                           b->manifest + "'");
    if (a->model != b->model)
      throw AnalyticsError("strategy delta across models '" + a->model + "' and '" + b->model +
                           "'");
  }
  return plausible_problem_count(other) - plausible_problem_count(baseline);
}

inline int strategy_delta(int baseline_count, int other_count) {
  return other_count - baseline_count;
}

struct OverlapRegion {
  std::vector<std::string> members;  // configs whose solved sets hold these ids
  ProblemSet problems;               // solved by exactly the member configs
};

struct OverlapSets {
  std::map<std::string, ProblemSet> solved;
  std::map<std::string, ProblemSet> unique;
  // Every subset of two or more configs with the problems all of them solve.
  std::vector<OverlapRegion> intersections;
  // Venn regions: one per non-empty membership pattern.
  std::vector<OverlapRegion> regions;
  ProblemSet all_solved;
};

inline constexpr std::size_t kMaxOverlapConfigs = 16;

inline OverlapSets overlap_sets(const std::map<std::string, ProblemSet>& solved) {
  if (solved.size() > kMaxOverlapConfigs)
    throw AnalyticsError("overlap over more than " + std::to_string(kMaxOverlapConfigs) +
                         " configurations");
  OverlapSets out;
  out.solved = solved;
  std::vector<std::string> names;
  for (const auto& [name, ids] : solved) {
    names.push_back(name);
    out.all_solved.insert(ids.begin(), ids.end());
  }
  const std::size_t k = names.size();

  // Membership mask of every solved problem.
  std::map<std::uint32_t, ProblemSet> by_mask;
  for (const auto& id : out.all_solved) {
    std::uint32_t mask = 0;
    for (std::size_t c = 0; c < k; ++c)
      if (solved.at(names[c]).count(id)) mask |= 1u << c;
    by_mask[mask].insert(id);
  }

  auto members_of = [&](std::uint32_t mask) {
    std::vector<std::string> m;
    for (std::size_t c = 0; c < k; ++c)
      if (mask & (1u << c)) m.push_back(names[c]);
    return m;
  };

  for (std::size_t c = 0; c < k; ++c) {
    auto it = by_mask.find(1u << c);
    out.unique[names[c]] = it == by_mask.end() ? ProblemSet{} : it->second;
  }
  for (const auto& [mask, ids] : by_mask) out.regions.push_back({members_of(mask), ids});

  for (std::uint32_t subset = 1; subset < (1u << k); ++subset) {
    if (std::popcount(subset) < 2) continue;
    ProblemSet ids;
    for (const auto& [mask, region] : by_mask)
      if ((mask & subset) == subset) ids.insert(region.begin(), region.end());
    out.intersections.push_back({members_of(subset), std::move(ids)});
  }
  return out;
}

inline OverlapSets overlap_sets(const std::map<std::string, RecordSet>& records_by_config) {
  std::map<std::string, ProblemSet> solved;
  std::optional<std::string> manifest;
  for (const auto& [name, set] : records_by_config) {
    require_single_run(set);
    if (auto run = run_of(set)) {
      if (manifest && *manifest != run->manifest)
        throw AnalyticsError("overlap across manifests '" + *manifest + "' and '" +
                             run->manifest + "'");
      manifest = run->manifest;
    }
    solved[name] = solved_problems(set.attempts);
  }
  return overlap_sets(solved);
}

// Percentage change from base_count to tuned_count at full precision.
inline double relative_improvement(double base_count, double tuned_count) {
  if (base_count == 0) throw AnalyticsError("relative improvement over a zero base count");
  return (tuned_count - base_count) / base_count * 100.0;
}

// Half away from zero.
inline long round_percent(double percent) { return std::lround(percent); }

struct RunSummary {
  RunInfo run;
  std::string strategy_label;
  std::array<int, 3> plan{};
  int problem_count = 0;
  int plausible_problem_count = 0;
  PositionHistogram histogram;
  std::vector<std::string> solved_ids;
  std::vector<std::string> unsolved_ids;       // includes aborted sessions
  std::vector<std::string> infra_failure_ids;  // aborted sessions
  int generated = 0;
  int evaluated = 0;

  std::string config_name() const { return run.model + "/" + strategy_label; }
  bool operator==(const RunSummary&) const = default;
};

inline RunSummary summarize(const RecordSet& set) {
  require_single_run(set);
  RunSummary s;
  if (auto run = run_of(set)) s.run = *run;
  if (!set.sessions.empty()) {
    s.strategy_label = set.sessions.front().strategy_label;
    s.plan = set.sessions.front().plan;
  } else if (!set.attempts.empty()) {
    s.strategy_label = set.attempts.front().strategy_label;
    s.plan = set.attempts.front().plan;
  }
  auto solved = solved_problems(set.attempts);
  s.plausible_problem_count = static_cast<int>(solved.size());
  s.histogram = first_plausible_position_histogram(set.attempts);

  // Problems are listed in session order; attempts without a session line
  // (a truncated file) still count.
  std::vector<std::string> order;
  std::set<std::string> seen;
  for (const auto& ses : set.sessions)
    if (seen.insert(ses.problem_id).second) order.push_back(ses.problem_id);
  for (const auto& a : set.attempts)
    if (seen.insert(a.problem_id).second) order.push_back(a.problem_id);
  s.problem_count = static_cast<int>(order.size());

  std::set<std::string> aborted;
  for (const auto& ses : set.sessions)
    if (ses.aborted) aborted.insert(ses.problem_id);
  for (const auto& id : order) {
    if (solved.count(id))
      s.solved_ids.push_back(id);
    else
      s.unsolved_ids.push_back(id);
    if (aborted.count(id)) s.infra_failure_ids.push_back(id);
  }
  s.generated = static_cast<int>(set.attempts.size());
  for (const auto& a : set.attempts) s.evaluated += a.evaluated ? 1 : 0;
  return s;
}

inline nlohmann::json to_json(const RunSummary& s) {
  nlohmann::json j;
  j["config"] = {{"run_id", s.run.run_id},
                 {"manifest", s.run.manifest},
                 {"model", s.run.model},
                 {"strategy", s.strategy_label},
                 {"plan", plan_json(s.plan)}};
  j["problem_count"] = s.problem_count;
  j["plausible_problem_count"] = s.plausible_problem_count;
  j["first_plausible_counts"] = s.histogram.counts;
  j["first_plausible_proportions"] = s.histogram.proportions;
  j["solved"] = s.histogram.solved;
  j["solved_ids"] = s.solved_ids;
  j["unsolved_ids"] = s.unsolved_ids;
  j["infra_failure_ids"] = s.infra_failure_ids;
  j["generated"] = s.generated;
  j["evaluated"] = s.evaluated;
  return j;
}

inline RunSummary summary_from_json(const nlohmann::json& j) {
  try {
    RunSummary s;
    const auto& c = j.at("config");
    s.run = {c.at("run_id").get<std::string>(), c.at("manifest").get<std::string>(),
             c.at("model").get<std::string>()};
    s.strategy_label = c.at("strategy").get<std::string>();
    if (c.contains("plan"))
      s.plan = {c.at("plan")[0].get<int>(), c.at("plan")[1].get<int>(),
                c.at("plan")[2].get<int>()};
    s.plausible_problem_count = j.at("plausible_problem_count").get<int>();
    s.problem_count = j.value("problem_count", 0);
    std::array<int, kPatchBudget> counts{};
    if (j.contains("first_plausible_counts")) {
      const auto& arr = j.at("first_plausible_counts");
      if (!arr.is_array() || arr.size() != counts.size())
        throw AnalyticsError("first_plausible_counts must have 10 entries");
      for (std::size_t k = 0; k < counts.size(); ++k) counts[k] = arr[k].get<int>();
    }
    s.histogram = histogram_from_counts(counts);
    s.solved_ids = j.value("solved_ids", std::vector<std::string>{});
    s.unsolved_ids = j.value("unsolved_ids", std::vector<std::string>{});
    s.infra_failure_ids = j.value("infra_failure_ids", std::vector<std::string>{});
    s.generated = j.value("generated", 0);
    s.evaluated = j.value("evaluated", 0);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw AnalyticsError(std::string("malformed run summary: ") + e.what());
  }
}

}  // namespace iterfix
