#pragma once

// Tabular reports over run summaries.

#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "iterfix/analytics.hpp"

namespace iterfix {

using Table = std::vector<std::vector<std::string>>;  // first row is the header

struct Report {
  Table counts;      // plausible problems per configuration
  Table histograms;  // first-plausible position counts per configuration
  Table deltas;      // change against Strategy A for the same manifest and model
  Table overlaps;    // solved-set regions per manifest
  PositionHistogram pooled;
};

namespace detail {

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (k) out.append(sep);
    out.append(parts[k]);
  }
  return out;
}

inline std::string join(const ProblemSet& parts, std::string_view sep) {
  return join(std::vector<std::string>(parts.begin(), parts.end()), sep);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace detail

inline Report build_report(const std::vector<RunSummary>& summaries) {
  Report r;
  r.counts.push_back({"manifest", "model", "strategy", "plan", "problems", "plausible"});
  r.histograms.push_back({"manifest", "model", "strategy", "solved"});
  for (int k = 1; k <= kPatchBudget; ++k) r.histograms.front().push_back("pos" + std::to_string(k));
  r.deltas.push_back({"manifest", "model", "strategy", "baseline", "plausible", "delta"});
  r.overlaps.push_back({"manifest", "configs", "size", "problems"});

  std::vector<PositionHistogram> hists;
  for (const auto& s : summaries) {
    auto plan = std::to_string(s.plan[0]) + "," + std::to_string(s.plan[1]) + "," +
                std::to_string(s.plan[2]);
    r.counts.push_back({s.run.manifest, s.run.model, s.strategy_label, plan,
                        std::to_string(s.problem_count),
                        std::to_string(s.plausible_problem_count)});
    std::vector<std::string> row{s.run.manifest, s.run.model, s.strategy_label,
                                 std::to_string(s.histogram.solved)};
    for (int c : s.histogram.counts) row.push_back(std::to_string(c));
    r.histograms.push_back(std::move(row));
    hists.push_back(s.histogram);
  }
  r.pooled = pooled_histogram(hists);

  // Deltas against the Strategy A run of the same manifest and model.
  std::map<std::pair<std::string, std::string>, const RunSummary*> baseline;
  for (const auto& s : summaries)
    if (s.strategy_label == "A") baseline.emplace(std::pair{s.run.manifest, s.run.model}, &s);
  for (const auto& s : summaries) {
    auto it = baseline.find({s.run.manifest, s.run.model});
    if (it == baseline.end() || it->second == &s) continue;
    r.deltas.push_back({s.run.manifest, s.run.model, s.strategy_label,
                        std::to_string(it->second->plausible_problem_count),
                        std::to_string(s.plausible_problem_count),
                        std::to_string(strategy_delta(it->second->plausible_problem_count,
                                                      s.plausible_problem_count))});
  }

  // Venn regions per manifest, when at least two configurations ran on it.
  std::map<std::string, std::map<std::string, ProblemSet>> by_manifest;
  for (const auto& s : summaries) {
    auto& group = by_manifest[s.run.manifest];
    auto name = s.config_name();
    if (group.count(name)) name += "#" + s.run.run_id;
    group[name] = ProblemSet(s.solved_ids.begin(), s.solved_ids.end());
  }
  for (const auto& [manifest, group] : by_manifest) {
    if (group.size() < 2 || group.size() > kMaxOverlapConfigs) continue;
    auto o = overlap_sets(group);
    for (const auto& region : o.regions)
      r.overlaps.push_back({manifest, detail::join(region.members, "&"),
                            std::to_string(region.problems.size()),
                            detail::join(region.problems, " ")});
  }
  return r;
}

inline std::string render_csv(const Table& t) {
  std::string out;
  for (const auto& row : t) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out.push_back(',');
      out.append(detail::csv_field(row[k]));
    }
    out.push_back('\n');
  }
  return out;
}

inline std::string render_aligned(const Table& t) {
  std::vector<std::size_t> width;
  for (const auto& row : t)
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (width.size() <= k) width.push_back(0);
      width[k] = std::max(width[k], row[k].size());
    }
  std::string out;
  for (const auto& row : t) {
    std::string line;
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) line.append("  ");
      line.append(row[k]);
      if (k + 1 < row.size()) line.append(width[k] - row[k].size(), ' ');
    }
    out.append(line).push_back('\n');
  }
  return out;
}

// format: "text" (aligned, human-readable) or "csv" (sections separated by
// "# name" lines).
inline std::string render_report(const Report& r, std::string_view format) {
  const std::vector<std::pair<std::string, const Table*>> sections{
      {"plausible problems", &r.counts},
      {"first plausible position", &r.histograms},
      {"delta vs strategy A", &r.deltas},
      {"solved-set overlap", &r.overlaps}};

  std::ostringstream out;
  if (format == "csv") {
    for (const auto& [name, table] : sections) out << "# " << name << '\n' << render_csv(*table);
    return out.str();
  }
  if (format != "text") throw AnalyticsError("unknown report format '" + std::string(format) + "'");

  for (const auto& [name, table] : sections) {
    out << "== " << name << " ==\n";
    if (table->size() <= 1)
      out << "(none)\n";
    else
      out << render_aligned(*table);
    out << '\n';
  }
  out << "== pooled first plausible position (" << r.pooled.solved << " solved) ==\n";
  for (int k = 0; k < kPatchBudget; ++k)
    out << "pos" << (k + 1) << "  " << r.pooled.counts[static_cast<std::size_t>(k)] << "  "
        << detail::fixed(r.pooled.proportions[static_cast<std::size_t>(k)]) << '\n';
  return out.str();
}

}  // namespace iterfix
