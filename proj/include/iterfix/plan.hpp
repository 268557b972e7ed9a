#pragma once

// Generation plans: how the ten-patch budget is split between the initial
// generation and the feedback iterations.

#include <array>
#include <charconv>
#include <optional>
#include <string>
#include <string_view>

#include "iterfix/error.hpp"

namespace iterfix {

inline constexpr int kPatchBudget = 10;

class GenerationPlan {
 public:
  // Throws PlanError unless n_o >= 1, n_i >= 0, i >= 0, i >= 1 implies
  // n_i >= 1, and n_o + n_i * i <= 10.
  static GenerationPlan make(int initial_outputs, int outputs_per_iteration,
                             int feedback_iterations, std::string label = {}) {
    if (auto why = violation(initial_outputs, outputs_per_iteration, feedback_iterations))
      throw PlanError(*why);
    GenerationPlan p;
    p.initial_ = initial_outputs;
    p.per_iteration_ = outputs_per_iteration;
    p.iterations_ = feedback_iterations;
    p.label_ = label.empty() ? tuple_string(initial_outputs, outputs_per_iteration,
                                            feedback_iterations)
                             : std::move(label);
    return p;
  }

  static std::optional<std::string> violation(int n_o, int n_i, int i) {
    if (n_o < 1) return "initial outputs must be at least 1";
    if (n_i < 0) return "outputs per iteration must be non-negative";
    if (i < 0) return "feedback iterations must be non-negative";
    if (i >= 1 && n_i < 1) return "feedback iterations require at least one output each";
    if (n_o > kPatchBudget || (n_i > 0 && i > (kPatchBudget - n_o) / n_i))
      return "plan " + tuple_string(n_o, n_i, i) + " exceeds the budget of " +
             std::to_string(kPatchBudget) + " patches";
    return std::nullopt;
  }

  int initial_outputs() const { return initial_; }
  int outputs_per_iteration() const { return per_iteration_; }
  int feedback_iterations() const { return iterations_; }
  const std::string& label() const { return label_; }

  int turns() const { return 1 + iterations_; }
  int outputs_in_turn(int turn) const { return turn == 0 ? initial_ : per_iteration_; }

  // 1-based position over all generated outputs of the plan.
  int global_position(int turn, int rank) const {
    return turn == 0 ? rank : initial_ + (turn - 1) * per_iteration_ + rank;
  }

  bool operator==(const GenerationPlan&) const = default;

 private:
  static std::string tuple_string(int a, int b, int c) {
    return std::to_string(a) + "," + std::to_string(b) + "," + std::to_string(c);
  }

  GenerationPlan() = default;
  int initial_ = 1;
  int per_iteration_ = 0;
  int iterations_ = 0;
  std::string label_;
};

inline int plan_total(int n_o, int n_i, int i) { return n_o + n_i * i; }
inline int plan_total(const GenerationPlan& p) {
  return plan_total(p.initial_outputs(), p.outputs_per_iteration(), p.feedback_iterations());
}

struct NamedStrategy {
  char name;
  int initial_outputs;
  int outputs_per_iteration;
  int feedback_iterations;
};

// A: ten outputs at once. B: 8 then 2. C: 5 then 5. D: 6 then 2 twice.
// E: 4 then 3 twice. F: 2 then 2 four times. G: 1 then 1 nine times.
inline constexpr std::array<NamedStrategy, 7> kStrategyCatalogue{{
    {'A', 10, 0, 0},
    {'B', 8, 2, 1},
    {'C', 5, 5, 1},
    {'D', 6, 2, 2},
    {'E', 4, 3, 2},
    {'F', 2, 2, 4},
    {'G', 1, 1, 9},
}};

inline GenerationPlan strategy(char name) {
  for (const auto& s : kStrategyCatalogue)
    if (s.name == name)
      return GenerationPlan::make(s.initial_outputs, s.outputs_per_iteration,
                                  s.feedback_iterations, std::string(1, s.name));
  throw PlanError(std::string("unknown strategy '") + name + "'");
}

// Accepts a catalogue letter (A..G) or a custom "n_o,n_i,i" tuple.
inline GenerationPlan parse_plan(std::string_view text) {
  if (text.size() == 1 && text[0] >= 'A' && text[0] <= 'Z') return strategy(text[0]);
  std::array<int, 3> v{};
  std::size_t field = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  while (true) {
    if (field >= v.size()) throw PlanError("expected n_o,n_i,i but got '" + std::string(text) + "'");
    auto [next, ec] = std::from_chars(p, end, v[field]);
    if (ec != std::errc() || next == p)
      throw PlanError("expected n_o,n_i,i but got '" + std::string(text) + "'");
    ++field;
    p = next;
    if (p == end) break;
    if (*p != ',') throw PlanError("expected n_o,n_i,i but got '" + std::string(text) + "'");
    ++p;
  }
  if (field != v.size()) throw PlanError("expected n_o,n_i,i but got '" + std::string(text) + "'");
  return GenerationPlan::make(v[0], v[1], v[2]);
}

}  // namespace iterfix
