#pragma once

// The iterative repair session and whole-benchmark runs.

#include <atomic>
#include <chrono>
#include <concepts>
#include <cstddef>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "iterfix/backend.hpp"
#include "iterfix/benchmark.hpp"
#include "iterfix/patch.hpp"
#include "iterfix/plan.hpp"
#include "iterfix/prompt.hpp"
#include "iterfix/records.hpp"
#include "iterfix/validator.hpp"

namespace iterfix {

template <typename V>
concept PatchValidator = requires(const V& v, const Problem& p, const std::string& src) {
  { v(p, src) } -> std::convertible_to<Verdict>;
};

struct SessionOptions {
  RunInfo run;
  // Oldest feedback rounds are dropped once the transcript exceeds this many
  // characters. Unset means the transcript grows without bound.
  std::optional<std::size_t> max_transcript_chars;
};

inline ChatMessage feedback_message(const Feedback& fb) {
  return fb.variant == FeedbackVariant::FailingTest ? render_test_failure(fb.text)
                                                    : render_compile_failure(fb.text);
}

// Turn 0 asks for n_o outputs; each later turn feeds back the verdict of the
// previous turn's first-ranked output and asks for n_i more. Outputs are
// validated in rank order and the session stops at the first plausible one.
template <PatchValidator V>
SessionResult run_problem(const Problem& problem, const GenerationPlan& plan, Backend& backend,
                          const V& validator, const SessionOptions& options = {}) {
  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - t).count();
  };

  SessionResult s;
  s.run = options.run;
  s.problem_id = problem.id;
  s.strategy_label = plan.label();
  s.plan = {plan.initial_outputs(), plan.outputs_per_iteration(), plan.feedback_iterations()};

  ChatTranscript transcript(render_initial(problem));
  s.transcript = transcript;
  std::size_t turn_begin = 0;  // index into s.attempts of the current turn's rank 1

  try {
    for (int turn = 0; turn < plan.turns() && !s.solved; ++turn) {
      if (turn > 0) {
        const AttemptRecord& first = s.attempts.at(turn_begin);
        auto fb = extract_feedback(problem, *first.verdict);
        transcript = extend(transcript, first.raw_output, feedback_message(fb));
        if (options.max_transcript_chars)
          transcript = cap_transcript(transcript, *options.max_transcript_chars);
        s.transcript = transcript;
      }

      const int n = plan.outputs_in_turn(turn);
      auto started = clock::now();
      auto response = backend.generate({problem.id, transcript, n, options.run.model});
      const long long generate_ms = ms_since(started);
      s.generations_consumed += n;
      turn_begin = s.attempts.size();

      for (int rank = 1; rank <= n; ++rank) {
        AttemptRecord a;
        a.run = options.run;
        a.problem_id = problem.id;
        a.strategy_label = plan.label();
        a.plan = s.plan;
        a.turn_index = turn;
        a.rank_in_turn = rank;
        a.global_position = plan.global_position(turn, rank);
        a.raw_output = std::move(response.outputs[static_cast<std::size_t>(rank - 1)]);
        auto extracted = extract_code(a.raw_output);
        a.extracted_code = extracted.code;
        a.fence_tag = extracted.fence_tag;
        a.extraction_ok = extracted.extraction_ok;
        a.feedback_used = turn > 0;
        a.timing.generate_ms = generate_ms;

        if (!s.solved) {
          auto validation_started = clock::now();
          // Recorded before validating so that an infrastructure failure
          // still leaves the attempt in the partial record.
          s.attempts.push_back(a);
          Verdict v = a.extraction_ok
                          ? Verdict(validator(problem, splice(problem, a.extracted_code)))
                          : Verdict::uncompilable(std::string(kNoCodeBlockFeedback));
          auto& stored = s.attempts.back();
          stored.timing.validate_ms = ms_since(validation_started);
          stored.evaluated = true;
          stored.verdict = v;
          ++s.evaluated_count;
          if (v.is_plausible()) {
            s.solved = true;
            s.first_plausible_global_position = stored.global_position;
          }
        } else {
          s.attempts.push_back(std::move(a));
        }
      }
    }
  } catch (const std::exception& e) {
    s.aborted = true;
    s.error = e.what();
    // An attempt whose validation threw carries no verdict.
    if (!s.attempts.empty() && !s.attempts.back().verdict) s.attempts.back().evaluated = false;
  }
  return s;
}

struct BenchmarkResult {
  std::vector<SessionResult> sessions;  // manifest order
  std::vector<std::string> failed_problem_ids;
};

// Called once per finished session with its manifest index. May be invoked
// concurrently from several workers.
using SessionCallback = std::function<void(std::size_t, const SessionResult&)>;

template <PatchValidator V>
BenchmarkResult run_benchmark(const BenchmarkManifest& manifest, const GenerationPlan& plan,
                              Backend& backend, const V& validator, int worker_count,
                              const SessionOptions& options = {},
                              const SessionCallback& on_session = {}) {
  if (worker_count < 1) throw Error("worker_count must be at least 1");
  const std::size_t n = manifest.problems.size();
  BenchmarkResult result;
  result.sessions.resize(n);

  std::atomic<std::size_t> next{0};
  std::mutex callback_error_mutex;
  std::exception_ptr callback_error;
  auto work = [&] {
    for (std::size_t idx; (idx = next.fetch_add(1)) < n;) {
      result.sessions[idx] =
          run_problem(manifest.problems[idx], plan, backend, validator, options);
      if (on_session) {
        try {
          on_session(idx, result.sessions[idx]);
        } catch (...) {
          std::lock_guard lock(callback_error_mutex);
          if (!callback_error) callback_error = std::current_exception();
        }
      }
    }
  };

  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(worker_count),
                                             std::max<std::size_t>(n, 1));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  if (callback_error) std::rethrow_exception(callback_error);

  for (const auto& s : result.sessions)
    if (s.aborted) result.failed_problem_ids.push_back(s.problem_id);
  return result;
}

}  // namespace iterfix
