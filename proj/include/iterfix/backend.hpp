#pragma once

// Candidate-patch generation backends. A backend answers a transcript with
// a ranked list of raw model outputs, best first.

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "iterfix/error.hpp"
#include "iterfix/prompt.hpp"

namespace iterfix {

inline constexpr int kMaxOutputsPerRequest = 10;

struct GenerationRequest {
  std::string problem_id;  // keys per-problem state in stateful backends
  ChatTranscript transcript;
  int num_outputs = 1;
  std::string model_id;
};

struct GenerationResponse {
  std::vector<std::string> outputs;
  std::map<std::string, std::string> backend_metadata;
};

class Backend {
 public:
  virtual ~Backend() = default;

  // Returns exactly request.num_outputs outputs or throws.
  GenerationResponse generate(const GenerationRequest& request) {
    if (request.num_outputs < 1 || request.num_outputs > kMaxOutputsPerRequest)
      throw BackendError("num_outputs must be in [1, 10], got " +
                         std::to_string(request.num_outputs));
    if (request.transcript.empty())
      throw BackendError("generation request carries an empty transcript");
    auto response = do_generate(request);
    auto n = static_cast<std::size_t>(request.num_outputs);
    if (response.outputs.size() < n) throw ShortResponseError(n, response.outputs.size());
    if (response.outputs.size() > n)
      throw BackendError("backend returned " + std::to_string(response.outputs.size()) +
                         " outputs, more than the " + std::to_string(n) + " requested");
    return response;
  }

  // Static configuration recorded in run metadata.
  virtual nlohmann::json describe() const = 0;

 protected:
  virtual GenerationResponse do_generate(const GenerationRequest& request) = 0;
};

// Answers from a fixture: problem id -> turns -> ranked outputs. The turn
// is the number of earlier generate calls for the same problem.
class ScriptedBackend final : public Backend {
 public:
  using Fixture = std::unordered_map<std::string, std::vector<std::vector<std::string>>>;

  explicit ScriptedBackend(Fixture fixture, std::string source = "<memory>")
      : fixture_(std::move(fixture)), source_(std::move(source)) {}

  static ScriptedBackend from_json(const nlohmann::json& doc, std::string source = "<memory>") {
    if (!doc.is_object()) throw BackendError("fixture must be a JSON object");
    Fixture f;
    for (const auto& [pid, turns] : doc.items()) {
      if (!turns.is_array()) throw BackendError("fixture entry '" + pid + "' is not a list");
      auto& dst = f[pid];
      for (const auto& turn : turns) {
        if (!turn.is_array())
          throw BackendError("fixture entry '" + pid + "' has a turn that is not a list");
        std::vector<std::string> outs;
        for (const auto& o : turn) {
          if (!o.is_string())
            throw BackendError("fixture entry '" + pid + "' has a non-string output");
          outs.push_back(o.get<std::string>());
        }
        dst.push_back(std::move(outs));
      }
    }
    return ScriptedBackend(std::move(f), std::move(source));
  }

  static ScriptedBackend from_file(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec))
      throw BackendError("fixture file not found: " + path.string());
    std::ifstream in(path);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw BackendError("malformed fixture " + path.string() + ": " + e.what());
    }
    return from_json(doc, path.string());
  }

  ScriptedBackend(ScriptedBackend&& other) noexcept
      : fixture_(std::move(other.fixture_)),
        turns_(std::move(other.turns_)),
        source_(std::move(other.source_)) {}

  nlohmann::json describe() const override {
    return {{"kind", "scripted"}, {"fixture", source_}};
  }

  std::size_t turns_taken(const std::string& problem_id) const {
    std::lock_guard lock(mutex_);
    auto it = turns_.find(problem_id);
    return it == turns_.end() ? 0 : it->second;
  }

 protected:
  GenerationResponse do_generate(const GenerationRequest& request) override {
    std::size_t turn;
    {
      std::lock_guard lock(mutex_);
      turn = turns_[request.problem_id]++;
    }
    auto it = fixture_.find(request.problem_id);
    if (it == fixture_.end() || turn >= it->second.size())
      throw FixtureMissError(request.problem_id, turn);
    const auto& ranked = it->second[turn];
    auto n = std::min(ranked.size(), static_cast<std::size_t>(request.num_outputs));
    GenerationResponse r;
    r.outputs.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n));
    r.backend_metadata["turn"] = std::to_string(turn);
    return r;
  }

 private:
  Fixture fixture_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::size_t> turns_;
  std::string source_;
};

}  // namespace iterfix
