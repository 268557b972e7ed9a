#pragma once

// Prompt templates and the chat transcript that grows across feedback turns.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "iterfix/benchmark.hpp"
#include "iterfix/error.hpp"
#include "iterfix/templates_data.hpp"

namespace iterfix {

enum class Role { User, Assistant };

inline std::string_view to_string(Role r) { return r == Role::User ? "user" : "assistant"; }

inline Role role_from_string(std::string_view s) {
  if (s == "user") return Role::User;
  if (s == "assistant") return Role::Assistant;
  throw TranscriptError("unknown role '" + std::string(s) + "'");
}

struct ChatMessage {
  Role role = Role::User;
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

// Ordered messages starting with a user prompt; roles strictly alternate.
class ChatTranscript {
 public:
  ChatTranscript() = default;
  explicit ChatTranscript(ChatMessage initial) {
    if (initial.role != Role::User)
      throw TranscriptError("transcript must start with a user message");
    messages_.push_back(std::move(initial));
  }

  const std::vector<ChatMessage>& messages() const { return messages_; }
  std::size_t size() const { return messages_.size(); }
  bool empty() const { return messages_.empty(); }
  const ChatMessage& back() const { return messages_.back(); }

  std::size_t total_chars() const {
    std::size_t n = 0;
    for (const auto& m : messages_) n += m.content.size();
    return n;
  }

  bool operator==(const ChatTranscript&) const = default;

 private:
  friend ChatTranscript extend(const ChatTranscript&, std::string, ChatMessage);
  friend ChatTranscript cap_transcript(const ChatTranscript&, std::size_t);
  std::vector<ChatMessage> messages_;
};

namespace templates {

inline constexpr std::string_view kBuggyFunction = "{buggy_function}";
inline constexpr std::string_view kFailedTestCode = "{failed_test_code}";
inline constexpr std::string_view kCompilationError = "{compilation_error}";

inline std::string_view initial() { return generated::kInitial; }
inline std::string_view test_failure() { return generated::kTestFailure; }
inline std::string_view compile_failure() { return generated::kCompileFailure; }

// Literal single substitution; the inserted text is never rescanned.
inline std::string substitute(std::string_view tpl, std::string_view placeholder,
                              std::string_view value) {
  auto at = tpl.find(placeholder);
  if (at == std::string_view::npos) return std::string(tpl);
  std::string out;
  out.reserve(tpl.size() + value.size());
  out.append(tpl.substr(0, at));
  out.append(value);
  out.append(tpl.substr(at + placeholder.size()));
  return out;
}

}  // namespace templates

inline ChatMessage render_initial(const Problem& problem) {
  return {Role::User, templates::substitute(templates::initial(), templates::kBuggyFunction,
                                            problem.buggy_function_text)};
}

inline ChatMessage render_test_failure(std::string_view failed_test_code) {
  return {Role::User, templates::substitute(templates::test_failure(),
                                            templates::kFailedTestCode, failed_test_code)};
}

inline ChatMessage render_compile_failure(std::string_view compilation_error) {
  return {Role::User, templates::substitute(templates::compile_failure(),
                                            templates::kCompilationError, compilation_error)};
}

// Appends the model's answer and the next feedback prompt.
inline ChatTranscript extend(const ChatTranscript& transcript, std::string assistant_answer,
                             ChatMessage feedback_message) {
  if (transcript.empty() || transcript.back().role != Role::User)
    throw TranscriptError("extend requires a transcript ending in a user message");
  if (feedback_message.role != Role::User)
    throw TranscriptError("feedback message must have role user");
  ChatTranscript out = transcript;
  out.messages_.push_back({Role::Assistant, std::move(assistant_answer)});
  out.messages_.push_back(std::move(feedback_message));
  return out;
}

// Drops the oldest (assistant, feedback) pairs until the transcript fits in
// max_chars or only the initial prompt and the newest pair remain.
inline ChatTranscript cap_transcript(const ChatTranscript& transcript, std::size_t max_chars) {
  ChatTranscript out = transcript;
  auto& msgs = out.messages_;
  while (msgs.size() > 3 && out.total_chars() > max_chars)
    msgs.erase(msgs.begin() + 1, msgs.begin() + 3);
  return out;
}

inline nlohmann::json to_json(const ChatTranscript& t) {
  auto arr = nlohmann::json::array();
  for (const auto& m : t.messages())
    arr.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  return arr;
}

}  // namespace iterfix
