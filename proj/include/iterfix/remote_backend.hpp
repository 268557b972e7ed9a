#pragma once

// Chat-completion backend over HTTP(S). Requests one call per turn with the
// provider's n-candidate parameter and maps the ranked choices to outputs.

#include <algorithm>
#include <chrono>
#include <functional>
#include <regex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "iterfix/backend.hpp"

namespace iterfix {

struct HttpResult {
  int status = 0;  // 0 means the transport failed before a response arrived
  std::string body;
  std::string error;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;
using HttpTransport =
    std::function<HttpResult(const std::string& path, const std::string& body,
                             const HttpHeaders& headers)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct Endpoint {
  std::string scheme;
  std::string host;
  int port = 0;
  std::string path;

  std::string origin() const { return scheme + "://" + host + ":" + std::to_string(port); }
};

inline Endpoint parse_endpoint(const std::string& url) {
  static const std::regex re(R"(^(https?)://([A-Za-z0-9.\-]+|\[[0-9A-Fa-f:]+\])(?::(\d{1,5}))?(/[^\s]*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw BackendError("invalid endpoint URL '" + url + "'");
  Endpoint e;
  e.scheme = m[1];
  e.host = m[2];
  e.port = m[3].matched ? std::stoi(m[3]) : (e.scheme == "https" ? 443 : 80);
  if (e.port <= 0 || e.port > 65535) throw BackendError("invalid port in '" + url + "'");
  e.path = m[4].matched ? std::string(m[4]) : std::string();
  if (e.path.empty() || e.path == "/") e.path = "/v1/chat/completions";
  return e;
}

struct RemoteConfig {
  std::string endpoint;
  std::string model_id;
  std::string auth;  // bearer token; empty sends no Authorization header
  // Pinned decoding parameters merged into every request.
  nlohmann::json decoding = {{"temperature", 0}};
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  int timeout_seconds = 600;
  bool emulate_n_by_repeats = false;
};

inline HttpTransport make_http_transport(const Endpoint& endpoint, int timeout_seconds) {
  return [origin = endpoint.origin(), timeout_seconds](
             const std::string& path, const std::string& body,
             const HttpHeaders& headers) -> HttpResult {
    httplib::Client client(origin);
    client.set_connection_timeout(timeout_seconds, 0);
    client.set_read_timeout(timeout_seconds, 0);
    client.set_write_timeout(timeout_seconds, 0);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    if (!res) return {0, {}, httplib::to_string(res.error())};
    return {res->status, res->body, {}};
  };
}

class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig config, HttpTransport transport = {},
                         Sleeper sleeper = {})
      : config_(std::move(config)), endpoint_(parse_endpoint(config_.endpoint)) {
    if (config_.max_attempts < 1) throw BackendError("max_attempts must be at least 1");
    if (!config_.decoding.is_object())
      throw BackendError("decoding parameters must be a JSON object");
    transport_ = transport ? std::move(transport)
                           : make_http_transport(endpoint_, config_.timeout_seconds);
    sleeper_ = sleeper ? std::move(sleeper)
                       : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); });
  }

  nlohmann::json describe() const override {
    return {{"kind", "remote"},
            {"endpoint", config_.endpoint},
            {"model", config_.model_id},
            {"decoding", config_.decoding},
            {"max_attempts", config_.max_attempts},
            {"initial_backoff_ms", config_.initial_backoff.count()},
            {"emulate_n_by_repeats", config_.emulate_n_by_repeats}};
  }

  nlohmann::json wire_request(const ChatTranscript& transcript, int n) const {
    nlohmann::json body = config_.decoding;
    body["model"] = config_.model_id;
    body["messages"] = to_json(transcript);
    body["n"] = n;
    return body;
  }

 protected:
  GenerationResponse do_generate(const GenerationRequest& request) override {
    GenerationResponse out;
    int retries = 0;
    if (config_.emulate_n_by_repeats) {
      for (int k = 0; k < request.num_outputs; ++k) {
        auto one = call(request.transcript, 1, retries);
        if (one.empty()) throw ShortResponseError(1, 0);
        out.outputs.push_back(std::move(one.front()));
      }
      out.backend_metadata["emulated_n"] = "true";
    } else {
      out.outputs = call(request.transcript, request.num_outputs, retries);
    }
    out.backend_metadata["retries"] = std::to_string(retries);
    return out;
  }

 private:
  std::vector<std::string> call(const ChatTranscript& transcript, int n, int& retries) {
    const auto body = wire_request(transcript, n).dump();
    HttpHeaders headers{{"Content-Type", "application/json"}};
    if (!config_.auth.empty()) headers.emplace_back("Authorization", "Bearer " + config_.auth);

    auto backoff = config_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
      auto res = transport_(endpoint_.path, body, headers);
      bool transient = res.status == 0 || res.status >= 500;
      if (!transient) {
        if (res.status < 200 || res.status >= 300)
          throw BackendError("backend returned HTTP " + std::to_string(res.status) + ": " +
                             res.body.substr(0, 500));
        return parse_choices(res.body);
      }
      if (attempt >= config_.max_attempts) {
        if (res.status == 0) throw BackendError("backend unreachable: " + res.error);
        throw BackendError("backend returned HTTP " + std::to_string(res.status) + " after " +
                           std::to_string(attempt) + " attempts");
      }
      ++retries;
      sleeper_(backoff);
      backoff *= 2;
    }
  }

  static std::vector<std::string> parse_choices(const std::string& body) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw BackendError(std::string("malformed backend response: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("choices") || !doc.at("choices").is_array())
      throw BackendError("backend response is missing choices");
    std::vector<std::pair<long long, std::string>> ranked;
    long long position = 0;
    for (const auto& c : doc.at("choices")) {
      const nlohmann::json* content = nullptr;
      if (c.contains("message") && c.at("message").is_object() &&
          c.at("message").contains("content"))
        content = &c.at("message").at("content");
      else if (c.contains("text"))
        content = &c.at("text");
      if (!content || !content->is_string())
        throw BackendError("backend choice has no text content");
      long long idx = c.contains("index") && c.at("index").is_number_integer()
                          ? c.at("index").get<long long>()
                          : position;
      ranked.emplace_back(idx, content->get<std::string>());
      ++position;
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::string> outs;
    outs.reserve(ranked.size());
    for (auto& [idx, text] : ranked) outs.push_back(std::move(text));
    return outs;
  }

  RemoteConfig config_;
  Endpoint endpoint_;
  HttpTransport transport_;
  Sleeper sleeper_;
};

}  // namespace iterfix
