#pragma once

// LLM backends. Both speak the chat-completion wire format:
//   request  {"model", "messages": [{"role": "user", "content"}], "temperature", "max_tokens"}
//   response {"choices": [{"message": {"role": "assistant", "content"}}], "model", ...}
// HttpBackend sends it to a completion server; MockBackend answers it
// in-process with deterministic keyword rules plus whatever labeled examples
// and codebook definitions the prompt carries.

#include <chrono>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <string_view>

#include "httplib.h"
#include "json.hpp"
#include "stancenet/corpus.hpp"
#include "stancenet/error.hpp"
#include "stancenet/prompt.hpp"
#include "stancenet/ragindex.hpp"
#include "stancenet/util.hpp"

namespace stancenet::llm {

using json = nlohmann::json;

struct LlmRequest {
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 16;
};

struct LlmResponse {
  std::string text;  // verbatim completion
  std::string backend;
  double latency_ms = 0;
};

inline json to_wire(const LlmRequest& req, const std::string& model) {
  return {{"model", model},
          {"messages", json::array({{{"role", "user"}, {"content", req.prompt}}})},
          {"temperature", req.temperature},
          {"max_tokens", req.max_tokens}};
}

inline std::string completion_text(const json& response) {
  try {
    const auto& content = response.at("choices").at(0).at("message").at("content");
    if (content.is_null()) return {};
    return content.get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed completion response: ") + e.what());
  }
}

class Backend {
 public:
  virtual ~Backend() = default;
  virtual LlmResponse complete(const LlmRequest& request) const = 0;
  virtual std::string name() const = 0;
};

// ---------------------------------------------------------------------------

struct HttpConfig {
  std::string endpoint = "http://127.0.0.1:8080";
  std::string path = "/v1/chat/completions";
  std::string model = "llama3";
  double timeout_s = 60;
  std::string api_key;  // sent as a bearer token when nonempty
};

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpConfig config) : config_(std::move(config)) {
    if (config_.endpoint.rfind("http://", 0) != 0) {
      throw ConfigError("HTTP backend endpoint must start with http:// (got '" +
                        config_.endpoint + "')");
    }
  }

  LlmResponse complete(const LlmRequest& request) const override {
    httplib::Client client(config_.endpoint);
    const auto secs = static_cast<time_t>(config_.timeout_s);
    const auto usecs = static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(config_.path, headers, to_wire(request, config_.model).dump(),
                           "application/json");
    const auto stop = std::chrono::steady_clock::now();
    if (!res) {
      throw BackendError("backend " + config_.endpoint + " unreachable: " +
                         httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw BackendError("backend returned HTTP " + std::to_string(res->status) + ": " +
                         res->body.substr(0, 200));
    }
    json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded()) throw BackendError("backend returned non-JSON body");
    return {completion_text(body), name(),
            std::chrono::duration<double, std::milli>(stop - start).count()};
  }

  std::string name() const override { return "http:" + config_.model; }

 private:
  HttpConfig config_;
};

// ---------------------------------------------------------------------------

/// Deterministic stand-in for a hosted model.
///
/// Evidence for a side is the number of post-content tokens found in that
/// side's keyword list, plus one per labeled example and one per codebook
/// definition of that side present in the prompt. Neutral definitions count
/// as neutral evidence. Every template gets a strictness of 1 or 2 derived
/// from the hash of its instruction text: the stronger side wins when its
/// evidence reaches the strictness and exceeds the neutral evidence
/// (Anti-Trans on an exact tie between sides), otherwise the answer is Neutral.
///
/// Test hooks: a post containing "[[unparseable]]" gets a non-answer at
/// temperature 0 and a normal answer on a warmer retry; "[[garbage]]" never
/// gets a usable answer.
class MockBackend final : public Backend {
 public:
  MockBackend() = default;
  MockBackend(std::set<std::string> anti_keywords, std::set<std::string> pro_keywords)
      : anti_(std::move(anti_keywords)), pro_(std::move(pro_keywords)) {}

  /// Wire-level entry point: chat-completion request JSON in, response JSON out.
  json handle(const json& request) const {
    if (!request.contains("messages") || !request["messages"].is_array() ||
        request["messages"].empty()) {
      throw BackendError("request has no messages");
    }
    std::string prompt;
    for (const auto& m : request["messages"]) prompt += m.value("content", "");
    const double temperature = request.value("temperature", 0.0);
    const std::string text = answer(prompt, temperature);
    return {{"id", "mock-" + hex64(fnv1a64(prompt))},
            {"object", "chat.completion"},
            {"model", request.value("model", "mock")},
            {"choices", json::array({{{"index", 0},
                                      {"message", {{"role", "assistant"}, {"content", text}}},
                                      {"finish_reason", "stop"}}})}};
  }

  LlmResponse complete(const LlmRequest& request) const override {
    const auto start = std::chrono::steady_clock::now();
    // Round-trip through the serialized wire form, as a remote server would see it.
    const json wire = json::parse(to_wire(request, "mock").dump());
    const std::string text = completion_text(json::parse(handle(wire).dump()));
    const auto stop = std::chrono::steady_clock::now();
    return {text, name(), std::chrono::duration<double, std::milli>(stop - start).count()};
  }

  std::string name() const override { return "mock"; }

  std::string answer(std::string_view prompt_text, double temperature) const {
    const auto parts = prompt::split_prompt(prompt_text);
    const std::string content = parts.post.value_or(std::string(prompt_text));
    if (content.find("[[garbage]]") != std::string::npos) return "I would rather not say.";
    if (content.find("[[unparseable]]") != std::string::npos && temperature <= 0.0) {
      return "Hmm, hard to tell.";
    }

    int anti = 0;
    int pro = 0;
    int neutral = 0;
    for (const auto& tok : rag::tokenize(content)) {
      anti += anti_.count(tok) ? 1 : 0;
      pro += pro_.count(tok) ? 1 : 0;
    }
    for (const auto& ex : parts.examples) {
      if (ex.label == Stance::AntiTrans) ++anti;
      if (ex.label == Stance::ProTrans) ++pro;
    }
    for (const auto& d : parts.definitions) {
      if (d.rfind("[Anti-Trans", 0) == 0) ++anti;
      else if (d.rfind("[Pro-Trans", 0) == 0) ++pro;
      else if (d.rfind("[Neutral", 0) == 0) ++neutral;
    }
    const int strictness = 1 + static_cast<int>(fnv1a64(parts.instructions) % 2);
    const int best = std::max(anti, pro);
    Stance verdict = Stance::Neutral;
    if (best >= strictness && best > neutral) {
      verdict = anti >= pro ? Stance::AntiTrans : Stance::ProTrans;
    }
    return "Label: " + display_name(verdict);
  }

  static const std::set<std::string>& default_anti_keywords() {
    static const std::set<std::string> k = {
        "ywnbaw",       "genderideology", "whatisawoman", "terftok",      "adulthumanfemale",
        "savethetomboys", "groomer",      "groomers",     "delusional",   "mutilation",
        "contagion",    "agenda",         "biology",      "biological",   "detrans",
        "genderconfusion", "nooneisborninthewrongbody",   "saveoursinglesexspaces",
        "savewomenssports", "protectthechildren"};
    return k;
  }

  static const std::set<std::string>& default_pro_keywords() {
    static const std::set<std::string> k = {
        "transrights",  "protecttranskids", "transisbeautiful", "tdov",       "tdor",
        "nonbinaryvisibility", "nonbinaryawareness", "transjoy", "transpride", "translivesmatter",
        "affirming",    "affirmation",      "allyship"};
    return k;
  }

 private:
  std::set<std::string> anti_ = default_anti_keywords();
  std::set<std::string> pro_ = default_pro_keywords();
};

/// Serves a MockBackend over HTTP at `path` on an existing server (tests, demos).
inline void mount_mock(httplib::Server& server, std::shared_ptr<const MockBackend> mock,
                       const std::string& path = "/v1/chat/completions") {
  server.Post(path, [mock](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded()) {
      res.status = 400;
      res.set_content(json{{"error", "body is not JSON"}}.dump(), "application/json");
      return;
    }
    try {
      res.set_content(mock->handle(body).dump(), "application/json");
    } catch (const BackendError& e) {
      res.status = 400;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  });
}

}  // namespace stancenet::llm
