#pragma once

#include <cstdlib>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "semflow/backend/backend.hpp"

namespace semflow {

struct OpenAiConfig {
  std::string base_url;  // MODEL_API_BASE when empty
  std::string api_key;   // MODEL_API_KEY when empty
  std::string model = "gpt-4o-mini";
  std::string embedding_model = "text-embedding-3-small";
  std::size_t dimension = 1536;
  int timeout_s = 60;
  int max_retries = 2;
};

/// Client for an OpenAI-style chat-completions / embeddings API. https
/// base URLs need cpp-httplib built with CPPHTTPLIB_OPENSSL_SUPPORT.
class OpenAiBackend : public ModelBackend {
 public:
  explicit OpenAiBackend(OpenAiConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty())
      if (const char* b = std::getenv("MODEL_API_BASE")) cfg_.base_url = b;
    if (cfg_.api_key.empty())
      if (const char* k = std::getenv("MODEL_API_KEY")) cfg_.api_key = k;
    if (cfg_.base_url.empty()) throw ConfigError("MODEL_API_BASE is not set");
    if (cfg_.api_key.empty()) throw ConfigError("MODEL_API_KEY is not set");
  }

  std::string provider() const override { return "openai"; }
  std::size_t dimension() const override { return cfg_.dimension; }

  Completion complete(const std::string& prompt) override {
    const nlohmann::json body{{"model", cfg_.model},
                              {"temperature", 0},
                              {"messages", {{{"role", "user"}, {"content", prompt}}}}};
    const auto r = post("/v1/chat/completions", body);
    Completion c;
    try {
      c.text = r.at("choices").at(0).at("message").at("content").get<std::string>();
      c.usage.prompt_tokens = r.at("usage").value("prompt_tokens", 0);
      c.usage.completion_tokens = r.at("usage").value("completion_tokens", 0);
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("unexpected completion response: ") + e.what());
    }
    return c;
  }

  Embedding embed(const std::string& s) override {
    Embedding e;
    if (s.empty()) {
      e.vector.assign(cfg_.dimension, 0.0);
      e.zero = true;
      return e;
    }
    const auto r = post("/v1/embeddings", {{"model", cfg_.embedding_model}, {"input", s}});
    try {
      e.vector = r.at("data").at(0).at("embedding").get<Vector>();
      e.usage.prompt_tokens = r.at("usage").value("prompt_tokens", 0);
    } catch (const nlohmann::json::exception& ex) {
      throw BackendError(std::string("unexpected embedding response: ") + ex.what());
    }
    if (e.vector.size() != cfg_.dimension)
      throw BackendError("embedding dimension " + std::to_string(e.vector.size()) + " != configured " +
                         std::to_string(cfg_.dimension));
    return e;
  }

 private:
  OpenAiConfig cfg_;

  nlohmann::json post(const std::string& path, const nlohmann::json& body) {
    httplib::Client cli(cfg_.base_url);
    cli.set_connection_timeout(cfg_.timeout_s);
    cli.set_read_timeout(cfg_.timeout_s);
    cli.set_bearer_token_auth(cfg_.api_key);
    std::string last;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      auto res = cli.Post(path, body.dump(), "application/json");
      if (!res) {
        if (res.error() == httplib::Error::Read || res.error() == httplib::Error::Write) {
          last = "timeout";
          continue;
        }
        last = httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500 || res->status == 429) {
        last = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body);
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("invalid JSON from provider: ") + e.what());
      }
    }
    if (last == "timeout") throw TimeoutError("provider call timed out after retries");
    throw BackendError("provider call failed after retries: " + last);
  }
};

}  // namespace semflow
