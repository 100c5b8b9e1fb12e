#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "semflow/backend/mock.hpp"

#ifdef SEMFLOW_WITH_HTTP_BACKEND
#include "semflow/backend/openai.hpp"
#endif

namespace semflow {

/// Builds a backend from the `backend` object of a pipeline spec.
inline std::shared_ptr<ModelBackend> make_backend(const nlohmann::json& cfg) {
  const auto provider = cfg.value("provider", std::string("mock"));
  if (provider == "mock") return std::make_shared<MockBackend>(mock_config_from_json(cfg));
#ifdef SEMFLOW_WITH_HTTP_BACKEND
  if (provider == "openai") {
    OpenAiConfig c;
    c.base_url = cfg.value("base_url", std::string());
    c.model = cfg.value("model", c.model);
    c.embedding_model = cfg.value("embedding_model", c.embedding_model);
    c.dimension = cfg.value("dimension", c.dimension);
    c.timeout_s = cfg.value("timeout_s", c.timeout_s);
    c.max_retries = cfg.value("max_retries", c.max_retries);
    return std::make_shared<OpenAiBackend>(c);
  }
#endif
  throw ConfigError("unknown or unavailable backend provider '" + provider + "'");
}

}  // namespace semflow
