#pragma once

#include <string>

#include <httplib.h>
#include <json.hpp>

#include "semflow/nl/synthesize.hpp"
#include "semflow/service/run_store.hpp"

namespace semflow::service {

/// HTTP status for a library error.
inline int http_status(const Error& e) {
  const auto& c = e.code();
  if (c == "RunNotFound" || c == "PipelineNotFound" || c == "UnknownOperator") return 404;
  if (c == "PreconditionError" || c == "OutOfOrderError" || c == "DuplicateDocError") return 409;
  if (c == "OperatorFailure") return 502;
  if (e.is_validation() || c == "InvalidDocument") return 400;
  return 500;
}

inline nlohmann::json error_body(const std::string& code, const std::string& message,
                                 nlohmann::json details = nlohmann::json::object()) {
  return {{"code", code}, {"message", message}, {"details", std::move(details)}};
}

inline nlohmann::json error_body(const Error& e) {
  auto details = nlohmann::json::object();
  if (const auto* f = dynamic_cast<const OperatorFailure*>(&e)) {
    details["operator_id"] = f->operator_id();
    details["cause"] = f->cause_code();
  } else if (const auto* r = dynamic_cast<const nl::RecompileRejected*>(&e)) {
    details["operator_id"] = r->critique().operator_id;
    details["critique"] = r->critique();
  } else if (const auto* s = dynamic_cast<const nl::SynthesisFailed*>(&e)) {
    details["critiques"] = s->critiques();
  } else if (const auto* x = dynamic_cast<const SyntaxError*>(&e)) {
    details["offset"] = x->offset();
  }
  return error_body(e.code(), e.what(), std::move(details));
}

inline nlohmann::json emissions_json(const std::vector<SinkEmission>& es) {
  auto a = nlohmann::json::array();
  for (const auto& e : es) {
    auto j = record_json(e.record);
    j["sink"] = e.sink_id;
    a.push_back(std::move(j));
  }
  return a;
}

/// REST front end over a RunStore. Every response is JSON; CORS is open.
class Server {
 public:
  explicit Server(RunStore& store, nlohmann::json default_backend = {{"provider", "mock"}})
      : store_(store), default_backend_(std::move(default_backend)) {
    routes();
  }

  httplib::Server& http() noexcept { return http_; }

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port) {
    if (port == 0) {
      const int p = http_.bind_to_any_port(host);
      if (p < 0) throw PortInUse("cannot bind " + host);
      return p;
    }
    if (!http_.bind_to_port(host, port)) throw PortInUse("port " + std::to_string(port) + " is unavailable");
    return port;
  }

  /// Blocks until stop().
  bool run() { return http_.listen_after_bind(); }
  void stop() { http_.stop(); }

 private:
  RunStore& store_;
  nlohmann::json default_backend_;
  httplib::Server http_;

  static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static nlohmann::json body_json(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    return parse_json_text(req.body, "request body");
  }

  template <typename F>
  static httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        reply(res, http_status(e), error_body(e));
      } catch (const nlohmann::json::exception& e) {
        reply(res, 400, error_body("SpecError", e.what()));
      } catch (const std::exception& e) {
        reply(res, 500, error_body("InternalError", e.what()));
      }
    };
  }

  void routes() {
    http_.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                               {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                               {"Access-Control-Allow-Headers", "Content-Type"}});
    http_.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    http_.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, {{"status", "ok"}});
    }));

    http_.Post("/pipelines", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto spec = parse_pipeline_spec(body_json(req));
      const auto id = store_.create_pipeline(spec);
      reply(res, 201, {{"pipeline_id", id}, {"spec", store_.pipeline(id)}});
    }));

    http_.Get(R"(/pipelines/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto id = req.matches[1].str();
      reply(res, 200, {{"pipeline_id", id}, {"spec", store_.pipeline(id)}});
    }));

    // Compiles a task into the pipeline's spec; creates the pipeline when absent.
    http_.Post(R"(/pipelines/([^/]+)/nl)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto id = req.matches[1].str();
      const auto body = body_json(req);
      const auto task = body.value("task", std::string());
      if (text::trim(task).empty()) throw SpecError("request needs a non-empty \"task\"");
      auto backend_cfg = body.value("backend", default_backend_);
      if (!body.contains("backend") && store_.has_pipeline(id)) backend_cfg = store_.pipeline(id).backend;
      auto backend = make_backend(backend_cfg);
      const auto r = nl::synthesize(task, *backend, body.value("max_rounds", 3));
      nlohmann::json out = r;
      out["pipeline_id"] = id;
      if (r.spec) {
        auto spec = *r.spec;
        spec.backend = backend_cfg;
        store_.put_pipeline(id, spec);
        out["spec"] = store_.pipeline(id);
      }
      reply(res, 200, out);
    }));

    // Body: {"edits": [{operator_id, param_key, value}]} or {"spec": {...}}.
    http_.Post(R"(/pipelines/([^/]+)/recompile)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto id = req.matches[1].str();
                 const auto body = body_json(req);
                 auto spec = body.contains("spec") ? parse_pipeline_spec(body["spec"]) : store_.pipeline(id);
                 const auto edits = body.value("edits", std::vector<nl::Edit>{});
                 auto out = nl::recompile(spec, edits);
                 store_.put_pipeline(id, out);
                 reply(res, 200, {{"pipeline_id", id}, {"spec", store_.pipeline(id)}});
               }));

    http_.Post(R"(/pipelines/([^/]+)/runs)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto id = req.matches[1].str();
      const auto run_id = store_.start_run(id);
      reply(res, 201, {{"run_id", run_id}, {"pipeline_id", id}});
    }));

    http_.Get(R"(/runs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto id = req.matches[1].str();
      reply(res, 200, {{"run_id", id}, {"flushed", store_.flushed(id)}});
    }));

    http_.Post(R"(/runs/([^/]+)/ingest)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto id = req.matches[1].str();
      const auto r = store_.ingest(id, req.body);
      reply(res, 200, {{"run_id", id}, {"ingested", r.ingested}, {"emissions", emissions_json(r.emissions)}});
    }));

    http_.Post(R"(/runs/([^/]+)/flush)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto id = req.matches[1].str();
      const auto out = store_.flush(id);
      reply(res, 200, {{"run_id", id}, {"emissions", emissions_json(out)}, {"report", store_.report(id)}});
    }));

    http_.Get(R"(/runs/([^/]+)/operators/([^/]+)/trace)",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                reply(res, 200, store_.trace(req.matches[1].str(), req.matches[2].str()));
              }));

    http_.Get(R"(/runs/([^/]+)/report)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      reply(res, 200, store_.report(req.matches[1].str()));
    }));

    http_.Get(R"(/runs/([^/]+)/matches)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto id = req.matches[1].str();
      auto rows = nlohmann::json::array();
      std::istringstream in(store_.matches(id));
      std::string line;
      while (std::getline(in, line))
        if (!line.empty()) rows.push_back(nlohmann::json::parse(line));
      reply(res, 200, {{"run_id", id}, {"matches", rows}});
    }));
  }
};

}  // namespace semflow::service
