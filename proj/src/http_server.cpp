#include "rits/http_server.hpp"

#include "rits/delimited.hpp"

#include <httplib.h>

#include <thread>

namespace rits {

namespace {

class BadRequest : public Error {
 public:
  using Error::Error;
};

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message,
                const std::vector<ConfigError::FieldIssue>& fields = {}) {
  Json j{{"error", message}};
  if (!fields.empty()) {
    Json list = Json::array();
    for (const auto& f : fields) list.push_back({{"field", f.field}, {"message", f.message}});
    j["fields"] = std::move(list);
  }
  send_json(res, status, j);
}

/// Maps domain exceptions onto status codes.
template <class F>
httplib::Server::Handler guarded(F fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ConfigError& e) {
      send_error(res, 422, e.what(), e.issues());
    } catch (const NotFound& e) {
      send_error(res, 404, e.what());
    } catch (const Conflict& e) {
      send_error(res, 409, e.what());
    } catch (const CorruptionError& e) {
      send_error(res, 422, e.what());
    } catch (const ValidationError& e) {
      send_error(res, 422, e.what());
    } catch (const BadRequest& e) {
      send_error(res, 400, e.what());
    } catch (const Json::exception& e) {
      send_error(res, 400, std::string("bad request: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  };
}

Json body_of(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  Json j;
  try {
    j = Json::parse(req.body);
  } catch (const Json::parse_error& e) {
    throw BadRequest(std::string("malformed JSON body: ") + e.what());
  }
  if (!j.is_object()) throw BadRequest("request body must be a JSON object");
  return j;
}

std::vector<double> number_list(const Json& j, const char* field) {
  if (!j.is_array()) throw ValidationError(std::string(field) + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw ValidationError(std::string(field) + " must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

double number_field(const Json& j, const char* field) {
  const auto it = j.find(field);
  if (it == j.end() || !it->is_number()) throw ValidationError(std::string(field) + " must be a number");
  return it->get<double>();
}

}  // namespace

struct HttpServer::Impl {
  TrialService& service;
  HttpOptions options;
  httplib::Server server;
  std::thread thread;

  Impl(TrialService& s, HttpOptions o) : service(s), options(std::move(o)) {}
};

HttpServer::HttpServer(TrialService& service, HttpOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  auto& svc = impl_->service;
  auto& server = impl_->server;
  const HttpOptions opts = impl_->options;

  server.set_pre_routing_handler([opts](const httplib::Request& req, httplib::Response& res) {
    if (!opts.cors_origin.empty()) {
      res.set_header("Access-Control-Allow-Origin", opts.cors_origin);
      res.set_header("Access-Control-Allow-Headers", "Content-Type, Authorization");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    }
    if (req.method == "OPTIONS") {
      res.status = 204;
      return httplib::Server::HandlerResponse::Handled;
    }
    if (opts.token && req.get_header_value("Authorization") != "Bearer " + *opts.token) {
      send_error(res, 401, "missing or wrong bearer token");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  server.Post("/trials", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const Json body = body_of(req);
    const TrialConfig config = config_from_json(body.value("config", Json::object()));
    const PolicyKind policy = policy_from_json(body.value("policy", Json{{"name", "rits"}, {"w", config.w}}));
    const std::string id = svc.create_trial(config, policy);
    send_json(res, 201,
              {{"trial_id", id}, {"participants", 0}, {"config", to_json(config)}, {"policy", to_json(policy)}});
  }));

  server.Get("/trials", guarded([&svc](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"trials", svc.trials()}});
  }));

  server.Get(R"(/trials/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const auto state = svc.snapshot(req.matches[1]);
    send_json(res, 200,
              {{"trial_id", state->trial_id},
               {"created_at", state->created_at},
               {"config", to_json(state->config)},
               {"policy", to_json(state->policy)}});
  }));

  server.Post(R"(/trials/([^/]+)/participants)",
              guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                const Json body = body_of(req);
                if (!body.contains("covariates")) throw ValidationError("covariates are required");
                const std::string id = req.matches[1];
                const auto receipt = svc.enroll(id, number_list(body["covariates"], "covariates"));
                send_json(res, 201, to_json(receipt, id));
              }));

  server.Post(R"(/trials/([^/]+)/participants/([^/]+)/outcomes)",
              guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                const Json body = body_of(req);
                const std::string id = req.matches[1];
                const auto pid = parse_integer(std::string(req.matches[2]));
                if (!pid) throw NotFound("participant id must be an integer");
                svc.record_outcome(id, static_cast<int>(*pid), number_field(body, "efficacy"),
                                   number_field(body, "safety"));
                send_json(res, 201, {{"trial_id", id}, {"participant_id", *pid}, {"recorded", true}});
              }));

  server.Get(R"(/trials/([^/]+)/cs)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const Variant variant = parse_variant(req.has_param("variant") ? req.get_param_value("variant") : "aipw");
    send_json(res, 200, to_json(svc.cs(id, variant), id));
  }));

  server.Get(R"(/trials/([^/]+)/status)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    send_json(res, 200, to_json(svc.status(id), id));
  }));

  server.Post(R"(/trials/([^/]+)/stop)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const Json body = body_of(req);
    const std::string id = req.matches[1];
    const std::string reason = body.contains("reason") && body["reason"].is_string()
                                   ? body["reason"].get<std::string>()
                                   : "operator";
    send_json(res, 200, to_json(svc.stop(id, reason), id));
  }));

  server.Get(R"(/trials/([^/]+)/journal)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    res.status = 200;
    res.set_content(svc.journal(req.matches[1]), "application/x-ndjson");
  }));

  server.Get(R"(/trials/([^/]+)/preview)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!req.has_param("w")) throw ValidationError("w is required");
    const auto w = parse_double(req.get_param_value("w"));
    if (!w) throw ValidationError("w must be a number");
    std::vector<double> x;
    if (req.has_param("x") && !req.get_param_value("x").empty()) {
      for (const auto& cell : split_fields(req.get_param_value("x"))) {
        const auto v = parse_double(cell);
        if (!v) throw ValidationError("x must be a comma-separated list of numbers");
        x.push_back(*v);
      }
    }
    send_json(res, 200, to_json(svc.preview(id, *w, x), id));
  }));
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start() {
  auto& server = impl_->server;
  if (impl_->options.port == 0) {
    port_ = server.bind_to_any_port(impl_->options.host);
  } else {
    if (!server.bind_to_port(impl_->options.host, impl_->options.port))
      throw Error("cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
    port_ = impl_->options.port;
  }
  if (port_ <= 0) throw Error("cannot bind " + impl_->options.host);
  impl_->thread = std::thread([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
  return port_;
}

void HttpServer::run() {
  port_ = impl_->options.port;
  if (!impl_->server.listen(impl_->options.host, impl_->options.port))
    throw Error("cannot serve on " + impl_->options.host + ":" + std::to_string(impl_->options.port));
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace rits
