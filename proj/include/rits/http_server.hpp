#pragma once

#include "rits/service.hpp"

#include <memory>
#include <optional>
#include <string>

namespace rits {

struct HttpOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  /// When set, every request must carry "Authorization: Bearer <token>".
  std::optional<std::string> token;
  /// Value of Access-Control-Allow-Origin; empty disables CORS headers.
  std::string cors_origin = "*";
};

/// JSON API over a TrialService.
///   POST /trials                                   {"config": {...}, "policy": {...}}
///   GET  /trials
///   POST /trials/{id}/participants                 {"covariates": [...]}
///   POST /trials/{id}/participants/{pid}/outcomes  {"efficacy": R, "safety": S}
///   GET  /trials/{id}/cs?variant=aipw|ipw
///   GET  /trials/{id}/status
///   POST /trials/{id}/stop                         {"reason": "..."}
///   GET  /trials/{id}/journal
///   GET  /trials/{id}/preview?w=0.5&x=0.1,0.01
/// Errors: 400 malformed request, 422 invalid config or payload, 404
/// unknown trial or participant, 409 lifecycle conflict, 401 bad token.
class HttpServer {
 public:
  HttpServer(TrialService& service, HttpOptions options);
  ~HttpServer();

  /// Binds and serves on a background thread; returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const noexcept { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace rits
