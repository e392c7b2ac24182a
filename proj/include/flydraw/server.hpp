#pragma once

#include <memory>
#include <string>

#include "flydraw/service.hpp"

namespace flydraw {

struct HttpResult {
  int status = 200;
  std::string body;  // JSON
};

// Routes one request to the service without a socket.
//   POST /paths                  -> Service::submit_path
//   POST /sessions/{id}/simulate -> Service::simulate
//   GET  /sessions/{id}          -> Service::get_session
//   POST /train                  -> Service::train
//   GET  /models                 -> Service::list_models
//   GET  /config                 -> effective configuration
// Thrown errors become {"error": kind, "message": text}: InvalidInput and
// FormatError 400, NotFound 404 (also unknown routes), ConfigError 409,
// TrainingDiverged and PipelineFailure 422, anything else 500.
HttpResult handle_request(Service& service, const std::string& method, const std::string& path,
                          const std::string& body);

// Socket front end for handle_request. Every response carries permissive
// CORS headers and OPTIONS preflights get 204.
class ApiServer {
public:
  explicit ApiServer(Service& service);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Binds to port (0 picks a free one); returns the bound port or -1.
  int bind(const std::string& host, int port);
  // Blocks serving requests until stop(); call after bind().
  bool serve();
  void stop();
  void wait_until_ready() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace flydraw
