#include "flydraw/server.hpp"

#include <regex>

#include "httplib.h"
#include "json.hpp"

#include "flydraw/config.hpp"
#include "flydraw/errors.hpp"

namespace flydraw {

namespace {

HttpResult error_result(int status, const std::string& kind, const std::string& message) {
  return {status, nlohmann::json{{"error", kind}, {"message", message}}.dump()};
}

template <class F>
HttpResult guarded(F&& call) {
  try {
    return {200, call()};
  } catch (const InvalidInput& e) {
    return error_result(400, "invalid_input", e.what());
  } catch (const FormatError& e) {
    return error_result(400, "format_error", e.what());
  } catch (const ShapeError& e) {
    return error_result(400, "shape_error", e.what());
  } catch (const NotFound& e) {
    return error_result(404, "not_found", e.what());
  } catch (const ConfigError& e) {
    return error_result(409, "config_error", e.what());
  } catch (const TrainingDiverged& e) {
    return error_result(422, "training_diverged", e.what());
  } catch (const PipelineFailure& e) {
    return error_result(422, "pipeline_failure", e.what());
  } catch (const std::exception& e) {
    return error_result(500, "internal", e.what());
  }
}

}  // namespace

HttpResult handle_request(Service& service, const std::string& method, const std::string& path,
                          const std::string& body) {
  static const std::regex session_re(R"(^/sessions/([A-Za-z0-9_-]+)$)");
  static const std::regex simulate_re(R"(^/sessions/([A-Za-z0-9_-]+)/simulate$)");
  std::smatch m;
  if (method == "POST" && path == "/paths") return guarded([&] { return service.submit_path(body); });
  if (method == "POST" && path == "/train") return guarded([&] { return service.train(body); });
  if (method == "GET" && path == "/models") return guarded([&] { return service.list_models(); });
  if (method == "GET" && path == "/config")
    return guarded([&] { return format_config(service.config()); });
  if (method == "POST" && std::regex_match(path, m, simulate_re)) {
    const std::string id = m[1];
    return guarded([&] { return service.simulate(id, body); });
  }
  if (method == "GET" && std::regex_match(path, m, session_re)) {
    const std::string id = m[1];
    return guarded([&] { return service.get_session(id); });
  }
  return error_result(404, "not_found", "no route " + method + " " + path);
}

struct ApiServer::Impl {
  explicit Impl(Service& s) : service(s) {}
  Service& service;
  httplib::Server http;
};

ApiServer::ApiServer(Service& service) : impl_(std::make_unique<Impl>(service)) {
  httplib::Server& http = impl_->http;
  http.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                            {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                            {"Access-Control-Allow-Headers", "Content-Type"}});
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const HttpResult r = handle_request(impl_->service, req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  http.Get(R"(/.*)", route);
  http.Post(R"(/.*)", route);
  http.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->http.bind_to_any_port(host);
  return impl_->http.bind_to_port(host, port) ? port : -1;
}

bool ApiServer::serve() { return impl_->http.listen_after_bind(); }

void ApiServer::stop() {
  if (impl_) impl_->http.stop();
}

void ApiServer::wait_until_ready() const { impl_->http.wait_until_ready(); }

}  // namespace flydraw
