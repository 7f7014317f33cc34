#pragma once

#include "dqlens/workbench.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace dqlens {

inline constexpr const char* kApiPrefix = "/api/v1";

// JSON over HTTP in front of a Workbench. Errors come back as
// {"code", "message", "detail"} with the status of their ErrorCode.
class HttpServer {
 public:
  // Serves files under static_dir at "/" when it is non-empty.
  explicit HttpServer(Workbench& wb, std::filesystem::path static_dir = {});
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Blocks until stop().
  bool listen(const std::string& host, int port);
  // Binds to an ephemeral port and returns it (-1 on failure); follow with
  // listen_after_bind() on a worker thread.
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void wait_until_ready() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dqlens
