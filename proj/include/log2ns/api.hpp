#pragma once

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "log2ns/json_io.hpp"
#include "log2ns/pipeline.hpp"

namespace log2ns {

struct ApiResponse {
  int status = 200;
  Json body;
};

// HTTP contract over a loaded workspace. Every handler is const; the
// workspace is never modified, so handlers may run concurrently.
class Api {
 public:
  // Throws NotFoundError listing missing stages when the workspace lacks the
  // corpus, embedding, vectors, clusters or compiled policy.
  explicit Api(const Workspace& workspace, Parallelism par = {});

  ApiResponse handle(std::string_view method, std::string_view path,
                     const std::map<std::string, std::string>& params,
                     std::string_view body) const;

  ApiResponse clusters() const;
  ApiResponse cluster(std::string_view id) const;
  ApiResponse projection() const;
  ApiResponse neighbors(const std::map<std::string, std::string>& params) const;
  ApiResponse query(std::string_view body) const;
  ApiResponse witness_check(std::string_view body) const;
  ApiResponse rules() const;
  ApiResponse effective_region(std::string_view rule) const;

 private:
  const Workspace& ws_;
  Parallelism par_;
  std::vector<Json> summaries_;
  Json projection_;
};

// Blocks serving `api` on host:port until `stop` is called or the process
// ends. `on_ready` runs once the socket is bound, with the bound port and a
// stop callback that may be invoked from any thread.
using ReadyCallback = std::function<void(int, std::function<void()>)>;
void serve_http(const Api& api, const std::string& host, int port,
                const ReadyCallback& on_ready = {});

}  // namespace log2ns
