#include <httplib.h>

#include "log2ns/api.hpp"
#include "log2ns/error.hpp"

namespace log2ns {

void serve_http(const Api& api, const std::string& host, int port,
                const ReadyCallback& on_ready) {
  httplib::Server server;
  auto dispatch = [&api](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> params;
    for (const auto& [key, value] : req.params) params.emplace(key, value);
    const auto out = api.handle(req.method, req.path, params, req.body);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  server.Get(".*", dispatch);
  server.Post(".*", dispatch);
  server.Put(".*", dispatch);
  server.Delete(".*", dispatch);

  const int bound = port == 0 ? server.bind_to_any_port(host)
                              : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  if (on_ready) on_ready(bound, [&server] { server.stop(); });
  server.listen_after_bind();
}

}  // namespace log2ns
