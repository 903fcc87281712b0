#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "hanrag/llm.hpp"

namespace hanrag {

using nlohmann::json;

namespace {

std::atomic<std::uint64_t> g_process_requests{0};

// Thrown for 4xx responses and malformed bodies; never retried.
class RequestError : public Error {
 public:
  using Error::Error;
};

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.max_parallel == 0) throw Error("http backend: max_parallel must be >= 1");
  if (config_.max_attempts < 1) throw Error("http backend: max_attempts must be >= 1");
  const auto& url = config_.endpoint_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("http backend: endpoint_url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
  }
}

std::uint64_t HttpBackend::process_requests_sent() noexcept { return g_process_requests.load(); }

std::string HttpBackend::request_body(std::string_view prompt, const GenParams& params) const {
  json body = {
      {"model", config_.model_name},
      {"messages", json::array({{{"role", "user"}, {"content", std::string(prompt)}}})},
      {"temperature", params.temperature},
      {"max_tokens", params.max_tokens},
  };
  if (!params.stop.empty()) body["stop"] = params.stop;
  return body.dump();
}

std::string HttpBackend::parse_response(std::string_view body) {
  try {
    const json doc = json::parse(body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw RequestError(std::string("http backend: malformed completion response: ") + e.what());
  }
}

std::string HttpBackend::attempt(const std::string& body) {
  httplib::Client client(scheme_host_port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  ++requests_;
  ++g_process_requests;
  auto res = client.Post(path_, headers, body, "application/json");
  if (!res) {
    const auto err = res.error();
    const std::string what = "http backend: " + httplib::to_string(err);
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) throw TimeoutError(what);
    throw TransportError(what);
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("http backend: server returned " + std::to_string(res->status));
  }
  if (res->status < 200 || res->status >= 300) {
    throw RequestError("http backend: server returned " + std::to_string(res->status) + ": " + res->body);
  }
  return parse_response(res->body);
}

std::string HttpBackend::complete(std::string_view prompt, const GenParams& params) {
  {
    std::unique_lock lock(slots_mutex_);
    slots_cv_.wait(lock, [&] { return in_flight_ < config_.max_parallel; });
    ++in_flight_;
  }
  struct Release {
    HttpBackend& self;
    ~Release() {
      {
        std::lock_guard lock(self.slots_mutex_);
        --self.in_flight_;
      }
      self.slots_cv_.notify_one();
    }
  } release{*this};

  const std::string body = request_body(prompt, params);
  auto backoff = config_.initial_backoff;
  for (int i = 1;; ++i) {
    try {
      return attempt(body);
    } catch (const TransportError&) {
      if (i >= config_.max_attempts) throw;
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

}  // namespace hanrag
