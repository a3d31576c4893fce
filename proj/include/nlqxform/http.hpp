#pragma once

// Small HTTP helpers shared by the linker, endpoint and translator clients.

#include <chrono>
#include <cstddef>
#include <map>
#include <mutex>
#include <string>
#include <string_view>

namespace nlqx::http {

/// Percent-encodes everything except RFC 3986 unreserved characters.
std::string url_encode(std::string_view s);
/// Inverse of url_encode; '+' is decoded as a space.
std::string url_decode(std::string_view s);

struct BaseUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // path prefix without trailing '/', possibly empty
};

/// Throws ConfigError on anything that is not http(s)://host[:port][/path].
BaseUrl split_url(std::string_view url);

struct Response {
  int status = 0;
  std::string body;
};

enum class Failure { None, Connection, Timeout };

struct Request {
  std::string url;  // full URL including query string
  std::string method = "GET";
  std::string body;
  std::string content_type;
  std::map<std::string, std::string> headers;
  std::chrono::milliseconds timeout{15000};
};

struct Outcome {
  Failure failure = Failure::None;
  Response response;
  std::string error;  // transport error description
};

/// Blocking request with connect/read timeouts; never throws for transport
/// failures (they are reported in Outcome::failure).
Outcome perform(const Request& request);

/// Spaces request starts at least 1/rate seconds apart across all callers.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_second);
  void acquire();

 private:
  std::mutex mutex_;
  std::chrono::steady_clock::duration interval_;
  std::chrono::steady_clock::time_point next_;
};

}  // namespace nlqx::http
