#include "nlqxform/http.hpp"

#include <thread>

#include <httplib.h>

#include "nlqxform/errors.hpp"

namespace nlqx::http {

namespace {

bool unreserved(unsigned char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
         (c >= '0' && c <= '9') || c == '-' || c == '.' || c == '_' || c == '~';
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string url_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(s.size() * 3);
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (unreserved(c)) {
      out.push_back(ch);
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

std::string url_decode(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      const int hi = hex_value(s[i + 1]);
      const int lo = hex_value(s[i + 2]);
      if (hi >= 0 && lo >= 0) {
        out.push_back(static_cast<char>(hi * 16 + lo));
        i += 2;
        continue;
      }
    }
    out.push_back(s[i] == '+' ? ' ' : s[i]);
  }
  return out;
}

BaseUrl split_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos)
    throw ConfigError("not an absolute URL: " + std::string(url));
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    throw ConfigError("unsupported URL scheme: " + std::string(url));
  const auto host_start = scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  BaseUrl out;
  out.origin = std::string(url.substr(0, path_start));
  if (out.origin.size() <= host_start)
    throw ConfigError("URL has no host: " + std::string(url));
  if (path_start != std::string_view::npos) {
    out.path = std::string(url.substr(path_start));
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  }
  return out;
}

Outcome perform(const Request& request) {
  Outcome outcome;
  BaseUrl base;
  try {
    base = split_url(request.url);
  } catch (const ConfigError& e) {
    outcome.failure = Failure::Connection;
    outcome.error = e.what();
    return outcome;
  }
  const auto target_start = request.url.find('/', request.url.find("://") + 3);
  const std::string path = target_start == std::string::npos
                               ? std::string("/")
                               : request.url.substr(target_start);
  httplib::Client client(base.origin);
  const auto timeout = request.timeout;
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers(request.headers.begin(), request.headers.end());

  httplib::Result result =
      request.method == "POST"
          ? client.Post(path, headers, request.body,
                        request.content_type.empty() ? "application/octet-stream"
                                                     : request.content_type)
          : client.Get(path, headers);
  if (!result) {
    const auto err = result.error();
    outcome.failure = (err == httplib::Error::Read || err == httplib::Error::Write ||
                       err == httplib::Error::ConnectionTimeout)
                          ? Failure::Timeout
                          : Failure::Connection;
    outcome.error = httplib::to_string(err);
    return outcome;
  }
  outcome.response.status = result->status;
  outcome.response.body = result->body;
  return outcome;
}

RateLimiter::RateLimiter(double requests_per_second) {
  if (!(requests_per_second > 0))
    throw ConfigError("requests_per_second must be positive");
  interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / requests_per_second));
  next_ = std::chrono::steady_clock::now();
}

void RateLimiter::acquire() {
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

}  // namespace nlqx::http
