#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cmath>

#include "uigauge/error.hpp"
#include "uigauge/inference.hpp"

namespace uigauge {

namespace {

class HttpTransport : public Transport {
 public:
  HttpResponse post(const HttpRequest& request) override {
    // Split "scheme://host[:port]/path?query" for httplib.
    auto scheme_end = request.url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::ConfigError, "endpoint needs a scheme: " + request.url);
    auto path_begin = request.url.find('/', scheme_end + 3);
    std::string origin = request.url.substr(0, path_begin);
    std::string path = path_begin == std::string::npos ? "/" : request.url.substr(path_begin);

    httplib::Client client(origin);
    auto secs = static_cast<time_t>(request.timeout_s);
    auto usecs = static_cast<time_t>((request.timeout_s - std::floor(request.timeout_s)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [k, v] : request.headers) {
      if (k == "Content-Type") {
        content_type = v;
      } else {
        headers.emplace(k, v);
      }
    }
    auto result = client.Post(path, headers, request.body, content_type);
    if (!result) {
      auto err = result.error();
      std::string what = httplib::to_string(err) + " (" + request.url + ")";
      if (err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout) {
        throw Error(ErrorCode::Timeout, what);
      }
      throw Error(ErrorCode::BackendError, what);
    }
    return HttpResponse{result->status, result->body};
  }
};

}  // namespace

std::shared_ptr<Transport> make_http_transport() { return std::make_shared<HttpTransport>(); }

}  // namespace uigauge
