#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "sizer/llm_client.hpp"

#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sizer/kv.hpp"
#include "sizer/types.hpp"

namespace sizer {

LlmEndpoint LlmEndpoint::load(const std::filesystem::path& path) {
  LlmEndpoint e;
  for (const auto& [k, v] : kv::read_file(path)) {
    if (k == "url") e.url = v;
    else if (k == "model") e.model = v;
    else if (k == "credential_env") e.credential_env = v;
    else if (k == "timeout_s")
      e.timeout = std::chrono::milliseconds(static_cast<long>(kv::parse_double(v, k) * 1000));
    else if (k == "retries") e.retries = static_cast<int>(kv::parse_double(v, k));
    else if (k == "backoff_ms")
      e.backoff = std::chrono::milliseconds(static_cast<long>(kv::parse_double(v, k)));
    else throw Error(ErrorCode::config, fmt::format("{}: unknown endpoint key '{}'", path.string(), k));
  }
  if (e.retries < 0) throw Error(ErrorCode::config, "retries must be >= 0");
  return e;
}

bool credential_present(const LlmEndpoint& endpoint) {
  const char* v = std::getenv(endpoint.credential_env.c_str());
  return v != nullptr && *v != '\0';
}

std::string chat_request_body(const LlmEndpoint& endpoint, const std::string& prompt) {
  nlohmann::json j;
  j["model"] = endpoint.model;
  j["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
  return j.dump();
}

namespace {

std::string extract_content(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::empty_completion, fmt::format("reply is not JSON: {}", e.what()));
  }
  const auto* choices = j.contains("choices") ? &j["choices"] : nullptr;
  if (!choices || !choices->is_array() || choices->empty()) {
    throw Error(ErrorCode::empty_completion, "reply has no choices");
  }
  const auto& msg = (*choices)[0].value("message", nlohmann::json::object());
  const auto content = msg.value("content", nlohmann::json());
  if (!content.is_string() || content.get<std::string>().empty()) {
    throw Error(ErrorCode::empty_completion, "reply content is empty");
  }
  return content.get<std::string>();
}

}  // namespace

LlmReply llm_step(const LlmEndpoint& endpoint, const std::string& prompt, ChatTransport& transport) {
  const char* cred = std::getenv(endpoint.credential_env.c_str());
  if (cred == nullptr || *cred == '\0') {
    throw Error(ErrorCode::auth,
                fmt::format("credential variable {} is not set", endpoint.credential_env));
  }
  LlmReply reply;
  reply.request = chat_request_body(endpoint, prompt);
  const std::map<std::string, std::string> headers = {
      {"Authorization", std::string("Bearer ") + cred},
      {"Content-Type", "application/json"},
  };

  auto delay = endpoint.backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= endpoint.retries + 1; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    LlmExchange ex;
    ex.attempt = attempt;
    try {
      const auto r = transport.post(endpoint.url, headers, reply.request, endpoint.timeout);
      ex.status = r.status;
      ex.response = r.body;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::transport) throw;
      ex.error = e.what();
    }
    reply.exchanges.push_back(ex);

    if (!ex.error.empty()) {
      last_error = ex.error;
      continue;
    }
    if (ex.status == 401 || ex.status == 403) {
      throw Error(ErrorCode::auth, fmt::format("endpoint rejected the credential (HTTP {})", ex.status));
    }
    if (ex.status == 429 || ex.status >= 500) {
      last_error = fmt::format("HTTP {}", ex.status);
      continue;
    }
    if (ex.status < 200 || ex.status >= 300) {
      throw Error(ErrorCode::transport, fmt::format("HTTP {}: {}", ex.status, ex.response));
    }
    reply.text = extract_content(ex.response);
    return reply;
  }
  throw Error(ErrorCode::transport,
              fmt::format("giving up after {} attempts: {}", reply.attempts(), last_error));
}

HttpReply HttpChatTransport::post(const std::string& url,
                                  const std::map<std::string, std::string>& headers,
                                  const std::string& body, std::chrono::milliseconds timeout) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::config, fmt::format("bad url '{}'", url));
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string base = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client cli(base);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers h;
  std::string content_type = "application/json";
  for (const auto& [k, v] : headers) {
    if (k == "Content-Type") content_type = v;
    else h.emplace(k, v);
  }
  auto res = cli.Post(path, h, body, content_type);
  if (!res) {
    throw Error(ErrorCode::transport,
                fmt::format("POST {} failed: {}", url, httplib::to_string(res.error())));
  }
  return {res->status, res->body};
}

}  // namespace sizer
