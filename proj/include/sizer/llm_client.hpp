#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace sizer {

/// Chat-completion endpoint. The credential is read from the environment
/// variable named by `credential_env`, never from a file or flag.
struct LlmEndpoint {
  std::string url = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o-mini";
  std::string credential_env = "SIZER_LLM_API_KEY";
  std::chrono::milliseconds timeout{60000};
  int retries = 2;
  std::chrono::milliseconds backoff{500};  // doubled per retry

  /// key=value file: url, model, credential_env, timeout_s, retries, backoff_ms.
  static LlmEndpoint load(const std::filesystem::path& path);
};

struct HttpReply {
  int status = 0;
  std::string body;
};

/// POST transport. Throws Error{transport} on connection-level failure.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual HttpReply post(const std::string& url, const std::map<std::string, std::string>& headers,
                         const std::string& body, std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib transport (http and https).
class HttpChatTransport final : public ChatTransport {
 public:
  HttpReply post(const std::string& url, const std::map<std::string, std::string>& headers,
                 const std::string& body, std::chrono::milliseconds timeout) override;
};

struct LlmExchange {
  int attempt = 0;
  int status = 0;       // 0 when the transport failed
  std::string error;    // transport error text, if any
  std::string response; // raw body
};

struct LlmReply {
  std::string text;
  std::string request;  // raw JSON body sent (without credentials)
  std::vector<LlmExchange> exchanges;
  int attempts() const { return static_cast<int>(exchanges.size()); }
};

/// Request body: {"model": ..., "messages": [{"role":"user","content": prompt}]}.
std::string chat_request_body(const LlmEndpoint& endpoint, const std::string& prompt);

/// Sends `prompt` as a single user message. Retries `endpoint.retries` times
/// on transport failures and 429/5xx with exponential backoff.
/// Throws Error{auth} (missing credential, 401/403), Error{transport},
/// Error{empty_completion}.
LlmReply llm_step(const LlmEndpoint& endpoint, const std::string& prompt, ChatTransport& transport);

/// Whether the endpoint's credential variable is set and nonempty.
bool credential_present(const LlmEndpoint& endpoint);

}  // namespace sizer
