#ifndef TKGQA_LLM_CLIENT_H_
#define TKGQA_LLM_CLIENT_H_

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tkgqa/prompt_builder.h"

namespace tkgqa {

struct GenerationParams {
  double temperature = 0.0;
  int max_tokens = 256;
  std::string model = "gpt-3.5-turbo-0613";
};

// Chat-completion transport. Implementations must be safe to call from
// several threads.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  // Returns the assistant text. Throws TransportError on failure.
  virtual std::string send(const std::vector<ChatMessage>& messages,
                           const GenerationParams& params) = 0;
};

// Stable 64-bit FNV-1a over role and content of every message.
std::uint64_t prompt_hash(const std::vector<ChatMessage>& messages);

// Deterministic replies keyed by prompt hash, with an optional fallback
// reply for unscripted prompts. Counts calls so tests can assert traffic.
class ScriptedClient : public LlmClient {
 public:
  ScriptedClient() = default;
  explicit ScriptedClient(std::string default_reply) : default_reply_(std::move(default_reply)) {}

  void script(std::uint64_t hash, std::string reply);
  void script(const std::vector<ChatMessage>& messages, std::string reply);

  std::string send(const std::vector<ChatMessage>& messages,
                   const GenerationParams& params) override;

  std::size_t calls() const { return calls_.load(); }

 private:
  std::mutex mu_;
  std::map<std::uint64_t, std::string> replies_;
  std::optional<std::string> default_reply_;
  std::atomic<std::size_t> calls_{0};
};

// Client that refuses every request; used for offline (--oracle) runs to
// prove no prompt leaves the process.
class OfflineClient : public LlmClient {
 public:
  std::string send(const std::vector<ChatMessage>& messages,
                   const GenerationParams& params) override;
  std::size_t calls() const { return calls_.load(); }

 private:
  std::atomic<std::size_t> calls_{0};
};

struct RemoteClientConfig {
  // Full URL of the chat-completions endpoint, http:// or https://.
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string api_key;
  std::chrono::milliseconds timeout{30000};
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds max_backoff{8000};
  std::size_t max_in_flight = 4;
};

// Speaks the common chat-completion JSON schema over HTTP(S). Retries
// transport failures, 429 and 5xx responses with exponential backoff.
class RemoteClient : public LlmClient {
 public:
  explicit RemoteClient(RemoteClientConfig config);

  std::string send(const std::vector<ChatMessage>& messages,
                   const GenerationParams& params) override;

 private:
  std::string attempt(const std::string& body, int& status);

  RemoteClientConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  std::mutex slots_mu_;
  std::condition_variable slots_cv_;
  std::size_t in_flight_ = 0;
};

// Request body for a chat-completion call.
std::string chat_request_body(const std::vector<ChatMessage>& messages,
                              const GenerationParams& params);
// Extracts choices[0].message.content; throws TransportError if absent.
std::string parse_chat_response(const std::string& body);

}  // namespace tkgqa

#endif  // TKGQA_LLM_CLIENT_H_
