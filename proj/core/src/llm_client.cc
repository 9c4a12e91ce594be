#include "tkgqa/llm_client.h"

#include <algorithm>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tkgqa/error.h"

namespace tkgqa {

std::uint64_t prompt_hash(const std::vector<ChatMessage>& messages) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    // Field separator so ("ab","c") and ("a","bc") differ.
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (const auto& m : messages) {
    mix(m.role);
    mix(m.content);
  }
  return h;
}

void ScriptedClient::script(std::uint64_t hash, std::string reply) {
  std::lock_guard<std::mutex> lock(mu_);
  replies_[hash] = std::move(reply);
}

void ScriptedClient::script(const std::vector<ChatMessage>& messages, std::string reply) {
  script(prompt_hash(messages), std::move(reply));
}

std::string ScriptedClient::send(const std::vector<ChatMessage>& messages,
                                 const GenerationParams&) {
  if (messages.empty()) throw ValidationError("cannot send an empty message list");
  ++calls_;
  std::lock_guard<std::mutex> lock(mu_);
  if (auto it = replies_.find(prompt_hash(messages)); it != replies_.end()) return it->second;
  if (default_reply_) return *default_reply_;
  throw TransportError("scripted client has no reply for this prompt");
}

std::string OfflineClient::send(const std::vector<ChatMessage>&, const GenerationParams&) {
  ++calls_;
  throw TransportError("offline mode: no LLM requests are allowed");
}

std::string chat_request_body(const std::vector<ChatMessage>& messages,
                              const GenerationParams& params) {
  nlohmann::ordered_json body;
  body["model"] = params.model;
  auto& msgs = body["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  body["temperature"] = params.temperature;
  body["max_tokens"] = params.max_tokens;
  return body.dump();
}

std::string parse_chat_response(const std::string& body) {
  try {
    const auto j = nlohmann::json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed chat-completion response: ") + e.what());
  }
}

RemoteClient::RemoteClient(RemoteClientConfig config) : config_(std::move(config)) {
  const std::string& url = config_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("endpoint must be an absolute http(s) URL: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (config_.max_attempts < 1) config_.max_attempts = 1;
  if (config_.max_in_flight == 0) config_.max_in_flight = 1;
}

std::string RemoteClient::attempt(const std::string& body, int& status) {
  httplib::Client cli(scheme_host_port_);
  const auto secs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout);
  cli.set_connection_timeout(secs);
  cli.set_read_timeout(secs);
  cli.set_write_timeout(secs);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  auto res = cli.Post(path_, headers, body, "application/json");
  if (!res) {
    status = 0;
    throw TransportError("request to " + config_.endpoint + " failed: " +
                         httplib::to_string(res.error()));
  }
  status = res->status;
  if (status < 200 || status >= 300) {
    throw TransportError("endpoint returned HTTP " + std::to_string(status) + ": " +
                             res->body.substr(0, 512),
                         status);
  }
  return parse_chat_response(res->body);
}

std::string RemoteClient::send(const std::vector<ChatMessage>& messages,
                               const GenerationParams& params) {
  if (messages.empty()) throw ValidationError("cannot send an empty message list");
  const std::string body = chat_request_body(messages, params);

  {
    std::unique_lock<std::mutex> lock(slots_mu_);
    slots_cv_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
    ++in_flight_;
  }
  struct Release {
    RemoteClient* self;
    ~Release() {
      {
        std::lock_guard<std::mutex> lock(self->slots_mu_);
        --self->in_flight_;
      }
      self->slots_cv_.notify_one();
    }
  } release{this};

  auto backoff = config_.initial_backoff;
  for (int i = 1;; ++i) {
    int status = 0;
    try {
      return attempt(body, status);
    } catch (const TransportError& e) {
      const bool retryable = status == 0 || status == 429 || status >= 500;
      if (!retryable || i >= config_.max_attempts) {
        throw TransportError(std::string(e.what()) + " (after " + std::to_string(i) +
                                 " attempt" + (i == 1 ? "" : "s") + ")",
                             status);
      }
    }
    std::this_thread::sleep_for(backoff);
    backoff = std::min(config_.max_backoff, backoff * 2);
  }
}

}  // namespace tkgqa
