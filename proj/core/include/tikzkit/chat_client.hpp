#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tikzkit/jsonl.hpp"

namespace tikzkit {

struct ChatEndpointConfig {
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string model_name;
  // Name of the environment variable holding the API key; the key itself is
  // never read from config files.
  std::string api_key_env = "TIKZKIT_API_KEY";
  // Absent means "endpoint default".
  std::optional<double> temperature;
  int max_output_tokens = 2048;
  double request_timeout_s = 120.0;
  int max_retries = 3;
  int concurrency_limit = 4;
  int backoff_base_ms = 500;

  // Throws ConfigError listing every violation. prefix names the config
  // section in messages.
  void validate(const std::string& prefix = "endpoint") const;
};

Json to_json(const ChatEndpointConfig& c);
ChatEndpointConfig chat_endpoint_config_from_json(const Json& j);

struct ContentPart {
  enum class Kind { text, image };
  Kind kind = Kind::text;
  std::string text;        // Kind::text
  std::string media_type;  // Kind::image, e.g. image/png
  std::string data_base64; // Kind::image

  static ContentPart of_text(std::string t);
  static ContentPart of_image(std::string media_type, std::string base64);
};

struct ChatMessage {
  std::string role;
  std::vector<ContentPart> parts;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  std::optional<double> temperature;
  std::optional<int> max_tokens;
};

struct ChatResponse {
  std::string content;
  std::string model;
  int attempts = 1;  // HTTP attempts spent, including retries
};

// OpenAI-compatible chat-completions body. Single-text messages use the
// plain string content form; mixed messages use the parts array.
Json chat_payload(const ChatRequest& request, const std::string& model);

// choices[0].message.content; throws TransportError when absent.
std::string parse_chat_content(const Json& body);

// Thread-safe by contract.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // Throws TransportError once retries are exhausted.
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string model_name() const = 0;
};

class Semaphore {
 public:
  explicit Semaphore(int count);
  void acquire();
  void release();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int count_;
};

// Talks to base_url + "/chat/completions". Retries transport failures,
// 429 and 5xx with exponential backoff; other 4xx fail immediately.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(ChatEndpointConfig config);
  ChatResponse complete(const ChatRequest& request) override;
  std::string model_name() const override { return config_.model_name; }
  const ChatEndpointConfig& config() const { return config_; }

 private:
  ChatEndpointConfig config_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;    // path prefix + /chat/completions
  Semaphore slots_;
};

// Returns queued responses in order; std::nullopt entries raise
// TransportError. Once the queue is drained the last entry repeats.
class ScriptedChatClient : public ChatClient {
 public:
  explicit ScriptedChatClient(std::vector<std::optional<std::string>> script,
                              std::string model = "scripted");
  ChatResponse complete(const ChatRequest& request) override;
  std::string model_name() const override { return model_; }

  std::vector<ChatRequest> requests() const;
  std::size_t calls() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::optional<std::string>> script_;
  std::vector<ChatRequest> requests_;
  std::string model_;
};

// Deterministic offline stand-in. Repair prompts: drops every line using
// the control sequence the log reports as undefined and returns the result
// in a fenced block. Image requests: a compliant single-paragraph
// description derived from the image bytes and the seed.
class HeuristicMockChatClient : public ChatClient {
 public:
  explicit HeuristicMockChatClient(std::string model = "heuristic-mock", std::uint64_t seed = 0);
  ChatResponse complete(const ChatRequest& request) override;
  std::string model_name() const override { return model_; }

 private:
  std::string model_;
  std::uint64_t seed_;
};

// Stable key of a request: sha256 of the canonical payload.
std::string request_key(const ChatRequest& request, const std::string& model);

// Wraps a client and appends {key, request, response} rows to a JSONL
// transcript.
class RecordingChatClient : public ChatClient {
 public:
  RecordingChatClient(std::shared_ptr<ChatClient> inner, std::filesystem::path transcript);
  ChatResponse complete(const ChatRequest& request) override;
  std::string model_name() const override { return inner_->model_name(); }

 private:
  std::shared_ptr<ChatClient> inner_;
  std::filesystem::path transcript_;
  std::mutex mu_;
};

// Serves responses from a transcript written by RecordingChatClient.
// Unknown requests raise TransportError.
class ReplayChatClient : public ChatClient {
 public:
  explicit ReplayChatClient(const std::filesystem::path& transcript);
  ChatResponse complete(const ChatRequest& request) override;
  std::string model_name() const override { return model_; }
  std::size_t size() const { return responses_.size(); }

 private:
  std::string model_;
  std::unordered_map<std::string, std::string> responses_;
};

}  // namespace tikzkit
