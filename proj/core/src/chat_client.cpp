#include "tikzkit/chat_client.hpp"

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "tikzkit/digest.hpp"
#include "tikzkit/errors.hpp"
#include "tikzkit/prompts.hpp"
#include "tikzkit/text.hpp"

namespace tikzkit {

void ChatEndpointConfig::validate(const std::string& prefix) const {
  std::vector<std::string> v;
  if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0) {
    v.push_back(prefix + ".base_url must start with http:// or https://");
  }
  if (model_name.empty()) v.push_back(prefix + ".model_name is empty");
  if (max_output_tokens <= 0) v.push_back(prefix + ".max_output_tokens must be > 0");
  if (!(request_timeout_s > 0)) v.push_back(prefix + ".request_timeout_s must be > 0");
  if (max_retries < 0) v.push_back(prefix + ".max_retries must be >= 0");
  if (concurrency_limit < 1) v.push_back(prefix + ".concurrency_limit must be >= 1");
  if (backoff_base_ms < 0) v.push_back(prefix + ".backoff_base_ms must be >= 0");
  if (temperature && *temperature < 0) v.push_back(prefix + ".temperature must be >= 0");
  if (!v.empty()) throw ConfigError(std::move(v));
}

Json to_json(const ChatEndpointConfig& c) {
  return Json{{"base_url", c.base_url},
              {"model_name", c.model_name},
              {"api_key_env", c.api_key_env},
              {"temperature", c.temperature ? Json(*c.temperature) : Json(nullptr)},
              {"max_output_tokens", c.max_output_tokens},
              {"request_timeout_s", c.request_timeout_s},
              {"max_retries", c.max_retries},
              {"concurrency_limit", c.concurrency_limit},
              {"backoff_base_ms", c.backoff_base_ms}};
}

ChatEndpointConfig chat_endpoint_config_from_json(const Json& j) {
  ChatEndpointConfig c;
  c.base_url = j.value("base_url", c.base_url);
  c.model_name = j.value("model_name", c.model_name);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  if (j.contains("temperature") && !j["temperature"].is_null()) {
    c.temperature = j["temperature"].get<double>();
  }
  c.max_output_tokens = j.value("max_output_tokens", c.max_output_tokens);
  c.request_timeout_s = j.value("request_timeout_s", c.request_timeout_s);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.concurrency_limit = j.value("concurrency_limit", c.concurrency_limit);
  c.backoff_base_ms = j.value("backoff_base_ms", c.backoff_base_ms);
  return c;
}

ContentPart ContentPart::of_text(std::string t) {
  ContentPart p;
  p.text = std::move(t);
  return p;
}

ContentPart ContentPart::of_image(std::string media_type, std::string base64) {
  ContentPart p;
  p.kind = Kind::image;
  p.media_type = std::move(media_type);
  p.data_base64 = std::move(base64);
  return p;
}

Json chat_payload(const ChatRequest& request, const std::string& model) {
  Json messages = Json::array();
  for (const auto& m : request.messages) {
    Json msg{{"role", m.role}};
    if (m.parts.size() == 1 && m.parts[0].kind == ContentPart::Kind::text) {
      msg["content"] = m.parts[0].text;
    } else {
      Json parts = Json::array();
      for (const auto& p : m.parts) {
        if (p.kind == ContentPart::Kind::text) {
          parts.push_back({{"type", "text"}, {"text", p.text}});
        } else {
          parts.push_back(
              {{"type", "image_url"},
               {"image_url", {{"url", "data:" + p.media_type + ";base64," + p.data_base64}}}});
        }
      }
      msg["content"] = std::move(parts);
    }
    messages.push_back(std::move(msg));
  }
  Json body{{"model", model}, {"messages", std::move(messages)}};
  if (request.temperature) body["temperature"] = *request.temperature;
  if (request.max_tokens) body["max_tokens"] = *request.max_tokens;
  return body;
}

std::string parse_chat_content(const Json& body) {
  try {
    const auto& content = body.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    if (content.is_array()) {
      std::string joined;
      for (const auto& part : content) {
        if (part.value("type", "") == "text") joined += part.value("text", "");
      }
      return joined;
    }
  } catch (const Json::exception&) {
  }
  throw TransportError("response has no choices[0].message.content");
}

Semaphore::Semaphore(int count) : count_(count) {}

void Semaphore::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return count_ > 0; });
  --count_;
}

void Semaphore::release() {
  {
    std::lock_guard lock(mu_);
    ++count_;
  }
  cv_.notify_one();
}

HttpChatClient::HttpChatClient(ChatEndpointConfig config)
    : config_(std::move(config)), slots_(std::max(1, config_.concurrency_limit)) {
  config_.validate();
  const auto scheme_end = config_.base_url.find("://") + 3;
  const auto path_start = config_.base_url.find('/', scheme_end);
  origin_ = config_.base_url.substr(0, path_start);
  std::string prefix =
      path_start == std::string::npos ? std::string() : config_.base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  path_ = prefix + "/chat/completions";
}

ChatResponse HttpChatClient::complete(const ChatRequest& request) {
  ChatRequest req = request;
  if (!req.temperature) req.temperature = config_.temperature;
  if (!req.max_tokens) req.max_tokens = config_.max_output_tokens;
  const std::string body = chat_payload(req, config_.model_name).dump();

  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  slots_.acquire();
  struct Release {
    Semaphore& s;
    ~Release() { s.release(); }
  } release{slots_};

  const auto timeout = std::chrono::milliseconds(
      static_cast<long long>(config_.request_timeout_s * 1000));
  std::string last_error;
  int last_status = 0;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(static_cast<long long>(config_.backoff_base_ms) << (attempt - 1)));
    }
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      last_status = 0;
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "endpoint returned HTTP " + std::to_string(res->status);
      last_status = res->status;
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw TransportError("endpoint returned HTTP " + std::to_string(res->status) + ": " +
                               sanitize_utf8(res->body.substr(0, 512)),
                           res->status);
    }
    Json parsed = Json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) throw TransportError("endpoint returned malformed JSON", res->status);
    ChatResponse out;
    out.content = parse_chat_content(parsed);
    out.model = parsed.value("model", config_.model_name);
    out.attempts = attempt + 1;
    return out;
  }
  throw TransportError(last_error + " (after " + std::to_string(config_.max_retries + 1) +
                           " attempts)",
                       last_status);
}

ScriptedChatClient::ScriptedChatClient(std::vector<std::optional<std::string>> script,
                                       std::string model)
    : script_(std::move(script)), model_(std::move(model)) {
  if (script_.empty()) throw InputError("scripted client needs at least one step");
}

ChatResponse ScriptedChatClient::complete(const ChatRequest& request) {
  std::lock_guard lock(mu_);
  const std::size_t i = std::min(requests_.size(), script_.size() - 1);
  requests_.push_back(request);
  if (!script_[i]) throw TransportError("scripted transport failure", 503);
  return ChatResponse{*script_[i], model_, 1};
}

std::vector<ChatRequest> ScriptedChatClient::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::size_t ScriptedChatClient::calls() const {
  std::lock_guard lock(mu_);
  return requests_.size();
}

namespace {

std::optional<std::string> undefined_command(const std::string& log) {
  const auto at = log.find("Undefined control sequence");
  if (at == std::string::npos) return std::nullopt;
  static const std::regex line_re(R"(l\.\d+ ([^\n]*))");
  std::smatch m;
  const std::string rest = log.substr(at);
  if (!std::regex_search(rest, m, line_re)) return std::nullopt;
  static const std::regex cmd_re(R"(\\[A-Za-z@]+)");
  std::optional<std::string> last;
  const std::string text = m[1].str();
  for (auto it = std::sregex_iterator(text.begin(), text.end(), cmd_re);
       it != std::sregex_iterator(); ++it) {
    last = it->str();
  }
  return last;
}

bool uses_command(std::string_view line, const std::string& cmd) {
  std::size_t pos = 0;
  while ((pos = line.find(cmd, pos)) != std::string_view::npos) {
    const auto end = pos + cmd.size();
    const bool letter_follows =
        end < line.size() && std::isalpha(static_cast<unsigned char>(line[end]));
    if (!letter_follows) return true;
    pos = end;
  }
  return false;
}

std::string mock_repair(const RepairPromptParts& parts) {
  std::string code = parts.code;
  if (auto cmd = undefined_command(parts.log)) {
    std::string kept;
    std::istringstream in(code);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (uses_command(line, *cmd)) continue;
      if (!first) kept += '\n';
      kept += line;
      first = false;
    }
    code = kept;
  }
  return "```latex\n" + code + "\n```";
}

std::string mock_description(const std::string& image_b64) {
  const std::string h = sha256_hex(image_b64);
  static constexpr const char* kShapes[] = {"circle", "square", "triangle", "rectangle",
                                           "ellipse", "hexagon", "diamond", "arrow"};
  static constexpr const char* kColors[] = {"black", "blue", "red", "green",
                                           "orange", "gray", "purple", "brown"};
  auto pick = [&](std::size_t i) { return static_cast<std::size_t>(std::stoi(h.substr(i, 1), nullptr, 16)) % 8; };
  std::string d = "A ";
  d += kColors[pick(0)];
  d += " ";
  d += kShapes[pick(1)];
  d += " labeled A sits at the center of a white canvas, with a thin ";
  d += kColors[pick(2)];
  d += " line L1 extending from its right edge to a ";
  d += kColors[pick(3)];
  d += " ";
  d += kShapes[pick(4)];
  d += " labeled B placed about two units to the right. A small label reading ";
  d += h.substr(0, 8);
  d += " is placed directly below shape A, and an arrow points from shape B back toward the "
       "upper left corner of the canvas.";
  return d;
}

}  // namespace

HeuristicMockChatClient::HeuristicMockChatClient(std::string model, std::uint64_t seed)
    : model_(std::move(model)), seed_(seed) {}

ChatResponse HeuristicMockChatClient::complete(const ChatRequest& request) {
  std::string text;
  std::string image;
  for (const auto& m : request.messages) {
    for (const auto& p : m.parts) {
      if (p.kind == ContentPart::Kind::image) {
        image += p.data_base64;
      } else {
        text += p.text;
      }
    }
  }
  if (!image.empty()) {
    return ChatResponse{mock_description(std::to_string(seed_) + ":" + image), model_, 1};
  }
  if (auto parts = parse_repair_prompt(text)) return ChatResponse{mock_repair(*parts), model_, 1};
  return ChatResponse{"\\documentclass[tikz]{standalone}\n\\begin{document}\n\\begin{tikzpicture}\n"
                      "\\draw (0,0) circle (1);\n\\end{tikzpicture}\n\\end{document}",
                      model_, 1};
}

std::string request_key(const ChatRequest& request, const std::string& model) {
  return sha256_hex(chat_payload(request, model).dump());
}

RecordingChatClient::RecordingChatClient(std::shared_ptr<ChatClient> inner,
                                         std::filesystem::path transcript)
    : inner_(std::move(inner)), transcript_(std::move(transcript)) {
  if (transcript_.has_parent_path()) std::filesystem::create_directories(transcript_.parent_path());
}

ChatResponse RecordingChatClient::complete(const ChatRequest& request) {
  auto response = inner_->complete(request);
  const auto model = inner_->model_name();
  Json row{{"key", request_key(request, model)},
           {"model", model},
           {"request", chat_payload(request, model)},
           {"response", response.content}};
  std::lock_guard lock(mu_);
  std::ofstream out(transcript_, std::ios::app | std::ios::binary);
  out << to_jsonl_line(row) << '\n';
  if (!out) throw InfrastructureError("cannot append to transcript " + transcript_.string());
  return response;
}

ReplayChatClient::ReplayChatClient(const std::filesystem::path& transcript) {
  for (const auto& row : read_jsonl(transcript).rows) {
    responses_[row.at("key").get<std::string>()] = row.at("response").get<std::string>();
    if (model_.empty()) model_ = row.value("model", std::string());
  }
}

ChatResponse ReplayChatClient::complete(const ChatRequest& request) {
  const auto it = responses_.find(request_key(request, model_));
  if (it == responses_.end()) throw TransportError("request not present in replay transcript", 404);
  return ChatResponse{it->second, model_, 1};
}

}  // namespace tikzkit
