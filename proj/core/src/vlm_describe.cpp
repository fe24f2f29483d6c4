#include "tikzkit/vlm_describe.hpp"

#include <regex>

#include "tikzkit/digest.hpp"
#include "tikzkit/errors.hpp"
#include "tikzkit/prompts.hpp"
#include "tikzkit/raster.hpp"
#include "tikzkit/text.hpp"

namespace tikzkit {

std::string_view to_string(DescriptionValidation v) {
  switch (v) {
    case DescriptionValidation::ok: return "ok";
    case DescriptionValidation::too_short: return "too_short";
    case DescriptionValidation::contains_list_markup: return "contains_list_markup";
    case DescriptionValidation::contains_banned_preamble: return "contains_banned_preamble";
    case DescriptionValidation::transport_error: return "transport_error";
  }
  return "transport_error";
}

DescriptionValidation parse_description_validation(std::string_view s) {
  for (auto v : {DescriptionValidation::ok, DescriptionValidation::too_short,
                 DescriptionValidation::contains_list_markup,
                 DescriptionValidation::contains_banned_preamble,
                 DescriptionValidation::transport_error}) {
    if (to_string(v) == s) return v;
  }
  throw InputError("unknown description validation '" + std::string(s) + "'");
}

void DescribeConfig::validate() const {
  std::vector<std::string> v;
  if (min_chars == 0) v.emplace_back("describe.min_chars must be > 0");
  if (validation_retries < 0) v.emplace_back("describe.validation_retries must be >= 0");
  for (const auto& b : banned_openers) {
    if (trim(b).empty()) v.emplace_back("describe.banned_openers contains an empty entry");
  }
  if (media_type.rfind("image/", 0) != 0) v.emplace_back("describe.media_type must be image/*");
  if (!v.empty()) throw ConfigError(std::move(v));
}

Json to_json(const DescribeConfig& c) {
  return Json{{"min_chars", c.min_chars},
              {"validation_retries", c.validation_retries},
              {"banned_openers", c.banned_openers},
              {"temperature", c.temperature ? Json(*c.temperature) : Json(nullptr)},
              {"max_output_tokens", c.max_output_tokens ? Json(*c.max_output_tokens) : Json(nullptr)},
              {"media_type", c.media_type}};
}

DescribeConfig describe_config_from_json(const Json& j) {
  DescribeConfig c;
  c.min_chars = j.value("min_chars", c.min_chars);
  c.validation_retries = j.value("validation_retries", c.validation_retries);
  c.banned_openers = j.value("banned_openers", c.banned_openers);
  if (j.contains("temperature") && !j["temperature"].is_null()) {
    c.temperature = j["temperature"].get<double>();
  }
  if (j.contains("max_output_tokens") && !j["max_output_tokens"].is_null()) {
    c.max_output_tokens = j["max_output_tokens"].get<int>();
  }
  c.media_type = j.value("media_type", c.media_type);
  return c;
}

Json to_json(const DescriptionResult& r) {
  return Json{{"record_id", r.record_id},
              {"description", r.description},
              {"validation", to_string(r.validation)},
              {"model_name", r.model_name},
              {"requests", r.requests},
              {"error", r.error},
              {"decoding", r.decoding}};
}

DescriptionResult description_result_from_json(const Json& j) {
  DescriptionResult r;
  r.record_id = j.at("record_id").get<std::string>();
  r.description = j.value("description", std::string());
  r.validation = parse_description_validation(j.at("validation").get<std::string>());
  r.model_name = j.value("model_name", std::string());
  r.requests = j.value("requests", 0);
  r.error = j.value("error", std::string());
  r.decoding = j.value("decoding", Json::object());
  return r;
}

DescriptionValidation validate_description(std::string_view text, const DescribeConfig& config) {
  const auto body = trim(text);
  // Leading quotes or markup do not hide an opener.
  auto head = body;
  while (!head.empty() && (head.front() == '"' || head.front() == '\'' || head.front() == '*')) {
    head.remove_prefix(1);
  }
  for (const auto& opener : config.banned_openers) {
    if (starts_with_ci(head, opener)) return DescriptionValidation::contains_banned_preamble;
  }
  if (body.find('\n') != std::string_view::npos || body.find('\r') != std::string_view::npos) {
    return DescriptionValidation::contains_list_markup;
  }
  static const std::regex list_start(R"(^\s*([-*+]|\d+[.)])\s)");
  const std::string owned(body);
  if (std::regex_search(owned, list_start) || owned.find("\xE2\x80\xA2") != std::string::npos) {
    return DescriptionValidation::contains_list_markup;
  }
  if (utf8_length(body) < config.min_chars) return DescriptionValidation::too_short;
  if (body.find_first_of(".!?") == std::string_view::npos) return DescriptionValidation::too_short;
  return DescriptionValidation::ok;
}

DescriptionResult describe(const std::string& record_id, const std::filesystem::path& image_path,
                           ChatClient& client, const DescribeConfig& config) {
  config.validate();
  // Decoding doubles as the precondition check.
  (void)read_png(image_path);
  const std::string bytes = read_text_file(image_path);

  DescriptionResult result;
  result.record_id = record_id;
  result.model_name = client.model_name();
  result.decoding = Json{
      {"temperature", config.temperature ? Json(*config.temperature) : Json("endpoint default")},
      {"max_tokens",
       config.max_output_tokens ? Json(*config.max_output_tokens) : Json("endpoint default")}};

  ChatRequest request;
  request.messages.push_back(
      {"user",
       {ContentPart::of_text(describe_prompt()),
        ContentPart::of_image(config.media_type, base64_encode(std::string_view(bytes)))}});
  request.temperature = config.temperature;
  request.max_tokens = config.max_output_tokens;

  for (int attempt = 0; attempt <= config.validation_retries; ++attempt) {
    ++result.requests;
    try {
      const auto response = client.complete(request);
      result.description = std::string(trim(response.content));
      if (!response.model.empty()) result.model_name = response.model;
      result.error.clear();
    } catch (const TransportError& e) {
      result.validation = DescriptionValidation::transport_error;
      result.error = e.what();
      return result;
    }
    result.validation = validate_description(result.description, config);
    if (result.validation == DescriptionValidation::ok) break;
  }
  return result;
}

}  // namespace tikzkit
