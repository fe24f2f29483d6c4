#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tikzkit/chat_client.hpp"
#include "tikzkit/jsonl.hpp"

namespace tikzkit {

// transport_error marks an endpoint failure; the record is skipped for now
// and can be described on a later run.
enum class DescriptionValidation {
  ok,
  too_short,
  contains_list_markup,
  contains_banned_preamble,
  transport_error
};

std::string_view to_string(DescriptionValidation v);
DescriptionValidation parse_description_validation(std::string_view s);

struct DescribeConfig {
  std::size_t min_chars = 200;
  // One initial request plus this many retries on validation failure.
  int validation_retries = 1;
  std::vector<std::string> banned_openers = {"Certainly", "The image depicts",
                                             "Here is a precise description", "Here is",
                                             "Sure"};
  // Absent: endpoint defaults.
  std::optional<double> temperature;
  std::optional<int> max_output_tokens;
  std::string media_type = "image/png";

  void validate() const;
};

Json to_json(const DescribeConfig& c);
DescribeConfig describe_config_from_json(const Json& j);

struct DescriptionResult {
  std::string record_id;
  std::string description;
  DescriptionValidation validation = DescriptionValidation::transport_error;
  std::string model_name;
  int requests = 0;
  std::string error;
  Json decoding;  // parameters actually sent; "endpoint default" when absent
};

Json to_json(const DescriptionResult& r);
DescriptionResult description_result_from_json(const Json& j);

// Pure verdict; checks run in the order banned opener, list markup or line
// breaks, length and sentence presence.
DescriptionValidation validate_description(std::string_view text, const DescribeConfig& config);

// Reads the image (never modified), sends prompt + image, validates, and
// retries per config. InputError when the image cannot be decoded.
DescriptionResult describe(const std::string& record_id, const std::filesystem::path& image_path,
                           ChatClient& client, const DescribeConfig& config);

}  // namespace tikzkit
