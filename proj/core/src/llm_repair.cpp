#include "tikzkit/llm_repair.hpp"

#include <cctype>

#include "tikzkit/errors.hpp"
#include "tikzkit/text.hpp"

namespace tikzkit {
namespace {

constexpr std::string_view kDocClass = "\\documentclass";

// Inner text of the first fenced block, if the response has one.
std::optional<std::string_view> fenced_block(std::string_view s) {
  const auto open = s.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  auto body_start = s.find('\n', open);
  if (body_start == std::string_view::npos) return std::nullopt;
  ++body_start;
  const auto close = s.find("```", body_start);
  return s.substr(body_start, (close == std::string_view::npos ? s.size() : close) - body_start);
}

bool looks_like_latex(std::string_view s) {
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (s[i] == '\\' && std::isalpha(static_cast<unsigned char>(s[i + 1]))) return true;
  }
  return false;
}

NormalizedProgram candidate_program(const NormalizedProgram& original, const std::string& code) {
  if (code.find(kDocClass) != std::string::npos) {
    return program_from_document(original.record_id, code);
  }
  auto p = wrap_standalone(code, original.packages);
  p.record_id = original.record_id;
  p.provenance = original.provenance;
  return p;
}

}  // namespace

void RepairConfig::validate() const {
  std::vector<std::string> v;
  if (max_iterations < 1) v.emplace_back("repair.max_iterations must be >= 1");
  if (max_log_bytes == 0) v.emplace_back("repair.max_log_bytes must be > 0");
  if (temperature && *temperature < 0) v.emplace_back("repair.temperature must be >= 0");
  if (max_output_tokens && *max_output_tokens <= 0) {
    v.emplace_back("repair.max_output_tokens must be > 0");
  }
  if (!v.empty()) throw ConfigError(std::move(v));
}

Json to_json(const RepairConfig& c) {
  return Json{{"max_iterations", c.max_iterations},
              {"chain_candidates", c.chain_candidates},
              {"max_log_bytes", c.max_log_bytes},
              {"temperature", c.temperature ? Json(*c.temperature) : Json(nullptr)},
              {"max_output_tokens", c.max_output_tokens ? Json(*c.max_output_tokens) : Json(nullptr)}};
}

RepairConfig repair_config_from_json(const Json& j) {
  RepairConfig c;
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.chain_candidates = j.value("chain_candidates", c.chain_candidates);
  c.max_log_bytes = j.value("max_log_bytes", c.max_log_bytes);
  if (j.contains("temperature")) {
    c.temperature = j["temperature"].is_null() ? std::nullopt
                                                : std::optional(j["temperature"].get<double>());
  }
  if (j.contains("max_output_tokens") && !j["max_output_tokens"].is_null()) {
    c.max_output_tokens = j["max_output_tokens"].get<int>();
  }
  return c;
}

std::optional<std::string> sanitize_response(std::string_view response) {
  const auto begin = response.find(kDocClass);
  if (begin != std::string_view::npos) {
    const auto end = response.rfind(kEndDocument);
    if (end != std::string_view::npos && end > begin) {
      return std::string(response.substr(begin, end + kEndDocument.size() - begin));
    }
    // Unterminated document: keep everything from the class line, minus a
    // trailing fence.
    auto tail = response.substr(begin);
    if (const auto fence = tail.find("```"); fence != std::string_view::npos) {
      tail = tail.substr(0, fence);
    }
    return std::string(trim(tail));
  }
  std::string_view body = response;
  if (auto inner = fenced_block(response)) body = *inner;
  body = trim(body);
  if (body.empty() || !looks_like_latex(body)) return std::nullopt;
  return std::string(body);
}

std::string_view to_string(AttemptFailure f) {
  switch (f) {
    case AttemptFailure::none: return "none";
    case AttemptFailure::sanitation_failed: return "sanitation_failed";
    case AttemptFailure::transport_error: return "transport_error";
    case AttemptFailure::compile_failed: return "compile_failed";
  }
  return "none";
}

AttemptFailure parse_attempt_failure(std::string_view s) {
  for (auto f : {AttemptFailure::none, AttemptFailure::sanitation_failed,
                 AttemptFailure::transport_error, AttemptFailure::compile_failed}) {
    if (to_string(f) == s) return f;
  }
  throw InputError("unknown attempt failure '" + std::string(s) + "'");
}

std::string RepairSession::outcome() const {
  return repaired_at ? "repaired_at(" + std::to_string(*repaired_at) + ")" : "failed";
}

std::optional<std::string> RepairSession::repaired_code() const {
  if (!repaired_at) return std::nullopt;
  return attempts.at(static_cast<std::size_t>(*repaired_at - 1)).candidate_code;
}

Json to_json(const RepairAttempt& a, bool with_timing) {
  return Json{{"iteration", a.iteration},
              {"prompt", a.prompt},
              {"response", a.response},
              {"candidate_code", a.candidate_code},
              {"compile", a.compile ? to_json(*a.compile, with_timing) : Json(nullptr)},
              {"failure", to_string(a.failure)},
              {"error", a.error}};
}

RepairAttempt repair_attempt_from_json(const Json& j) {
  RepairAttempt a;
  a.iteration = j.at("iteration").get<int>();
  a.prompt = j.value("prompt", std::string());
  a.response = j.value("response", std::string());
  a.candidate_code = j.value("candidate_code", std::string());
  if (j.contains("compile") && !j["compile"].is_null()) {
    a.compile = compile_result_from_json(j["compile"]);
  }
  a.failure = parse_attempt_failure(j.value("failure", std::string("none")));
  a.error = j.value("error", std::string());
  return a;
}

Json to_json(const RepairSession& s, bool with_timing) {
  Json attempts = Json::array();
  for (const auto& a : s.attempts) attempts.push_back(to_json(a, with_timing));
  return Json{{"record_id", s.record_id},
              {"attempts", std::move(attempts)},
              {"max_iterations", s.max_iterations},
              {"outcome", s.outcome()},
              {"model_name", s.model_name}};
}

RepairSession repair_session_from_json(const Json& j) {
  RepairSession s;
  s.record_id = j.at("record_id").get<std::string>();
  for (const auto& a : j.at("attempts")) s.attempts.push_back(repair_attempt_from_json(a));
  s.max_iterations = j.value("max_iterations", 3);
  s.model_name = j.value("model_name", std::string());
  const auto outcome = j.value("outcome", std::string("failed"));
  if (outcome.starts_with("repaired_at(")) {
    s.repaired_at = std::stoi(outcome.substr(12));
  }
  return s;
}

RepairSession repair_loop(const NormalizedProgram& program, const CompileResult& first_failure,
                          ChatClient& client, ProgramCompiler& compiler,
                          const RepairConfig& config) {
  config.validate();
  if (first_failure.status == CompileStatus::ok) {
    throw InputError("repair_loop called for record '" + program.record_id +
                     "' that already compiles");
  }
  RepairSession session;
  session.record_id = program.record_id;
  session.max_iterations = config.max_iterations;
  session.model_name = client.model_name();

  std::string current_code = program.code;
  std::string current_log = first_failure.log_text;
  for (int k = 1; k <= config.max_iterations; ++k) {
    RepairAttempt attempt;
    attempt.iteration = k;
    attempt.prompt = build_repair_prompt(current_code, current_log, config.max_log_bytes);

    ChatRequest request;
    request.messages.push_back({"user", {ContentPart::of_text(attempt.prompt)}});
    request.temperature = config.temperature;
    request.max_tokens = config.max_output_tokens;
    try {
      attempt.response = client.complete(request).content;
    } catch (const TransportError& e) {
      attempt.failure = AttemptFailure::transport_error;
      attempt.error = e.what();
      session.attempts.push_back(std::move(attempt));
      continue;
    }

    auto candidate = sanitize_response(attempt.response);
    if (!candidate) {
      attempt.failure = AttemptFailure::sanitation_failed;
      session.attempts.push_back(std::move(attempt));
      continue;
    }
    const auto cand_program = candidate_program(program, *candidate);
    attempt.candidate_code = cand_program.code;
    attempt.compile = compiler.compile(cand_program);
    attempt.compile->record_id = program.record_id;
    const bool ok = attempt.compile->status == CompileStatus::ok;
    if (!ok) attempt.failure = AttemptFailure::compile_failed;
    if (config.chain_candidates && !ok) {
      current_code = attempt.candidate_code;
      current_log = attempt.compile->log_text;
    }
    session.attempts.push_back(std::move(attempt));
    if (ok) {
      session.repaired_at = k;
      break;
    }
  }
  return session;
}

std::vector<double> cumulative_success(const std::vector<RepairSession>& sessions,
                                       int max_iterations) {
  if (max_iterations < 1) throw InputError("max_iterations must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(max_iterations), 0.0);
  if (sessions.empty()) return out;
  for (int budget = 1; budget <= max_iterations; ++budget) {
    std::size_t ok = 0;
    for (const auto& s : sessions) {
      if (s.repaired_at && *s.repaired_at <= budget) ++ok;
    }
    out[static_cast<std::size_t>(budget - 1)] =
        static_cast<double>(ok) / static_cast<double>(sessions.size());
  }
  return out;
}

}  // namespace tikzkit
