#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tikzkit/chat_client.hpp"
#include "tikzkit/compile_harness.hpp"
#include "tikzkit/jsonl.hpp"
#include "tikzkit/normalize.hpp"
#include "tikzkit/prompts.hpp"

namespace tikzkit {

struct RepairConfig {
  int max_iterations = 3;
  // true: attempt k prompts with attempt k-1's candidate and log.
  // false: every attempt prompts with the original code and first log.
  bool chain_candidates = true;
  std::size_t max_log_bytes = kDefaultPromptLogBytes;
  std::optional<double> temperature = 0.0;
  std::optional<int> max_output_tokens;

  void validate() const;
};

Json to_json(const RepairConfig& c);
RepairConfig repair_config_from_json(const Json& j);

// Extracts the document from a model response: strips code fences and any
// prose outside the outermost \documentclass ... \end{document} span.
// nullopt when the response holds no recognizable LaTeX.
std::optional<std::string> sanitize_response(std::string_view response);

enum class AttemptFailure { none, sanitation_failed, transport_error, compile_failed };
std::string_view to_string(AttemptFailure f);
AttemptFailure parse_attempt_failure(std::string_view s);

struct RepairAttempt {
  int iteration = 0;  // 1-based
  std::string prompt;
  std::string response;
  std::string candidate_code;
  std::optional<CompileResult> compile;  // absent when nothing was compiled
  AttemptFailure failure = AttemptFailure::none;
  std::string error;  // transport error message, if any
};

struct RepairSession {
  std::string record_id;
  std::vector<RepairAttempt> attempts;
  int max_iterations = 3;
  std::optional<int> repaired_at;
  std::string model_name;

  bool repaired() const { return repaired_at.has_value(); }
  // "repaired_at(k)" or "failed".
  std::string outcome() const;
  // Code of the successful candidate, if any.
  std::optional<std::string> repaired_code() const;
};

Json to_json(const RepairAttempt& a, bool with_timing = true);
RepairAttempt repair_attempt_from_json(const Json& j);
Json to_json(const RepairSession& s, bool with_timing = true);
RepairSession repair_session_from_json(const Json& j);

// Iterative repair. Precondition: first_failure.status != ok (InputError
// otherwise). Every endpoint call is one iteration; a call that still fails
// after the client's retries is recorded and compiles nothing.
RepairSession repair_loop(const NormalizedProgram& program, const CompileResult& first_failure,
                          ChatClient& client, ProgramCompiler& compiler,
                          const RepairConfig& config);

// Cumulative repaired fraction for budgets 1..max over a set of sessions.
std::vector<double> cumulative_success(const std::vector<RepairSession>& sessions,
                                       int max_iterations);

}  // namespace tikzkit
