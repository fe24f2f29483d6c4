#include <gtest/gtest.h>

#include <mutex>

#include "test_support.hpp"
#include "tikzkit/chat_client.hpp"
#include "tikzkit/errors.hpp"
#include "tikzkit/llm_repair.hpp"
#include "tikzkit/prompts.hpp"

using namespace tikzkit;
using tikzkit::testing::standalone;

namespace {

// Compiles iff the code has no \bogus command; records what it saw.
class RuleCompiler : public ProgramCompiler {
 public:
  CompileResult compile(const NormalizedProgram& p) override {
    std::lock_guard lock(mu_);
    seen.push_back(p.code);
    CompileResult r;
    r.record_id = p.record_id;
    if (p.code.find("\\bogus") == std::string::npos) {
      r.status = CompileStatus::ok;
      r.artifact_path = "/tmp/fake.png";
    } else {
      r.status = CompileStatus::compile_error;
      r.log_text = "! Undefined control sequence.\nl.3 \\bogus";
    }
    return r;
  }
  std::vector<std::string> seen;

 private:
  std::mutex mu_;
};

const std::string kBroken = standalone("\\begin{tikzpicture}\n\\bogus\n\\draw (0,0);\n\\end{tikzpicture}");
const std::string kFixed = standalone("\\begin{tikzpicture}\n\\draw (0,0);\n\\end{tikzpicture}");

CompileResult failure_for(const NormalizedProgram& p) {
  RuleCompiler c;
  return c.compile(p);
}

std::string fenced(const std::string& code) { return "```latex\n" + code + "```"; }

}  // namespace

TEST(RepairLoop, FixedAtIterationOneThreeOrNever) {
  const auto program = program_from_document("r", kBroken);
  const auto first = failure_for(program);
  struct Case {
    std::vector<std::optional<std::string>> script;
    std::string outcome;
    std::size_t attempts;
  };
  const std::vector<Case> cases = {
      {{fenced(kFixed)}, "repaired_at(1)", 1},
      {{fenced(kBroken), fenced(kBroken), fenced(kFixed)}, "repaired_at(3)", 3},
      {{fenced(kBroken)}, "failed", 3},
  };
  for (const auto& c : cases) {
    ScriptedChatClient client(c.script, "scripted");
    RuleCompiler compiler;
    const auto s = repair_loop(program, first, client, compiler, RepairConfig{});
    EXPECT_EQ(s.outcome(), c.outcome);
    EXPECT_EQ(s.attempts.size(), c.attempts);
    EXPECT_EQ(client.calls(), c.attempts);
    EXPECT_EQ(compiler.seen.size(), c.attempts);
    if (s.repaired()) {
      EXPECT_EQ(*s.repaired_code() + "\n", kFixed);
    }
  }
}

TEST(RepairLoop, PromptsCarryCodeAndLog) {
  const auto program = program_from_document("r", kBroken);
  const auto first = failure_for(program);
  ScriptedChatClient client({fenced(kFixed)});
  RuleCompiler compiler;
  repair_loop(program, first, client, compiler, RepairConfig{});
  const auto text = client.requests().at(0).messages.at(0).parts.at(0).text;
  EXPECT_EQ(text, build_repair_prompt(kBroken, first.log_text));
}

TEST(RepairLoop, TransportFailureConsumesAnIteration) {
  const auto program = program_from_document("r", kBroken);
  ScriptedChatClient client({std::nullopt, fenced(kFixed)});
  RuleCompiler compiler;
  const auto s = repair_loop(program, failure_for(program), client, compiler, RepairConfig{});
  ASSERT_EQ(s.attempts.size(), 2u);
  EXPECT_EQ(s.attempts[0].failure, AttemptFailure::transport_error);
  EXPECT_FALSE(s.attempts[0].compile);
  EXPECT_EQ(s.outcome(), "repaired_at(2)");
}

TEST(RepairLoop, UnusableResponseIsRecorded) {
  const auto program = program_from_document("r", kBroken);
  ScriptedChatClient client({"I cannot help with that."});
  RuleCompiler compiler;
  const auto s = repair_loop(program, failure_for(program), client, compiler, RepairConfig{});
  EXPECT_EQ(s.outcome(), "failed");
  for (const auto& a : s.attempts) EXPECT_EQ(a.failure, AttemptFailure::sanitation_failed);
  EXPECT_TRUE(compiler.seen.empty());
}

TEST(RepairLoop, ChainingFeedsTheLatestCandidate) {
  const auto program = program_from_document("r", kBroken);
  const std::string second = standalone("\\begin{tikzpicture}\n\\bogus two\n\\end{tikzpicture}");
  ScriptedChatClient client({fenced(second), fenced(kFixed)});
  RuleCompiler compiler;
  repair_loop(program, failure_for(program), client, compiler, RepairConfig{});
  const auto text = client.requests().at(1).messages.at(0).parts.at(0).text;
  EXPECT_NE(text.find("\\bogus two"), std::string::npos);

  ScriptedChatClient again({fenced(second), fenced(kFixed)});
  RepairConfig cfg;
  cfg.chain_candidates = false;
  repair_loop(program, failure_for(program), again, compiler, cfg);
  EXPECT_EQ(again.requests().at(1).messages.at(0).parts.at(0).text,
            again.requests().at(0).messages.at(0).parts.at(0).text);
}

TEST(RepairLoop, BodyOnlyCandidateIsRewrapped) {
  const auto program = program_from_document("r", kBroken);
  ScriptedChatClient client({"```\n\\begin{tikzpicture}\n\\draw (0,0);\n\\end{tikzpicture}\n```"});
  RuleCompiler compiler;
  const auto s = repair_loop(program, failure_for(program), client, compiler, RepairConfig{});
  ASSERT_TRUE(s.repaired());
  EXPECT_EQ(s.repaired_code()->rfind("\\documentclass[tikz]{standalone}", 0), 0u);
}

TEST(RepairLoop, RejectsAnAlreadyCompilingProgram) {
  const auto program = program_from_document("r", kFixed);
  CompileResult ok;
  ok.status = CompileStatus::ok;
  ScriptedChatClient client({"x"});
  RuleCompiler compiler;
  EXPECT_THROW(repair_loop(program, ok, client, compiler, RepairConfig{}), InputError);
}

TEST(RepairLoop, HeuristicMockRepairsUndefinedMacrosWithTheRealHarness) {
  tikzkit::testing::ScratchDir dir("repair-real");
  SandboxCompiler compiler(tikzkit::testing::fake_sandbox(dir.path()));
  const auto program = program_from_document("r", kBroken);
  const auto first = compiler.compile(program);
  ASSERT_EQ(first.status, CompileStatus::compile_error);
  HeuristicMockChatClient mock;
  const auto s = repair_loop(program, first, mock, compiler, RepairConfig{});
  EXPECT_EQ(s.outcome(), "repaired_at(1)");
}

TEST(CumulativeSuccess, NonDecreasingInBudget) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RepairSession> sessions(20);
    for (auto& s : sessions) {
      const int k = static_cast<int>(rng() % 5);
      if (k > 0 && k <= 3) s.repaired_at = k;
    }
    const auto curve = cumulative_success(sessions, 3);
    ASSERT_EQ(curve.size(), 3u);
    for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_LE(curve[i - 1], curve[i]);
  }
  EXPECT_TRUE(cumulative_success({}, 3).empty() || cumulative_success({}, 3)[0] == 0.0);
}

TEST(Sanitize, Cases) {
  EXPECT_EQ(*sanitize_response("```latex\n\\draw;\n```"), "\\draw;");
  EXPECT_EQ(*sanitize_response("Here:\n" + kFixed + "\nHope this helps"), kFixed.substr(0, kFixed.size() - 1));
  EXPECT_FALSE(sanitize_response("no code here"));
  EXPECT_FALSE(sanitize_response(""));
}

TEST(RepairPrompt, TemplateShape) {
  const std::string expected =
      "I will provide you with some TikZ code and the corresponding LaTeX error log. Fix the TikZ "
      "code so that it compiles without errors. Only output the corrected TikZ code.\n\n"
      "Original TikZ Code:\nCODE\n\nCompilation Error Log:\nLOG";
  EXPECT_EQ(build_repair_prompt("CODE", "LOG"), expected);
  const auto parts = parse_repair_prompt(expected);
  ASSERT_TRUE(parts);
  EXPECT_EQ(parts->code, "CODE");
  EXPECT_EQ(parts->log, "LOG");
}

TEST(RepairPrompt, EmptyAndLongLogs) {
  EXPECT_NE(build_repair_prompt("c", "  \n").find("Compilation Error Log:\n(no log output)"), std::string::npos);
  const std::string log(5000, 'x');
  const auto p = build_repair_prompt("c", log + "END", 100);
  EXPECT_NE(p.find("[... log truncated ...]\n"), std::string::npos);
  EXPECT_EQ(p.substr(p.size() - 3), "END");
  // Truncation never splits a UTF-8 sequence.
  std::string utf(300, 'a');
  for (int i = 0; i < 100; ++i) utf += "\xC3\xA9";
  const auto q = build_repair_prompt("c", utf, 101);
  const auto tail = q.substr(q.find("truncated ...]\n") + 15);
  EXPECT_EQ(tail.size() % 2, 0u);
}

TEST(RepairConfig, JsonRoundTripAndValidation) {
  RepairConfig c;
  c.max_iterations = 5;
  c.chain_candidates = false;
  const auto back = repair_config_from_json(to_json(c));
  EXPECT_EQ(back.max_iterations, 5);
  EXPECT_FALSE(back.chain_candidates);
  c.max_iterations = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(RepairSession, JsonRoundTrip) {
  const auto program = program_from_document("r", kBroken);
  ScriptedChatClient client({std::nullopt, fenced(kBroken), fenced(kFixed)});
  RuleCompiler compiler;
  const auto s = repair_loop(program, failure_for(program), client, compiler, RepairConfig{});
  const auto back = repair_session_from_json(to_json(s));
  EXPECT_EQ(to_json(back).dump(), to_json(s).dump());
  EXPECT_FALSE(to_json(s, false).dump().empty());
}
