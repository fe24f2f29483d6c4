// tikzkit: run corpus pipeline stages from the command line.
#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tikzkit/errors.hpp"
#include "tikzkit/pipeline.hpp"
#include "tikzkit/pipeline_config.hpp"
#include "tikzkit/prompts.hpp"

namespace fs = std::filesystem;
using tikzkit::Json;

namespace {

struct Options {
  std::string config;
  std::string input;
  std::string output;
  std::optional<std::size_t> jobs;
  std::optional<std::uint64_t> seed;
  bool mock = false;
  bool force = false;
  std::string description;
};

// Exit codes: 2 config, 3 input, 4 environment, 5 infrastructure or
// transport, 1 anything else.
int report_error(const std::string& kind, const std::string& message, int code,
                 const std::vector<std::string>& violations = {}) {
  Json err{{"kind", kind}, {"message", message}, {"exit_code", code}};
  if (!violations.empty()) err["violations"] = violations;
  std::cerr << Json{{"error", err}}.dump() << "\n";
  return code;
}

tikzkit::PipelineConfig build_config(const Options& o, const std::string& command) {
  tikzkit::PipelineConfig c;
  if (!o.config.empty()) c = tikzkit::load_pipeline_config(o.config);
  const bool input_is_corpus = command == "all" || command == "extract";
  if (!o.input.empty() && input_is_corpus) c.input = fs::absolute(o.input);
  if (!o.output.empty()) c.output_dir = fs::absolute(o.output);
  if (o.jobs) c.jobs = *o.jobs;
  if (o.seed) c.seed = *o.seed;
  if (o.mock) c.mock_endpoints = true;
  // A single stage only validates the endpoint it talks to.
  if (command != "all") {
    for (const auto& s : tikzkit::Pipeline::stage_order()) {
      if (s != command && !c.stages.contains(s)) c.stages[s] = false;
    }
  }
  c.validate(true, input_is_corpus);
  return c;
}

int run(const Options& o, const std::string& command) {
  if (command == "prompt" && !o.description.empty()) {
    std::cout << tikzkit::build_generation_prompt(o.description) << "\n";
    return 0;
  }
  tikzkit::Pipeline pipeline(build_config(o, command));
  pipeline.set_force(o.force);
  Json out;
  if (command == "all") {
    out = Json::array();
    for (const auto& r : pipeline.run_all()) out.push_back(tikzkit::to_json(r));
  } else {
    std::optional<fs::path> input;
    if (!o.input.empty() && command != "extract") input = fs::absolute(o.input);
    out = tikzkit::to_json(pipeline.run(command, input));
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tikzkit: TikZ corpus pipeline"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Pipeline config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--input", o.input, "Stage input (corpus for extract/all)");
    sub->add_option("--output", o.output, "Output directory");
    sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", o.seed, "Seed for mocked endpoints");
    sub->add_flag("--mock-endpoints", o.mock, "Use offline chat endpoints");
    sub->add_flag("--force", o.force, "Ignore up-to-date manifests");
  };
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"extract", "Find TikZ environments in source documents"},
      {"normalize", "Strip, wrap, deduplicate and length-filter snippets"},
      {"compile", "Compile and render every program"},
      {"repair", "Repair failing programs with a chat model"},
      {"describe", "Describe rendered figures with a vision model"},
      {"split", "Date split and decontaminate"},
      {"reward", "Score rollouts against reference renders"},
      {"grpo-score", "Advantages, objective and gradients for rollout groups"},
      {"evaluate", "CR / AT / TED / AVG report"},
      {"stats", "Corpus statistics"},
      {"prompt", "Generation prompts from descriptions"},
      {"all", "Run every enabled stage in order"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub);
    if (name == "prompt") {
      sub->add_option("--description", o.description, "Print the prompt for one description");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error("usage_error", e.what(), 64);
  }
  try {
    return run(o, app.get_subcommands().front()->get_name());
  } catch (const tikzkit::ConfigError& e) {
    return report_error("config_error", e.what(), 2, e.violations());
  } catch (const tikzkit::InputError& e) {
    return report_error("input_error", e.what(), 3);
  } catch (const tikzkit::EnvironmentError& e) {
    return report_error("environment_error", e.what(), 4);
  } catch (const tikzkit::TransportError& e) {
    return report_error("transport_error", e.what(), 5);
  } catch (const tikzkit::InfrastructureError& e) {
    return report_error("infrastructure_error", e.what(), 5);
  } catch (const std::exception& e) {
    return report_error("error", e.what(), 1);
  }
}
