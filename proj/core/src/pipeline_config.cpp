#include "tikzkit/pipeline_config.hpp"

#include <set>

#include "tikzkit/errors.hpp"

namespace tikzkit {
namespace {

const std::set<std::string> kStageNames = {"extract",  "normalize", "compile",    "repair",
                                           "describe", "split",     "reward",     "grpo-score",
                                           "evaluate", "stats",     "prompt"};

const std::set<std::string> kTopLevelKeys = {
    "input",          "tree_source_kind", "tree_license",    "output_dir",  "jobs",
    "seed",           "mock_endpoints",   "rules_file",      "min_body_chars",
    "max_body_chars", "stages",           "sandbox",         "repair_endpoint",
    "describe_endpoint", "repair",        "describe",        "split",       "reward",
    "embedding_provider", "grpo",         "grpo_input",      "metrics",     "$comment"};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::optional<std::filesystem::path> opt_path(const Json& j, const char* key,
                                              const std::filesystem::path& base) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return resolve(base, j[key].get<std::string>());
}

Json path_json(const std::optional<std::filesystem::path>& p) {
  return p ? Json(p->string()) : Json(nullptr);
}

// Runs a section validator and folds its violations into out.
template <class F>
void collect(std::vector<std::string>& out, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    out.insert(out.end(), e.violations().begin(), e.violations().end());
  }
}

}  // namespace

bool PipelineConfig::stage_enabled(const std::string& stage) const {
  const auto it = stages.find(stage);
  return it == stages.end() || it->second;
}

void PipelineConfig::validate(bool check_paths, bool require_input) const {
  std::vector<std::string> v;
  namespace fs = std::filesystem;
  if (input.empty()) {
    if (require_input) v.emplace_back("input is required");
  } else if (check_paths && !fs::exists(input)) {
    v.push_back("input does not exist: " + input.string());
  }
  if (output_dir.empty()) v.emplace_back("output_dir is required");
  if (jobs == 0) v.emplace_back("jobs must be >= 1");
  if (min_body_chars > max_body_chars) v.emplace_back("min_body_chars must be <= max_body_chars");
  if (rules_file && check_paths && !fs::exists(*rules_file)) {
    v.push_back("rules_file does not exist: " + rules_file->string());
  }
  for (const auto& [name, enabled] : stages) {
    (void)enabled;
    if (!kStageNames.contains(name)) v.push_back("stages: unknown stage '" + name + "'");
  }
  collect(v, [&] { sandbox.validate(); });
  collect(v, [&] { repair.validate(); });
  collect(v, [&] { describe.validate(); });
  collect(v, [&] { split.validate(); });
  collect(v, [&] { reward.validate(); });
  collect(v, [&] { grpo.validate(); });
  if (!mock_endpoints) {
    if (stage_enabled("repair")) collect(v, [&] { repair_endpoint.endpoint.validate("repair_endpoint"); });
    if (stage_enabled("describe")) {
      collect(v, [&] { describe_endpoint.endpoint.validate("describe_endpoint"); });
    }
  }
  if (embedding.kind == "raster_patch") {
    if (embedding.grid < 1) v.emplace_back("embedding_provider.grid must be >= 1");
  } else if (embedding.kind == "file_exchange") {
    if (embedding.command.empty()) v.emplace_back("embedding_provider.command is empty");
  } else if (embedding.kind == "http") {
    if (embedding.url.rfind("http", 0) != 0) v.emplace_back("embedding_provider.url must be http(s)");
  } else {
    v.push_back("embedding_provider.kind must be raster_patch, file_exchange or http");
  }
  if (!(embedding.timeout_s > 0)) v.emplace_back("embedding_provider.timeout_s must be > 0");
  if (metric_m1.empty() || metric_m2.empty()) v.emplace_back("metrics.external_pair needs two names");
  if (check_paths) {
    for (const auto& [name, p] : {std::pair{"grpo_input", grpo_input},
                                  std::pair{"metrics.scores_file", scores_file},
                                  std::pair{"metrics.predictions_file", predictions_file}}) {
      if (p && !fs::exists(*p)) v.push_back(std::string(name) + " does not exist: " + p->string());
    }
  }
  if (!v.empty()) throw ConfigError(std::move(v));
}

PipelineConfig pipeline_config_from_json(const Json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
  std::vector<std::string> v;
  for (const auto& [k, _] : j.items()) {
    if (!kTopLevelKeys.contains(k)) v.push_back("unknown config key '" + k + "'");
  }
  PipelineConfig c;
  auto section = [&](const char* key) { return j.contains(key) ? j[key] : Json::object(); };
  auto guard = [&](const char* what, auto&& f) {
    try {
      f();
    } catch (const Json::exception& e) {
      v.push_back(std::string(what) + ": " + e.what());
    } catch (const InputError& e) {
      v.push_back(std::string(what) + ": " + e.what());
    }
  };
  guard("input", [&] { if (auto p = opt_path(j, "input", base)) c.input = *p; });
  guard("tree_source_kind", [&] {
    if (j.contains("tree_source_kind")) c.tree_source_kind = parse_source_kind(j["tree_source_kind"].get<std::string>());
  });
  guard("tree_license", [&] {
    if (j.contains("tree_license")) c.tree_license = parse_license(j["tree_license"].get<std::string>());
  });
  guard("output_dir", [&] { if (auto p = opt_path(j, "output_dir", base)) c.output_dir = *p; });
  guard("jobs", [&] { c.jobs = j.value("jobs", c.jobs); });
  guard("seed", [&] { c.seed = j.value("seed", c.seed); });
  guard("mock_endpoints", [&] { c.mock_endpoints = j.value("mock_endpoints", c.mock_endpoints); });
  guard("rules_file", [&] { c.rules_file = opt_path(j, "rules_file", base); });
  guard("min_body_chars", [&] { c.min_body_chars = j.value("min_body_chars", c.min_body_chars); });
  guard("max_body_chars", [&] { c.max_body_chars = j.value("max_body_chars", c.max_body_chars); });
  guard("stages", [&] { c.stages = section("stages").get<std::map<std::string, bool>>(); });
  guard("sandbox", [&] {
    const auto s = section("sandbox");
    c.sandbox = sandbox_config_from_json(s);
    if (s.contains("work_root")) c.sandbox.work_root = resolve(base, s["work_root"].get<std::string>());
    if (s.contains("artifact_dir")) {
      c.sandbox.artifact_dir = resolve(base, s["artifact_dir"].get<std::string>());
      c.sandbox_artifact_dir_set = true;
    }
  });
  for (auto [key, target] : {std::pair{"repair_endpoint", &c.repair_endpoint},
                             std::pair{"describe_endpoint", &c.describe_endpoint}}) {
    guard(key, [&, key = key, target = target] {
      const auto s = section(key);
      target->endpoint = chat_endpoint_config_from_json(s);
      target->transcript = opt_path(s, "transcript", base);
    });
  }
  guard("repair", [&] { c.repair = repair_config_from_json(section("repair")); });
  guard("describe", [&] { c.describe = describe_config_from_json(section("describe")); });
  guard("split", [&] { c.split = split_policy_from_json(section("split")); });
  guard("reward", [&] { c.reward = reward_config_from_json(section("reward")); });
  guard("embedding_provider", [&] {
    const auto s = section("embedding_provider");
    c.embedding.kind = s.value("kind", c.embedding.kind);
    c.embedding.grid = s.value("grid", c.embedding.grid);
    c.embedding.command = s.value("command", c.embedding.command);
    c.embedding.url = s.value("url", c.embedding.url);
    c.embedding.timeout_s = s.value("timeout_s", c.embedding.timeout_s);
  });
  guard("grpo", [&] { c.grpo = grpo_config_from_json(section("grpo")); });
  guard("grpo_input", [&] { c.grpo_input = opt_path(j, "grpo_input", base); });
  guard("metrics", [&] {
    const auto s = section("metrics");
    if (s.contains("external_pair")) {
      const auto pair = s["external_pair"].get<std::vector<std::string>>();
      if (pair.size() != 2) throw InputError("external_pair must name exactly two scores");
      c.metric_m1 = pair[0];
      c.metric_m2 = pair[1];
    }
    c.scores_file = opt_path(s, "scores_file", base);
    c.predictions_file = opt_path(s, "predictions_file", base);
  });
  if (!v.empty()) {
    // Report value problems in the same pass as key problems.
    try {
      c.validate(false, false);
    } catch (const ConfigError& e) {
      v.insert(v.end(), e.violations().begin(), e.violations().end());
    }
    throw ConfigError(std::move(v));
  }
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  auto base = std::filesystem::absolute(path).parent_path();
  return pipeline_config_from_json(j, base);
}

Json to_json(const PipelineConfig& c) {
  Json sandbox = to_json(c.sandbox);
  auto endpoint = [](const EndpointSection& s) {
    Json e = to_json(s.endpoint);
    e["transcript"] = path_json(s.transcript);
    return e;
  };
  return Json{
      {"input", c.input.string()},
      {"tree_source_kind", to_string(c.tree_source_kind)},
      {"tree_license", to_string(c.tree_license)},
      {"output_dir", c.output_dir.string()},
      {"jobs", c.jobs},
      {"seed", c.seed},
      {"mock_endpoints", c.mock_endpoints},
      {"rules_file", path_json(c.rules_file)},
      {"min_body_chars", c.min_body_chars},
      {"max_body_chars", c.max_body_chars},
      {"stages", c.stages},
      {"sandbox", sandbox},
      {"repair_endpoint", endpoint(c.repair_endpoint)},
      {"describe_endpoint", endpoint(c.describe_endpoint)},
      {"repair", to_json(c.repair)},
      {"describe", to_json(c.describe)},
      {"split", to_json(c.split)},
      {"reward", to_json(c.reward)},
      {"embedding_provider",
       {{"kind", c.embedding.kind},
        {"grid", c.embedding.grid},
        {"command", c.embedding.command},
        {"url", c.embedding.url},
        {"timeout_s", c.embedding.timeout_s}}},
      {"grpo", to_json(c.grpo)},
      {"grpo_input", path_json(c.grpo_input)},
      {"metrics",
       {{"external_pair", {c.metric_m1, c.metric_m2}},
        {"scores_file", path_json(c.scores_file)},
        {"predictions_file", path_json(c.predictions_file)}}}};
}

}  // namespace tikzkit
