#include "tikzkit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

#include "tikzkit/corpus_extract.hpp"
#include "tikzkit/dataset_store.hpp"
#include "tikzkit/decontaminate.hpp"
#include "tikzkit/digest.hpp"
#include "tikzkit/embedding_provider.hpp"
#include "tikzkit/errors.hpp"
#include "tikzkit/grpo_io.hpp"
#include "tikzkit/llm_repair.hpp"
#include "tikzkit/metrics.hpp"
#include "tikzkit/normalize.hpp"
#include "tikzkit/prompts.hpp"
#include "tikzkit/vlm_describe.hpp"

namespace tikzkit {
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kSnippets = "snippets.jsonl";
constexpr std::string_view kExtractDiagnostics = "extract_diagnostics.jsonl";
constexpr std::string_view kPrograms = "programs.jsonl";
constexpr std::string_view kRecordsNormalized = "records_normalized.jsonl";
constexpr std::string_view kCompileResults = "compile_results.jsonl";
constexpr std::string_view kRecordsCompiled = "records_compiled.jsonl";
constexpr std::string_view kRepairSessions = "repair_sessions.jsonl";
constexpr std::string_view kRecordsRepaired = "records_repaired.jsonl";
constexpr std::string_view kDescriptions = "descriptions.jsonl";
constexpr std::string_view kRecordsDescribed = "records_described.jsonl";
constexpr std::string_view kRecordsSplit = "records_split.jsonl";
constexpr std::string_view kRewards = "rewards.jsonl";
constexpr std::string_view kMetricsJson = "metrics.json";
constexpr std::string_view kMetricsText = "metrics.txt";
constexpr std::string_view kStats = "stats.json";
constexpr std::string_view kPrompts = "prompts.jsonl";

// Records files in stage order; a stage's default input is the newest one
// produced by an earlier stage.
const std::vector<std::pair<std::string, std::string_view>> kRecordChain = {
    {"normalize", kRecordsNormalized}, {"compile", kRecordsCompiled},
    {"repair", kRecordsRepaired},      {"describe", kRecordsDescribed},
    {"split", kRecordsSplit}};

// Runs fn(i) for i in [0, n) on up to jobs threads; rethrows the first error.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex mu;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= n || failed.load()) return;
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!first) first = std::current_exception();
            failed.store(true);
          }
        }
      });
    }
  }
  if (first) std::rethrow_exception(first);
}

std::string file_sha256_or_empty(const fs::path& p) {
  return fs::exists(p) ? file_sha256(p) : std::string();
}

// Directory inputs hash their sorted (relative path, content hash) listing.
std::string input_fingerprint(const fs::path& p) {
  if (!fs::is_directory(p)) return file_sha256(p);
  std::vector<std::string> lines;
  for (const auto& e : fs::recursive_directory_iterator(p)) {
    if (!e.is_regular_file()) continue;
    lines.push_back(e.path().lexically_relative(p).generic_string() + " " + file_sha256(e.path()));
  }
  std::sort(lines.begin(), lines.end());
  std::string joined;
  for (const auto& l : lines) joined += l + "\n";
  return sha256_hex(joined);
}

std::vector<TikZRecord> load_records(const fs::path& p) { return read_records(p, true).records; }

TikZRecord record_from_program(const NormalizedProgram& p) {
  TikZRecord r;
  r.record_id = p.record_id;
  r.source_kind = p.provenance.source_kind;
  r.origin_key = p.provenance.origin_key;
  r.license = p.provenance.license;
  r.date = p.provenance.date;
  r.code = p.code;
  r.content_hash = p.content_hash;
  return r.next_version("normalize", Json{{"packages", p.packages},
                                          {"env_kind", to_string(p.provenance.env_kind)},
                                          {"doc_id", p.provenance.doc_id}});
}

}  // namespace

Json to_json(const StageReport& r) {
  Json outputs = Json::array();
  for (const auto& p : r.outputs) outputs.push_back(p.string());
  return Json{{"stage", r.stage}, {"skipped", r.skipped}, {"summary", r.summary},
              {"outputs", outputs}};
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  if (!config_.sandbox_artifact_dir_set) config_.sandbox.artifact_dir = config_.output_dir / "artifacts";
}

void Pipeline::set_compiler(std::shared_ptr<ProgramCompiler> c) { compiler_ = std::move(c); }
void Pipeline::set_repair_client(std::shared_ptr<ChatClient> c) { repair_client_ = std::move(c); }
void Pipeline::set_describe_client(std::shared_ptr<ChatClient> c) { describe_client_ = std::move(c); }
void Pipeline::set_embedding_provider(std::shared_ptr<EmbeddingProvider> p) {
  provider_ = std::move(p);
}

const std::vector<std::string>& Pipeline::stage_order() {
  static const std::vector<std::string> order = {"extract",  "normalize", "compile",
                                                 "repair",   "describe",  "split",
                                                 "reward",   "grpo-score", "evaluate",
                                                 "stats",    "prompt"};
  return order;
}

fs::path Pipeline::out(std::string_view name) const { return config_.output_dir / fs::path(name); }

ProgramCompiler& Pipeline::compiler() {
  if (!compiler_) compiler_ = std::make_shared<SandboxCompiler>(config_.sandbox);
  return *compiler_;
}

namespace {

std::shared_ptr<ChatClient> make_chat_client(const EndpointSection& s, bool mock,
                                             std::uint64_t seed) {
  if (mock) {
    if (s.transcript && fs::exists(*s.transcript)) {
      return std::make_shared<ReplayChatClient>(*s.transcript);
    }
    const std::string model = s.endpoint.model_name.empty() ? "heuristic-mock" : s.endpoint.model_name;
    return std::make_shared<HeuristicMockChatClient>(model, seed);
  }
  std::shared_ptr<ChatClient> live = std::make_shared<HttpChatClient>(s.endpoint);
  if (s.transcript) return std::make_shared<RecordingChatClient>(live, *s.transcript);
  return live;
}

}  // namespace

ChatClient& Pipeline::repair_client() {
  if (!repair_client_) {
    repair_client_ = make_chat_client(config_.repair_endpoint, config_.mock_endpoints, config_.seed);
  }
  return *repair_client_;
}

ChatClient& Pipeline::describe_client() {
  if (!describe_client_) {
    describe_client_ =
        make_chat_client(config_.describe_endpoint, config_.mock_endpoints, config_.seed);
  }
  return *describe_client_;
}

EmbeddingProvider& Pipeline::provider() {
  if (!provider_) {
    const auto& e = config_.embedding;
    if (e.kind == "file_exchange") {
      provider_ = std::make_shared<FileExchangeProvider>(e.command, e.timeout_s, config_.sandbox.work_root);
    } else if (e.kind == "http") {
      provider_ = std::make_shared<HttpEmbeddingProvider>(e.url, e.timeout_s);
    } else {
      provider_ = std::make_shared<RasterPatchProvider>(e.grid);
    }
  }
  return *provider_;
}

std::string Pipeline::relative_artifact(const std::optional<fs::path>& p) const {
  if (!p) return {};
  const fs::path rel = p->lexically_relative(config_.output_dir);
  return (rel.empty() ? *p : rel).generic_string();
}

fs::path Pipeline::default_input(const std::string& stage) const {
  if (stage == "extract") return config_.input;
  if (stage == "normalize") return out(kSnippets);
  if (stage == "grpo-score") {
    if (!config_.grpo_input) throw ConfigError("grpo-score needs grpo_input or --input");
    return *config_.grpo_input;
  }
  // Newest records file written by a stage that precedes this one.
  const auto& order = stage_order();
  const auto pos = std::find(order.begin(), order.end(), stage) - order.begin();
  fs::path best;
  for (const auto& [producer, file] : kRecordChain) {
    const auto ppos = std::find(order.begin(), order.end(), producer) - order.begin();
    if (ppos < pos && fs::exists(out(file))) best = out(file);
  }
  if (best.empty()) throw InputError("no input records for stage '" + stage + "'; run earlier stages first");
  return best;
}

Json Pipeline::stage_config(const std::string& stage) {
  auto endpoint_id = [&](const EndpointSection& s) {
    return Json{{"model", s.endpoint.model_name},
                {"mock", config_.mock_endpoints},
                {"seed", config_.seed},
                {"transcript", s.transcript ? file_sha256_or_empty(*s.transcript) : ""}};
  };
  if (stage == "extract") {
    return {{"tree_source_kind", to_string(config_.tree_source_kind)},
            {"tree_license", to_string(config_.tree_license)}};
  }
  if (stage == "normalize") {
    return {{"rules", config_.rules_file ? file_sha256(*config_.rules_file) : "default"},
            {"min_body_chars", config_.min_body_chars},
            {"max_body_chars", config_.max_body_chars}};
  }
  if (stage == "compile") return {{"sandbox", config_.sandbox.fingerprint()}};
  if (stage == "repair") {
    return {{"sandbox", config_.sandbox.fingerprint()},
            {"repair", to_json(config_.repair)},
            {"endpoint", endpoint_id(config_.repair_endpoint)}};
  }
  if (stage == "describe") {
    return {{"describe", to_json(config_.describe)},
            {"endpoint", endpoint_id(config_.describe_endpoint)}};
  }
  if (stage == "split") return {{"split", to_json(config_.split)}};
  if (stage == "reward") {
    return {{"sandbox", config_.sandbox.fingerprint()},
            {"reward", to_json(config_.reward)},
            {"provider", provider().identity()}};
  }
  if (stage == "grpo-score") return {{"grpo", to_json(config_.grpo)}};
  if (stage == "evaluate") {
    return {{"m1", config_.metric_m1}, {"m2", config_.metric_m2},
            {"sandbox", config_.sandbox.fingerprint()}};
  }
  return Json::object();
}

std::vector<fs::path> Pipeline::extra_inputs(const std::string& stage) const {
  std::vector<fs::path> v;
  if (stage == "evaluate") {
    if (config_.scores_file) v.push_back(*config_.scores_file);
    if (config_.predictions_file) v.push_back(*config_.predictions_file);
  }
  return v;
}

StageReport Pipeline::run(const std::string& stage, const std::optional<fs::path>& input) {
  const auto& order = stage_order();
  if (std::find(order.begin(), order.end(), stage) == order.end()) {
    throw InputError("unknown stage '" + stage + "'");
  }
  const fs::path in = input ? *input : default_input(stage);
  if (!fs::exists(in)) throw InputError("stage '" + stage + "': input does not exist: " + in.string());
  fs::create_directories(config_.output_dir);

  Json inputs = Json::array();
  inputs.push_back({{"path", in.string()}, {"sha256", input_fingerprint(in)}});
  for (const auto& p : extra_inputs(stage)) {
    inputs.push_back({{"path", p.string()}, {"sha256", input_fingerprint(p)}});
  }
  const Json cfg = stage_config(stage);
  const std::string cfg_hash = sha256_hex(cfg.dump());
  const fs::path manifest_path = out("manifests") / (stage + ".json");

  // The compile stage always re-executes; its artifact cache is what makes
  // a repeated run cheap, and the run reports the hit rate.
  if (!force_ && stage != "compile" && fs::exists(manifest_path)) {
    try {
      const Json m = Json::parse(read_text_file(manifest_path));
      bool current = m.at("config_sha256") == cfg_hash && m.at("inputs") == inputs;
      for (const auto& o : m.at("outputs")) {
        const fs::path p = config_.output_dir / o.at("path").get<std::string>();
        current = current && fs::exists(p) && file_sha256(p) == o.at("sha256").get<std::string>();
      }
      if (current) {
        StageReport r{stage, true, m.at("summary"), {}};
        for (const auto& o : m.at("outputs")) {
          r.outputs.push_back(config_.output_dir / o.at("path").get<std::string>());
        }
        return r;
      }
    } catch (const Json::exception&) {
      // Unreadable manifest: run the stage.
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  StageReport report;
  if (stage == "extract") report = extract(in);
  else if (stage == "normalize") report = normalize(in);
  else if (stage == "compile") report = compile(in);
  else if (stage == "repair") report = repair(in);
  else if (stage == "describe") report = describe_stage(in);
  else if (stage == "split") report = split(in);
  else if (stage == "reward") report = reward(in);
  else if (stage == "grpo-score") report = grpo_score(in);
  else if (stage == "evaluate") report = evaluate(in);
  else if (stage == "stats") report = stats(in);
  else report = prompt(in);
  report.stage = stage;
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();

  Json outputs = Json::array();
  for (const auto& p : report.outputs) {
    outputs.push_back({{"path", p.lexically_relative(config_.output_dir).generic_string()},
                       {"sha256", file_sha256(p)}});
  }
  fs::create_directories(manifest_path.parent_path());
  write_text_file(manifest_path, Json{{"stage", stage},
                                      {"config", cfg},
                                      {"config_sha256", cfg_hash},
                                      {"inputs", inputs},
                                      {"outputs", outputs},
                                      {"summary", report.summary}}
                                         .dump(2) +
                                     "\n");
  fs::create_directories(out("timings"));
  write_text_file(out("timings") / (stage + ".json"),
                  Json{{"stage", stage}, {"duration_ms", ms}}.dump() + "\n");
  return report;
}

std::vector<StageReport> Pipeline::run_all() {
  std::vector<StageReport> reports;
  for (const auto& stage : stage_order()) {
    if (!config_.stage_enabled(stage)) continue;
    if (stage == "grpo-score" && !config_.grpo_input) continue;
    reports.push_back(run(stage));
  }
  return reports;
}

// ---------------------------------------------------------------- extract

StageReport Pipeline::extract(const fs::path& input) {
  std::vector<LineDiagnostic> manifest_diags;
  std::vector<SourceDocument> docs =
      fs::is_directory(input)
          ? load_document_tree(input, config_.tree_source_kind, config_.tree_license)
          : read_document_manifest(input, false, &manifest_diags);

  std::vector<ExtractionResult> results(docs.size());
  parallel_for(docs.size(), config_.jobs, [&](std::size_t i) { results[i] = extract_environments(docs[i]); });

  std::vector<Json> rows;
  std::vector<Json> diags;
  std::map<std::string, std::size_t> per_env;
  for (const auto& d : manifest_diags) {
    diags.push_back({{"kind", "manifest"}, {"line", d.line}, {"message", d.message}});
  }
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto& doc = docs[i];
    for (std::size_t k = 0; k < results[i].snippets.size(); ++k) {
      const auto& s = results[i].snippets[k];
      ++per_env[std::string(to_string(s.env_kind))];
      rows.push_back({{"record_id", doc.id + ":" + std::to_string(k)},
                      {"source_kind", to_string(doc.source_kind)},
                      {"origin_key", doc.origin_key},
                      {"license", to_string(doc.license)},
                      {"date", doc.date ? Json(*doc.date) : Json(nullptr)},
                      {"snippet", to_json(s)}});
    }
    for (const auto& d : results[i].diagnostics) {
      Json j = to_json(d);
      j["kind"] = "extraction";
      diags.push_back(std::move(j));
    }
  }
  write_jsonl(out(kSnippets), rows);
  write_jsonl(out(kExtractDiagnostics), diags);
  return {"extract",
          false,
          {{"documents", docs.size()},
           {"snippets", rows.size()},
           {"diagnostics", diags.size()},
           {"per_env", per_env}},
          {out(kSnippets), out(kExtractDiagnostics)}};
}

// -------------------------------------------------------------- normalize

StageReport Pipeline::normalize(const fs::path& input) {
  const PackageRuleSet rules =
      config_.rules_file ? PackageRuleSet::load(*config_.rules_file) : PackageRuleSet::defaults();
  const auto rows = read_jsonl(input, true).rows;

  std::vector<std::optional<NormalizedProgram>> normalized(rows.size());
  parallel_for(rows.size(), config_.jobs, [&](std::size_t i) {
    const Json& row = rows[i];
    auto p = normalize_snippet(snippet_from_json(row.at("snippet")), rules);
    if (!p) return;
    p->record_id = row.at("record_id").get<std::string>();
    p->provenance.source_kind = parse_source_kind(row.at("source_kind").get<std::string>());
    p->provenance.origin_key = row.at("origin_key").get<std::string>();
    p->provenance.license = parse_license(row.at("license").get<std::string>());
    if (row.contains("date") && row["date"].is_string()) p->provenance.date = row["date"].get<std::string>();
    normalized[i] = std::move(p);
  });

  std::size_t external = 0;
  std::vector<NormalizedProgram> programs;
  for (auto& p : normalized) {
    if (p) programs.push_back(std::move(*p));
    else ++external;
  }
  const std::size_t wrapped = programs.size();
  DedupResult d = dedup(std::move(programs));
  std::vector<NormalizedProgram> kept;
  std::size_t too_short = 0;
  std::size_t too_long = 0;
  for (auto& p : d.kept) {
    if (length_filter(p, config_.min_body_chars, config_.max_body_chars)) {
      kept.push_back(std::move(p));
    } else if (p.body_char_count < config_.min_body_chars) {
      ++too_short;
    } else {
      ++too_long;
    }
  }

  std::vector<Json> program_rows;
  std::vector<TikZRecord> records;
  for (const auto& p : kept) {
    program_rows.push_back(to_json(p));
    records.push_back(record_from_program(p));
  }
  write_jsonl(out(kPrograms), program_rows);
  const auto receipt = write_records(records, out(kRecordsNormalized));
  return {"normalize",
          false,
          {{"snippets", rows.size()},
           {"dropped_external", external},
           {"wrapped", wrapped},
           {"dropped_duplicate", d.dropped},
           {"dropped_too_short", too_short},
           {"dropped_too_long", too_long},
           {"programs", kept.size()}},
          {out(kPrograms), receipt.path, receipt.index_path}};
}

// ---------------------------------------------------------------- compile

StageReport Pipeline::compile(const fs::path& input) {
  const auto records = load_records(input);
  std::vector<NormalizedProgram> programs;
  programs.reserve(records.size());
  for (const auto& r : records) programs.push_back(program_from_document(r.record_id, r.code));
  auto results = compile_all(compiler(), programs, config_.jobs);

  std::vector<Json> rows;
  std::vector<Json> timings;
  std::vector<TikZRecord> updated;
  std::map<std::string, std::size_t> by_status;
  std::size_t hits = 0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto& res = results[i];
    const std::string artifact = relative_artifact(res.artifact_path);
    if (res.artifact_path) res.artifact_path = artifact;
    hits += res.cache_hit ? 1 : 0;
    ok += res.status == CompileStatus::ok ? 1 : 0;
    ++by_status[std::string(to_string(res.status))];
    rows.push_back(to_json(res, false));
    timings.push_back({{"record_id", res.record_id}, {"duration_ms", res.duration_ms},
                       {"cache_hit", res.cache_hit}});
    TikZRecord r = records[i].next_version("compile", {{"status", to_string(res.status)}});
    r.compile_status = res.status;
    r.image_artifact = res.artifact_path ? std::optional<std::string>(artifact) : std::nullopt;
    updated.push_back(std::move(r));
  }
  write_jsonl(out(kCompileResults), rows);
  fs::create_directories(out("timings"));
  write_jsonl(out("timings") / "compile_jobs.jsonl", timings);
  const auto receipt = write_records(updated, out(kRecordsCompiled));

  const double n = static_cast<double>(results.size());
  Json summary{{"programs", results.size()},
               {"ok", ok},
               {"by_status", by_status},
               {"cache_hits", hits},
               {"cache_misses", results.size() - hits},
               {"cache_hit_rate", results.empty() ? 0.0 : static_cast<double>(hits) / n},
               {"compilation_rate", results.empty() ? Json(nullptr) : Json(compilation_rate(results))}};
  return {"compile", false, summary, {out(kCompileResults), receipt.path, receipt.index_path}};
}

// ----------------------------------------------------------------- repair

StageReport Pipeline::repair(const fs::path& input) {
  const auto records = load_records(input);
  std::vector<std::size_t> failing;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].compile_status && *records[i].compile_status != CompileStatus::ok) failing.push_back(i);
  }
  std::vector<RepairSession> sessions(failing.size());
  ChatClient& client = repair_client();
  ProgramCompiler& comp = compiler();
  parallel_for(failing.size(), config_.jobs, [&](std::size_t k) {
    const TikZRecord& r = records[failing[k]];
    const auto program = program_from_document(r.record_id, r.code);
    // Recompiling is a cache hit; it recovers the log the loop starts from.
    const CompileResult first = comp.compile(program);
    if (first.status == CompileStatus::ok) {
      throw InfrastructureError(r.record_id + ": recorded as failing but now compiles");
    }
    sessions[k] = repair_loop(program, first, client, comp, config_.repair);
  });

  std::map<std::size_t, const RepairSession*> by_index;
  for (std::size_t k = 0; k < failing.size(); ++k) by_index[failing[k]] = &sessions[k];

  std::vector<TikZRecord> updated;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const TikZRecord& r = records[i];
    const auto it = by_index.find(i);
    if (it == by_index.end()) {
      TikZRecord n = r.next_version("repair", {{"outcome", "not_needed"}});
      if (r.compile_status) n.repair_outcome = RepairStatus::not_needed();
      updated.push_back(std::move(n));
      continue;
    }
    const RepairSession& s = *it->second;
    TikZRecord n = r.next_version("repair", {{"outcome", s.outcome()}, {"model", s.model_name}});
    if (s.repaired()) {
      const auto& last = s.attempts.back();
      n.code = last.candidate_code;
      n.content_hash = sha256_hex(n.code);
      n.compile_status = CompileStatus::ok;
      n.image_artifact = relative_artifact(last.compile->artifact_path);
      n.repair_outcome = RepairStatus::repaired_at(*s.repaired_at);
    } else {
      n.repair_outcome = RepairStatus::failed();
    }
    updated.push_back(std::move(n));
  }

  std::vector<Json> rows;
  for (auto s : sessions) {
    for (auto& a : s.attempts) {
      if (a.compile && a.compile->artifact_path) a.compile->artifact_path = relative_artifact(a.compile->artifact_path);
    }
    rows.push_back(to_json(s, false));
  }
  write_jsonl(out(kRepairSessions), rows);
  const auto receipt = write_records(updated, out(kRecordsRepaired));

  std::map<std::string, std::size_t> outcomes;
  for (const auto& s : sessions) ++outcomes[s.outcome()];
  Json summary{{"records", records.size()},
               {"failing", failing.size()},
               {"outcomes", outcomes},
               {"model", client.model_name()}};
  summary["cumulative_success"] =
      sessions.empty() ? Json::array() : Json(cumulative_success(sessions, config_.repair.max_iterations));
  return {"repair", false, summary, {out(kRepairSessions), receipt.path, receipt.index_path}};
}

// --------------------------------------------------------------- describe

StageReport Pipeline::describe_stage(const fs::path& input) {
  const auto records = load_records(input);
  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.compile_status == CompileStatus::ok && r.image_artifact && !r.description) targets.push_back(i);
  }
  std::vector<DescriptionResult> results(targets.size());
  ChatClient& client = describe_client();
  parallel_for(targets.size(), config_.jobs, [&](std::size_t k) {
    const auto& r = records[targets[k]];
    fs::path image(*r.image_artifact);
    if (image.is_relative()) image = config_.output_dir / image;
    results[k] = describe(r.record_id, image, client, config_.describe);
  });

  std::vector<TikZRecord> updated = records;
  std::map<std::string, std::size_t> verdicts;
  std::vector<Json> rows;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const auto& res = results[k];
    ++verdicts[std::string(to_string(res.validation))];
    rows.push_back(to_json(res));
    auto& r = updated[targets[k]];
    r = r.next_version("describe", {{"validation", to_string(res.validation)}, {"model", res.model_name}});
    if (res.validation == DescriptionValidation::ok) r.description = res.description;
  }
  write_jsonl(out(kDescriptions), rows);
  const auto receipt = write_records(updated, out(kRecordsDescribed));
  return {"describe",
          false,
          {{"records", records.size()}, {"attempted", targets.size()}, {"validation", verdicts},
           {"model", client.model_name()}},
          {out(kDescriptions), receipt.path, receipt.index_path}};
}

// ------------------------------------------------------------------ split

StageReport Pipeline::split(const fs::path& input) {
  const auto records = load_records(input);
  SplitOutcome outcome = run_split(records, config_.split);
  std::map<Split, std::vector<TikZRecord>> parts;
  for (const auto& r : outcome.records) parts[*r.split].push_back(r);

  const auto all = write_records(outcome.records, out(kRecordsSplit));
  std::vector<fs::path> outputs = {all.path, all.index_path};
  for (Split s : {Split::train, Split::test, Split::quarantine}) {
    const auto receipt = write_records(parts[s], out(std::string(to_string(s)) + ".jsonl"));
    outputs.push_back(receipt.path);
    outputs.push_back(receipt.index_path);
  }
  write_text_file(out("contamination_report.json"), to_json(outcome.report).dump(2) + "\n");
  write_jsonl(out("review_queue.jsonl"), outcome.review_queue);
  outputs.push_back(out("contamination_report.json"));
  outputs.push_back(out("review_queue.jsonl"));
  return {"split",
          false,
          {{"records", records.size()},
           {"train", parts[Split::train].size()},
           {"test", parts[Split::test].size()},
           {"quarantine", parts[Split::quarantine].size()},
           {"flagged_pairs", outcome.report.flagged_pairs.size()}},
          outputs};
}

// ----------------------------------------------------------------- reward

// Input rows are either records (each eligible record is scored against
// its own render) or {"id", "code", "gt_image" | "gt_embedding"} requests
// whose paths resolve against the input file's directory.
StageReport Pipeline::reward(const fs::path& input) {
  const auto rows = read_jsonl(input, true).rows;
  struct Request {
    std::string id;
    std::string code;
    std::optional<fs::path> gt_image;
    std::optional<fs::path> gt_embedding;
  };
  std::vector<Request> requests;
  const bool record_mode = !rows.empty() && rows.front().contains("schema");
  if (record_mode) {
    std::vector<TikZRecord> records;
    for (const auto& row : rows) records.push_back(record_from_json(row));
    const bool any_test = std::any_of(records.begin(), records.end(),
                                      [](const TikZRecord& r) { return r.split == Split::test; });
    for (const auto& r : records) {
      if (r.compile_status != CompileStatus::ok || !r.image_artifact) continue;
      if (any_test && r.split != Split::test) continue;
      fs::path image(*r.image_artifact);
      if (image.is_relative()) image = config_.output_dir / image;
      requests.push_back({r.record_id, r.code, image, std::nullopt});
    }
  } else {
    const fs::path base = input.parent_path();
    for (const auto& row : rows) {
      Request q{row.at("id").get<std::string>(), row.at("code").get<std::string>(), {}, {}};
      auto resolve = [&](const char* key) -> std::optional<fs::path> {
        if (!row.contains(key)) return std::nullopt;
        fs::path p(row[key].get<std::string>());
        return p.is_relative() ? base / p : p;
      };
      q.gt_image = resolve("gt_image");
      q.gt_embedding = resolve("gt_embedding");
      if (!q.gt_image && !q.gt_embedding) throw InputError(q.id + ": needs gt_image or gt_embedding");
      requests.push_back(std::move(q));
    }
  }

  EmbeddingProvider& prov = provider();
  ProgramCompiler& comp = compiler();
  std::vector<Json> out_rows(requests.size());
  parallel_for(requests.size(), config_.jobs, [&](std::size_t i) {
    const auto& q = requests[i];
    RolloutScore score;
    try {
      const PatchEmbeddingSet gt =
          q.gt_embedding ? read_embedding_matrix(*q.gt_embedding) : prov.embed(*q.gt_image);
      score = score_rollouts({q.code}, gt, prov, comp, config_.reward).front();
    } catch (const InfrastructureError& e) {
      score.scored = false;
      score.provider = prov.identity();
      score.error = e.what();
    }
    Json j = to_json(score);
    j["id"] = q.id;
    out_rows[i] = std::move(j);
  });
  write_jsonl(out(kRewards), out_rows);

  double sum = 0.0;
  std::size_t scored = 0;
  for (const auto& j : out_rows) {
    if (j.value("scored", false)) {
      sum += j.at("reward").get<double>();
      ++scored;
    }
  }
  return {"reward",
          false,
          {{"rollouts", out_rows.size()},
           {"scored", scored},
           {"mean_reward", scored ? Json(sum / static_cast<double>(scored)) : Json(nullptr)},
           {"provider", prov.identity()}},
          {out(kRewards)}};
}

// ------------------------------------------------------------- grpo-score

StageReport Pipeline::grpo_score(const fs::path& input) {
  const auto groups = read_rollout_groups(input);
  std::vector<GroupScore> scores(groups.size());
  parallel_for(groups.size(), config_.jobs,
               [&](std::size_t i) { scores[i] = score_group(groups[i], config_.grpo); });
  const fs::path dest = out(input.extension() == ".jsonl" ? "grpo_scores.jsonl" : "grpo_scores.bin");
  write_group_scores(dest, scores);
  double total = 0.0;
  for (const auto& s : scores) total += s.objective;
  return {"grpo-score",
          false,
          {{"groups", groups.size()},
           {"mean_objective", scores.empty() ? Json(nullptr) : Json(total / static_cast<double>(scores.size()))}},
          {dest}};
}

// --------------------------------------------------------------- evaluate

StageReport Pipeline::evaluate(const fs::path& input) {
  const auto records = load_records(input);
  const bool any_test = std::any_of(records.begin(), records.end(),
                                    [](const TikZRecord& r) { return r.split == Split::test; });
  std::vector<const TikZRecord*> chosen;
  for (const auto& r : records) {
    if (!any_test || r.split == Split::test) chosen.push_back(&r);
  }

  std::vector<SampleInput> samples;
  samples.reserve(chosen.size());
  if (config_.predictions_file) {
    std::map<std::string, std::optional<std::string>> predictions;
    for (const auto& row : read_jsonl(*config_.predictions_file, true).rows) {
      const auto& o = row.at("output");
      predictions[row.at("record_id").get<std::string>()] =
          o.is_string() ? std::optional<std::string>(o.get<std::string>()) : std::nullopt;
    }
    std::vector<NormalizedProgram> programs;
    std::vector<std::size_t> program_of;
    for (const TikZRecord* r : chosen) {
      SampleInput s{r->record_id, std::nullopt, r->code, false, {}};
      const auto it = predictions.find(r->record_id);
      if (it != predictions.end()) s.output = it->second;
      program_of.push_back(programs.size());
      if (s.output) programs.push_back(program_from_document(r->record_id + "#prediction", *s.output));
      samples.push_back(std::move(s));
    }
    const auto results = compile_all(compiler(), programs, config_.jobs);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].output) samples[i].compiled = results[program_of[i]].status == CompileStatus::ok;
    }
  } else {
    // Without predictions the references score themselves; this exercises
    // the metric plumbing and yields TED 0.
    for (const TikZRecord* r : chosen) {
      samples.push_back({r->record_id, r->code, r->code, r->compile_status == CompileStatus::ok, {}});
    }
  }
  if (config_.scores_file) {
    const auto scores = load_external_scores(*config_.scores_file);
    for (auto& s : samples) {
      const auto it = scores.find(s.record_id);
      if (it != scores.end()) s.external_scores = it->second;
    }
  }

  MetricConfig mc;
  mc.m1 = config_.metric_m1;
  mc.m2 = config_.metric_m2;
  Json report_json;
  std::string table;
  if (samples.empty()) {
    report_json = {{"samples", 0}, {"notes", {"no records to evaluate"}}};
    table = "no records to evaluate\n";
  } else {
    const MetricReport report = aggregate(samples, mc);
    report_json = to_json(report);
    table = render_table(report);
  }
  write_text_file(out(kMetricsJson), report_json.dump(2) + "\n");
  write_text_file(out(kMetricsText), table);
  Json summary{{"samples", samples.size()},
               {"source", config_.predictions_file ? "predictions" : "references"}};
  for (const char* k : {"cr", "at", "mean_ted", "avg"}) {
    if (report_json.contains(k)) summary[k] = report_json[k];
  }
  return {"evaluate", false, summary, {out(kMetricsJson), out(kMetricsText)}};
}

// ------------------------------------------------------------------ stats

StageReport Pipeline::stats(const fs::path& input) {
  const auto records = load_records(input);
  const Json s = to_json(corpus_stats(records));
  write_text_file(out(kStats), s.dump(2) + "\n");
  return {"stats", false, {{"records", records.size()}}, {out(kStats)}};
}

// ----------------------------------------------------------------- prompt

StageReport Pipeline::prompt(const fs::path& input) {
  const auto records = load_records(input);
  std::vector<Json> rows;
  for (const auto& r : records) {
    if (!r.description) continue;
    rows.push_back({{"record_id", r.record_id}, {"prompt", build_generation_prompt(*r.description)}});
  }
  write_jsonl(out(kPrompts), rows);
  return {"prompt", false, {{"prompts", rows.size()}}, {out(kPrompts)}};
}

}  // namespace tikzkit
