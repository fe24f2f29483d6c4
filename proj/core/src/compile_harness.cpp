#include "tikzkit/compile_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>

#include "tikzkit/digest.hpp"
#include "tikzkit/errors.hpp"
#include "tikzkit/raster.hpp"
#include "tikzkit/subprocess.hpp"
#include "tikzkit/text.hpp"

namespace tikzkit {
namespace {

std::string substitute(std::string arg, const std::vector<std::pair<std::string, std::string>>& vars) {
  for (const auto& [key, value] : vars) {
    std::size_t pos = 0;
    while ((pos = arg.find(key, pos)) != std::string::npos) {
      arg.replace(pos, key.size(), value);
      pos += value.size();
    }
  }
  return arg;
}

std::vector<std::string> with_override(std::vector<std::string> argv, const char* env_var) {
  if (const char* v = std::getenv(env_var); v && *v && !argv.empty()) argv[0] = v;
  return argv;
}

std::string nonempty_log(std::string log, const std::string& fallback) {
  if (trim(log).empty()) return fallback;
  return log;
}

}  // namespace

std::string_view to_string(CompileStatus s) {
  switch (s) {
    case CompileStatus::ok: return "ok";
    case CompileStatus::compile_error: return "compile_error";
    case CompileStatus::timeout: return "timeout";
    case CompileStatus::empty_output: return "empty_output";
    case CompileStatus::corrupted_output: return "corrupted_output";
  }
  return "compile_error";
}

CompileStatus parse_compile_status(std::string_view s) {
  for (auto st : {CompileStatus::ok, CompileStatus::compile_error, CompileStatus::timeout,
                  CompileStatus::empty_output, CompileStatus::corrupted_output}) {
    if (to_string(st) == s) return st;
  }
  throw InputError("unknown compile status '" + std::string(s) + "'");
}

Json to_json(const CompileResult& r, bool with_timing) {
  Json j{{"record_id", r.record_id}, {"status", to_string(r.status)}, {"log_text", r.log_text}};
  if (with_timing) j["duration_ms"] = r.duration_ms;
  j["artifact_path"] = r.artifact_path ? Json(r.artifact_path->string()) : Json(nullptr);
  return j;
}

CompileResult compile_result_from_json(const Json& j) {
  CompileResult r;
  r.record_id = j.value("record_id", std::string());
  r.status = parse_compile_status(j.at("status").get<std::string>());
  r.log_text = j.value("log_text", std::string());
  r.duration_ms = j.value("duration_ms", std::int64_t{0});
  if (j.contains("artifact_path") && !j["artifact_path"].is_null()) {
    r.artifact_path = j["artifact_path"].get<std::string>();
  }
  return r;
}

void SandboxConfig::validate() const {
  std::vector<std::string> v;
  if (!(timeout_s > 0)) v.emplace_back("sandbox.timeout_s must be > 0");
  if (!(render_timeout_s > 0)) v.emplace_back("sandbox.render_timeout_s must be > 0");
  if (render_dpi <= 0) v.emplace_back("sandbox.render_dpi must be > 0");
  if (max_log_bytes == 0) v.emplace_back("sandbox.max_log_bytes must be > 0");
  if (compiler_command.empty()) v.emplace_back("sandbox.compiler_command is empty");
  if (render_command.empty()) v.emplace_back("sandbox.render_command is empty");
  const bool has_input = std::any_of(compiler_command.begin(), compiler_command.end(),
                                     [](const std::string& a) {
                                       return a.find("{input}") != std::string::npos;
                                     });
  if (!compiler_command.empty() && !has_input) {
    v.emplace_back("sandbox.compiler_command needs an {input} placeholder");
  }
  if (blank_epsilon < 0 || blank_epsilon > 255) v.emplace_back("sandbox.blank_epsilon out of [0,255]");
  if (!v.empty()) throw ConfigError(std::move(v));
}

std::vector<std::string> SandboxConfig::resolved_compiler() const {
  return with_override(compiler_command, kCompilerEnvVar);
}

std::vector<std::string> SandboxConfig::resolved_renderer() const {
  return with_override(render_command, kRasterizerEnvVar);
}

std::string SandboxConfig::fingerprint() const {
  Json j{{"compiler", resolved_compiler()},
         {"renderer", resolved_renderer()},
         {"dpi", render_dpi},
         {"blank_epsilon", blank_epsilon}};
  return sha256_hex(j.dump()).substr(0, 16);
}

Json to_json(const SandboxConfig& c) {
  return Json{{"compiler_command", c.compiler_command},
              {"render_command", c.render_command},
              {"timeout_s", c.timeout_s},
              {"render_timeout_s", c.render_timeout_s},
              {"render_dpi", c.render_dpi},
              {"max_log_bytes", c.max_log_bytes},
              {"blank_epsilon", c.blank_epsilon},
              {"work_root", c.work_root.string()},
              {"artifact_dir", c.artifact_dir.string()},
              {"use_cache", c.use_cache}};
}

SandboxConfig sandbox_config_from_json(const Json& j) {
  SandboxConfig c;
  c.compiler_command = j.value("compiler_command", c.compiler_command);
  c.render_command = j.value("render_command", c.render_command);
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  c.render_timeout_s = j.value("render_timeout_s", c.render_timeout_s);
  c.render_dpi = j.value("render_dpi", c.render_dpi);
  c.max_log_bytes = j.value("max_log_bytes", c.max_log_bytes);
  c.blank_epsilon = j.value("blank_epsilon", c.blank_epsilon);
  if (j.contains("work_root")) c.work_root = j["work_root"].get<std::string>();
  if (j.contains("artifact_dir")) c.artifact_dir = j["artifact_dir"].get<std::string>();
  c.use_cache = j.value("use_cache", c.use_cache);
  return c;
}

SandboxCompiler::SandboxCompiler(SandboxConfig config) : config_(std::move(config)) {
  config_.validate();
  cache_ = std::make_unique<ArtifactCache>(config_.artifact_dir);
}

std::size_t SandboxCompiler::cache_hits() const { return cache_->hits(); }
std::size_t SandboxCompiler::cache_misses() const { return cache_->misses(); }

CompileResult SandboxCompiler::compile(const NormalizedProgram& program) {
  const std::string content_hash =
      program.content_hash.empty() ? sha256_hex(program.code) : program.content_hash;
  const std::string key = sha256_hex(content_hash + "\n" + config_.fingerprint());

  std::lock_guard lock(cache_->key_mutex(key));
  if (config_.use_cache) {
    if (auto hit = cache_->find(key, ".result.json")) {
      auto result = compile_result_from_json(Json::parse(read_text_file(*hit)));
      result.record_id = program.record_id;
      result.cache_hit = true;
      if (result.status == CompileStatus::ok) {
        const auto png = cache_->path_for(key, ".png");
        if (std::filesystem::exists(png)) {
          result.artifact_path = png;
          return result;
        }
        // Artifact vanished; fall through and rebuild.
      } else {
        return result;
      }
    }
  }
  auto result = compile_uncached(program, key);
  if (config_.use_cache) {
    auto stored = result;
    stored.record_id.clear();
    stored.artifact_path.reset();
    cache_->put_bytes(key, ".result.json", to_json(stored).dump());
  }
  return result;
}

CompileResult SandboxCompiler::compile_uncached(const NormalizedProgram& program,
                                                const std::string& key) {
  namespace fs = std::filesystem;
  CompileResult result;
  result.record_id = program.record_id;

  TempDir work(config_.work_root, "tikzkit-job-");
  write_text_file(work.path() / "main.tex", program.code);

  const std::vector<std::pair<std::string, std::string>> vars = {
      {"{input}", "main.tex"},       {"{jobname}", "main"},
      {"{pdf}", "main.pdf"},         {"{output_stem}", "render"},
      {"{output}", "render.png"},    {"{dpi}", std::to_string(config_.render_dpi)}};
  auto expand = [&](std::vector<std::string> argv) {
    for (auto& a : argv) a = substitute(a, vars);
    return argv;
  };

  ProcessOptions opts;
  opts.cwd = work.path();
  opts.timeout = std::chrono::milliseconds(static_cast<long long>(config_.timeout_s * 1000));
  opts.max_output_bytes = config_.max_log_bytes;
  // Keep TeX from writing outside the job directory.
  opts.extra_env = {{"TEXMFOUTPUT", work.path().string()}, {"openout_any", "p"},
                    {"shell_escape", "f"}, {"HOME", work.path().string()}};

  const auto compiled = run_process(expand(config_.resolved_compiler()), opts);
  if (compiled.not_found) {
    throw EnvironmentError("TeX compiler unavailable: " + compiled.output +
                           " (set " + kCompilerEnvVar + " or sandbox.compiler_command)");
  }
  result.duration_ms = compiled.duration.count();

  std::string log = compiled.output;
  std::error_code ec;
  if (fs::exists(work.path() / "main.log", ec)) {
    log = tail_truncate(read_text_file(work.path() / "main.log"), config_.max_log_bytes);
  }
  log = sanitize_utf8(log);

  if (compiled.timed_out) {
    result.status = CompileStatus::timeout;
    result.log_text = log;
    return result;
  }
  const auto pdf = work.path() / "main.pdf";
  if (compiled.exit_code != 0) {
    result.status = CompileStatus::compile_error;
    result.log_text = nonempty_log(log, "compiler exited with code " +
                                            std::to_string(compiled.exit_code));
    return result;
  }
  if (!fs::exists(pdf, ec) || fs::file_size(pdf, ec) == 0) {
    result.status = CompileStatus::empty_output;
    result.log_text = nonempty_log(log, "compiler succeeded but produced no PDF");
    return result;
  }

  ProcessOptions ropts = opts;
  ropts.timeout =
      std::chrono::milliseconds(static_cast<long long>(config_.render_timeout_s * 1000));
  const auto rendered = run_process(expand(config_.resolved_renderer()), ropts);
  if (rendered.not_found) {
    throw EnvironmentError("rasterizer unavailable: " + rendered.output + " (set " +
                           kRasterizerEnvVar + " or sandbox.render_command)");
  }
  result.duration_ms += rendered.duration.count();
  const auto png = work.path() / "render.png";
  if (rendered.timed_out || rendered.exit_code != 0 || !fs::exists(png, ec)) {
    result.status = CompileStatus::corrupted_output;
    result.log_text = nonempty_log(sanitize_utf8(rendered.output),
                                   rendered.timed_out ? "rasterizer timed out"
                                                      : "rasterizer failed to produce an image");
    return result;
  }
  Raster image;
  try {
    image = read_png(png);
  } catch (const InputError& e) {
    result.status = CompileStatus::corrupted_output;
    result.log_text = e.what();
    return result;
  }
  if (!has_ink(image, config_.blank_epsilon)) {
    result.status = CompileStatus::empty_output;
    result.log_text = "rendered page is blank (" + std::to_string(image.width) + "x" +
                      std::to_string(image.height) + ")";
    return result;
  }
  result.status = CompileStatus::ok;
  result.log_text = log;
  result.artifact_path = cache_->put_file(key, ".png", png);
  return result;
}

std::vector<CompileResult> compile_all(ProgramCompiler& compiler,
                                       const std::vector<NormalizedProgram>& programs,
                                       std::size_t jobs) {
  std::vector<CompileResult> results(programs.size());
  jobs = std::max<std::size_t>(1, std::min(jobs, programs.size()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next++;
      if (i >= programs.size()) return;
      try {
        results[i] = compiler.compile(programs[i]);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = programs.size();
        return;
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

double compilation_rate(const std::vector<CompileResult>& results) {
  if (results.empty()) throw InputError("compilation_rate of an empty result list is undefined");
  const auto ok = std::count_if(results.begin(), results.end(), [](const CompileResult& r) {
    return r.status == CompileStatus::ok;
  });
  return static_cast<double>(ok) / static_cast<double>(results.size());
}

NormalizedProgram program_from_document(std::string record_id, std::string code) {
  NormalizedProgram p;
  p.record_id = std::move(record_id);
  p.code = std::move(code);
  p.char_count = utf8_length(p.code);
  const auto begin = p.code.find(kBeginDocument);
  const auto end = p.code.rfind(kEndDocument);
  if (begin != std::string::npos && end != std::string::npos && end > begin) {
    p.body = std::string(trim(std::string_view(p.code).substr(
        begin + kBeginDocument.size(), end - begin - kBeginDocument.size())));
  } else {
    p.body = p.code;
  }
  p.body_char_count = utf8_length(p.body);
  p.content_hash = sha256_hex(p.code);
  return p;
}

}  // namespace tikzkit
