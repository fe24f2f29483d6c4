#include "tikzkit/grpo_io.hpp"

#include <bit>
#include <cstdint>

#include "tikzkit/errors.hpp"

namespace tikzkit {

GroupScore score_group(const RolloutGroup& group, const GrpoConfig& config) {
  auto result = grpo_objective(group.rollouts, config);
  GroupScore s;
  s.group_id = group.group_id;
  s.advantages = std::move(result.advantages);
  s.objective = result.objective;
  s.gradients = grpo_gradient(group.rollouts, config);
  return s;
}

Json to_json(const RolloutGroup& g) {
  Json rollouts = Json::array();
  for (const auto& r : g.rollouts) {
    rollouts.push_back({{"logp_new", r.logp_new},
                        {"logp_old", r.logp_old},
                        {"logp_ref", r.logp_ref ? Json(*r.logp_ref) : Json(nullptr)},
                        {"reward", r.reward},
                        {"truncated", r.truncated}});
  }
  return Json{{"group_id", g.group_id}, {"rollouts", std::move(rollouts)}};
}

RolloutGroup rollout_group_from_json(const Json& j) {
  RolloutGroup g;
  try {
    g.group_id = j.value("group_id", std::string());
    for (const auto& r : j.at("rollouts")) {
      Rollout x;
      x.logp_new = r.at("logp_new").get<std::vector<double>>();
      x.logp_old = r.at("logp_old").get<std::vector<double>>();
      if (r.contains("logp_ref") && !r["logp_ref"].is_null()) {
        x.logp_ref = r["logp_ref"].get<std::vector<double>>();
      }
      x.reward = r.at("reward").get<double>();
      x.truncated = r.value("truncated", false);
      g.rollouts.push_back(std::move(x));
    }
  } catch (const Json::exception& e) {
    throw InputError(std::string("malformed rollout group: ") + e.what());
  }
  return g;
}

Json to_json(const GroupScore& s) {
  return Json{{"group_id", s.group_id},
              {"advantages", s.advantages},
              {"objective", s.objective},
              {"gradients", s.gradients}};
}

namespace {

class Writer {
 public:
  explicit Writer(std::string_view magic) : out_(magic) {}
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out_.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out_.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f32s(const std::vector<double>& v) {
    for (double x : v) f32(x);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(std::string_view bytes, std::string_view magic) : in_(bytes) {
    if (in_.substr(0, magic.size()) != magic) {
      throw InputError("bad magic: expected " + std::string(magic));
    }
    pos_ = magic.size();
  }
  std::uint64_t raw(int n) {
    if (pos_ + static_cast<std::size_t>(n) > in_.size()) throw InputError("truncated GRPO file");
    std::uint64_t v = 0;
    for (int k = 0; k < n; ++k) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + k])) << (8 * k);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(raw(4)); }
  double f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(raw(8)); }
  std::vector<double> f32s(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = f32();
    return v;
  }
  void finish() const {
    if (pos_ != in_.size()) throw InputError("trailing bytes in GRPO file");
  }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_rollout_groups(const std::vector<RolloutGroup>& groups) {
  Writer w(kGrpoInputMagic);
  w.u32(static_cast<std::uint32_t>(groups.size()));
  for (const auto& g : groups) {
    w.u32(static_cast<std::uint32_t>(g.rollouts.size()));
    for (const auto& r : g.rollouts) {
      w.u32(static_cast<std::uint32_t>(r.token_count()));
      w.u32((r.truncated ? 1u : 0u) | (r.logp_ref ? 2u : 0u));
      w.f64(r.reward);
      w.f32s(r.logp_new);
      w.f32s(r.logp_old);
      if (r.logp_ref) w.f32s(*r.logp_ref);
    }
  }
  return w.take();
}

std::vector<RolloutGroup> decode_rollout_groups(std::string_view bytes) {
  Reader in(bytes, kGrpoInputMagic);
  std::vector<RolloutGroup> out(in.u32());
  for (std::size_t gi = 0; gi < out.size(); ++gi) {
    auto& g = out[gi];
    g.group_id = std::to_string(gi);
    g.rollouts.resize(in.u32());
    for (auto& r : g.rollouts) {
      const std::size_t t = in.u32();
      const auto flags = in.u32();
      r.truncated = flags & 1u;
      r.reward = in.f64();
      r.logp_new = in.f32s(t);
      r.logp_old = in.f32s(t);
      if (flags & 2u) r.logp_ref = in.f32s(t);
    }
  }
  in.finish();
  return out;
}

std::string encode_group_scores(const std::vector<GroupScore>& scores) {
  Writer w(kGrpoOutputMagic);
  w.u32(static_cast<std::uint32_t>(scores.size()));
  for (const auto& s : scores) {
    w.u32(static_cast<std::uint32_t>(s.advantages.size()));
    w.f64(s.objective);
    for (double a : s.advantages) w.f64(a);
    for (const auto& g : s.gradients) {
      w.u32(static_cast<std::uint32_t>(g.size()));
      w.f32s(g);
    }
  }
  return w.take();
}

std::vector<GroupScore> decode_group_scores(std::string_view bytes) {
  Reader in(bytes, kGrpoOutputMagic);
  std::vector<GroupScore> out(in.u32());
  for (std::size_t gi = 0; gi < out.size(); ++gi) {
    auto& s = out[gi];
    s.group_id = std::to_string(gi);
    const std::size_t g = in.u32();
    s.objective = in.f64();
    s.advantages.resize(g);
    for (auto& a : s.advantages) a = in.f64();
    s.gradients.resize(g);
    for (auto& grad : s.gradients) grad = in.f32s(in.u32());
  }
  in.finish();
  return out;
}

std::vector<RolloutGroup> read_rollout_groups(const std::filesystem::path& path) {
  if (path.extension() == ".jsonl") {
    std::vector<RolloutGroup> out;
    for (const auto& row : read_jsonl(path).rows) out.push_back(rollout_group_from_json(row));
    return out;
  }
  return decode_rollout_groups(read_text_file(path));
}

void write_rollout_groups(const std::filesystem::path& path, const std::vector<RolloutGroup>& groups) {
  if (path.extension() == ".jsonl") {
    std::vector<Json> rows;
    for (const auto& g : groups) rows.push_back(to_json(g));
    write_jsonl(path, rows);
    return;
  }
  write_text_file(path, encode_rollout_groups(groups));
}

void write_group_scores(const std::filesystem::path& path, const std::vector<GroupScore>& scores) {
  if (path.extension() == ".jsonl") {
    std::vector<Json> rows;
    for (const auto& s : scores) rows.push_back(to_json(s));
    write_jsonl(path, rows);
    return;
  }
  write_text_file(path, encode_group_scores(scores));
}

}  // namespace tikzkit
