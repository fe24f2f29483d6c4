#include "tikzkit/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "tikzkit/errors.hpp"
#include "tikzkit/tex_lexer.hpp"
#include "tikzkit/text.hpp"

namespace tikzkit {

std::size_t token_edit_distance(const std::vector<std::string>& a,
                                const std::vector<std::string>& b) {
  // Intern lexemes so the inner loop compares integers.
  std::unordered_map<std::string_view, int> ids;
  auto intern = [&](const std::vector<std::string>& v) {
    std::vector<int> out;
    out.reserve(v.size());
    for (const auto& s : v) out.push_back(ids.try_emplace(s, static_cast<int>(ids.size())).first->second);
    return out;
  };
  const auto x = intern(a);
  const auto y = intern(b);
  std::vector<std::size_t> prev(y.size() + 1), cur(y.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

double ted(std::string_view a, std::string_view b) {
  const auto x = significant_lexemes(a);
  const auto y = significant_lexemes(b);
  const auto longest = std::max(x.size(), y.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(token_edit_distance(x, y)) / static_cast<double>(longest);
}

TokenCounter lexer_token_counter() {
  return {"tex_lexer", [](std::string_view s) { return significant_lexemes(s).size(); }};
}

double avg_tokens(const std::vector<std::string>& outputs, const TokenCounter& counter) {
  if (outputs.empty()) throw InputError("avg_tokens of an empty output list is undefined");
  double total = 0;
  for (const auto& o : outputs) total += static_cast<double>(counter.count(o));
  return total / static_cast<double>(outputs.size());
}

double avg_score(double m1, double m2, double mean_ted) { return (m1 + m2 + (1.0 - mean_ted)) / 3.0; }

MetricReport aggregate(const std::vector<SampleInput>& samples, const MetricConfig& config) {
  std::vector<SampleMetrics> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) {
    SampleMetrics m;
    m.record_id = s.record_id;
    m.external_scores = s.external_scores;
    if (s.output) {
      m.ted = ted(*s.output, s.reference);
      m.compiled = s.compiled;
      m.token_count = config.counter.count(*s.output);
    } else {
      m.missing_output = true;
    }
    rows.push_back(std::move(m));
  }
  return aggregate_rows(std::move(rows), config);
}

MetricReport aggregate_rows(std::vector<SampleMetrics> rows, const MetricConfig& config) {
  if (rows.empty()) throw InputError("cannot aggregate metrics over zero samples");
  MetricReport r;
  r.m1_name = config.m1;
  r.m2_name = config.m2;
  r.counter_name = config.counter.name;
  const double n = static_cast<double>(rows.size());
  double ted_sum = 0, tok_sum = 0, m1_sum = 0, m2_sum = 0;
  std::size_t compiled = 0, produced = 0, missing_m1 = 0, missing_m2 = 0;
  for (const auto& m : rows) {
    ted_sum += m.ted;
    if (m.compiled) ++compiled;
    if (!m.missing_output) {
      ++produced;
      tok_sum += static_cast<double>(m.token_count);
    }
    if (auto it = m.external_scores.find(config.m1); it != m.external_scores.end()) {
      m1_sum += it->second;
    } else {
      ++missing_m1;
    }
    if (auto it = m.external_scores.find(config.m2); it != m.external_scores.end()) {
      m2_sum += it->second;
    } else {
      ++missing_m2;
    }
  }
  r.cr = static_cast<double>(compiled) / n;
  r.mean_ted = ted_sum / n;
  if (produced > 0) {
    r.at = tok_sum / static_cast<double>(produced);
  } else {
    r.notes.push_back("AT omitted: no sample produced an output");
  }
  if (missing_m1 == 0) {
    r.mean_m1 = m1_sum / n;
  } else {
    r.notes.push_back("score '" + config.m1 + "' missing for " + std::to_string(missing_m1) +
                      " of " + std::to_string(rows.size()) + " samples");
  }
  if (missing_m2 == 0) {
    r.mean_m2 = m2_sum / n;
  } else {
    r.notes.push_back("score '" + config.m2 + "' missing for " + std::to_string(missing_m2) +
                      " of " + std::to_string(rows.size()) + " samples");
  }
  if (r.mean_m1 && r.mean_m2) {
    r.avg = avg_score(*r.mean_m1, *r.mean_m2, r.mean_ted);
  } else {
    r.notes.push_back("AVG omitted: external scores incomplete");
  }
  r.per_sample = std::move(rows);
  return r;
}

namespace {
Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }
}  // namespace

Json to_json(const MetricReport& r) {
  Json rows = Json::array();
  for (const auto& m : r.per_sample) {
    rows.push_back({{"record_id", m.record_id},
                    {"ted", m.ted},
                    {"compiled", m.compiled},
                    {"missing_output", m.missing_output},
                    {"token_count", m.token_count},
                    {"external_scores", m.external_scores}});
  }
  return Json{{"per_sample", std::move(rows)},
              {"aggregates",
               {{"CR", r.cr},
                {"AT", opt(r.at)},
                {"TED", r.mean_ted},
                {r.m1_name.empty() ? "m1" : r.m1_name, opt(r.mean_m1)},
                {r.m2_name.empty() ? "m2" : r.m2_name, opt(r.mean_m2)},
                {"AVG", opt(r.avg)}}},
              {"token_counter", r.counter_name},
              {"external_pair", {r.m1_name, r.m2_name}},
              {"notes", r.notes}};
}

std::string render_table(const MetricReport& r) {
  auto cell = [](const std::optional<double>& v, int prec) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", prec, *v);
    return std::string(buf);
  };
  std::ostringstream out;
  char cr[16];
  std::snprintf(cr, sizeof cr, "%.0f%%", r.cr * 100.0);
  out << "samples  " << r.m1_name << "  " << r.m2_name << "  TED  AVG  CR  AT(" << r.counter_name
      << ")\n";
  out << r.per_sample.size() << "  " << cell(r.mean_m1, 3) << "  " << cell(r.mean_m2, 3) << "  "
      << cell(r.mean_ted, 3) << "  " << cell(r.avg, 3) << "  " << cr << "  " << cell(r.at, 0)
      << "\n";
  for (const auto& n : r.notes) out << "note: " << n << "\n";
  return out.str();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::string(trim(cur)));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(std::string(trim(cur)));
  return cells;
}

}  // namespace

std::map<std::string, std::map<std::string, double>> load_external_scores(
    const std::filesystem::path& path) {
  std::map<std::string, std::map<std::string, double>> out;
  if (path.extension() == ".jsonl") {
    for (const auto& row : read_jsonl(path).rows) {
      const auto id = row.at("record_id").get<std::string>();
      const Json& scores = row.contains("scores") ? row["scores"] : row;
      for (const auto& [k, v] : scores.items()) {
        if (k != "record_id" && v.is_number()) out[id][k] = v.get<double>();
      }
    }
    return out;
  }
  std::ifstream in(path);
  if (!in) throw InputError("cannot open score file " + path.string());
  std::string line;
  std::vector<std::string> header;
  std::size_t id_col = 0, line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (header.empty()) {
      header = cells;
      const auto it = std::find(header.begin(), header.end(), "record_id");
      if (it == header.end()) throw InputError(path.string() + ": header lacks record_id column");
      id_col = static_cast<std::size_t>(it - header.begin());
      continue;
    }
    if (cells.size() != header.size()) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " columns");
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == id_col || cells[c].empty()) continue;
      try {
        std::size_t used = 0;
        const double v = std::stod(cells[c], &used);
        if (used != cells[c].size()) throw std::invalid_argument("trailing");
        out[cells[id_col]][header[c]] = v;
      } catch (const std::exception&) {
        throw InputError(path.string() + ":" + std::to_string(line_no) + ": column '" +
                         header[c] + "' is not numeric");
      }
    }
  }
  return out;
}

}  // namespace tikzkit
