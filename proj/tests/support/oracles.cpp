#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>
#include <stdexcept>

namespace tikzkit::oracle {

namespace {

// `%` starts a comment unless preceded by an odd run of backslashes.
std::string drop_comments(const std::string& text) {
  std::string out;
  std::size_t backslashes = 0;
  bool in_comment = false;
  for (char c : text) {
    if (in_comment) {
      if (c == '\n') {
        in_comment = false;
        out += c;
      }
      continue;
    }
    if (c == '%' && backslashes % 2 == 0) {
      in_comment = true;
      backslashes = 0;
      continue;
    }
    backslashes = c == '\\' ? backslashes + 1 : 0;
    out += c;
  }
  return out;
}

std::string drop_verbatim(std::string text) {
  for (const std::string name : {"verbatim", "verbatim*", "lstlisting", "minted", "Verbatim", "comment"}) {
    const std::string open = "\\begin{" + name + "}";
    const std::string close = "\\end{" + name + "}";
    for (std::size_t p = text.find(open); p != std::string::npos; p = text.find(open, p)) {
      const std::size_t q = text.find(close, p + open.size());
      if (q == std::string::npos) {
        text.erase(p);
        break;
      }
      text.erase(p, q + close.size() - p);
    }
  }
  return text;
}

std::string drop_verb(const std::string& text) {
  static const std::regex verb(R"(\\verb\*?([^A-Za-z\s])[^\n]*?\1)");
  return std::regex_replace(text, verb, "");
}

bool is_target(const std::string& name) {
  return name == "tikzpicture" || name == "tikzcd" || name == "circuitikz";
}

}  // namespace

std::vector<std::string> outermost_environments(const std::string& text) {
  const std::string clean = drop_verbatim(drop_comments(drop_verb(text)));
  static const std::regex tok(R"(\\(begin|end)\s*\{([^{}]*)\})");
  std::vector<std::string> stack;
  std::vector<std::string> found;
  for (auto it = std::sregex_iterator(clean.begin(), clean.end(), tok); it != std::sregex_iterator(); ++it) {
    const std::string kind = (*it)[1];
    const std::string name = (*it)[2];
    if (kind == "begin") {
      stack.push_back(name);
      continue;
    }
    if (stack.empty() || stack.back() != name) continue;
    stack.pop_back();
    if (!is_target(name)) continue;
    const bool enclosed = std::any_of(stack.begin(), stack.end(), is_target);
    if (!enclosed) found.push_back(name);
  }
  return found;
}

double simplex_min(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                   const std::vector<double>& c) {
  const std::size_t m = A.size();
  const std::size_t n = c.size();
  constexpr double eps = 1e-12;
  // Tableau columns: n structural, m artificial, rhs.
  std::vector<std::vector<double>> t(m + 1, std::vector<double>(n + m + 1, 0.0));
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double sign = b[i] < 0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) t[i][j] = sign * A[i][j];
    t[i][n + i] = 1.0;
    t[i][n + m] = sign * b[i];
    basis[i] = n + i;
  }
  auto pivot = [&](std::size_t r, std::size_t col) {
    const double p = t[r][col];
    for (double& v : t[r]) v /= p;
    for (std::size_t i = 0; i <= m; ++i) {
      if (i == r || std::abs(t[i][col]) < eps) continue;
      const double f = t[i][col];
      for (std::size_t j = 0; j < t[i].size(); ++j) t[i][j] -= f * t[r][j];
    }
    basis[r] = col;
  };
  auto run = [&](const std::vector<double>& cost, std::size_t allowed) {
    // Objective row = reduced costs for the current basis.
    auto& z = t[m];
    std::fill(z.begin(), z.end(), 0.0);
    for (std::size_t j = 0; j < cost.size(); ++j) z[j] = cost[j];
    for (std::size_t i = 0; i < m; ++i) {
      const double cb = basis[i] < cost.size() ? cost[basis[i]] : 0.0;
      for (std::size_t j = 0; j < z.size(); ++j) z[j] -= cb * t[i][j];
    }
    for (;;) {
      std::size_t col = allowed;
      for (std::size_t j = 0; j < allowed; ++j) {
        if (z[j] < -1e-11) {
          col = j;
          break;
        }
      }
      if (col == allowed) return;
      std::size_t row = m;
      double best = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        if (t[i][col] > eps) {
          const double ratio = t[i][n + m] / t[i][col];
          if (row == m || ratio < best - 1e-14 ||
              (std::abs(ratio - best) <= 1e-14 && basis[i] < basis[row])) {
            row = i;
            best = ratio;
          }
        }
      }
      if (row == m) throw std::runtime_error("unbounded");
      pivot(row, col);
    }
  };
  std::vector<double> phase1(n + m, 0.0);
  for (std::size_t i = 0; i < m; ++i) phase1[n + i] = 1.0;
  run(phase1, n + m);
  double infeas = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] >= n) infeas += t[i][n + m];
  }
  if (infeas > 1e-9) throw std::runtime_error("infeasible");
  // Drive remaining (zero-valued) artificials out where possible.
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] < n) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(t[i][j]) > 1e-9) {
        pivot(i, j);
        break;
      }
    }
  }
  std::vector<double> cost(c.begin(), c.end());
  run(cost, n);
  double value = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] < n) value += c[basis[i]] * t[i][n + m];
  }
  return value;
}

double transport_lp(const std::vector<std::vector<double>>& d) {
  const std::size_t m = d.size();
  const std::size_t n = d.front().size();
  std::vector<std::vector<double>> A;
  std::vector<double> b;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> row(m * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) row[i * n + j] = 1.0;
    A.push_back(row);
    b.push_back(1.0 / static_cast<double>(m));
  }
  // The last column constraint is implied by the others; dropping it keeps
  // the system full rank.
  for (std::size_t j = 0; j + 1 < n; ++j) {
    std::vector<double> row(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) row[i * n + j] = 1.0;
    A.push_back(row);
    b.push_back(1.0 / static_cast<double>(n));
  }
  std::vector<double> c;
  for (const auto& r : d) c.insert(c.end(), r.begin(), r.end());
  return simplex_min(A, b, c);
}

double transport_permutations(const std::vector<std::vector<double>>& d) {
  const std::size_t n = d.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += d[i][perm[i]];
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(n);
}

std::size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> dp(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) dp[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) dp[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      dp[i][j] = std::min({dp[i - 1][j] + 1, dp[i][j - 1] + 1,
                           dp[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
  }
  return dp[a.size()][b.size()];
}

std::vector<double> central_gradient(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

std::set<std::string> ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  std::set<std::string> out;
  if (tokens.size() < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string g;
    for (std::size_t k = 0; k < n; ++k) g += (k ? "\x1e" : "") + tokens[i + k];
    out.insert(std::move(g));
  }
  return out;
}

}  // namespace tikzkit::oracle
