#pragma once

// Independent reference implementations. They share no code with the
// library so agreement is evidence, not tautology.

#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace tikzkit::oracle {

// Outermost tikzpicture / tikzcd / circuitikz environments, found by
// deleting comments and verbatim blocks and running a name stack over
// \begin / \end tokens. \verb spans are removed too.
std::vector<std::string> outermost_environments(const std::string& text);

// Dense two-phase simplex (Bland's rule) for
//   min c.x  s.t.  A x = b, x >= 0.
// Returns the optimal value; throws std::runtime_error if infeasible.
double simplex_min(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                   const std::vector<double>& c);

// Transport cost with uniform marginals 1/m, 1/n via the generic LP.
double transport_lp(const std::vector<std::vector<double>>& d);

// Square uniform case: the optimum sits at a permutation matrix, so the
// minimum over all n! permutations (cost / n) is exact.
double transport_permutations(const std::vector<std::vector<double>>& d);

// Full-matrix Levenshtein over tokens.
std::size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Central differences of f at x, step h.
std::vector<double> central_gradient(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> x, double h);

// All n-grams (joined with \x1e) of a token list.
std::set<std::string> ngrams(const std::vector<std::string>& tokens, std::size_t n);

}  // namespace tikzkit::oracle
