#pragma once

// Truncated, renormalized Zeta distribution: P(k) proportional to k^(-s) over
// k = 1..kmax.  Used for integer literals (s=2, kmax=256 by default) and for
// weighting bound-variable references by position.

#include <vector>

#include "ham/errors.hpp"

namespace ham::grammar {

struct ZetaTable {
  double s = 0;
  int kmax = 0;
  std::vector<double> probs;  // probs[i] = P(k = i+1)

  // 1-based accessor matching the distribution's natural indexing.
  double p(int k) const { return probs.at(static_cast<std::size_t>(k) - 1); }
};

// Throws DomainError unless s > 1 and kmax >= 1.
ZetaTable zeta_table(double s, int kmax);

}  // namespace ham::grammar
