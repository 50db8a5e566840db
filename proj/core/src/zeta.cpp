#include "ham/zeta.hpp"

#include <cmath>

namespace ham::grammar {

ZetaTable zeta_table(double s, int kmax) {
  if (!(s > 1.0)) {
    throw DomainError("zeta_table: s must be > 1, got " + std::to_string(s));
  }
  if (kmax < 1) {
    throw DomainError("zeta_table: kmax must be >= 1, got " + std::to_string(kmax));
  }
  ZetaTable t;
  t.s = s;
  t.kmax = kmax;
  t.probs.resize(static_cast<std::size_t>(kmax));
  double norm = 0.0;
  for (int k = 1; k <= kmax; ++k) {
    norm += std::pow(static_cast<double>(k), -s);
  }
  for (int k = 1; k <= kmax; ++k) {
    t.probs[static_cast<std::size_t>(k) - 1] = std::pow(static_cast<double>(k), -s) / norm;
  }
  return t;
}

}  // namespace ham::grammar
