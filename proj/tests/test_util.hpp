#pragma once

#include <cmath>
#include <cstdint>

#include "mcov/linalg.hpp"
#include "mcov/rng.hpp"

namespace mcov::test {

inline SymMatrix random_symmetric(std::size_t p, std::uint64_t seed, double scale = 1.0) {
  Rng rng(RngSeed{seed});
  SymMatrix a(p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) a.set(i, j, scale * rng.normal());
  }
  return a;
}

/// B B^T / p for a Gaussian p x p matrix B.
inline SymMatrix random_psd(std::size_t p, std::uint64_t seed) {
  Rng rng(RngSeed{seed});
  Matrix b(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) b(i, j) = rng.normal();
  }
  Matrix g = b * b.transpose();
  g *= 1.0 / static_cast<double>(p);
  return SymMatrix::symmetrized(g);
}

inline double max_abs_diff(const SymMatrix& a, const SymMatrix& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
  return m;
}

inline double frobenius_diff(const SymMatrix& a, const SymMatrix& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) {
    const double d = a.data()[k] - b.data()[k];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace mcov::test
