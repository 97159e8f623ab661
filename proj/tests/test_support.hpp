#pragma once

// Shared fixtures and random parameter draws for the test suites.

#include <cmath>
#include <random>
#include <vector>

#include "openrg/algebra.hpp"

namespace openrg::testing {

inline std::mt19937_64& rng() {
  static std::mt19937_64 gen(20240611);
  return gen;
}

inline double uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng());
}

inline Complex random_complex(double scale = 1.0) {
  return {uniform(-scale, scale), uniform(-scale, scale)};
}

/// Well separated inhomogeneities: eps_j ~ 0.4 + 0.35 j with jitter.
inline std::vector<Complex> spread_eps(int length, bool complex_jitter = false) {
  std::vector<Complex> eps;
  for (int j = 1; j <= length; ++j) {
    Complex e = 0.4 + 0.35 * j + uniform(-0.08, 0.08);
    if (complex_jitter) e += Complex(0.0, uniform(-0.1, 0.1));
    eps.push_back(e);
  }
  return eps;
}

inline ChainSpec make_chain(int length, Complex eta, bool complex_jitter = false) {
  return ChainSpec{length, spread_eps(length, complex_jitter), eta};
}

inline BoundaryParams random_boundary() {
  return {random_complex(), random_complex(), random_complex(),
          random_complex(), random_complex(), random_complex()};
}

/// A spectral parameter at least `gap` away from 0 and +-eps_j.
inline Complex safe_point(const ChainSpec& chain, double gap = 0.05) {
  for (;;) {
    Complex u = random_complex(2.0);
    bool ok = std::abs(u) > gap;
    for (auto e : chain.eps) ok = ok && std::abs(u - e) > gap && std::abs(u + e) > gap;
    if (ok) return u;
  }
}

}  // namespace openrg::testing
