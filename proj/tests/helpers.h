#pragma once

#include <random>

#include "latscat/band.h"
#include "latscat/common.h"

namespace latscat::testutil {

inline bool close(double a, double b, double atol, double rtol = 0) {
  return std::fabs(a - b) <= atol + rtol * std::max(std::fabs(a), std::fabs(b));
}

inline bool close_rel(double a, double b, double rtol) {
  return std::fabs(a - b) <= rtol * std::max({std::fabs(a), std::fabs(b), 1e-300});
}

// Random Hermitian band with small integer hops, guaranteed nonconstant.
inline BandFunction random_band(Rng& rng, int dim, int nterms, int max_hop = 3) {
  std::uniform_int_distribution<int> hop(-max_hop, max_hop);
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  std::vector<BandCoeff> cs;
  for (int t = 0; t < nterms; ++t) {
    IVec n = IVec::zero(dim);
    bool nonzero = false;
    for (int i = 0; i < dim; ++i) {
      n[i] = hop(rng);
      if (n[i]) nonzero = true;
    }
    if (!nonzero) {
      n[0] = 1;
    }
    cplx c(amp(rng), amp(rng));
    cs.push_back({n, c});
    cs.push_back({-n, std::conj(c)});
  }
  return BandFunction(dim, cs);
}

inline KVec random_k(Rng& rng, int dim) {
  std::uniform_real_distribution<double> u(0, kTwoPi);
  KVec k{};
  for (int i = 0; i < dim; ++i) k[i] = u(rng);
  return k;
}

}  // namespace latscat::testutil
