#pragma once

#include <memory>

#include "latscat/band.h"

namespace latscat {

// Quadrature sample of a level set {E(k) = E} with respect to the Euclidean
// surface measure: integral_Sigma g dnu ~= sum_i w_i g(node_i).
struct SurfaceSample {
  int dim = 0;
  double energy = 0;
  std::vector<KVec> nodes;
  std::vector<double> weights;
  std::vector<double> grad_norm;  // |grad E| at each node
  double area() const {
    double s = 0;
    for (double w : weights) s += w;
    return s;
  }
  template <class F>
  double integrate(F&& f) const {
    double s = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i], i);
    return s;
  }
};

struct SurfaceOptions {
  int base_n = 0;            // grid points per axis; 0 selects a per-dim default
  int max_subdiv = 3;        // adaptive cell subdivision depth
  double jacobian_cap = 15;  // subdivide cells whose chord correction exceeds this
  int extremum_n = 0;        // local grid near band edges (0: 192 in d=2, 28 in d=3)
  double edge_window_frac = 0.10;  // switch to the local extremum grid below this
};

// Deterministic level-set triangulation for dim <= 3 with a reusable corner
// grid, adaptive subdivision near small gradients, and a local polar-box grid
// near the band edges.
class LevelSetSampler {
 public:
  LevelSetSampler(const BandFunction& band, const CriticalPointSet& cps,
                  SurfaceOptions opt = {});
  ~LevelSetSampler();
  LevelSetSampler(LevelSetSampler&&) noexcept;

  SurfaceSample sample(double E) const;
  const BandFunction& band() const;
  const CriticalPointSet& critical_points() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace latscat
