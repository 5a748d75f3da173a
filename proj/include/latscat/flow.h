#pragma once

#include "latscat/band.h"
#include "latscat/surface.h"

namespace latscat {

// A surface sample pushed along the rescaled gradient flow by db. Holds, per
// node, the image point theta_db(sigma), the accumulated divergence integral
// I = int_0^db div Xhat(theta_u(sigma)) du, and the transport density
//   d(sigma) = exp(I/2) |Xhat(sigma)|^{1/2},
// whose square over |Xhat(theta(sigma))| is the tangential Jacobian of the
// flow map between the two level sets.
struct TransportedState {
  double db = 0;
  double energy = 0;
  std::vector<KVec> nodes;
  std::vector<double> div_integral;
  std::vector<double> density;       // d(sigma) per node
  std::vector<double> jac_det;       // |det D theta|_{T Sigma}| per node
  std::vector<double> grad_norm;     // |grad E| at the transported node
};

// Plane-wave boundary state sampled on the transported surface:
// psi_m(sigma) = (2pi)^{-d/2} d(sigma) e^{i m.theta(sigma)}.
struct LocalizedState {
  IVec m;
  double b_total = 0;  // f(E) of the surface it lives on
  std::vector<cplx> values;
  double norm2 = 0;  // integral |psi|^2 dnu over the reference sample
};

// Edge limit of the normalized boundary states at an isotropic extremum.
struct LimitState {
  bool at_max = true;
  std::vector<double> values;  // positive profile on the reference surface
  double u_reached = 0;
  bool converged = false;
};

class FlowField {
 public:
  explicit FlowField(RescaledEnergyMap map, double abs_tol = 1e-10, double rel_tol = 1e-10);

  const RescaledEnergyMap& map() const { return map_; }

  struct PointResult {
    KVec k{};
    double div_integral = 0;
  };
  // Flow k0 by the parameter increment db (either sign), integrating the
  // divergence along the way.
  PointResult flow_to(const KVec& k0, double db) const;

  // Evaluate the flow of one point at several increments, sorted internally.
  std::vector<PointResult> flow_multi(const KVec& k0, const std::vector<double>& dbs) const;

  // Reference level set at the band center (shifted off critical values).
  SurfaceSample reference_surface(const LevelSetSampler& sampler) const;

  // Transport every node of `ref` by db.
  TransportedState transport(const SurfaceSample& ref, double db) const;
  // One ODE sweep per node through all increments (mixed signs allowed).
  std::vector<TransportedState> transport_multi(const SurfaceSample& ref,
                                                std::vector<double> dbs) const;

  LocalizedState localized_state(const SurfaceSample& ref, const TransportedState& t,
                                 const IVec& m) const;

  // Limit profile exp((1/2) int_0^{s inf} (div Xhat -+ ... ) du)|Xhat|^{1/2},
  // normalized to unit nu-norm on the reference sample. Requires the
  // corresponding extremum to be isotropic.
  LimitState limit_state(const SurfaceSample& ref, bool at_max, double u_cap = 30,
                         double settle_tol = 1e-7) const;

 private:
  RescaledEnergyMap map_;
  double abs_tol_, rel_tol_;
};

}  // namespace latscat
