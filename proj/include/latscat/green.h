#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "latscat/density.h"

namespace latscat {

// Green matrix G[n][m](z) = (2pi)^-d int e^{i(m-n).k}/(z - E(k)) dk restricted
// to a finite site set, assembled from a channel density tabulation.
class GreenBoundary {
 public:
  GreenBoundary(const SpectralDensityMatrix* tab, std::vector<IVec> sites);

  int nsites() const { return static_cast<int>(sites_.size()); }
  const std::vector<IVec>& sites() const { return sites_; }
  const SpectralDensityMatrix& tab() const { return *tab_; }

  // Off the real axis, or on the real axis outside the band.
  Eigen::MatrixXcd at(cplx z) const;
  Eigen::MatrixXcd deriv(cplx z) const;  // dG/dz
  // Boundary value G(E - i0) for side < 0 (Im part +pi rho) or G(E + i0).
  Eigen::MatrixXcd boundary(double E, int side) const;
  Eigen::MatrixXcd real_boundary(double E) const;  // principal value part
  Eigen::MatrixXcd rho(double E) const;            // Hermitian PSD density matrix
  double dos(double E) const;

 private:
  Eigen::MatrixXcd assemble(const std::function<cplx(int)>& f) const;
  const SpectralDensityMatrix* tab_;
  std::vector<IVec> sites_;
  std::vector<std::vector<int>> chan_;  // [row][col] channel index of m-n
};

// Direct zone quadrature of the same integral on an offset grid, for
// validation; requires z to stay away from the spectrum.
cplx green_direct(const BandFunction& band, const IVec& r, cplx z, int n_per_axis);

// Power-law fit rho ~ amplitude * |E - edge|^exponent over a logarithmic
// window of distances [w_lo, w_hi] * half-bandwidth from the chosen band
// edge. Narrow the window (w_hi ~ 1e-2) when the curvature corrections of a
// specific band need to be suppressed below the percent level.
struct EdgeFit {
  double exponent = 0;
  double amplitude = 0;
};
EdgeFit edge_asymptotics(const SpectralDensityMatrix& tab, bool at_max, double w_lo = 1e-3,
                         double w_hi = 1e-1, int npts = 24);
// The quadratic-extremum prediction for the fit above: exponent d/2 - 1 and
// amplitude S_{d-1} 2^{d/2-1} / ((2pi)^d sqrt(|det Hess|)).
EdgeFit edge_prediction(const BandFunction& band, const CriticalPointSet& cps, bool at_max);

}  // namespace latscat
