#pragma once

#include <optional>
#include <vector>

#include "latscat/common.h"
#include "latscat/kernels.h"

namespace latscat {

struct BandCoeff {
  IVec n;
  cplx c;
};

// Trigonometric polynomial E(k) = sum_n c_n e^{i k.n} with Hermitian symmetry
// c_{-n} = conj(c_n), so E is real-valued. dim <= 5.
class BandFunction {
 public:
  BandFunction(int dim, std::vector<BandCoeff> coeffs);
  static BandFunction laplacian(int dim);  // 2 sum_j cos k_j

  int dim() const { return dim_; }
  const std::vector<BandCoeff>& coeffs() const { return coeffs_; }
  const FoldedBand& folded() const { return folded_; }
  // Hopping step set S = {n != 0 : c_n != 0}; symmetric under negation.
  const std::vector<IVec>& support() const { return support_; }

  double eval(const double* k) const;
  void grad(const double* k, double* g) const;
  void hess(const double* k, double* h) const;  // row-major dim x dim
  double laplacian_at(const double* k) const;   // trace of the Hessian

  std::string canonical_string() const;  // stable serialization for cache keys

 private:
  int dim_;
  std::vector<BandCoeff> coeffs_;
  std::vector<IVec> support_;
  FoldedBand folded_;
};

struct CriticalPoint {
  KVec k{};
  double energy = 0;
  int index = 0;  // number of negative Hessian eigenvalues
  double hess_det = 0;
  bool isotropic = false;  // Hessian proportional to the identity
};

struct CriticalPointSet {
  std::vector<CriticalPoint> points;       // sorted by energy
  std::vector<double> critical_values;     // deduplicated, sorted
  CriticalPoint minimum, maximum;          // the unique extrema
  double emin = 0, emax = 0;
};

// Newton search from a dense seed grid; validates the Morse property and the
// uniqueness of the minimum and maximum.
CriticalPointSet find_critical_points(const BandFunction& band, double tol_grad = 1e-10,
                                      double tol_hess = 1e-8);

// Energy rescaling used by the gradient flow:
//   F(E) = 2(E-E-)(E+-E)/(E+-E-),   f(E) = (1/2) ln((E-E-)/(E+-E)),
//   f^{-1}(b) = Er + Delta tanh b,  F(f^{-1}(b)) = Delta / cosh^2 b,
// and the unit-speed-in-b field Xhat = F(E(k)) grad E / |grad E|^2.
class RescaledEnergyMap {
 public:
  RescaledEnergyMap(BandFunction band, const CriticalPointSet& cps);

  const BandFunction& band() const { return band_; }
  const CriticalPointSet& critical_points() const { return cps_; }
  double emin() const { return emin_; }
  double emax() const { return emax_; }
  double er() const { return er_; }
  double delta() const { return delta_; }

  double F(double E) const { return 2 * (E - emin_) * (emax_ - E) / (emax_ - emin_); }
  double Fprime(double E) const { return 2 * (emax_ + emin_ - 2 * E) / (emax_ - emin_); }
  double f(double E) const { return 0.5 * std::log((E - emin_) / (emax_ - E)); }
  double f_inv(double b) const { return er_ + delta_ * std::tanh(b); }
  double F_of_b(double b) const {
    double c = std::cosh(b);
    return delta_ / (c * c);
  }

  void xhat(const double* k, double* out) const;
  double xhat_norm(const double* k) const;
  double div_xhat(const double* k) const;
  // Non-throwing variants; return false within ~1e-14 of a critical point.
  bool xhat_try(const double* k, double* out) const;
  bool div_xhat_try(const double* k, double* out) const;

  // Limit of div Xhat at the isotropic extrema: +dim at the minimum, -dim at
  // the maximum.
  double div_limit_at_min() const { return static_cast<double>(band_.dim()); }
  double div_limit_at_max() const { return -static_cast<double>(band_.dim()); }

 private:
  BandFunction band_;
  CriticalPointSet cps_;
  double emin_, emax_, er_, delta_;
};

}  // namespace latscat
