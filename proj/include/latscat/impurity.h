#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "latscat/green.h"
#include "latscat/lattice.h"

namespace latscat {

enum class ImpurityKind { diagonal, barrier, general };

// Finite-range perturbation encoded as a Hermitian matrix on its support
// sites. A rank-revealing eigendecomposition V = B diag(s) B^* is kept so
// that rank-deficient couplings (the barrier model) run through the same
// restricted linear algebra as invertible ones.
class ImpurityModel {
 public:
  static ImpurityModel diagonal(int dim, std::vector<IVec> sites, const Eigen::VectorXd& v);
  static ImpurityModel general(int dim, std::vector<IVec> sites, const Eigen::MatrixXcd& v);
  // V = -(P H0 Q + Q H0 P) for P the projection onto `block`: hopping across
  // the block boundary is cancelled, so the block decouples from the rest of
  // the lattice. Stored on the enlarged support block + S.
  static ImpurityModel barrier(const BandFunction& band, const std::vector<IVec>& block);

  int dim() const { return dim_; }
  ImpurityKind kind() const { return kind_; }
  const std::vector<IVec>& sites() const { return sites_; }
  // The barrier block; equal to sites() for the other kinds.
  const std::vector<IVec>& core() const { return core_; }
  const Eigen::MatrixXcd& v() const { return v_; }
  int nsites() const { return static_cast<int>(sites_.size()); }
  int rank() const { return static_cast<int>(strengths_.size()); }
  bool invertible() const { return rank() == nsites(); }
  double norm() const { return norm_; }
  const Eigen::MatrixXcd& range_basis() const { return basis_; }
  const Eigen::VectorXd& strengths() const { return strengths_; }
  Eigen::MatrixXcd v_inverse() const;  // throws ConfigError when singular

 private:
  ImpurityModel() = default;
  void factor();
  int dim_ = 0;
  ImpurityKind kind_ = ImpurityKind::general;
  std::vector<IVec> sites_, core_;
  Eigen::MatrixXcd v_;
  Eigen::MatrixXcd basis_;
  Eigen::VectorXd strengths_;
  double norm_ = 0;
};

// The bound-state pencil restricted to the range of V:
//   W(E) = diag(1/s) - B^* G0(E) B,
// Hermitian for real E off the spectrum, with monotonically increasing
// eigenvalues there. Zeros of det W are the point spectrum of H0 + V.
Eigen::MatrixXcd impurity_pencil(const ImpurityModel& m, const Eigen::MatrixXcd& g0);

struct ResolventEval {
  Eigen::MatrixXcd value;
  // The linear system was numerically singular: z sits on (or next to) a
  // discrete eigenvalue. The pseudo-solved value is still returned.
  bool candidate_eigenvalue = false;
  double rcond = 0;
};

// G(z) restricted to the support sites: (1 - G0(z) V)^{-1} G0(z).
ResolventEval perturbed_green(const ImpurityModel& m, const GreenBoundary& g, cplx z);
ResolventEval perturbed_green_boundary(const ImpurityModel& m, const GreenBoundary& g, double E,
                                       int side);
// T(z) = (1 - V G0(z))^{-1} V, so that (z-H)^{-1} = G0 + G0 T G0.
ResolventEval t_matrix(const ImpurityModel& m, const GreenBoundary& g, cplx z);
ResolventEval t_matrix_boundary(const ImpurityModel& m, const GreenBoundary& g, double E, int side);

struct IsolatedState {
  double energy = 0;
  int multiplicity = 1;
  // Columns span the pencil kernel mapped to the sites (u = V psi).
  Eigen::MatrixXcd amplitudes;
  // Bound-state wave function restricted to the sites, psi = G0(E) u.
  Eigen::MatrixXcd wavefunction;
};

struct EmbeddedState {
  double energy = 0;
  int multiplicity = 1;
  Eigen::MatrixXcd amplitudes;  // columns v with (V^-1 - Re G0) v = 0 = Im G0 v
  bool warning = false;         // kernel threshold ambiguous at this energy
  bool first_order_zero = true; // smallest singular value vanishes linearly
};

struct ThresholdReport {
  double energy = 0;
  int space_dim = 0;       // dim Ker(V^-1 - G0) at the band edge
  int eigen_mult = 0;      // kernel vectors whose transform vanishes to
                           // order 5-d at the extremal momentum
  int resonance_mult = 0;  // space_dim - eigen_mult
};

struct BoundStateReport {
  std::vector<IsolatedState> isolated;
  std::vector<EmbeddedState> embedded;
  ThresholdReport at_min, at_max;
  int n_total = 0;  // isolated + embedded + threshold eigenvalue multiplicities
  bool warnings = false;
};

std::string to_json(const BoundStateReport& r);

struct BoundStateOptions {
  double pad = 0;            // scan reach past the band edges (0: |V| + 1)
  int outside_pts = 120;     // scan resolution per side, clustered at the edge
  double kernel_tol = 1e-8;  // singular value < tol * scale counts as zero
  double kernel_warn = 1e-6; // ambiguity band above kernel_tol
  // Joint-kernel acceptance for the in-band scan. At a genuine embedded
  // energy the residual bottoms out at the accuracy of the tabulated Green
  // matrix rather than at machine precision, so this sits well above
  // kernel_tol; candidates are flagged when the spectrum has no clear gap
  // above the cut.
  double embed_accept = 1e-4;
  // Keep-out around the band edges for the in-band scan, as a fraction of
  // the bandwidth. Both the real-part pencil and the density rows of a
  // critical coupling vanish together at an edge, which would read as a
  // spurious interior kernel; edge behavior is classified separately.
  double edge_margin = 1e-3;
  double bisect_tol = 1e-12; // energy refinement, relative to the bandwidth
  int inside_stride = 1;     // embedded scan thinning over the density knots
};

BoundStateReport find_bound_states(const ImpurityModel& m, const GreenBoundary& g,
                                   const BandFunction& band, const BoundStateOptions& opt = {});

// Scans the interior operator
//   A(E) = R (E - H0) (1 - P) (E - H0) R
// on the S-interior of Conv(Lambda), whose kernel vectors w generate the
// compactly supported candidates v = P (E - H0) w for embedded eigenvectors.
struct InteriorScanPoint {
  double energy = 0;
  int kernel_dim = 0;
  double next_sigma = 0;  // first singular value above the kernel cut
};

struct EmbeddedSearchOptions {
  int grid = 801;
  double kernel_tol = 1e-8;
  double refine_tol = 1e-10;  // energy localization, relative to the bandwidth
};

struct EmbeddedSearchResult {
  std::vector<IVec> interior;  // S-interior of Conv(Lambda) cap Z^d
  std::vector<InteriorScanPoint> scan;
  int generic_dim = 0;
  std::vector<double> exceptional;  // energies where the kernel grows
  Eigen::MatrixXcd persistent;      // kernel vectors shared by all energies
};

EmbeddedSearchResult embedded_eigenvector_search(const BandFunction& band,
                                                 const std::vector<IVec>& lambda,
                                                 const EmbeddedSearchOptions& opt = {});

// v = restriction to lambda of (E - H0) w, for w supported on interior.
Eigen::VectorXcd interior_candidate(const BandFunction& band, const std::vector<IVec>& lambda,
                                    const std::vector<IVec>& interior, const Eigen::VectorXcd& w,
                                    double E);

// For a diagonal potential with every entry nonzero, the iterated S-interior
// chain ending at the empty set rules out embedded eigenvalues entirely.
struct NoEmbeddedCertificate {
  lattice::ShrinkChain chain;
  bool certified = false;
};

NoEmbeddedCertificate no_embedded_check(const ImpurityModel& m, const BandFunction& band);

}  // namespace latscat
