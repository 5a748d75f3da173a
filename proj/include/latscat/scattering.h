#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "latscat/band.h"
#include "latscat/impurity.h"

namespace latscat {

// Per-energy scattering data on the propagating subspace F_E, the range of
// the density matrix rho(E) restricted to the impurity sites. The on-shell
// scattering operator acts as the identity on the complement of F_E and as
// the unitary Cayley block (C - i)(C + i)^{-1} on it, where
//   C = |pi rho|^{-1/2} (V^{-1} - Re G0(E)) |pi rho|^{-1/2}
// is Hermitian on F_E. Requires an invertible impurity matrix.
struct ScatteringFiber {
  double b = 0;       // rescaled energy, E = center + half_width * tanh(b)
  double energy = 0;
  int rank = 0;       // dim F_E
  bool rank_ambiguous = false;     // density eigenvalue within a decade of the cutoff
  bool restricted_inverse = false; // o_matrix solve was rank-deficient (embedded energy)
  Eigen::MatrixXcd basis;          // nsites x rank orthonormal basis of F_E
  Eigen::MatrixXcd c_matrix;       // rank x rank Hermitian block C
  Eigen::MatrixXcd s_block;        // rank x rank unitary (C - i)(C + i)^{-1}
  cplx phase_det{1, 0};            // det of s_block, unit modulus
  Eigen::MatrixXcd o_matrix;       // nsites x rank outgoing-coupling matrix
};

struct FiberOptions {
  double rank_cutoff = 1e-10;  // relative eigenvalue cutoff for F_E
  double singular_rel = 1e-10; // pseudo-inverse threshold in the o_matrix solve
};

ScatteringFiber fiber_at_energy(const ImpurityModel& m, const GreenBoundary& g, double E,
                                const FiberOptions& opt = {});
// Same data addressed by the rescaled coordinate b over the tabulated band.
ScatteringFiber fiber_at(const ImpurityModel& m, const GreenBoundary& g, double b,
                         const FiberOptions& opt = {});

// Solve (A + i B) w = v columnwise for A Hermitian and B PSD, where v lies in
// the orthogonal complement of Ker A int Ker B; the returned solution is the
// unique one orthogonal to that joint kernel.
Eigen::MatrixXcd restricted_inverse_apply(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b,
                                          const Eigen::MatrixXcd& v, double rel_tol = 1e-12);

// Momentum-space kernel of (wave operator - 1) at (k, k'):
//   sum_{n,m in sites} T(E(k') -+ i eps)[n,m] e^{i(k.n - k'.m)} / (E(k') -+ i eps - E(k))
// with the upper sign for side > 0. Point evaluation only; truncation checks
// assemble it over momentum grids. Throws ConfigError for eps <= 0.
cplx wave_operator_kernel(const ImpurityModel& m, const GreenBoundary& g,
                          const BandFunction& band, const KVec& k, const KVec& kp, int side,
                          double eps);
// Core with a precomputed T matrix at E(k'), for cached grid sweeps.
cplx wave_operator_kernel(const Eigen::MatrixXcd& t_at_kp, const std::vector<IVec>& sites,
                          const BandFunction& band, const KVec& k, const KVec& kp, int side,
                          double eps);

struct TimeDelayOptions {
  double h = 1e-4;        // initial central-difference half step
  double h_min = 1e-9;    // refinement floor
  double max_step = 0.78; // shrink h until both phase steps stay below this
};

// Tr of the energy derivative operator of the on-shell matrix at E, computed
// as the derivative of the unwrapped argument of det s_block. Near a
// tabulated singular energy the difference is taken one-sided and *warning
// is set.
double time_delay_trace(const ImpurityModel& m, const GreenBoundary& g, double E,
                        const TimeDelayOptions& opt = {}, bool* warning = nullptr);

// Tr((z - H)^{-1} - (z - H0)^{-1}) = -Tr(G0'(z) ((V)^{-1} - G0(z))^{-1}) on
// the impurity sites, valid off the real axis.
cplx resolvent_trace_difference(const ImpurityModel& m, const GreenBoundary& g, cplx z);

// 2 Im Tr((E - i eps - H)^{-1} - (E - i eps - H0)^{-1}) extrapolated to
// eps = 0 by two Richardson stages over {eps0, eps0/2, eps0/4}.
double spectral_time_delay(const ImpurityModel& m, const GreenBoundary& g, double E,
                           double eps0 = 1e-2);

// Half-bound-state corner data at one band edge. When dimension 3 carries a
// simple threshold resonance, the corner fiber acts as the identity off the
// resonance direction and as the phase (e^{pi a} -+ i)/(e^{pi a} +- i) on it
// (upper signs at the upper edge); its trace contribution is the rotation
// number of that phase map, computed by unwrapped winding over a in
// [-a_max, a_max]. Otherwise the corner is trivial.
struct CornerReport {
  bool trivial = true;
  double rotation = 0;       // signed winding of the phase map
  double trace = 0;          // contribution: 0 when trivial, else 1/2
  cplx factor_lo{1, 0};      // phase factor at a = -a_max
  cplx factor_hi{1, 0};      // phase factor at a = +a_max
};

struct CornerOptions {
  double a_max = 20;
  int grid = 4001;
};

// side > 0 for the upper band edge. Throws ConfigError for a resonance of
// multiplicity two or more in dimension 3 (outside the supported case).
CornerReport corner_operators(const ImpurityModel& m, const ThresholdReport& threshold, int side,
                              const CornerOptions& opt = {});

struct LevinsonOptions {
  int grid = 2001;             // initial energy grid inside the band
  double edge_offset = 1e-6;   // inset from each band edge, relative to the width
  double max_step = 0.78;      // refine intervals until phase steps drop below this
  double min_interval = 1e-10; // refinement floor, relative to the width
  double embed_window = 1e-4;  // half width excluded around embedded energies, relative
};

struct LevinsonLedger {
  // (1/2pi) integral of the time-delay trace over the band: the unwrapped
  // phase change of det s_block, stitched across small excluded windows at
  // embedded energies by principal-branch differences. The exact phase is
  // continuous through an embedded energy; any integer winding seen inside a
  // window is an artifact of the finite density tabulation, so the stitch
  // drops it and embedded_jump records what was dropped.
  double total_time_delay = 0;
  double smooth_phase = 0;       // integrated part alone, in turns
  double embedded_jump = 0;      // integer turns discarded at the windows (diagnostic)
  double window_measured = 0;    // phase change actually measured across the windows, in turns
  int n_bound = 0;               // bound states including embedded and threshold eigenvalues
  double corner_plus = 0, corner_minus = 0; // rotation-number traces at the edges
  double rhs = 0;                // -(corner_plus + corner_minus) in d = 3, else 0
  double residual = 0;           // |total_time_delay + n_bound - rhs|
  bool violation = false;        // residual above tolerance
  // Independent path: winding of det(P (V^{-1} - G0(E - i0)) P) along the
  // band, in turns; equals total_time_delay / 2 up to edge effects.
  double winding_independent = 0;
  int refine_evals = 0;          // fiber evaluations spent by the integrator
};

LevinsonLedger levinson_check(const ImpurityModel& m, const GreenBoundary& g,
                              const BandFunction& band, const BoundStateReport& report,
                              const LevinsonOptions& opt = {}, double tolerance = 0.02);

std::string to_json(const LevinsonLedger& l);

// 1 / G0(E_edge) at the chosen band edge: the coupling at which a point
// impurity first binds a state off that edge.
double critical_coupling(const GreenBoundary& g, int side);

}  // namespace latscat
