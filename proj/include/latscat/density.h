#pragma once

#include <vector>

#include "latscat/band.h"
#include "latscat/common.h"
#include "latscat/surface.h"

namespace latscat {

// Lattice difference vectors whose surface phase integrals are tabulated.
struct ChannelSet {
  int dim = 0;
  std::vector<IVec> diffs;

  // All pairwise differences m - n of a site list (deduplicated, zero first).
  static ChannelSet differences(int dim, const std::vector<IVec>& sites);
  // Index of r, or -1.
  int find(const IVec& r) const;
};

// rho_r(E) = (2pi)^-d int_{E level set} e^{i r.sigma} / |grad E| dS, one value
// per channel, from a single surface sample.
std::vector<cplx> channel_density(const SurfaceSample& s, const ChannelSet& ch);

struct DensityOptions {
  int base_pts = 600;        // uniform knot budget across the band
  int dyadic_lo = 4;         // refinement offsets delta * 2^-j around each
  int dyadic_hi = 24;        // singular energy, j = lo..hi; depth 24 keeps
                             // the edge interval error in Cauchy integrals
                             // below 1e-4 of the transform itself
  int surface_n = 0;         // level-set grid (0: 2048 in d=2, 48 in d=3)
  int conv_panel_gl = 12;    // Gauss points per convolution subpanel
  int conv_split = 6;        // dyadic subpanel levels toward singular ends
};

struct HistogramOptions {
  int grid_n = 0;            // zone grid per axis (0: dimension default)
  int bins = 4096;
  double window_frac = 2.5;  // density window half-width in bins
};

// Piecewise-linear tabulation of channel densities over the band, with
// closed-form Cauchy transforms of the interpolant.
class SpectralDensityMatrix {
 public:
  // Direct tabulation from caller-supplied knots and values.
  static SpectralDensityMatrix from_samples(int dim, ChannelSet ch, std::vector<double> knots,
                                            std::vector<std::vector<cplx>> values,
                                            std::vector<double> singular_energies = {});
  // Level-set quadrature at every knot (d <= 3).
  static SpectralDensityMatrix from_level_sets(const LevelSetSampler& sampler,
                                               const ChannelSet& ch,
                                               const DensityOptions& opt = {});
  // Recursive pipeline for bands that split off one axis at a time:
  // tabulate the remaining axes, then convolve with the split axis band.
  // Falls back to level sets once the remainder is two dimensional (or is
  // not separable and still fits the level-set sampler).
  static SpectralDensityMatrix from_separable(const BandFunction& band, const ChannelSet& ch,
                                              const DensityOptions& opt = {});
  // Zone-grid energy histogram (any dimension; coarser than the paths above).
  static SpectralDensityMatrix from_histogram(const BandFunction& band, const ChannelSet& ch,
                                              const HistogramOptions& opt = {});

  int dim() const { return ch_.dim; }
  double emin() const { return knots_.front(); }
  double emax() const { return knots_.back(); }
  const std::vector<double>& knots() const { return knots_; }
  const ChannelSet& channels() const { return ch_; }
  const std::vector<double>& singular_energies() const { return singular_; }

  // Linear interpolation of rho_r; identically zero outside the open band.
  cplx rho(int channel, double E) const;
  double dos(double E) const;  // channel 0
  // int rho_r(e) de over the band (closed form on the interpolant).
  cplx total_mass(int channel) const;

  // Cauchy transform C(z) = int rho_r(e)/(z - e) de of the interpolant,
  // evaluated in closed form (valid off the real axis and on the real axis
  // outside the band; near the band use boundary()).
  cplx cauchy(int channel, cplx z) const;
  cplx cauchy_deriv(int channel, cplx z) const;
  // Principal value of int rho_r(e)/(E - e) de for real E.
  cplx principal_value(int channel, double E) const;
  // Boundary value C(E - i0) (side < 0, Im = +pi rho) or C(E + i0).
  cplx boundary(int channel, double E, int side) const;

 private:
  ChannelSet ch_;
  std::vector<double> knots_;
  std::vector<std::vector<cplx>> vals_;  // [channel][knot]
  std::vector<double> singular_;
};

// Knot ladder: uniform base plus dyadic refinement toward each singular
// energy; first and last knot sit exactly on the band edges.
std::vector<double> build_energy_knots(double emin, double emax,
                                       const std::vector<double>& singular, int base_pts,
                                       int j_lo, int j_hi);

// True when every band term involves either only `axis` or none of it.
bool band_splits_at_axis(const BandFunction& band, int axis);
// The two factors of a split (the remainder keeps the original axis order
// minus `axis`; the axis factor becomes one dimensional).
BandFunction band_without_axis(const BandFunction& band, int axis);
BandFunction band_of_axis(const BandFunction& band, int axis);

}  // namespace latscat
