#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latscat/common.h"

namespace latscat {

// Real folded form of a Hermitian trigonometric polynomial:
//   E(k) = c0 + sum_j [ a_j cos(k.n_j) + b_j sin(k.n_j) ]
// with one term per +-n pair. This is the layout the sweep kernels consume.
struct FoldedBand {
  int dim = 0;
  double c0 = 0;
  struct Term {
    IVec n;
    double a = 0, b = 0;
  };
  std::vector<Term> terms;
};

// Uniform axis-aligned k grid: point (i0..i_{d-1}) at k_j = k0[j] + i_j*dk[j].
struct GridSpec {
  int dim = 0;
  std::array<std::int64_t, 5> npts{};
  std::array<double, 5> k0{};
  std::array<double, 5> dk{};
  std::int64_t total() const {
    std::int64_t t = 1;
    for (int i = 0; i < dim; ++i) t *= npts[i];
    return t;
  }
};

// Offset grid covering the torus: n points per axis at k = (i+1/2)*2pi/n.
GridSpec offset_grid(int dim, std::int64_t n_per_axis);

struct Kernels {
  const char* name;
  // Evaluate the band at `count` points k0 + t*h*e_axis, t=0..count-1.
  void (*sweep_line)(const FoldedBand&, const double* k0, int axis, double h,
                     std::int64_t count, double* out);
  // Add 1 to counts[bin(E)] for every grid point; values outside [lo,hi) are
  // clamped into the end bins.
  void (*histogram)(const FoldedBand&, const GridSpec&, double lo, double hi,
                    std::int64_t nbins, std::uint64_t* counts);
};

// Active kernel set: AVX2 when the CPU supports it, scalar otherwise.
// Env LATSCAT_SIMD=scalar|avx2|auto overrides.
const Kernels& active_kernels();
const Kernels& scalar_kernels();
const Kernels& avx2_kernels_or_scalar();
bool avx2_selected();

// Phase-channel accumulation for Green-matrix histograms: for each grid point
// with band value E falling in bin b, accumulate e^{i k.r_c} into out[b][c].
// Scalar only; the count path above is the SIMD-dispatched one.
void histogram_channels(const FoldedBand& band, const GridSpec& grid, double lo, double hi,
                        std::int64_t nbins, const std::vector<IVec>& channels,
                        std::vector<cplx>& out /* nbins*channels, bin-major */);

// Fill a full corner-value grid (row-major, axis 0 fastest) using sweep_line.
void fill_grid_values(const FoldedBand& band, const GridSpec& grid, double* out, int nthreads = 1);

}  // namespace latscat
