#include "latscat/kernels.h"

#include <cstdlib>
#include <cstring>

namespace latscat {

GridSpec offset_grid(int dim, std::int64_t n_per_axis) {
  GridSpec g;
  g.dim = dim;
  for (int i = 0; i < dim; ++i) {
    g.npts[i] = n_per_axis;
    g.dk[i] = kTwoPi / static_cast<double>(n_per_axis);
    g.k0[i] = 0.5 * g.dk[i];
  }
  return g;
}

namespace {

// Trig recurrences drift like t*eps; re-seeding from libm every RESYNC steps
// keeps absolute error near 1e-14 over arbitrarily long lines.
constexpr std::int64_t kResync = 128;

void scalar_sweep_line(const FoldedBand& band, const double* k0, int axis, double h,
                       std::int64_t count, double* out) {
  const int nt = static_cast<int>(band.terms.size());
  std::vector<double> phi0(nt), alpha(nt), c(nt), s(nt), ca(nt), sa(nt), av(nt), bv(nt);
  for (int j = 0; j < nt; ++j) {
    const auto& t = band.terms[j];
    phi0[j] = t.n.dot(k0);
    alpha[j] = t.n[axis] * h;
    c[j] = std::cos(phi0[j]);
    s[j] = std::sin(phi0[j]);
    ca[j] = std::cos(alpha[j]);
    sa[j] = std::sin(alpha[j]);
    av[j] = t.a;
    bv[j] = t.b;
  }
  for (std::int64_t t = 0; t < count; ++t) {
    if (t && (t % kResync) == 0) {
      for (int j = 0; j < nt; ++j) {
        double ph = phi0[j] + static_cast<double>(t) * alpha[j];
        c[j] = std::cos(ph);
        s[j] = std::sin(ph);
      }
    }
    double e = band.c0;
    for (int j = 0; j < nt; ++j) e += av[j] * c[j] + bv[j] * s[j];
    out[t] = e;
    for (int j = 0; j < nt; ++j) {
      double cn = c[j] * ca[j] - s[j] * sa[j];
      s[j] = s[j] * ca[j] + c[j] * sa[j];
      c[j] = cn;
    }
  }
}

template <class Fn>
void for_each_outer(const GridSpec& g, Fn&& fn) {
  // Iterate all index combinations of axes 1..dim-1; axis 0 is the inner sweep.
  std::array<std::int64_t, 5> idx{};
  for (;;) {
    double k[5];
    for (int i = 0; i < g.dim; ++i) k[i] = g.k0[i] + idx[i] * g.dk[i];
    fn(k, idx);
    int ax = 1;
    for (; ax < g.dim; ++ax) {
      if (++idx[ax] < g.npts[ax]) break;
      idx[ax] = 0;
    }
    if (ax >= g.dim) break;
  }
}

void scalar_histogram(const FoldedBand& band, const GridSpec& g, double lo, double hi,
                      std::int64_t nbins, std::uint64_t* counts) {
  const double inv = nbins / (hi - lo);
  const std::int64_t n0 = g.npts[0];
  std::vector<double> row(n0);
  for_each_outer(g, [&](const double* k, const std::array<std::int64_t, 5>&) {
    scalar_sweep_line(band, k, 0, g.dk[0], n0, row.data());
    for (std::int64_t t = 0; t < n0; ++t) {
      double x = (row[t] - lo) * inv;
      std::int64_t b = static_cast<std::int64_t>(x);
      if (x < 0) b = 0;
      if (b >= nbins) b = nbins - 1;
      counts[b]++;
    }
  });
}

const Kernels kScalar{"scalar", &scalar_sweep_line, &scalar_histogram};

}  // namespace

const Kernels& scalar_kernels() { return kScalar; }

#ifdef LATSCAT_HAVE_AVX2_TU
extern void avx2_sweep_line(const FoldedBand&, const double*, int, double, std::int64_t, double*);
extern void avx2_histogram(const FoldedBand&, const GridSpec&, double, double, std::int64_t,
                           std::uint64_t*);
namespace {
const Kernels kAvx2{"avx2", &avx2_sweep_line, &avx2_histogram};
}
#endif

const Kernels& avx2_kernels_or_scalar() {
#ifdef LATSCAT_HAVE_AVX2_TU
  if (__builtin_cpu_supports("avx2")) return kAvx2;
#endif
  return kScalar;
}

const Kernels& active_kernels() {
  const char* mode = std::getenv("LATSCAT_SIMD");
  if (mode && std::strcmp(mode, "scalar") == 0) return kScalar;
  if (mode && std::strcmp(mode, "avx2") == 0) {
    const Kernels& k = avx2_kernels_or_scalar();
    if (std::strcmp(k.name, "avx2") != 0)
      throw ConfigError("LATSCAT_SIMD=avx2 requested but AVX2 is unavailable");
    return k;
  }
  return avx2_kernels_or_scalar();
}

bool avx2_selected() { return std::strcmp(active_kernels().name, "avx2") == 0; }

void histogram_channels(const FoldedBand& band, const GridSpec& g, double lo, double hi,
                        std::int64_t nbins, const std::vector<IVec>& channels,
                        std::vector<cplx>& out) {
  const std::size_t nc = channels.size();
  out.assign(static_cast<std::size_t>(nbins) * nc, cplx(0, 0));
  const double inv = nbins / (hi - lo);
  const std::int64_t n0 = g.npts[0];
  std::vector<double> row(n0);
  std::vector<double> cph(nc), sph(nc), cstep(nc), sstep(nc), ph0(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    double a = channels[c][0] * g.dk[0];
    cstep[c] = std::cos(a);
    sstep[c] = std::sin(a);
  }
  for_each_outer(g, [&](const double* k, const std::array<std::int64_t, 5>&) {
    scalar_sweep_line(band, k, 0, g.dk[0], n0, row.data());
    for (std::size_t c = 0; c < nc; ++c) {
      ph0[c] = channels[c].dot(k);
      cph[c] = std::cos(ph0[c]);
      sph[c] = std::sin(ph0[c]);
    }
    for (std::int64_t t = 0; t < n0; ++t) {
      if (t && (t % kResync) == 0) {
        for (std::size_t c = 0; c < nc; ++c) {
          double ph = ph0[c] + static_cast<double>(t) * channels[c][0] * g.dk[0];
          cph[c] = std::cos(ph);
          sph[c] = std::sin(ph);
        }
      }
      double x = (row[t] - lo) * inv;
      std::int64_t b = static_cast<std::int64_t>(x);
      if (x < 0) b = 0;
      if (b >= nbins) b = nbins - 1;
      cplx* dst = out.data() + static_cast<std::size_t>(b) * nc;
      for (std::size_t c = 0; c < nc; ++c) {
        dst[c] += cplx(cph[c], sph[c]);
        double cn = cph[c] * cstep[c] - sph[c] * sstep[c];
        sph[c] = sph[c] * cstep[c] + cph[c] * sstep[c];
        cph[c] = cn;
      }
    }
  });
}

void fill_grid_values(const FoldedBand& band, const GridSpec& g, double* out, int nthreads) {
  const Kernels& ker = active_kernels();
  const std::int64_t n0 = g.npts[0];
  std::int64_t nouter = g.total() / n0;
  parallel_chunks(nouter, nthreads, [&](std::int64_t lo, std::int64_t hi, int) {
    for (std::int64_t r = lo; r < hi; ++r) {
      std::int64_t rem = r;
      double k[5];
      k[0] = g.k0[0];
      for (int ax = 1; ax < g.dim; ++ax) {
        std::int64_t i = rem % g.npts[ax];
        rem /= g.npts[ax];
        k[ax] = g.k0[ax] + i * g.dk[ax];
      }
      ker.sweep_line(band, k, 0, g.dk[0], n0, out + r * n0);
    }
  });
}

}  // namespace latscat
