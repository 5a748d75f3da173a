#ifdef __AVX2__

#include <immintrin.h>

#include "latscat/kernels.h"

namespace latscat {

namespace {
constexpr int kMaxTerms = 64;
constexpr std::int64_t kResyncIters = 128;  // resync lane phases every 128*4 points
}  // namespace

// Four lanes advance in lockstep; each iteration rotates every term's phase by
// 4*alpha_j. Lane phases are re-seeded from libm periodically to bound drift.
void avx2_sweep_line(const FoldedBand& band, const double* k0, int axis, double h,
                     std::int64_t count, double* out) {
  const int nt = static_cast<int>(band.terms.size());
  if (nt > kMaxTerms) {
    scalar_kernels().sweep_line(band, k0, axis, h, count, out);
    return;
  }
  double phi0[kMaxTerms], alpha[kMaxTerms], coefa[kMaxTerms], coefb[kMaxTerms];
  __m256d C[kMaxTerms], S[kMaxTerms], A[kMaxTerms], B[kMaxTerms], R4c[kMaxTerms], R4s[kMaxTerms];
  for (int j = 0; j < nt; ++j) {
    const auto& trm = band.terms[j];
    phi0[j] = trm.n.dot(k0);
    alpha[j] = trm.n[axis] * h;
    coefa[j] = trm.a;
    coefb[j] = trm.b;
    A[j] = _mm256_set1_pd(trm.a);
    B[j] = _mm256_set1_pd(trm.b);
    R4c[j] = _mm256_set1_pd(std::cos(4 * alpha[j]));
    R4s[j] = _mm256_set1_pd(std::sin(4 * alpha[j]));
  }
  auto seed_lanes = [&](std::int64_t t) {
    for (int j = 0; j < nt; ++j) {
      double p0 = phi0[j] + static_cast<double>(t) * alpha[j];
      C[j] = _mm256_set_pd(std::cos(p0 + 3 * alpha[j]), std::cos(p0 + 2 * alpha[j]),
                           std::cos(p0 + alpha[j]), std::cos(p0));
      S[j] = _mm256_set_pd(std::sin(p0 + 3 * alpha[j]), std::sin(p0 + 2 * alpha[j]),
                           std::sin(p0 + alpha[j]), std::sin(p0));
    }
  };
  seed_lanes(0);
  const __m256d c0v = _mm256_set1_pd(band.c0);
  const std::int64_t nvec = count - (count % 4);
  std::int64_t iter = 0;
  for (std::int64_t t = 0; t < nvec; t += 4, ++iter) {
    if (iter && (iter % kResyncIters) == 0) seed_lanes(t);
    __m256d e = c0v;
    for (int j = 0; j < nt; ++j) {
      e = _mm256_fmadd_pd(A[j], C[j], e);
      e = _mm256_fmadd_pd(B[j], S[j], e);
    }
    _mm256_storeu_pd(out + t, e);
    for (int j = 0; j < nt; ++j) {
      __m256d cn = _mm256_fmsub_pd(C[j], R4c[j], _mm256_mul_pd(S[j], R4s[j]));
      S[j] = _mm256_fmadd_pd(S[j], R4c[j], _mm256_mul_pd(C[j], R4s[j]));
      C[j] = cn;
    }
  }
  for (std::int64_t t = nvec; t < count; ++t) {
    double e = band.c0;
    for (int j = 0; j < nt; ++j) {
      double ph = phi0[j] + static_cast<double>(t) * alpha[j];
      e += coefa[j] * std::cos(ph) + coefb[j] * std::sin(ph);
    }
    out[t] = e;
  }
}

void avx2_histogram(const FoldedBand& band, const GridSpec& g, double lo, double hi,
                    std::int64_t nbins, std::uint64_t* counts) {
  const double inv = nbins / (hi - lo);
  const std::int64_t n0 = g.npts[0];
  std::vector<double> row(n0);
  const __m256d vlo = _mm256_set1_pd(lo);
  const __m256d vinv = _mm256_set1_pd(inv);
  const __m256d vzero = _mm256_setzero_pd();
  const __m256d vmax = _mm256_set1_pd(static_cast<double>(nbins - 1));

  std::array<std::int64_t, 5> idx{};
  for (;;) {
    double k[5];
    for (int i = 0; i < g.dim; ++i) k[i] = g.k0[i] + idx[i] * g.dk[i];
    avx2_sweep_line(band, k, 0, g.dk[0], n0, row.data());
    const std::int64_t nvec = n0 - (n0 % 4);
    for (std::int64_t t = 0; t < nvec; t += 4) {
      __m256d x = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(row.data() + t), vlo), vinv);
      x = _mm256_min_pd(_mm256_max_pd(x, vzero), vmax);
      __m128i b = _mm256_cvttpd_epi32(x);
      counts[_mm_extract_epi32(b, 0)]++;
      counts[_mm_extract_epi32(b, 1)]++;
      counts[_mm_extract_epi32(b, 2)]++;
      counts[_mm_extract_epi32(b, 3)]++;
    }
    for (std::int64_t t = nvec; t < n0; ++t) {
      double x = (row[t] - lo) * inv;
      std::int64_t b = static_cast<std::int64_t>(x);
      if (x < 0) b = 0;
      if (b >= nbins) b = nbins - 1;
      counts[b]++;
    }
    int ax = 1;
    for (; ax < g.dim; ++ax) {
      if (++idx[ax] < g.npts[ax]) break;
      idx[ax] = 0;
    }
    if (ax >= g.dim) break;
  }
}

}  // namespace latscat

#endif  // __AVX2__
