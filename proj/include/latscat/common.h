#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace latscat {

using cplx = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 6.28318530717958647692;

// Error taxonomy, mapped to CLI exit codes by the driver:
//   ConfigError -> 2 (bad input: malformed config, non-Hermitian data, non-Morse band)
//   NumericError -> 3 (a solver or quadrature failed to reach its tolerance)
//   PhysicsViolation -> 4 (a property the theory guarantees fails beyond tolerance)
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PhysicsViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Small integer vector on the lattice; dim <= 5.
struct IVec {
  std::array<int, 5> v{0, 0, 0, 0, 0};
  int dim = 0;

  IVec() = default;
  IVec(std::initializer_list<int> xs) {
    dim = static_cast<int>(xs.size());
    int i = 0;
    for (int x : xs) v[i++] = x;
  }
  static IVec zero(int d) {
    IVec r;
    r.dim = d;
    return r;
  }
  int& operator[](int i) { return v[i]; }
  int operator[](int i) const { return v[i]; }
  bool operator==(const IVec& o) const { return dim == o.dim && v == o.v; }
  bool operator<(const IVec& o) const {
    if (dim != o.dim) return dim < o.dim;
    return v < o.v;
  }
  IVec operator+(const IVec& o) const {
    IVec r = *this;
    for (int i = 0; i < dim; ++i) r.v[i] += o.v[i];
    return r;
  }
  IVec operator-(const IVec& o) const {
    IVec r = *this;
    for (int i = 0; i < dim; ++i) r.v[i] -= o.v[i];
    return r;
  }
  IVec operator-() const {
    IVec r = *this;
    for (int i = 0; i < dim; ++i) r.v[i] = -r.v[i];
    return r;
  }
  long long dot(const IVec& o) const {
    long long s = 0;
    for (int i = 0; i < dim; ++i) s += static_cast<long long>(v[i]) * o.v[i];
    return s;
  }
  double dot(const double* k) const {
    double s = 0;
    for (int i = 0; i < dim; ++i) s += v[i] * k[i];
    return s;
  }
  std::string str() const {
    std::string s = "(";
    for (int i = 0; i < dim; ++i) s += std::to_string(v[i]) + (i + 1 < dim ? "," : ")");
    if (dim == 0) s += ")";
    return s;
  }
};

// Point on the torus [0,2pi)^d, kept unwrapped during flows.
using KVec = std::array<double, 5>;

inline double wrap_angle(double x) {
  double y = std::fmod(x, kTwoPi);
  if (y < 0) y += kTwoPi;
  return y;
}

// Distance on the torus (componentwise nearest image).
inline double torus_dist(const KVec& a, const KVec& b, int dim) {
  double s = 0;
  for (int i = 0; i < dim; ++i) {
    double d = std::fabs(wrap_angle(a[i] - b[i]));
    d = std::min(d, kTwoPi - d);
    s += d * d;
  }
  return std::sqrt(s);
}

// Deterministic chunked parallel map. Results must be combined by the caller in
// chunk order so output is independent of scheduling. nthreads<=1 runs inline.
inline void parallel_chunks(std::int64_t n, int nthreads,
                            const std::function<void(std::int64_t, std::int64_t, int)>& fn) {
  if (n <= 0) return;
  if (nthreads <= 1) {
    fn(0, n, 0);
    return;
  }
  int nchunk = nthreads;
  std::int64_t per = (n + nchunk - 1) / nchunk;
  std::vector<std::thread> pool;
  for (int c = 0; c < nchunk; ++c) {
    std::int64_t lo = c * per, hi = std::min(n, lo + per);
    if (lo >= hi) break;
    pool.emplace_back(fn, lo, hi, c);
  }
  for (auto& t : pool) t.join();
}

using Rng = std::mt19937_64;

// FNV-1a over bytes; used for content-addressed cache keys.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}
inline std::uint64_t fnv1a_str(const std::string& s, std::uint64_t h = 1469598103934665603ull) {
  return fnv1a(s.data(), s.size(), h);
}

// 17 significant digits: round-trips binary64 exactly.
inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace latscat
