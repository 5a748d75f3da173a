#include "latscat/lattice.h"

#include <algorithm>
#include <numeric>

namespace latscat {
namespace lattice {

long long gcd_ll(long long a, long long b) {
  a = std::llabs(a);
  b = std::llabs(b);
  while (b) {
    long long t = a % b;
    a = b;
    b = t;
  }
  return a;
}

bool is_prime_vector(const IVec& a) {
  long long g = 0;
  for (int i = 0; i < a.dim; ++i) g = gcd_ll(g, a[i]);
  return g == 1;
}

namespace {

using i128 = __int128;

i128 gcd128(i128 a, i128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b) {
    i128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

// Exact rational on int128. The LPs here are tiny (<= 6 rows), so magnitudes
// stay far from overflow after per-operation normalization.
struct Frac {
  i128 num = 0, den = 1;
  Frac() = default;
  Frac(long long n) : num(n), den(1) {}
  Frac(i128 n, i128 d) {
    if (d < 0) {
      n = -n;
      d = -d;
    }
    i128 g = gcd128(n, d);
    if (g > 1) {
      n /= g;
      d /= g;
    }
    num = n;
    den = d == 0 ? 1 : d;
  }
  Frac operator+(const Frac& o) const { return Frac(num * o.den + o.num * den, den * o.den); }
  Frac operator-(const Frac& o) const { return Frac(num * o.den - o.num * den, den * o.den); }
  Frac operator*(const Frac& o) const { return Frac(num * o.num, den * o.den); }
  Frac operator/(const Frac& o) const { return Frac(num * o.den, den * o.num); }
  bool is_zero() const { return num == 0; }
  bool operator<(const Frac& o) const { return num * o.den < o.num * den; }
  bool operator>(const Frac& o) const { return o < *this; }
  bool operator==(const Frac& o) const { return num == o.num && den == o.den; }
};

// Phase-1 simplex with Bland's rule: feasibility of {A lam = b, lam >= 0}.
bool lp_feasible(std::vector<std::vector<Frac>> A, std::vector<Frac> b) {
  const int m = static_cast<int>(A.size());
  const int n = m ? static_cast<int>(A[0].size()) : 0;
  for (int i = 0; i < m; ++i) {
    if (b[i] < Frac(0)) {
      for (int j = 0; j < n; ++j) A[i][j] = Frac(0) - A[i][j];
      b[i] = Frac(0) - b[i];
    }
  }
  // Tableau columns: n structural + m artificial; basis starts artificial.
  const int ncols = n + m;
  std::vector<std::vector<Frac>> T(m, std::vector<Frac>(ncols + 1));
  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) T[i][j] = A[i][j];
    T[i][n + i] = Frac(1);
    T[i][ncols] = b[i];
    basis[i] = n + i;
  }
  // Objective: minimize sum of artificials; reduced costs from summing rows.
  std::vector<Frac> cost(ncols + 1);
  for (int j = 0; j <= ncols; ++j) {
    Frac s(0);
    for (int i = 0; i < m; ++i) s = s + T[i][j];
    cost[j] = Frac(0) - s;
  }
  for (int j = n; j < ncols; ++j) cost[j] = cost[j] + Frac(1);

  for (int guard = 0; guard < 4096; ++guard) {
    int enter = -1;
    for (int j = 0; j < ncols; ++j)
      if (cost[j] < Frac(0)) {
        enter = j;
        break;
      }
    if (enter < 0) break;
    int leave = -1;
    Frac best(0);
    for (int i = 0; i < m; ++i) {
      if (T[i][enter] > Frac(0)) {
        Frac ratio = T[i][ncols] / T[i][enter];
        if (leave < 0 || ratio < best || (ratio == best && basis[i] < basis[leave])) {
          best = ratio;
          leave = i;
        }
      }
    }
    if (leave < 0) return false;  // unbounded phase 1: cannot happen, bail out
    Frac piv = T[leave][enter];
    for (int j = 0; j <= ncols; ++j) T[leave][j] = T[leave][j] / piv;
    for (int i = 0; i < m; ++i) {
      if (i == leave || T[i][enter].is_zero()) continue;
      Frac f = T[i][enter];
      for (int j = 0; j <= ncols; ++j) T[i][j] = T[i][j] - f * T[leave][j];
    }
    Frac f = cost[enter];
    if (!f.is_zero())
      for (int j = 0; j <= ncols; ++j) cost[j] = cost[j] - f * T[leave][j];
    basis[leave] = enter;
  }
  Frac obj(0);
  for (int i = 0; i < m; ++i)
    if (basis[i] >= n) obj = obj + T[i][ncols];
  return obj.is_zero();
}

}  // namespace

bool in_hull(const std::vector<IVec>& X, const IVec& p) {
  if (X.empty()) return false;
  const int d = X[0].dim;
  const int n = static_cast<int>(X.size());
  std::vector<std::vector<Frac>> A(d + 1, std::vector<Frac>(n));
  std::vector<Frac> b(d + 1);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < d; ++i) A[i][j] = Frac(X[j][i]);
    A[d][j] = Frac(1);
  }
  for (int i = 0; i < d; ++i) b[i] = Frac(p[i]);
  b[d] = Frac(1);
  return lp_feasible(std::move(A), std::move(b));
}

std::vector<IVec> lattice_hull(const std::vector<IVec>& X) {
  std::vector<IVec> out;
  if (X.empty()) return out;
  const int d = X[0].dim;
  IVec lo = X[0], hi = X[0];
  for (const auto& x : X)
    for (int i = 0; i < d; ++i) {
      lo[i] = std::min(lo[i], x[i]);
      hi[i] = std::max(hi[i], x[i]);
    }
  IVec p = lo;
  for (;;) {
    if (in_hull(X, p)) out.push_back(p);
    int ax = 0;
    for (; ax < d; ++ax) {
      if (++p[ax] <= hi[ax]) break;
      p[ax] = lo[ax];
    }
    if (ax >= d) break;
  }
  return out;
}

std::vector<IVec> s_interior(const std::vector<IVec>& X, const std::vector<IVec>& S) {
  std::vector<IVec> sorted = X;
  std::sort(sorted.begin(), sorted.end());
  std::vector<IVec> out;
  for (const auto& x : X) {
    bool ok = true;
    for (const auto& s : S) {
      if (!std::binary_search(sorted.begin(), sorted.end(), x + s)) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back(x);
  }
  return out;
}

std::vector<long long> complete_to_unimodular(const IVec& a) {
  if (!is_prime_vector(a)) throw ConfigError("complete_to_unimodular requires a prime vector");
  const int d = a.dim;
  std::vector<long long> v(d);
  for (int i = 0; i < d; ++i) v[i] = a[i];

  struct Op {
    int kind;  // 0: swap(r0,r1); 1: row r0 -= q*row r1; 2: negate r0
    int r0, r1;
    long long q;
  };
  std::vector<Op> ops;
  auto apply_to_v = [&](const Op& op) {
    if (op.kind == 0)
      std::swap(v[op.r0], v[op.r1]);
    else if (op.kind == 1)
      v[op.r0] -= op.q * v[op.r1];
    else
      v[op.r0] = -v[op.r0];
  };

  // Reduce v to e_0 with recorded elementary row operations.
  for (int guard = 0; guard < 512; ++guard) {
    int nz = 0, pivot = -1;
    for (int i = 0; i < d; ++i)
      if (v[i] != 0) {
        ++nz;
        if (pivot < 0 || std::llabs(v[i]) < std::llabs(v[pivot])) pivot = i;
      }
    if (nz == 1 && std::llabs(v[pivot]) == 1) {
      if (pivot != 0) {
        Op op{0, 0, pivot, 0};
        ops.push_back(op);
        apply_to_v(op);
      }
      if (v[0] < 0) {
        Op op{2, 0, 0, 0};
        ops.push_back(op);
        apply_to_v(op);
      }
      break;
    }
    for (int i = 0; i < d; ++i) {
      if (i == pivot || v[i] == 0) continue;
      long long q = v[i] / v[pivot];
      if (q != 0) {
        Op op{1, i, pivot, q};
        ops.push_back(op);
        apply_to_v(op);
      } else {
        // |v[i]| < |v[pivot]| cannot happen (pivot is the minimum), and
        // v[i] % v[pivot] != 0 with q == 0 means |v[i]| < |v[pivot]|: skip.
      }
    }
    // If all off-pivot entries reduced to zero but pivot is not +-1, the gcd
    // would exceed 1, contradicting primality.
  }
  if (!(v[0] == 1)) throw NumericError("unimodular completion failed to reduce");
  for (int i = 1; i < d; ++i)
    if (v[i] != 0) throw NumericError("unimodular completion failed to reduce");

  // M = U^{-1} = E_1^{-1} ... E_k^{-1} applied to the identity, ops reversed.
  std::vector<long long> M(d * d, 0);
  for (int i = 0; i < d; ++i) M[i * d + i] = 1;
  for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
    const Op& op = *it;
    if (op.kind == 0) {
      for (int j = 0; j < d; ++j) std::swap(M[op.r0 * d + j], M[op.r1 * d + j]);
    } else if (op.kind == 1) {
      for (int j = 0; j < d; ++j) M[op.r0 * d + j] += op.q * M[op.r1 * d + j];
    } else {
      for (int j = 0; j < d; ++j) M[op.r0 * d + j] = -M[op.r0 * d + j];
    }
  }
  long long det = det_int(M, d);
  if (det != 1 && det != -1) throw NumericError("unimodular completion produced |det| != 1");
  for (int i = 0; i < d; ++i)
    if (M[i * d + 0] != a[i]) throw NumericError("unimodular completion lost the input vector");
  return M;
}

long long det_int(const std::vector<long long>& m, int d) {
  if (d == 1) return m[0];
  long long det = 0;
  std::vector<long long> sub((d - 1) * (d - 1));
  for (int c = 0; c < d; ++c) {
    for (int i = 1; i < d; ++i) {
      int jj = 0;
      for (int j = 0; j < d; ++j) {
        if (j == c) continue;
        sub[(i - 1) * (d - 1) + jj++] = m[i * d + j];
      }
    }
    long long s = det_int(sub, d - 1);
    det += (c % 2 == 0 ? 1 : -1) * m[c] * s;
  }
  return det;
}

namespace {

// Primitive integer vector orthogonal to the span of `rows` (each dim d),
// when that span has dimension exactly d-1. Exact rational elimination.
bool nullspace_primitive(const std::vector<IVec>& rows, int d, IVec& out) {
  const int m = static_cast<int>(rows.size());
  std::vector<std::vector<Frac>> A(m, std::vector<Frac>(d));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < d; ++j) A[i][j] = Frac(rows[i][j]);
  std::vector<int> pivot_col;
  int r = 0;
  for (int c = 0; c < d && r < m; ++c) {
    int pr = -1;
    for (int i = r; i < m; ++i)
      if (!A[i][c].is_zero()) {
        pr = i;
        break;
      }
    if (pr < 0) continue;
    std::swap(A[r], A[pr]);
    Frac p = A[r][c];
    for (int j = 0; j < d; ++j) A[r][j] = A[r][j] / p;
    for (int i = 0; i < m; ++i) {
      if (i == r || A[i][c].is_zero()) continue;
      Frac f = A[i][c];
      for (int j = 0; j < d; ++j) A[i][j] = A[i][j] - f * A[r][j];
    }
    pivot_col.push_back(c);
    ++r;
  }
  if (r != d - 1) return false;
  int free_col = -1;
  for (int c = 0; c < d; ++c)
    if (std::find(pivot_col.begin(), pivot_col.end(), c) == pivot_col.end()) {
      free_col = c;
      break;
    }
  // Back-substitute with the free variable = 1; clear denominators.
  std::vector<Frac> x(d, Frac(0));
  x[free_col] = Frac(1);
  for (int i = 0; i < r; ++i) x[pivot_col[i]] = Frac(0) - A[i][free_col];
  i128 den_lcm = 1;
  for (int j = 0; j < d; ++j) den_lcm = den_lcm / gcd128(den_lcm, x[j].den) * x[j].den;
  std::vector<i128> ix(d);
  i128 g = 0;
  for (int j = 0; j < d; ++j) {
    ix[j] = x[j].num * (den_lcm / x[j].den);
    g = gcd128(g, ix[j]);
  }
  if (g == 0) return false;
  out = IVec::zero(d);
  for (int j = 0; j < d; ++j) out[j] = static_cast<int>(static_cast<long long>(ix[j] / g));
  return true;
}

int affine_rank(const std::vector<IVec>& X, int d) {
  if (X.size() <= 1) return 0;
  std::vector<std::vector<Frac>> A;
  for (std::size_t i = 1; i < X.size(); ++i) {
    std::vector<Frac> row(d);
    for (int j = 0; j < d; ++j) row[j] = Frac(X[i][j] - X[0][j]);
    A.push_back(std::move(row));
  }
  int m = static_cast<int>(A.size());
  int r = 0;
  for (int c = 0; c < d && r < m; ++c) {
    int pr = -1;
    for (int i = r; i < m; ++i)
      if (!A[i][c].is_zero()) {
        pr = i;
        break;
      }
    if (pr < 0) continue;
    std::swap(A[r], A[pr]);
    for (int i = r + 1; i < m; ++i) {
      if (A[i][c].is_zero()) continue;
      Frac f = A[i][c] / A[r][c];
      for (int j = 0; j < d; ++j) A[i][j] = A[i][j] - f * A[r][j];
    }
    ++r;
  }
  return r;
}

}  // namespace

std::vector<HalfSpace> contact_halfspaces(const std::vector<IVec>& X) {
  std::vector<HalfSpace> out;
  if (X.empty()) return out;
  const int d = X[0].dim;
  auto push_unique = [&](IVec a, long long m) {
    // Normalize to primitive.
    long long g = 0;
    for (int i = 0; i < d; ++i) g = gcd_ll(g, a[i]);
    if (g == 0) return;
    if (g > 1) {
      for (int i = 0; i < d; ++i) a[i] = static_cast<int>(a[i] / g);
      // m for the primitive normal must be recomputed by the caller; here all
      // callers pass m consistent with a primitive a.
    }
    for (auto& h : out)
      if (h.a == a) return;
    out.push_back({a, m});
  };
  auto min_dot = [&](const IVec& a) {
    long long m = a.dot(X[0]);
    for (const auto& x : X) m = std::min(m, a.dot(x));
    return m;
  };
  auto max_dot = [&](const IVec& a) {
    long long m = a.dot(X[0]);
    for (const auto& x : X) m = std::max(m, a.dot(x));
    return m;
  };

  int arank = affine_rank(X, d);
  // Candidate normals from (d-1)-dimensional sub-spans of difference vectors.
  std::vector<IVec> diffs;
  for (std::size_t i = 0; i < X.size(); ++i)
    for (std::size_t j = i + 1; j < X.size(); ++j) diffs.push_back(X[j] - X[i]);

  if (d == 1) {
    IVec plus = IVec::zero(1), minus = IVec::zero(1);
    plus[0] = 1;
    minus[0] = -1;
    push_unique(plus, min_dot(plus));
    push_unique(minus, min_dot(minus));
    return out;
  }

  std::vector<int> comb(d - 1);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == d - 1) {
      std::vector<IVec> rows;
      for (int idx : comb) rows.push_back(diffs[idx]);
      IVec nrm;
      if (!nullspace_primitive(rows, d, nrm)) return;
      long long lo = min_dot(nrm), hi = max_dot(nrm);
      if (arank < d) {
        // Degenerate hull: spanning hyperplane, report both orientations.
        if (lo == hi) {
          push_unique(nrm, lo);
          push_unique(-nrm, -hi);
          return;
        }
      }
      // Facet check: supporting set must have affine rank d-1.
      for (int sgn = 0; sgn < 2; ++sgn) {
        IVec a = sgn ? -nrm : nrm;
        long long m = sgn ? -hi : lo;
        std::vector<IVec> face;
        for (const auto& x : X)
          if (a.dot(x) == m) face.push_back(x);
        if (face.size() >= static_cast<std::size_t>(d) && affine_rank(face, d) == d - 1)
          push_unique(a, m);
      }
      return;
    }
    for (int i = start; i < static_cast<int>(diffs.size()); ++i) {
      comb[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  if (static_cast<int>(diffs.size()) >= d - 1) rec(0, 0);
  return out;
}

ShrinkChain shrink_chain(const std::vector<IVec>& X0, const std::vector<IVec>& S, int max_stages) {
  ShrinkChain ch;
  std::vector<IVec> X = X0;
  std::sort(X.begin(), X.end());
  ch.stages.push_back(X);
  for (int j = 0; j < max_stages; ++j) {
    if (X.empty()) {
      ch.empty_terminated = true;
      break;
    }
    std::vector<IVec> H = lattice_hull(X);
    std::vector<IVec> nxt = s_interior(H, S);
    std::sort(nxt.begin(), nxt.end());
    ch.stages.push_back(nxt);
    if (nxt == X) break;  // stationary, no certificate
    X = std::move(nxt);
  }
  if (X.empty()) ch.empty_terminated = true;
  return ch;
}

}  // namespace lattice
}  // namespace latscat
