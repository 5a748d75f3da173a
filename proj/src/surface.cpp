#include "latscat/surface.h"

#include <algorithm>

#include <Eigen/Eigenvalues>

namespace latscat {

namespace {

// Two-point Gauss-Legendre on a chord.
constexpr double kGL2[2] = {0.21132486540518711775, 0.78867513459481288225};

// Six-point degree-4 symmetric triangle rule (barycentric, weights sum to 1).
struct TriNode {
  double l1, l2, l3, w;
};
constexpr TriNode kTri6[6] = {
    {0.81684757298045851308, 0.09157621350977074346, 0.09157621350977074346, 0.10995174365532186764},
    {0.09157621350977074346, 0.81684757298045851308, 0.09157621350977074346, 0.10995174365532186764},
    {0.09157621350977074346, 0.09157621350977074346, 0.81684757298045851308, 0.10995174365532186764},
    {0.10810301816807022736, 0.44594849091596488632, 0.44594849091596488632, 0.22338158967801146570},
    {0.44594849091596488632, 0.10810301816807022736, 0.44594849091596488632, 0.22338158967801146570},
    {0.44594849091596488632, 0.44594849091596488632, 0.10810301816807022736, 0.22338158967801146570}};

struct Accum {
  SurfaceSample* out;
  const BandFunction* band;
  double E;
  double jcap;
  int clipped = 0;
};

// Newton projection of a point onto the level set along the gradient.
inline void project(const BandFunction& band, double E, double* k, int dim) {
  for (int it = 0; it < 4; ++it) {
    double g[5];
    double v = band.eval(k) - E;
    if (std::fabs(v) < 1e-13) break;
    band.grad(k, g);
    double g2 = 0;
    for (int i = 0; i < dim; ++i) g2 += g[i] * g[i];
    if (g2 < 1e-24) break;
    double f = v / g2;
    for (int i = 0; i < dim; ++i) k[i] -= f * g[i];
  }
}

// Marching grids are shifted per axis by a fixed small fraction of a cell.
// An unshifted grid straddles the mirror planes of a symmetric band (for
// example k_j = pi) symmetrically, and linear interpolation then parks
// vertices exactly on those planes, which are invariant sets of the energy
// flow running into saddle points. The shift keeps every interpolated vertex
// at a generic position; surface integrals are unaffected.
constexpr double kGridShift[5] = {0.0137482905, 0.0219748351, 0.0086213947, 0.0174926813,
                                  0.0251398427};

// ----- d=2 marching squares -----

struct Cell2 {
  double x0, y0, h;
  double v[4];  // corners: (0,0),(1,0),(1,1),(0,1)
};

bool segment_nodes_ok(Accum& acc, const double p[2], const double q[2], double jcap,
                      std::vector<std::array<double, 7>>& staged) {
  double cx = q[0] - p[0], cy = q[1] - p[1];
  double len = std::hypot(cx, cy);
  if (len < 1e-15) return true;
  double nx = -cy / len, ny = cx / len;
  for (double t : kGL2) {
    double k[5] = {p[0] + t * cx, p[1] + t * cy, 0, 0, 0};
    project(*acc.band, acc.E, k, 2);
    double g[5];
    acc.band->grad(k, g);
    double gn = std::hypot(g[0], g[1]);
    double dn = std::fabs(g[0] * nx + g[1] * ny);
    if (dn < gn / jcap || gn < 1e-12) return false;
    double J = gn / dn;
    staged.push_back({k[0], k[1], 0, 0, 0, len * 0.5 * J, gn});
  }
  return true;
}

void march_cell_2d(Accum& acc, const Cell2& c, int depth, int max_depth) {
  double lo = std::min(std::min(c.v[0], c.v[1]), std::min(c.v[2], c.v[3]));
  double hi = std::max(std::max(c.v[0], c.v[1]), std::max(c.v[2], c.v[3]));
  if (!(lo < acc.E && acc.E <= hi)) return;

  auto interp = [&](double a, double va, double b, double vb) {
    double t = (acc.E - va) / (vb - va);
    return a + t * (b - a);
  };
  // Edge crossing points: bottom, right, top, left.
  double pts[4][2];
  bool cross[4];
  const double x1 = c.x0 + c.h, y1 = c.y0 + c.h;
  cross[0] = (c.v[0] > acc.E) != (c.v[1] > acc.E);
  cross[1] = (c.v[1] > acc.E) != (c.v[2] > acc.E);
  cross[2] = (c.v[2] > acc.E) != (c.v[3] > acc.E);
  cross[3] = (c.v[3] > acc.E) != (c.v[0] > acc.E);
  if (cross[0]) {
    pts[0][0] = interp(c.x0, c.v[0], x1, c.v[1]);
    pts[0][1] = c.y0;
  }
  if (cross[1]) {
    pts[1][0] = x1;
    pts[1][1] = interp(c.y0, c.v[1], y1, c.v[2]);
  }
  if (cross[2]) {
    pts[2][0] = interp(x1, c.v[2], c.x0, c.v[3]);
    pts[2][1] = y1;
  }
  if (cross[3]) {
    pts[3][0] = c.x0;
    pts[3][1] = interp(y1, c.v[3], c.y0, c.v[0]);
  }
  int ncross = cross[0] + cross[1] + cross[2] + cross[3];

  std::vector<std::pair<int, int>> segs;
  if (ncross == 2) {
    int e[2], m = 0;
    for (int i = 0; i < 4; ++i)
      if (cross[i]) e[m++] = i;
    segs.push_back({e[0], e[1]});
  } else if (ncross == 4) {
    // Saddle cell: resolve with the center value.
    double kc[5] = {c.x0 + 0.5 * c.h, c.y0 + 0.5 * c.h, 0, 0, 0};
    double vc = acc.band->eval(kc);
    bool c00 = c.v[0] > acc.E;
    if ((vc > acc.E) == c00) {
      segs.push_back({0, 1});
      segs.push_back({2, 3});
    } else {
      segs.push_back({0, 3});
      segs.push_back({1, 2});
    }
  } else if (ncross != 0) {
    return;  // grazing contact through a corner; measure zero
  }

  std::vector<std::array<double, 7>> staged;
  bool ok = true;
  for (auto& s : segs)
    if (!segment_nodes_ok(acc, pts[s.first], pts[s.second], acc.jcap, staged)) {
      ok = false;
      break;
    }
  if (!ok && depth < max_depth) {
    double h2 = 0.5 * c.h;
    double xm = c.x0 + h2, ym = c.y0 + h2;
    auto ev = [&](double x, double y) {
      double k[5] = {x, y, 0, 0, 0};
      return acc.band->eval(k);
    };
    double vmb = ev(xm, c.y0), vmr = ev(c.x0 + c.h, ym), vmt = ev(xm, c.y0 + c.h),
           vml = ev(c.x0, ym), vcc = ev(xm, ym);
    Cell2 sub[4] = {
        {c.x0, c.y0, h2, {c.v[0], vmb, vcc, vml}},
        {xm, c.y0, h2, {vmb, c.v[1], vmr, vcc}},
        {xm, ym, h2, {vcc, vmr, c.v[2], vmt}},
        {c.x0, ym, h2, {vml, vcc, vmt, c.v[3]}},
    };
    for (auto& s : sub) march_cell_2d(acc, s, depth + 1, max_depth);
    return;
  }
  if (!ok) {
    // Depth exhausted: keep the capped contribution.
    staged.clear();
    for (auto& s : segs) {
      double p[2] = {pts[s.first][0], pts[s.first][1]};
      double q[2] = {pts[s.second][0], pts[s.second][1]};
      double cx = q[0] - p[0], cy = q[1] - p[1];
      double len = std::hypot(cx, cy);
      if (len < 1e-15) continue;
      double nx = -cy / len, ny = cx / len;
      for (double t : kGL2) {
        double k[5] = {p[0] + t * cx, p[1] + t * cy, 0, 0, 0};
        project(*acc.band, acc.E, k, 2);
        double g[5];
        acc.band->grad(k, g);
        double gn = std::hypot(g[0], g[1]);
        double dn = std::max(std::fabs(g[0] * nx + g[1] * ny), gn / 50.0);
        if (gn < 1e-12) continue;
        staged.push_back({k[0], k[1], 0, 0, 0, len * 0.5 * (gn / dn), gn});
        acc.clipped++;
      }
    }
  }
  for (auto& n : staged) {
    KVec k{n[0], n[1], n[2], n[3], n[4]};
    acc.out->nodes.push_back(k);
    acc.out->weights.push_back(n[5]);
    acc.out->grad_norm.push_back(n[6]);
  }
}

// ----- d=3 marching tetrahedra -----

const int kKuhnTets[6][4] = {{0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7},
                             {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7}};

struct Cell3 {
  double o[3];
  double h;
  double v[8];  // corner bitmask order: bit0->x, bit1->y, bit2->z
};

void corner_pos(const Cell3& c, int idx, double* p) {
  p[0] = c.o[0] + ((idx & 1) ? c.h : 0);
  p[1] = c.o[1] + ((idx & 2) ? c.h : 0);
  p[2] = c.o[2] + ((idx & 4) ? c.h : 0);
}

bool triangle_nodes(Accum& acc, const double A[3], const double B[3], const double C[3],
                    double jcap, std::vector<std::array<double, 7>>& staged) {
  double u[3] = {B[0] - A[0], B[1] - A[1], B[2] - A[2]};
  double v[3] = {C[0] - A[0], C[1] - A[1], C[2] - A[2]};
  double nr[3] = {u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
  double n2 = std::sqrt(nr[0] * nr[0] + nr[1] * nr[1] + nr[2] * nr[2]);
  if (n2 < 1e-18) return true;
  double area = 0.5 * n2;
  double nx = nr[0] / n2, ny = nr[1] / n2, nz = nr[2] / n2;
  for (const auto& tn : kTri6) {
    double k[5] = {tn.l1 * A[0] + tn.l2 * B[0] + tn.l3 * C[0],
                   tn.l1 * A[1] + tn.l2 * B[1] + tn.l3 * C[1],
                   tn.l1 * A[2] + tn.l2 * B[2] + tn.l3 * C[2], 0, 0};
    project(*acc.band, acc.E, k, 3);
    double g[5];
    acc.band->grad(k, g);
    double gn = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
    double dn = std::fabs(g[0] * nx + g[1] * ny + g[2] * nz);
    if (dn < gn / jcap || gn < 1e-12) return false;
    staged.push_back({k[0], k[1], k[2], 0, 0, area * tn.w * (gn / dn), gn});
  }
  return true;
}

bool march_tet(Accum& acc, const Cell3& c, const int t[4],
               std::vector<std::array<double, 7>>& staged) {
  double P[4][3];
  double V[4];
  for (int i = 0; i < 4; ++i) {
    corner_pos(c, t[i], P[i]);
    V[i] = c.v[t[i]];
  }
  int pos[4], neg[4], np = 0, nn = 0;
  for (int i = 0; i < 4; ++i) {
    if (V[i] > acc.E)
      pos[np++] = i;
    else
      neg[nn++] = i;
  }
  if (np == 0 || nn == 0) return true;
  auto cut = [&](int a, int b, double* out) {
    double tt = (acc.E - V[a]) / (V[b] - V[a]);
    for (int i = 0; i < 3; ++i) out[i] = P[a][i] + tt * (P[b][i] - P[a][i]);
  };
  if (np == 1 || nn == 1) {
    int apex = (np == 1) ? pos[0] : neg[0];
    int base[3], m = 0;
    for (int i = 0; i < 4; ++i)
      if (i != apex) base[m++] = i;
    double X[3][3];
    for (int i = 0; i < 3; ++i) cut(apex, base[i], X[i]);
    return triangle_nodes(acc, X[0], X[1], X[2], acc.jcap, staged);
  }
  // 2-2 split: quad with vertices on the four crossing edges.
  double Q[4][3];
  cut(pos[0], neg[0], Q[0]);
  cut(pos[0], neg[1], Q[1]);
  cut(pos[1], neg[1], Q[2]);
  cut(pos[1], neg[0], Q[3]);
  if (!triangle_nodes(acc, Q[0], Q[1], Q[2], acc.jcap, staged)) return false;
  return triangle_nodes(acc, Q[0], Q[2], Q[3], acc.jcap, staged);
}

void march_cell_3d(Accum& acc, const Cell3& c, int depth, int max_depth) {
  double lo = c.v[0], hi = c.v[0];
  for (int i = 1; i < 8; ++i) {
    lo = std::min(lo, c.v[i]);
    hi = std::max(hi, c.v[i]);
  }
  if (!(lo < acc.E && acc.E <= hi)) return;

  std::vector<std::array<double, 7>> staged;
  bool ok = true;
  for (auto& t : kKuhnTets)
    if (!march_tet(acc, c, t, staged)) {
      ok = false;
      break;
    }
  if (!ok) {
    if (depth < max_depth) {
      double h2 = 0.5 * c.h;
      double vals[3][3][3];
      for (int iz = 0; iz < 3; ++iz)
        for (int iy = 0; iy < 3; ++iy)
          for (int ix = 0; ix < 3; ++ix) {
            double k[5] = {c.o[0] + ix * h2, c.o[1] + iy * h2, c.o[2] + iz * h2, 0, 0};
            vals[iz][iy][ix] = acc.band->eval(k);
          }
      for (int sz = 0; sz < 2; ++sz)
        for (int sy = 0; sy < 2; ++sy)
          for (int sx = 0; sx < 2; ++sx) {
            Cell3 sub;
            sub.o[0] = c.o[0] + sx * h2;
            sub.o[1] = c.o[1] + sy * h2;
            sub.o[2] = c.o[2] + sz * h2;
            sub.h = h2;
            for (int b = 0; b < 8; ++b)
              sub.v[b] = vals[sz + ((b & 4) ? 1 : 0)][sy + ((b & 2) ? 1 : 0)][sx + (b & 1)];
            march_cell_3d(acc, sub, depth + 1, max_depth);
          }
      return;
    }
    // Depth exhausted: rebuild with a hard clip on the chord correction.
    staged.clear();
    double saved = acc.jcap;
    acc.jcap = 50.0;
    for (auto& t : kKuhnTets) {
      if (!march_tet(acc, c, t, staged)) {
        // Even at the hard clip some node is degenerate; skip that tet.
        acc.clipped++;
      }
    }
    acc.jcap = saved;
    acc.clipped++;
  }
  for (auto& n : staged) {
    KVec k{n[0], n[1], n[2], n[3], n[4]};
    acc.out->nodes.push_back(k);
    acc.out->weights.push_back(n[5]);
    acc.out->grad_norm.push_back(n[6]);
  }
}

}  // namespace

struct LevelSetSampler::Impl {
  BandFunction band;
  CriticalPointSet cps;
  SurfaceOptions opt;
  int dim;

  mutable bool grid_ready = false;
  mutable int n = 0;
  mutable double h = 0;
  mutable double org[5] = {0, 0, 0, 0, 0};
  mutable std::vector<double> corner;    // (n+1)^dim
  mutable std::vector<float> cmin, cmax; // per cell, n^dim
  mutable std::vector<double> rowmin, rowmax;

  Impl(BandFunction b, CriticalPointSet c, SurfaceOptions o)
      : band(std::move(b)), cps(std::move(c)), opt(o), dim(band.dim()) {}

  double corner_at(int i, int j, int k) const {
    if (dim == 2) return corner[static_cast<std::size_t>(j) * (n + 1) + i];
    return corner[(static_cast<std::size_t>(k) * (n + 1) + j) * (n + 1) + i];
  }

  void ensure_grid() const {
    if (grid_ready) return;
    n = opt.base_n > 0 ? opt.base_n : (dim == 2 ? 1024 : 32);
    h = kTwoPi / n;
    GridSpec g;
    g.dim = dim;
    for (int i = 0; i < dim; ++i) {
      g.npts[i] = n + 1;
      g.k0[i] = org[i] = kGridShift[i] * h;
      g.dk[i] = h;
    }
    corner.resize(g.total());
    fill_grid_values(band.folded(), g, corner.data());
    std::size_t ncell = 1;
    for (int i = 0; i < dim; ++i) ncell *= n;
    cmin.resize(ncell);
    cmax.resize(ncell);
    std::size_t nrow = (dim == 2) ? n : static_cast<std::size_t>(n) * n;
    rowmin.assign(nrow, 1e300);
    rowmax.assign(nrow, -1e300);
    if (dim == 2) {
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          double a = corner_at(i, j, 0), b2 = corner_at(i + 1, j, 0), c2 = corner_at(i + 1, j + 1, 0),
                 d2 = corner_at(i, j + 1, 0);
          double lo = std::min(std::min(a, b2), std::min(c2, d2));
          double hi = std::max(std::max(a, b2), std::max(c2, d2));
          // Float storage with a margin: marching re-tests exact doubles.
          double eps = 1e-5 * (std::fabs(lo) + std::fabs(hi) + 1);
          cmin[static_cast<std::size_t>(j) * n + i] = static_cast<float>(lo - eps);
          cmax[static_cast<std::size_t>(j) * n + i] = static_cast<float>(hi + eps);
          rowmin[j] = std::min(rowmin[j], lo);
          rowmax[j] = std::max(rowmax[j], hi);
        }
    } else {
      for (int kz = 0; kz < n; ++kz)
        for (int j = 0; j < n; ++j) {
          std::size_t row = static_cast<std::size_t>(kz) * n + j;
          for (int i = 0; i < n; ++i) {
            double lo = 1e300, hi = -1e300;
            for (int b = 0; b < 8; ++b) {
              double v = corner_at(i + (b & 1), j + ((b & 2) ? 1 : 0), kz + ((b & 4) ? 1 : 0));
              lo = std::min(lo, v);
              hi = std::max(hi, v);
            }
            double eps = 1e-5 * (std::fabs(lo) + std::fabs(hi) + 1);
            cmin[row * n + i] = static_cast<float>(lo - eps);
            cmax[row * n + i] = static_cast<float>(hi + eps);
            rowmin[row] = std::min(rowmin[row], lo);
            rowmax[row] = std::max(rowmax[row], hi);
          }
        }
    }
    grid_ready = true;
  }

  // Local grid around an extremum for energies close to a band edge.
  bool sample_near_edge(double E, SurfaceSample& out) const {
    bool near_min = std::fabs(E - cps.emin) <= std::fabs(E - cps.emax);
    const CriticalPoint& ext = near_min ? cps.minimum : cps.maximum;
    double dE = std::fabs(E - ext.energy);
    double hk[25];
    band.hess(ext.k.data(), hk);
    Eigen::MatrixXd H(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) H(i, j) = hk[i * dim + j];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    double lmin = es.eigenvalues().cwiseAbs().minCoeff();
    double r = 1.35 * std::sqrt(2 * dE / lmin);
    if (r > 1.2) return false;
    int ln = opt.extremum_n > 0 ? opt.extremum_n : (dim == 2 ? 192 : 28);
    double lh = 2 * r / ln;
    double s0[3] = {ext.k[0] - r + kGridShift[0] * lh, ext.k[1] - r + kGridShift[1] * lh,
                    ext.k[2] - r + kGridShift[2] * lh};
    Accum acc{&out, &band, E, opt.jacobian_cap, 0};
    if (dim == 2) {
      std::vector<double> vals((ln + 1) * (ln + 1));
      for (int j = 0; j <= ln; ++j)
        for (int i = 0; i <= ln; ++i) {
          double k[5] = {s0[0] + i * lh, s0[1] + j * lh, 0, 0, 0};
          vals[static_cast<std::size_t>(j) * (ln + 1) + i] = band.eval(k);
        }
      for (int j = 0; j < ln; ++j)
        for (int i = 0; i < ln; ++i) {
          Cell2 c;
          c.x0 = s0[0] + i * lh;
          c.y0 = s0[1] + j * lh;
          c.h = lh;
          c.v[0] = vals[static_cast<std::size_t>(j) * (ln + 1) + i];
          c.v[1] = vals[static_cast<std::size_t>(j) * (ln + 1) + i + 1];
          c.v[2] = vals[static_cast<std::size_t>(j + 1) * (ln + 1) + i + 1];
          c.v[3] = vals[static_cast<std::size_t>(j + 1) * (ln + 1) + i];
          march_cell_2d(acc, c, 0, opt.max_subdiv);
        }
    } else {
      std::vector<double> vals(static_cast<std::size_t>(ln + 1) * (ln + 1) * (ln + 1));
      for (int kz = 0; kz <= ln; ++kz)
        for (int j = 0; j <= ln; ++j)
          for (int i = 0; i <= ln; ++i) {
            double k[5] = {s0[0] + i * lh, s0[1] + j * lh, s0[2] + kz * lh, 0, 0};
            vals[(static_cast<std::size_t>(kz) * (ln + 1) + j) * (ln + 1) + i] = band.eval(k);
          }
      auto at = [&](int i, int j, int kz) {
        return vals[(static_cast<std::size_t>(kz) * (ln + 1) + j) * (ln + 1) + i];
      };
      for (int kz = 0; kz < ln; ++kz)
        for (int j = 0; j < ln; ++j)
          for (int i = 0; i < ln; ++i) {
            Cell3 c;
            c.o[0] = s0[0] + i * lh;
            c.o[1] = s0[1] + j * lh;
            c.o[2] = s0[2] + kz * lh;
            c.h = lh;
            for (int b = 0; b < 8; ++b)
              c.v[b] = at(i + (b & 1), j + ((b & 2) ? 1 : 0), kz + ((b & 4) ? 1 : 0));
            march_cell_3d(acc, c, 0, opt.max_subdiv);
          }
    }
    return true;
  }

  SurfaceSample sample_d1(double E) const {
    SurfaceSample out;
    out.dim = 1;
    out.energy = E;
    const int nscan = 8192;
    double prev = 0;
    for (int i = 0; i <= nscan; ++i) {
      double k[5] = {i * kTwoPi / nscan, 0, 0, 0, 0};
      double v = band.eval(k) - E;
      if (i > 0 && ((prev > 0) != (v > 0))) {
        double a = (i - 1) * kTwoPi / nscan, b = i * kTwoPi / nscan;
        for (int it = 0; it < 80; ++it) {
          double m = 0.5 * (a + b);
          double km[5] = {m, 0, 0, 0, 0};
          if ((band.eval(km) - E > 0) == (prev > 0))
            a = m;
          else
            b = m;
        }
        double k0 = 0.5 * (a + b);
        double kk[5] = {k0, 0, 0, 0, 0}, g[5];
        band.grad(kk, g);
        out.nodes.push_back(KVec{k0, 0, 0, 0, 0});
        out.weights.push_back(1.0);
        out.grad_norm.push_back(std::fabs(g[0]));
      }
      prev = v;
    }
    return out;
  }

  SurfaceSample sample(double E) const {
    if (E <= cps.emin || E >= cps.emax)
      throw NumericError("level set requested outside the open band (" + fmt17(E) + ")");
    SurfaceSample out;
    out.dim = dim;
    out.energy = E;
    if (dim == 1) return sample_d1(E);
    if (dim > 3) throw ConfigError("deterministic level-set sampling supports dim <= 3");

    double width = cps.emax - cps.emin;
    double edge_dist = std::min(E - cps.emin, cps.emax - E);
    if (edge_dist < opt.edge_window_frac * width) {
      if (sample_near_edge(E, out) && !out.nodes.empty()) return out;
      out.nodes.clear();
      out.weights.clear();
      out.grad_norm.clear();
    }

    ensure_grid();
    Accum acc{&out, &band, E, opt.jacobian_cap, 0};
    if (dim == 2) {
      for (int j = 0; j < n; ++j) {
        if (!(rowmin[j] < E && E <= rowmax[j])) continue;
        for (int i = 0; i < n; ++i) {
          std::size_t ci = static_cast<std::size_t>(j) * n + i;
          if (!(cmin[ci] < E && E <= cmax[ci])) continue;
          Cell2 c;
          c.x0 = org[0] + i * h;
          c.y0 = org[1] + j * h;
          c.h = h;
          c.v[0] = corner_at(i, j, 0);
          c.v[1] = corner_at(i + 1, j, 0);
          c.v[2] = corner_at(i + 1, j + 1, 0);
          c.v[3] = corner_at(i, j + 1, 0);
          march_cell_2d(acc, c, 0, opt.max_subdiv);
        }
      }
    } else {
      for (int kz = 0; kz < n; ++kz)
        for (int j = 0; j < n; ++j) {
          std::size_t row = static_cast<std::size_t>(kz) * n + j;
          if (!(rowmin[row] < E && E <= rowmax[row])) continue;
          for (int i = 0; i < n; ++i) {
            if (!(cmin[row * n + i] < E && E <= cmax[row * n + i])) continue;
            Cell3 c;
            c.o[0] = org[0] + i * h;
            c.o[1] = org[1] + j * h;
            c.o[2] = org[2] + kz * h;
            c.h = h;
            for (int b = 0; b < 8; ++b)
              c.v[b] = corner_at(i + (b & 1), j + ((b & 2) ? 1 : 0), kz + ((b & 4) ? 1 : 0));
            march_cell_3d(acc, c, 0, opt.max_subdiv);
          }
        }
    }
    if (out.nodes.empty()) {
      if (sample_near_edge(E, out) && !out.nodes.empty()) return out;
      throw NumericError("level set sampling produced no nodes at E=" + fmt17(E));
    }
    return out;
  }
};

LevelSetSampler::LevelSetSampler(const BandFunction& band, const CriticalPointSet& cps,
                                 SurfaceOptions opt)
    : impl_(std::make_unique<Impl>(band, cps, opt)) {}
LevelSetSampler::~LevelSetSampler() = default;
LevelSetSampler::LevelSetSampler(LevelSetSampler&&) noexcept = default;

SurfaceSample LevelSetSampler::sample(double E) const { return impl_->sample(E); }
const BandFunction& LevelSetSampler::band() const { return impl_->band; }
const CriticalPointSet& LevelSetSampler::critical_points() const { return impl_->cps; }

}  // namespace latscat
