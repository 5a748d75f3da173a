#include "latscat/band.h"

#include <algorithm>
#include <map>

#include <Eigen/Eigenvalues>

namespace latscat {

BandFunction::BandFunction(int dim, std::vector<BandCoeff> coeffs) : dim_(dim) {
  if (dim < 1 || dim > 5) throw ConfigError("band dimension must be in [1,5]");
  std::map<IVec, cplx> by_n;
  for (auto& bc : coeffs) {
    if (bc.n.dim != dim) throw ConfigError("band coefficient index has wrong dimension");
    by_n[bc.n] += bc.c;
  }
  for (auto& [n, c] : by_n) {
    auto it = by_n.find(-n);
    cplx conj_other = (it == by_n.end()) ? cplx(0, 0) : std::conj(it->second);
    if (std::abs(c - conj_other) > 1e-12 * std::max(1.0, std::abs(c)))
      throw ConfigError("band coefficients are not Hermitian: c(-n) != conj(c(n)) at n=" + n.str());
  }
  bool nonconst = false;
  for (auto& [n, c] : by_n) {
    if (std::abs(c) == 0.0) continue;
    coeffs_.push_back({n, c});
    if (n.dot(n) != 0) {
      support_.push_back(n);
      nonconst = true;
    }
  }
  if (!nonconst) throw ConfigError("band function is constant");

  folded_.dim = dim;
  folded_.c0 = 0;
  for (auto& bc : coeffs_) {
    if (bc.n.dot(bc.n) == 0) {
      folded_.c0 = bc.c.real();
      continue;
    }
    // Keep one representative per +-n pair: the lexicographically positive one.
    IVec neg = -bc.n;
    if (neg < bc.n) continue;
    // c_n e^{ikn} + conj(c_n) e^{-ikn} = 2 Re(c_n) cos(kn) - 2 Im(c_n) sin(kn)
    FoldedBand::Term t;
    t.n = bc.n;
    t.a = 2 * bc.c.real();
    t.b = -2 * bc.c.imag();
    folded_.terms.push_back(t);
  }
}

BandFunction BandFunction::laplacian(int dim) {
  std::vector<BandCoeff> cs;
  for (int j = 0; j < dim; ++j) {
    IVec e = IVec::zero(dim), me = IVec::zero(dim);
    e[j] = 1;
    me[j] = -1;
    cs.push_back({e, cplx(1, 0)});
    cs.push_back({me, cplx(1, 0)});
  }
  return BandFunction(dim, cs);
}

double BandFunction::eval(const double* k) const {
  double e = folded_.c0;
  for (const auto& t : folded_.terms) {
    double ph = t.n.dot(k);
    e += t.a * std::cos(ph) + t.b * std::sin(ph);
  }
  return e;
}

void BandFunction::grad(const double* k, double* g) const {
  for (int i = 0; i < dim_; ++i) g[i] = 0;
  for (const auto& t : folded_.terms) {
    double ph = t.n.dot(k);
    double d = -t.a * std::sin(ph) + t.b * std::cos(ph);
    for (int i = 0; i < dim_; ++i) g[i] += t.n[i] * d;
  }
}

void BandFunction::hess(const double* k, double* h) const {
  for (int i = 0; i < dim_ * dim_; ++i) h[i] = 0;
  for (const auto& t : folded_.terms) {
    double ph = t.n.dot(k);
    double d2 = -t.a * std::cos(ph) - t.b * std::sin(ph);
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) h[i * dim_ + j] += t.n[i] * t.n[j] * d2;
  }
}

double BandFunction::laplacian_at(const double* k) const {
  double s = 0;
  for (const auto& t : folded_.terms) {
    double ph = t.n.dot(k);
    double d2 = -t.a * std::cos(ph) - t.b * std::sin(ph);
    s += t.n.dot(t.n) * d2;
  }
  return s;
}

std::string BandFunction::canonical_string() const {
  std::string s = "band:d=" + std::to_string(dim_) + ";";
  for (const auto& bc : coeffs_) {
    s += bc.n.str() + "=" + fmt17(bc.c.real()) + "+" + fmt17(bc.c.imag()) + "i;";
  }
  return s;
}

namespace {

bool newton_critical(const BandFunction& band, KVec& k, int max_iter = 60) {
  int d = band.dim();
  for (int it = 0; it < max_iter; ++it) {
    double g[5], h[25];
    band.grad(k.data(), g);
    double gn = 0;
    for (int i = 0; i < d; ++i) gn += g[i] * g[i];
    gn = std::sqrt(gn);
    if (gn < 1e-13) return true;
    band.hess(k.data(), h);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> H(h, d, d);
    Eigen::Map<Eigen::VectorXd> G(g, d);
    Eigen::VectorXd step = H.fullPivLu().solve(-G);
    if (!step.allFinite()) return false;
    double sn = step.norm();
    if (sn > 0.5) step *= 0.5 / sn;
    for (int i = 0; i < d; ++i) k[i] += step[i];
  }
  return false;
}

}  // namespace

CriticalPointSet find_critical_points(const BandFunction& band, double tol_grad, double tol_hess) {
  int d = band.dim();
  int nseed = d <= 3 ? 16 : 8;
  CriticalPointSet out;

  std::vector<KVec> found;
  std::array<int, 5> idx{};
  for (;;) {
    KVec k{};
    for (int i = 0; i < d; ++i) k[i] = (idx[i] + 0.5) * kTwoPi / nseed;
    if (newton_critical(band, k)) {
      double g[5];
      band.grad(k.data(), g);
      double gn = 0;
      for (int i = 0; i < d; ++i) gn += g[i] * g[i];
      if (std::sqrt(gn) <= tol_grad) {
        for (int i = 0; i < d; ++i) k[i] = wrap_angle(k[i]);
        bool dup = false;
        for (auto& p : found)
          if (torus_dist(p, k, d) < 1e-6) {
            dup = true;
            break;
          }
        if (!dup) found.push_back(k);
      }
    }
    int ax = 0;
    for (; ax < d; ++ax) {
      if (++idx[ax] < nseed) break;
      idx[ax] = 0;
    }
    if (ax >= d) break;
  }
  if (found.empty()) throw NumericError("critical point search found no critical points");

  for (auto& k : found) {
    CriticalPoint cp;
    cp.k = k;
    cp.energy = band.eval(k.data());
    double h[25];
    band.hess(k.data(), h);
    Eigen::MatrixXd H(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) H(i, j) = h[i * d + j];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
    double lmin = es.eigenvalues().cwiseAbs().minCoeff();
    if (lmin < tol_hess * std::max(1.0, lmax))
      throw ConfigError("band is not Morse: degenerate Hessian at critical point near energy " +
                        fmt17(cp.energy));
    cp.index = (es.eigenvalues().array() < 0).count();
    cp.hess_det = es.eigenvalues().prod();
    double diag = H(0, 0);
    cp.isotropic = (H - diag * Eigen::MatrixXd::Identity(d, d)).norm() < 1e-9 * std::max(1.0, H.norm());
    out.points.push_back(cp);
  }
  std::sort(out.points.begin(), out.points.end(),
            [](const CriticalPoint& a, const CriticalPoint& b) { return a.energy < b.energy; });

  int nmin = 0, nmax = 0;
  for (auto& p : out.points) {
    if (p.index == 0) {
      ++nmin;
      out.minimum = p;
    }
    if (p.index == d) {
      ++nmax;
      out.maximum = p;
    }
  }
  if (nmin != 1 || nmax != 1)
    throw ConfigError("band must have a unique minimum and a unique maximum (found " +
                      std::to_string(nmin) + " minima, " + std::to_string(nmax) + " maxima)");
  out.emin = out.minimum.energy;
  out.emax = out.maximum.energy;

  for (auto& p : out.points) {
    bool dup = false;
    for (double v : out.critical_values)
      if (std::fabs(v - p.energy) < 1e-9 * std::max(1.0, std::fabs(p.energy))) {
        dup = true;
        break;
      }
    if (!dup) out.critical_values.push_back(p.energy);
  }
  std::sort(out.critical_values.begin(), out.critical_values.end());
  return out;
}

RescaledEnergyMap::RescaledEnergyMap(BandFunction band, const CriticalPointSet& cps)
    : band_(std::move(band)), cps_(cps) {
  emin_ = cps.emin;
  emax_ = cps.emax;
  er_ = 0.5 * (emin_ + emax_);
  delta_ = 0.5 * (emax_ - emin_);
}

bool RescaledEnergyMap::xhat_try(const double* k, double* out) const {
  int d = band_.dim();
  double g[5];
  band_.grad(k, g);
  double g2 = 0;
  for (int i = 0; i < d; ++i) g2 += g[i] * g[i];
  if (g2 < 1e-28) return false;
  double fac = F(band_.eval(k)) / g2;
  for (int i = 0; i < d; ++i) out[i] = fac * g[i];
  return true;
}

void RescaledEnergyMap::xhat(const double* k, double* out) const {
  if (!xhat_try(k, out)) throw NumericError("flow field evaluated at a critical point");
}

double RescaledEnergyMap::xhat_norm(const double* k) const {
  int d = band_.dim();
  double g[5];
  band_.grad(k, g);
  double g2 = 0;
  for (int i = 0; i < d; ++i) g2 += g[i] * g[i];
  if (g2 < 1e-28) throw NumericError("flow field evaluated at a critical point");
  return std::fabs(F(band_.eval(k))) / std::sqrt(g2);
}

bool RescaledEnergyMap::div_xhat_try(const double* k, double* out) const {
  int d = band_.dim();
  double g[5], h[25];
  band_.grad(k, g);
  band_.hess(k, h);
  double g2 = 0;
  for (int i = 0; i < d; ++i) g2 += g[i] * g[i];
  if (g2 < 1e-28) return false;
  double tr = 0, ghg = 0;
  for (int i = 0; i < d; ++i) {
    tr += h[i * d + i];
    for (int j = 0; j < d; ++j) ghg += g[i] * h[i * d + j] * g[j];
  }
  double E = band_.eval(k);
  *out = Fprime(E) + F(E) * (tr / g2 - 2 * ghg / (g2 * g2));
  return true;
}

double RescaledEnergyMap::div_xhat(const double* k) const {
  double v = 0;
  if (!div_xhat_try(k, &v))
    throw NumericError("flow divergence evaluated at a critical point");
  return v;
}

}  // namespace latscat
