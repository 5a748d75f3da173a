#include "latscat/impurity.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "json.hpp"

namespace latscat {

namespace {

constexpr double kRankCut = 1e-12;

void check_sites(int dim, const std::vector<IVec>& sites) {
  if (sites.empty()) throw ConfigError("impurity support is empty");
  std::set<IVec> seen;
  for (const IVec& s : sites) {
    if (s.dim != dim) throw ConfigError("impurity site dimension mismatch at " + s.str());
    if (!seen.insert(s).second) throw ConfigError("impurity site repeated: " + s.str());
  }
}

std::map<IVec, cplx> hopping_map(const BandFunction& band) {
  std::map<IVec, cplx> c;
  for (const BandCoeff& bc : band.coeffs()) {
    c[bc.n] = bc.c;
    c[-bc.n] = std::conj(bc.c);
  }
  return c;
}

cplx hop(const std::map<IVec, cplx>& c, const IVec& r) {
  auto it = c.find(r);
  return it == c.end() ? cplx(0, 0) : it->second;
}

// (E - H0) as a matrix between finite site sets, <row|(E - H0)|col>.
Eigen::MatrixXcd shifted_hopping(const std::map<IVec, cplx>& c, double E,
                                 const std::vector<IVec>& rows, const std::vector<IVec>& cols) {
  Eigen::MatrixXcd m(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) {
      cplx val = -hop(c, rows[i] - cols[j]);
      if (rows[i] == cols[j]) val += E;
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = val;
    }
  return m;
}

ResolventEval solve_with_flag(const Eigen::MatrixXcd& lhs, const Eigen::MatrixXcd& rhs) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(lhs, Eigen::ComputeThinU | Eigen::ComputeThinV);
  ResolventEval out;
  double smax = svd.singularValues()(0);
  double smin = svd.singularValues()(svd.singularValues().size() - 1);
  out.rcond = smax > 0 ? smin / smax : 0;
  out.candidate_eigenvalue = out.rcond < 1e-12;
  svd.setThreshold(1e-14);
  out.value = svd.solve(rhs);
  return out;
}

}  // namespace

void ImpurityModel::factor() {
  double herm = (v_ - v_.adjoint()).cwiseAbs().maxCoeff();
  if (herm > 1e-12 * std::max(1.0, v_.cwiseAbs().maxCoeff()))
    throw ConfigError("impurity coupling matrix is not Hermitian");
  v_ = ((v_ + v_.adjoint()) / 2).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(v_);
  norm_ = es.eigenvalues().cwiseAbs().maxCoeff();
  if (norm_ <= 0) throw ConfigError("impurity coupling matrix vanishes");
  std::vector<int> keep;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (std::fabs(es.eigenvalues()(i)) > kRankCut * norm_) keep.push_back(i);
  basis_.resize(v_.rows(), keep.size());
  strengths_.resize(keep.size());
  for (std::size_t j = 0; j < keep.size(); ++j) {
    basis_.col(j) = es.eigenvectors().col(keep[j]);
    strengths_(j) = es.eigenvalues()(keep[j]);
  }
}

ImpurityModel ImpurityModel::diagonal(int dim, std::vector<IVec> sites, const Eigen::VectorXd& v) {
  check_sites(dim, sites);
  if (v.size() != static_cast<Eigen::Index>(sites.size()))
    throw ConfigError("diagonal potential length does not match the site count");
  ImpurityModel m;
  m.dim_ = dim;
  m.kind_ = ImpurityKind::diagonal;
  m.sites_ = std::move(sites);
  m.core_ = m.sites_;
  m.v_ = v.cast<cplx>().asDiagonal();
  m.factor();
  return m;
}

ImpurityModel ImpurityModel::general(int dim, std::vector<IVec> sites, const Eigen::MatrixXcd& v) {
  check_sites(dim, sites);
  if (v.rows() != v.cols() || v.rows() != static_cast<Eigen::Index>(sites.size()))
    throw ConfigError("coupling matrix shape does not match the site count");
  ImpurityModel m;
  m.dim_ = dim;
  m.kind_ = ImpurityKind::general;
  m.sites_ = std::move(sites);
  m.core_ = m.sites_;
  m.v_ = v;
  m.factor();
  return m;
}

ImpurityModel ImpurityModel::barrier(const BandFunction& band, const std::vector<IVec>& block) {
  check_sites(band.dim(), block);
  std::set<IVec> in_block(block.begin(), block.end());
  std::set<IVec> ring;
  for (const IVec& x : block)
    for (const IVec& s : band.support()) {
      IVec y = x + s;
      if (!in_block.count(y)) ring.insert(y);
    }
  ImpurityModel m;
  m.dim_ = band.dim();
  m.kind_ = ImpurityKind::barrier;
  m.sites_ = block;
  m.sites_.insert(m.sites_.end(), ring.begin(), ring.end());
  m.core_ = block;
  auto c = hopping_map(band);
  Eigen::Index n = static_cast<Eigen::Index>(m.sites_.size());
  m.v_ = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      bool pi = in_block.count(m.sites_[i]) > 0, pj = in_block.count(m.sites_[j]) > 0;
      if (pi != pj) m.v_(i, j) = -hop(c, m.sites_[i] - m.sites_[j]);
    }
  m.factor();
  return m;
}

Eigen::MatrixXcd ImpurityModel::v_inverse() const {
  if (!invertible())
    throw ConfigError("impurity coupling matrix is singular; only its range is usable");
  return basis_ * strengths_.cwiseInverse().cast<cplx>().asDiagonal() * basis_.adjoint();
}

Eigen::MatrixXcd impurity_pencil(const ImpurityModel& m, const Eigen::MatrixXcd& g0) {
  Eigen::MatrixXcd w = m.strengths().cwiseInverse().cast<cplx>().asDiagonal();
  w -= m.range_basis().adjoint() * g0 * m.range_basis();
  return w;
}

ResolventEval perturbed_green(const ImpurityModel& m, const GreenBoundary& g, cplx z) {
  Eigen::MatrixXcd g0 = g.at(z);
  Eigen::MatrixXcd lhs = Eigen::MatrixXcd::Identity(g0.rows(), g0.cols()) - g0 * m.v();
  return solve_with_flag(lhs, g0);
}

ResolventEval perturbed_green_boundary(const ImpurityModel& m, const GreenBoundary& g, double E,
                                       int side) {
  Eigen::MatrixXcd g0 = g.boundary(E, side);
  Eigen::MatrixXcd lhs = Eigen::MatrixXcd::Identity(g0.rows(), g0.cols()) - g0 * m.v();
  return solve_with_flag(lhs, g0);
}

ResolventEval t_matrix(const ImpurityModel& m, const GreenBoundary& g, cplx z) {
  Eigen::MatrixXcd g0 = g.at(z);
  Eigen::MatrixXcd lhs = Eigen::MatrixXcd::Identity(g0.rows(), g0.cols()) - m.v() * g0;
  return solve_with_flag(lhs, m.v());
}

ResolventEval t_matrix_boundary(const ImpurityModel& m, const GreenBoundary& g, double E,
                                int side) {
  Eigen::MatrixXcd g0 = g.boundary(E, side);
  Eigen::MatrixXcd lhs = Eigen::MatrixXcd::Identity(g0.rows(), g0.cols()) - m.v() * g0;
  return solve_with_flag(lhs, m.v());
}

namespace {

Eigen::VectorXd pencil_eigs(const ImpurityModel& m, const GreenBoundary& g, double E) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(impurity_pencil(m, g.at(cplx(E, 0))),
                                                     Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

// Roots of the k-th pencil eigenvalue on one side of the band. Eigenvalues
// are nondecreasing in E off the spectrum (the derivative -B* G0' B is
// positive semidefinite), so each sorted eigenvalue crosses zero at most once
// and plain bisection applies.
void isolated_side(const ImpurityModel& m, const GreenBoundary& g, double edge, double far,
                   const BoundStateOptions& opt, std::vector<double>* roots) {
  int n = std::max(8, opt.outside_pts);
  double pad = far - edge;
  std::vector<double> es(n);
  for (int i = 0; i < n; ++i)
    es[i] = edge + pad * std::exp(std::log(1e-10) * (1.0 - double(i) / (n - 1)));
  std::vector<Eigen::VectorXd> lam(n);
  for (int i = 0; i < n; ++i) lam[i] = pencil_eigs(m, g, es[i]);
  int r = m.rank();
  double tol = opt.bisect_tol * (g.tab().emax() - g.tab().emin());
  // The scan runs from the edge outward, so the energies are increasing on
  // the upper side and decreasing on the lower one; a monotone branch can
  // cross zero in either direction along the index.
  for (int k = 0; k < r; ++k)
    for (int i = 0; i + 1 < n; ++i) {
      double la = lam[i](k), lb = lam[i + 1](k);
      if ((la < 0) == (lb < 0)) continue;
      double a = es[i], b = es[i + 1], fa = la;
      for (int it = 0; it < 200 && std::fabs(b - a) > tol; ++it) {
        double mid = (a + b) / 2;
        double fm = pencil_eigs(m, g, mid)(k);
        if ((fm < 0) == (fa < 0)) {
          a = mid;
          fa = fm;
        } else {
          b = mid;
        }
      }
      roots->push_back((a + b) / 2);
      break;
    }
}

struct StackedPencil {
  Eigen::MatrixXcd w_re;   // restricted real-part pencil, r x r
  Eigen::MatrixXcd rho_b;  // density matrix times range basis, n x r
  double sigma_min = 0, sigma_max = 0;
  // Normalization for kernel decisions. sigma_max alone degenerates for a
  // rank-one potential (the stack is a single column, so sigma_min equals
  // sigma_max) and near the band edges, where the whole stack vanishes with
  // the density; the inverse strengths keep the scale pinned there.
  double scale = 0;
  double rel() const { return scale > 0 ? sigma_min / scale : 0; }
};

StackedPencil stacked_pencil(const ImpurityModel& m, const GreenBoundary& g, double E) {
  StackedPencil p;
  p.w_re = impurity_pencil(m, g.real_boundary(E));
  p.rho_b = kPi * (g.rho(E) * m.range_basis());
  Eigen::MatrixXcd stack(p.w_re.rows() + p.rho_b.rows(), p.w_re.cols());
  stack << p.w_re, p.rho_b;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(stack);
  p.sigma_max = svd.singularValues()(0);
  p.sigma_min = svd.singularValues()(svd.singularValues().size() - 1);
  p.scale = std::max(p.sigma_max, m.strengths().cwiseInverse().cwiseAbs().maxCoeff());
  return p;
}

double golden_min(const std::function<double(double)>& f, double a, double b, int iters) {
  const double kInvPhi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - kInvPhi * (b - a), x2 = a + kInvPhi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = f(x2);
    }
  }
  return f1 < f2 ? x1 : x2;
}

// Kernel columns of a matrix: right singular vectors with sigma < cut.
Eigen::MatrixXcd kernel_columns(const Eigen::MatrixXcd& m, double cut) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinV);
  int total = static_cast<int>(svd.singularValues().size());
  int q = 0;
  while (q < total && svd.singularValues()(total - 1 - q) < cut) ++q;
  return svd.matrixV().rightCols(q);
}

int matrix_rank(const Eigen::MatrixXcd& m, double rel_cut) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  double smax = svd.singularValues()(0);
  if (smax <= 0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > rel_cut * smax) ++r;
  return r;
}

ThresholdReport threshold_edge(const ImpurityModel& m, const GreenBoundary& g, double edge,
                               const KVec& kstar, const BoundStateOptions& opt) {
  ThresholdReport t;
  t.energy = edge;
  if (m.dim() < 3) return t;
  Eigen::MatrixXcd w = impurity_pencil(m, g.real_boundary(edge));
  double scale = std::max(w.cwiseAbs().maxCoeff(),
                          m.strengths().cwiseInverse().cwiseAbs().maxCoeff());
  Eigen::MatrixXcd c = kernel_columns(w, opt.kernel_tol * scale * w.rows());
  t.space_dim = static_cast<int>(c.cols());
  if (t.space_dim == 0) return t;
  Eigen::MatrixXcd vecs = m.range_basis() * c;
  int order = std::max(0, 5 - m.dim());
  if (order == 0) {
    t.eigen_mult = t.space_dim;
    return t;
  }
  // Taylor moments of v(k) = sum_n v_n e^{i k.n} at the extremal momentum:
  // degree 0 row, then the d degree 1 rows when order 2 is required.
  Eigen::MatrixXcd mo(order > 1 ? 1 + m.dim() : 1, m.nsites());
  for (int j = 0; j < m.nsites(); ++j) {
    cplx ph = std::exp(cplx(0, m.sites()[j].dot(kstar.data())));
    mo(0, j) = ph;
    if (order > 1)
      for (int a = 0; a < m.dim(); ++a) mo(1 + a, j) = double(m.sites()[j][a]) * ph;
  }
  int res = matrix_rank(mo * vecs, 1e-8);
  t.eigen_mult = t.space_dim - res;
  t.resonance_mult = res;
  return t;
}

}  // namespace

BoundStateReport find_bound_states(const ImpurityModel& m, const GreenBoundary& g,
                                   const BandFunction& band, const BoundStateOptions& opt) {
  if (band.dim() != m.dim() || g.tab().dim() != m.dim())
    throw ConfigError("impurity, band, and Green dimensions disagree");
  BoundStateReport rep;
  const double emin = g.tab().emin(), emax = g.tab().emax(), width = emax - emin;
  double pad = opt.pad > 0 ? opt.pad : m.norm() + 1;

  std::vector<double> roots;
  isolated_side(m, g, emax, emax + pad, opt, &roots);
  {
    std::vector<double> below;
    isolated_side(m, g, emin, emin - pad, opt, &below);
    roots.insert(roots.end(), below.begin(), below.end());
  }
  std::sort(roots.begin(), roots.end());
  double cluster = std::max(1e-8 * width, 10 * opt.bisect_tol * width);
  for (std::size_t i = 0; i < roots.size();) {
    std::size_t j = i + 1;
    while (j < roots.size() && roots[j] - roots[j - 1] < cluster) ++j;
    IsolatedState st;
    st.multiplicity = static_cast<int>(j - i);
    st.energy = 0;
    for (std::size_t t = i; t < j; ++t) st.energy += roots[t];
    st.energy /= st.multiplicity;
    Eigen::MatrixXcd w = impurity_pencil(m, g.at(cplx(st.energy, 0)));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(w);
    // The eigenvalues crossing zero here are the cluster just bisected.
    std::vector<int> idx(es.eigenvalues().size());
    for (std::size_t t = 0; t < idx.size(); ++t) idx[t] = static_cast<int>(t);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      return std::fabs(es.eigenvalues()(a)) < std::fabs(es.eigenvalues()(b));
    });
    Eigen::MatrixXcd cols(m.rank(), st.multiplicity);
    for (int t = 0; t < st.multiplicity; ++t) cols.col(t) = es.eigenvectors().col(idx[t]);
    st.amplitudes = m.range_basis() * cols;
    st.wavefunction = g.at(cplx(st.energy, 0)) * st.amplitudes;
    rep.isolated.push_back(std::move(st));
    i = j;
  }

  // In-band scan: joint kernel of the real-part pencil and the density
  // matrix, over the density knot grid.
  const std::vector<double>& knots = g.tab().knots();
  std::vector<double> grid;
  const double margin = opt.edge_margin * width;
  for (std::size_t i = 1; i + 1 < knots.size(); i += std::max(1, opt.inside_stride))
    if (knots[i] > emin + margin && knots[i] < emax - margin) grid.push_back(knots[i]);
  std::vector<double> rel(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) rel[i] = stacked_pencil(m, g, grid[i]).rel();
  const double coarse = 0.05;
  auto rel_at = [&](double E) { return stacked_pencil(m, g, E).rel(); };
  std::vector<double> refined;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    bool lmin = (i == 0 || rel[i] <= rel[i - 1]) && (i + 1 == grid.size() || rel[i] <= rel[i + 1]);
    if (!lmin || rel[i] >= coarse) continue;
    double a = i > 0 ? grid[i - 1] : grid[i];
    double b = i + 1 < grid.size() ? grid[i + 1] : grid[i];
    double e0 = golden_min(rel_at, a, b, 90);
    // Sharpen with a sign change of the real-part determinant restricted to
    // the density kernel, when that kernel is stable around the minimum.
    StackedPencil p0 = stacked_pencil(m, g, e0);
    double rho_scale = std::max(p0.rho_b.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::MatrixXcd kb = kernel_columns(p0.rho_b, opt.embed_accept * rho_scale * p0.rho_b.rows());
    if (kb.cols() > 0) {
      auto gdet = [&](double E) {
        Eigen::MatrixXcd wr = impurity_pencil(m, g.real_boundary(E));
        return (kb.adjoint() * wr * kb).determinant().real();
      };
      double h = std::max(10 * opt.bisect_tol * width, 1e-7 * width);
      double ga = gdet(e0 - h), gb = gdet(e0 + h);
      if (ga == 0 || gb == 0 || (ga < 0) != (gb < 0)) {
        double x = e0 - h, y = e0 + h;
        for (int it = 0; it < 120 && y - x > opt.bisect_tol * width; ++it) {
          double mid = (x + y) / 2;
          double gm = gdet(mid);
          if (gm == 0) {
            x = y = mid;
            break;
          }
          ((gm < 0) == (ga < 0) ? x : y) = mid;
        }
        e0 = (x + y) / 2;
      }
    }
    refined.push_back(e0);
  }
  std::sort(refined.begin(), refined.end());
  for (std::size_t i = 0; i < refined.size(); ++i) {
    if (i > 0 && refined[i] - refined[i - 1] < cluster) continue;
    StackedPencil p = stacked_pencil(m, g, refined[i]);
    Eigen::MatrixXcd stack(p.w_re.rows() + p.rho_b.rows(), p.w_re.cols());
    stack << p.w_re, p.rho_b;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(stack, Eigen::ComputeThinV);
    double cut = opt.embed_accept * p.scale;
    int q = 0;
    bool gap_unclear = false;
    for (Eigen::Index t = 0; t < svd.singularValues().size(); ++t) {
      double s = svd.singularValues()(t);
      if (s < cut) ++q;
      else if (s < 10 * cut) gap_unclear = true;
    }
    if (q == 0) continue;
    EmbeddedState st;
    st.energy = refined[i];
    st.multiplicity = q;
    st.warning = gap_unclear;
    st.amplitudes = m.range_basis() * svd.matrixV().rightCols(q);
    double h = 1e-5 * width;
    double s1 = stacked_pencil(m, g, refined[i] + h).sigma_min;
    double s2 = stacked_pencil(m, g, refined[i] + 2 * h).sigma_min;
    st.first_order_zero = s1 > 0 && s2 / s1 > 1.5 && s2 / s1 < 2.5;
    rep.warnings = rep.warnings || st.warning;
    rep.embedded.push_back(std::move(st));
  }

  CriticalPointSet cps = find_critical_points(band);
  rep.at_min = threshold_edge(m, g, emin, cps.minimum.k, opt);
  rep.at_max = threshold_edge(m, g, emax, cps.maximum.k, opt);

  rep.n_total = rep.at_min.eigen_mult + rep.at_max.eigen_mult;
  for (const IsolatedState& s : rep.isolated) rep.n_total += s.multiplicity;
  for (const EmbeddedState& s : rep.embedded) rep.n_total += s.multiplicity;
  return rep;
}

EmbeddedSearchResult embedded_eigenvector_search(const BandFunction& band,
                                                 const std::vector<IVec>& lambda,
                                                 const EmbeddedSearchOptions& opt) {
  check_sites(band.dim(), lambda);
  EmbeddedSearchResult out;
  out.interior = lattice::s_interior(lattice::lattice_hull(lambda), band.support());
  int ni = static_cast<int>(out.interior.size());
  if (ni == 0) return out;

  auto c = hopping_map(band);
  std::set<IVec> in_lambda(lambda.begin(), lambda.end());
  std::set<IVec> row_set;
  for (const IVec& x : out.interior) {
    if (!in_lambda.count(x)) row_set.insert(x);
    for (const IVec& s : band.support()) {
      IVec y = x + s;
      if (!in_lambda.count(y)) row_set.insert(y);
    }
  }
  std::vector<IVec> rows(row_set.begin(), row_set.end());

  CriticalPointSet cps = find_critical_points(band);
  if (rows.empty()) {
    // Every interior vector already maps into the support: the residual
    // operator vanishes identically and all of ell^2(interior) qualifies.
    out.generic_dim = ni;
    out.persistent = Eigen::MatrixXcd::Identity(ni, ni);
    for (int i = 0; i < opt.grid; ++i) {
      double E = cps.emin + (cps.emax - cps.emin) * (i + 0.5) / opt.grid;
      out.scan.push_back({E, ni, std::numeric_limits<double>::infinity()});
    }
    return out;
  }

  auto residual = [&](double E) { return shifted_hopping(c, E, rows, out.interior); };
  auto svals = [&](double E) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(residual(E));
    return Eigen::VectorXd(svd.singularValues());
  };
  std::vector<Eigen::VectorXd> sig(opt.grid);
  std::vector<double> grid(opt.grid);
  out.generic_dim = ni;
  for (int i = 0; i < opt.grid; ++i) {
    grid[i] = cps.emin + (cps.emax - cps.emin) * (i + 0.5) / opt.grid;
    sig[i] = svals(grid[i]);
    double smax = std::max(sig[i](0), 1.0);
    int q = 0;
    while (q < sig[i].size() && sig[i](sig[i].size() - 1 - q) < opt.kernel_tol * smax) ++q;
    out.scan.push_back({grid[i], q, q < sig[i].size() ? sig[i](sig[i].size() - 1 - q)
                                                      : std::numeric_limits<double>::infinity()});
    out.generic_dim = std::min(out.generic_dim, q);
  }

  // Exceptional energies: minima of the first singular value above the
  // generic kernel.
  auto probe = [&](double E) {
    Eigen::VectorXd s = svals(E);
    return s(s.size() - 1 - out.generic_dim);
  };
  for (int i = 0; i < opt.grid; ++i) {
    double f = out.scan[i].next_sigma;
    if (i > 0 && out.scan[i - 1].next_sigma < f) continue;
    if (i + 1 < opt.grid && out.scan[i + 1].next_sigma < f) continue;
    double smax = std::max(sig[i](0), 1.0);
    if (f >= 0.05 * smax) continue;
    double a = i > 0 ? grid[i - 1] : grid[i];
    double b = i + 1 < opt.grid ? grid[i + 1] : grid[i];
    double e0 = golden_min(probe, a, b, 90);
    if (probe(e0) < opt.kernel_tol * smax &&
        (out.exceptional.empty() ||
         e0 - out.exceptional.back() > opt.refine_tol * (cps.emax - cps.emin) * 100))
      out.exceptional.push_back(e0);
  }

  // Kernel vectors surviving at every energy: kernel of a few stacked
  // residual matrices at generic energies.
  if (out.generic_dim > 0) {
    std::vector<double> es;
    for (int t = 0; t < 5; ++t)
      es.push_back(cps.emin + (cps.emax - cps.emin) * (0.13 + 0.19 * t));
    Eigen::MatrixXcd stack(static_cast<Eigen::Index>(rows.size()) * es.size(), ni);
    for (std::size_t t = 0; t < es.size(); ++t)
      stack.middleRows(static_cast<Eigen::Index>(t * rows.size()), rows.size()) = residual(es[t]);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(stack, Eigen::ComputeThinV);
    double smax = std::max(svd.singularValues()(0), 1.0);
    out.persistent = kernel_columns(stack, opt.kernel_tol * smax);
  } else {
    out.persistent = Eigen::MatrixXcd(ni, 0);
  }
  return out;
}

Eigen::VectorXcd interior_candidate(const BandFunction& band, const std::vector<IVec>& lambda,
                                    const std::vector<IVec>& interior, const Eigen::VectorXcd& w,
                                    double E) {
  if (w.size() != static_cast<Eigen::Index>(interior.size()))
    throw ConfigError("interior vector length does not match the interior site count");
  auto c = hopping_map(band);
  return shifted_hopping(c, E, lambda, interior) * w;
}

NoEmbeddedCertificate no_embedded_check(const ImpurityModel& m, const BandFunction& band) {
  if (m.kind() != ImpurityKind::diagonal)
    throw ConfigError("the no-embedded-eigenvalue certificate needs a diagonal potential");
  for (int i = 0; i < m.nsites(); ++i)
    if (std::abs(m.v()(i, i)) == 0)
      throw ConfigError("the no-embedded-eigenvalue certificate needs every on-site entry nonzero");
  NoEmbeddedCertificate cert;
  cert.chain = lattice::shrink_chain(m.sites(), band.support());
  cert.certified = cert.chain.empty_terminated;
  return cert;
}

std::string to_json(const BoundStateReport& r) {
  nlohmann::json j;
  auto vec_list = [](const Eigen::MatrixXcd& m) {
    nlohmann::json cols = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      nlohmann::json col = nlohmann::json::array();
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        col.push_back({m(i, c).real(), m(i, c).imag()});
      cols.push_back(col);
    }
    return cols;
  };
  j["isolated"] = nlohmann::json::array();
  for (const IsolatedState& s : r.isolated)
    j["isolated"].push_back({{"energy", s.energy},
                             {"multiplicity", s.multiplicity},
                             {"amplitudes", vec_list(s.amplitudes)}});
  j["embedded"] = nlohmann::json::array();
  for (const EmbeddedState& s : r.embedded)
    j["embedded"].push_back({{"energy", s.energy},
                             {"multiplicity", s.multiplicity},
                             {"amplitudes", vec_list(s.amplitudes)},
                             {"warning", s.warning},
                             {"first_order_zero", s.first_order_zero}});
  auto thr = [](const ThresholdReport& t) {
    return nlohmann::json{{"energy", t.energy},
                          {"space_dim", t.space_dim},
                          {"eigen_mult", t.eigen_mult},
                          {"resonance_mult", t.resonance_mult}};
  };
  j["threshold"] = {{"minus", thr(r.at_min)}, {"plus", thr(r.at_max)}};
  j["N_total"] = r.n_total;
  j["warnings"] = r.warnings;
  return j.dump(2);
}

}  // namespace latscat
