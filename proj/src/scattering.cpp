#include "latscat/scattering.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "json.hpp"

#include "latscat/green.h"

namespace latscat {

namespace {

double principal(double x) {
  while (x > kPi) x -= kTwoPi;
  while (x <= -kPi) x += kTwoPi;
  return x;
}

cplx unit(cplx z) {
  double r = std::abs(z);
  return r > 0 ? z / r : cplx(1, 0);
}

}  // namespace

ScatteringFiber fiber_at_energy(const ImpurityModel& m, const GreenBoundary& g, double E,
                                const FiberOptions& opt) {
  const SpectralDensityMatrix& tab = g.tab();
  if (E < tab.emin() || E > tab.emax())
    throw ConfigError("fiber energy outside the tabulated band");

  ScatteringFiber f;
  f.energy = E;
  const double wid = tab.emax() - tab.emin();
  // Clamp the edge logarithm; tanh saturates long before the clamp matters.
  const double eps_w = 1e-18 * wid;
  f.b = 0.5 * std::log(std::max(E - tab.emin(), eps_w) / std::max(tab.emax() - E, eps_w));

  const int n = g.nsites();
  const Eigen::MatrixXcd bmat = kPi * g.rho(E);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eb(bmat);
  const Eigen::VectorXd& ev = eb.eigenvalues();
  const double top = ev(n - 1);

  int rank = 0;
  if (top > 0) {
    const double cut = opt.rank_cutoff * top;
    for (int i = 0; i < n; ++i) {
      if (ev(i) > cut) ++rank;
      if (ev(i) > cut / 10 && ev(i) < cut * 10) f.rank_ambiguous = true;
    }
  }
  f.rank = rank;
  f.basis.resize(n, rank);
  f.o_matrix.resize(n, rank);
  f.c_matrix.resize(rank, rank);
  f.s_block.resize(rank, rank);
  if (rank == 0) return f;

  f.basis = eb.eigenvectors().rightCols(rank);
  const Eigen::VectorXd d = ev.tail(rank);

  Eigen::MatrixXcd a = m.v_inverse() - g.real_boundary(E);
  a = ((a + a.adjoint()) / 2).eval();

  const Eigen::VectorXd dh = d.cwiseSqrt();
  const Eigen::VectorXd dih = dh.cwiseInverse();
  Eigen::MatrixXcd c = dih.asDiagonal() * (f.basis.adjoint() * a * f.basis) * dih.asDiagonal();
  f.c_matrix = ((c + c.adjoint()) / 2).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ec(f.c_matrix);
  Eigen::VectorXcd cayley(rank);
  cplx det(1, 0);
  for (int j = 0; j < rank; ++j) {
    cplx cj(ec.eigenvalues()(j), 0);
    cplx s = unit((cj - cplx(0, 1)) / (cj + cplx(0, 1)));
    cayley(j) = s;
    det *= s;
  }
  f.s_block = ec.eigenvectors() * cayley.asDiagonal() * ec.eigenvectors().adjoint();
  f.phase_det = unit(det);

  // Outgoing coupling (A + i B)^{-1} basis d^{1/2} / (2 cosh(b/2)). At an
  // embedded energy A + i B is singular but the columns lie in the range;
  // the thresholded least-squares solve returns the component orthogonal to
  // the joint kernel, which is the restricted inverse there.
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a + cplx(0, 1) * bmat,
                                         Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(opt.singular_rel);
  if (svd.rank() < n) f.restricted_inverse = true;
  f.o_matrix = svd.solve(Eigen::MatrixXcd(f.basis * dh.asDiagonal())) / (2 * std::cosh(f.b / 2));
  return f;
}

ScatteringFiber fiber_at(const ImpurityModel& m, const GreenBoundary& g, double b,
                         const FiberOptions& opt) {
  const SpectralDensityMatrix& tab = g.tab();
  const double er = (tab.emin() + tab.emax()) / 2;
  const double delta = (tab.emax() - tab.emin()) / 2;
  ScatteringFiber f = fiber_at_energy(m, g, er + delta * std::tanh(b), opt);
  f.b = b;
  return f;
}

Eigen::MatrixXcd restricted_inverse_apply(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b,
                                          const Eigen::MatrixXcd& v, double rel_tol) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a + cplx(0, 1) * b,
                                         Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(rel_tol);
  return svd.solve(v);
}

cplx wave_operator_kernel(const Eigen::MatrixXcd& t_at_kp, const std::vector<IVec>& sites,
                          const BandFunction& band, const KVec& k, const KVec& kp, int side,
                          double eps) {
  if (eps <= 0) throw ConfigError("wave operator kernel requires eps > 0");
  const int n = static_cast<int>(sites.size());
  if (t_at_kp.rows() != n || t_at_kp.cols() != n)
    throw ConfigError("T matrix size does not match the site count");
  const double ek = band.eval(k.data());
  const double ekp = band.eval(kp.data());
  Eigen::VectorXcd left(n), right(n);
  for (int i = 0; i < n; ++i) {
    left(i) = std::polar(1.0, sites[i].dot(k.data()));
    right(i) = std::polar(1.0, -sites[i].dot(kp.data()));
  }
  const cplx z(ekp, side > 0 ? -eps : eps);
  return (left.transpose() * t_at_kp * right).value() / (z - ek);
}

cplx wave_operator_kernel(const ImpurityModel& m, const GreenBoundary& g,
                          const BandFunction& band, const KVec& k, const KVec& kp, int side,
                          double eps) {
  if (eps <= 0) throw ConfigError("wave operator kernel requires eps > 0");
  const cplx z(band.eval(kp.data()), side > 0 ? -eps : eps);
  return wave_operator_kernel(t_matrix(m, g, z).value, g.sites(), band, k, kp, side, eps);
}

double time_delay_trace(const ImpurityModel& m, const GreenBoundary& g, double E,
                        const TimeDelayOptions& opt, bool* warning) {
  if (warning) *warning = false;
  const SpectralDensityMatrix& tab = g.tab();
  if (E <= tab.emin() || E >= tab.emax())
    throw ConfigError("time delay requires an interior band energy");

  std::vector<double> marks = tab.singular_energies();
  marks.push_back(tab.emin());
  marks.push_back(tab.emax());

  auto phase = [&](double e) { return std::arg(fiber_at_energy(m, g, e, {}).phase_det); };

  double h = opt.h;
  for (;;) {
    // One-sided away from the nearest marked energy when the stencil would
    // straddle or leave the band.
    double nearest = marks[0];
    for (double s : marks)
      if (std::fabs(E - s) < std::fabs(E - nearest)) nearest = s;
    bool onesided = std::fabs(E - nearest) < 3 * h;
    if (E - h <= tab.emin() || E + h >= tab.emax()) onesided = true;

    if (!onesided) {
      const double p0 = phase(E);
      const double d1 = principal(p0 - phase(E - h));
      const double d2 = principal(phase(E + h) - p0);
      if (std::max(std::fabs(d1), std::fabs(d2)) <= opt.max_step) return (d1 + d2) / (2 * h);
    } else {
      const double dir = E >= nearest ? 1.0 : -1.0;
      double hh = h;
      if (dir > 0) hh = std::min(hh, (tab.emax() - E) / 2.5);
      if (dir < 0) hh = std::min(hh, (E - tab.emin()) / 2.5);
      if (hh < opt.h_min) throw NumericError("no room for a one-sided time-delay stencil");
      const double p0 = phase(E);
      const double u1 = principal(phase(E + dir * hh) - p0);
      const double u2 = principal(phase(E + 2 * dir * hh) - phase(E + dir * hh));
      if (std::max(std::fabs(u1), std::fabs(u2)) <= opt.max_step) {
        if (warning) *warning = true;
        return dir * (3 * u1 - u2) / (2 * hh);
      }
    }
    h /= 2;
    if (h < opt.h_min) throw NumericError("time-delay phase step failed to settle");
  }
}

cplx resolvent_trace_difference(const ImpurityModel& m, const GreenBoundary& g, cplx z) {
  if (z.imag() == 0 && z.real() >= g.tab().emin() && z.real() <= g.tab().emax())
    throw ConfigError("resolvent trace difference needs z off the band");
  const Eigen::MatrixXcd w = m.v_inverse() - g.at(z);
  return -(w.partialPivLu().solve(g.deriv(z))).trace();
}

double spectral_time_delay(const ImpurityModel& m, const GreenBoundary& g, double E,
                           double eps0) {
  if (eps0 <= 0) throw ConfigError("spectral time delay requires eps0 > 0");
  auto t = [&](double e) {
    return 2 * std::imag(resolvent_trace_difference(m, g, cplx(E, -e)));
  };
  const double t1 = t(eps0), t2 = t(eps0 / 2), t3 = t(eps0 / 4);
  const double r1 = 2 * t2 - t1, r2 = 2 * t3 - t2;
  return (4 * r2 - r1) / 3;
}

CornerReport corner_operators(const ImpurityModel& m, const ThresholdReport& threshold, int side,
                              const CornerOptions& opt) {
  if (m.dim() == 3 && threshold.resonance_mult >= 2)
    throw ConfigError("corner data undefined for resonance multiplicity >= 2 in dimension 3");
  CornerReport r;
  if (m.dim() != 3 || threshold.resonance_mult != 1) return r;

  r.trivial = false;
  const double sgn = side > 0 ? 1.0 : -1.0;
  auto factor = [&](double aa) {
    const cplx e(std::exp(kPi * aa), 0);
    return (e - cplx(0, sgn)) / (e + cplx(0, sgn));
  };
  const int npts = std::max(opt.grid, 3);
  double total = 0;
  double prev = std::arg(factor(-opt.a_max));
  for (int i = 1; i < npts; ++i) {
    const double aa = -opt.a_max + 2 * opt.a_max * i / (npts - 1);
    const double cur = std::arg(factor(aa));
    total += principal(cur - prev);
    prev = cur;
  }
  r.rotation = total / kTwoPi;
  r.trace = side > 0 ? r.rotation : -r.rotation;
  r.factor_lo = factor(-opt.a_max);
  r.factor_hi = factor(opt.a_max);
  return r;
}

namespace {

struct PhaseNode {
  double e, ps, pw;
};

// Phases of det s_block and, independently, of det(P (V^{-1} - G(E-i0)) P)
// computed by a plain LU determinant on the density-range basis.
class PhaseWalker {
 public:
  PhaseWalker(const ImpurityModel& m, const GreenBoundary& g, const LevinsonOptions& opt)
      : m_(m), g_(g), opt_(opt), vinv_(m.v_inverse()) {
    wid_ = g.tab().emax() - g.tab().emin();
  }

  PhaseNode eval(double e) {
    ++evals_;
    if (evals_ > 400000) throw NumericError("Levinson phase walk exceeded its evaluation budget");
    ScatteringFiber f = fiber_at_energy(m_, g_, e, {});
    PhaseNode n{e, std::arg(f.phase_det), 0};
    if (f.rank > 0) {
      const Eigen::MatrixXcd wm =
          f.basis.adjoint() * (vinv_ - g_.boundary(e, -1)) * f.basis;
      n.pw = std::arg(wm.partialPivLu().determinant());
    }
    return n;
  }

  // Winding of both phases over [a, b], refined until adjacent principal
  // steps fall below max_step. Returns the endpoint nodes.
  void walk(double a, double b, double* wind_s, double* wind_w, PhaseNode* first,
            PhaseNode* last) {
    std::vector<PhaseNode> nodes;
    const int base =
        std::max(9, static_cast<int>(std::lround(opt_.grid * (b - a) / wid_)));
    std::vector<double> xs;
    xs.reserve(base + 8);
    for (int i = 0; i < base; ++i) xs.push_back(a + (b - a) * i / (base - 1));
    for (double s : g_.tab().singular_energies())
      if (s > a && s < b) xs.push_back(s);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    nodes.reserve(xs.size());
    for (double x : xs) nodes.push_back(eval(x));

    const double floor = opt_.min_interval * wid_;
    for (int pass = 0; pass < 60; ++pass) {
      std::vector<PhaseNode> out;
      out.reserve(nodes.size() * 2);
      bool split = false;
      for (size_t i = 0; i + 1 < nodes.size(); ++i) {
        out.push_back(nodes[i]);
        const double d1 = principal(nodes[i + 1].ps - nodes[i].ps);
        const double d2 = principal(nodes[i + 1].pw - nodes[i].pw);
        if ((std::fabs(d1) > opt_.max_step || std::fabs(d2) > opt_.max_step) &&
            nodes[i + 1].e - nodes[i].e > floor) {
          out.push_back(eval((nodes[i].e + nodes[i + 1].e) / 2));
          split = true;
        }
      }
      out.push_back(nodes.back());
      nodes.swap(out);
      if (!split) break;
    }

    double ws = 0, ww = 0;
    for (size_t i = 0; i + 1 < nodes.size(); ++i) {
      ws += principal(nodes[i + 1].ps - nodes[i].ps);
      ww += principal(nodes[i + 1].pw - nodes[i].pw);
    }
    *wind_s = ws;
    *wind_w = ww;
    *first = nodes.front();
    *last = nodes.back();
  }

  int evals() const { return evals_; }

 private:
  const ImpurityModel& m_;
  const GreenBoundary& g_;
  LevinsonOptions opt_;
  Eigen::MatrixXcd vinv_;
  double wid_ = 0;
  int evals_ = 0;
};

}  // namespace

LevinsonLedger levinson_check(const ImpurityModel& m, const GreenBoundary& g,
                              const BandFunction& band, const BoundStateReport& report,
                              const LevinsonOptions& opt, double tolerance) {
  (void)band;
  const SpectralDensityMatrix& tab = g.tab();
  const double wid = tab.emax() - tab.emin();
  const double lo = tab.emin() + opt.edge_offset * wid;
  const double hi = tab.emax() - opt.edge_offset * wid;
  if (!(lo < hi)) throw ConfigError("edge offset leaves no band interior");

  LevinsonLedger led;
  led.n_bound = report.n_total;
  const CornerReport cp = corner_operators(m, report.at_max, +1);
  const CornerReport cm = corner_operators(m, report.at_min, -1);
  led.corner_plus = cp.trace;
  led.corner_minus = cm.trace;
  led.rhs = -(cp.trace + cm.trace);

  // Excluded windows around embedded energies, merged and clipped.
  std::vector<std::pair<double, double>> wins;
  for (const EmbeddedState& es : report.embedded) {
    const double w = opt.embed_window * wid;
    const double a = std::max(es.energy - w, lo);
    const double b = std::min(es.energy + w, hi);
    if (a < b) wins.emplace_back(a, b);
  }
  std::sort(wins.begin(), wins.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& w : wins) {
    if (!merged.empty() && w.first <= merged.back().second)
      merged.back().second = std::max(merged.back().second, w.second);
    else
      merged.push_back(w);
  }

  std::vector<std::pair<double, double>> segs;
  double cursor = lo;
  for (const auto& w : merged) {
    if (cursor < w.first) segs.emplace_back(cursor, w.first);
    cursor = w.second;
  }
  if (cursor < hi) segs.emplace_back(cursor, hi);
  if (segs.empty()) throw ConfigError("embedded windows cover the whole band");

  PhaseWalker walker(m, g, opt);
  double tot_s = 0, tot_w = 0, seg_s = 0;
  double discarded = 0, measured = 0;
  PhaseNode prev_last{0, 0, 0};
  bool have_prev = false;
  for (const auto& seg : segs) {
    double ws = 0, ww = 0;
    PhaseNode first{0, 0, 0}, last{0, 0, 0};
    walker.walk(seg.first, seg.second, &ws, &ww, &first, &last);
    if (have_prev) {
      // Stitch across the excluded window with principal differences: the
      // exact phase change across it is small, so any integer turns seen by
      // a walk through the window are tabulation artifacts.
      const double ds = principal(first.ps - prev_last.ps);
      const double dw = principal(first.pw - prev_last.pw);
      tot_s += ds;
      tot_w += dw;
      double ms = 0, mw = 0;
      PhaseNode wf{0, 0, 0}, wl{0, 0, 0};
      walker.walk(prev_last.e, first.e, &ms, &mw, &wf, &wl);
      measured += ms / kTwoPi;
      discarded += std::round((ms - ds) / kTwoPi);
    }
    tot_s += ws;
    tot_w += ww;
    seg_s += ws;
    prev_last = last;
    have_prev = true;
  }

  led.smooth_phase = seg_s / kTwoPi;
  led.total_time_delay = tot_s / kTwoPi;
  led.winding_independent = tot_w / kTwoPi;
  led.embedded_jump = discarded;
  led.window_measured = measured;
  led.refine_evals = walker.evals();
  led.residual = std::fabs(led.total_time_delay + led.n_bound - led.rhs);
  led.violation = led.residual > tolerance;
  return led;
}

std::string to_json(const LevinsonLedger& l) {
  nlohmann::json j;
  j["total_time_delay"] = l.total_time_delay;
  j["smooth_phase"] = l.smooth_phase;
  j["embedded_jump"] = l.embedded_jump;
  j["window_measured"] = l.window_measured;
  j["n_bound"] = l.n_bound;
  j["corner_plus"] = l.corner_plus;
  j["corner_minus"] = l.corner_minus;
  j["rhs"] = l.rhs;
  j["residual"] = l.residual;
  j["violation"] = l.violation;
  j["winding_independent"] = l.winding_independent;
  j["refine_evals"] = l.refine_evals;
  return j.dump(2);
}

double critical_coupling(const GreenBoundary& g, int side) {
  const double e = side > 0 ? g.tab().emax() : g.tab().emin();
  const double gv = g.real_boundary(e)(0, 0).real();
  if (std::fabs(gv) < 1e-300) throw NumericError("edge resolvent value vanishes");
  return 1.0 / gv;
}

}  // namespace latscat
