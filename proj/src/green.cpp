#include "latscat/green.h"

#include <cmath>
#include <functional>

namespace latscat {

GreenBoundary::GreenBoundary(const SpectralDensityMatrix* tab, std::vector<IVec> sites)
    : tab_(tab), sites_(std::move(sites)) {
  if (sites_.empty()) throw ConfigError("empty site set");
  const int m = static_cast<int>(sites_.size());
  chan_.assign(m, std::vector<int>(m, -1));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      int c = tab_->channels().find(sites_[j] - sites_[i]);
      if (c < 0)
        throw ConfigError("density tabulation lacks channel " + (sites_[j] - sites_[i]).str());
      chan_[i][j] = c;
    }
}

Eigen::MatrixXcd GreenBoundary::assemble(const std::function<cplx(int)>& f) const {
  const int m = nsites();
  // Channels repeat across the matrix; evaluate each once.
  std::vector<cplx> cache(tab_->channels().diffs.size());
  std::vector<bool> have(cache.size(), false);
  Eigen::MatrixXcd M(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      int c = chan_[i][j];
      if (!have[c]) {
        cache[c] = f(c);
        have[c] = true;
      }
      M(i, j) = cache[c];
    }
  return M;
}

Eigen::MatrixXcd GreenBoundary::at(cplx z) const {
  return assemble([&](int c) { return tab_->cauchy(c, z); });
}

Eigen::MatrixXcd GreenBoundary::deriv(cplx z) const {
  return assemble([&](int c) { return tab_->cauchy_deriv(c, z); });
}

Eigen::MatrixXcd GreenBoundary::boundary(double E, int side) const {
  return assemble([&](int c) { return tab_->boundary(c, E, side); });
}

Eigen::MatrixXcd GreenBoundary::real_boundary(double E) const {
  return assemble([&](int c) { return tab_->principal_value(c, E); });
}

Eigen::MatrixXcd GreenBoundary::rho(double E) const {
  return assemble([&](int c) { return tab_->rho(c, E); });
}

double GreenBoundary::dos(double E) const { return tab_->dos(E); }

cplx green_direct(const BandFunction& band, const IVec& r, cplx z, int n_per_axis) {
  const int d = band.dim();
  if (d > 3) throw ConfigError("direct zone quadrature supports up to three dimensions");
  const FoldedBand& fb = band.folded();
  double span = 0;
  for (const auto& t : fb.terms) span += std::hypot(t.a, t.b);
  if (std::fabs(z.imag()) < 0.02 && z.real() > fb.c0 - span - 0.05 &&
      z.real() < fb.c0 + span + 0.05)
    throw NumericError("direct zone quadrature too close to the spectrum");
  const std::int64_t n = n_per_axis;
  const double h = kTwoPi / n;
  cplx sum = 0;
  double k[5] = {0, 0, 0, 0, 0};
  std::int64_t n1 = (d >= 2) ? n : 1, n2 = (d >= 3) ? n : 1;
  for (std::int64_t i2 = 0; i2 < n2; ++i2) {
    k[2] = (i2 + 0.5) * h;
    for (std::int64_t i1 = 0; i1 < n1; ++i1) {
      k[1] = (i1 + 0.5) * h;
      for (std::int64_t i0 = 0; i0 < n; ++i0) {
        k[0] = (i0 + 0.5) * h;
        double ph = r.dot(k);
        sum += std::exp(cplx(0, ph)) / (z - band.eval(k));
      }
    }
  }
  double cells = static_cast<double>(n) * n1 * n2;
  return sum / cells;
}

EdgeFit edge_asymptotics(const SpectralDensityMatrix& tab, bool at_max, double w_lo, double w_hi,
                         int npts) {
  double edge = at_max ? tab.emax() : tab.emin();
  double D = 0.5 * (tab.emax() - tab.emin());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int used = 0;
  for (int i = 0; i < npts; ++i) {
    double t = static_cast<double>(i) / (npts - 1);
    double delta = D * w_lo * std::pow(w_hi / w_lo, t);
    double E = at_max ? edge - delta : edge + delta;
    double rho = tab.dos(E);
    if (!(rho > 0)) continue;
    double x = std::log(delta), y = std::log(rho);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++used;
  }
  if (used < 3) throw NumericError("edge fit has too few usable density samples");
  double det = used * sxx - sx * sx;
  EdgeFit f;
  f.exponent = (used * sxy - sx * sy) / det;
  f.amplitude = std::exp((sy * sxx - sx * sxy) / det);
  return f;
}

EdgeFit edge_prediction(const BandFunction& band, const CriticalPointSet& cps, bool at_max) {
  const int d = band.dim();
  const CriticalPoint& ext = at_max ? cps.maximum : cps.minimum;
  double sphere = 2 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d);
  EdgeFit f;
  f.exponent = 0.5 * d - 1;
  f.amplitude = sphere * std::pow(2.0, 0.5 * d - 1) /
                (std::pow(kTwoPi, d) * std::sqrt(std::fabs(ext.hess_det)));
  return f;
}

}  // namespace latscat
