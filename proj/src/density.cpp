#include "latscat/density.h"

#include <algorithm>
#include <cmath>
#include <map>

namespace latscat {

namespace {

// Nodes and weights of a 12-point Gauss-Legendre rule on [0,1].
constexpr int kGlN = 12;
constexpr double kGlX[kGlN] = {
    0.00921968287664038, 0.04794137181476257, 0.11504866290284765, 0.20634102285669128,
    0.31608425050090994, 0.43738329574426554, 0.56261670425573446, 0.68391574949909006,
    0.79365897714330872, 0.88495133709715235, 0.95205862818523743, 0.99078031712335962};
constexpr double kGlW[kGlN] = {
    0.02358766819325591, 0.05346966299765922, 0.08003916427167311, 0.10158371336153296,
    0.11674626826917740, 0.12457352290670139, 0.12457352290670139, 0.11674626826917740,
    0.10158371336153296, 0.08003916427167311, 0.05346966299765922, 0.02358766819325591};

IVec drop_component(const IVec& n, int axis, int dim) {
  IVec r{};
  r.dim = dim - 1;
  int j = 0;
  for (int i = 0; i < dim; ++i)
    if (i != axis) r.v[j++] = n.v[i];
  return r;
}

}  // namespace

ChannelSet ChannelSet::differences(int dim, const std::vector<IVec>& sites) {
  ChannelSet ch;
  ch.dim = dim;
  ch.diffs.push_back(IVec::zero(dim));
  for (const IVec& m : sites)
    for (const IVec& n : sites) {
      IVec r = m - n;
      if (ch.find(r) < 0) ch.diffs.push_back(r);
    }
  return ch;
}

int ChannelSet::find(const IVec& r) const {
  for (std::size_t i = 0; i < diffs.size(); ++i)
    if (diffs[i] == r) return static_cast<int>(i);
  return -1;
}

std::vector<cplx> channel_density(const SurfaceSample& s, const ChannelSet& ch) {
  if (ch.dim != s.dim) throw ConfigError("channel set dimension does not match the sample");
  std::vector<cplx> out(ch.diffs.size(), cplx(0, 0));
  const double pref = std::pow(kTwoPi, -s.dim);
  for (std::size_t i = 0; i < s.nodes.size(); ++i) {
    double base = pref * s.weights[i] / s.grad_norm[i];
    for (std::size_t c = 0; c < ch.diffs.size(); ++c) {
      double phase = ch.diffs[c].dot(s.nodes[i].data());
      out[c] += base * std::exp(cplx(0, phase));
    }
  }
  return out;
}

std::vector<double> build_energy_knots(double emin, double emax,
                                       const std::vector<double>& singular, int base_pts,
                                       int j_lo, int j_hi) {
  if (!(emax > emin)) throw ConfigError("empty energy range");
  const double D = emax - emin;
  std::vector<double> ks;
  ks.push_back(emin);
  ks.push_back(emax);
  for (int i = 0; i < base_pts; ++i) ks.push_back(emin + D * (i + 0.5) / base_pts);
  // Ratio 2^(1/4) between consecutive offsets: chords across ratio-2 gaps
  // resolve sqrt and log cusps two orders of magnitude worse.
  const double kSub[4] = {1.0, std::pow(0.5, 0.25), std::sqrt(0.5), std::pow(0.5, 0.75)};
  for (double c : singular) {
    if (c > emin && c < emax) ks.push_back(c);
    for (int j = j_lo; j <= j_hi; ++j) {
      double off = D * std::ldexp(1.0, -j);
      for (double f : kSub)
        for (int s = -1; s <= 1; s += 2) {
          double v = c + s * off * f;
          if (v > emin && v < emax) ks.push_back(v);
        }
    }
  }
  std::sort(ks.begin(), ks.end());
  const double gap = D * std::ldexp(1.0, -(j_hi + 4));
  std::vector<double> out;
  out.push_back(ks.front());
  for (double v : ks)
    if (v - out.back() > gap) out.push_back(v);
  // The top edge must survive deduplication; replace the last interior knot
  // if it crowds the edge.
  if (out.back() != emax) {
    if (emax - out.back() <= gap) out.back() = emax;
    else out.push_back(emax);
  }
  return out;
}

bool band_splits_at_axis(const BandFunction& band, int axis) {
  bool axis_seen = false, rest_seen = false;
  for (const BandCoeff& bc : band.coeffs()) {
    bool has_axis = bc.n.v[axis] != 0;
    bool has_rest = false;
    for (int i = 0; i < band.dim(); ++i)
      if (i != axis && bc.n.v[i] != 0) has_rest = true;
    if (has_axis && has_rest) return false;
    if (has_axis) axis_seen = true;
    if (has_rest) rest_seen = true;
  }
  return axis_seen && rest_seen;
}

BandFunction band_without_axis(const BandFunction& band, int axis) {
  std::vector<BandCoeff> cs;
  for (const BandCoeff& bc : band.coeffs()) {
    if (bc.n.v[axis] != 0) continue;
    cs.push_back({drop_component(bc.n, axis, band.dim()), bc.c});
  }
  return BandFunction(band.dim() - 1, cs);
}

BandFunction band_of_axis(const BandFunction& band, int axis) {
  std::vector<BandCoeff> cs;
  for (const BandCoeff& bc : band.coeffs()) {
    if (bc.n.v[axis] == 0) continue;
    IVec n{};
    n.dim = 1;
    n.v[0] = bc.n.v[axis];
    cs.push_back({n, bc.c});
  }
  return BandFunction(1, cs);
}

SpectralDensityMatrix SpectralDensityMatrix::from_samples(
    int dim, ChannelSet ch, std::vector<double> knots, std::vector<std::vector<cplx>> values,
    std::vector<double> singular_energies) {
  if (ch.diffs.empty()) throw ConfigError("empty channel set");
  if (knots.size() < 2) throw ConfigError("need at least two knots");
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (!(knots[i] > knots[i - 1])) throw ConfigError("knots must be strictly increasing");
  if (values.size() != ch.diffs.size()) throw ConfigError("one value row per channel required");
  for (const auto& row : values)
    if (row.size() != knots.size()) throw ConfigError("value row length must match the knots");
  SpectralDensityMatrix t;
  t.ch_ = std::move(ch);
  t.ch_.dim = dim;
  t.knots_ = std::move(knots);
  t.vals_ = std::move(values);
  t.singular_ = std::move(singular_energies);
  if (t.singular_.empty()) t.singular_ = {t.knots_.front(), t.knots_.back()};
  return t;
}

namespace {

// In two dimensions the density matrix has a finite jump at a nondegenerate
// band edge: each extremum k* contributes e^{i r.k*} / (2 pi sqrt|det H|).
// Tabulating that limit at the edge knot instead of zero removes the leading
// interpolation error of every consumer that integrates across the edge.
std::vector<cplx> edge_limit_2d(const CriticalPointSet& cps, const ChannelSet& ch, bool at_max) {
  std::vector<cplx> row(ch.diffs.size(), cplx(0, 0));
  double edge = at_max ? cps.emax : cps.emin;
  for (const CriticalPoint& p : cps.points) {
    if (std::fabs(p.energy - edge) > 1e-9) continue;
    if (std::fabs(p.hess_det) < 1e-12) return std::vector<cplx>(ch.diffs.size(), cplx(0, 0));
    double amp = 1.0 / (kTwoPi * std::sqrt(std::fabs(p.hess_det)));
    for (std::size_t c = 0; c < ch.diffs.size(); ++c)
      row[c] += amp * std::exp(cplx(0, ch.diffs[c].dot(p.k.data())));
  }
  return row;
}

}  // namespace

SpectralDensityMatrix SpectralDensityMatrix::from_level_sets(const LevelSetSampler& sampler,
                                                             const ChannelSet& ch,
                                                             const DensityOptions& opt) {
  const CriticalPointSet& cps = sampler.critical_points();
  std::vector<double> knots =
      build_energy_knots(cps.emin, cps.emax, cps.critical_values, opt.base_pts, opt.dyadic_lo,
                         opt.dyadic_hi);
  std::vector<std::vector<cplx>> vals(ch.diffs.size(), std::vector<cplx>(knots.size(), 0));
  for (std::size_t i = 1; i + 1 < knots.size(); ++i) {
    SurfaceSample s = sampler.sample(knots[i]);
    std::vector<cplx> row = channel_density(s, ch);
    for (std::size_t c = 0; c < row.size(); ++c) vals[c][i] = row[c];
  }
  if (sampler.band().dim() == 2) {
    std::vector<cplx> lo = edge_limit_2d(cps, ch, false);
    std::vector<cplx> hi = edge_limit_2d(cps, ch, true);
    for (std::size_t c = 0; c < ch.diffs.size(); ++c) {
      vals[c].front() = lo[c];
      vals[c].back() = hi[c];
    }
  }
  return from_samples(sampler.band().dim(), ch, std::move(knots), std::move(vals),
                      cps.critical_values);
}

SpectralDensityMatrix SpectralDensityMatrix::from_separable(const BandFunction& band,
                                                            const ChannelSet& ch,
                                                            const DensityOptions& opt) {
  const int d = band.dim();
  if (ch.dim != d) throw ConfigError("channel set dimension does not match the band");
  int axis = -1;
  if (d > 2) {
    for (int a = d - 1; a >= 0; --a)
      if (band_splits_at_axis(band, a)) {
        axis = a;
        break;
      }
  }
  if (axis < 0) {
    if (d > 3)
      throw ConfigError("band does not separate and is beyond the level-set sampler");
    CriticalPointSet cps = find_critical_points(band);
    SurfaceOptions so;
    so.base_n = opt.surface_n > 0 ? opt.surface_n : (d >= 3 ? 48 : 2048);
    LevelSetSampler sampler(band, cps, so);
    return from_level_sets(sampler, ch, opt);
  }

  BandFunction inner_band = band_without_axis(band, axis);
  BandFunction ax_band = band_of_axis(band, axis);
  CriticalPointSet ax_cps = find_critical_points(ax_band);

  // Project the channels onto the remaining axes.
  ChannelSet inner_ch;
  inner_ch.dim = d - 1;
  std::vector<int> proj(ch.diffs.size());
  std::vector<long long> ax_comp(ch.diffs.size());
  for (std::size_t c = 0; c < ch.diffs.size(); ++c) {
    IVec r2 = drop_component(ch.diffs[c], axis, d);
    int idx = inner_ch.find(r2);
    if (idx < 0) {
      idx = static_cast<int>(inner_ch.diffs.size());
      inner_ch.diffs.push_back(r2);
    }
    proj[c] = idx;
    ax_comp[c] = ch.diffs[c].v[axis];
  }

  SpectralDensityMatrix inner = from_separable(inner_band, inner_ch, opt);

  std::vector<double> singular;
  for (double vi : inner.singular_energies())
    for (double vj : ax_cps.critical_values) singular.push_back(vi + vj);
  std::sort(singular.begin(), singular.end());
  singular.erase(std::unique(singular.begin(), singular.end(),
                             [](double a, double b) { return std::fabs(a - b) < 1e-12; }),
                 singular.end());
  double emin = inner.emin() + ax_cps.emin;
  double emax = inner.emax() + ax_cps.emax;
  std::vector<double> knots =
      build_energy_knots(emin, emax, singular, opt.base_pts, opt.dyadic_lo, opt.dyadic_hi);

  std::vector<std::vector<cplx>> vals(ch.diffs.size(), std::vector<cplx>(knots.size(), 0));

  // Breakpoint preparation: the integrand k -> rho'(E - eps1(k)) has kinks
  // where eps1 crosses E - v for a singular energy v of the inner table, and
  // where eps1 itself is critical.
  std::vector<double> ax_crit_k;
  for (const CriticalPoint& p : ax_cps.points) ax_crit_k.push_back(p.k[0]);
  std::sort(ax_crit_k.begin(), ax_crit_k.end());
  const int scan_n = 1024;
  std::vector<double> scan_val(scan_n + 1);
  for (int i = 0; i <= scan_n; ++i) {
    double k = kTwoPi * i / scan_n;
    scan_val[i] = ax_band.eval(&k);
  }

  for (std::size_t ki = 1; ki + 1 < knots.size(); ++ki) {
    const double E = knots[ki];
    // Collect panel breakpoints on [0, 2pi).
    std::vector<double> bps = ax_crit_k;
    for (double v : inner.singular_energies()) {
      double target = E - v;
      for (int i = 0; i < scan_n; ++i) {
        double f0 = scan_val[i] - target, f1 = scan_val[i + 1] - target;
        if (f0 == 0) bps.push_back(kTwoPi * i / scan_n);
        if ((f0 < 0 && f1 > 0) || (f0 > 0 && f1 < 0)) {
          double a = kTwoPi * i / scan_n, b = kTwoPi * (i + 1) / scan_n;
          for (int it = 0; it < 60; ++it) {
            double m = 0.5 * (a + b);
            double fm = ax_band.eval(&m) - target;
            if ((fm < 0) == (f0 < 0)) {
              a = m;
              f0 = fm;
            } else {
              b = m;
            }
          }
          bps.push_back(0.5 * (a + b));
        }
      }
    }
    std::sort(bps.begin(), bps.end());
    bps.erase(std::unique(bps.begin(), bps.end(),
                          [](double a, double b) { return std::fabs(a - b) < 1e-9; }),
              bps.end());
    if (bps.empty() || bps.front() > 1e-9) bps.insert(bps.begin(), 0.0);

    std::vector<cplx> acc(ch.diffs.size(), cplx(0, 0));
    auto add_panel = [&](double a, double b) {
      if (b - a < 1e-13) return;
      // Dyadic subpanels toward both ends, Gauss-Legendre on each.
      std::vector<double> cuts;
      cuts.push_back(a);
      double w = b - a;
      for (int l = opt.conv_split; l >= 1; --l) cuts.push_back(a + w * std::ldexp(0.5, -l));
      for (int l = 1; l <= opt.conv_split; ++l) cuts.push_back(b - w * std::ldexp(0.5, -l));
      cuts.push_back(b);
      for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        double lo = cuts[s], hi = cuts[s + 1];
        for (int g = 0; g < kGlN; ++g) {
          double k = lo + (hi - lo) * kGlX[g];
          double wgt = (hi - lo) * kGlW[g];
          double e1 = ax_band.eval(&k);
          for (std::size_t c = 0; c < ch.diffs.size(); ++c) {
            cplx rin = inner.rho(proj[c], E - e1);
            if (rin == cplx(0, 0)) continue;
            double ph = static_cast<double>(ax_comp[c]) * k;
            acc[c] += wgt * rin * std::exp(cplx(0, ph));
          }
        }
      }
    };
    for (std::size_t b = 0; b + 1 < bps.size(); ++b) add_panel(bps[b], bps[b + 1]);
    add_panel(bps.back(), bps.front() + kTwoPi);
    for (std::size_t c = 0; c < ch.diffs.size(); ++c) vals[c][ki] = acc[c] / kTwoPi;
  }

  return from_samples(d, ch, std::move(knots), std::move(vals), singular);
}

SpectralDensityMatrix SpectralDensityMatrix::from_histogram(const BandFunction& band,
                                                            const ChannelSet& ch,
                                                            const HistogramOptions& opt) {
  const int d = band.dim();
  if (ch.dim != d) throw ConfigError("channel set dimension does not match the band");
  int defaults[6] = {0, 0, 1024, 192, 72, 40};
  std::int64_t n = opt.grid_n > 0 ? opt.grid_n : defaults[d];
  const FoldedBand& fb = band.folded();
  double span = 0;
  for (const auto& t : fb.terms) span += std::hypot(t.a, t.b);
  double lo = fb.c0 - span, hi = fb.c0 + span;
  double pad = 1e-9 * (hi - lo);
  lo -= pad;
  hi += pad;
  GridSpec g = offset_grid(d, n);
  const std::int64_t nb = opt.bins;
  std::vector<std::uint64_t> counts(nb, 0);
  active_kernels().histogram(fb, g, lo, hi, nb, counts.data());
  std::vector<cplx> csum;
  std::vector<IVec> nonzero;
  std::vector<std::size_t> nz_pos;
  for (std::size_t c = 0; c < ch.diffs.size(); ++c)
    if (!(ch.diffs[c].dot(ch.diffs[c]) == 0)) {
      nonzero.push_back(ch.diffs[c]);
      nz_pos.push_back(c);
    }
  if (!nonzero.empty()) histogram_channels(fb, g, lo, hi, nb, nonzero, csum);

  const double N = static_cast<double>(g.total());
  const double bw = (hi - lo) / nb;
  // Empirical band window.
  std::int64_t first = 0, last = nb - 1;
  while (first < nb && counts[first] == 0) ++first;
  while (last > 0 && counts[last] == 0) --last;
  if (first >= last) throw NumericError("energy histogram is empty");
  double e0 = lo + first * bw, e1 = lo + (last + 1) * bw;

  int base = 400;
  std::vector<double> knots = build_energy_knots(e0, e1, {}, base, 6, 8);
  std::vector<std::vector<cplx>> vals(ch.diffs.size(), std::vector<cplx>(knots.size(), 0));
  std::vector<std::uint64_t> cdf(nb + 1, 0);
  for (std::int64_t i = 0; i < nb; ++i) cdf[i + 1] = cdf[i] + counts[i];
  std::vector<cplx> ccdf;
  if (!nonzero.empty()) {
    ccdf.assign((nb + 1) * nonzero.size(), cplx(0, 0));
    for (std::int64_t i = 0; i < nb; ++i)
      for (std::size_t c = 0; c < nonzero.size(); ++c)
        ccdf[(i + 1) * nonzero.size() + c] =
            ccdf[i * nonzero.size() + c] + csum[i * nonzero.size() + c];
  }
  int wb = std::max(1, static_cast<int>(std::lround(opt.window_frac)));
  for (std::size_t i = 1; i + 1 < knots.size(); ++i) {
    std::int64_t ib = static_cast<std::int64_t>((knots[i] - lo) / bw);
    std::int64_t wlo = std::max<std::int64_t>(ib - wb, 0);
    std::int64_t whi = std::min<std::int64_t>(ib + wb + 1, nb);
    double width = (whi - wlo) * bw;
    double mass = static_cast<double>(cdf[whi] - cdf[wlo]) / N;
    int zc = ch.find(IVec::zero(d));
    if (zc >= 0) vals[zc][i] = mass / width;
    for (std::size_t c = 0; c < nonzero.size(); ++c) {
      cplx cm = (ccdf[whi * nonzero.size() + c] - ccdf[wlo * nonzero.size() + c]) / N;
      vals[nz_pos[c]][i] = cm / width;
    }
  }
  return from_samples(d, ch, std::move(knots), std::move(vals), {e0, e1});
}

cplx SpectralDensityMatrix::rho(int channel, double E) const {
  const auto& s = vals_[channel];
  if (E <= knots_.front() || E >= knots_.back()) {
    if (E == knots_.front()) return s.front();
    if (E == knots_.back()) return s.back();
    return cplx(0, 0);
  }
  auto it = std::upper_bound(knots_.begin(), knots_.end(), E);
  std::size_t k = static_cast<std::size_t>(it - knots_.begin()) - 1;
  double t = (E - knots_[k]) / (knots_[k + 1] - knots_[k]);
  return s[k] + t * (s[k + 1] - s[k]);
}

double SpectralDensityMatrix::dos(double E) const { return rho(0, E).real(); }

cplx SpectralDensityMatrix::total_mass(int channel) const {
  const auto& s = vals_[channel];
  cplx m = 0;
  for (std::size_t k = 0; k + 1 < knots_.size(); ++k)
    m += 0.5 * (s[k] + s[k + 1]) * (knots_[k + 1] - knots_[k]);
  return m;
}

// Closed forms below use the per-knot gathered representation
//   C(z) = sum_k c_k(z) ln(z - e_k) - (s_K - s_0),
// with c_0 = s_0 + m_0 (z - e_0), c_K = -(s_K + m_{K-1}(z - e_K)) and interior
// c_k = (m_k - m_{k-1})(z - e_k), which keeps the x ln x limits finite when z
// approaches a knot.
cplx SpectralDensityMatrix::cauchy(int channel, cplx z) const {
  const auto& e = knots_;
  const auto& s = vals_[channel];
  const std::size_t K = e.size() - 1;
  if (z.imag() == 0) {
    double E = z.real();
    if (E > e.front() && E < e.back())
      throw NumericError("Cauchy transform evaluated on the band cut; use boundary()");
    return principal_value(channel, E);
  }
  const double scale = std::fabs(e.back() - e.front()) + std::abs(z);
  cplx sum = -(s[K] - s[0]);
  cplx m_prev = 0;
  for (std::size_t k = 0; k <= K; ++k) {
    cplx m_next = (k < K) ? (s[k + 1] - s[k]) / (e[k + 1] - e[k]) : cplx(0, 0);
    cplx ck;
    if (k == 0)
      ck = s[0] + m_next * (z - e[0]);
    else if (k == K)
      ck = -(s[K] + m_prev * (z - e[K]));
    else
      ck = (m_next - m_prev) * (z - e[k]);
    if (std::abs(z - e[k]) > 1e-300 * scale) sum += ck * std::log(z - e[k]);
    m_prev = m_next;
  }
  return sum;
}

cplx SpectralDensityMatrix::principal_value(int channel, double E) const {
  const auto& e = knots_;
  const auto& s = vals_[channel];
  const std::size_t K = e.size() - 1;
  const double scale = std::fabs(e.back() - e.front()) + std::fabs(E) + 1;
  cplx sum = -(s[K] - s[0]);
  cplx m_prev = 0;
  for (std::size_t k = 0; k <= K; ++k) {
    cplx m_next = (k < K) ? (s[k + 1] - s[k]) / (e[k + 1] - e[k]) : cplx(0, 0);
    cplx ck;
    if (k == 0)
      ck = s[0] + m_next * (E - e[0]);
    else if (k == K)
      ck = -(s[K] + m_prev * (E - e[K]));
    else
      ck = (m_next - m_prev) * (E - e[k]);
    double ax = std::fabs(E - e[k]);
    if (ax > 1e-16 * scale) sum += ck * std::log(ax);
    m_prev = m_next;
  }
  return sum;
}

cplx SpectralDensityMatrix::boundary(int channel, double E, int side) const {
  cplx pv = principal_value(channel, E);
  cplx r = rho(channel, E);
  return pv + cplx(0, side < 0 ? kPi : -kPi) * r;
}

cplx SpectralDensityMatrix::cauchy_deriv(int channel, cplx z) const {
  const auto& e = knots_;
  const auto& s = vals_[channel];
  const std::size_t K = e.size() - 1;
  cplx sum = s[0] / (z - e[0]) - s[K] / (z - e[K]);
  cplx m_prev = 0;
  for (std::size_t k = 0; k <= K; ++k) {
    cplx m_next = (k < K) ? (s[k + 1] - s[k]) / (e[k + 1] - e[k]) : cplx(0, 0);
    sum += (m_next - m_prev) * std::log(z - e[k]);
    m_prev = m_next;
  }
  return sum;
}

}  // namespace latscat
