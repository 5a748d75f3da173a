#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "helpers.h"
#include "latscat/density.h"
#include "latscat/green.h"
#include "oracles.h"

using namespace latscat;
using testutil::close;
using testutil::close_rel;

namespace {

SpectralDensityMatrix semicircle_tab() {
  ChannelSet ch;
  ch.dim = 1;
  ch.diffs.push_back(IVec::zero(1));
  std::vector<double> knots = build_energy_knots(-1, 1, {-1, 1}, 3000, 2, 26);
  std::vector<cplx> v(knots.size());
  for (std::size_t i = 0; i < knots.size(); ++i) v[i] = testutil::semicircle_density(knots[i]);
  return SpectralDensityMatrix::from_samples(1, ch, std::move(knots), {std::move(v)});
}

}  // namespace

TEST_CASE("semicircle Cauchy transform matches the closed form") {
  SpectralDensityMatrix tab = semicircle_tab();
  CHECK(close(tab.total_mass(0).real(), 1.0, 1e-6));
  for (cplx z : {cplx(0.3, 0.5), cplx(-0.9, 0.02), cplx(1.7, 0.0), cplx(-2.4, 0.0),
                 cplx(0.0, 1e-3), cplx(1.01, 1e-4)}) {
    CHECK(std::abs(tab.cauchy(0, z) - testutil::semicircle_transform(z)) < 1e-4);
  }
  // Boundary values: on the cut Re C = 2E, Im C(E - i0) = pi rho.
  for (double E : {-0.83, -0.4, 0.0, 0.256, 0.77}) {
    cplx bm = tab.boundary(0, E, -1);
    CHECK(close(bm.real(), 2 * E, 5e-6));
    CHECK(close(bm.imag(), kPi * tab.dos(E), 1e-12));
    CHECK(std::abs(bm - cplx(2 * E, kPi * testutil::semicircle_density(E))) < 1e-4);
  }
}

TEST_CASE("boundary value is the off-axis limit of the Cauchy transform") {
  SpectralDensityMatrix tab = semicircle_tab();
  for (double E : {-0.61, 0.05, 0.42}) {
    CHECK(std::abs(tab.cauchy(0, cplx(E, -1e-8)) - tab.boundary(0, E, -1)) < 1e-6);
    CHECK(std::abs(tab.cauchy(0, cplx(E, 1e-8)) - tab.boundary(0, E, 1)) < 1e-6);
  }
}

TEST_CASE("half-line density: endpoint Plemelj factor and log coefficient") {
  // rho supported on [0, 2] with rho(0) = 1/2 > 0.
  ChannelSet ch;
  ch.dim = 1;
  ch.diffs.push_back(IVec::zero(1));
  int n = 6001;
  std::vector<double> knots(n);
  std::vector<cplx> v(n);
  for (int i = 0; i < n; ++i) {
    double e = 2.0 * i / (n - 1);
    knots[i] = e;
    v[i] = 0.5 + 0.25 * e - 0.125 * e * e;
  }
  auto tab = SpectralDensityMatrix::from_samples(1, ch, knots, {v});
  // Interior: Im C(E - i0) = pi rho(E); below the support: 0.
  CHECK(close(tab.boundary(0, 1.0, -1).imag(), kPi * tab.dos(1.0), 1e-12));
  CHECK(tab.cauchy(0, cplx(-0.5, 0.0)).imag() == 0.0);
  // At the endpoint itself the jump is halved: Im C(i eps) -> -pi/2 rho(0)
  // as eps -> 0+ (the point sees only half a neighborhood of the support).
  double r0 = tab.dos(0.0);
  cplx c_small = tab.cauchy(0, cplx(0.0, 1e-7));
  CHECK(close(c_small.imag(), -0.5 * kPi * r0, 1e-3));
  // Approaching the endpoint from outside, Re C(E) = rho(0) ln|E| + O(1).
  double e1 = -1e-5, e2 = -1e-7;
  double g1 = tab.cauchy(0, cplx(e1, 0.0)).real();
  double g2 = tab.cauchy(0, cplx(e2, 0.0)).real();
  double slope = (g2 - g1) / (std::log(std::fabs(e2)) - std::log(std::fabs(e1)));
  CHECK(close(slope, r0, 1e-3));
}

TEST_CASE("one dimensional chain density and resolvent") {
  BandFunction band = BandFunction::laplacian(1);
  CriticalPointSet cps = find_critical_points(band);
  SurfaceOptions so;
  LevelSetSampler sampler(band, cps, so);
  ChannelSet ch;
  ch.dim = 1;
  ch.diffs.push_back(IVec::zero(1));
  ch.diffs.push_back(IVec{1});
  DensityOptions opt;
  opt.base_pts = 1200;
  opt.dyadic_hi = 26;
  auto tab = SpectralDensityMatrix::from_level_sets(sampler, ch, opt);
  for (double E : {-1.7, -0.6, 0.31, 1.45}) {
    double want = 1.0 / (kPi * std::sqrt(4 - E * E));
    CHECK(close_rel(tab.dos(E), want, 2e-4));
  }
  // G_00(z) = 1/sqrt(z^2-4) with the decay branch; the inverse-sqrt band
  // edges limit what a piecewise-linear tabulation can deliver here.
  for (cplx z : {cplx(0.4, 0.9), cplx(-2.6, 0.0), cplx(3.1, 0.0)}) {
    cplx rt = std::sqrt(z * z - 4.0);
    if ((rt / z).real() < 0) rt = -rt;
    CHECK(std::abs(tab.cauchy(0, z) - 1.0 / rt) < 1e-3);
  }
}

TEST_CASE("derivative of the Cauchy transform") {
  SpectralDensityMatrix tab = semicircle_tab();
  for (cplx z : {cplx(0.2, 0.7), cplx(-1.9, 0.0), cplx(0.9, 0.05)}) {
    cplx h(1e-6, 0);
    cplx fd = (tab.cauchy(0, z + h) - tab.cauchy(0, z - h)) / (2.0 * h);
    CHECK(std::abs(tab.cauchy_deriv(0, z) - fd) < 1e-5 * std::abs(fd) + 1e-10);
  }
}

TEST_CASE("two dimensional tabulation against the elliptic closed form") {
  BandFunction band = BandFunction::laplacian(2);
  CriticalPointSet cps = find_critical_points(band);
  SurfaceOptions so;
  LevelSetSampler sampler(band, cps, so);
  std::vector<IVec> sites = {IVec{0, 0}, IVec{1, 0}};
  ChannelSet ch = ChannelSet::differences(2, sites);
  auto tab = SpectralDensityMatrix::from_level_sets(sampler, ch, {});
  CHECK(close(tab.total_mass(0).real(), 1.0, 1e-4));
  for (double E : {-3.7, -3.0, -1.5, 0.9, 2.7, 3.9})
    CHECK(close_rel(tab.dos(E), testutil::dos2_square(E), 1e-4));
  // Phases average out: nonzero channels carry no total mass.
  CHECK(std::abs(tab.total_mass(1)) < 1e-5);
  // Half-filling symmetry: the principal value vanishes at the center.
  CHECK(std::abs(tab.principal_value(0, 0.0)) < 1e-5);
  // The edge knot carries the exact jump 1/(2 pi sqrt(det H)) = 1/(4 pi).
  CHECK(close_rel(tab.dos(tab.emax()), 1.0 / (4 * kPi), 1e-12));

  GreenBoundary gb(&tab, sites);
  cplx z(0.7, 0.4);
  Eigen::MatrixXcd G = gb.at(z);
  CHECK(std::abs(G(0, 0) - green_direct(band, IVec{0, 0}, z, 512)) < 1e-4);
  CHECK(std::abs(G(0, 1) - green_direct(band, IVec{1, 0}, z, 512)) < 1e-4);
  // rho matrix is Hermitian positive semidefinite inside the band.
  Eigen::MatrixXcd R = gb.rho(-1.3);
  CHECK(std::abs((R - R.adjoint()).norm()) < 1e-14);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(R);
  CHECK(es.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("separable three dimensional pipeline against references") {
  BandFunction band = BandFunction::laplacian(3);
  std::vector<IVec> sites = {IVec{0, 0, 0}, IVec{1, 0, 0}};
  ChannelSet ch = ChannelSet::differences(3, sites);
  auto tab = SpectralDensityMatrix::from_separable(band, ch, {});
  CHECK(close(tab.total_mass(0).real(), 1.0, 5e-5));
  for (double E : {-5.5, -3.0, -1.0, 1.0, 3.0, 5.5})
    CHECK(close_rel(tab.dos(E), testutil::dos3_cubic(E), 5e-4));
  // Resolvent at the upper band edge: G_00(6) = 0.2527310098586630.
  CHECK(close_rel(tab.cauchy(0, cplx(6.0, 0.0)).real(), 0.2527310098586630, 5e-4));
  // Direct zone quadrature cross-check off axis.
  cplx z(1.3, 0.6);
  CHECK(std::abs(tab.cauchy(0, z) - green_direct(band, IVec::zero(3), z, 128)) < 1e-4);
  CHECK(std::abs(tab.cauchy(1, z) - green_direct(band, sites[1] - sites[0], z, 128)) < 1e-4);
}

TEST_CASE("histogram pipeline agrees with level sets in the band interior") {
  BandFunction band = BandFunction::laplacian(2);
  ChannelSet ch;
  ch.dim = 2;
  ch.diffs.push_back(IVec::zero(2));
  ch.diffs.push_back(IVec{1, 1});
  HistogramOptions ho;
  ho.grid_n = 4096;
  auto hist = SpectralDensityMatrix::from_histogram(band, ch, ho);
  CriticalPointSet cps = find_critical_points(band);
  SurfaceOptions so;
  so.base_n = 512;
  LevelSetSampler sampler(band, cps, so);
  DensityOptions opt;
  opt.base_pts = 300;
  auto ref = SpectralDensityMatrix::from_level_sets(sampler, ch, opt);
  for (double E : {-2.7, -1.1, 0.9, 2.3}) {
    CHECK(close_rel(hist.dos(E), testutil::dos2_square(E), 1e-2));
    CHECK(std::abs(hist.rho(1, E) - ref.rho(1, E)) < 1e-2 * ref.dos(E) + 1e-3);
  }
  CHECK(close(hist.total_mass(0).real(), 1.0, 5e-3));
}

TEST_CASE("band edge power law and amplitude") {
  BandFunction band = BandFunction::laplacian(3);
  CriticalPointSet cps = find_critical_points(band);
  ChannelSet ch;
  ch.dim = 3;
  ch.diffs.push_back(IVec::zero(3));
  auto tab = SpectralDensityMatrix::from_separable(band, ch, {});
  for (bool at_max : {false, true}) {
    EdgeFit fit = edge_asymptotics(tab, at_max, 1e-3, 1e-2);
    EdgeFit want = edge_prediction(band, cps, at_max);
    CHECK(close_rel(fit.exponent, want.exponent, 0.02));
    CHECK(close_rel(fit.amplitude, want.amplitude, 0.03));
  }
}

TEST_CASE("four dimensional convolution chain reproduces the linear edge law") {
  BandFunction band = BandFunction::laplacian(4);
  CriticalPointSet cps = find_critical_points(band);
  ChannelSet ch;
  ch.dim = 4;
  ch.diffs.push_back(IVec::zero(4));
  DensityOptions opt;
  opt.base_pts = 300;
  opt.dyadic_hi = 14;
  auto tab = SpectralDensityMatrix::from_separable(band, ch, opt);
  CHECK(close(tab.total_mass(0).real(), 1.0, 4e-4));
  EdgeFit fit = edge_asymptotics(tab, false, 1e-3, 1e-2);
  EdgeFit want = edge_prediction(band, cps, false);
  CHECK(close_rel(fit.exponent, want.exponent, 0.05));
  CHECK(close_rel(fit.amplitude, want.amplitude, 0.05));
}
