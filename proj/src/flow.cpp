#include "latscat/flow.h"

#include <algorithm>

#include <boost/numeric/odeint.hpp>

namespace latscat {

namespace odeint = boost::numeric::odeint;

namespace {

using State = std::vector<double>;  // k components then the divergence integral

struct FlowSystem {
  const RescaledEnergyMap* map;
  int d;
  void operator()(const State& x, State& dxdt, double) const {
    dxdt.resize(d + 1);
    // An exact critical point can only be probed by a trial stage of a node
    // that sits on a flow-invariant set; stall there instead of aborting and
    // let the caller's step budget decide.
    if (!map->xhat_try(x.data(), dxdt.data()) || !map->div_xhat_try(x.data(), &dxdt[d]))
      for (int i = 0; i <= d; ++i) dxdt[i] = 0;
  }
};

using Stepper = odeint::runge_kutta_dopri5<State>;
using Controlled = decltype(odeint::make_controlled(1e-10, 1e-10, Stepper()));

// Controlled stepping from t to target with the trial size clamped to land on
// target, keeping the controller's larger suggestion when the clamp shortened
// an otherwise successful step. Returns false once the shared attempt budget
// is exhausted.
bool step_to(Controlled& ctrl, FlowSystem& sys, State& x, double& t, double target, double& dt,
             std::size_t& steps, std::size_t budget) {
  const double sgn = (target >= t) ? 1.0 : -1.0;
  while (sgn * (target - t) > 1e-13) {
    if (steps >= budget) return false;
    double dtc = (sgn > 0) ? std::min(dt, target - t) : std::max(dt, target - t);
    bool clamped = std::fabs(dtc) < std::fabs(dt);
    if (ctrl.try_step(std::ref(sys), x, t, dtc) == odeint::success) {
      if (!clamped || std::fabs(dtc) > std::fabs(dt)) dt = dtc;
    } else {
      dt = dtc;
    }
    ++steps;
  }
  return true;
}

}  // namespace

FlowField::FlowField(RescaledEnergyMap map, double abs_tol, double rel_tol)
    : map_(std::move(map)), abs_tol_(abs_tol), rel_tol_(rel_tol) {}

FlowField::PointResult FlowField::flow_to(const KVec& k0, double db) const {
  std::vector<double> one = {db};
  return flow_multi(k0, one)[0];
}

std::vector<FlowField::PointResult> FlowField::flow_multi(const KVec& k0,
                                                          const std::vector<double>& dbs) const {
  const int d = map_.band().dim();
  FlowSystem sys{&map_, d};

  std::vector<std::size_t> order(dbs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<PointResult> out(dbs.size());

  for (int sign = -1; sign <= 1; sign += 2) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < dbs.size(); ++i)
      if ((sign > 0 && dbs[i] > 0) || (sign < 0 && dbs[i] < 0)) idx.push_back(i);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return std::fabs(dbs[a]) < std::fabs(dbs[b]);
    });
    if (idx.empty()) continue;
    auto ctrl = odeint::make_controlled(abs_tol_, rel_tol_, Stepper());
    State x(d + 1, 0.0);
    for (int i = 0; i < d; ++i) x[i] = k0[i];
    double t = 0;
    double dt = sign * 1e-3;
    std::size_t steps = 0;
    for (std::size_t i : idx) {
      if (!step_to(ctrl, sys, x, t, dbs[i], dt, steps, 500000))
        throw NumericError("flow transport exceeded its step budget (trajectory near a"
                           " flow-invariant critical set)");
      PointResult r;
      for (int j = 0; j < d; ++j) r.k[j] = x[j];
      r.div_integral = x[d];
      out[i] = r;
    }
  }
  for (std::size_t i = 0; i < dbs.size(); ++i) {
    if (dbs[i] == 0) {
      PointResult r;
      r.k = k0;
      r.div_integral = 0;
      out[i] = r;
    }
  }
  return out;
}

SurfaceSample FlowField::reference_surface(const LevelSetSampler& sampler) const {
  double er = map_.er();
  double step = 1e-3 * map_.delta();
  const auto& vals = map_.critical_points().critical_values;
  for (int iter = 0; iter < 16; ++iter) {
    bool collide = false;
    for (double v : vals)
      if (std::fabs(er - v) < step) {
        collide = true;
        break;
      }
    if (!collide) break;
    er += step;
  }
  return sampler.sample(er);
}

TransportedState FlowField::transport(const SurfaceSample& ref, double db) const {
  std::vector<double> one = {db};
  return transport_multi(ref, one)[0];
}

std::vector<TransportedState> FlowField::transport_multi(const SurfaceSample& ref,
                                                         std::vector<double> dbs) const {
  const int d = map_.band().dim();
  const double b0 = map_.f(ref.energy);
  std::vector<TransportedState> states(dbs.size());
  for (std::size_t s = 0; s < dbs.size(); ++s) {
    states[s].db = dbs[s];
    states[s].energy = map_.f_inv(b0 + dbs[s]);
    states[s].nodes.resize(ref.nodes.size());
    states[s].div_integral.resize(ref.nodes.size());
    states[s].density.resize(ref.nodes.size());
    states[s].jac_det.resize(ref.nodes.size());
    states[s].grad_norm.resize(ref.nodes.size());
  }
  for (std::size_t i = 0; i < ref.nodes.size(); ++i) {
    double xn0 = map_.xhat_norm(ref.nodes[i].data());
    std::vector<PointResult> res = flow_multi(ref.nodes[i], dbs);
    for (std::size_t s = 0; s < dbs.size(); ++s) {
      TransportedState& st = states[s];
      st.nodes[i] = res[s].k;
      st.div_integral[i] = res[s].div_integral;
      double xn1 = map_.xhat_norm(res[s].k.data());
      st.density[i] = std::exp(0.5 * res[s].div_integral) * std::sqrt(xn0);
      st.jac_det[i] = std::exp(res[s].div_integral) * xn0 / xn1;
      double g[5];
      map_.band().grad(res[s].k.data(), g);
      double gn = 0;
      for (int j = 0; j < d; ++j) gn += g[j] * g[j];
      st.grad_norm[i] = std::sqrt(gn);
    }
  }
  return states;
}

LocalizedState FlowField::localized_state(const SurfaceSample& ref, const TransportedState& t,
                                          const IVec& m) const {
  const int d = map_.band().dim();
  LocalizedState st;
  st.m = m;
  st.b_total = map_.f(t.energy);
  st.values.resize(ref.nodes.size());
  double pref = std::pow(kTwoPi, -0.5 * d);
  double n2 = 0;
  for (std::size_t i = 0; i < ref.nodes.size(); ++i) {
    double phase = m.dot(t.nodes[i].data());
    st.values[i] = pref * t.density[i] * std::exp(cplx(0, phase));
    n2 += ref.weights[i] * std::norm(st.values[i]);
  }
  st.norm2 = n2;
  return st;
}

LimitState FlowField::limit_state(const SurfaceSample& ref, bool at_max, double u_cap,
                                  double settle_tol) const {
  const int d = map_.band().dim();
  const auto& cps = map_.critical_points();
  const CriticalPoint& ext = at_max ? cps.maximum : cps.minimum;
  if (!ext.isotropic)
    throw NumericError("edge limit state requires an isotropic extremum Hessian");

  LimitState out;
  out.at_max = at_max;
  out.values.resize(ref.nodes.size());
  const double sgn = at_max ? 1.0 : -1.0;
  const double dd = static_cast<double>(d);

  FlowSystem sys{&map_, d};
  bool all_ok = true;
  double u_max_seen = 0;
  // Near the extremum div X+sd decays like exp(-2u) analytically, but its
  // floating-point value carries cancellation noise growing like exp(+2u), so
  // demanding much below ~1e-7 stalls the step controller on roundoff. Stop on
  // the settle tolerance or once the field itself is negligibly small, and cap
  // the total number of step attempts per node.
  const double pole_stop = 1e-6;
  const std::size_t step_budget = 200000;
  for (std::size_t i = 0; i < ref.nodes.size(); ++i) {
    auto ctrl = odeint::make_controlled(abs_tol_, rel_tol_, Stepper());
    State x(d + 1, 0.0);
    for (int j = 0; j < d; ++j) x[j] = ref.nodes[i][j];
    double u = 0;
    double dt = sgn * 1e-3;
    bool settled = false;
    std::size_t steps = 0;
    double xh[5];
    while (std::fabs(u) < u_cap) {
      if (!step_to(ctrl, sys, x, u, u + sgn * 0.25, dt, steps, step_budget)) break;
      if (!map_.xhat_try(x.data(), xh)) break;  // parked on an exact critical point
      double xn = 0;
      for (int j = 0; j < d; ++j) xn += xh[j] * xh[j];
      if (xn < pole_stop * pole_stop) {
        settled = true;
        break;
      }
      double dv = 0;
      if (!map_.div_xhat_try(x.data(), &dv)) break;
      // div -> -d at the maximum (flow forward), +d at the minimum (backward).
      if (std::fabs(dv + sgn * dd) < settle_tol) {
        settled = true;
        break;
      }
    }
    if (!settled) all_ok = false;
    u_max_seen = std::max(u_max_seen, std::fabs(u));
    // J = int_0^u (div + sgn*d) du' = I(u) + sgn*d*u.
    double J = x[d] + sgn * dd * u;
    out.values[i] = std::exp(0.5 * J) * std::sqrt(map_.xhat_norm(ref.nodes[i].data()));
  }
  double n2 = 0;
  for (std::size_t i = 0; i < ref.nodes.size(); ++i)
    n2 += ref.weights[i] * out.values[i] * out.values[i];
  double inv = 1.0 / std::sqrt(n2);
  for (auto& v : out.values) v *= inv;
  out.converged = all_ok;
  out.u_reached = u_max_seen;
  return out;
}

}  // namespace latscat
