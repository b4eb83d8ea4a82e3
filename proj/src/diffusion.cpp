#include "isac/diffusion.hpp"

#include <cmath>
#include <stdexcept>

#include "isac/constants.hpp"

namespace isac {

DiffusionSchedule make_schedule(int steps, double beta_1, double beta_t) {
  if (steps < 2) throw std::domain_error("make_schedule: need T >= 2");
  if (!(beta_1 > 0.0) || !(beta_t < 1.0) || !(beta_1 < beta_t)) {
    throw std::domain_error("make_schedule: need 0 < beta_1 < beta_T < 1");
  }
  DiffusionSchedule s;
  s.steps = steps;
  s.beta.resize(steps);
  s.alpha.resize(steps);
  s.alpha_bar.resize(steps);
  s.gamma.resize(steps);
  const double slope = (beta_t - beta_1) / static_cast<double>(steps - 1);
  double prod = 1.0;
  for (int i = 0; i < steps; ++i) {
    s.beta[i] = beta_1 + slope * i;
    s.alpha[i] = 1.0 - s.beta[i];
    prod *= s.alpha[i];
    s.alpha_bar[i] = prod;
  }
  s.gamma[0] = 0.0;  // posterior at t = 1 is deterministic (abar_0 = 1)
  for (int i = 1; i < steps; ++i) {
    s.gamma[i] = (1.0 - s.alpha_bar[i - 1]) / (1.0 - s.alpha_bar[i]) * s.beta[i];
  }
  return s;
}

namespace {
void check_t(int t, const DiffusionSchedule& sched, const char* who) {
  if (t < 1 || t > sched.steps) {
    throw std::domain_error(std::string(who) + ": time step out of range");
  }
}
}  // namespace

std::pair<Point5D, Point5D> forward_sample(const Point5D& x0, int t,
                                           const DiffusionSchedule& sched, Rng& rng) {
  check_t(t, sched, "forward_sample");
  Point5D eps;
  for (int d = 0; d < 5; ++d) eps[d] = rng.gauss();
  const double ab = sched.alpha_bar_t(t);
  const Point5D x_t = std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
  return {x_t, eps};
}

Point5D reconstruct_x0(const Point5D& x_t, const Point5D& eps, int t,
                       const DiffusionSchedule& sched) {
  check_t(t, sched, "reconstruct_x0");
  const double ab = sched.alpha_bar_t(t);
  return (x_t - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
}

Point5D posterior_mean_from_x0(const Point5D& x_t, const Point5D& x0, int t,
                               const DiffusionSchedule& sched) {
  check_t(t, sched, "posterior_mean_from_x0");
  const double ab = sched.alpha_bar_t(t);
  const double ab_prev = sched.alpha_bar_prev(t);
  const double c0 = std::sqrt(ab_prev) * sched.beta_t(t) / (1.0 - ab);
  const double ct = std::sqrt(sched.alpha_t(t)) * (1.0 - ab_prev) / (1.0 - ab);
  return c0 * x0 + ct * x_t;
}

Point5D posterior_mean_from_eps(const Point5D& x_t, const Point5D& eps, int t,
                                const DiffusionSchedule& sched) {
  check_t(t, sched, "posterior_mean_from_eps");
  const double ab = sched.alpha_bar_t(t);
  return (x_t - sched.beta_t(t) / std::sqrt(1.0 - ab) * eps) /
         std::sqrt(sched.alpha_t(t));
}

Eigen::VectorXd positional_encode(double p, int l_bar) {
  if (l_bar < 1) throw std::domain_error("positional_encode: l_bar >= 1");
  Eigen::VectorXd out(2 * l_bar + 1);
  out[0] = p;
  double freq = kPi;
  for (int k = 0; k < l_bar; ++k) {
    out[1 + 2 * k] = std::sin(freq * p);
    out[2 + 2 * k] = std::cos(freq * p);
    freq *= 2.0;
  }
  return out;
}

int context_dim(int n_rx, int n_tx) { return 5 + 2 * n_rx * n_tx; }

void fill_time_features(int t, Eigen::Ref<Eigen::VectorXd> head) {
  const double td = static_cast<double>(t);
  head[0] = td;
  head[1] = std::sin(td);
  head[2] = std::cos(td);
  head[3] = std::sin(2.0 * td);
  head[4] = std::cos(2.0 * td);
}

Eigen::VectorXd build_context(int t, const ChannelMatrix& h_ref_scaled) {
  const int nm = static_cast<int>(h_ref_scaled.size());
  Eigen::VectorXd c(5 + 2 * nm);
  fill_time_features(t, c.head(5));
  // column-major vec of real then imaginary parts
  int p = 5;
  for (Eigen::Index j = 0; j < h_ref_scaled.cols(); ++j) {
    for (Eigen::Index i = 0; i < h_ref_scaled.rows(); ++i) c[p++] = h_ref_scaled(i, j).real();
  }
  for (Eigen::Index j = 0; j < h_ref_scaled.cols(); ++j) {
    for (Eigen::Index i = 0; i < h_ref_scaled.rows(); ++i) c[p++] = h_ref_scaled(i, j).imag();
  }
  return c;
}

}  // namespace isac
