#pragma once

#include <Eigen/Core>

#include "isac/rng.hpp"
#include "isac/types.hpp"

namespace isac {

// DDPM schedule: linear beta ramp with alpha / cumulative-product / posterior
// variance arrays, all indexed by time step t in [1, T].
struct DiffusionSchedule {
  int steps = 0;
  Eigen::VectorXd beta;       // beta_t
  Eigen::VectorXd alpha;      // 1 - beta_t
  Eigen::VectorXd alpha_bar;  // prod_{p<=t} alpha_p
  Eigen::VectorXd gamma;      // (1 - abar_{t-1}) beta_t / (1 - abar_t), gamma_1 = 0

  double beta_t(int t) const { return beta[t - 1]; }
  double alpha_t(int t) const { return alpha[t - 1]; }
  double alpha_bar_t(int t) const { return alpha_bar[t - 1]; }
  double gamma_t(int t) const { return gamma[t - 1]; }
  // abar_{t-1} with the abar_0 = 1 convention
  double alpha_bar_prev(int t) const { return t >= 2 ? alpha_bar[t - 2] : 1.0; }
};

// Linear schedule from beta_1 to beta_T inclusive; requires
// 0 < beta_1 < beta_T < 1 and T >= 2 (throws std::domain_error otherwise).
DiffusionSchedule make_schedule(int steps, double beta_1, double beta_t);

// One jump of the forward process: x_t = sqrt(abar_t) x0 + sqrt(1-abar_t) eps
// with eps drawn i.i.d. standard normal; returns both.
std::pair<Point5D, Point5D> forward_sample(const Point5D& x0, int t,
                                           const DiffusionSchedule& sched, Rng& rng);

// Algebraic inverse of the forward jump given the same noise vector.
Point5D reconstruct_x0(const Point5D& x_t, const Point5D& eps, int t,
                       const DiffusionSchedule& sched);

// Posterior mean of x_{t-1} given (x_t, x0).
Point5D posterior_mean_from_x0(const Point5D& x_t, const Point5D& x0, int t,
                               const DiffusionSchedule& sched);

// Same mean written in terms of the forward noise:
// (x_t - beta_t/sqrt(1-abar_t) eps) / sqrt(alpha_t).
Point5D posterior_mean_from_eps(const Point5D& x_t, const Point5D& eps, int t,
                                const DiffusionSchedule& sched);

// [p, sin(2^0 pi p), cos(2^0 pi p), ..., sin(2^{L-1} pi p), cos(2^{L-1} pi p)].
Eigen::VectorXd positional_encode(double p, int l_bar);

// Context vector [t, sin t, cos t, sin 2t, cos 2t, vec(Re H), vec(Im H)];
// the channel is expected in normalized (unit-rms) units.
Eigen::VectorXd build_context(int t, const ChannelMatrix& h_ref_scaled);
int context_dim(int n_rx, int n_tx);

// Writes the five time features of the context in place (batch column).
void fill_time_features(int t, Eigen::Ref<Eigen::VectorXd> head);

}  // namespace isac
