#pragma once

#include <cstdint>
#include <vector>

#include "isac/data.hpp"
#include "isac/diffusion.hpp"
#include "isac/nets.hpp"

namespace isac {

struct TrainHyper {
  // schedule
  int steps = 200;
  double beta_1 = 1e-4;
  double beta_t = 0.05;
  // phase 1: noise estimator on the weighted noise-prediction loss
  int batch = 64;
  double lr = 1e-3;
  double lr_final = 0.0;  // > 0 enables geometric decay toward this value
  int max_epochs = 500;
  // phase 2: channel transferring network on reference-channel NMSE. The wide
  // readout makes large steps overshoot badly on small-norm references, hence
  // the lower default step.
  int phase2_batch = 32;
  double phase2_lr = 1e-4;
  double phase2_lr_final = 0.0;
  int phase2_max_epochs = 500;
  // convergence: relative epoch-mean improvement below epsilon for `window`
  // consecutive epochs; window <= 0 disables early stopping
  double conv_epsilon = 1e-4;
  int conv_window = 10;
  // architecture
  int l_bar = 10;
  int transfer_width = 512;
  int transfer_blocks = 6;
  std::vector<int> noise_dims = NoiseNetParams::default_dims();
  bool run_phase1 = true;
  bool run_phase2 = true;
};

struct TrainResult {
  NoiseEstimatorParams params;
  DiffusionSchedule schedule;
  std::vector<double> loss1_curve;  // epoch means
  std::vector<double> loss2_curve;
};

// Two independent phases: the noise net is trained against the true reference
// channels, then the transfer net against reference-channel NMSE. Training is
// single threaded and fully determined by `seed`.
TrainResult train(const std::vector<DatasetRecord>& records, const SystemConfig& cfg,
                  const TrainHyper& hyper, std::uint64_t seed,
                  const NoiseEstimatorParams* init = nullptr);

struct Loss1Sample {
  Point5D x0;
  int t = 1;
  Point5D eps;
  ChannelMatrix h_ref;  // ground-truth reference channel
};

// Mean of beta_t/(2 alpha_t (1-abar_t)) ||eps - eps_hat||^2 over the batch,
// with the estimate conditioned on the true reference channel.
double loss1(const std::vector<Loss1Sample>& batch, const NoiseEstimatorParams& params,
             const DiffusionSchedule& sched);

// Reference-channel NMSE (shared definition with the evaluation metric).
double loss2(const ChannelMatrix& h_ref_true, const ChannelMatrix& h_ref_hat);

struct SampleOptions {
  // false: reverse-step variance beta_t (text-faithful default);
  // true: the posterior variance gamma_t instead (ablation switch).
  bool gamma_variance = false;
};

// Ancestral sampler: N i.i.d. Gaussian 5D points refined from t = T down to 1
// (no noise injected on the final step). The reference channel is produced
// once by the transfer net. Per-point random streams derive from
// (seed, point index, step), so points are mutually independent.
PointCloud5D sample_cloud(const NoiseEstimatorParams& params, const ChannelMatrix& h_hat,
                          const Vec3& center, int n_points,
                          const DiffusionSchedule& sched, std::uint64_t seed,
                          const SampleOptions& opt = {});

void write_loss_csv(const std::string& path, const std::vector<double>& curve);

}  // namespace isac
