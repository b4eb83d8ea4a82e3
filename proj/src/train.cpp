#include "isac/train.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "isac/metrics.hpp"

namespace isac {

namespace {

double loss_weight(const DiffusionSchedule& sched, int t) {
  return sched.beta_t(t) / (2.0 * sched.alpha_t(t) * (1.0 - sched.alpha_bar_t(t)));
}

// Scaled (unit-rms) channel tail of the context vector for one record.
Eigen::VectorXd context_tail(const ChannelMatrix& h, double rms) {
  const int nm = static_cast<int>(h.size());
  Eigen::VectorXd tail(2 * nm);
  const double inv = 1.0 / rms;
  int p = 0;
  for (Eigen::Index j = 0; j < h.cols(); ++j) {
    for (Eigen::Index i = 0; i < h.rows(); ++i) tail[p++] = inv * h(i, j).real();
  }
  for (Eigen::Index j = 0; j < h.cols(); ++j) {
    for (Eigen::Index i = 0; i < h.rows(); ++i) tail[p++] = inv * h(i, j).imag();
  }
  return tail;
}

double compute_channel_rms(const std::vector<DatasetRecord>& records) {
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& r : records) {
    acc += r.h_s.squaredNorm() + r.h_s_ref.squaredNorm();
    count += static_cast<std::size_t>(r.h_s.size() + r.h_s_ref.size());
  }
  if (count == 0 || acc <= 0.0) return 1.0;
  return std::sqrt(acc / static_cast<double>(count));
}

double epoch_lr(double lr0, double lr_final, int epoch, int max_epochs) {
  if (lr_final <= 0.0 || lr_final >= lr0 || max_epochs < 2) return lr0;
  const double f = static_cast<double>(epoch) / (max_epochs - 1);
  return lr0 * std::pow(lr_final / lr0, f);
}

// Consecutive-epoch convergence tracker per the stated stopping rule.
class ConvergenceTracker {
 public:
  ConvergenceTracker(double epsilon, int window) : epsilon_(epsilon), window_(window) {}
  bool update(double epoch_loss) {
    if (window_ <= 0) return false;
    if (have_prev_) {
      const double improve = (prev_ - epoch_loss) / std::max(std::abs(prev_), 1e-300);
      streak_ = improve < epsilon_ ? streak_ + 1 : 0;
    }
    prev_ = epoch_loss;
    have_prev_ = true;
    return streak_ >= window_;
  }

 private:
  double epsilon_;
  int window_;
  double prev_ = 0.0;
  bool have_prev_ = false;
  int streak_ = 0;
};

}  // namespace

double loss2(const ChannelMatrix& h_ref_true, const ChannelMatrix& h_ref_hat) {
  return nmse(h_ref_true, h_ref_hat);
}

double loss1(const std::vector<Loss1Sample>& batch, const NoiseEstimatorParams& params,
             const DiffusionSchedule& sched) {
  if (batch.empty()) throw std::invalid_argument("loss1: empty batch");
  const int ctx_rows = context_dim(params.n_rx, params.n_tx);
  MatrixXd x(5, batch.size());
  MatrixXd ctx(ctx_rows, batch.size());
  MatrixXd eps(5, batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = batch[i];
    const double ab = sched.alpha_bar_t(s.t);
    x.col(static_cast<Eigen::Index>(i)) =
        std::sqrt(ab) * s.x0 + std::sqrt(1.0 - ab) * s.eps;
    eps.col(static_cast<Eigen::Index>(i)) = s.eps;
    fill_time_features(s.t, ctx.col(static_cast<Eigen::Index>(i)).head(5));
    ctx.col(static_cast<Eigen::Index>(i)).tail(ctx_rows - 5) =
        context_tail(s.h_ref, params.channel_rms);
  }
  const MatrixXd est = noise_net_forward(params.noise_net, x, ctx);
  double acc = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double w = loss_weight(sched, batch[i].t);
    acc += w * (est.col(static_cast<Eigen::Index>(i)) -
                eps.col(static_cast<Eigen::Index>(i)))
                   .squaredNorm();
  }
  return acc / static_cast<double>(batch.size());
}

TrainResult train(const std::vector<DatasetRecord>& records, const SystemConfig& cfg,
                  const TrainHyper& hyper, std::uint64_t seed,
                  const NoiseEstimatorParams* init) {
  if (records.empty()) throw std::invalid_argument("train: empty record list");
  TrainResult result;
  result.schedule = make_schedule(hyper.steps, hyper.beta_1, hyper.beta_t);
  const DiffusionSchedule& sched = result.schedule;

  Rng master(seed);
  if (init) {
    result.params = *init;
  } else {
    result.params = init_estimator_params(cfg.n_rx, cfg.n_tx, master.derive(0xA11).seed(),
                                          hyper.l_bar, hyper.transfer_width,
                                          hyper.transfer_blocks, hyper.noise_dims);
    result.params.channel_rms = compute_channel_rms(records);
  }
  NoiseEstimatorParams& params = result.params;
  const int ctx_rows = context_dim(params.n_rx, params.n_tx);

  // per-record context tails against the TRUE reference channels (phase 1)
  std::vector<Eigen::VectorXd> tails;
  tails.reserve(records.size());
  for (const auto& r : records) tails.push_back(context_tail(r.h_s_ref, params.channel_rms));

  std::size_t total_points = 0;
  for (const auto& r : records) total_points += r.cloud.size();

  if (hyper.run_phase1) {
    Rng rng = master.derive(1);
    AdamOptimizer adam(hyper.lr);
    NoiseNetGrads grads = NoiseNetGrads::zeros_like(params.noise_net);
    auto param_refs = tensor_refs(params.noise_net, "nn.");
    std::vector<TensorRef> grad_refs;
    for (int n = 0; n < params.noise_net.layers(); ++n) {
      const std::string tag = "nn." + std::to_string(n) + ".";
      grad_refs.push_back({tag + "w1", grads.w1[n].data(), grads.w1[n].rows(), grads.w1[n].cols()});
      grad_refs.push_back({tag + "b1", grads.b1[n].data(), grads.b1[n].size(), 1});
      grad_refs.push_back({tag + "w2", grads.w2[n].data(), grads.w2[n].rows(), grads.w2[n].cols()});
      grad_refs.push_back({tag + "b2", grads.b2[n].data(), grads.b2[n].size(), 1});
      grad_refs.push_back({tag + "w3", grads.w3[n].data(), grads.w3[n].rows(), grads.w3[n].cols()});
    }

    const int steps_per_epoch = static_cast<int>(
        (total_points + static_cast<std::size_t>(hyper.batch) - 1) /
        static_cast<std::size_t>(hyper.batch));
    ConvergenceTracker tracker(hyper.conv_epsilon, hyper.conv_window);
    MatrixXd x(5, hyper.batch), ctx(ctx_rows, hyper.batch), eps(5, hyper.batch);
    Eigen::VectorXd weights(hyper.batch);
    NoiseNetCache cache;

    for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
      adam.set_lr(epoch_lr(hyper.lr, hyper.lr_final, epoch, hyper.max_epochs));
      double epoch_loss = 0.0;
      for (int step = 0; step < steps_per_epoch; ++step) {
        for (int i = 0; i < hyper.batch; ++i) {
          const std::size_t rec = rng.index(records.size());
          const auto& cloud = records[rec].cloud;
          const std::size_t pt = rng.index(cloud.size());
          const int t = 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(sched.steps)));
          Point5D e;
          for (int d = 0; d < 5; ++d) e[d] = rng.gauss();
          const double ab = sched.alpha_bar_t(t);
          x.col(i) = std::sqrt(ab) * cloud.points[pt] + std::sqrt(1.0 - ab) * e;
          eps.col(i) = e;
          fill_time_features(t, ctx.col(i).head(5));
          ctx.col(i).tail(ctx_rows - 5) = tails[rec];
          weights[i] = loss_weight(sched, t);
        }
        const MatrixXd est = noise_net_forward(params.noise_net, x, ctx, &cache);
        const MatrixXd diff = est - eps;
        double loss = 0.0;
        for (int i = 0; i < hyper.batch; ++i) loss += weights[i] * diff.col(i).squaredNorm();
        loss /= static_cast<double>(hyper.batch);
        if (!std::isfinite(loss)) {
          throw std::runtime_error("train phase 1: non-finite loss at epoch " +
                                   std::to_string(epoch) + " step " + std::to_string(step));
        }
        epoch_loss += loss;

        MatrixXd d_out = diff;
        for (int i = 0; i < hyper.batch; ++i) {
          d_out.col(i) *= 2.0 * weights[i] / static_cast<double>(hyper.batch);
        }
        for (auto& g : grads.w1) g.setZero();
        for (auto& g : grads.w2) g.setZero();
        for (auto& g : grads.w3) g.setZero();
        for (auto& g : grads.b1) g.setZero();
        for (auto& g : grads.b2) g.setZero();
        noise_net_backward(params.noise_net, cache, d_out, grads);
        adam.step(param_refs, grad_refs);
      }
      epoch_loss /= static_cast<double>(steps_per_epoch);
      result.loss1_curve.push_back(epoch_loss);
      if (tracker.update(epoch_loss)) break;
    }
  }

  if (hyper.run_phase2) {
    Rng rng = master.derive(2);
    AdamOptimizer adam(hyper.phase2_lr);
    TransferNetGrads grads = TransferNetGrads::zeros_like(params.channel_transfer);
    auto param_refs = tensor_refs(params.channel_transfer, "ct.");
    std::vector<TensorRef> grad_refs;
    for (int i = 0; i < params.channel_transfer.blocks; ++i) {
      const std::string tag = "ct." + std::to_string(i) + ".";
      grad_refs.push_back({tag + "w", grads.w[i].data(), grads.w[i].rows(), grads.w[i].cols()});
      grad_refs.push_back({tag + "b", grads.b[i].data(), grads.b[i].size(), 1});
    }
    grad_refs.push_back({"ct.scale", grads.block_scale.data(), grads.block_scale.size(), 1});
    grad_refs.push_back({"ct.w_out", grads.w_out.data(), grads.w_out.rows(), grads.w_out.cols()});
    grad_refs.push_back({"ct.b_out", grads.b_out.data(), grads.b_out.size(), 1});

    // precompute inputs (measured channel + encoded center) and scaled targets
    const int in_dim = params.channel_transfer.in_dim;
    const int out_dim = params.channel_transfer.out_dim;
    MatrixXd inputs(in_dim, records.size());
    MatrixXd targets(out_dim, records.size());
    Eigen::VectorXd target_sqnorm(records.size());
    for (std::size_t r = 0; r < records.size(); ++r) {
      inputs.col(static_cast<Eigen::Index>(r)) =
          transfer_input(params, records[r].h_s, records[r].center_m);
      targets.col(static_cast<Eigen::Index>(r)) =
          context_tail(records[r].h_s_ref, params.channel_rms);
      target_sqnorm[static_cast<Eigen::Index>(r)] =
          targets.col(static_cast<Eigen::Index>(r)).squaredNorm();
      if (target_sqnorm[static_cast<Eigen::Index>(r)] <= 0.0) {
        throw std::runtime_error("train phase 2: zero-norm reference channel");
      }
    }

    const int batch = std::min<int>(hyper.phase2_batch, static_cast<int>(records.size()));
    const int steps_per_epoch = static_cast<int>(
        (records.size() + static_cast<std::size_t>(batch) - 1) /
        static_cast<std::size_t>(batch));
    ConvergenceTracker tracker(hyper.conv_epsilon, hyper.conv_window);
    MatrixXd vb(in_dim, batch), tb(out_dim, batch);
    Eigen::VectorXd norms(batch);
    TransferNetCache cache;

    for (int epoch = 0; epoch < hyper.phase2_max_epochs; ++epoch) {
      adam.set_lr(epoch_lr(hyper.phase2_lr, hyper.phase2_lr_final, epoch,
                           hyper.phase2_max_epochs));
      double epoch_loss = 0.0;
      for (int step = 0; step < steps_per_epoch; ++step) {
        for (int i = 0; i < batch; ++i) {
          const Eigen::Index r = static_cast<Eigen::Index>(rng.index(records.size()));
          vb.col(i) = inputs.col(r);
          tb.col(i) = targets.col(r);
          norms[i] = target_sqnorm[r];
        }
        const MatrixXd out = transfer_net_forward(params.channel_transfer, vb, &cache);
        MatrixXd d_out = out - tb;
        double loss = 0.0;
        for (int i = 0; i < batch; ++i) {
          loss += d_out.col(i).squaredNorm() / norms[i];
          d_out.col(i) *= 2.0 / (norms[i] * static_cast<double>(batch));
        }
        loss /= static_cast<double>(batch);
        if (!std::isfinite(loss)) {
          throw std::runtime_error("train phase 2: non-finite loss at epoch " +
                                   std::to_string(epoch) + " step " + std::to_string(step));
        }
        epoch_loss += loss;
        for (auto& g : grads.w) g.setZero();
        for (auto& g : grads.b) g.setZero();
        grads.block_scale.setZero();
        grads.w_out.setZero();
        grads.b_out.setZero();
        transfer_net_backward(params.channel_transfer, cache, d_out, grads);
        // small-norm reference channels blow up the normalized gradient;
        // a global-norm clip keeps those batches from derailing the moments
        double gnorm2 = 0.0;
        for (const auto& g : grad_refs) {
          for (Eigen::Index j = 0; j < g.size(); ++j) gnorm2 += g.data[j] * g.data[j];
        }
        const double clip = 10.0;
        if (gnorm2 > clip * clip) {
          const double f = clip / std::sqrt(gnorm2);
          for (auto& g : grad_refs) {
            for (Eigen::Index j = 0; j < g.size(); ++j) g.data[j] *= f;
          }
        }
        adam.step(param_refs, grad_refs);
      }
      epoch_loss /= static_cast<double>(steps_per_epoch);
      result.loss2_curve.push_back(epoch_loss);
      if (tracker.update(epoch_loss)) break;
    }
  }

  return result;
}

PointCloud5D sample_cloud(const NoiseEstimatorParams& params, const ChannelMatrix& h_hat,
                          const Vec3& center, int n_points,
                          const DiffusionSchedule& sched, std::uint64_t seed,
                          const SampleOptions& opt) {
  if (n_points < 1) throw std::invalid_argument("sample_cloud: need N >= 1");
  const ChannelMatrix h_ref = channel_transfer_forward(params, h_hat, center);
  const Eigen::VectorXd tail = context_tail(h_ref, params.channel_rms);
  const int ctx_rows = context_dim(params.n_rx, params.n_tx);

  Rng master(seed);
  MatrixXd x(5, n_points);
  for (int i = 0; i < n_points; ++i) {
    Rng stream = master.derive(static_cast<std::uint64_t>(i), 0);
    for (int d = 0; d < 5; ++d) x(d, i) = stream.gauss();
  }

  MatrixXd ctx(ctx_rows, n_points);
  for (int i = 0; i < n_points; ++i) ctx.col(i).tail(ctx_rows - 5) = tail;

  for (int t = sched.steps; t >= 1; --t) {
    Eigen::VectorXd head(5);
    fill_time_features(t, head);
    for (int i = 0; i < n_points; ++i) ctx.col(i).head(5) = head;
    const MatrixXd est = noise_net_forward(params.noise_net, x, ctx);

    const double ab = sched.alpha_bar_t(t);
    const double mean_scale = 1.0 / std::sqrt(sched.alpha_t(t));
    const double eps_scale = sched.beta_t(t) / std::sqrt(1.0 - ab);
    const double stddev =
        t > 1 ? std::sqrt(opt.gamma_variance ? sched.gamma_t(t) : sched.beta_t(t)) : 0.0;
    for (int i = 0; i < n_points; ++i) {
      Point5D mu = mean_scale * (x.col(i) - eps_scale * est.col(i));
      if (stddev > 0.0) {
        Rng stream = master.derive(static_cast<std::uint64_t>(i),
                                   static_cast<std::uint64_t>(t));
        for (int d = 0; d < 5; ++d) mu[d] += stddev * stream.gauss();
      }
      x.col(i) = mu;
    }
  }

  PointCloud5D cloud;
  cloud.points.reserve(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) cloud.points.push_back(x.col(i));
  return cloud;
}

void write_loss_csv(const std::string& path, const std::vector<double>& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "epoch,loss\n" << std::setprecision(17);
  for (std::size_t i = 0; i < curve.size(); ++i) out << i << ',' << curve[i] << '\n';
}

}  // namespace isac
