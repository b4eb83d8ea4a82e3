#include <doctest.h>

#include <cmath>

#include "isac/constants.hpp"
#include "isac/diffusion.hpp"
#include "isac/nets.hpp"
#include "isac/rng.hpp"
#include "isac/train.hpp"
#include "support/util.hpp"

using namespace isac;

namespace {

ChannelMatrix random_channel_matrix(int rows, int cols, Rng& rng, double scale = 1.0) {
  ChannelMatrix h(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) h(i, j) = scale * rng.cgauss();
  }
  return h;
}

// Small-architecture parameter set for gradient and smoke tests.
NoiseEstimatorParams small_params(int n_rx, int n_tx, std::uint64_t seed) {
  return init_estimator_params(n_rx, n_tx, seed, /*l_bar=*/3, /*width=*/24,
                               /*blocks=*/2, {5, 8, 12, 8, 5});
}

}  // namespace

TEST_CASE("schedule identities are exact") {
  const DiffusionSchedule s = make_schedule(200, 1e-4, 0.05);
  CHECK(s.beta[0] == 1e-4);
  CHECK(s.beta[199] == doctest::Approx(0.05).epsilon(1e-15));
  double prod = 1.0;
  for (int t = 1; t <= 200; ++t) {
    CHECK(s.alpha_t(t) == 1.0 - s.beta_t(t));  // exact by construction
    prod *= s.alpha_t(t);
    CHECK(s.alpha_bar_t(t) == prod);
    if (t >= 2) {
      const double expected =
          (1.0 - s.alpha_bar_t(t - 1)) / (1.0 - s.alpha_bar_t(t)) * s.beta_t(t);
      CHECK(s.gamma_t(t) == expected);
      CHECK(s.gamma_t(t) > 0.0);
      CHECK(s.beta_t(t) > s.beta_t(t - 1));
      CHECK(s.alpha_bar_t(t) < s.alpha_bar_t(t - 1));
    }
  }
  // frozen regression constant: direct product under the stated ramp
  CHECK(s.alpha_bar_t(200) ==
        doctest::Approx(0.006121965241292836).epsilon(1e-12));
  CHECK(s.alpha_bar_t(200) < 0.02);
}

TEST_CASE("schedule preconditions") {
  CHECK_THROWS_AS(make_schedule(1, 1e-4, 0.05), std::domain_error);
  CHECK_THROWS_AS(make_schedule(10, 0.05, 0.05), std::domain_error);
  CHECK_THROWS_AS(make_schedule(10, 0.0, 0.05), std::domain_error);
  CHECK_THROWS_AS(make_schedule(10, 1e-4, 1.0), std::domain_error);
}

TEST_CASE("forward jump inverts exactly given the shared noise") {
  const DiffusionSchedule s = make_schedule(100, 1e-4, 0.05);
  Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    Point5D x0;
    for (int d = 0; d < 5; ++d) x0[d] = 3.0 * rng.gauss();
    const int t = 1 + static_cast<int>(rng.index(100));
    auto [x_t, eps] = forward_sample(x0, t, s, rng);
    const Point5D back = reconstruct_x0(x_t, eps, t, s);
    CHECK((back - x0).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + x0.cwiseAbs().maxCoeff()));
  }
  // eps = 0 degenerate case
  Point5D x0 = Point5D::Ones();
  const Point5D scaled = reconstruct_x0(x0, Point5D::Zero(), 10, s);
  CHECK(scaled[0] == doctest::Approx(1.0 / std::sqrt(s.alpha_bar_t(10))).epsilon(1e-15));
}

TEST_CASE("forward marginal moments match the schedule") {
  const DiffusionSchedule s = make_schedule(50, 1e-3, 0.04);
  const int t = 30;
  Point5D x0;
  x0 << 0.5, -1.0, 2.0, 3.0, 0.1;
  Rng rng(7);
  const int draws = 100000;
  Point5D mean = Point5D::Zero(), var = Point5D::Zero();
  for (int i = 0; i < draws; ++i) {
    auto [x_t, eps] = forward_sample(x0, t, s, rng);
    mean += x_t;
    var += x_t.cwiseProduct(x_t);
  }
  mean /= draws;
  var = var / draws - mean.cwiseProduct(mean);
  const double ab = s.alpha_bar_t(t);
  const double se = std::sqrt((1.0 - ab) / draws);
  for (int d = 0; d < 5; ++d) {
    CHECK(std::abs(mean[d] - std::sqrt(ab) * x0[d]) < 4.0 * se);
    CHECK(var[d] == doctest::Approx(1.0 - ab).epsilon(0.05));
  }
}

TEST_CASE("two-step composition matches the closed-form marginal") {
  const DiffusionSchedule s = make_schedule(10, 0.01, 0.2);
  Point5D x0;
  x0 << 1.0, 0.0, -2.0, 4.0, 0.3;
  Rng rng(11);
  const int draws = 200000;
  Point5D mean = Point5D::Zero(), var = Point5D::Zero();
  for (int i = 0; i < draws; ++i) {
    // iterate the single-step kernel twice
    Point5D x = x0;
    for (int t = 1; t <= 2; ++t) {
      Point5D z;
      for (int d = 0; d < 5; ++d) z[d] = rng.gauss();
      x = std::sqrt(1.0 - s.beta_t(t)) * x + std::sqrt(s.beta_t(t)) * z;
    }
    mean += x;
    var += x.cwiseProduct(x);
  }
  mean /= draws;
  var = var / draws - mean.cwiseProduct(mean);
  const double ab2 = s.alpha_bar_t(2);
  for (int d = 0; d < 5; ++d) {
    CHECK(std::abs(mean[d] - std::sqrt(ab2) * x0[d]) < 4.0 * std::sqrt(1.0 / draws));
    CHECK(var[d] == doctest::Approx(1.0 - ab2).epsilon(0.05));
  }
}

TEST_CASE("posterior mean identities agree") {
  const DiffusionSchedule s = make_schedule(64, 1e-4, 0.05);
  Rng rng(13);
  for (int rep = 0; rep < 100; ++rep) {
    Point5D x0;
    for (int d = 0; d < 5; ++d) x0[d] = 2.0 * rng.gauss();
    const int t = 1 + static_cast<int>(rng.index(64));
    auto [x_t, eps] = forward_sample(x0, t, s, rng);
    const Point5D mu_x0 = posterior_mean_from_x0(x_t, x0, t, s);
    const Point5D mu_eps = posterior_mean_from_eps(x_t, eps, t, s);
    CHECK((mu_x0 - mu_eps).cwiseAbs().maxCoeff() <
          1e-12 * (1.0 + mu_x0.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("positional encoding values and length") {
  const Eigen::VectorXd enc0 = positional_encode(0.0, 10);
  REQUIRE(enc0.size() == 21);
  CHECK(enc0[0] == 0.0);
  for (int k = 0; k < 10; ++k) {
    CHECK(enc0[1 + 2 * k] == 0.0);  // sin
    CHECK(enc0[2 + 2 * k] == 1.0);  // cos
  }
  const Eigen::VectorXd enc1 = positional_encode(1.0, 4);
  REQUIRE(enc1.size() == 9);
  CHECK(enc1[0] == 1.0);
  for (int k = 0; k < 4; ++k) {
    CHECK(std::abs(enc1[1 + 2 * k]) < 1e-12);                       // sin(2^k pi)
    CHECK(enc1[2 + 2 * k] == doctest::Approx(k == 0 ? -1.0 : 1.0)); // cos(2^k pi)
  }
  for (int l = 1; l <= 12; ++l) {
    CHECK(positional_encode(0.37, l).size() == 2 * l + 1);
  }
}

TEST_CASE("context vector layout") {
  Rng rng(17);
  const ChannelMatrix h = random_channel_matrix(2, 3, rng);
  const Eigen::VectorXd c = build_context(7, h);
  REQUIRE(c.size() == 5 + 2 * 6);
  CHECK(c[0] == 7.0);
  CHECK(c[1] == doctest::Approx(std::sin(7.0)));
  CHECK(c[4] == doctest::Approx(std::cos(14.0)));
  CHECK(c[5] == h(0, 0).real());   // column-major vec, real block first
  CHECK(c[6] == h(1, 0).real());
  CHECK(c[11] == h(0, 0).imag());
  CHECK(context_dim(2, 3) == c.size());
}

TEST_CASE("zero-parameter noise net outputs zero") {
  NoiseEstimatorParams p = small_params(2, 2, 3);
  for (auto& w : p.noise_net.w1) w.setZero();
  for (auto& w : p.noise_net.w2) w.setZero();
  for (auto& w : p.noise_net.w3) w.setZero();
  for (auto& b : p.noise_net.b1) b.setZero();
  for (auto& b : p.noise_net.b2) b.setZero();
  Rng rng(19);
  Point5D x;
  for (int d = 0; d < 5; ++d) x[d] = rng.gauss();
  const ChannelMatrix h = random_channel_matrix(2, 2, rng);
  const Point5D out = noise_estimator_forward(p, x, 5, h);
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("noise net is applied pointwise: permuting columns permutes outputs") {
  NoiseEstimatorParams p = small_params(2, 2, 5);
  Rng rng(23);
  const int batch = 7;
  MatrixXd x(5, batch);
  MatrixXd ctx(context_dim(2, 2), batch);
  for (int i = 0; i < batch; ++i) {
    for (int d = 0; d < 5; ++d) x(d, i) = rng.gauss();
    for (int d = 0; d < ctx.rows(); ++d) ctx(d, i) = rng.gauss();
  }
  const MatrixXd out = noise_net_forward(p.noise_net, x, ctx);
  MatrixXd xp(5, batch), cp(ctx.rows(), batch);
  for (int i = 0; i < batch; ++i) {
    xp.col(i) = x.col(batch - 1 - i);
    cp.col(i) = ctx.col(batch - 1 - i);
  }
  const MatrixXd outp = noise_net_forward(p.noise_net, xp, cp);
  for (int i = 0; i < batch; ++i) {
    CHECK((outp.col(i) - out.col(batch - 1 - i)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("deterministic forward passes") {
  NoiseEstimatorParams p = small_params(2, 2, 7);
  Rng rng(29);
  const ChannelMatrix h = random_channel_matrix(2, 2, rng);
  Point5D x;
  for (int d = 0; d < 5; ++d) x[d] = rng.gauss();
  const Point5D a = noise_estimator_forward(p, x, 3, h);
  const Point5D b = noise_estimator_forward(p, x, 3, h);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  const ChannelMatrix ha = channel_transfer_forward(p, h, Vec3(3, 0, 0));
  const ChannelMatrix hb = channel_transfer_forward(p, h, Vec3(3, 0, 0));
  CHECK((ha - hb).cwiseAbs().maxCoeff() == 0.0);
  CHECK(ha.rows() == 2);
  CHECK(ha.cols() == 2);
}

TEST_CASE("noise net gradients match central finite differences") {
  Rng seeds(31);
  for (int rep = 0; rep < 3; ++rep) {
    NoiseEstimatorParams p = small_params(2, 2, seeds.bits());
    Rng rng(seeds.bits());
    const int batch = 3;
    MatrixXd x(5, batch), ctx(context_dim(2, 2), batch), target(5, batch);
    for (int i = 0; i < batch; ++i) {
      for (int d = 0; d < 5; ++d) x(d, i) = rng.gauss();
      for (int d = 0; d < ctx.rows(); ++d) ctx(d, i) = rng.gauss();
      for (int d = 0; d < 5; ++d) target(d, i) = rng.gauss();
    }
    auto loss_value = [&]() {
      const MatrixXd out = noise_net_forward(p.noise_net, x, ctx);
      return (out - target).squaredNorm();
    };
    NoiseNetCache cache;
    const MatrixXd out = noise_net_forward(p.noise_net, x, ctx, &cache);
    NoiseNetGrads grads = NoiseNetGrads::zeros_like(p.noise_net);
    noise_net_backward(p.noise_net, cache, 2.0 * (out - target), grads);

    auto check_tensor = [&](double* data, Eigen::Index size, const double* gdata,
                            const char* name) {
      Rng pick(1234);
      for (int probe = 0; probe < 4; ++probe) {
        const Eigen::Index idx =
            static_cast<Eigen::Index>(pick.index(static_cast<std::uint64_t>(size)));
        const double h = 1e-5;
        const double saved = data[idx];
        data[idx] = saved + h;
        const double hi = loss_value();
        data[idx] = saved - h;
        const double lo = loss_value();
        data[idx] = saved;
        const double fd = (hi - lo) / (2.0 * h);
        const double an = gdata[idx];
        INFO(name << " idx " << idx);
        CHECK(std::abs(fd - an) <= 1e-4 * std::max({std::abs(fd), std::abs(an), 1e-6}));
      }
    };
    for (int n = 0; n < p.noise_net.layers(); ++n) {
      auto& nn = p.noise_net;
      check_tensor(nn.w1[n].data(), nn.w1[n].size(), grads.w1[n].data(), "w1");
      check_tensor(nn.w2[n].data(), nn.w2[n].size(), grads.w2[n].data(), "w2");
      check_tensor(nn.w3[n].data(), nn.w3[n].size(), grads.w3[n].data(), "w3");
      check_tensor(nn.b1[n].data(), nn.b1[n].size(), grads.b1[n].data(), "b1");
      check_tensor(nn.b2[n].data(), nn.b2[n].size(), grads.b2[n].data(), "b2");
    }
  }
}

TEST_CASE("transfer net gradients match central finite differences") {
  Rng seeds(37);
  for (int rep = 0; rep < 3; ++rep) {
    TransferNetParams p = TransferNetParams::make(11, 6, 16, 2, seeds);
    Rng rng(seeds.bits());
    const int batch = 4;
    MatrixXd v(11, batch), target(6, batch);
    for (int i = 0; i < batch; ++i) {
      for (int d = 0; d < 11; ++d) v(d, i) = rng.gauss();
      for (int d = 0; d < 6; ++d) target(d, i) = rng.gauss();
    }
    auto loss_value = [&]() {
      return (transfer_net_forward(p, v) - target).squaredNorm();
    };
    TransferNetCache cache;
    const MatrixXd out = transfer_net_forward(p, v, &cache);
    TransferNetGrads grads = TransferNetGrads::zeros_like(p);
    transfer_net_backward(p, cache, 2.0 * (out - target), grads);

    auto check_tensor = [&](double* data, Eigen::Index size, const double* gdata,
                            const char* name) {
      Rng pick(4321);
      for (int probe = 0; probe < 4; ++probe) {
        const Eigen::Index idx =
            static_cast<Eigen::Index>(pick.index(static_cast<std::uint64_t>(size)));
        const double h = 1e-5;
        const double saved = data[idx];
        data[idx] = saved + h;
        const double hi = loss_value();
        data[idx] = saved - h;
        const double lo = loss_value();
        data[idx] = saved;
        const double fd = (hi - lo) / (2.0 * h);
        const double an = gdata[idx];
        INFO(name << " idx " << idx);
        CHECK(std::abs(fd - an) <= 1e-4 * std::max({std::abs(fd), std::abs(an), 1e-6}));
      }
    };
    for (int i = 0; i < p.blocks; ++i) {
      check_tensor(p.w[i].data(), p.w[i].size(), grads.w[i].data(), "w");
      check_tensor(p.b[i].data(), p.b[i].size(), grads.b[i].data(), "b");
    }
    check_tensor(p.block_scale.data(), p.block_scale.size(), grads.block_scale.data(),
                 "scale");
    check_tensor(p.w_out.data(), p.w_out.size(), grads.w_out.data(), "w_out");
    check_tensor(p.b_out.data(), p.b_out.size(), grads.b_out.data(), "b_out");
  }
}

TEST_CASE("loss1 basics") {
  NoiseEstimatorParams p = small_params(2, 2, 41);
  const DiffusionSchedule s = make_schedule(20, 1e-3, 0.04);
  Rng rng(43);
  const ChannelMatrix h = random_channel_matrix(2, 2, rng);

  // zero parameters and zero noise: the estimator reproduces eps exactly
  NoiseEstimatorParams zeroed = p;
  for (auto& w : zeroed.noise_net.w1) w.setZero();
  for (auto& w : zeroed.noise_net.w2) w.setZero();
  for (auto& w : zeroed.noise_net.w3) w.setZero();
  std::vector<Loss1Sample> batch;
  for (int i = 0; i < 8; ++i) {
    Loss1Sample item;
    for (int d = 0; d < 5; ++d) item.x0[d] = rng.gauss();
    item.t = 1 + static_cast<int>(rng.index(20));
    item.eps = Point5D::Zero();
    item.h_ref = h;
    batch.push_back(item);
  }
  CHECK(loss1(batch, zeroed, s) == 0.0);

  // with eps nonzero and a zero estimator, the loss is the weighted norm;
  // doubling every residual quadruples it
  for (auto& item : batch) {
    for (int d = 0; d < 5; ++d) item.eps[d] = rng.gauss();
  }
  const double base = loss1(batch, zeroed, s);
  CHECK(base > 0.0);
  for (auto& item : batch) item.eps *= 2.0;
  CHECK(loss1(batch, zeroed, s) == doctest::Approx(4.0 * base).epsilon(1e-12));

  // weights strictly positive across all steps
  for (int t = 1; t <= 20; ++t) {
    CHECK(s.beta_t(t) / (2.0 * s.alpha_t(t) * (1.0 - s.alpha_bar_t(t))) > 0.0);
  }
}

TEST_CASE("loss2 is the reference-channel NMSE") {
  Rng rng(47);
  const ChannelMatrix h = random_channel_matrix(3, 4, rng);
  CHECK(loss2(h, h) == 0.0);
  CHECK(loss2(h, ChannelMatrix::Zero(3, 4)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(loss2(h, 2.0 * h) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("checkpoint round trip is bit exact") {
  NoiseEstimatorParams p = small_params(2, 3, 53);
  p.channel_rms = 0.123456789;
  const std::string dir = isac::testing::scratch_dir("ckpt");
  save_checkpoint(dir + "/m.isacdm", p);
  NoiseEstimatorParams q = load_checkpoint(dir + "/m.isacdm");
  CHECK(q.n_rx == 2);
  CHECK(q.n_tx == 3);
  CHECK(q.channel_rms == p.channel_rms);
  auto pr = tensor_refs(p);
  auto qr = tensor_refs(q);
  REQUIRE(pr.size() == qr.size());
  for (std::size_t i = 0; i < pr.size(); ++i) {
    REQUIRE(pr[i].size() == qr[i].size());
    for (Eigen::Index j = 0; j < pr[i].size(); ++j) {
      CHECK(pr[i].data[j] == qr[i].data[j]);
    }
  }
  save_checkpoint(dir + "/m2.isacdm", q);
}

namespace {

std::vector<DatasetRecord> toy_records(int count, int n_points, int n_rx, int n_tx,
                                       std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DatasetRecord> records;
  for (int r = 0; r < count; ++r) {
    DatasetRecord rec;
    rec.id = r;
    rec.center_m = Vec3(3.0 + rng.uniform(), rng.uniform(), 0.0);
    rec.h_s = random_channel_matrix(n_rx, n_tx, rng, 1e-6);
    rec.h_s_ref = 0.7 * rec.h_s;
    const double radius = 0.5 + 0.5 * rng.uniform();
    for (int i = 0; i < n_points; ++i) {
      Point5D q;
      const double a = 2.0 * kPi * i / n_points;
      q << radius * std::cos(a), radius * std::sin(a), 0.1 * rng.gauss(), 2.5, 0.05;
      rec.cloud.points.push_back(q);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

TEST_CASE("training runs deterministically and the phases are independent") {
  const SystemConfig cfg = isac::testing::make_test_config(2, 2, 4);
  const auto records = toy_records(4, 24, cfg.n_rx, cfg.n_tx, 59);

  TrainHyper hyper;
  hyper.steps = 12;
  hyper.batch = 16;
  hyper.max_epochs = 3;
  hyper.phase2_max_epochs = 3;
  hyper.conv_window = 0;
  hyper.l_bar = 2;
  hyper.transfer_width = 16;
  hyper.transfer_blocks = 2;
  hyper.noise_dims = {5, 8, 8, 5};

  const TrainResult a = train(records, cfg, hyper, 7);
  const TrainResult b = train(records, cfg, hyper, 7);
  REQUIRE(a.loss1_curve.size() == b.loss1_curve.size());
  for (std::size_t i = 0; i < a.loss1_curve.size(); ++i) {
    CHECK(a.loss1_curve[i] == b.loss1_curve[i]);
  }

  // retraining phase 2 must not touch the noise net (bitwise)
  TrainHyper p2only = hyper;
  p2only.run_phase1 = false;
  NoiseEstimatorParams before = a.params;
  const TrainResult c = train(records, cfg, p2only, 1234, &before);
  auto ra = tensor_refs(const_cast<NoiseEstimatorParams&>(a.params).noise_net, "nn.");
  auto rc = tensor_refs(const_cast<TrainResult&>(c).params.noise_net, "nn.");
  for (std::size_t i = 0; i < ra.size(); ++i) {
    for (Eigen::Index j = 0; j < ra[i].size(); ++j) {
      CHECK(ra[i].data[j] == rc[i].data[j]);
    }
  }
  // and the transfer net did change
  bool changed = false;
  auto ta = tensor_refs(const_cast<NoiseEstimatorParams&>(a.params).channel_transfer, "ct.");
  auto tc = tensor_refs(const_cast<TrainResult&>(c).params.channel_transfer, "ct.");
  for (std::size_t i = 0; i < ta.size() && !changed; ++i) {
    for (Eigen::Index j = 0; j < ta[i].size() && !changed; ++j) {
      changed = ta[i].data[j] != tc[i].data[j];
    }
  }
  CHECK(changed);
}

TEST_CASE("loss curves trend downward on a learnable toy problem") {
  const SystemConfig cfg = isac::testing::make_test_config(2, 2, 4);
  const auto records = toy_records(6, 32, cfg.n_rx, cfg.n_tx, 61);
  TrainHyper hyper;
  hyper.steps = 16;
  hyper.batch = 32;
  hyper.max_epochs = 40;
  hyper.phase2_max_epochs = 60;
  hyper.conv_window = 0;
  hyper.l_bar = 2;
  hyper.transfer_width = 24;
  hyper.transfer_blocks = 2;
  hyper.noise_dims = {5, 12, 16, 12, 5};
  const TrainResult res = train(records, cfg, hyper, 17);

  auto mean_of = [](const std::vector<double>& v, std::size_t lo, std::size_t hi) {
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += v[i];
    return acc / (hi - lo);
  };
  const auto& l1 = res.loss1_curve;
  CHECK(mean_of(l1, l1.size() - 5, l1.size()) < mean_of(l1, 0, 5));
  const auto& l2 = res.loss2_curve;
  CHECK(mean_of(l2, l2.size() - 5, l2.size()) < mean_of(l2, 0, 5));
  CHECK(l2.back() < 0.5);  // the toy transfer map (scaling) is learnable
}

TEST_CASE("sampler determinism and pointwise independence") {
  NoiseEstimatorParams p = small_params(2, 2, 67);
  p.channel_rms = 1.0;
  Rng rng(71);
  const ChannelMatrix h = random_channel_matrix(2, 2, rng);
  const DiffusionSchedule s = make_schedule(10, 1e-3, 0.05);

  const PointCloud5D a = sample_cloud(p, h, Vec3(3, 0, 0), 2, s, 77);
  const PointCloud5D b = sample_cloud(p, h, Vec3(3, 0, 0), 2, s, 77);
  REQUIRE(a.size() == 2);
  for (int i = 0; i < 2; ++i) {
    CHECK((a.points[i] - b.points[i]).cwiseAbs().maxCoeff() == 0.0);
  }
  // sampling N = 2 equals sampling the same two points one at a time only for
  // the first point's stream; the second point's stream is index-derived, so
  // compare against a single-point call — per-point streams make point 0 of
  // any call identical
  const PointCloud5D single = sample_cloud(p, h, Vec3(3, 0, 0), 1, s, 77);
  CHECK((a.points[0] - single.points[0]).cwiseAbs().maxCoeff() == 0.0);
  // pointwise factorization: adding a third point leaves the first two alone
  const PointCloud5D three = sample_cloud(p, h, Vec3(3, 0, 0), 3, s, 77);
  for (int i = 0; i < 2; ++i) {
    CHECK((a.points[i] - three.points[i]).cwiseAbs().maxCoeff() == 0.0);
  }

  const PointCloud5D c = sample_cloud(p, h, Vec3(3, 0, 0), 2, s, 78);
  CHECK((a.points[0] - c.points[0]).cwiseAbs().maxCoeff() != 0.0);
}

TEST_CASE("single-step chain: reverse exactly inverts the t = 1 forward step") {
  NoiseEstimatorParams p = small_params(2, 2, 73);
  const DiffusionSchedule s = make_schedule(8, 1e-3, 0.05);
  Rng rng(79);
  Point5D x0;
  for (int d = 0; d < 5; ++d) x0[d] = rng.gauss();
  // t = 1: 1 - abar_1 = beta_1, so the mean formula collapses to the inverse
  auto [x1, eps] = forward_sample(x0, 1, s, rng);
  const Point5D back = posterior_mean_from_eps(x1, eps, 1, s);
  CHECK((back - x0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gamma-variance ablation changes only the injected noise scale") {
  NoiseEstimatorParams p = small_params(2, 2, 83);
  Rng rng(89);
  const ChannelMatrix h = random_channel_matrix(2, 2, rng);
  const DiffusionSchedule s = make_schedule(10, 1e-3, 0.05);
  SampleOptions beta_opt, gamma_opt;
  gamma_opt.gamma_variance = true;
  const PointCloud5D a = sample_cloud(p, h, Vec3(3, 0, 0), 1, s, 91, beta_opt);
  const PointCloud5D b = sample_cloud(p, h, Vec3(3, 0, 0), 1, s, 91, gamma_opt);
  CHECK((a.points[0] - b.points[0]).cwiseAbs().maxCoeff() != 0.0);
}
