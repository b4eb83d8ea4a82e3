#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "isac/rng.hpp"
#include "isac/types.hpp"

namespace isac {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Gated (concatsquash) noise estimating network:
//   e_{n+1} = (W1 e_n + b1) .* sigmoid(W2 c + b2) + W3 c
// with a Swish nonlinearity between layers and the context vector c shared by
// every layer. Input is the 5D point state, output the estimated noise.
// ---------------------------------------------------------------------------
struct NoiseNetParams {
  std::vector<int> dims;  // layer widths, length = layers + 1, front/back = 5
  int ctx_dim = 0;
  std::vector<MatrixXd> w1, w2, w3;
  std::vector<VectorXd> b1, b2;

  int layers() const { return static_cast<int>(w1.size()); }
  static NoiseNetParams make(const std::vector<int>& dims, int ctx_dim, Rng& rng);
  static std::vector<int> default_dims() {
    return {5, 16, 64, 128, 256, 512, 256, 128, 64, 16, 5};
  }
};

struct NoiseNetCache {
  MatrixXd input;
  MatrixXd ctx;
  std::vector<MatrixXd> pre_gate;   // W1 e + b1
  std::vector<MatrixXd> gate;       // sigmoid(W2 c + b2)
  std::vector<MatrixXd> post;       // layer output before Swish
  std::vector<MatrixXd> activated;  // layer output after Swish (inputs of next layer)
};

struct NoiseNetGrads {
  std::vector<MatrixXd> w1, w2, w3;
  std::vector<VectorXd> b1, b2;
  static NoiseNetGrads zeros_like(const NoiseNetParams& p);
  void scale(double f);
};

// x: 5 x B point states, ctx: ctx_dim x B per-sample context columns.
MatrixXd noise_net_forward(const NoiseNetParams& p, const MatrixXd& x,
                           const MatrixXd& ctx, NoiseNetCache* cache = nullptr);

// Accumulates parameter gradients for upstream gradient d_out (5 x B).
void noise_net_backward(const NoiseNetParams& p, const NoiseNetCache& cache,
                        const MatrixXd& d_out, NoiseNetGrads& grads);

// ---------------------------------------------------------------------------
// Channel transferring network: densely connected blocks of a fixed width
// with concatenating skips, per-block trainable output multipliers, and a
// linear readout over the full concatenation.
// ---------------------------------------------------------------------------
struct TransferNetParams {
  int in_dim = 0, out_dim = 0, width = 512, blocks = 6;
  std::vector<MatrixXd> w;  // block i: width x (in_dim + i*width)
  std::vector<VectorXd> b;
  VectorXd block_scale;     // trainable multiplier per block output
  MatrixXd w_out;           // out_dim x (in_dim + blocks*width)
  VectorXd b_out;

  static TransferNetParams make(int in_dim, int out_dim, int width, int blocks,
                                Rng& rng);
};

struct TransferNetCache {
  MatrixXd cat;                 // concatenated features, rows grow per block
  std::vector<MatrixXd> pre;    // W_i cat_i + b_i
};

struct TransferNetGrads {
  std::vector<MatrixXd> w;
  std::vector<VectorXd> b;
  VectorXd block_scale;
  MatrixXd w_out;
  VectorXd b_out;
  static TransferNetGrads zeros_like(const TransferNetParams& p);
  void scale(double f);
};

MatrixXd transfer_net_forward(const TransferNetParams& p, const MatrixXd& v,
                              TransferNetCache* cache = nullptr);
void transfer_net_backward(const TransferNetParams& p, const TransferNetCache& cache,
                           const MatrixXd& d_out, TransferNetGrads& grads);

// ---------------------------------------------------------------------------
// Combined estimator parameters + Adam optimizer + checkpoint format.
// ---------------------------------------------------------------------------
struct NoiseEstimatorParams {
  int n_rx = 0, n_tx = 0, l_bar = 10;
  double channel_rms = 1.0;  // training-set rms of |H|; inputs scaled by 1/rms
  NoiseNetParams noise_net;
  TransferNetParams channel_transfer;
};

struct TensorRef {
  std::string name;
  double* data = nullptr;
  Eigen::Index rows = 0, cols = 0;
  Eigen::Index size() const { return rows * cols; }
};

std::vector<TensorRef> tensor_refs(NoiseNetParams& p, const std::string& prefix);
std::vector<TensorRef> tensor_refs(TransferNetParams& p, const std::string& prefix);
std::vector<TensorRef> tensor_refs(NoiseEstimatorParams& p);

class AdamOptimizer {
 public:
  AdamOptimizer(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // params and grads must enumerate tensors in the same order every call.
  void step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads);

  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<VectorXd> m_, v_;
};

// Checkpoint: magic "ISACDM1\0", u64 manifest byte count, text manifest of
// "name rows cols" lines, then f64 tensor payloads in manifest order.
void save_checkpoint(const std::string& path, NoiseEstimatorParams& params);
NoiseEstimatorParams load_checkpoint(const std::string& path);

// Spec-facing single-sample wrappers.
ChannelMatrix channel_transfer_forward(const NoiseEstimatorParams& params,
                                       const ChannelMatrix& h_hat, const Vec3& center);
Point5D noise_estimator_forward(const NoiseEstimatorParams& params, const Point5D& x_t,
                                int t, const ChannelMatrix& h_ref_hat);

// Transfer-net input layout: [vec(Re H~), vec(Im H~), xi(x), xi(y), xi(z)].
VectorXd transfer_input(const NoiseEstimatorParams& params, const ChannelMatrix& h_hat,
                        const Vec3& center);
int transfer_in_dim(int n_rx, int n_tx, int l_bar);

// Fresh parameter set for a system size (paper-default architecture sizes).
NoiseEstimatorParams init_estimator_params(int n_rx, int n_tx, std::uint64_t seed,
                                           int l_bar = 10, int transfer_width = 512,
                                           int transfer_blocks = 6,
                                           const std::vector<int>& noise_dims =
                                               NoiseNetParams::default_dims());

}  // namespace isac
