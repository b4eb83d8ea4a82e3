#include "isac/nets.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "isac/diffusion.hpp"

namespace isac {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

MatrixXd sigmoid_mat(const MatrixXd& x) {
  return x.unaryExpr([](double v) { return sigmoid(v); });
}

MatrixXd swish_mat(const MatrixXd& x) {
  return x.unaryExpr([](double v) { return v * sigmoid(v); });
}

MatrixXd swish_deriv_mat(const MatrixXd& x) {
  return x.unaryExpr([](double v) {
    const double s = sigmoid(v);
    return s * (1.0 + v * (1.0 - s));
  });
}

MatrixXd gauss_matrix(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
  MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = scale * rng.gauss();
  }
  return m;
}

}  // namespace

NoiseNetParams NoiseNetParams::make(const std::vector<int>& dims, int ctx_dim,
                                    Rng& rng) {
  if (dims.size() < 2 || dims.front() != 5 || dims.back() != 5) {
    throw std::invalid_argument("noise net dims must start and end at 5");
  }
  NoiseNetParams p;
  p.dims = dims;
  p.ctx_dim = ctx_dim;
  const int n_layers = static_cast<int>(dims.size()) - 1;
  const double ctx_scale = 1.0 / std::sqrt(static_cast<double>(ctx_dim));
  for (int n = 0; n < n_layers; ++n) {
    const int din = dims[static_cast<std::size_t>(n)];
    const int dout = dims[static_cast<std::size_t>(n) + 1];
    const double in_scale = 1.0 / std::sqrt(static_cast<double>(din));
    p.w1.push_back(gauss_matrix(dout, din, in_scale, rng));
    p.b1.push_back(VectorXd::Zero(dout));
    p.w2.push_back(gauss_matrix(dout, ctx_dim, ctx_scale, rng));
    p.b2.push_back(VectorXd::Zero(dout));
    p.w3.push_back(gauss_matrix(dout, ctx_dim, ctx_scale, rng));
  }
  return p;
}

NoiseNetGrads NoiseNetGrads::zeros_like(const NoiseNetParams& p) {
  NoiseNetGrads g;
  for (int n = 0; n < p.layers(); ++n) {
    g.w1.push_back(MatrixXd::Zero(p.w1[n].rows(), p.w1[n].cols()));
    g.w2.push_back(MatrixXd::Zero(p.w2[n].rows(), p.w2[n].cols()));
    g.w3.push_back(MatrixXd::Zero(p.w3[n].rows(), p.w3[n].cols()));
    g.b1.push_back(VectorXd::Zero(p.b1[n].size()));
    g.b2.push_back(VectorXd::Zero(p.b2[n].size()));
  }
  return g;
}

void NoiseNetGrads::scale(double f) {
  for (auto& m : w1) m *= f;
  for (auto& m : w2) m *= f;
  for (auto& m : w3) m *= f;
  for (auto& v : b1) v *= f;
  for (auto& v : b2) v *= f;
}

MatrixXd noise_net_forward(const NoiseNetParams& p, const MatrixXd& x,
                           const MatrixXd& ctx, NoiseNetCache* cache) {
  if (x.rows() != 5) throw std::invalid_argument("noise net input must be 5 x B");
  if (ctx.rows() != p.ctx_dim || ctx.cols() != x.cols()) {
    throw std::invalid_argument("noise net context dims mismatch");
  }
  const int n_layers = p.layers();
  if (cache) {
    cache->input = x;
    cache->ctx = ctx;
    cache->pre_gate.resize(static_cast<std::size_t>(n_layers));
    cache->gate.resize(static_cast<std::size_t>(n_layers));
    cache->post.resize(static_cast<std::size_t>(n_layers));
    cache->activated.resize(static_cast<std::size_t>(n_layers));
  }
  MatrixXd e = x;
  for (int n = 0; n < n_layers; ++n) {
    MatrixXd pre = (p.w1[n] * e).colwise() + p.b1[n];
    MatrixXd gate = sigmoid_mat((p.w2[n] * ctx).colwise() + p.b2[n]);
    MatrixXd post = pre.cwiseProduct(gate) + p.w3[n] * ctx;
    MatrixXd act = n + 1 < n_layers ? swish_mat(post) : post;
    if (cache) {
      cache->pre_gate[n] = std::move(pre);
      cache->gate[n] = std::move(gate);
      cache->post[n] = post;
      cache->activated[n] = act;
    }
    e = std::move(act);
  }
  return e;
}

void noise_net_backward(const NoiseNetParams& p, const NoiseNetCache& cache,
                        const MatrixXd& d_out, NoiseNetGrads& grads) {
  const int n_layers = p.layers();
  MatrixXd d = d_out;
  for (int n = n_layers - 1; n >= 0; --n) {
    if (n + 1 < n_layers) d = d.cwiseProduct(swish_deriv_mat(cache.post[n]));
    const MatrixXd d_pre = d.cwiseProduct(cache.gate[n]);
    const MatrixXd d_gate = d.cwiseProduct(cache.pre_gate[n]);
    const MatrixXd d_z2 = d_gate.cwiseProduct(cache.gate[n])
                              .cwiseProduct((1.0 - cache.gate[n].array()).matrix());
    const MatrixXd& e_in = n == 0 ? cache.input : cache.activated[n - 1];
    grads.w1[n].noalias() += d_pre * e_in.transpose();
    grads.b1[n] += d_pre.rowwise().sum();
    grads.w2[n].noalias() += d_z2 * cache.ctx.transpose();
    grads.b2[n] += d_z2.rowwise().sum();
    grads.w3[n].noalias() += d * cache.ctx.transpose();
    d = p.w1[n].transpose() * d_pre;
  }
}

TransferNetParams TransferNetParams::make(int in_dim, int out_dim, int width,
                                          int blocks, Rng& rng) {
  if (in_dim < 1 || out_dim < 1 || width < 1 || blocks < 1) {
    throw std::invalid_argument("transfer net sizes must be positive");
  }
  TransferNetParams p;
  p.in_dim = in_dim;
  p.out_dim = out_dim;
  p.width = width;
  p.blocks = blocks;
  for (int i = 0; i < blocks; ++i) {
    const int rows_in = in_dim + i * width;
    const double scale = 1.0 / std::sqrt(static_cast<double>(rows_in));
    p.w.push_back(gauss_matrix(width, rows_in, scale, rng));
    p.b.push_back(VectorXd::Zero(width));
  }
  p.block_scale = VectorXd::Ones(blocks);
  const int total = in_dim + blocks * width;
  // zero readout: the untrained net predicts the zero channel (NMSE 1), which
  // keeps the normalized loss bounded across targets of very different norms
  p.w_out = MatrixXd::Zero(out_dim, total);
  p.b_out = VectorXd::Zero(out_dim);
  return p;
}

TransferNetGrads TransferNetGrads::zeros_like(const TransferNetParams& p) {
  TransferNetGrads g;
  for (int i = 0; i < p.blocks; ++i) {
    g.w.push_back(MatrixXd::Zero(p.w[i].rows(), p.w[i].cols()));
    g.b.push_back(VectorXd::Zero(p.b[i].size()));
  }
  g.block_scale = VectorXd::Zero(p.blocks);
  g.w_out = MatrixXd::Zero(p.w_out.rows(), p.w_out.cols());
  g.b_out = VectorXd::Zero(p.b_out.size());
  return g;
}

void TransferNetGrads::scale(double f) {
  for (auto& m : w) m *= f;
  for (auto& v : b) v *= f;
  block_scale *= f;
  w_out *= f;
  b_out *= f;
}

MatrixXd transfer_net_forward(const TransferNetParams& p, const MatrixXd& v,
                              TransferNetCache* cache) {
  if (v.rows() != p.in_dim) throw std::invalid_argument("transfer net input dim mismatch");
  const Eigen::Index batch = v.cols();
  MatrixXd cat(p.in_dim + p.blocks * p.width, batch);
  cat.topRows(p.in_dim) = v;
  if (cache) cache->pre.resize(static_cast<std::size_t>(p.blocks));
  for (int i = 0; i < p.blocks; ++i) {
    const int rows_in = p.in_dim + i * p.width;
    MatrixXd pre = (p.w[i] * cat.topRows(rows_in)).colwise() + p.b[i];
    cat.middleRows(rows_in, p.width) = p.block_scale[i] * swish_mat(pre);
    if (cache) cache->pre[i] = std::move(pre);
  }
  MatrixXd out = (p.w_out * cat).colwise() + p.b_out;
  if (cache) cache->cat = std::move(cat);
  return out;
}

void transfer_net_backward(const TransferNetParams& p, const TransferNetCache& cache,
                           const MatrixXd& d_out, TransferNetGrads& grads) {
  grads.w_out.noalias() += d_out * cache.cat.transpose();
  grads.b_out += d_out.rowwise().sum();
  MatrixXd g_cat = p.w_out.transpose() * d_out;
  for (int i = p.blocks - 1; i >= 0; --i) {
    const int rows_in = p.in_dim + i * p.width;
    const MatrixXd d_h = g_cat.middleRows(rows_in, p.width);
    const MatrixXd sw = swish_mat(cache.pre[i]);
    grads.block_scale[i] += d_h.cwiseProduct(sw).sum();
    const MatrixXd d_z = p.block_scale[i] * d_h.cwiseProduct(swish_deriv_mat(cache.pre[i]));
    grads.w[i].noalias() += d_z * cache.cat.topRows(rows_in).transpose();
    grads.b[i] += d_z.rowwise().sum();
    g_cat.topRows(rows_in).noalias() += p.w[i].transpose() * d_z;
  }
}

std::vector<TensorRef> tensor_refs(NoiseNetParams& p, const std::string& prefix) {
  std::vector<TensorRef> refs;
  for (int n = 0; n < p.layers(); ++n) {
    const std::string tag = prefix + std::to_string(n) + ".";
    refs.push_back({tag + "w1", p.w1[n].data(), p.w1[n].rows(), p.w1[n].cols()});
    refs.push_back({tag + "b1", p.b1[n].data(), p.b1[n].size(), 1});
    refs.push_back({tag + "w2", p.w2[n].data(), p.w2[n].rows(), p.w2[n].cols()});
    refs.push_back({tag + "b2", p.b2[n].data(), p.b2[n].size(), 1});
    refs.push_back({tag + "w3", p.w3[n].data(), p.w3[n].rows(), p.w3[n].cols()});
  }
  return refs;
}

std::vector<TensorRef> tensor_refs(TransferNetParams& p, const std::string& prefix) {
  std::vector<TensorRef> refs;
  for (int i = 0; i < p.blocks; ++i) {
    const std::string tag = prefix + std::to_string(i) + ".";
    refs.push_back({tag + "w", p.w[i].data(), p.w[i].rows(), p.w[i].cols()});
    refs.push_back({tag + "b", p.b[i].data(), p.b[i].size(), 1});
  }
  refs.push_back({prefix + "scale", p.block_scale.data(), p.block_scale.size(), 1});
  refs.push_back({prefix + "w_out", p.w_out.data(), p.w_out.rows(), p.w_out.cols()});
  refs.push_back({prefix + "b_out", p.b_out.data(), p.b_out.size(), 1});
  return refs;
}

std::vector<TensorRef> tensor_refs(NoiseEstimatorParams& p) {
  std::vector<TensorRef> refs = tensor_refs(p.noise_net, "noise_net.");
  auto more = tensor_refs(p.channel_transfer, "channel_transfer.");
  refs.insert(refs.end(), more.begin(), more.end());
  return refs;
}

void AdamOptimizer::step(const std::vector<TensorRef>& params,
                         const std::vector<TensorRef>& grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam: tensor list mismatch");
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = VectorXd::Zero(params[i].size());
      v_[i] = VectorXd::Zero(params[i].size());
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Eigen::Index n = params[i].size();
    if (grads[i].size() != n) throw std::invalid_argument("adam: tensor shape mismatch");
    double* p = params[i].data;
    const double* g = grads[i].data;
    for (Eigen::Index j = 0; j < n; ++j) {
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g[j];
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g[j] * g[j];
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      p[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

int transfer_in_dim(int n_rx, int n_tx, int l_bar) {
  return 2 * n_rx * n_tx + 3 * (2 * l_bar + 1);
}

NoiseEstimatorParams init_estimator_params(int n_rx, int n_tx, std::uint64_t seed,
                                           int l_bar, int transfer_width,
                                           int transfer_blocks,
                                           const std::vector<int>& noise_dims) {
  NoiseEstimatorParams p;
  p.n_rx = n_rx;
  p.n_tx = n_tx;
  p.l_bar = l_bar;
  p.channel_rms = 1.0;
  Rng rng(seed);
  Rng rng_noise = rng.derive(1);
  Rng rng_transfer = rng.derive(2);
  p.noise_net = NoiseNetParams::make(noise_dims, context_dim(n_rx, n_tx), rng_noise);
  p.channel_transfer = TransferNetParams::make(transfer_in_dim(n_rx, n_tx, l_bar),
                                               2 * n_rx * n_tx, transfer_width,
                                               transfer_blocks, rng_transfer);
  return p;
}

VectorXd transfer_input(const NoiseEstimatorParams& params, const ChannelMatrix& h_hat,
                        const Vec3& center) {
  if (static_cast<int>(h_hat.rows()) != params.n_rx ||
      static_cast<int>(h_hat.cols()) != params.n_tx) {
    throw std::invalid_argument("transfer_input: channel dims mismatch");
  }
  const int nm = params.n_rx * params.n_tx;
  const int enc = 2 * params.l_bar + 1;
  VectorXd v(2 * nm + 3 * enc);
  const double inv = 1.0 / params.channel_rms;
  int p = 0;
  for (Eigen::Index j = 0; j < h_hat.cols(); ++j) {
    for (Eigen::Index i = 0; i < h_hat.rows(); ++i) v[p++] = inv * h_hat(i, j).real();
  }
  for (Eigen::Index j = 0; j < h_hat.cols(); ++j) {
    for (Eigen::Index i = 0; i < h_hat.rows(); ++i) v[p++] = inv * h_hat(i, j).imag();
  }
  for (int a = 0; a < 3; ++a) {
    v.segment(2 * nm + a * enc, enc) = positional_encode(center[a], params.l_bar);
  }
  return v;
}

ChannelMatrix channel_transfer_forward(const NoiseEstimatorParams& params,
                                       const ChannelMatrix& h_hat, const Vec3& center) {
  const VectorXd v = transfer_input(params, h_hat, center);
  const MatrixXd out = transfer_net_forward(params.channel_transfer, v);
  const int nm = params.n_rx * params.n_tx;
  ChannelMatrix h(params.n_rx, params.n_tx);
  int p = 0;
  for (int j = 0; j < params.n_tx; ++j) {
    for (int i = 0; i < params.n_rx; ++i) {
      h(i, j) = Cplx(out(p, 0), out(p + nm, 0));
      ++p;
    }
  }
  return params.channel_rms * h;
}

Point5D noise_estimator_forward(const NoiseEstimatorParams& params, const Point5D& x_t,
                                int t, const ChannelMatrix& h_ref_hat) {
  const ChannelMatrix scaled = h_ref_hat / params.channel_rms;
  const VectorXd ctx = build_context(t, scaled);
  MatrixXd x(5, 1);
  x.col(0) = x_t;
  MatrixXd ctxm(ctx.size(), 1);
  ctxm.col(0) = ctx;
  const MatrixXd out = noise_net_forward(params.noise_net, x, ctxm);
  return out.col(0);
}

// --- checkpoint ------------------------------------------------------------

void save_checkpoint(const std::string& path, NoiseEstimatorParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);

  std::vector<TensorRef> refs = tensor_refs(params);
  // architecture metadata rides along as 1-D tensors
  std::vector<double> sizes = {
      static_cast<double>(params.n_rx),
      static_cast<double>(params.n_tx),
      static_cast<double>(params.l_bar),
      static_cast<double>(params.channel_transfer.width),
      static_cast<double>(params.channel_transfer.blocks)};
  std::vector<double> noise_dims;
  for (int d : params.noise_net.dims) noise_dims.push_back(static_cast<double>(d));
  double rms = params.channel_rms;
  std::vector<TensorRef> meta = {
      {"meta.sizes", sizes.data(), static_cast<Eigen::Index>(sizes.size()), 1},
      {"meta.noise_dims", noise_dims.data(), static_cast<Eigen::Index>(noise_dims.size()), 1},
      {"meta.channel_rms", &rms, 1, 1}};

  std::ostringstream manifest;
  for (const auto& r : meta) manifest << r.name << ' ' << r.rows << ' ' << r.cols << '\n';
  for (const auto& r : refs) manifest << r.name << ' ' << r.rows << ' ' << r.cols << '\n';
  const std::string mtext = manifest.str();

  out.write("ISACDM1\0", 8);
  const std::uint64_t mlen = mtext.size();
  out.write(reinterpret_cast<const char*>(&mlen), 8);
  out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  for (const auto& r : meta) {
    out.write(reinterpret_cast<const char*>(r.data),
              static_cast<std::streamsize>(sizeof(double) * r.size()));
  }
  for (const auto& r : refs) {
    out.write(reinterpret_cast<const char*>(r.data),
              static_cast<std::streamsize>(sizeof(double) * r.size()));
  }
}

NoiseEstimatorParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "ISACDM1\0", 8) != 0) {
    throw std::runtime_error(path + ": bad checkpoint magic");
  }
  std::uint64_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), 8);
  std::string mtext(mlen, '\0');
  in.read(mtext.data(), static_cast<std::streamsize>(mlen));

  struct Entry {
    std::string name;
    Eigen::Index rows, cols;
  };
  std::vector<Entry> entries;
  std::istringstream ms(mtext);
  std::string line;
  while (std::getline(ms, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Entry e;
    if (!(ls >> e.name >> e.rows >> e.cols)) {
      throw std::runtime_error(path + ": malformed checkpoint manifest");
    }
    entries.push_back(e);
  }

  auto read_block = [&in, &path](Eigen::Index count, double* dst) {
    in.read(reinterpret_cast<char*>(dst),
            static_cast<std::streamsize>(sizeof(double) * count));
    if (!in) throw std::runtime_error(path + ": truncated checkpoint");
  };

  // the three meta tensors come first, in save order
  if (entries.size() < 3 || entries[0].name != "meta.sizes" ||
      entries[1].name != "meta.noise_dims" || entries[2].name != "meta.channel_rms") {
    throw std::runtime_error(path + ": unexpected checkpoint layout");
  }
  std::vector<double> sizes(static_cast<std::size_t>(entries[0].rows));
  read_block(entries[0].rows, sizes.data());
  std::vector<double> ndims(static_cast<std::size_t>(entries[1].rows));
  read_block(entries[1].rows, ndims.data());
  double rms = 1.0;
  read_block(1, &rms);

  std::vector<int> noise_dims;
  for (double d : ndims) noise_dims.push_back(static_cast<int>(d));
  NoiseEstimatorParams params = init_estimator_params(
      static_cast<int>(sizes[0]), static_cast<int>(sizes[1]), /*seed=*/0,
      static_cast<int>(sizes[2]), static_cast<int>(sizes[3]),
      static_cast<int>(sizes[4]), noise_dims);
  params.channel_rms = rms;

  std::vector<TensorRef> refs = tensor_refs(params);
  if (entries.size() != refs.size() + 3) {
    throw std::runtime_error(path + ": checkpoint tensor count mismatch");
  }
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const Entry& e = entries[i + 3];
    if (e.name != refs[i].name || e.rows != refs[i].rows || e.cols != refs[i].cols) {
      throw std::runtime_error(path + ": checkpoint shape mismatch at " + e.name);
    }
    read_block(refs[i].size(), refs[i].data);
  }
  return params;
}

}  // namespace isac
