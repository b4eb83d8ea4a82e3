#include "isac/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "isac/rng.hpp"

namespace isac {

TransmitBlock build_transmit_block(const ChannelMatrix& w_s, const ChannelMatrix& w_c,
                                   int symbol_count, std::uint64_t rng_seed,
                                   CovarianceMode mode) {
  const Eigen::Index n_tx = w_s.rows();
  if (w_s.cols() != n_tx) throw std::invalid_argument("W_s must be square N_t x N_t");
  if (w_c.rows() != 0 && w_c.rows() != n_tx) {
    throw std::invalid_argument("W_c row count must match N_t");
  }
  const Eigen::Index n_ue = w_c.rows() == 0 ? 0 : w_c.cols();
  const Eigen::Index inner = n_tx + n_ue;
  if (symbol_count < inner) {
    throw std::invalid_argument("symbol count must be >= N_t + K for identifiability");
  }

  Rng rng(rng_seed);
  ChannelMatrix stacked(inner, symbol_count);
  // documented draw order: sensing rows first, then UE rows, column-major
  for (Eigen::Index l = 0; l < symbol_count; ++l) {
    for (Eigen::Index i = 0; i < n_tx; ++i) stacked(i, l) = rng.cgauss(1.0);
  }
  for (Eigen::Index l = 0; l < symbol_count; ++l) {
    for (Eigen::Index k = 0; k < n_ue; ++k) stacked(n_tx + k, l) = rng.cgauss(1.0);
  }

  if (mode == CovarianceMode::kExact) {
    // replace the inner block by sqrt(L) times an orthonormal row basis so the
    // sample covariance of X equals W W^H exactly
    Eigen::HouseholderQR<ChannelMatrix> qr(stacked.adjoint());
    ChannelMatrix q = qr.householderQ() * ChannelMatrix::Identity(symbol_count, inner);
    stacked = std::sqrt(static_cast<double>(symbol_count)) * q.adjoint();
  }

  TransmitBlock block;
  block.W_s = w_s;
  block.W_c = w_c.rows() == 0 ? ChannelMatrix::Zero(n_tx, 0).eval() : w_c;
  block.X = w_s * stacked.topRows(n_tx);
  if (n_ue > 0) block.X += w_c * stacked.bottomRows(n_ue);
  block.S_x = w_s * w_s.adjoint();
  if (n_ue > 0) block.S_x += w_c * w_c.adjoint();
  return block;
}

ChannelMatrix simulate_echo(const ChannelMatrix& h, const ChannelMatrix& x,
                            double sigma2, std::uint64_t rng_seed) {
  if (h.cols() != x.rows()) throw std::invalid_argument("simulate_echo: H/X dims disagree");
  if (sigma2 < 0.0) throw std::invalid_argument("simulate_echo: negative noise power");
  ChannelMatrix y = h * x;
  if (sigma2 > 0.0) {
    Rng rng(rng_seed);
    for (Eigen::Index l = 0; l < y.cols(); ++l) {
      for (Eigen::Index n = 0; n < y.rows(); ++n) y(n, l) += rng.cgauss(sigma2);
    }
  }
  return y;
}

namespace {

// Hermitian PSD condition guard shared by the LS and CRB paths.
Eigen::SelfAdjointEigenSolver<ChannelMatrix> checked_eigs(const ChannelMatrix& m,
                                                          const char* what) {
  Eigen::SelfAdjointEigenSolver<ChannelMatrix> es(m);
  if (es.info() != Eigen::Success) throw std::runtime_error(std::string(what) + ": eigensolver failed");
  const auto& ev = es.eigenvalues();
  const double lmax = ev.maxCoeff();
  const double lmin = ev.minCoeff();
  if (lmax <= 0.0 || lmin <= 0.0 || lmax / lmin > 1e12) {
    throw std::runtime_error(std::string(what) + ": matrix numerically singular");
  }
  return es;
}

}  // namespace

ChannelMatrix ls_estimate(const ChannelMatrix& y, const ChannelMatrix& x) {
  if (y.cols() != x.cols()) throw std::invalid_argument("ls_estimate: Y/X dims disagree");
  const ChannelMatrix gram = x * x.adjoint();
  auto es = checked_eigs(gram, "ls_estimate");
  // H_hat = Y X^H (X X^H)^{-1}, via the eigenfactorization of the Gram matrix
  const ChannelMatrix inv = es.eigenvectors() *
                            es.eigenvalues().cwiseInverse().asDiagonal() *
                            es.eigenvectors().adjoint();
  return y * x.adjoint() * inv;
}

double crb_trace(const ChannelMatrix& s_x, double sigma2, int symbol_count, int n_rx) {
  if (s_x.rows() != s_x.cols()) throw std::invalid_argument("crb_trace: S_x must be square");
  if (symbol_count < 1 || n_rx < 1) throw std::invalid_argument("crb_trace: bad sizes");
  if ((s_x - s_x.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + s_x.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("crb_trace: S_x not Hermitian");
  }
  auto es = checked_eigs(s_x, "crb_trace");
  const double tr_inv = es.eigenvalues().cwiseInverse().sum();
  return static_cast<double>(n_rx) * sigma2 / static_cast<double>(symbol_count) * tr_inv;
}

std::vector<UeRate> sinr_and_rate(const std::vector<Eigen::VectorXcd>& channels,
                                  const std::vector<ChannelMatrix>& signal_grams,
                                  const ChannelMatrix& s_x,
                                  const std::vector<double>& noise_powers) {
  const std::size_t n_ue = channels.size();
  if (signal_grams.size() != n_ue || noise_powers.size() != n_ue) {
    throw std::invalid_argument("sinr_and_rate: list length mismatch");
  }
  ChannelMatrix sum_r = ChannelMatrix::Zero(s_x.rows(), s_x.cols());
  for (const auto& r : signal_grams) sum_r += r;
  Eigen::SelfAdjointEigenSolver<ChannelMatrix> es(s_x - sum_r);
  const double tol = 1e-9 * std::max(1.0, s_x.real().trace());
  if (es.eigenvalues().minCoeff() < -tol) {
    throw std::invalid_argument("sinr_and_rate: sum of signal Grams exceeds S_x");
  }

  std::vector<UeRate> out(n_ue);
  for (std::size_t k = 0; k < n_ue; ++k) {
    const auto& h = channels[k];
    const double signal = std::real((h.adjoint() * signal_grams[k] * h)(0));
    const double interference = std::real((h.adjoint() * (s_x - signal_grams[k]) * h)(0));
    const double denom = noise_powers[k] + interference;
    if (denom <= 0.0) {
      throw std::invalid_argument("sinr_and_rate: nonpositive interference-plus-noise term");
    }
    out[k].sinr = signal / denom;
    out[k].rate_bps_hz = std::log2(1.0 + out[k].sinr);
  }
  return out;
}

EstimationResult estimate_channel(const ChannelMatrix& y, const ChannelMatrix& x,
                                  double sigma2, int n_rx) {
  EstimationResult out;
  out.h_hat = ls_estimate(y, x);
  const int symbols = static_cast<int>(x.cols());
  const ChannelMatrix sample_cov = x * x.adjoint() / static_cast<double>(symbols);
  out.crb_trace = crb_trace(sample_cov, sigma2, symbols, n_rx);
  return out;
}

MonteCarloMse estimate_mse_monte_carlo(const ChannelMatrix& h, const ChannelMatrix& x,
                                       double sigma2, int trials,
                                       std::uint64_t rng_seed) {
  if (trials < 1) throw std::invalid_argument("estimate_mse_monte_carlo: trials >= 1");
  MonteCarloMse out;
  out.per_trial_error_sq.reserve(static_cast<std::size_t>(trials));
  Rng master(rng_seed);
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t trial_seed = master.derive(static_cast<std::uint64_t>(t)).seed();
    const ChannelMatrix y = simulate_echo(h, x, sigma2, trial_seed);
    const ChannelMatrix h_hat = ls_estimate(y, x);
    const double err = (h_hat - h).squaredNorm();
    out.per_trial_error_sq.push_back(err);
    out.mean_error_sq += err;
  }
  out.mean_error_sq /= static_cast<double>(trials);
  return out;
}

}  // namespace isac
