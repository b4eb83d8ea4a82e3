#pragma once

#include <cstdint>
#include <vector>

#include "isac/types.hpp"

namespace isac {

// How the random symbol block realizes the designed covariance.
enum class CovarianceMode {
  kStatistical,  // plain i.i.d. CSCG symbols; (1/L) X X^H -> S_x only as L grows
  kExact,        // inner block orthonormalized so that (1/L) X X^H = S_x exactly
};

struct TransmitBlock {
  ChannelMatrix X;    // N_t x L transmitted symbols
  ChannelMatrix W_s;  // N_t x N_t sensing beamformer
  ChannelMatrix W_c;  // N_t x K communications beamformer
  ChannelMatrix S_x;  // N_t x N_t covariance W W^H (analytic)
};

// Builds X = W_s S + W_c C from seeded unit-covariance CSCG sequences (drawn
// s first, then c, column-major). Requires L >= N_t + K.
TransmitBlock build_transmit_block(const ChannelMatrix& w_s, const ChannelMatrix& w_c,
                                   int symbol_count, std::uint64_t rng_seed,
                                   CovarianceMode mode = CovarianceMode::kStatistical);

// Y = H X + Z with i.i.d. CSCG noise of per-entry variance sigma2.
ChannelMatrix simulate_echo(const ChannelMatrix& h, const ChannelMatrix& x,
                            double sigma2, std::uint64_t rng_seed);

// Least-squares channel estimate Y X^H (X X^H)^{-1}. Throws when X X^H is
// numerically singular (condition number above 1e12).
ChannelMatrix ls_estimate(const ChannelMatrix& y, const ChannelMatrix& x);

// (N_r sigma^2 / L) * tr(S_x^{-1}); throws on singular or indefinite S_x.
double crb_trace(const ChannelMatrix& s_x, double sigma2, int symbol_count, int n_rx);

struct UeRate {
  double sinr = 0.0;
  double rate_bps_hz = 0.0;
};

// Per-UE SINR and achievable rate for rank-one signal Gram matrices R_k under
// total covariance S_x. Throws on inconsistent inputs (sum R_k exceeding S_x
// beyond tolerance, or a negative interference-plus-noise denominator).
std::vector<UeRate> sinr_and_rate(const std::vector<Eigen::VectorXcd>& channels,
                                  const std::vector<ChannelMatrix>& signal_grams,
                                  const ChannelMatrix& s_x,
                                  const std::vector<double>& noise_powers);

struct MonteCarloMse {
  double mean_error_sq = 0.0;               // empirical E ||H_hat - H||_F^2
  std::vector<double> per_trial_error_sq;   // one entry per noise draw
};

// Estimate bundled with its theoretical accuracy (trace of the estimation
// bound under the block's realized sample covariance).
struct EstimationResult {
  ChannelMatrix h_hat;
  double crb_trace = 0.0;
  double empirical_error = -1.0;  // optional Monte-Carlo value, < 0 when absent
};

EstimationResult estimate_channel(const ChannelMatrix& y, const ChannelMatrix& x,
                                  double sigma2, int n_rx);

// Repeated echo + LS estimation with fresh noise per trial (per-trial seeds
// derived from rng_seed); the transmit block is held fixed.
MonteCarloMse estimate_mse_monte_carlo(const ChannelMatrix& h, const ChannelMatrix& x,
                                       double sigma2, int trials,
                                       std::uint64_t rng_seed);

}  // namespace isac
