#pragma once

#include <string>
#include <vector>

#include "isac/types.hpp"

namespace isac {

// Rate-constrained covariance design instance: channels h_k, per-UE noise
// powers, power budget P and per-UE minimum rate (bps/Hz).
struct BeamformProblem {
  std::vector<Eigen::VectorXcd> channels;
  std::vector<double> noise_powers;
  double max_power = 1.0;
  double min_rate = 0.0;

  int n_tx() const { return channels.empty() ? 0 : static_cast<int>(channels[0].size()); }
  int n_ue() const { return static_cast<int>(channels.size()); }
  // SINR target 1/(2^rate - 1); +inf when min_rate == 0 (vacuous constraint).
  double gamma() const;
  void validate() const;
};

struct FeasibilityEntry {
  std::string name;
  double residual = 0.0;  // <= 0 means satisfied with margin
  double threshold = 0.0;
  bool pass = false;
};

struct FeasibilityReport {
  std::vector<FeasibilityEntry> entries;
  bool all_pass = false;
};

// Relaxed covariance solution (no rank constraints).
struct SdrSolution {
  bool feasible = false;
  // Phase-1 max-slack value in scaled units (sigma_k^2 = 1, P = 1); negative
  // values certify that the rate constraints cannot all be met at power P.
  double infeasibility_margin = 0.0;
  ChannelMatrix S;                 // relaxed covariance (physical units)
  std::vector<ChannelMatrix> R;    // relaxed per-UE Gram matrices
  double objective = 0.0;          // tr(S^{-1})
  int iterations = 0;
  double solver_residual = 0.0;
};

// Extracted rank-one design.
struct BeamformDesign {
  ChannelMatrix S_x;
  std::vector<ChannelMatrix> R_k;  // rank-one w w^H per UE
  ChannelMatrix W_c;               // N_t x K
  ChannelMatrix W_s;               // N_t x N_t, possibly rank deficient
  double objective = 0.0;          // tr(S_x^{-1})
  FeasibilityReport feasibility_report;
};

// Phase-1 feasibility margin only (cheap; used for infeasibility bisection).
double feasibility_margin(const BeamformProblem& prob, double tol = 1e-8);

// CRB-minimizing covariance design by semidefinite relaxation, solved with a
// first-order splitting method (ADMM over the PSD cones, the trace-inverse
// objective handled through its epigraph matrix inequality). Throws
// std::invalid_argument on malformed problems; infeasibility is reported in
// the result, not thrown.
SdrSolution solve_sdr(const BeamformProblem& prob, double tol = 1e-6);

// Rank-one extraction: w_k = R_k h_k / sqrt(h^H R_k h), sensing Gram
// S - sum w w^H factored by eigendecomposition. Preserves every quadratic
// form h^H R h exactly, hence feasibility. Throws std::runtime_error when a
// UE with an active rate constraint receives (numerically) no power.
BeamformDesign extract_beamformers(const ChannelMatrix& s_relaxed,
                                   const std::vector<ChannelMatrix>& r_relaxed,
                                   const BeamformProblem& prob);

// Evaluates every design constraint; never throws.
FeasibilityReport validate_feasibility(const BeamformDesign& design,
                                       const BeamformProblem& prob, double tol = 1e-6);

std::string format_feasibility_table(const FeasibilityReport& report);

// Smallest min-rate at which the problem becomes infeasible, found by
// bisection on the phase-1 margin; returns a value within `resolution`.
double find_rate_threshold(const BeamformProblem& prob_template, double resolution,
                           double solver_tol = 1e-8);

}  // namespace isac
