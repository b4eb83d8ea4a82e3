#include "isac/beamform.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "isac/sdp.hpp"

namespace isac {

double BeamformProblem::gamma() const {
  if (min_rate <= 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / (std::exp2(min_rate) - 1.0);
}

void BeamformProblem::validate() const {
  if (max_power <= 0.0) throw std::invalid_argument("beamform: max power must be positive");
  if (min_rate < 0.0) throw std::invalid_argument("beamform: min rate must be >= 0");
  if (channels.size() != noise_powers.size()) {
    throw std::invalid_argument("beamform: channel/noise list mismatch");
  }
  const int n = n_tx();
  for (const auto& h : channels) {
    if (h.size() != n) throw std::invalid_argument("beamform: inconsistent channel lengths");
  }
  for (double s : noise_powers) {
    if (s <= 0.0) throw std::invalid_argument("beamform: noise powers must be positive");
  }
  if (!channels.empty() && n_tx() < n_ue()) {
    throw std::invalid_argument("beamform: need N_t >= K");
  }
}

namespace {

// Problem data in scaled units: S' = S/P, g_k = h_k sqrt(P/sigma_k^2), so the
// power budget is 1 and every per-UE noise power is 1.
struct ScaledProblem {
  int n = 0;
  int k = 0;
  double one_plus_gamma = 0.0;
  std::vector<Eigen::MatrixXcd> gram;      // g_k g_k^H
  std::vector<double> row_scale;           // (1+Gamma)*||g_k||^2 per rate row
};

ScaledProblem make_scaled(const BeamformProblem& prob) {
  ScaledProblem sp;
  sp.n = prob.n_tx();
  sp.k = prob.n_ue();
  sp.one_plus_gamma = 1.0 + prob.gamma();
  sp.gram.reserve(prob.channels.size());
  for (std::size_t k = 0; k < prob.channels.size(); ++k) {
    const Eigen::VectorXcd g =
        prob.channels[k] * std::sqrt(prob.max_power / prob.noise_powers[k]);
    sp.gram.push_back(g * g.adjoint());
    sp.row_scale.push_back(sp.one_plus_gamma * g.squaredNorm());
  }
  return sp;
}

// Scatter svec of a Hermitian sub-block placed at diagonal offset `place_off`
// of a side-`nbig` constraint block into columns of A.
void scatter_placement(Eigen::MatrixXd& a, int row0, int nbig, int col0, int nsmall,
                       int place_off, double coef) {
  for (int d = 0; d < nsmall; ++d) a(row0 + place_off + d, col0 + d) += coef;
  for (int j = 1; j < nsmall; ++j) {
    for (int i = 0; i < j; ++i) {
      const int p_small = j * (j - 1) / 2 + i;
      const int bi = i + place_off;
      const int bj = j + place_off;
      const int p_big = bj * (bj - 1) / 2 + bi;
      a(row0 + nbig + 2 * p_big, col0 + nsmall + 2 * p_small) += coef;
      a(row0 + nbig + 2 * p_big + 1, col0 + nsmall + 2 * p_small + 1) += coef;
    }
  }
}

void add_inner_product_row(Eigen::MatrixXd& a, int row, int col0,
                           const Eigen::MatrixXcd& m, double coef) {
  Eigen::VectorXd sv(svec_dim(static_cast<int>(m.rows())));
  svec_pack(m, sv, 0);
  a.row(row).segment(col0, sv.size()) += coef * sv.transpose();
}

Eigen::MatrixXcd hermitian_part(const Eigen::MatrixXcd& m) {
  return 0.5 * (m + m.adjoint());
}

Eigen::MatrixXcd psd_clip(const Eigen::MatrixXcd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitian_part(m));
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

double quad_form(const Eigen::MatrixXcd& gram, const Eigen::MatrixXcd& m) {
  return std::real((gram * m).trace());
}

// Nudges a near-feasible scaled point onto the constraint set: PSD-clips the
// Gram matrices, restores any rate shortfall by scaling R_k up, and restores
// the unit power budget by scaling everything down.
void polish_scaled(const ScaledProblem& sp, Eigen::MatrixXcd& s,
                   std::vector<Eigen::MatrixXcd>& r) {
  s = hermitian_part(s);
  for (auto& rk : r) rk = psd_clip(rk);
  for (int round = 0; round < 3; ++round) {
    for (int k = 0; k < sp.k; ++k) {
      const double lhs = sp.one_plus_gamma * quad_form(sp.gram[k], r[k]);
      const double rhs = 1.0 + quad_form(sp.gram[k], s);
      if (lhs < rhs && lhs > 0.0) r[k] *= (rhs / lhs) * (1.0 + 1e-12);
    }
    const double tr = s.real().trace();
    if (tr > 1.0) {
      const double eta = tr * (1.0 + 1e-14);
      s /= eta;
      for (auto& rk : r) rk /= eta;
    } else {
      break;
    }
  }
}

struct Phase1Layout {
  int var_s = 0;
  std::vector<int> var_r;
  int var_tau = 0;
};

// max tau s.t. normalized rate slacks >= tau, power and PSD chain feasible.
ConicProgram build_phase1(const ScaledProblem& sp, Phase1Layout& layout) {
  const int nsv = svec_dim(sp.n);
  const int nvars = (1 + sp.k) * nsv + 1;
  ConicProgram cp(nvars);
  layout.var_s = 0;
  layout.var_r.resize(sp.k);
  for (int k = 0; k < sp.k; ++k) layout.var_r[k] = (1 + k) * nsv;
  layout.var_tau = (1 + sp.k) * nsv;

  const int rate_rows = cp.add_orthant_rows(sp.k);
  const int power_row = cp.add_orthant_rows(1);
  std::vector<int> r_blocks(sp.k);
  for (int k = 0; k < sp.k; ++k) r_blocks[k] = cp.add_psd_block(sp.n);
  const int chain_block = cp.add_psd_block(sp.n);
  cp.finalize();

  auto& a = cp.A();
  auto& b = cp.b();
  for (int k = 0; k < sp.k; ++k) {
    const double w = sp.row_scale[k];
    // slack = [(1+G)<G_k,R_k> - <G_k,S> - 1]/w - tau
    add_inner_product_row(a, rate_rows + k, layout.var_s, sp.gram[k], 1.0 / w);
    add_inner_product_row(a, rate_rows + k, layout.var_r[k], sp.gram[k],
                          -sp.one_plus_gamma / w);
    a(rate_rows + k, layout.var_tau) = 1.0;
    b(rate_rows + k) = -1.0 / w;
  }
  // slack = 1 - tr(S)
  for (int d = 0; d < sp.n; ++d) a(power_row, layout.var_s + d) = 1.0;
  b(power_row) = 1.0;
  for (int k = 0; k < sp.k; ++k) {
    scatter_placement(a, r_blocks[k], sp.n, layout.var_r[k], sp.n, 0, -1.0);
  }
  scatter_placement(a, chain_block, sp.n, layout.var_s, sp.n, 0, -1.0);
  for (int k = 0; k < sp.k; ++k) {
    scatter_placement(a, chain_block, sp.n, layout.var_r[k], sp.n, 0, 1.0);
  }
  cp.c()[layout.var_tau] = -1.0;  // maximize tau
  return cp;
}

struct Phase2Layout {
  int var_s = 0;
  std::vector<int> var_r;
  int var_y = 0;
};

// min tr(Y) s.t. [[Y, I], [I, S]] >= 0 plus the covariance design constraints.
ConicProgram build_phase2(const ScaledProblem& sp, Phase2Layout& layout) {
  const int nsv = svec_dim(sp.n);
  const int nvars = (2 + sp.k) * nsv;
  ConicProgram cp(nvars);
  layout.var_s = 0;
  layout.var_r.resize(sp.k);
  for (int k = 0; k < sp.k; ++k) layout.var_r[k] = (1 + k) * nsv;
  layout.var_y = (1 + sp.k) * nsv;

  const int rate_rows = sp.k > 0 ? cp.add_orthant_rows(sp.k) : 0;
  const int power_row = cp.add_orthant_rows(1);
  std::vector<int> r_blocks(sp.k);
  for (int k = 0; k < sp.k; ++k) r_blocks[k] = cp.add_psd_block(sp.n);
  const int chain_block = cp.add_psd_block(sp.n);
  const int big_block = cp.add_psd_block(2 * sp.n);
  cp.finalize();

  auto& a = cp.A();
  auto& b = cp.b();
  for (int k = 0; k < sp.k; ++k) {
    const double w = sp.row_scale[k];
    add_inner_product_row(a, rate_rows + k, layout.var_s, sp.gram[k], 1.0 / w);
    add_inner_product_row(a, rate_rows + k, layout.var_r[k], sp.gram[k],
                          -sp.one_plus_gamma / w);
    b(rate_rows + k) = -1.0 / w;
  }
  for (int d = 0; d < sp.n; ++d) a(power_row, layout.var_s + d) = 1.0;
  b(power_row) = 1.0;
  for (int k = 0; k < sp.k; ++k) {
    scatter_placement(a, r_blocks[k], sp.n, layout.var_r[k], sp.n, 0, -1.0);
  }
  scatter_placement(a, chain_block, sp.n, layout.var_s, sp.n, 0, -1.0);
  for (int k = 0; k < sp.k; ++k) {
    scatter_placement(a, chain_block, sp.n, layout.var_r[k], sp.n, 0, 1.0);
  }
  const int nbig = 2 * sp.n;
  scatter_placement(a, big_block, nbig, layout.var_y, sp.n, 0, -1.0);
  scatter_placement(a, big_block, nbig, layout.var_s, sp.n, sp.n, -1.0);
  // constant off-diagonal identity blocks of [[Y, I], [I, S]]
  for (int i = 0; i < sp.n; ++i) {
    const int bj = sp.n + i;
    const int p = bj * (bj - 1) / 2 + i;
    b(big_block + nbig + 2 * p) = std::sqrt(2.0);
  }
  for (int d = 0; d < sp.n; ++d) cp.c()[layout.var_y + d] = 1.0;
  return cp;
}

double trace_inverse(const Eigen::MatrixXcd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(s);
  double acc = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double lam = es.eigenvalues()[i];
    if (lam <= 0.0) return std::numeric_limits<double>::infinity();
    acc += 1.0 / lam;
  }
  return acc;
}

}  // namespace

double feasibility_margin(const BeamformProblem& prob, double tol) {
  prob.validate();
  if (prob.n_ue() == 0 || prob.min_rate <= 0.0) return 1.0;  // vacuous constraints
  const ScaledProblem sp = make_scaled(prob);
  Phase1Layout layout;
  ConicProgram cp = build_phase1(sp, layout);
  ConicProgram::Options opt;
  opt.tol = tol;
  opt.max_iter = 60000;
  const auto res = cp.solve(opt);
  return res.x[layout.var_tau];
}

SdrSolution solve_sdr(const BeamformProblem& prob, double tol) {
  prob.validate();
  const int n = prob.n_tx() > 0 ? prob.n_tx() : 1;

  SdrSolution out;
  if (prob.n_ue() == 0 || prob.min_rate <= 0.0) {
    // analytic optimum of tr(S^{-1}) under tr(S) <= P: the scaled identity
    const int nn = prob.n_ue() == 0 ? n : prob.n_tx();
    out.feasible = true;
    out.infeasibility_margin = 1.0;
    out.S = (prob.max_power / nn) * ChannelMatrix::Identity(nn, nn);
    out.R.assign(static_cast<std::size_t>(prob.n_ue()), ChannelMatrix::Zero(nn, nn));
    out.objective = static_cast<double>(nn) * nn / prob.max_power;
    return out;
  }

  const ScaledProblem sp = make_scaled(prob);
  const double admm_tol = std::max(1e-10, tol * 1e-3);

  Phase1Layout l1;
  ConicProgram p1 = build_phase1(sp, l1);
  ConicProgram::Options o1;
  o1.tol = std::max(admm_tol, 1e-9);
  o1.max_iter = 60000;
  const auto r1 = p1.solve(o1);
  const double margin = r1.x[l1.var_tau];
  out.infeasibility_margin = margin;
  if (margin <= 1e-6) {
    out.feasible = false;
    out.iterations = r1.iterations;
    out.solver_residual = std::max(r1.primal_residual, r1.dual_residual);
    return out;
  }

  Phase2Layout l2;
  ConicProgram p2 = build_phase2(sp, l2);
  ConicProgram::Options o2;
  o2.tol = admm_tol;
  o2.max_iter = 120000;
  // warm start from the phase-1 point, with S pushed into the PD interior
  {
    const int nsv = svec_dim(sp.n);
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(p2.vars());
    Eigen::MatrixXcd s0 = svec_unpack(r1.x, l1.var_s, sp.n);
    s0 = hermitian_part(s0);
    s0 += 1e-3 * Eigen::MatrixXcd::Identity(sp.n, sp.n);
    const double tr = s0.real().trace();
    if (tr > 1.0) s0 /= tr;
    svec_pack(s0, x0, l2.var_s);
    for (int k = 0; k < sp.k; ++k) {
      Eigen::MatrixXcd rk = psd_clip(svec_unpack(r1.x, l1.var_r[k], sp.n));
      Eigen::VectorXd rv(nsv);
      svec_pack(rk, rv, 0);
      x0.segment(l2.var_r[k], nsv) = rv;
    }
    Eigen::MatrixXcd y0 = s0.inverse();
    svec_pack(hermitian_part(y0), x0, l2.var_y);
    o2.x0 = x0;
  }
  const auto r2 = p2.solve(o2);

  Eigen::MatrixXcd s = svec_unpack(r2.x, l2.var_s, sp.n);
  std::vector<Eigen::MatrixXcd> r(static_cast<std::size_t>(sp.k));
  for (int k = 0; k < sp.k; ++k) r[k] = svec_unpack(r2.x, l2.var_r[k], sp.n);
  polish_scaled(sp, s, r);

  out.feasible = true;
  out.S = prob.max_power * s;
  out.R.clear();
  for (auto& rk : r) out.R.push_back(prob.max_power * rk);
  out.objective = trace_inverse(out.S);
  out.iterations = r1.iterations + r2.iterations;
  out.solver_residual = std::max(r2.primal_residual, r2.dual_residual);
  if (!std::isfinite(out.objective)) {
    // every feasible covariance is singular: CRB unbounded at this rate
    out.feasible = false;
  }
  return out;
}

BeamformDesign extract_beamformers(const ChannelMatrix& s_relaxed,
                                   const std::vector<ChannelMatrix>& r_relaxed,
                                   const BeamformProblem& prob) {
  prob.validate();
  const int n = static_cast<int>(s_relaxed.rows());
  const int k_ue = static_cast<int>(r_relaxed.size());
  if (k_ue != prob.n_ue()) throw std::invalid_argument("extract: R list size mismatch");

  BeamformDesign design;
  design.S_x = hermitian_part(s_relaxed);
  design.W_c = ChannelMatrix::Zero(n, k_ue);
  design.R_k.resize(static_cast<std::size_t>(k_ue));
  ChannelMatrix sum_r = ChannelMatrix::Zero(n, n);
  for (int k = 0; k < k_ue; ++k) {
    const auto& h = prob.channels[static_cast<std::size_t>(k)];
    const auto& rk = r_relaxed[static_cast<std::size_t>(k)];
    const double gain = std::real((h.adjoint() * rk * h)(0));
    const double floor =
        1e-14 * std::max(1.0, h.squaredNorm() * std::abs(rk.real().trace()));
    if (gain <= floor) {
      if (prob.min_rate > 0.0) {
        throw std::runtime_error("extract_beamformers: UE " + std::to_string(k) +
                                 " receives no power (upstream infeasibility)");
      }
      design.R_k[static_cast<std::size_t>(k)] = ChannelMatrix::Zero(n, n);
      continue;
    }
    const Eigen::VectorXcd w = (rk * h) / std::sqrt(gain);
    design.W_c.col(k) = w;
    design.R_k[static_cast<std::size_t>(k)] = w * w.adjoint();
    sum_r += design.R_k[static_cast<std::size_t>(k)];
  }

  // sensing Gram: PSD by the Cauchy-Schwarz argument, factor via eigenpairs
  Eigen::MatrixXcd r_s = hermitian_part(design.S_x - sum_r);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r_s);
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  design.W_s = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();

  design.objective = trace_inverse(design.S_x);
  design.feasibility_report = validate_feasibility(design, prob);
  return design;
}

FeasibilityReport validate_feasibility(const BeamformDesign& design,
                                       const BeamformProblem& prob, double tol) {
  FeasibilityReport report;
  const double p = prob.max_power;
  const double tr_s = design.S_x.real().trace();
  auto push = [&report](const std::string& name, double residual, double threshold) {
    FeasibilityEntry e;
    e.name = name;
    e.residual = residual;
    e.threshold = threshold;
    e.pass = residual <= threshold;
    report.entries.push_back(e);
  };

  push("power_budget", (tr_s - p) / p, tol);

  const double gamma = prob.gamma();
  for (int k = 0; k < prob.n_ue(); ++k) {
    const auto& h = prob.channels[static_cast<std::size_t>(k)];
    const double sig2 = prob.noise_powers[static_cast<std::size_t>(k)];
    const std::string tag = "_ue" + std::to_string(k);
    if (prob.min_rate <= 0.0) {
      push("rate" + tag, 0.0, tol);  // vacuous at zero min rate
    } else {
      const double lhs =
          (1.0 + gamma) * std::real((h.adjoint() * design.R_k[static_cast<std::size_t>(k)] * h)(0));
      const double rhs = sig2 + std::real((h.adjoint() * design.S_x * h)(0));
      push("rate" + tag, (rhs - lhs) / sig2, tol);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
        design.R_k[static_cast<std::size_t>(k)]);
    const auto& lam = es.eigenvalues();
    const double lmax = lam[lam.size() - 1];
    const double scale = std::max(lmax, 1e-300);
    push("psd" + tag, -lam[0] / scale, tol);
    const double second = lam.size() > 1 ? std::abs(lam[lam.size() - 2]) : 0.0;
    push("rank_one" + tag, second / scale, 1e-7);
  }

  {
    ChannelMatrix sum_r = ChannelMatrix::Zero(design.S_x.rows(), design.S_x.cols());
    for (const auto& r : design.R_k) sum_r += r;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
        hermitian_part(design.S_x - sum_r));
    push("sensing_gram_psd", -es.eigenvalues()[0] / std::max(tr_s, 1e-300), 1e-7);
  }
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitian_part(design.S_x));
    push("covariance_psd", -es.eigenvalues()[0] / std::max(tr_s, 1e-300), 1e-7);
  }

  report.all_pass = true;
  for (const auto& e : report.entries) report.all_pass = report.all_pass && e.pass;
  return report;
}

std::string format_feasibility_table(const FeasibilityReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(24) << "constraint" << std::right << std::setw(14)
      << "residual" << std::setw(14) << "threshold" << std::setw(8) << "status"
      << "\n";
  for (const auto& e : report.entries) {
    out << std::left << std::setw(24) << e.name << std::right << std::setw(14)
        << std::scientific << std::setprecision(3) << e.residual << std::setw(14)
        << e.threshold << std::setw(8) << (e.pass ? "pass" : "FAIL") << "\n";
  }
  out << (report.all_pass ? "all constraints satisfied" : "CONSTRAINT VIOLATION")
      << "\n";
  return out.str();
}

double find_rate_threshold(const BeamformProblem& prob_template, double resolution,
                           double solver_tol) {
  BeamformProblem prob = prob_template;
  prob.validate();
  if (prob.n_ue() == 0) {
    throw std::invalid_argument("find_rate_threshold: need at least one UE");
  }
  // the margin crosses zero monotonically in the rate; its accuracy only has
  // to resolve the bisection step, so the decision band scales with the tol
  const double band = std::max(1e-6, 10.0 * solver_tol);
  auto feasible_at = [&](double rate) {
    prob.min_rate = rate;
    return feasibility_margin(prob, solver_tol) > band;
  };
  double lo = 0.0;
  double hi = std::max(1.0, 4.0 * resolution);
  int guard = 0;
  while (feasible_at(hi)) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 60) {
      throw std::runtime_error("find_rate_threshold: no infeasible rate found");
    }
  }
  while (hi - lo > resolution) {
    const double mid = 0.5 * (lo + hi);
    if (feasible_at(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace isac
