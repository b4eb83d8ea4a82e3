#include "isac/sdp.hpp"

#include <cmath>
#include <stdexcept>

namespace isac {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
}

int svec_dim(int n) { return n * n; }

void svec_pack(const Eigen::MatrixXcd& m, Eigen::VectorXd& out, int offset) {
  const int n = static_cast<int>(m.rows());
  int p = offset;
  for (int d = 0; d < n; ++d) out[p++] = m(d, d).real();
  for (int j = 1; j < n; ++j) {
    for (int i = 0; i < j; ++i) {
      out[p++] = kSqrt2 * m(i, j).real();
      out[p++] = kSqrt2 * m(i, j).imag();
    }
  }
}

Eigen::MatrixXcd svec_unpack(const Eigen::VectorXd& v, int offset, int n) {
  Eigen::MatrixXcd m(n, n);
  int p = offset;
  for (int d = 0; d < n; ++d) m(d, d) = Cplx(v[p++], 0.0);
  for (int j = 1; j < n; ++j) {
    for (int i = 0; i < j; ++i) {
      const double re = v[p++] / kSqrt2;
      const double im = v[p++] / kSqrt2;
      m(i, j) = Cplx(re, im);
      m(j, i) = Cplx(re, -im);
    }
  }
  return m;
}

ConicProgram::ConicProgram(int num_vars) : vars_(num_vars) {
  c_ = Eigen::VectorXd::Zero(num_vars);
}

int ConicProgram::add_orthant_rows(int count) {
  if (finalized_) throw std::logic_error("ConicProgram: already finalized");
  Cone cone;
  cone.psd = false;
  cone.offset = rows_;
  cone.size = count;
  cones_.push_back(cone);
  rows_ += count;
  return cone.offset;
}

int ConicProgram::add_psd_block(int side) {
  if (finalized_) throw std::logic_error("ConicProgram: already finalized");
  Cone cone;
  cone.psd = true;
  cone.side = side;
  cone.offset = rows_;
  cone.size = svec_dim(side);
  cones_.push_back(cone);
  rows_ += cone.size;
  return cone.offset;
}

void ConicProgram::finalize() {
  a_ = Eigen::MatrixXd::Zero(rows_, vars_);
  b_ = Eigen::VectorXd::Zero(rows_);
  finalized_ = true;
}

void ConicProgram::project_cones(Eigen::VectorXd& s) const {
  for (const auto& cone : cones_) {
    if (!cone.psd) {
      for (int i = 0; i < cone.size; ++i) {
        double& v = s[cone.offset + i];
        if (v < 0.0) v = 0.0;
      }
    } else {
      Eigen::MatrixXcd m = svec_unpack(s, cone.offset, cone.side);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
      Eigen::VectorXd lam = es.eigenvalues();
      for (int i = 0; i < lam.size(); ++i) lam[i] = std::max(lam[i], 0.0);
      m = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
      svec_pack(m, s, cone.offset);
    }
  }
}

ConicProgram::Result ConicProgram::solve(const Options& opt) const {
  if (!finalized_) throw std::logic_error("ConicProgram: finalize() before solve()");
  const int m = rows_;
  const int n = vars_;

  // x-update system matrix is rho-independent, factor once
  Eigen::MatrixXd gram = a_.transpose() * a_;
  const double reg = 1e-10 * (1.0 + gram.diagonal().mean());
  gram.diagonal().array() += reg;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) {
    throw std::runtime_error("ConicProgram: normal-equation factorization failed");
  }

  Eigen::VectorXd x = opt.x0.size() == n ? opt.x0 : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd s = b_ - a_ * x;
  project_cones(s);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
  double rho = opt.rho;

  const double bnorm = 1.0 + b_.norm();
  const double cnorm = 1.0 + c_.norm();
  Eigen::VectorXd ax = a_ * x;

  Result res;
  for (int it = 1; it <= opt.max_iter; ++it) {
    // x-step: (A'A + reg) x = A'(b - s - u) - c/rho
    x = ldlt.solve(a_.transpose() * (b_ - s - u) - c_ / rho);
    ax.noalias() = a_ * x;

    // over-relaxed s-step and scaled dual update
    const Eigen::VectorXd ax_relaxed = opt.over_relax * ax + (1.0 - opt.over_relax) * (b_ - s);
    s = b_ - ax_relaxed - u;
    project_cones(s);
    u += ax_relaxed + s - b_;

    if (it % opt.check_every == 0 || it == opt.max_iter) {
      const Eigen::VectorXd y = rho * u;
      const double pr = (ax + s - b_).norm() / bnorm;
      const double dr = (c_ + a_.transpose() * y).norm() / cnorm;
      const double pobj = c_.dot(x);
      const double dobj = -b_.dot(y);
      const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
      if (pr < opt.tol && dr < opt.tol && gap < opt.tol) {
        res.x = x;
        res.y = y;
        res.s = s;
        res.iterations = it;
        res.primal_residual = pr;
        res.dual_residual = dr;
        res.gap = gap;
        res.converged = true;
        return res;
      }
      // residual balancing; u is the scaled dual, so rescale it with rho
      if (pr > 10.0 * dr && rho < 1e6) {
        rho *= 2.0;
        u *= 0.5;
      } else if (dr > 10.0 * pr && rho > 1e-6) {
        rho *= 0.5;
        u *= 2.0;
      }
    }
  }

  const Eigen::VectorXd y = rho * u;
  res.x = x;
  res.y = y;
  res.s = s;
  res.iterations = opt.max_iter;
  res.primal_residual = (a_ * x + s - b_).norm() / bnorm;
  res.dual_residual = (c_ + a_.transpose() * y).norm() / cnorm;
  const double pobj = c_.dot(x);
  const double dobj = -b_.dot(y);
  res.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
  res.converged = false;
  return res;
}

}  // namespace isac
