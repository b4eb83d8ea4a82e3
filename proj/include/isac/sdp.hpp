#pragma once

#include <Eigen/Dense>
#include <vector>

#include "isac/types.hpp"

namespace isac {

// Isometric real packing of Hermitian matrices: diagonal first, then
// (sqrt2*Re, sqrt2*Im) per upper-triangle entry, so that
// <A, B>_F = pack(A) . pack(B) and Euclidean projection commutes.
int svec_dim(int n);
void svec_pack(const Eigen::MatrixXcd& m, Eigen::VectorXd& out, int offset);
Eigen::MatrixXcd svec_unpack(const Eigen::VectorXd& v, int offset, int n);

// Conic program in the form
//   minimize    c'x
//   subject to  b - A x in K,  K a product of PSD and nonnegative cones,
// solved by over-relaxed ADMM with an exact projection onto K and a cached
// factorization of A'A. Small dense problems only.
class ConicProgram {
 public:
  explicit ConicProgram(int num_vars);

  // Appends cone blocks; rows are allocated in call order.
  int add_orthant_rows(int count);    // returns first row index
  int add_psd_block(int side);        // returns first row index (svec layout)

  void finalize();  // allocates A and b once all cones are declared

  int rows() const { return rows_; }
  int vars() const { return vars_; }
  Eigen::MatrixXd& A() { return a_; }
  Eigen::VectorXd& b() { return b_; }
  Eigen::VectorXd& c() { return c_; }

  struct Options {
    double tol = 1e-9;
    int max_iter = 60000;
    double rho = 1.0;
    double over_relax = 1.6;
    int check_every = 25;
    Eigen::VectorXd x0;  // optional warm start
  };

  struct Result {
    Eigen::VectorXd x;
    Eigen::VectorXd y;  // dual multipliers for b - Ax in K
    Eigen::VectorXd s;  // cone slack
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    bool converged = false;
  };

  Result solve(const Options& opt) const;

 private:
  struct Cone {
    bool psd = false;
    int side = 0;
    int offset = 0;
    int size = 0;
  };

  void project_cones(Eigen::VectorXd& s) const;

  int vars_ = 0;
  int rows_ = 0;
  bool finalized_ = false;
  std::vector<Cone> cones_;
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  Eigen::VectorXd c_;
};

}  // namespace isac
