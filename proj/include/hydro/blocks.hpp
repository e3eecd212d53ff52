#pragma once

#include <Eigen/Dense>

namespace hydro {

// Second moments of the centered field (r', p'), r has n entries, p n+1.
struct CovarianceBlocks {
  Eigen::MatrixXd s_r;   // n x n
  Eigen::MatrixXd s_p;   // (n+1) x (n+1)
  Eigen::MatrixXd s_rp;  // n x (n+1)
  double tau = 0.0;

  int n() const { return static_cast<int>(s_r.rows()); }
  static CovarianceBlocks zero(int n);
  static CovarianceBlocks scaled_identity(int n, double t);
  // Ordering (r_1..r_n, p_0..p_n).
  Eigen::MatrixXd assemble() const;
  static CovarianceBlocks from_matrix(const Eigen::MatrixXd& s, int n);
};

}  // namespace hydro
