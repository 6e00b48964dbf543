#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace mssim {

struct GmresReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Right-preconditioned restarted GMRES: solves A x = b with x = M^{-1} y.
/// `apply` computes A v, `precondition` computes M^{-1} v. x holds the initial
/// guess on entry.
inline GmresReport gmres(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
                         const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& precondition,
                         const Eigen::VectorXd& b, Eigen::VectorXd& x, double rel_tol, int restart = 40,
                         int max_iterations = 400) {
  GmresReport rep;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero();
    rep.converged = true;
    return rep;
  }
  Eigen::VectorXd r = b - apply(x);
  double beta = r.norm();
  rep.relative_residual = beta / bnorm;
  if (rep.relative_residual <= rel_tol) {
    rep.converged = true;
    return rep;
  }

  const Eigen::Index n = b.size();
  while (rep.iterations < max_iterations) {
    Eigen::MatrixXd V(n, restart + 1);
    Eigen::MatrixXd Z(n, restart);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(restart + 1, restart);
    Eigen::VectorXd cs = Eigen::VectorXd::Zero(restart), sn = Eigen::VectorXd::Zero(restart);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(restart + 1);
    V.col(0) = r / beta;
    e(0) = beta;

    int j = 0;
    for (; j < restart && rep.iterations < max_iterations; ++j, ++rep.iterations) {
      Z.col(j) = precondition(V.col(j));
      Eigen::VectorXd w = apply(Z.col(j));
      for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt
        H(i, j) = w.dot(V.col(i));
        w -= H(i, j) * V.col(i);
      }
      H(j + 1, j) = w.norm();
      if (H(j + 1, j) > 0.0) V.col(j + 1) = w / H(j + 1, j);

      for (int i = 0; i < j; ++i) {
        const double t = cs(i) * H(i, j) + sn(i) * H(i + 1, j);
        H(i + 1, j) = -sn(i) * H(i, j) + cs(i) * H(i + 1, j);
        H(i, j) = t;
      }
      const double denom = std::hypot(H(j, j), H(j + 1, j));
      cs(j) = H(j, j) / denom;
      sn(j) = H(j + 1, j) / denom;
      H(j, j) = denom;
      H(j + 1, j) = 0.0;
      e(j + 1) = -sn(j) * e(j);
      e(j) = cs(j) * e(j);

      rep.relative_residual = std::abs(e(j + 1)) / bnorm;
      if (rep.relative_residual <= rel_tol) {
        ++j;
        ++rep.iterations;
        break;
      }
    }

    const Eigen::VectorXd y =
        H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(e.head(j));
    x += Z.leftCols(j) * y;
    r = b - apply(x);
    beta = r.norm();
    rep.relative_residual = beta / bnorm;
    if (rep.relative_residual <= rel_tol) {
      rep.converged = true;
      return rep;
    }
  }
  return rep;
}

}  // namespace mssim
