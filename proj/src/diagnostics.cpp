#include "fastdips/diagnostics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fastdips {

KktReport kkt_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                       const Eigen::VectorXd& u, const Eigen::VectorXd& anchor,
                       const Eigen::VectorXd& y, const ForwardOperator& op, double gamma,
                       double eps, double rho) {
  if (!(gamma > 0.0) || !(rho > 0.0))
    throw std::invalid_argument("kkt_residual: gamma and rho must be positive");
  KktReport rep;
  const Eigen::VectorXd Ax = op.apply(x);
  rep.residual = (Ax - y).norm();
  rep.feasible = rep.residual <= eps;
  rep.primal_gap = (Ax - v).norm();

  // The candidate multiplier is read off the dual state (rho u == lambda nu at
  // fixed points), so boundary solutions with residual a hair inside eps still
  // score as active instead of collapsing to the interior branch.
  rep.lambda = rho * u.norm();
  const Eigen::VectorXd prox_term = (x - anchor) / gamma;
  if (rep.residual > 0.0) {
    const Eigen::VectorXd nu = (Ax - y) / rep.residual;
    rep.stationarity_norm = (prox_term + rep.lambda * op.vjp(x, nu)).norm();
  } else {
    rep.stationarity_norm = prox_term.norm();
  }
  rep.complementarity = rep.lambda * (rep.residual - eps);
  return rep;
}

std::pair<double, double> kl_gaussian_injected(const Eigen::VectorXd& m,
                                               const Eigen::VectorXd& x_hat,
                                               const Eigen::MatrixXd& Sigma, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("kl: sigma must be positive");
  if (m.size() != x_hat.size() || Sigma.rows() != m.size() || Sigma.cols() != m.size())
    throw std::invalid_argument("kl: dimension mismatch");
  const double scale = 1.0 + Sigma.cwiseAbs().maxCoeff();
  if ((Sigma - Sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("kl: Sigma is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Sigma + Sigma.transpose()));
  if (es.eigenvalues().minCoeff() < -1e-12 * scale)
    throw std::invalid_argument("kl: Sigma has a negative eigenvalue");
  const Eigen::ArrayXd lam = es.eigenvalues().array().max(0.0);

  const double s2 = sigma * sigma;
  const double mean_term = (m - x_hat).squaredNorm() / (2.0 * s2);
  const double exact = mean_term + 0.5 * (lam / s2 - (1.0 + lam / s2).log()).sum();
  const double bound = mean_term + lam.square().sum() / (4.0 * s2 * s2);
  return {exact, bound};
}

std::pair<Eigen::VectorXd, double> oracle_constrained_prox(const Eigen::VectorXd& anchor,
                                                           const Eigen::VectorXd& y,
                                                           const Eigen::MatrixXd& A,
                                                           double gamma, double eps) {
  if (!(gamma > 0.0)) throw std::invalid_argument("oracle: gamma must be positive");
  if (eps < 0.0) throw std::invalid_argument("oracle: eps must be >= 0");
  if (A.cols() != anchor.size() || A.rows() != y.size())
    throw std::invalid_argument("oracle: matrix shape does not match anchor/measurement");
  if ((A * anchor - y).norm() <= eps) return {anchor, 0.0};

  // Work in the eigenbasis of A^T A: x(l) = Q diag(1/(1/gamma + l lam)) Q^T rhs(l)
  // and ||A x - y||^2 = sum lam_i xh_i^2 - 2 w2 . xh + ||y||^2, so each
  // bisection step is O(n). Same iterates as the dense-solve formula.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A.transpose() * A);
  const Eigen::ArrayXd lam = es.eigenvalues().array().max(0.0);
  const Eigen::MatrixXd& Q = es.eigenvectors();
  const Eigen::VectorXd w1 = Q.transpose() * (anchor / gamma);      // (1/gamma) anchor
  const Eigen::VectorXd w2 = Q.transpose() * (A.transpose() * y);   // A^T y
  const double y2 = y.squaredNorm();
  const double inv_gamma = 1.0 / gamma;

  const auto resid = [&](double l) {
    const Eigen::ArrayXd xh = (w1.array() + l * w2.array()) / (inv_gamma + l * lam);
    const double r2 = (lam * xh.square()).sum() - 2.0 * (w2.array() * xh).sum() + y2;
    return std::sqrt(std::max(0.0, r2));
  };

  double lo = 0.0, hi = 1.0;
  int doublings = 0;
  while (resid(hi) > eps) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 200)
      throw std::runtime_error("oracle: bisection bracket failure (lambda range exhausted)");
  }
  double l_mid = hi;
  for (int it = 0; it < 200; ++it) {
    l_mid = 0.5 * (lo + hi);
    const double r = resid(l_mid);
    if (std::abs(r - eps) <= 1e-10) break;
    (r > eps ? lo : hi) = l_mid;
  }
  const Eigen::ArrayXd xh = (w1.array() + l_mid * w2.array()) / (inv_gamma + l_mid * lam);
  const Eigen::VectorXd x = Q * xh.matrix();
  const double r_final = (A * x - y).norm();
  if (std::abs(r_final - eps) > 1e-8 * (1.0 + eps))
    throw std::runtime_error("oracle: bisection failed to reach the constraint boundary");
  return {x, l_mid * r_final};
}

double golden_section_linesearch(const std::function<double(double)>& f, double lo, double hi,
                                 double tol) {
  if (!(hi > lo)) throw std::invalid_argument("golden section: need hi > lo");
  const double invphi = 0.6180339887498948482;  // 1/phi
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

Eigen::VectorXd gaussian_posterior_mean(const Eigen::VectorXd& mu, const Eigen::MatrixXd& C,
                                        const Eigen::MatrixXd& A, double beta,
                                        const Eigen::VectorXd& y) {
  if (!(beta > 0.0)) throw std::invalid_argument("posterior mean: beta must be positive");
  Eigen::MatrixXd S = A * C * A.transpose();
  S.diagonal().array() += beta * beta;
  return mu + C * A.transpose() * S.llt().solve(y - A * mu);
}

double mse(const Eigen::VectorXd& x, const Eigen::VectorXd& ref) {
  if (x.size() != ref.size() || x.size() == 0)
    throw std::invalid_argument("mse: size mismatch");
  return (x - ref).squaredNorm() / static_cast<double>(x.size());
}

double psnr(const Eigen::VectorXd& x, const Eigen::VectorXd& ref, double peak) {
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
  const double e = mse(x, ref);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / e);
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Eigen::VectorXd fd_directional(const ForwardOperator& op, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& g, double h) {
  return (op.apply(x + h * g) - op.apply(x - h * g)) / (2.0 * h);
}

}  // namespace fastdips
