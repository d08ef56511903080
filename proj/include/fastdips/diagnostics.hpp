#pragma once

#include <Eigen/Core>
#include <functional>
#include <utility>

#include "fastdips/operators.hpp"

namespace fastdips {

// First-order report for min ||x - anchor||^2/(2 gamma) s.t. ||A(x) - y|| <= eps
// at a split-solver state (x, v, u). The multiplier is recovered from the dual
// state as lambda = rho * ||u|| (rho u equals lambda nu at fixed points), so a
// converged boundary solution scores as active even when its residual sits a
// rounding error inside eps. nu is the normalized residual direction.
struct KktReport {
  double residual = 0.0;          // ||A(x) - y||
  bool feasible = false;          // residual <= eps
  double lambda = 0.0;            // rho * ||u||
  double stationarity_norm = 0.0; // ||(1/gamma)(x - anchor) + lambda J^T nu||
  double complementarity = 0.0;   // lambda * (residual - eps)
  double primal_gap = 0.0;        // ||A(x) - v||
};

KktReport kkt_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                       const Eigen::VectorXd& u, const Eigen::VectorXd& anchor,
                       const Eigen::VectorXd& y, const ForwardOperator& op, double gamma,
                       double eps, double rho);

// KL divergence of N(m, sigma^2 I) from N(x_hat, Sigma + sigma^2 I) collapsed
// to the mode-substitution form: exact value and its quadratic upper bound
//   exact = ||m - x_hat||^2/(2 sigma^2) + (1/2) sum_i [l_i/sigma^2 - log(1 + l_i/sigma^2)]
//   bound = ||m - x_hat||^2/(2 sigma^2) + ||Sigma||_F^2 / (4 sigma^4)
// Sigma must be symmetric PSD up to -1e-12 eigenvalue clamping.
std::pair<double, double> kl_gaussian_injected(const Eigen::VectorXd& m,
                                               const Eigen::VectorXd& x_hat,
                                               const Eigen::MatrixXd& Sigma, double sigma);

// Ground-truth solver for the linear constrained prox via Lagrange bisection:
// x(l) = ((1/gamma) I + l A^T A)^-1 ((1/gamma) anchor + l A^T y), bracket
// [0, 1] doubled until feasible, then bisected until
// | ||A x - y|| - eps | <= 1e-10. Returns (x, lambda) with lambda in the
// normalized-residual convention (l * ||A x - y||); (anchor, 0) when the
// anchor is already feasible.
std::pair<Eigen::VectorXd, double> oracle_constrained_prox(const Eigen::VectorXd& anchor,
                                                           const Eigen::VectorXd& y,
                                                           const Eigen::MatrixXd& A,
                                                           double gamma, double eps);

// Derivative-free 1-D minimizer on [lo, hi]; interval shrunk below tol.
double golden_section_linesearch(const std::function<double(double)>& f, double lo, double hi,
                                 double tol = 1e-11);

// Exact posterior mean of a Gaussian prior N(mu, C) under y = A x + beta*xi:
// mu + C A^T (A C A^T + beta^2 I)^-1 (y - A mu).
Eigen::VectorXd gaussian_posterior_mean(const Eigen::VectorXd& mu, const Eigen::MatrixXd& C,
                                        const Eigen::MatrixXd& A, double beta,
                                        const Eigen::VectorXd& y);

double mse(const Eigen::VectorXd& x, const Eigen::VectorXd& ref);
// 10 log10(peak^2 / mse); +inf when mse == 0. Default peak spans [-1, 1].
double psnr(const Eigen::VectorXd& x, const Eigen::VectorXd& ref, double peak = 2.0);

// Central finite differences, used as implementation-independent derivative
// oracles in the property suites.
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h = 1e-5);
Eigen::VectorXd fd_directional(const ForwardOperator& op, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& g, double h = 1e-5);

}  // namespace fastdips
