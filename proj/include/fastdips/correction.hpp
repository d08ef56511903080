#pragma once

#include <vector>

#include "fastdips/config.hpp"
#include "fastdips/operators.hpp"

namespace fastdips {

// Euclidean projection onto the ball {v : ||v - y|| <= eps}: radial shrink
// toward y when outside, identity inside.
Eigen::VectorXd project_ball(const Eigen::VectorXd& w, const Eigen::VectorXd& y, double eps);

// Inner objective of one correction: F(x) = ||x - anchor||^2 / (2 gamma)
//                                         + (rho/2) ||A(x) - b||^2.
// StepModel carries the pieces every step-size rule consumes.
struct StepModel {
  Eigen::VectorXd s;  // x - anchor
  Eigen::VectorXd r;  // A(x) - b
  Eigen::VectorXd g;  // (1/gamma) s + rho * J_A(x)^T r
};

// Gradient of F at x (computes A(x) internally; the solver uses its cache).
Eigen::VectorXd grad_F(const ForwardOperator& op, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& anchor, const Eigen::VectorXd& b, double gamma,
                       double rho);

// Closed-form steepest-descent step from an exact directional derivative
// jg = J_A(x) g. The numerator collapses to ||g||^2; clamped below at 0;
// 0 when g = 0.
double alpha_star(const StepModel& m, const Eigen::VectorXd& jg, double gamma, double rho);

// Stabilized finite-difference form from the probe deltaA = A(x + eta g) - A(x).
// Exact for linear A; degenerate denominators give 0.
double alpha_fd(const StepModel& m, const Eigen::VectorXd& deltaA, double eta, double gamma,
                double rho);

struct BacktrackResult {
  double alpha = 0.0;       // accepted step, 0 when rejected or no-op
  int count = 0;            // number of shrinks taken
  int evals = 0;            // objective evaluations spent
  bool accepted = false;
  Eigen::VectorXd x;        // post-step point (== input when not accepted)
  Eigen::VectorXd Ax;       // A at the post-step point
  double F = 0.0;           // objective at the post-step point
};

// Geometric backtracking from alpha0: accept the first trial with
// F(x - alpha g) < F(x) + 1e-14 (small absolute slack over strict decrease);
// after bt_max failures the step is rejected and x is left unchanged.
// Ax is the cached A(x) for the current point.
BacktrackResult backtrack(const ForwardOperator& op, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& Ax, const Eigen::VectorXd& anchor,
                          const Eigen::VectorXd& b, double gamma, double rho,
                          const Eigen::VectorXd& g, double alpha0, double bt_shrink,
                          int bt_max);

struct TraceRow {
  int k = 0;  // outer iteration (1-based)
  int s = 0;  // inner gradient step (1-based)
  double F = 0.0;
  double alpha = 0.0;
  int backtracks = 0;
  bool accepted = false;
  bool degenerate_alpha = false;  // step-size denominator vanished
  int evals = 0;                  // objective evaluations in backtracking
  double primal_gap = 0.0;        // ||A(x) - v||
  double feas_gap = 0.0;          // ||v - y||
};

struct CorrectionResult {
  Eigen::VectorXd x;
  Eigen::VectorXd anchor;  // the anchor the prox was centered on, kept for audits
  Eigen::VectorXd v, u;    // final split/dual state (empty for the penalized baseline)
  std::vector<TraceRow> trace;
  OpCallCounts counts;
  double epsilon_used = 0.0;
  double final_residual = 0.0;    // ||A(x) - y||
  double final_primal_gap = 0.0;  // ||A(x) - v||
  double final_feas_gap = 0.0;    // ||v - y||
};

// Hard-constraint correction of one anchor: scaled ADMM on the splitting
// x-update (S backtracked gradient steps on F with b = v - u fixed),
// v <- project_ball(A(x) + u, y, eps), u <- u + A(x) - v, for K iterations.
// A feasible anchor is a fixed point. Throws on non-finite objectives.
CorrectionResult admm_correct(const Eigen::VectorXd& anchor, const Eigen::VectorXd& y,
                              const ForwardOperator& op, double gamma,
                              const CorrectionConfig& cfg);

// Penalized (unsplit) baseline at matched compute: K*S backtracked gradient
// steps on ||x - anchor||^2/(2 gamma) + ||A(x) - y||^2/(2 beta^2).
CorrectionResult qdp_correct(const Eigen::VectorXd& anchor, const Eigen::VectorXd& y,
                             const ForwardOperator& op, double gamma, double beta,
                             const CorrectionConfig& cfg);

}  // namespace fastdips
