#include "fastdips/correction.hpp"

#include <cmath>
#include <stdexcept>

namespace fastdips {

namespace {

constexpr double kBacktrackSlack = 1e-14;

double objective(double gamma, double rho, const Eigen::VectorXd& s, const Eigen::VectorXd& r) {
  return 0.5 / gamma * s.squaredNorm() + 0.5 * rho * r.squaredNorm();
}

enum class StepRoute { kJvp, kFd, kConstant };

StepRoute pick_route(const CorrectionConfig& cfg, const ForwardOperator& op) {
  switch (cfg.step_mode) {
    case StepMode::kAnalyticJvp:
      // no exact forward-mode rule: fall through to the stabilized FD form
      return op.has_exact_jvp() ? StepRoute::kJvp : StepRoute::kFd;
    case StepMode::kAnalyticFd:
      return StepRoute::kFd;
    case StepMode::kConstant:
      return StepRoute::kConstant;
  }
  return StepRoute::kFd;
}

// One backtracked gradient step on F(., anchor, b); updates x/Ax in place and
// appends a trace row. Every step spends exactly one VJP plus (in the
// analytic modes) one JVP or one probe forward, so budgets are a pure
// function of K and S.
void gradient_step(const ForwardOperator& op, const CorrectionConfig& cfg, StepRoute route,
                   const Eigen::VectorXd& anchor, const Eigen::VectorXd& b, double gamma,
                   Eigen::VectorXd& x, Eigen::VectorXd& Ax, double rho, int k, int s,
                   std::vector<TraceRow>& trace) {
  StepModel m;
  m.s = x - anchor;
  m.r = Ax - b;
  const double F0 = objective(gamma, rho, m.s, m.r);
  if (!std::isfinite(F0))
    throw std::runtime_error(std::string("correction: non-finite objective on operator '") +
                             op.name() + "' at iteration k=" + std::to_string(k) +
                             ", s=" + std::to_string(s));
  m.g = m.s / gamma + rho * op.vjp(x, m.r);

  TraceRow row;
  row.k = k;
  row.s = s;
  double alpha0 = 0.0;
  switch (route) {
    case StepRoute::kJvp: {
      const Eigen::VectorXd jg = op.jvp(x, m.g);
      alpha0 = alpha_star(m, jg, gamma, rho);
      break;
    }
    case StepRoute::kFd: {
      const Eigen::VectorXd deltaA = op.apply(x + cfg.eta * m.g) - Ax;
      row.evals += 1;  // the probe forward
      alpha0 = alpha_fd(m, deltaA, cfg.eta, gamma, rho);
      break;
    }
    case StepRoute::kConstant:
      alpha0 = cfg.alpha_value;
      break;
  }
  row.degenerate_alpha = (alpha0 == 0.0 && m.g.squaredNorm() > 0.0 && route != StepRoute::kConstant);

  BacktrackResult bt =
      backtrack(op, x, Ax, anchor, b, gamma, rho, m.g, alpha0, cfg.bt_shrink, cfg.bt_max);
  if (bt.accepted) {
    x = std::move(bt.x);
    Ax = std::move(bt.Ax);
  }
  row.F = bt.accepted ? bt.F : F0;
  row.alpha = bt.alpha;
  row.backtracks = bt.count;
  row.accepted = bt.accepted;
  row.evals += bt.evals;
  trace.push_back(std::move(row));
}

}  // namespace

Eigen::VectorXd project_ball(const Eigen::VectorXd& w, const Eigen::VectorXd& y, double eps) {
  if (w.size() != y.size()) throw std::invalid_argument("project_ball: size mismatch");
  if (eps < 0.0) throw std::invalid_argument("project_ball: eps must be >= 0");
  const double d = (w - y).norm();
  if (d <= eps) return w;
  return y + (eps / d) * (w - y);
}

Eigen::VectorXd grad_F(const ForwardOperator& op, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& anchor, const Eigen::VectorXd& b, double gamma,
                       double rho) {
  if (!(gamma > 0.0)) throw std::invalid_argument("grad_F: gamma must be positive");
  return (x - anchor) / gamma + rho * op.vjp(x, op.apply(x) - b);
}

double alpha_star(const StepModel& m, const Eigen::VectorXd& jg, double gamma, double rho) {
  const double g2 = m.g.squaredNorm();
  if (g2 == 0.0) return 0.0;
  const double denom = g2 / gamma + rho * jg.squaredNorm();
  return std::max(0.0, g2 / denom);
}

double alpha_fd(const StepModel& m, const Eigen::VectorXd& deltaA, double eta, double gamma,
                double rho) {
  const double denom = eta * eta / gamma * m.g.squaredNorm() + rho * deltaA.squaredNorm();
  if (denom <= 0.0) return 0.0;
  const double numer = eta * eta / gamma * m.s.dot(m.g) + eta * rho * m.r.dot(deltaA);
  return std::max(0.0, numer / denom);
}

BacktrackResult backtrack(const ForwardOperator& op, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& Ax, const Eigen::VectorXd& anchor,
                          const Eigen::VectorXd& b, double gamma, double rho,
                          const Eigen::VectorXd& g, double alpha0, double bt_shrink,
                          int bt_max) {
  BacktrackResult out;
  out.x = x;
  out.Ax = Ax;
  out.F = objective(gamma, rho, x - anchor, Ax - b);
  if (alpha0 <= 0.0 || g.squaredNorm() == 0.0) return out;  // no-op, count 0

  const double F0 = out.F;
  double alpha = alpha0;
  for (int c = 0; c < bt_max; ++c, alpha *= bt_shrink) {
    const Eigen::VectorXd xt = x - alpha * g;
    const Eigen::VectorXd Axt = op.apply(xt);
    const double Ft = objective(gamma, rho, xt - anchor, Axt - b);
    ++out.evals;
    if (Ft < F0 + kBacktrackSlack) {
      out.alpha = alpha;
      out.count = c;
      out.accepted = true;
      out.x = xt;
      out.Ax = Axt;
      out.F = Ft;
      return out;
    }
  }
  out.count = bt_max;  // rejected; x unchanged
  return out;
}

CorrectionResult admm_correct(const Eigen::VectorXd& anchor, const Eigen::VectorXd& y,
                              const ForwardOperator& op, double gamma,
                              const CorrectionConfig& cfg) {
  cfg.validate();
  if (!(gamma > 0.0)) throw std::invalid_argument("admm_correct: gamma must be positive");
  if (anchor.size() != op.input_dim() || y.size() != op.output_dim())
    throw std::invalid_argument("admm_correct: anchor/measurement dims do not match operator");

  CorrectionResult res;
  res.anchor = anchor;
  res.epsilon_used = effective_epsilon(cfg, op.output_dim());
  CountingOperator cop(op);
  const StepRoute route = pick_route(cfg, op);

  Eigen::VectorXd x = anchor;
  Eigen::VectorXd Ax = cop.apply(x);
  Eigen::VectorXd v = Ax;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(op.output_dim());

  for (int k = 1; k <= cfg.admm_iters; ++k) {
    const Eigen::VectorXd b = v - u;
    for (int s = 1; s <= cfg.grad_steps; ++s) {
      gradient_step(cop, cfg, route, anchor, b, gamma, x, Ax, cfg.rho, k, s, res.trace);
      auto& row = res.trace.back();
      row.primal_gap = (Ax - v).norm();
      row.feas_gap = (v - y).norm();
    }
    v = project_ball(Ax + u, y, res.epsilon_used);
    u += Ax - v;
    const double feas = (v - y).norm();
    if (std::isfinite(res.epsilon_used) && feas > res.epsilon_used + 1e-12)
      throw std::logic_error("admm_correct: projected v left the feasible ball");
  }

  res.x = std::move(x);
  res.v = std::move(v);
  res.u = std::move(u);
  res.final_residual = (Ax - y).norm();
  res.final_primal_gap = (Ax - res.v).norm();
  res.final_feas_gap = (res.v - y).norm();
  res.counts = cop.counts();
  return res;
}

CorrectionResult qdp_correct(const Eigen::VectorXd& anchor, const Eigen::VectorXd& y,
                             const ForwardOperator& op, double gamma, double beta,
                             const CorrectionConfig& cfg) {
  cfg.validate();
  if (!(gamma > 0.0)) throw std::invalid_argument("qdp_correct: gamma must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("qdp_correct: beta must be positive");
  if (anchor.size() != op.input_dim() || y.size() != op.output_dim())
    throw std::invalid_argument("qdp_correct: anchor/measurement dims do not match operator");

  CorrectionResult res;
  res.anchor = anchor;
  res.epsilon_used = effective_epsilon(cfg, op.output_dim());
  CountingOperator cop(op);
  const StepRoute route = pick_route(cfg, op);
  const double rho_eff = 1.0 / (beta * beta);

  Eigen::VectorXd x = anchor;
  Eigen::VectorXd Ax = cop.apply(x);
  const int steps = cfg.admm_iters * cfg.grad_steps;  // matched compute
  for (int t = 1; t <= steps; ++t) {
    gradient_step(cop, cfg, route, anchor, y, gamma, x, Ax, rho_eff, t, 1, res.trace);
    auto& row = res.trace.back();
    row.primal_gap = 0.0;
    row.feas_gap = (Ax - y).norm();
  }

  res.x = std::move(x);
  res.final_residual = (Ax - y).norm();
  res.final_primal_gap = 0.0;
  res.final_feas_gap = res.final_residual;
  res.counts = cop.counts();
  return res;
}

}  // namespace fastdips
