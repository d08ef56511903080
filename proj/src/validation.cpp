#include "fastdips/validation.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "fastdips/correction.hpp"
#include "fastdips/diagnostics.hpp"
#include "fastdips/experiment.hpp"
#include "fastdips/operators.hpp"
#include "fastdips/priors.hpp"
#include "fastdips/rng.hpp"
#include "fastdips/sampler.hpp"
#include "fastdips/schedule.hpp"
#include "fastdips/tensor.hpp"

namespace fastdips {

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

[[noreturn]] void fail(const std::string& msg) { throw Failure(msg); }

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

Eigen::VectorXd rvec(Rng& rng, Eigen::Index n) { return rng.normal_vector(n); }

Eigen::MatrixXd rmat(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXd M(r, c);
  for (Eigen::Index j = 0; j < c; ++j) M.col(j) = rng.normal_vector(r);
  return M;
}

double objective(const ForwardOperator& op, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& anchor, const Eigen::VectorXd& b, double gamma,
                 double rho) {
  return 0.5 / gamma * (x - anchor).squaredNorm() + 0.5 * rho * (op.apply(x) - b).squaredNorm();
}

struct Ctx {
  const ValidationOptions* opts;
  std::filesystem::path scratch;
};

// deliberately wrong projection (branch condition inverted) used to prove the
// projection suite has teeth
Eigen::VectorXd flipped_projection(const Eigen::VectorXd& w, const Eigen::VectorXd& y,
                                   double eps) {
  const Eigen::VectorXd d = w - y;
  const double r = d.norm();
  if (r > eps) return w;                      // should shrink, passes through instead
  if (r == 0.0) return y;
  return y + (eps / r) * d;                   // should pass through, shrinks instead
}

// --- shared bodies ---------------------------------------------------------------

std::string projection_body(std::uint64_t seed, int trials, int max_d, bool with_oracle,
                            bool fault) {
  Rng rng(seed);
  const auto proj = fault ? &flipped_projection : &project_ball;
  double worst_gap = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.next_u64() % max_d);
    const Eigen::VectorXd y = rvec(rng, d);
    const double eps = 0.05 + 2.0 * rng.uniform();
    // half the draws land inside the ball
    const double spread = (t % 2 == 0) ? 3.0 : 0.3 * eps / std::sqrt(double(d));
    const Eigen::VectorXd w = y + spread * rvec(rng, d);
    const Eigen::VectorXd p = proj(w, y, eps);

    if ((p - y).norm() > eps * (1.0 + 1e-12))
      fail("projection left the ball: r=" + num((p - y).norm()) + " eps=" + num(eps));
    if ((proj(p, y, eps) - p).norm() > 1e-12 * (1.0 + p.norm()))
      fail("projection is not idempotent at trial " + std::to_string(t));
    const Eigen::VectorXd w2 = w + rvec(rng, d);
    if ((proj(w2, y, eps) - p).norm() > (w2 - w).norm() * (1.0 + 1e-12))
      fail("projection is expansive at trial " + std::to_string(t));
    if ((w - y).norm() <= eps && (p - w).norm() != 0.0)
      fail("interior point was moved at trial " + std::to_string(t));
    if (with_oracle) {
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
      const Eigen::VectorXd xo = oracle_constrained_prox(w, y, I, 1.0, eps).first;
      const double gap = (p - xo).norm();
      worst_gap = std::max(worst_gap, gap);
      if (gap > 1e-8 * (1.0 + p.norm()))
        fail("projection disagrees with the constrained-prox oracle by " + num(gap));
    }
  }
  std::string detail = std::to_string(trials) + " triples ok";
  if (with_oracle) detail += ", worst oracle gap " + num(worst_gap);
  return detail;
}

std::string linesearch_body(std::uint64_t seed, int trials) {
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Eigen::Index n = 4 + static_cast<Eigen::Index>(rng.next_u64() % 12);
    const Eigen::Index m = 3 + static_cast<Eigen::Index>(rng.next_u64() % 10);
    auto op = make_dense_linear(rmat(rng, m, n) / std::sqrt(double(n)));
    const Eigen::VectorXd x = rvec(rng, n), anchor = rvec(rng, n), b = rvec(rng, m);
    const double gamma = 0.3 + rng.uniform(), rho = 0.5 + 2.0 * rng.uniform();
    StepModel sm;
    sm.s = x - anchor;
    sm.r = op->apply(x) - b;
    sm.g = sm.s / gamma + rho * op->vjp(x, sm.r);
    if (sm.g.norm() < 1e-10) continue;
    const double astar = alpha_star(sm, op->jvp(x, sm.g), gamma, rho);
    const double als = golden_section_linesearch(
        [&](double a) { return objective(*op, x - a * sm.g, anchor, b, gamma, rho); }, 0.0,
        4.0 * astar);
    const double gap = std::abs(astar - als);
    worst = std::max(worst, gap / (1.0 + astar));
    if (gap > 1e-8 * (1.0 + astar))
      fail("analytic step " + num(astar) + " vs line-search " + num(als) + " at trial " +
           std::to_string(t));
  }
  return std::to_string(trials) + " instances ok, worst rel gap " + num(worst);
}

std::string numerator_body(std::uint64_t seed, int trials) {
  Rng rng(seed);
  const Eigen::Index n = 8;
  std::vector<OperatorPtr> ops = {
      make_dense_linear(rmat(rng, 6, n)),
      make_blur_1d(n, gaussian_blur_taps(1.0, 2)),
      make_elementwise_square(n),
      make_magnitude(rmat(rng, 10, n)),
  };
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const ForwardOperator& op = *ops[t % ops.size()];
    const Eigen::VectorXd x = rvec(rng, n), anchor = rvec(rng, n);
    const Eigen::VectorXd b = rvec(rng, op.output_dim());
    const double gamma = 0.2 + rng.uniform(), rho = 0.5 + 4.0 * rng.uniform();
    StepModel sm;
    sm.s = x - anchor;
    sm.r = op.apply(x) - b;
    sm.g = sm.s / gamma + rho * op.vjp(x, sm.r);
    const double lhs = sm.s.dot(sm.g) / gamma + rho * sm.r.dot(op.jvp(x, sm.g));
    const double rhs = sm.g.squaredNorm();
    if (rhs == 0.0) continue;
    const double rel = std::abs(lhs - rhs) / rhs;
    worst = std::max(worst, rel);
    if (rel > 1e-10)
      fail("identity off by rel " + num(rel) + " on " + op.name());
  }
  return std::to_string(trials) + " instances ok, worst rel " + num(worst);
}

std::string fd_slope_body(std::uint64_t seed, int per_op) {
  Rng rng(seed);
  const Eigen::Index n = 10;
  const std::vector<double> etas = {1e-2, 1e-3, 1e-4, 1e-5};
  std::string detail;
  auto slope_of = [&](const ForwardOperator& op, bool exact_jvp) {
    std::vector<double> err(etas.size(), 0.0);
    for (int t = 0; t < per_op; ++t) {
      const Eigen::VectorXd x = 0.3 * rvec(rng, n), anchor = rvec(rng, n);
      const Eigen::VectorXd b = rvec(rng, op.output_dim());
      const double gamma = 0.4 + rng.uniform(), rho = 0.5 + 2.0 * rng.uniform();
      const Eigen::VectorXd Ax = op.apply(x);
      StepModel sm;
      sm.s = x - anchor;
      sm.r = Ax - b;
      sm.g = sm.s / gamma + rho * op.vjp(x, sm.r);
      const Eigen::VectorXd jg_ref =
          exact_jvp ? op.jvp(x, sm.g) : fd_directional(op, x, sm.g, 1e-7);
      const double a_ref = alpha_star(sm, jg_ref, gamma, rho);
      for (std::size_t j = 0; j < etas.size(); ++j) {
        const Eigen::VectorXd probe = op.apply(x + etas[j] * sm.g) - Ax;
        const double a_fd = alpha_fd(sm, probe, etas[j], gamma, rho);
        err[j] += std::abs(a_fd - a_ref) / double(per_op);
      }
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t j = 0; j < etas.size(); ++j) {
      const double lx = std::log(etas[j]), ly = std::log(std::max(err[j], 1e-300));
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    const double k = double(etas.size());
    return (k * sxy - sx * sy) / (k * sxx - sx * sx);
  };

  auto sq = make_elementwise_square(n);
  const double slope_sq = slope_of(*sq, true);
  if (slope_sq < 0.8 || slope_sq > 1.2)
    fail("square operator slope " + num(slope_sq) + " outside [0.8, 1.2]");
  auto sat = make_blur_saturate_1d(n, gaussian_blur_taps(1.0, 2), 3.0);
  const double slope_sat = slope_of(*sat, false);
  if (slope_sat < 0.8 || slope_sat > 1.2)
    fail("saturating operator slope " + num(slope_sat) + " outside [0.8, 1.2]");
  return "slopes: square " + num(slope_sq) + ", saturate " + num(slope_sat);
}

std::string descent_body(std::uint64_t seed, int wanted_accepted) {
  Rng rng(seed);
  const Eigen::Index n = 8;
  std::vector<OperatorPtr> ops = {
      make_dense_linear(rmat(rng, 6, n)),
      make_blur_1d(n, gaussian_blur_taps(1.2, 2)),
      make_elementwise_square(n),
  };
  int accepted = 0, tried = 0, violations = 0;
  while (accepted < wanted_accepted && tried < wanted_accepted * 10) {
    ++tried;
    const ForwardOperator& op = *ops[tried % ops.size()];
    const Eigen::VectorXd x = rvec(rng, n), anchor = rvec(rng, n);
    const Eigen::VectorXd b = rvec(rng, op.output_dim());
    const double gamma = 0.2 + rng.uniform(), rho = 0.5 + 4.0 * rng.uniform();
    const Eigen::VectorXd Ax = op.apply(x);
    StepModel sm;
    sm.s = x - anchor;
    sm.r = Ax - b;
    sm.g = sm.s / gamma + rho * op.vjp(x, sm.r);
    if (sm.g.norm() < 1e-12) continue;
    const double a0 = alpha_star(sm, op.jvp(x, sm.g), gamma, rho);
    if (!(a0 > 0.0)) continue;
    const double F0 = objective(op, x, anchor, b, gamma, rho);
    const auto res = backtrack(op, x, Ax, anchor, b, gamma, rho, sm.g, a0, 0.5, 20);
    if (!res.accepted) continue;
    ++accepted;
    if (!(res.F < F0)) ++violations;
  }
  if (accepted < wanted_accepted)
    fail("only " + std::to_string(accepted) + " accepted steps out of " +
         std::to_string(tried) + " trials");
  if (violations != 0)
    fail(std::to_string(violations) + " accepted steps failed to decrease the objective");
  return std::to_string(accepted) + " accepted steps, 0 violations";
}

// Random m x n matrix with singular values log-uniform in [0.3, 2]. Keeping the
// spectrum away from 0 keeps the constraint multiplier moderate, so the fixed
// iteration budget below measures solver correctness rather than conditioning.
Eigen::MatrixXd conditioned_matrix(Rng& rng, Eigen::Index m, Eigen::Index n) {
  const Eigen::Index k = std::min(m, n);
  const Eigen::MatrixXd U =
      Eigen::HouseholderQR<Eigen::MatrixXd>(rmat(rng, m, m)).householderQ();
  const Eigen::MatrixXd V =
      Eigen::HouseholderQR<Eigen::MatrixXd>(rmat(rng, n, n)).householderQ();
  Eigen::VectorXd s(k);
  for (Eigen::Index i = 0; i < k; ++i)
    s[i] = 0.3 * std::exp(std::log(2.0 / 0.3) * rng.uniform());
  return U.leftCols(k) * s.asDiagonal() * V.leftCols(k).transpose();
}

std::string kkt_body(std::uint64_t seed, int instances, int K, double tol_dist,
                     double tol_stat) {
  Rng rng(seed);
  double worst_dist = 0.0, worst_stat = 0.0;
  for (int t = 0; t < instances; ++t) {
    const Eigen::Index n = 8 + static_cast<Eigen::Index>(rng.next_u64() % 25);
    const Eigen::Index m = 5 + static_cast<Eigen::Index>(rng.next_u64() % 20);
    const Eigen::MatrixXd A = conditioned_matrix(rng, m, n);
    auto op = make_dense_linear(A);
    const Eigen::VectorXd anchor = rvec(rng, n), y = rvec(rng, m);
    const double gamma = 0.3 + rng.uniform();
    const double r0 = (A * anchor - y).norm();
    const double r_min =
        (A * A.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(y) - y).norm();
    const double eps = r_min + (0.25 + 0.5 * rng.uniform()) * (r0 - r_min);

    CorrectionConfig cfg;
    cfg.admm_iters = K;
    cfg.grad_steps = 2;
    cfg.rho = 8.0 / gamma;  // balances the two quadratic curvatures
    cfg.epsilon = eps;
    cfg.epsilon_mode = EpsilonMode::kAbsolute;
    cfg.step_mode = StepMode::kAnalyticJvp;
    const auto res = admm_correct(anchor, y, *op, gamma, cfg);
    const Eigen::VectorXd xo = oracle_constrained_prox(anchor, y, A, gamma, eps).first;
    const double dist = (res.x - xo).norm() / (1.0 + xo.norm());
    const auto rep =
        kkt_residual(res.x, res.v, res.u, anchor, y, *op, gamma, eps, cfg.rho);
    worst_dist = std::max(worst_dist, dist);
    worst_stat = std::max(worst_stat, rep.stationarity_norm);
    if (dist > tol_dist)
      fail("instance " + std::to_string(t) + ": oracle distance " + num(dist));
    if (rep.stationarity_norm > tol_stat)
      fail("instance " + std::to_string(t) + ": stationarity " +
           num(rep.stationarity_norm));
  }
  return std::to_string(instances) + " instances ok, worst dist " + num(worst_dist) +
         ", worst stationarity " + num(worst_stat);
}

std::string kl_body(std::uint64_t seed, int trials) {
  // pinned scalar case first
  Eigen::VectorXd z1 = Eigen::VectorXd::Zero(1);
  Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  const auto [exact1, bound1] = kl_gaussian_injected(z1, z1, one, 1.0);
  if (std::abs(exact1 - 0.15342640972002735) > 1e-12)
    fail("scalar closed form off: " + num(exact1));
  if (bound1 != 0.25) fail("scalar bound is " + num(bound1) + ", expected 0.25 exactly");

  Rng rng(seed);
  for (int t = 0; t < trials; ++t) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.next_u64() % 16);
    const Eigen::MatrixXd B = rmat(rng, d, d);
    const Eigen::MatrixXd Sigma = (0.1 + 2.0 * rng.uniform()) * (B * B.transpose()) / double(d);
    const Eigen::VectorXd m = rvec(rng, d), xh = rvec(rng, d);
    const double sigma = 0.3 + 2.2 * rng.uniform();
    const auto [exact, bound] = kl_gaussian_injected(m, xh, Sigma, sigma);
    if (exact < 0.0) fail("negative divergence at trial " + std::to_string(t));
    if (exact > bound + 1e-12)
      fail("bound violated at trial " + std::to_string(t) + ": exact " + num(exact) +
           " > bound " + num(bound));
  }
  return "scalar case pinned, " + std::to_string(trials) + " random covariances ok";
}

std::string hybrid_body(std::uint64_t seed, int levels) {
  Rng data_rng(seed);
  const Eigen::Index n = 12;
  auto op = make_blur_1d(n, gaussian_blur_taps(1.0, 2));
  const Eigen::VectorXd y = rvec(data_rng, n);
  const Schedule sched = make_edm_schedule(0.1, 10.0, levels);
  DenoiseFn den = [](const Eigen::VectorXd& x, double s) -> Eigen::VectorXd {
    return x / (1.0 + s * s);
  };
  CorrectionConfig cfg;
  cfg.admm_iters = 2;
  cfg.grad_steps = 2;
  cfg.rho = 50.0;
  cfg.epsilon = 0.2;
  cfg.epsilon_mode = EpsilonMode::kAbsolute;
  cfg.step_mode = StepMode::kAnalyticJvp;
  HybridConfig hybrid;
  hybrid.pixel = cfg;
  hybrid.latent = cfg;
  const LinearAutoencoder id = identity_autoencoder(n);

  Rng r1(99), r2(99), r3(99);
  const RunRecord plain = run_pixel(y, *op, den, sched, cfg, r1);
  hybrid.sigma_switch = 0.0;
  const RunRecord pix = run_latent_hybrid(y, *op, den, id, sched, hybrid, r2);
  hybrid.sigma_switch = std::numeric_limits<double>::infinity();
  const RunRecord lat = run_latent_hybrid(y, *op, den, id, sched, hybrid, r3);
  const double gap_pix = (pix.final_pre_noise - plain.final_pre_noise).norm();
  const double gap_lat = (lat.final_pre_noise - plain.final_pre_noise).norm();
  if (gap_pix > 1e-10 || gap_lat > 1e-10)
    fail("identity-autoencoder trajectories diverge: pixel " + num(gap_pix) + ", latent " +
         num(gap_lat));

  // rank-deficient decoder: outputs stay on the affine manifold
  const Eigen::Index k = 4;
  const LinearAutoencoder dct = make_dct_autoencoder(n, k);
  Rng r4(7);
  hybrid.sigma_switch = 1.0;
  const RunRecord low = run_latent_hybrid(y, *op, den, dct, sched, hybrid, r4);
  for (const Eigen::VectorXd* out : {&low.final_pre_noise, &low.final_post_noise}) {
    const Eigen::VectorXd c = *out - dct.c;
    const double off = (c - dct.W * (dct.W.transpose() * c)).norm();
    if (off > 1e-10 * (1.0 + c.norm()))
      fail("latent output left span(W)+c by " + num(off));
  }
  return "switch extremes match pixel loop (gaps " + num(gap_pix) + ", " + num(gap_lat) +
         "), manifold confinement ok";
}

std::string ablation_body(const Ctx& ctx, const std::vector<std::string>& presets) {
  std::string detail;
  for (const auto& name : presets) {
    ExperimentConfig cfg = load_experiment_config(preset_text(name));
    SolveOverrides ov;
    ov.outdir = (ctx.scratch / ("ablate-" + name)).string();
    const auto rows = run_ablate(cfg, ov);
    const std::size_t expected =
        cfg.ablate.solvers.size() * cfg.ablate.steps.size();
    if (rows.size() != expected)
      fail(name + ": expected " + std::to_string(expected) + " rows, got " +
           std::to_string(rows.size()));
    const bool exact_jvp = build_operator(cfg.problem.op)->has_exact_jvp();
    for (const auto& r : rows) {
      if (r.budget_steps != rows.front().budget_steps)
        fail(name + ": budget differs across rows");
      if (r.vjps != r.budget_steps)
        fail(name + "/" + r.solver + "/" + r.step + ": vjps " + std::to_string(r.vjps) +
             " != budget " + std::to_string(r.budget_steps));
      const long long want_jvps = (r.step == "star" && exact_jvp) ? r.budget_steps : 0;
      if (r.jvps != want_jvps)
        fail(name + "/" + r.solver + "/" + r.step + ": jvps " + std::to_string(r.jvps) +
             " != " + std::to_string(want_jvps));
      if (r.solver == "admm" && !r.feasible)
        fail(name + "/" + r.step + ": split solver ended infeasible, gap " +
             num(r.feas_gap) + " > eps " + num(r.epsilon));
    }
    detail += (detail.empty() ? "" : "; ") + name + " " + std::to_string(rows.size()) +
              " rows ok";
  }
  return detail;
}

std::string read_file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail("missing artifact " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run_command(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  if (WIFEXITED(rc)) return WEXITSTATUS(rc);
  return -2;
}

std::string determinism_body(const Ctx& ctx) {
  if (ctx.opts->cli_path.empty())
    fail("no solver binary path configured for the spawn check");
  const std::filesystem::path a = ctx.scratch / "det-a";
  const std::filesystem::path b = ctx.scratch / "det-b";
  for (const auto& dir : {a, b}) {
    const std::string cmd = '"' + ctx.opts->cli_path + "\" solve --config gauss-blur-1d" +
                            " --outdir \"" + dir.string() + "\" > /dev/null 2>&1";
    const int rc = run_command(cmd);
    if (rc != 0) fail("solve exited with code " + std::to_string(rc));
  }
  // each outdir holds exactly one run directory
  auto only_subdir = [](const std::filesystem::path& root) {
    std::filesystem::path found;
    int count = 0;
    for (const auto& e : std::filesystem::directory_iterator(root))
      if (e.is_directory()) {
        found = e.path();
        ++count;
      }
    if (count != 1) fail("expected one run directory under " + root.string());
    return found;
  };
  const std::filesystem::path ra = only_subdir(a), rb = only_subdir(b);
  if (ra.filename() != rb.filename())
    fail("run ids differ: " + ra.filename().string() + " vs " + rb.filename().string());
  for (const char* name : {"levels.csv", "final.ten", "summary.json"}) {
    if (read_file_bytes(ra / name) != read_file_bytes(rb / name))
      fail(std::string(name) + " differs between identical runs");
  }
  return "two spawns of " + ra.filename().string() + " byte-identical";
}

std::string oracle_recovery_body(const Ctx& ctx, int seeds) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = load_experiment_config(preset_text("gauss-blur-1d"));
  cfg.runs.repeats = seeds;
  SolveOverrides ov;
  ov.outdir = (ctx.scratch / "recovery").string();
  ov.jobs = 4;
  const auto outs = run_solve(cfg, ov);
  // Mean PSNR over the seed batch must track the posterior-mean-anchored
  // oracle within 1 dB; individual seeds get a looser sanity band.
  double mean_gap = 0.0, worst = 0.0;
  for (const auto& o : outs) {
    if (!o.has_oracle) fail("linear-Gaussian run missing its oracle");
    mean_gap += o.psnr_gap_db / outs.size();
    worst = std::max(worst, std::abs(o.psnr_gap_db));
    if (std::abs(o.psnr_gap_db) > 3.0)
      fail("seed " + std::to_string(o.seed) + ": " + num(o.psnr_truth) +
           " dB vs oracle " + num(o.oracle_psnr_truth) + " dB (gap " +
           num(o.psnr_gap_db) + ")");
  }
  if (std::abs(mean_gap) > 1.0)
    fail("mean gap over " + std::to_string(seeds) + " seeds is " + num(mean_gap) +
         " dB (band: 1)");
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= 60.0) fail("batch took " + num(secs) + " s (budget: 60)");
  return std::to_string(seeds) + " seeds: mean gap " + num(mean_gap) +
         " dB, worst seed " + num(worst) + " dB";
}

// --- fast library-surface suites --------------------------------------------------

std::string schedule_body() {
  const Schedule s = make_edm_schedule(0.1, 100.0, 50);
  if (s.sigmas[0] != 100.0 || s.sigmas[50] != 0.1) fail("endpoints not pinned");
  for (int i = 0; i < 50; ++i)
    if (!(s.sigmas[i] > s.sigmas[i + 1])) fail("ladder not strictly decreasing");
  const Schedule t = make_edm_schedule(0.1, 100.0, 2);
  if (std::abs(t.sigmas[1] - 7.177132302454147) > 1e-12)
    fail("midpoint drifted to " + num(t.sigmas[1]));
  return "endpoints pinned, monotone, midpoint matches high-precision value";
}

std::string tensor_body() {
  Eigen::VectorXd v(4);
  v << 1.0, -0.0, 1e-308, -2.5;
  const Tensor t({2, 2}, v);
  const std::string bytes = encode_tensor(t);
  const Tensor back = decode_tensor(bytes);
  if (back.shape != t.shape) fail("shape not preserved");
  for (int i = 0; i < 4; ++i) {
    std::uint64_t a, b;
    std::memcpy(&a, &t.values[i], 8);
    std::memcpy(&b, &back.values[i], 8);
    if (a != b) fail("payload not bit-exact at index " + std::to_string(i));
  }
  bool rejected = false;
  try {
    decode_tensor(bytes.substr(0, bytes.size() - 3));
  } catch (const std::runtime_error&) {
    rejected = true;
  }
  if (!rejected) fail("truncated stream was accepted");
  return "bit-exact round trip, truncation rejected";
}

std::string rng_body() {
  Rng a(12345), b(12345), c(12346);
  bool diverged = false;
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t va = a.next_u64();
    if (va != b.next_u64()) fail("equal seeds diverged at draw " + std::to_string(i));
    if (va != c.next_u64()) diverged = true;
  }
  if (!diverged) fail("distinct seeds produced identical streams");
  Rng d(7);
  if (d.fork(1).next_u64() == d.fork(2).next_u64()) fail("fork tags collide");
  return "10000 draws seed-stable, neighbor seed and fork streams distinct";
}

std::string operators_body() {
  Rng rng(31);
  std::vector<OperatorPtr> ops = {
      make_identity(9),
      make_mask(std::vector<std::uint8_t>{1, 0, 1, 1, 0, 1, 1, 1, 0}),
      make_blur_1d(9, gaussian_blur_taps(1.5, 3)),
      make_downsample_1d(8, 2),
      make_magnitude(rmat(rng, 8, 9)),
      make_elementwise_square(9),
      make_hdr_clip(9, 2.0),
  };
  for (const auto& op : ops) {
    for (int t = 0; t < 20; ++t) {
      const Eigen::VectorXd x = 0.31 * rvec(rng, op->input_dim());
      const Eigen::VectorXd g = rvec(rng, op->input_dim());
      const Eigen::VectorXd r = rvec(rng, op->output_dim());
      const double lhs = op->jvp(x, g).dot(r);
      const double rhs = g.dot(op->vjp(x, r));
      if (std::abs(lhs - rhs) > 1e-10 * (1.0 + std::abs(lhs)))
        fail(std::string(op->name()) + ": jvp/vjp duality off by " + num(lhs - rhs));
    }
  }
  auto blur = make_blur_1d(6, gaussian_blur_taps(1.0, 2));
  CountingOperator counted(*blur);
  const Eigen::VectorXd x = rvec(rng, 6);
  counted.apply(x);
  counted.vjp(x, x);
  counted.vjp(x, x);
  counted.jvp(x, x);
  const auto c = counted.counts();
  if (c.applies != 1 || c.vjps != 2 || c.jvps != 1) fail("call counting mismatch");
  return std::to_string(ops.size()) + " operators duality-checked, counters exact";
}

std::string budget_body() {
  Rng rng(41);
  auto op = make_blur_1d(10, gaussian_blur_taps(1.0, 2));
  const Eigen::VectorXd anchor = rvec(rng, 10), y = rvec(rng, 10);
  CorrectionConfig cfg;
  cfg.admm_iters = 4;
  cfg.grad_steps = 3;
  cfg.rho = 20.0;
  cfg.epsilon = 0.3;
  cfg.epsilon_mode = EpsilonMode::kAbsolute;
  for (StepMode mode : {StepMode::kAnalyticJvp, StepMode::kAnalyticFd, StepMode::kConstant}) {
    cfg.step_mode = mode;
    const auto res = admm_correct(anchor, y, *op, 0.4, cfg);
    if (res.counts.vjps != 12) fail("vjp count != K*S");
    const long long want_jvps = mode == StepMode::kAnalyticJvp ? 12 : 0;
    if (res.counts.jvps != want_jvps) fail("jvp count mismatch");
    long long evals = 0;
    for (const auto& row : res.trace) evals += row.evals;
    if (res.counts.applies != 1 + evals) fail("forward count != init + evaluations");
    const auto qdp = qdp_correct(anchor, y, *op, 0.4, 0.05, cfg);
    if (qdp.counts.vjps != 12 || qdp.trace.size() != 12) fail("baseline budget mismatch");
  }
  return "per-step primitive counts exact in all three step modes";
}

std::string config_echo_body() {
  for (const auto& name : preset_names()) {
    const std::string text = preset_text(name);
    const IniDoc doc = parse_ini(text);
    if (serialize_ini(doc) != text)
      fail("preset " + name + " is not in canonical form");
    load_experiment_config(text);  // must validate
  }
  try {
    load_experiment_config("[problem]\noperator = blur\nn = 8\ntypo_key = 1\n");
    fail("unknown key was accepted");
  } catch (const std::invalid_argument&) {
  }
  try {
    load_experiment_file("/nonexistent/path.ini");
    fail("missing config file was accepted");
  } catch (const std::invalid_argument& e) {
    if (std::string(e.what()).find("/nonexistent/path.ini") == std::string::npos)
      fail("missing-file error does not name the path");
  }
  const std::string id = run_id(42, "x");
  if (id.substr(0, 4) != "s42-" || id.size() != 4 + 16) fail("run id format changed");
  return std::to_string(preset_names().size()) +
         " presets canonical and loadable, schema errors reported";
}

// --- registry ---------------------------------------------------------------------

struct Check {
  std::string name;
  std::function<std::string(const Ctx&)> body;
};

const std::vector<Check>& registry() {
  static const std::vector<Check> checks = {
      {"properties.projection",
       [](const Ctx& c) {
         return projection_body(1001, 2000, 32, false, c.opts->fault_projection);
       }},
      {"properties.step_linesearch", [](const Ctx&) { return linesearch_body(1002, 30); }},
      {"properties.step_numerator", [](const Ctx&) { return numerator_body(1003, 100); }},
      {"properties.step_fd_slope", [](const Ctx&) { return fd_slope_body(1004, 5); }},
      {"properties.descent", [](const Ctx&) { return descent_body(1005, 100); }},
      {"properties.kkt", [](const Ctx&) { return kkt_body(1006, 10, 300, 1e-3, 1e-4); }},
      {"properties.kl", [](const Ctx&) { return kl_body(1007, 500); }},
      {"properties.schedule", [](const Ctx&) { return schedule_body(); }},
      {"properties.tensor", [](const Ctx&) { return tensor_body(); }},
      {"properties.rng", [](const Ctx&) { return rng_body(); }},
      {"properties.operators", [](const Ctx&) { return operators_body(); }},
      {"properties.hybrid", [](const Ctx&) { return hybrid_body(1008, 4); }},
      {"properties.budget", [](const Ctx&) { return budget_body(); }},
      {"properties.config_echo", [](const Ctx&) { return config_echo_body(); }},
      {"acceptance.01_projection",
       [](const Ctx& c) {
         return projection_body(2001, 10000, 64, true, c.opts->fault_projection);
       }},
      {"acceptance.02_linesearch", [](const Ctx&) { return linesearch_body(2002, 200); }},
      {"acceptance.03_numerator", [](const Ctx&) { return numerator_body(2003, 1000); }},
      {"acceptance.04_fd_slope", [](const Ctx&) { return fd_slope_body(2004, 10); }},
      {"acceptance.05_descent", [](const Ctx&) { return descent_body(2005, 1000); }},
      {"acceptance.06_admm_kkt",
       [](const Ctx&) { return kkt_body(2006, 100, 500, 1e-4, 1e-6); }},
      {"acceptance.07_kl_bound", [](const Ctx&) { return kl_body(2007, 10000); }},
      {"acceptance.08_oracle_recovery",
       [](const Ctx& c) { return oracle_recovery_body(c, 10); }},
      {"acceptance.09_hybrid", [](const Ctx&) { return hybrid_body(2009, 6); }},
      {"acceptance.10_ablation",
       [](const Ctx& c) {
         return ablation_body(c, {"gauss-blur-1d", "gauss-inpaint-1d", "saturate-blur-1d"});
       }},
      {"acceptance.11_determinism", [](const Ctx& c) { return determinism_body(c); }},
  };
  return checks;
}

}  // namespace

std::vector<std::string> check_names() {
  std::vector<std::string> names;
  for (const auto& c : registry()) names.push_back(c.name);
  return names;
}

std::vector<CheckResult> run_checks(const ValidationOptions& opts) {
  std::filesystem::path scratch = opts.scratch_dir.empty()
                                      ? std::filesystem::temp_directory_path() / "fastdips-checks"
                                      : std::filesystem::path(opts.scratch_dir);
  scratch /= std::to_string(static_cast<long long>(::getpid()));
  std::filesystem::create_directories(scratch);
  Ctx ctx{&opts, scratch};

  std::vector<CheckResult> results;
  for (const auto& check : registry()) {
    if (!opts.filter.empty() && check.name.find(opts.filter) == std::string::npos) continue;
    CheckResult r;
    r.name = check.name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      r.detail = check.body(ctx);
      r.passed = true;
    } catch (const Failure& f) {
      r.passed = false;
      r.detail = f.what();
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace fastdips
