#include <doctest.h>

#include <cmath>
#include <limits>

#include "fastdips/correction.hpp"
#include "fastdips/diagnostics.hpp"
#include "fastdips/rng.hpp"
#include "oracles.hpp"

using namespace fastdips;

TEST_CASE("kkt report: feasible anchor state scores zero everywhere") {
  Rng rng(101);
  auto op = make_blur_1d(10, gaussian_blur_taps(1.0, 2));
  const Eigen::VectorXd anchor = oracles::random_vector(rng, 10);
  const Eigen::VectorXd y = op->apply(anchor);
  const Eigen::VectorXd v = y;
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(10);
  const auto rep = kkt_residual(anchor, v, u, anchor, y, *op, 0.5, 0.3, 10.0);
  CHECK(rep.feasible);
  CHECK(rep.residual == 0.0);
  CHECK(rep.lambda == 0.0);
  CHECK(rep.stationarity_norm == 0.0);
  CHECK(rep.complementarity == 0.0);
  CHECK(rep.primal_gap == 0.0);
}

TEST_CASE("kkt report: converged split state is near-stationary, perturbed state is not") {
  Rng rng(111);
  const Eigen::MatrixXd A = oracles::random_matrix(rng, 5, 8) / std::sqrt(8.0);
  auto op = make_dense_linear(A);
  const Eigen::VectorXd anchor = oracles::random_vector(rng, 8);
  const Eigen::VectorXd y = oracles::random_vector(rng, 5);
  const double gamma = 0.6;
  const double eps = 0.3 * (A * anchor - y).norm();

  CorrectionConfig cfg;
  cfg.admm_iters = 600;
  cfg.grad_steps = 2;
  cfg.rho = 1.0;
  cfg.epsilon = eps;
  cfg.epsilon_mode = EpsilonMode::kAbsolute;
  cfg.step_mode = StepMode::kAnalyticJvp;
  const auto res = admm_correct(anchor, y, *op, gamma, cfg);
  const auto [x_opt, lam_opt] = oracle_constrained_prox(anchor, y, A, gamma, eps);

  const auto rep = kkt_residual(res.x, res.v, res.u, anchor, y, *op, gamma, eps, cfg.rho);
  CHECK(rep.lambda == doctest::Approx(lam_opt).epsilon(1e-4));
  CHECK(rep.stationarity_norm <= 1e-6);
  CHECK(std::abs(rep.complementarity) <= 1e-8);
  CHECK(rep.primal_gap <= 1e-6);
  CHECK(rep.residual == doctest::Approx(eps).epsilon(1e-6));

  // nudging the primal solution inflates the stationarity score by orders of magnitude
  Eigen::VectorXd bumped = res.x;
  bumped[0] += 1e-2;
  const auto worse = kkt_residual(bumped, res.v, res.u, anchor, y, *op, gamma, eps, cfg.rho);
  CHECK(worse.stationarity_norm >= 10.0 * std::max(rep.stationarity_norm, 1e-6));
}

TEST_CASE("kkt report: interior state with a settled dual gets a zero multiplier") {
  auto op = make_identity(3);
  Eigen::VectorXd x(3), y(3);
  x << 0.1, 0.0, 0.0;
  y << 0.0, 0.0, 0.0;
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(3);
  const auto rep = kkt_residual(x, x, u, x, y, *op, 1.0, 0.5, 2.0);
  CHECK(rep.feasible);
  CHECK(rep.residual == doctest::Approx(0.1));
  CHECK(rep.lambda == 0.0);
  CHECK(rep.complementarity == 0.0);
  CHECK(rep.stationarity_norm == 0.0);  // x == anchor
}

TEST_CASE("injected-noise KL: scalar closed form and the quadratic bound") {
  Eigen::VectorXd m(1), xh(1);
  m << 0.0;
  xh << 0.0;
  Eigen::MatrixXd Sigma(1, 1);
  Sigma << 1.0;
  const auto [exact, bound] = kl_gaussian_injected(m, xh, Sigma, 1.0);
  CHECK(exact == doctest::Approx(0.15342640972002735).epsilon(1e-12));
  CHECK(bound == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(exact <= bound);

  // mean displacement enters both sides identically
  m << 0.6;
  const auto [e2, b2] = kl_gaussian_injected(m, xh, Sigma, 1.0);
  CHECK(e2 == doctest::Approx(0.18 + 0.15342640972002735).epsilon(1e-12));
  CHECK(b2 == doctest::Approx(0.18 + 0.25).epsilon(1e-12));
}

TEST_CASE("injected-noise KL: bound dominates on random covariances, bad inputs throw") {
  Rng rng(121);
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index d = 1 + (rng.next_u64() % 6);
    const Eigen::MatrixXd B = oracles::random_matrix(rng, d, d);
    const Eigen::MatrixXd Sigma = B * B.transpose() / double(d);
    const Eigen::VectorXd m = oracles::random_vector(rng, d);
    const Eigen::VectorXd xh = oracles::random_vector(rng, d);
    const double sigma = 0.4 + 2.0 * rng.uniform();
    const auto [exact, bound] = kl_gaussian_injected(m, xh, Sigma, sigma);
    CHECK(exact >= 0.0);
    CHECK(exact <= bound + 1e-12);
  }

  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;
  Eigen::MatrixXd indef(2, 2);
  indef << 1.0, 0.0, 0.0, -1.0;
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(kl_gaussian_injected(z, z, asym, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(kl_gaussian_injected(z, z, indef, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(kl_gaussian_injected(z, z, Eigen::MatrixXd::Identity(2, 2), 0.0),
                  std::invalid_argument);
}

TEST_CASE("bisection oracle: pinned point, KKT substitution, feasible shortcut") {
  // identity operator, anchor (2, 0), unit ball around the origin -> (1, 0)
  Eigen::VectorXd anchor(2), y(2);
  anchor << 2, 0;
  y << 0, 0;
  const Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
  const auto [x_id, lam_id] = oracle_constrained_prox(anchor, y, I2, 1.0, 1.0);
  CHECK(x_id[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(x_id[1]) <= 1e-12);
  CHECK(lam_id == doctest::Approx(1.0).epsilon(1e-8));  // (x - anchor)/gamma balances the unit normal

  Rng rng(131);
  for (int t = 0; t < 25; ++t) {
    const Eigen::Index n = 4 + (rng.next_u64() % 8);
    const Eigen::Index m_rows = 3 + (rng.next_u64() % 6);
    const Eigen::MatrixXd A = oracles::random_matrix(rng, m_rows, n);
    const Eigen::VectorXd a = oracles::random_vector(rng, n);
    const Eigen::VectorXd yt = oracles::random_vector(rng, m_rows);
    const double gamma = 0.3 + rng.uniform();
    const double r0 = (A * a - yt).norm();
    // keep eps above the least-squares floor so the instance stays feasible
    const double r_min = (A * A.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(yt) - yt).norm();
    const double eps = r_min + (0.2 + 0.5 * rng.uniform()) * (r0 - r_min);
    const auto [x_opt, lam] = oracle_constrained_prox(a, yt, A, gamma, eps);
    const Eigen::VectorXd resid = A * x_opt - yt;
    REQUIRE(resid.norm() == doctest::Approx(eps).epsilon(1e-8));
    // stationarity: (1/gamma)(x - a) + (lam / ||r||) A^T r == 0
    const Eigen::VectorXd kkt = (x_opt - a) / gamma + (lam / resid.norm()) * A.transpose() * resid;
    REQUIRE(kkt.norm() <= 1e-9 * (1.0 + a.norm() / gamma));
  }

  const auto [x_free, lam_free] = oracle_constrained_prox(anchor, y, I2, 1.0, 5.0);
  CHECK((x_free - anchor).norm() == 0.0);
  CHECK(lam_free == 0.0);

  // a target below the least-squares floor is unreachable and must be reported
  Eigen::MatrixXd tall(3, 1);
  tall << 1, 0, 0;
  Eigen::VectorXd y3(3), a1(1);
  y3 << 0, 1, 1;  // residual can never drop below sqrt(2)
  a1 << 4;
  CHECK_THROWS_AS(oracle_constrained_prox(a1, y3, tall, 1.0, 0.5), std::runtime_error);
}

TEST_CASE("golden-section search: quadratic bowl and monotone edge") {
  const double xstar =
      golden_section_linesearch([](double a) { return (a - 0.3) * (a - 0.3); }, 0.0, 1.0);
  CHECK(xstar == doctest::Approx(0.3).epsilon(1e-8));
  const double lo_edge = golden_section_linesearch([](double a) { return a; }, 0.0, 1.0);
  CHECK(lo_edge <= 1e-9);
  CHECK_THROWS_AS(golden_section_linesearch([](double a) { return a; }, 1.0, 0.0),
                  std::invalid_argument);
}

TEST_CASE("posterior mean: covariance-form and information-form agree") {
  Rng rng(141);
  const Eigen::Index n = 7, m_rows = 4;
  const Eigen::MatrixXd B = oracles::random_matrix(rng, n, n);
  const Eigen::MatrixXd C = B * B.transpose() / double(n) + 0.1 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd A = oracles::random_matrix(rng, m_rows, n);
  const Eigen::VectorXd mu = oracles::random_vector(rng, n);
  const Eigen::VectorXd y = oracles::random_vector(rng, m_rows);
  const double beta = 0.2;

  const Eigen::VectorXd mean = gaussian_posterior_mean(mu, C, A, beta, y);
  const Eigen::MatrixXd info =
      C.inverse() + A.transpose() * A / (beta * beta);
  const Eigen::VectorXd alt =
      info.ldlt().solve(C.inverse() * mu + A.transpose() * y / (beta * beta));
  CHECK((mean - alt).norm() <= 1e-9 * (1.0 + alt.norm()));

  // beta -> 0 with square invertible A pins the mean to A^-1 y
  const Eigen::MatrixXd Asq =
      oracles::random_matrix(rng, n, n) + 3.0 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd exact = Asq.partialPivLu().solve(y.size() == n ? y : y);
  const Eigen::VectorXd yn = oracles::random_vector(rng, n);
  const Eigen::VectorXd pinned = gaussian_posterior_mean(mu, C, Asq, 1e-6, yn);
  CHECK((Asq * pinned - yn).norm() <= 1e-8 * (1.0 + yn.norm()));
}

TEST_CASE("mse / psnr: pinned decibel value and the zero-error sentinel") {
  Eigen::VectorXd a(4), b(4);
  a << 0.1, 0.2, 0.3, 0.4;
  b = a;
  b.array() += 0.1;  // mse = 0.01
  CHECK(mse(a, b) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(psnr(a, b) == doctest::Approx(26.020599913279624).epsilon(1e-12));
  CHECK(std::isinf(psnr(a, a)));
  CHECK(psnr(a, a) > 0.0);
  CHECK(psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("finite-difference helpers recover known derivatives") {
  const Eigen::VectorXd x = (Eigen::VectorXd(3) << 0.4, -0.7, 1.1).finished();
  const Eigen::VectorXd g = fd_gradient(
      [](const Eigen::VectorXd& z) { return 0.5 * z.squaredNorm(); }, x);
  CHECK((g - x).norm() <= 1e-8);

  auto sq = make_elementwise_square(3);
  const Eigen::VectorXd dir = (Eigen::VectorXd(3) << 1.0, 2.0, -1.0).finished();
  const Eigen::VectorXd jd = fd_directional(*sq, x, dir);
  const Eigen::VectorXd exact = 2.0 * x.cwiseProduct(dir);
  CHECK((jd - exact).norm() <= 1e-8);
}
