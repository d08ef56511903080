#include <doctest.h>

#include <cmath>

#include "fastdips/priors.hpp"
#include "fastdips/rng.hpp"
#include "oracles.hpp"

using namespace fastdips;

namespace {

// rbf covariance used across the desk problems
Eigen::MatrixXd rbf_cov(Eigen::Index n, double amp, double ell, double jitter = 1e-8) {
  Eigen::MatrixXd C(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      C(i, j) = amp * amp * std::exp(-0.5 * (i - j) * (i - j) / (ell * ell));
  C.diagonal().array() += jitter;
  return C;
}

// posterior mean of a scalar mixture prior under x_t = x0 + sigma*xi,
// by trapezoid quadrature over the clean-signal axis
double quadrature_posterior_mean(const std::vector<double>& w, const std::vector<double>& mu,
                                 const std::vector<double>& var, double x_t, double sigma) {
  const int N = 200001;
  const double lo = -14.0, hi = 14.0;
  const double dx = (hi - lo) / (N - 1);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < N; ++i) {
    const double x0 = lo + i * dx;
    double prior = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j)
      prior += w[j] / std::sqrt(2.0 * M_PI * var[j]) *
               std::exp(-0.5 * (x0 - mu[j]) * (x0 - mu[j]) / var[j]);
    const double like = std::exp(-0.5 * (x_t - x0) * (x_t - x0) / (sigma * sigma));
    const double trap = (i == 0 || i == N - 1) ? 0.5 : 1.0;
    num += trap * x0 * prior * like;
    den += trap * prior * like;
  }
  return num / den;
}

}  // namespace

TEST_CASE("gaussian denoiser: pinned scalar value and point-mass limit") {
  GaussianPrior scalar((Eigen::VectorXd(1) << 0.0).finished(),
                       (Eigen::MatrixXd(1, 1) << 1.0).finished());
  Eigen::VectorXd x_t(1);
  x_t << 2.0;
  CHECK(denoise_gaussian(scalar, x_t, 1.0)[0] == doctest::Approx(1.0).epsilon(1e-14));

  GaussianPrior point((Eigen::VectorXd(2) << 3.0, -1.0).finished(), Eigen::MatrixXd::Zero(2, 2));
  Eigen::VectorXd noisy(2);
  noisy << 100.0, 100.0;
  const Eigen::VectorXd out = denoise_gaussian(point, noisy, 2.0);
  CHECK(out[0] == doctest::Approx(3.0));
  CHECK(out[1] == doctest::Approx(-1.0));
}

TEST_CASE("gaussian denoiser satisfies the score identity") {
  Rng rng(11);
  const Eigen::Index n = 12;
  GaussianPrior prior(oracles::random_vector(rng, n), rbf_cov(n, 0.7, 3.0));
  const double sigma = 0.6;
  const Eigen::VectorXd x_t = oracles::random_vector(rng, n) * 2.0;

  // analytic score of the smoothed density N(mu, C + sigma^2 I)
  Eigen::MatrixXd S = prior.C;
  S.diagonal().array() += sigma * sigma;
  const Eigen::VectorXd score = -S.llt().solve(x_t - prior.mu);
  const Eigen::VectorXd lhs = denoise_gaussian(prior, x_t, sigma);
  CHECK((lhs - (x_t + sigma * sigma * score)).norm() < 1e-10 * (1.0 + lhs.norm()));

  // and the analytic score itself agrees with finite differences of log density
  const auto logp = [&](const Eigen::VectorXd& z) {
    return -0.5 * (z - prior.mu).dot(S.llt().solve(z - prior.mu));
  };
  const double h = 1e-5;
  Eigen::VectorXd zp = x_t;
  for (Eigen::Index i = 0; i < n; ++i) {
    zp[i] = x_t[i] + h;
    const double fp = logp(zp);
    zp[i] = x_t[i] - h;
    const double fm = logp(zp);
    zp[i] = x_t[i];
    CHECK(score[i] == doctest::Approx((fp - fm) / (2.0 * h)).epsilon(1e-5));
  }
}

TEST_CASE("gaussian prior construction rejects bad covariances") {
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_AS(GaussianPrior(Eigen::VectorXd::Zero(2), asym), std::invalid_argument);
  Eigen::MatrixXd indef(2, 2);
  indef << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3, -1
  CHECK_THROWS_AS(GaussianPrior(Eigen::VectorXd::Zero(2), indef), std::invalid_argument);
  // tiny negative eigenvalues are clamped, not rejected
  Eigen::MatrixXd nearly = Eigen::MatrixXd::Identity(2, 2);
  nearly(0, 0) = -1e-14;
  GaussianPrior ok(Eigen::VectorXd::Zero(2), nearly);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ok.C);
  CHECK(es.eigenvalues().minCoeff() >= 0.0);
}

TEST_CASE("gmm denoiser matches scalar quadrature") {
  const std::vector<double> w = {0.3, 0.7};
  const std::vector<double> mu = {-2.0, 1.5};
  const std::vector<double> var = {0.4, 0.2};
  GmmPrior prior({w[0], w[1]},
                 {GaussianPrior((Eigen::VectorXd(1) << mu[0]).finished(),
                                (Eigen::MatrixXd(1, 1) << var[0]).finished()),
                  GaussianPrior((Eigen::VectorXd(1) << mu[1]).finished(),
                                (Eigen::MatrixXd(1, 1) << var[1]).finished())});
  for (double x_t : {-3.0, -0.4, 0.9, 2.5}) {
    for (double sigma : {0.3, 0.8, 2.0}) {
      const double got = denoise_gmm(prior, (Eigen::VectorXd(1) << x_t).finished(), sigma)[0];
      const double want = quadrature_posterior_mean(w, mu, var, x_t, sigma);
      CHECK(got == doctest::Approx(want).epsilon(1e-8));
    }
  }
}

TEST_CASE("gmm responsibilities normalize, localize, and survive underflow") {
  GmmPrior prior({0.5, 0.5},
                 {GaussianPrior((Eigen::VectorXd(1) << -30.0).finished(),
                                (Eigen::MatrixXd(1, 1) << 0.01).finished()),
                  GaussianPrior((Eigen::VectorXd(1) << 30.0).finished(),
                                (Eigen::MatrixXd(1, 1) << 0.01).finished())});
  const double sigma = 0.1;
  Eigen::VectorXd resp = gmm_responsibilities(prior, (Eigen::VectorXd(1) << 29.0).finished(), sigma);
  CHECK(resp.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(resp[1] > 1.0 - 1e-12);  // log-space survives a ~1.7e4 quadratic-form gap
  // astronomically far input: densities underflow, nearest component wins
  resp = gmm_responsibilities(prior, (Eigen::VectorXd(1) << 1e8).finished(), sigma);
  CHECK(resp.sum() == doctest::Approx(1.0));
  CHECK(resp[1] == 1.0);
}

TEST_CASE("gmm denoiser is equivariant under component permutation") {
  Rng rng(22);
  const Eigen::Index n = 6;
  GaussianPrior a(oracles::random_vector(rng, n), rbf_cov(n, 0.5, 2.0));
  GaussianPrior b(oracles::random_vector(rng, n), rbf_cov(n, 0.8, 1.0));
  GmmPrior p1({0.4, 0.6}, {a, b});
  GmmPrior p2({0.6, 0.4}, {b, a});
  const Eigen::VectorXd x_t = oracles::random_vector(rng, n);
  CHECK((denoise_gmm(p1, x_t, 0.7) - denoise_gmm(p2, x_t, 0.7)).norm() < 1e-13);
}

TEST_CASE("gmm prior validation") {
  GaussianPrior comp(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  CHECK_THROWS_AS(GmmPrior({1.0}, {comp, comp}), std::invalid_argument);
  CHECK_THROWS_AS(GmmPrior({0.5, -0.5}, {comp, comp}), std::invalid_argument);
  // weights renormalize
  GmmPrior p({2.0, 6.0}, {comp, comp});
  CHECK(p.weights[0] == doctest::Approx(0.25));
}

TEST_CASE("linear autoencoder: orthonormality contract and runtime maps") {
  Rng rng(33);
  const Eigen::MatrixXd W = oracles::random_orthonormal(rng, 10, 4);
  const Eigen::VectorXd c = oracles::random_vector(rng, 10);
  LinearAutoencoder ae(W, c);
  const Eigen::VectorXd z = oracles::random_vector(rng, 4);
  // encode inverts decode exactly on the latent range
  CHECK((ae.encode(ae.decode(z)) - z).norm() < 1e-12);
  // decode jvp/vjp are the constant Jacobian W
  const Eigen::VectorXd g = oracles::random_vector(rng, 4);
  const Eigen::VectorXd r = oracles::random_vector(rng, 10);
  CHECK((ae.decode_jvp(g) - W * g).norm() == 0.0);
  CHECK((ae.decode_vjp(r) - W.transpose() * r).norm() == 0.0);
  CHECK(ae.decode_jvp(g).dot(r) == doctest::Approx(g.dot(ae.decode_vjp(r))).epsilon(1e-12));

  Eigen::MatrixXd skewed = W;
  skewed.col(0) *= 1.0 + 1e-6;
  CHECK_THROWS_AS(LinearAutoencoder(skewed, c), std::invalid_argument);
  CHECK_THROWS_AS(LinearAutoencoder(W.transpose(), Eigen::VectorXd::Zero(4)),
                  std::invalid_argument);
}

TEST_CASE("pushforward prior is the encode-image of the pixel prior") {
  Rng rng(44);
  const Eigen::Index n = 12, k = 5;
  const Eigen::MatrixXd W = oracles::random_orthonormal(rng, n, k);
  const Eigen::VectorXd c = oracles::random_vector(rng, n);
  LinearAutoencoder ae(W, c);
  GaussianPrior pixel(oracles::random_vector(rng, n), rbf_cov(n, 0.6, 2.5));
  const GaussianPrior latent = pushforward(ae, pixel);
  CHECK((latent.mu - W.transpose() * (pixel.mu - c)).norm() < 1e-12);
  CHECK((latent.C - W.transpose() * pixel.C * W).cwiseAbs().maxCoeff() < 1e-12);

  // sampling route agrees: encode(pixel samples) has the pushforward moments
  Rng mc(55);
  Eigen::LLT<Eigen::MatrixXd> llt(pixel.C + 1e-10 * Eigen::MatrixXd::Identity(n, n));
  Eigen::VectorXd mean_acc = Eigen::VectorXd::Zero(k);
  const int trials = 20000;
  for (int t = 0; t < trials; ++t)
    mean_acc += ae.encode(pixel.mu + llt.matrixL() * mc.normal_vector(n));
  CHECK((mean_acc / trials - latent.mu).norm() < 0.05);

  const GmmPrior mix({0.5, 0.5}, {pixel, pixel});
  const GmmPrior latent_mix = pushforward(ae, mix);
  CHECK(latent_mix.components.size() == 2);
  CHECK(latent_mix.dim() == k);
}

TEST_CASE("identity autoencoder is a strict no-op") {
  LinearAutoencoder ae = identity_autoencoder(5);
  Eigen::VectorXd x(5);
  x << 1, 2, 3, 4, 5;
  CHECK((ae.decode(x) - x).norm() == 0.0);
  CHECK((ae.encode(x) - x).norm() == 0.0);
}
