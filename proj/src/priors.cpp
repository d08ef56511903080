#include "fastdips/priors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fastdips {

namespace {

Eigen::LLT<Eigen::MatrixXd> noisy_cov_llt(const Eigen::MatrixXd& C, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("denoise: sigma must be positive");
  Eigen::MatrixXd M = C;
  M.diagonal().array() += sigma * sigma;
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("denoise: C + sigma^2 I is not positive definite");
  return llt;
}

}  // namespace

GaussianPrior::GaussianPrior(Eigen::VectorXd mu_in, Eigen::MatrixXd C_in)
    : mu(std::move(mu_in)), C(std::move(C_in)) {
  if (mu.size() == 0 || C.rows() != mu.size() || C.cols() != mu.size())
    throw std::invalid_argument("gaussian prior: covariance shape does not match mean");
  const double scale = 1.0 + C.cwiseAbs().maxCoeff();
  if ((C - C.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("gaussian prior: covariance is not symmetric");
  C = 0.5 * (C + C.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  if (es.eigenvalues().minCoeff() < -1e-12 * scale)
    throw std::invalid_argument("gaussian prior: covariance has a negative eigenvalue");
  if (es.eigenvalues().minCoeff() < 0.0) {
    const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    C = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    C = 0.5 * (C + C.transpose()).eval();
  }
}

GmmPrior::GmmPrior(std::vector<double> weights_in, std::vector<GaussianPrior> components_in)
    : weights(std::move(weights_in)), components(std::move(components_in)) {
  if (components.empty() || weights.size() != components.size())
    throw std::invalid_argument("gmm prior: need one weight per component");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("gmm prior: weights must be positive");
    sum += w;
  }
  for (double& w : weights) w /= sum;
  for (const auto& comp : components)
    if (comp.dim() != components.front().dim())
      throw std::invalid_argument("gmm prior: mixed component dimensions");
}

Eigen::VectorXd denoise_gaussian(const GaussianPrior& prior, const Eigen::VectorXd& x_t,
                                 double sigma) {
  if (x_t.size() != prior.dim())
    throw std::invalid_argument("denoise: input dimension does not match prior");
  const auto llt = noisy_cov_llt(prior.C, sigma);
  return prior.mu + prior.C * llt.solve(x_t - prior.mu);
}

Eigen::VectorXd gmm_responsibilities(const GmmPrior& prior, const Eigen::VectorXd& x_t,
                                     double sigma) {
  const std::size_t J = prior.components.size();
  Eigen::VectorXd loglike(J), quad(J);
  for (std::size_t j = 0; j < J; ++j) {
    const auto& comp = prior.components[j];
    if (x_t.size() != comp.dim())
      throw std::invalid_argument("denoise: input dimension does not match prior");
    const auto llt = noisy_cov_llt(comp.C, sigma);
    const Eigen::VectorXd d = x_t - comp.mu;
    quad[j] = d.dot(llt.solve(d));
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < comp.dim(); ++i)
      logdet += std::log(llt.matrixL()(i, i));
    loglike[j] = std::log(prior.weights[j]) - 0.5 * quad[j] - logdet;
  }
  const double top = loglike.maxCoeff();
  Eigen::VectorXd resp(J);
  if (!std::isfinite(top)) {
    // every density underflowed: hard-assign the nearest component in
    // Mahalanobis distance
    Eigen::Index best;
    quad.minCoeff(&best);
    resp.setZero();
    resp[best] = 1.0;
    return resp;
  }
  for (std::size_t j = 0; j < J; ++j) resp[j] = std::exp(loglike[j] - top);
  return resp / resp.sum();
}

Eigen::VectorXd denoise_gmm(const GmmPrior& prior, const Eigen::VectorXd& x_t, double sigma) {
  const Eigen::VectorXd resp = gmm_responsibilities(prior, x_t, sigma);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(prior.dim());
  for (std::size_t j = 0; j < prior.components.size(); ++j) {
    if (resp[j] == 0.0) continue;
    out += resp[j] * denoise_gaussian(prior.components[j], x_t, sigma);
  }
  return out;
}

DenoiseFn make_denoiser(const GaussianPrior& prior) {
  return [prior](const Eigen::VectorXd& x_t, double sigma) {
    return denoise_gaussian(prior, x_t, sigma);
  };
}

DenoiseFn make_denoiser(const GmmPrior& prior) {
  return [prior](const Eigen::VectorXd& x_t, double sigma) {
    return denoise_gmm(prior, x_t, sigma);
  };
}

LinearAutoencoder::LinearAutoencoder(Eigen::MatrixXd W_in, Eigen::VectorXd c_in)
    : W(std::move(W_in)), c(std::move(c_in)) {
  if (W.rows() == 0 || W.cols() == 0 || W.cols() > W.rows())
    throw std::invalid_argument("autoencoder: W must be tall (n >= k >= 1)");
  if (c.size() != W.rows())
    throw std::invalid_argument("autoencoder: offset length does not match W rows");
  const Eigen::MatrixXd gram = W.transpose() * W;
  const double err =
      (gram - Eigen::MatrixXd::Identity(W.cols(), W.cols())).cwiseAbs().maxCoeff();
  if (err > 1e-10)
    throw std::invalid_argument("autoencoder: columns of W are not orthonormal");
}

Eigen::VectorXd LinearAutoencoder::decode(const Eigen::VectorXd& z) const {
  if (z.size() != latent_dim()) throw std::invalid_argument("autoencoder: bad latent length");
  return W * z + c;
}

Eigen::VectorXd LinearAutoencoder::encode(const Eigen::VectorXd& x) const {
  if (x.size() != pixel_dim()) throw std::invalid_argument("autoencoder: bad pixel length");
  return W.transpose() * (x - c);
}

Eigen::VectorXd LinearAutoencoder::decode_jvp(const Eigen::VectorXd& g) const {
  if (g.size() != latent_dim()) throw std::invalid_argument("autoencoder: bad latent length");
  return W * g;
}

Eigen::VectorXd LinearAutoencoder::decode_vjp(const Eigen::VectorXd& r) const {
  if (r.size() != pixel_dim()) throw std::invalid_argument("autoencoder: bad pixel length");
  return W.transpose() * r;
}

LinearAutoencoder identity_autoencoder(Eigen::Index n) {
  return LinearAutoencoder(Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n));
}

GaussianPrior pushforward(const LinearAutoencoder& ae, const GaussianPrior& prior) {
  if (prior.dim() != ae.pixel_dim())
    throw std::invalid_argument("pushforward: prior dimension does not match autoencoder");
  return GaussianPrior(ae.W.transpose() * (prior.mu - ae.c),
                       ae.W.transpose() * prior.C * ae.W);
}

GmmPrior pushforward(const LinearAutoencoder& ae, const GmmPrior& prior) {
  std::vector<GaussianPrior> comps;
  comps.reserve(prior.components.size());
  for (const auto& comp : prior.components) comps.push_back(pushforward(ae, comp));
  return GmmPrior(prior.weights, std::move(comps));
}

}  // namespace fastdips
