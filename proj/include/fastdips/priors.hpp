#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

namespace fastdips {

// x0-predictor: given a noisy carrier x_t at noise scale sigma, return the
// posterior-mean estimate of the clean signal.
using DenoiseFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;

// N(mu, C). C is symmetrized and its spectrum clamped at zero on
// construction; asymmetry beyond 1e-12 (relative) is rejected.
struct GaussianPrior {
  Eigen::VectorXd mu;
  Eigen::MatrixXd C;

  GaussianPrior(Eigen::VectorXd mu, Eigen::MatrixXd C);
  Eigen::Index dim() const { return mu.size(); }
};

struct GmmPrior {
  std::vector<double> weights;  // positive, sum 1 (normalized on construction)
  std::vector<GaussianPrior> components;

  GmmPrior(std::vector<double> weights, std::vector<GaussianPrior> components);
  Eigen::Index dim() const { return components.front().dim(); }
};

// Posterior mean under x_t = x0 + sigma*xi: mu + C (C + sigma^2 I)^-1 (x_t - mu).
Eigen::VectorXd denoise_gaussian(const GaussianPrior& prior, const Eigen::VectorXd& x_t,
                                 double sigma);

// Mixture posterior mean: responsibility-weighted per-component posterior
// means, responsibilities computed in log space.
Eigen::VectorXd denoise_gmm(const GmmPrior& prior, const Eigen::VectorXd& x_t, double sigma);
// log-space responsibilities (exposed for the normalization property checks)
Eigen::VectorXd gmm_responsibilities(const GmmPrior& prior, const Eigen::VectorXd& x_t,
                                     double sigma);

DenoiseFn make_denoiser(const GaussianPrior& prior);
DenoiseFn make_denoiser(const GmmPrior& prior);

// decode(z) = W z + c with W^T W = I_k (checked to 1e-10 on construction);
// encode(x) = W^T (x - c).
struct LinearAutoencoder {
  Eigen::MatrixXd W;  // n x k
  Eigen::VectorXd c;  // n

  LinearAutoencoder(Eigen::MatrixXd W, Eigen::VectorXd c);
  Eigen::Index pixel_dim() const { return W.rows(); }
  Eigen::Index latent_dim() const { return W.cols(); }

  Eigen::VectorXd decode(const Eigen::VectorXd& z) const;
  Eigen::VectorXd encode(const Eigen::VectorXd& x) const;
  // derivatives of decode: constant Jacobian W
  Eigen::VectorXd decode_jvp(const Eigen::VectorXd& g) const;
  Eigen::VectorXd decode_vjp(const Eigen::VectorXd& r) const;
};

LinearAutoencoder identity_autoencoder(Eigen::Index n);

// Image of the pixel prior under encode: N(W^T(mu - c), W^T C W) per component.
GaussianPrior pushforward(const LinearAutoencoder& ae, const GaussianPrior& prior);
GmmPrior pushforward(const LinearAutoencoder& ae, const GmmPrior& prior);

}  // namespace fastdips
