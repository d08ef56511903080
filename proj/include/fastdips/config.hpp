#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

namespace fastdips {

// How the proximal weight gamma_t is derived at noise level sigma_t.
enum class GammaRule { kSigmaSquared, kConstant };

// How the inner step size is chosen: closed form from an exact directional
// derivative, the finite-difference-stabilized form, or a fixed constant.
enum class StepMode { kAnalyticJvp, kAnalyticFd, kConstant };

// Whether epsilon is an absolute radius or a per-sample RMS budget
// (effective radius epsilon * sqrt(m)).
enum class EpsilonMode { kRms, kAbsolute };

struct CorrectionConfig {
  double rho = 200.0;   // coupling weight of the split quadratic
  int admm_iters = 3;   // K: outer iterations per level
  int grad_steps = 2;   // S: gradient steps per outer iteration
  double epsilon = 0.05;
  EpsilonMode epsilon_mode = EpsilonMode::kRms;
  double eta = 1e-3;    // probe scale for finite-difference step sizes
  double bt_shrink = 0.5;
  int bt_max = 20;
  GammaRule gamma_rule = GammaRule::kSigmaSquared;
  double gamma_value = 1.0;  // used when gamma_rule == kConstant
  StepMode step_mode = StepMode::kAnalyticFd;
  double alpha_value = 1e-3;  // used when step_mode == kConstant

  void validate() const {
    if (!(rho > 0.0)) throw std::invalid_argument("config: rho must be positive");
    if (admm_iters < 1 || grad_steps < 1)
      throw std::invalid_argument("config: iteration counts must be >= 1");
    if (epsilon < 0.0) throw std::invalid_argument("config: epsilon must be >= 0");
    if (!(eta > 0.0)) throw std::invalid_argument("config: eta must be positive");
    if (!(bt_shrink > 0.0 && bt_shrink < 1.0))
      throw std::invalid_argument("config: bt_shrink must lie in (0,1)");
    if (bt_max < 1) throw std::invalid_argument("config: bt_max must be >= 1");
    if (gamma_rule == GammaRule::kConstant && !(gamma_value > 0.0))
      throw std::invalid_argument("config: constant gamma must be positive");
    if (step_mode == StepMode::kConstant && !(alpha_value > 0.0))
      throw std::invalid_argument("config: constant alpha must be positive");
  }
};

inline double gamma_at(const CorrectionConfig& cfg, double sigma) {
  if (cfg.gamma_rule == GammaRule::kConstant) return cfg.gamma_value;
  if (!(sigma > 0.0)) throw std::invalid_argument("gamma_at: sigma must be positive");
  return sigma * sigma;
}

inline double effective_epsilon(const CorrectionConfig& cfg, Eigen::Index m) {
  if (cfg.epsilon_mode == EpsilonMode::kAbsolute) return cfg.epsilon;
  return cfg.epsilon * std::sqrt(static_cast<double>(m));
}

// Measurement model y = A(x) + beta * xi with isotropic Gaussian xi.
struct NoiseModel {
  double beta = 0.05;
};

}  // namespace fastdips
