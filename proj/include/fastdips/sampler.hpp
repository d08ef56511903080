#pragma once

#include <string>
#include <vector>

#include "fastdips/correction.hpp"
#include "fastdips/priors.hpp"
#include "fastdips/rng.hpp"
#include "fastdips/schedule.hpp"

namespace fastdips {

// Mode-substitution noise injection: x + sigma_next * xi, xi ~ N(0, I).
Eigen::VectorXd reanneal(const Eigen::VectorXd& x, double sigma_next, Rng& rng);

struct LevelRecord {
  int level = 0;        // 0-based position in the ladder
  double sigma = 0.0;   // noise scale the anchor was denoised at
  std::string mode;     // "pixel" or "latent"
  CorrectionResult correction;
};

// One annealed run. The official output is the last corrected iterate
// *before* the trailing noise injection; the injected variant is kept
// alongside for auditability.
struct RunRecord {
  std::vector<LevelRecord> levels;
  Eigen::VectorXd final_pre_noise;
  Eigen::VectorXd final_post_noise;
  double final_residual_pre = 0.0;   // ||A(final_pre_noise) - y||
  double final_residual_post = 0.0;  // ||A(final_post_noise) - y||
};

// Pixel-space loop: per level denoise the carrier, hard-correct the anchor
// against the measurement ball, re-anneal to the next scale.
RunRecord run_pixel(const Eigen::VectorXd& y, const ForwardOperator& op,
                    const DenoiseFn& denoise, const Schedule& schedule,
                    const CorrectionConfig& cfg, Rng& rng);

struct HybridConfig {
  CorrectionConfig pixel;
  CorrectionConfig latent;
  // Levels with sigma > sigma_switch correct decoded anchors in pixel space
  // (then re-encode); the rest correct in latent space through the composed
  // operator. 0 = always pixel, +inf = always latent.
  double sigma_switch = 1.0;
};

// Latent-carrier loop with the pixel/latent switch; the returned tensors are
// decoded to pixel space.
RunRecord run_latent_hybrid(const Eigen::VectorXd& y, const ForwardOperator& op,
                            const DenoiseFn& latent_denoise, const LinearAutoencoder& ae,
                            const Schedule& schedule, const HybridConfig& hybrid, Rng& rng);

// A composed with the decoder: z |-> A(W z + c), with chain-rule vjp/jvp.
OperatorPtr compose_decoder(OperatorPtr op, const LinearAutoencoder& ae);

}  // namespace fastdips
