#include "fastdips/sampler.hpp"

#include <stdexcept>

namespace fastdips {

namespace {

// Non-owning composition used inside the hybrid loop; the owning variant is
// built by compose_decoder below.
class ComposedDecoder final : public ForwardOperator {
 public:
  ComposedDecoder(const ForwardOperator& op, OperatorPtr keep_alive, LinearAutoencoder ae)
      : op_(op), keep_alive_(std::move(keep_alive)), ae_(std::move(ae)) {
    if (ae_.pixel_dim() != op_.input_dim())
      throw std::invalid_argument("compose_decoder: decoder output does not match operator");
  }
  Eigen::Index input_dim() const override { return ae_.latent_dim(); }
  Eigen::Index output_dim() const override { return op_.output_dim(); }
  const char* name() const override { return "composed_decoder"; }
  Eigen::VectorXd apply(const Eigen::VectorXd& z) const override {
    return op_.apply(ae_.decode(z));
  }
  Eigen::VectorXd vjp(const Eigen::VectorXd& z, const Eigen::VectorXd& r) const override {
    return ae_.decode_vjp(op_.vjp(ae_.decode(z), r));
  }
  Eigen::VectorXd jvp(const Eigen::VectorXd& z, const Eigen::VectorXd& g) const override {
    if (!op_.has_exact_jvp()) return ForwardOperator::jvp(z, g);
    return op_.jvp(ae_.decode(z), ae_.decode_jvp(g));
  }
  bool has_exact_jvp() const override { return op_.has_exact_jvp(); }
  bool is_linear() const override { return op_.is_linear(); }

 private:
  const ForwardOperator& op_;
  OperatorPtr keep_alive_;
  LinearAutoencoder ae_;
};

void check_schedule(const Schedule& schedule) {
  if (schedule.num_levels() < 1) throw std::invalid_argument("sampler: empty schedule");
  for (int i = 0; i <= schedule.num_levels(); ++i)
    if (!(schedule.sigmas[i] > 0.0)) throw std::invalid_argument("sampler: sigmas must be positive");
}

}  // namespace

Eigen::VectorXd reanneal(const Eigen::VectorXd& x, double sigma_next, Rng& rng) {
  if (sigma_next < 0.0) throw std::invalid_argument("reanneal: sigma must be >= 0");
  return x + sigma_next * rng.normal_vector(x.size());
}

RunRecord run_pixel(const Eigen::VectorXd& y, const ForwardOperator& op,
                    const DenoiseFn& denoise, const Schedule& schedule,
                    const CorrectionConfig& cfg, Rng& rng) {
  check_schedule(schedule);
  if (y.size() != op.output_dim())
    throw std::invalid_argument("run_pixel: measurement length does not match operator");

  const int T = schedule.num_levels();
  RunRecord rec;
  rec.levels.reserve(T);
  Eigen::VectorXd x = schedule.sigmas[0] * rng.normal_vector(op.input_dim());
  for (int i = 0; i < T; ++i) {
    const double sigma = schedule.sigmas[i];
    const double sigma_next = schedule.sigmas[i + 1];
    const Eigen::VectorXd anchor = denoise(x, sigma);
    LevelRecord lvl;
    lvl.level = i;
    lvl.sigma = sigma;
    lvl.mode = "pixel";
    lvl.correction = admm_correct(anchor, y, op, gamma_at(cfg, sigma), cfg);
    const Eigen::VectorXd corrected = lvl.correction.x;
    rec.levels.push_back(std::move(lvl));
    x = reanneal(corrected, sigma_next, rng);
    if (i == T - 1) {
      rec.final_pre_noise = corrected;
      rec.final_post_noise = x;
    }
  }
  rec.final_residual_pre = (op.apply(rec.final_pre_noise) - y).norm();
  rec.final_residual_post = (op.apply(rec.final_post_noise) - y).norm();
  return rec;
}

RunRecord run_latent_hybrid(const Eigen::VectorXd& y, const ForwardOperator& op,
                            const DenoiseFn& latent_denoise, const LinearAutoencoder& ae,
                            const Schedule& schedule, const HybridConfig& hybrid, Rng& rng) {
  check_schedule(schedule);
  if (y.size() != op.output_dim())
    throw std::invalid_argument("run_latent_hybrid: measurement length does not match operator");
  if (ae.pixel_dim() != op.input_dim())
    throw std::invalid_argument("run_latent_hybrid: decoder output does not match operator");
  if (hybrid.sigma_switch < 0.0)
    throw std::invalid_argument("run_latent_hybrid: sigma_switch must be >= 0");

  const ComposedDecoder composed(op, nullptr, ae);
  const int T = schedule.num_levels();
  RunRecord rec;
  rec.levels.reserve(T);
  Eigen::VectorXd z = schedule.sigmas[0] * rng.normal_vector(ae.latent_dim());
  Eigen::VectorXd z_corrected;
  for (int i = 0; i < T; ++i) {
    const double sigma = schedule.sigmas[i];
    const double sigma_next = schedule.sigmas[i + 1];
    const Eigen::VectorXd z_anchor = latent_denoise(z, sigma);
    LevelRecord lvl;
    lvl.level = i;
    lvl.sigma = sigma;
    if (sigma > hybrid.sigma_switch) {
      // decoded-anchor pixel correction, then drop back to the latent carrier
      lvl.mode = "pixel";
      lvl.correction =
          admm_correct(ae.decode(z_anchor), y, op, gamma_at(hybrid.pixel, sigma), hybrid.pixel);
      z_corrected = ae.encode(lvl.correction.x);
    } else {
      lvl.mode = "latent";
      lvl.correction =
          admm_correct(z_anchor, y, composed, gamma_at(hybrid.latent, sigma), hybrid.latent);
      z_corrected = lvl.correction.x;
    }
    rec.levels.push_back(std::move(lvl));
    z = reanneal(z_corrected, sigma_next, rng);
  }
  rec.final_pre_noise = ae.decode(z_corrected);
  rec.final_post_noise = ae.decode(z);
  rec.final_residual_pre = (op.apply(rec.final_pre_noise) - y).norm();
  rec.final_residual_post = (op.apply(rec.final_post_noise) - y).norm();
  return rec;
}

OperatorPtr compose_decoder(OperatorPtr op, const LinearAutoencoder& ae) {
  if (!op) throw std::invalid_argument("compose_decoder: null operator");
  const ForwardOperator& ref = *op;
  return std::make_shared<ComposedDecoder>(ref, std::move(op), ae);
}

}  // namespace fastdips
