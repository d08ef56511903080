#include <doctest.h>

#include "fastdips/config.hpp"
#include "fastdips/schedule.hpp"

using namespace fastdips;

TEST_CASE("edm ladder endpoints are pinned and levels decrease strictly") {
  const Schedule s = make_edm_schedule(0.1, 100.0, 50);
  REQUIRE(s.sigmas.size() == 51);
  CHECK(s.num_levels() == 50);
  CHECK(s.sigmas[0] == 100.0);
  CHECK(s.sigmas[50] == 0.1);
  for (int i = 0; i < 50; ++i) CHECK(s.sigmas[i] > s.sigmas[i + 1]);
}

TEST_CASE("edm midpoint matches the arbitrary-precision value") {
  // ((100^(1/7) + 0.1^(1/7)) / 2)^7, evaluated at 40 decimal digits
  const Schedule s = make_edm_schedule(0.1, 100.0, 2);
  CHECK(s.sigmas[1] == doctest::Approx(7.177132302454147).epsilon(1e-12));
}

TEST_CASE("edm ladder rejects bad arguments") {
  CHECK_THROWS_AS(make_edm_schedule(0.0, 100.0, 10), std::invalid_argument);
  CHECK_THROWS_AS(make_edm_schedule(1.0, 1.0, 10), std::invalid_argument);
  CHECK_THROWS_AS(make_edm_schedule(2.0, 1.0, 10), std::invalid_argument);
  CHECK_THROWS_AS(make_edm_schedule(0.1, 100.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_edm_schedule(0.1, 100.0, 10, -1.0), std::invalid_argument);
}

TEST_CASE("gamma rule follows the noise level or a pinned constant") {
  CorrectionConfig cfg;
  cfg.gamma_rule = GammaRule::kSigmaSquared;
  CHECK(gamma_at(cfg, 0.5) == doctest::Approx(0.25));
  CHECK_THROWS_AS(gamma_at(cfg, 0.0), std::invalid_argument);
  cfg.gamma_rule = GammaRule::kConstant;
  cfg.gamma_value = 3.0;
  CHECK(gamma_at(cfg, 0.5) == 3.0);
}

TEST_CASE("epsilon modes: absolute radius or per-sample rms budget") {
  CorrectionConfig cfg;
  cfg.epsilon = 0.05;
  cfg.epsilon_mode = EpsilonMode::kRms;
  CHECK(effective_epsilon(cfg, 64) == doctest::Approx(0.05 * 8.0));
  cfg.epsilon_mode = EpsilonMode::kAbsolute;
  CHECK(effective_epsilon(cfg, 64) == 0.05);
}

TEST_CASE("correction config validation") {
  CorrectionConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CorrectionConfig bad = cfg;
  bad.rho = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.admm_iters = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.epsilon = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.bt_shrink = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
