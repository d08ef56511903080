#include "fastdips/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace fastdips {

Schedule make_edm_schedule(double sigma_min, double sigma_max, int T, double rho) {
  if (!(sigma_min > 0.0) || !(sigma_max > sigma_min))
    throw std::invalid_argument("schedule: need 0 < sigma_min < sigma_max");
  if (T < 1) throw std::invalid_argument("schedule: need at least one level");
  if (!(rho > 0.0)) throw std::invalid_argument("schedule: rho must be positive");

  const double a = std::pow(sigma_max, 1.0 / rho);
  const double b = std::pow(sigma_min, 1.0 / rho);
  Schedule s;
  s.sigmas.resize(T + 1);
  for (int i = 0; i <= T; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(T);
    s.sigmas[i] = std::pow(a + frac * (b - a), rho);
  }
  s.sigmas[0] = sigma_max;
  s.sigmas[T] = sigma_min;
  for (int i = 0; i < T; ++i)
    if (!(s.sigmas[i] > s.sigmas[i + 1]))
      throw std::logic_error("schedule: levels not strictly decreasing");
  return s;
}

}  // namespace fastdips
