#pragma once

#include <Eigen/Core>

namespace fastdips {

// Annealing ladder sigma_T > ... > sigma_0. sigmas has num_levels()+1 entries;
// level i of a run denoises at sigmas[i] and re-anneals to sigmas[i+1].
struct Schedule {
  Eigen::VectorXd sigmas;  // strictly decreasing, all positive

  int num_levels() const { return static_cast<int>(sigmas.size()) - 1; }
};

// Power-law ladder: sigma_i = (smax^(1/rho) + (i/T)*(smin^(1/rho) - smax^(1/rho)))^rho
// for i = 0..T. Endpoints are pinned exactly to smax / smin.
Schedule make_edm_schedule(double sigma_min, double sigma_max, int T, double rho = 7.0);

}  // namespace fastdips
