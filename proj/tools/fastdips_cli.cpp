// Command-line front end: solve / ablate / validate / schedule.
// Exit codes: 0 ok, 1 property or solver failure, 2 usage or config error.

#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>

#include "fastdips/experiment.hpp"
#include "fastdips/schedule.hpp"
#include "fastdips/validation.hpp"

namespace {

fastdips::ExperimentConfig resolve_config(const std::string& arg) {
  if (fastdips::is_preset(arg))
    return fastdips::load_experiment_config(fastdips::preset_text(arg));
  return fastdips::load_experiment_file(arg);
}

std::string self_path(const char* argv0) {
  char buf[4096];
  const ssize_t len = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
  if (len > 0) return std::string(buf, static_cast<std::size_t>(len));
  return argv0 ? argv0 : "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"annealed inverse-problem solver with hard measurement feasibility"};
  app.require_subcommand(1);

  std::string config_arg, outdir, filter, inject;
  std::uint64_t seed = 0;
  int jobs = 1;

  auto* solve = app.add_subcommand("solve", "run the annealed loop and write artifacts");
  solve->add_option("--config", config_arg, "preset name or INI config path")->required();
  auto* solve_seed = solve->add_option("--seed", seed, "override the base seed");
  solve->add_option("--outdir", outdir, "override the output directory");
  solve->add_option("--jobs", jobs, "parallel workers for batch repeats")
      ->check(CLI::Range(1, INT32_MAX).description("POSITIVE"));

  auto* ablate = app.add_subcommand("ablate", "solver x step-rule grid at matched budget");
  ablate->add_option("--config", config_arg, "preset name or INI config path")->required();
  auto* ablate_seed = ablate->add_option("--seed", seed, "override the base seed");
  ablate->add_option("--outdir", outdir, "override the output directory");

  auto* validate = app.add_subcommand("validate", "run the property and acceptance checks");
  validate->add_option("--filter", filter, "run only checks whose name contains this");
  validate->add_option("--inject-fault", inject,
                       "deliberately break a component to prove the checks catch it")
      ->check(CLI::IsMember({"projection"}));

  auto* schedule = app.add_subcommand("schedule", "print the noise ladder as CSV");
  schedule->add_option("--config", config_arg, "preset name or INI config path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*solve) {
      const fastdips::ExperimentConfig cfg = resolve_config(config_arg);
      fastdips::SolveOverrides ov;
      if (solve_seed->count() > 0) ov.seed = seed;
      if (!outdir.empty()) ov.outdir = outdir;
      ov.jobs = jobs;
      const auto t0 = std::chrono::steady_clock::now();
      const auto outs = fastdips::run_solve(cfg, ov);
      const double dt =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      for (const auto& o : outs) {
        std::printf("seed %llu: residual %.6g -> %.6g  mse %.6g  psnr %.4f dB",
                    static_cast<unsigned long long>(o.seed), o.residual_pre, o.residual_post,
                    o.mse_truth, o.psnr_truth);
        if (o.has_oracle)
          std::printf("  (oracle %.4f dB, gap %+.4f dB)", o.oracle_psnr_truth, o.psnr_gap_db);
        std::printf("  -> %s\n", o.run_dir.c_str());
      }
      std::printf("%zu run(s) in %.2f s\n", outs.size(), dt);
      return 0;
    }
    if (*ablate) {
      fastdips::ExperimentConfig cfg = resolve_config(config_arg);
      fastdips::SolveOverrides ov;
      if (ablate_seed->count() > 0) ov.seed = seed;
      if (!outdir.empty()) ov.outdir = outdir;
      const auto rows = fastdips::run_ablate(cfg, ov);
      std::fputs(fastdips::ablate_csv(rows).c_str(), stdout);
      return 0;
    }
    if (*validate) {
      fastdips::ValidationOptions opts;
      opts.filter = filter;
      opts.fault_projection = inject == "projection";
      opts.cli_path = self_path(argv[0]);
      const auto results = fastdips::run_checks(opts);
      int failed = 0;
      for (const auto& r : results) {
        std::printf("%s %s %.3fs: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                    r.seconds, r.detail.c_str());
        if (!r.passed) ++failed;
      }
      std::printf("%d/%zu checks passed\n", static_cast<int>(results.size()) - failed,
                  results.size());
      if (results.empty()) {
        std::fprintf(stderr, "no checks match filter '%s'\n", filter.c_str());
        return 2;
      }
      return failed == 0 ? 0 : 1;
    }
    if (*schedule) {
      const fastdips::ExperimentConfig cfg = resolve_config(config_arg);
      const fastdips::Schedule s =
          fastdips::make_edm_schedule(cfg.schedule.sigma_min, cfg.schedule.sigma_max,
                                      cfg.schedule.levels, cfg.schedule.curve);
      std::printf("level,sigma\n");
      for (Eigen::Index i = 0; i < s.sigmas.size(); ++i)
        std::printf("%lld,%.17g\n", static_cast<long long>(i), s.sigmas[i]);
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
