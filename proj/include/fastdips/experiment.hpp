#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fastdips/config.hpp"
#include "fastdips/operators.hpp"
#include "fastdips/priors.hpp"
#include "fastdips/sampler.hpp"
#include "fastdips/schedule.hpp"

namespace fastdips {

// --- flat INI document --------------------------------------------------------
//
// One nesting level: [section] headers over key = value lines, '#'/';'
// comments, order preserved. serialize_ini emits the canonical form
// ("[name]\n" then "key = value\n" per entry, one blank line between
// sections); a document already in canonical form round-trips byte-identical.

struct IniEntry {
  std::string key;
  std::string value;
};

struct IniSection {
  std::string name;
  std::vector<IniEntry> entries;
};

struct IniDoc {
  std::vector<IniSection> sections;

  bool has(const std::string& section, const std::string& key) const;
  const std::string& get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const;
};

IniDoc parse_ini(const std::string& text);
std::string serialize_ini(const IniDoc& doc);

std::uint64_t fnv1a64(const std::string& bytes);

// --- typed experiment configuration -------------------------------------------

enum class SignalSource { kPriorSample, kZeros, kFile };
enum class PriorKind { kGaussian, kGmmPair };
enum class MeanProfile { kZero, kSine };
enum class CovModel { kIdentity, kRbf };
enum class SamplerMode { kPixel, kLatent };

struct ProblemConfig {
  OperatorSpec op;
  double beta = 0.05;
  SignalSource signal = SignalSource::kPriorSample;
  std::string signal_file;  // kFile only
};

struct PriorConfig {
  PriorKind kind = PriorKind::kGaussian;
  MeanProfile mean = MeanProfile::kSine;
  double mean_amplitude = 0.5;
  double mean_cycles = 3.0;
  CovModel cov = CovModel::kRbf;
  double cov_scale = 1.0;
  double cov_length = 8.0;
  double cov_jitter = 1e-6;
  double gmm_weight = 0.5;  // kGmmPair: weight of the +mean component
};

struct ScheduleConfig {
  double sigma_min = 0.1;
  double sigma_max = 100.0;
  int levels = 50;
  double curve = 7.0;
};

struct SamplerSection {
  SamplerMode mode = SamplerMode::kPixel;
  double sigma_switch = 1.0;
  Eigen::Index latent_dim = 16;
  // latent-branch overrides; pixel-branch values come from [correction]
  double latent_rho = 200.0;
  int latent_admm_iters = 5;
  int latent_grad_steps = 3;
};

struct AblateGrid {
  std::vector<std::string> solvers = {"admm", "qdp"};
  std::vector<std::string> steps = {"constant", "star", "fd"};
};

struct RunsConfig {
  int repeats = 1;
  std::uint64_t seed = 42;
};

struct OutputConfig {
  std::string dir = "out";
  bool emit_trace = false;
};

struct ExperimentConfig {
  ProblemConfig problem;
  PriorConfig prior;
  ScheduleConfig schedule;
  CorrectionConfig correction;
  SamplerSection sampler;
  AblateGrid ablate;
  RunsConfig runs;
  OutputConfig output;
  std::string canonical_text;  // serialize_ini of the parsed doc; hashed for run ids
};

// Parse + validate. Unknown sections or keys are rejected so typos cannot
// silently fall back to defaults.
ExperimentConfig load_experiment_config(const std::string& text);
// File wrapper; a missing file throws with the path in the message.
ExperimentConfig load_experiment_file(const std::string& path);

// Shipped presets (resolvable anywhere a config path is accepted).
std::vector<std::string> preset_names();
bool is_preset(const std::string& name);
std::string preset_text(const std::string& name);

// seed + config-hash directory stem, e.g. "s42-9f2ab31c44d05e67"
std::string run_id(std::uint64_t seed, const std::string& canonical_text);

// --- builders ------------------------------------------------------------------

Eigen::VectorXd make_mean_profile(MeanProfile profile, Eigen::Index n, double amplitude,
                                  double cycles);
// stationary periodized (wrapped) Gaussian kernel + jitter on the diagonal;
// PSD for every length because the circulant spectrum samples a Gaussian
Eigen::MatrixXd make_rbf_covariance(Eigen::Index n, double scale, double length, double jitter);
GaussianPrior build_gaussian_prior(const PriorConfig& prior, Eigen::Index n);
DenoiseFn build_denoiser(const PriorConfig& prior, Eigen::Index n);
// orthonormal truncated DCT-II decoder columns, c = 0
LinearAutoencoder make_dct_autoencoder(Eigen::Index n, Eigen::Index k);

// --- drivers -------------------------------------------------------------------

struct SolveOutcome {
  std::string run_dir;       // <outdir>/<run-id>
  std::uint64_t seed = 0;
  double residual_pre = 0.0;
  double residual_post = 0.0;
  double mse_truth = 0.0;
  double psnr_truth = 0.0;
  bool has_oracle = false;   // linear operator + Gaussian prior
  double oracle_psnr_truth = 0.0;
  double psnr_gap_db = 0.0;  // psnr_truth - oracle_psnr_truth
  double psnr_vs_oracle = 0.0;
  long long applies = 0, vjps = 0, jvps = 0;
};

struct SolveOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> outdir;
  int jobs = 1;
};

// Generates y = A(x_true) + beta*xi per repeat, runs the configured loop and
// writes <outdir>/<run-id>/{summary.json, levels.csv, final.ten} (+ trace.csv
// when emit_trace). All artifacts are byte-deterministic for a fixed
// config+seed; wall-clock timing is never written into them.
std::vector<SolveOutcome> run_solve(const ExperimentConfig& cfg, const SolveOverrides& ov);

struct AblateRow {
  std::string solver;     // "admm" | "qdp"
  std::string step;       // "constant" | "star" | "fd"
  int budget_steps = 0;   // levels * K * S, identical across rows
  double epsilon = 0.0;   // effective radius
  double residual = 0.0;  // ||A(x) - y|| of the official output
  double feas_gap = 0.0;  // split-variable gap for admm, == residual for qdp
  bool feasible = false;
  double mse_truth = 0.0;
  double psnr_truth = 0.0;
  long long applies = 0, vjps = 0, jvps = 0;
};

std::vector<AblateRow> run_ablate(const ExperimentConfig& cfg, const SolveOverrides& ov);
std::string ablate_csv(const std::vector<AblateRow>& rows);

}  // namespace fastdips
