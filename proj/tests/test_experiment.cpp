#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fastdips/experiment.hpp"
#include "fastdips/tensor.hpp"
#include "oracles.hpp"

using namespace fastdips;
namespace fs = std::filesystem;

namespace {

// small but complete document; every section the loader knows about
std::string tiny_config(const std::string& extra = "") {
  return
      "[problem]\n"
      "operator = blur\n"
      "n = 16\n"
      "blur_sigma = 1.0\n"
      "blur_radius = 3\n"
      "beta = 0.05\n"
      "signal = prior\n"
      "\n"
      "[prior]\n"
      "kind = gaussian\n"
      "mean = sine\n"
      "mean_amplitude = 0.5\n"
      "mean_cycles = 2\n"
      "cov = rbf\n"
      "cov_scale = 0.2\n"
      "cov_length = 2.0\n"
      "cov_jitter = 1e-6\n"
      "\n"
      "[schedule]\n"
      "sigma_min = 0.5\n"
      "sigma_max = 20\n"
      "levels = 4\n"
      "curve = 7\n"
      "\n"
      "[correction]\n"
      "rho = 50\n"
      "admm_iters = 2\n"
      "grad_steps = 2\n"
      "epsilon = 0.05\n"
      "epsilon_mode = rms\n"
      "step_mode = fd\n"
      "eta = 1e-3\n"
      "bt_shrink = 0.5\n"
      "bt_max = 20\n"
      "gamma_rule = sigma2\n"
      "\n"
      "[sampler]\n"
      "mode = pixel\n"
      "\n"
      "[runs]\n"
      "repeats = 2\n"
      "seed = 7\n"
      "\n"
      "[output]\n"
      "dir = out\n"
      "emit_trace = false\n" +
      extra;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path d = fs::temp_directory_path() / ("fastdips-test-" + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_cli(const std::string& args, const fs::path& capture = {}) {
  std::string cmd = std::string("\"") + FASTDIPS_CLI_PATH + "\" " + args;
  if (capture.empty())
    cmd += " > /dev/null 2>&1";
  else
    cmd += " > \"" + capture.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("ini: canonical round trip, tolerant parse, accessors") {
  const std::string canonical =
      "[alpha]\n"
      "one = 1\n"
      "two = dos\n"
      "\n"
      "[beta]\n"
      "three = 3.5\n";
  const IniDoc doc = parse_ini(canonical);
  REQUIRE(doc.sections.size() == 2);
  CHECK(doc.sections[0].name == "alpha");
  CHECK(doc.sections[0].entries[1].key == "two");
  CHECK(serialize_ini(doc) == canonical);  // byte-identical echo

  // comments, stray blanks and loose spacing normalize to the same document
  const IniDoc messy = parse_ini(
      "# heading comment\n"
      "[alpha]\n"
      "one=1\n"
      "  two   =    dos\n"
      "; trailing remark\n"
      "\n\n"
      "[beta]\n"
      "three = 3.5\n\n");
  CHECK(serialize_ini(messy) == canonical);

  CHECK(doc.has("alpha", "two"));
  CHECK(!doc.has("alpha", "three"));
  CHECK(doc.get("beta", "three") == "3.5");
  CHECK(doc.get_or("beta", "nope", "fallback") == "fallback");
  CHECK_THROWS_AS((void)doc.get("beta", "nope"), std::exception);
}

TEST_CASE("config schema: typos and bad values are rejected by name") {
  CHECK_NOTHROW(load_experiment_config(tiny_config()));

  auto rejects = [](const std::string& text, const std::string& needle) {
    try {
      load_experiment_config(text);
      FAIL_CHECK("accepted a config that should be rejected: ", needle);
    } catch (const std::invalid_argument& e) {
      CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos,
                    "error '", e.what(), "' does not mention '", needle, "'");
    }
  };

  rejects(tiny_config("\n[mystery]\nx = 1\n"), "mystery");
  rejects(tiny_config("\n[runs]\nrepeats = 3\n"), "duplicate");

  std::string typo_key = tiny_config();
  typo_key.replace(typo_key.find("repeats = 2"), 11, "repeat_count = 2");
  rejects(typo_key, "repeat_count");

  std::string bad_enum = tiny_config();
  bad_enum.replace(bad_enum.find("mode = pixel"), 12, "mode = voxel");
  rejects(bad_enum, "voxel");

  std::string bad_range = tiny_config();
  bad_range.replace(bad_range.find("beta = 0.05"), 11, "beta = -1.0");
  rejects(bad_range, "beta");

  std::string bad_number = tiny_config();
  bad_number.replace(bad_number.find("levels = 4"), 10, "levels = soon");
  rejects(bad_number, "levels");
}

TEST_CASE("config io: missing file error names the path") {
  try {
    load_experiment_file("/no/such/dir/exp.ini");
    FAIL_CHECK("missing file accepted");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("/no/such/dir/exp.ini") != std::string::npos);
  }
}

TEST_CASE("presets: every name loads and echoes canonically") {
  const auto names = preset_names();
  CHECK(names.size() == 6);
  for (const auto& name : names) {
    CAPTURE(name);
    CHECK(is_preset(name));
    const std::string text = preset_text(name);
    CHECK(serialize_ini(parse_ini(text)) == text);  // presets are canonical bytes
    const ExperimentConfig cfg = load_experiment_config(text);
    CHECK(cfg.canonical_text == text);
  }
  CHECK(!is_preset("gauss-blur-3d"));
  CHECK_THROWS_AS((void)preset_text("gauss-blur-3d"), std::invalid_argument);
}

TEST_CASE("run ids: seed prefix plus config hash") {
  CHECK(fnv1a64("") == 14695981039346656037ull);  // offset basis of the hash

  const std::string id = run_id(42, preset_text("gauss-blur-1d"));
  REQUIRE(id.size() > 4);
  CHECK(id.substr(0, 4) == "s42-");
  const std::string hex = id.substr(4);
  CHECK(hex.size() == 16);
  for (char c : hex) CHECK(((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f')));

  CHECK(run_id(42, "x") == run_id(42, "x"));
  CHECK(run_id(43, "x") != run_id(42, "x"));
  CHECK(run_id(42, "y").substr(4) != run_id(42, "x").substr(4));
}

TEST_CASE("builders: mean profile, wrapped covariance, dct decoder") {
  const Eigen::VectorXd zero = make_mean_profile(MeanProfile::kZero, 8, 0.5, 3.0);
  CHECK(zero.norm() == 0.0);
  const Eigen::Index n = 24;
  const Eigen::VectorXd sine = make_mean_profile(MeanProfile::kSine, n, 0.5, 3.0);
  for (Eigen::Index i = 0; i < n; ++i)
    CHECK(sine[i] == doctest::Approx(0.5 * std::sin(2.0 * M_PI * 3.0 * i / double(n)))
                         .epsilon(1e-15));

  // a length comparable to n is exactly where the naive circular-distance
  // kernel loses positive semidefiniteness; the wrapped kernel must not
  for (double length : {1.0, 4.0, 12.0}) {
    CAPTURE(length);
    const Eigen::MatrixXd C = make_rbf_covariance(n, 1.0, length, 0.0);
    CHECK((C - C.transpose()).norm() == 0.0);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        CHECK(C(i, j) == C((i + 1) % n, (j + 1) % n));  // circulant
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12 * C(0, 0));
  }
  const Eigen::MatrixXd J = make_rbf_covariance(n, 2.0, 3.0, 0.5);
  CHECK(J(0, 0) == doctest::Approx(2.0 + 0.5 + 2.0 * 2.0 * std::exp(-0.5 * (24.0 / 3.0) * (24.0 / 3.0)))
                       .epsilon(1e-12));  // scale + jitter + first wrap pair

  PriorConfig pc;
  pc.cov = CovModel::kIdentity;
  pc.cov_scale = 0.25;
  pc.mean = MeanProfile::kZero;
  const GaussianPrior prior = build_gaussian_prior(pc, 6);
  CHECK((prior.C - 0.25 * Eigen::MatrixXd::Identity(6, 6)).norm() == 0.0);
  CHECK(prior.mu.norm() == 0.0);

  const LinearAutoencoder ae = make_dct_autoencoder(12, 5);
  CHECK(ae.W.rows() == 12);
  CHECK(ae.W.cols() == 5);
  CHECK((ae.W.transpose() * ae.W - Eigen::MatrixXd::Identity(5, 5)).norm() <= 1e-12);
  CHECK(ae.c.norm() == 0.0);
}

TEST_CASE("solve driver: artifacts, byte determinism, budget, oracle") {
  const ExperimentConfig cfg = load_experiment_config(tiny_config());
  const fs::path out1 = fresh_dir("solve1"), out2 = fresh_dir("solve2");

  SolveOverrides ov;
  ov.outdir = out1.string();
  const auto runs = run_solve(cfg, ov);
  REQUIRE(runs.size() == 2);  // [runs] repeats
  CHECK(runs[0].seed == 7);
  CHECK(runs[1].seed == 8);

  for (const auto& r : runs) {
    CAPTURE(r.seed);
    CHECK(fs::exists(fs::path(r.run_dir) / "summary.json"));
    CHECK(fs::exists(fs::path(r.run_dir) / "levels.csv"));
    CHECK(!fs::exists(fs::path(r.run_dir) / "trace.csv"));  // emit_trace = false
    const Tensor final = read_tensor((fs::path(r.run_dir) / "final.ten").string());
    REQUIRE(final.shape == std::vector<std::int64_t>{16});

    // levels.csv has a header plus one row per level
    std::istringstream csv(slurp(fs::path(r.run_dir) / "levels.csv"));
    std::string line;
    int lines = 0;
    while (std::getline(csv, line)) ++lines;
    CHECK(lines == 1 + cfg.schedule.levels);

    // fd step mode spends one VJP per inner step and never a JVP
    CHECK(r.vjps == cfg.schedule.levels * cfg.correction.admm_iters * cfg.correction.grad_steps);
    CHECK(r.jvps == 0);
    CHECK(r.applies > r.vjps);  // forward passes: probes + objectives + reports

    CHECK(r.has_oracle);  // linear blur + gaussian prior
    CHECK(std::isfinite(r.psnr_truth));
    CHECK(r.psnr_gap_db == doctest::Approx(r.psnr_truth - r.oracle_psnr_truth).epsilon(1e-12));
  }

  // same config, fresh directory, parallel workers: identical bytes
  SolveOverrides ov2;
  ov2.outdir = out2.string();
  ov2.jobs = 2;
  const auto again = run_solve(cfg, ov2);
  REQUIRE(again.size() == runs.size());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (const char* name : {"summary.json", "levels.csv", "final.ten"})
      CHECK(slurp(fs::path(runs[i].run_dir) / name) == slurp(fs::path(again[i].run_dir) / name));
  }

  // seed override renames the run directory and shifts the draw
  SolveOverrides ov3;
  ov3.outdir = out2.string();
  ov3.seed = 99;
  const auto shifted = run_solve(cfg, ov3);
  CHECK(shifted[0].seed == 99);
  CHECK(fs::path(shifted[0].run_dir).filename().string().substr(0, 4) == "s99-");
  CHECK(shifted[0].mse_truth != runs[0].mse_truth);
}

TEST_CASE("ablate driver: full grid, matched budgets, feasible splits") {
  ExperimentConfig cfg = load_experiment_config(tiny_config());
  cfg.runs.repeats = 1;
  SolveOverrides ov;
  ov.outdir = fresh_dir("ablate").string();
  const auto rows = run_ablate(cfg, ov);
  REQUIRE(rows.size() == cfg.ablate.solvers.size() * cfg.ablate.steps.size());

  const int budget = cfg.schedule.levels * cfg.correction.admm_iters * cfg.correction.grad_steps;
  for (const auto& row : rows) {
    CAPTURE(row.solver);
    CAPTURE(row.step);
    CHECK(row.budget_steps == budget);
    CHECK(row.vjps == budget);
    CHECK(row.jvps == (row.step == "star" ? budget : 0));
    CHECK(row.epsilon == doctest::Approx(0.05 * 4.0));  // rms over m = 16
    if (row.solver == "admm") CHECK(row.feasible);
  }

  const std::string csv = ablate_csv(rows);
  std::istringstream ss(csv);
  std::string header;
  std::getline(ss, header);
  CHECK(header.find("solver") == 0);
  int data_lines = 0;
  for (std::string line; std::getline(ss, line);) data_lines += !line.empty();
  CHECK(data_lines == int(rows.size()));
}

TEST_CASE("cli: exit codes, error wording, schedule listing") {
  const fs::path dir = fresh_dir("cli");

  CHECK(run_cli("solve --config identity-exact --outdir " + (dir / "ok").string()) == 0);
  CHECK(run_cli("validate --filter properties.schedule") == 0);
  CHECK(run_cli("validate --filter properties.projection --inject-fault projection") == 1);
  CHECK(run_cli("frobnicate") == 2);                       // unknown subcommand
  CHECK(run_cli("solve --outdir " + dir.string()) == 2);   // missing --config
  CHECK(run_cli("validate --filter no-check-has-this-name") == 2);

  const fs::path err = dir / "missing.txt";
  CHECK(run_cli("solve --config /no/such/exp.ini --outdir " + dir.string(), err) == 2);
  CHECK(slurp(err).find("/no/such/exp.ini") != std::string::npos);

  const fs::path listing = dir / "schedule.txt";
  CHECK(run_cli("schedule --config identity-exact", listing) == 0);
  std::istringstream ss(slurp(listing));
  std::string line;
  int rows = 0;
  bool has_header = false;
  while (std::getline(ss, line)) {
    if (rows == 0) has_header = (line == "level,sigma");
    ++rows;
  }
  CHECK(has_header);
  CHECK(rows == 1 + 50 + 1);  // header + levels + the floor the anneal ends on
}
