#pragma once

#include <string>
#include <vector>

namespace fastdips {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct ValidationOptions {
  // substring filter on check names; empty runs everything
  std::string filter;
  // sabotage hook: the projection suite swaps in a branch-flipped projection,
  // proving the suite can actually fail
  bool fault_projection = false;
  // solver binary spawned by the determinism check; empty skips-as-failure
  std::string cli_path;
  // artifact workspace for checks that write files; empty uses the system tmpdir
  std::string scratch_dir;
};

// registered names, properties.* first then acceptance.*
std::vector<std::string> check_names();

std::vector<CheckResult> run_checks(const ValidationOptions& opts);

}  // namespace fastdips
