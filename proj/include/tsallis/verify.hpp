#pragma once

// The property and oracle suite behind the `verify` subcommand.

#include <cstdint>
#include <string>
#include <vector>

namespace tsallis {

enum class VerifyFault { None, SparsemaxNonStrict };

struct VerifyOptions {
  std::uint64_t seed = 1;
  // Random cases per scalar check; matrix-sized checks scale from it.
  int cases = 1000;
  VerifyFault fault = VerifyFault::None;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  double worst = 0.0;
  double tolerance = 0.0;
  int cases = 0;
  // Smallest failing input, or the worst input when passing.
  std::string witness;
};

std::vector<CheckResult> run_verify(const VerifyOptions& options);

// One aligned line per check.
std::string format_verify_table(const std::vector<CheckResult>& results);

}  // namespace tsallis
