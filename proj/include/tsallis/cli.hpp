#pragma once

// Subcommand implementations behind tools/tsallis-mdp. Each returns a process
// exit code; machine-readable output goes to `out`, diagnostics to `err`.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tsallis/envs.hpp"
#include "tsallis/solvers.hpp"
#include "tsallis/verify.hpp"

namespace tsallis::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kInputError = 1;
inline constexpr int kNotConverged = 2;

// Accepts a positive number or "inf"; throws DomainError otherwise.
EntropicIndex parse_q(const std::string& text);
std::string format_q(EntropicIndex q);
MunchausenForm munchausen_from_string(const std::string& name);
std::string to_string(MunchausenForm f);

// Flags given on the command line. Unset fields fall back to the config file,
// then to SolverConfig defaults.
struct ConfigOverrides {
  std::optional<std::string> algorithm;
  std::optional<std::string> q;
  std::optional<double> tau;
  std::optional<double> alpha;
  std::optional<double> p;
  std::optional<int> max_iters;
  std::optional<double> residual_tol;
  std::optional<int> m;
  std::optional<std::string> regularizer;
  std::optional<std::string> munchausen;
  std::optional<double> log_floor;
  std::optional<double> divergence_bound;
  std::optional<bool> timing;
};

struct ResolvedConfig {
  SolverConfig solver;
  std::optional<std::filesystem::path> env;
  // Sweep only: per-q field overrides keyed by the q text ("3", "inf").
  std::map<std::string, ConfigOverrides> per_q;
};

// Reads the optional JSON config file and applies the flags on top. Throws
// ParseError / DomainError naming the offending field.
ResolvedConfig resolve_config(const std::optional<std::filesystem::path>& config_file,
                              const ConfigOverrides& flags);
void apply_overrides(SolverConfig& config, const ConfigOverrides& o);
// JSON object of every SolverConfig field, in declaration order.
std::string config_json(const SolverConfig& config);

// Writes to a sibling temporary file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);

struct GenEnvArgs {
  EnvSpec spec;
  std::optional<std::filesystem::path> out;  // stdout when empty
};
int cmd_gen_env(const GenEnvArgs& args, std::ostream& out, std::ostream& err);

struct SolveArgs {
  std::optional<std::filesystem::path> env;
  std::optional<std::filesystem::path> config;
  ConfigOverrides flags;
  std::filesystem::path out_dir = "run";
};
// Writes out_dir/trace.csv and out_dir/manifest.json.
int cmd_solve(const SolveArgs& args, std::ostream& out, std::ostream& err);

struct SweepArgs {
  std::optional<std::filesystem::path> env;
  std::optional<std::filesystem::path> config;
  ConfigOverrides flags;
  std::vector<std::string> qs;
  std::optional<int> jobs;  // falls back to TSALLIS_MDP_JOBS, then 1
  std::filesystem::path out_dir = "sweep";
};
// One run directory per q under out_dir, then out_dir/sweep.csv with columns
// q,final_value,iterations,converged in the order the q values were given.
int cmd_sweep(const SweepArgs& args, std::ostream& out, std::ostream& err);

struct CompareArgs {
  std::optional<std::filesystem::path> env;
  std::optional<std::filesystem::path> config;
  ConfigOverrides flags;
  std::optional<std::filesystem::path> out;  // stdout when empty
};
// CSV iter,mvi_q_value,naive_value,leader: the exact unregularized value of
// each method's policy per iteration (a run that stopped early repeats its
// last value) and a closing row with iter = final.
int cmd_compare(const CompareArgs& args, std::ostream& out, std::ostream& err);

int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err);

}  // namespace tsallis::cli
