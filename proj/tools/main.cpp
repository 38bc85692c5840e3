#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "tsallis/cli.hpp"

namespace {

using tsallis::cli::ConfigOverrides;

template <typename T>
void optional_flag(CLI::App* app, const std::string& name, std::optional<T>& slot, const std::string& help) {
  app->add_option_function<T>(name, [&slot](const T& v) { slot = v; }, help);
}

void solver_flags(CLI::App* app, ConfigOverrides& o, std::optional<std::filesystem::path>& config) {
  app->add_option("--config", config, "JSON config file (flags take precedence)");
  optional_flag(app, "--algo,--algorithm", o.algorithm, "reg-vi, mvi-q, tsallis-vi, mvi, cvi, naive-lnq");
  optional_flag(app, "--q", o.q, "entropic index (> 0, or inf)");
  optional_flag(app, "--tau", o.tau, "regularization temperature");
  optional_flag(app, "--alpha", o.alpha, "Munchausen coefficient in [0, 1]");
  optional_flag(app, "--p", o.p, "Taylor policy parameter");
  optional_flag(app, "--max-iters", o.max_iters, "iteration cap");
  optional_flag(app, "--tol", o.residual_tol, "stop when ||Q_{k+1} - Q_k|| falls below this");
  optional_flag(app, "--m", o.m, "backup applications per policy update");
  optional_flag(app, "--regularizer", o.regularizer, "reg-vi: tsallis-entropy, tsallis-kl, shannon-entropy, kl");
  optional_flag(app, "--munchausen", o.munchausen, "advantage or log-policy");
  optional_flag(app, "--log-floor", o.log_floor, "lower clip for the log-policy bonus");
  optional_flag(app, "--divergence-bound", o.divergence_bound, "largest allowed ||Q|| (0 = automatic)");
  app->add_flag_function("--timing", [&o](std::int64_t) { o.timing = true; }, "record wall_ms per iteration");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tsallis-regularized tabular value iteration"};
  app.require_subcommand(1);

  tsallis::cli::GenEnvArgs gen;
  std::string kind = "chain";
  std::optional<std::size_t> width, height;
  auto* g = app.add_subcommand("gen-env", "write a seeded MDP as JSON");
  g->add_option("--kind", kind, "chain, gridworld, cliff, random")->required();
  g->add_option("--length", gen.spec.length, "chain length")->capture_default_str();
  g->add_option("--width", width, "grid width (default 4; cliff 12)");
  g->add_option("--height", height, "grid height (default 4)");
  g->add_option("--states", gen.spec.n_states, "random: number of states")->capture_default_str();
  g->add_option("--actions", gen.spec.n_actions, "random: number of actions")->capture_default_str();
  g->add_option("--branching", gen.spec.branching, "random: successors per pair")->capture_default_str();
  g->add_option("--noise", gen.spec.noise, "slip probability")->capture_default_str();
  g->add_option("--gamma", gen.spec.gamma, "discount")->capture_default_str();
  g->add_option("--seed", gen.spec.seed, "random: generator seed")->capture_default_str();
  g->add_option("--out", gen.out, "output file (stdout when omitted)");

  tsallis::cli::SolveArgs solve;
  auto* s = app.add_subcommand("solve", "run one solver, write trace.csv and manifest.json");
  s->add_option("--env", solve.env, "MDP JSON file");
  s->add_option("--out-dir", solve.out_dir, "run directory")->capture_default_str();
  solver_flags(s, solve.flags, solve.config);

  tsallis::cli::SweepArgs sweep;
  auto* w = app.add_subcommand("sweep", "one run per q, aggregated into sweep.csv");
  w->add_option("--env", sweep.env, "MDP JSON file");
  w->add_option("--qs", sweep.qs, "comma-separated q values, e.g. 1,2,3,inf")->delimiter(',')->required();
  w->add_option("--jobs", sweep.jobs, "parallel runs (default $TSALLIS_MDP_JOBS or 1)");
  w->add_option("--out-dir", sweep.out_dir, "sweep directory")->capture_default_str();
  solver_flags(w, sweep.flags, sweep.config);

  tsallis::cli::CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "MVI(q) against the naive ln_q substitution");
  c->add_option("--env", cmp.env, "MDP JSON file");
  c->add_option("--out", cmp.out, "CSV file (stdout when omitted)");
  solver_flags(c, cmp.flags, cmp.config);

  tsallis::VerifyOptions ver;
  std::optional<std::string> fault;
  auto* v = app.add_subcommand("verify", "run the property and oracle suite");
  v->add_option("--seed", ver.seed, "seed for random cases")->capture_default_str();
  v->add_option("--cases", ver.cases, "random cases per scalar check")->capture_default_str();
  v->add_option("--inject-fault", fault, "sparsemax-nonstrict: admit boundary actions into the support")
      ->check(CLI::IsMember({"sparsemax-nonstrict"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return tsallis::cli::kInputError;
  }

  if (*g) {
    try {
      gen.spec.kind = tsallis::env_kind_from_string(kind);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return tsallis::cli::kInputError;
    }
    const bool cliff = gen.spec.kind == tsallis::EnvKind::Cliff;
    gen.spec.width = width.value_or(cliff ? 12 : 4);
    gen.spec.height = height.value_or(4);
    return tsallis::cli::cmd_gen_env(gen, std::cout, std::cerr);
  }
  if (*s) return tsallis::cli::cmd_solve(solve, std::cout, std::cerr);
  if (*w) return tsallis::cli::cmd_sweep(sweep, std::cout, std::cerr);
  if (*c) return tsallis::cli::cmd_compare(cmp, std::cout, std::cerr);
  if (fault) ver.fault = tsallis::VerifyFault::SparsemaxNonStrict;
  return tsallis::cli::cmd_verify(ver, std::cout, std::cerr);
}
