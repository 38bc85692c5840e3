#include "tsallis/cli.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "tsallis/errors.hpp"
#include "tsallis/hash.hpp"

namespace tsallis::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

ojson json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double number_field(const ojson& j, const std::string& where) {
  if (!j.is_number()) throw ParseError("config field '" + where + "' must be a number");
  return j.get<double>();
}

int int_field(const ojson& j, const std::string& where) {
  if (!j.is_number_integer()) throw ParseError("config field '" + where + "' must be an integer");
  return j.get<int>();
}

std::string string_field(const ojson& j, const std::string& where) {
  if (!j.is_string()) throw ParseError("config field '" + where + "' must be a string");
  return j.get<std::string>();
}

ConfigOverrides overrides_from_json(const ojson& j, const std::string& prefix) {
  if (!j.is_object()) throw ParseError("config '" + (prefix.empty() ? std::string("<root>") : prefix) + "' must be an object");
  ConfigOverrides o;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const std::string where = prefix.empty() ? k : prefix + "." + k;
    const ojson& v = it.value();
    if (k == "algorithm") o.algorithm = string_field(v, where);
    else if (k == "q") o.q = v.is_string() ? v.get<std::string>() : format_double(number_field(v, where));
    else if (k == "tau") o.tau = number_field(v, where);
    else if (k == "alpha") o.alpha = number_field(v, where);
    else if (k == "p") o.p = number_field(v, where);
    else if (k == "max_iters") o.max_iters = int_field(v, where);
    else if (k == "residual_tol") o.residual_tol = number_field(v, where);
    else if (k == "m") o.m = int_field(v, where);
    else if (k == "regularizer") o.regularizer = string_field(v, where);
    else if (k == "munchausen") o.munchausen = string_field(v, where);
    else if (k == "log_floor") o.log_floor = number_field(v, where);
    else if (k == "divergence_bound") o.divergence_bound = number_field(v, where);
    else if (k == "record_timing") {
      if (!v.is_boolean()) throw ParseError("config field '" + where + "' must be a boolean");
      o.timing = v.get<bool>();
    } else if (prefix.empty() && (k == "env" || k == "per_q")) {
      continue;
    } else {
      throw ParseError("unknown config field '" + where + "'");
    }
  }
  return o;
}

TabularMdp load_env(const std::optional<fs::path>& path, std::string& bytes) {
  if (!path) throw PreconditionError("no environment given (use --env or the config field 'env')");
  bytes = read_file(*path);
  try {
    return mdp_from_json(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path->string() + ": " + e.what());
  }
}

struct Outcome {
  bool ok = false;  // false when the run raised an error
  RunStatus status = RunStatus::MaxIterations;
  int iterations = 0;
  double final_residual = std::numeric_limits<double>::quiet_NaN();
  double final_value = std::numeric_limits<double>::quiet_NaN();
  std::string message;
};

std::string manifest_json(const SolverConfig& config, const fs::path& env_path, const std::string& env_hash,
                          const Outcome& o) {
  ojson m;
  m["config"] = ojson::parse(config_json(config));
  m["env"] = {{"path", env_path.string()}, {"git_blob_sha1", env_hash}};
  ojson outcome;
  outcome["status"] = o.ok ? to_string(o.status) : "error";
  outcome["converged"] = o.ok && o.status == RunStatus::Converged;
  outcome["iterations"] = o.iterations;
  outcome["final_residual"] = json_number(o.final_residual);
  outcome["final_value"] = json_number(o.final_value);
  outcome["message"] = o.message;
  m["outcome"] = outcome;
  m["artifacts"] = {{"trace", "trace.csv"}, {"manifest", "manifest.json"}};
  return m.dump(2) + "\n";
}

// Runs one solve and writes its directory. Solver errors are captured in the
// outcome; I/O errors propagate.
Outcome run_into(const TabularMdp& mdp, const fs::path& env_path, const std::string& env_hash,
                 const SolverConfig& config, const fs::path& dir) {
  Outcome o;
  std::string trace = trace_csv(IterationTrace{});
  try {
    const SolverResult r = solve(mdp, config);
    o.ok = true;
    o.status = r.status;
    o.iterations = static_cast<int>(r.trace.size());
    if (!r.trace.records.empty()) o.final_residual = r.trace.records.back().residual;
    o.final_value = initial_state_value(mdp, r.policy);
    o.message = r.message;
    trace = trace_csv(r.trace);
  } catch (const Error& e) {
    o.message = e.what();
  }
  fs::create_directories(dir);
  write_atomic(dir / "trace.csv", trace);
  write_atomic(dir / "manifest.json", manifest_json(config, env_path, env_hash, o));
  return o;
}

int exit_code_for(const Outcome& o) {
  if (!o.ok) return kInputError;
  return o.status == RunStatus::Converged ? kOk : kNotConverged;
}

int resolve_jobs(const std::optional<int>& flag) {
  if (flag) {
    if (*flag < 1) throw DomainError("--jobs must be at least 1");
    return *flag;
  }
  if (const char* env = std::getenv("TSALLIS_MDP_JOBS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1 || v > 4096) {
      throw DomainError(std::string("TSALLIS_MDP_JOBS must be a positive integer, got '") + env + "'");
    }
    return static_cast<int>(v);
  }
  return 1;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
}

}  // namespace

EntropicIndex parse_q(const std::string& text) {
  if (text == "inf" || text == "infinity" || text == "+inf") return EntropicIndex::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw DomainError("q must be a number > 0 or 'inf', got '" + text + "'");
  }
  if (used != text.size()) throw DomainError("q must be a number > 0 or 'inf', got '" + text + "'");
  return EntropicIndex(v);
}

std::string format_q(EntropicIndex q) { return format_double(q.value()); }

MunchausenForm munchausen_from_string(const std::string& name) {
  if (name == "advantage") return MunchausenForm::Advantage;
  if (name == "log-policy") return MunchausenForm::LogPolicy;
  throw DomainError("unknown munchausen form '" + name + "' (advantage, log-policy)");
}

std::string to_string(MunchausenForm f) { return f == MunchausenForm::Advantage ? "advantage" : "log-policy"; }

void apply_overrides(SolverConfig& c, const ConfigOverrides& o) {
  if (o.algorithm) c.algorithm = algorithm_from_string(*o.algorithm);
  if (o.q) c.q = parse_q(*o.q);
  if (o.tau) c.tau = *o.tau;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.p) c.p = *o.p;
  if (o.max_iters) c.max_iters = *o.max_iters;
  if (o.residual_tol) c.residual_tol = *o.residual_tol;
  if (o.m) c.m = *o.m;
  if (o.regularizer) c.regularizer = regularizer_from_string(*o.regularizer);
  if (o.munchausen) c.munchausen = munchausen_from_string(*o.munchausen);
  if (o.log_floor) c.log_floor = *o.log_floor;
  if (o.divergence_bound) c.divergence_bound = *o.divergence_bound;
  if (o.timing) c.record_timing = *o.timing;
}

ResolvedConfig resolve_config(const std::optional<fs::path>& config_file, const ConfigOverrides& flags) {
  ResolvedConfig out;
  if (config_file) {
    const std::string text = read_file(*config_file);
    ojson j;
    try {
      j = ojson::parse(text);
    } catch (const ojson::parse_error& e) {
      throw ParseError(config_file->string() + ": " + e.what());
    }
    apply_overrides(out.solver, overrides_from_json(j, ""));
    if (auto it = j.find("env"); it != j.end()) {
      fs::path env = string_field(*it, "env");
      if (env.is_relative()) env = config_file->parent_path() / env;
      out.env = env;
    }
    if (auto it = j.find("per_q"); it != j.end()) {
      if (!it->is_object()) throw ParseError("config field 'per_q' must be an object");
      for (auto kv = it->begin(); kv != it->end(); ++kv) {
        const std::string key = format_q(parse_q(kv.key()));
        out.per_q[key] = overrides_from_json(kv.value(), "per_q." + kv.key());
      }
    }
  }
  apply_overrides(out.solver, flags);
  out.solver.validate();
  return out;
}

std::string config_json(const SolverConfig& c) {
  ojson j;
  j["algorithm"] = to_string(c.algorithm);
  j["q"] = c.q.is_infinite() ? ojson("inf") : ojson(c.q.value());
  j["tau"] = c.tau;
  j["alpha"] = c.alpha;
  j["p"] = c.p;
  j["max_iters"] = c.max_iters;
  j["residual_tol"] = c.residual_tol;
  j["m"] = c.m;
  j["regularizer"] = to_string(c.regularizer);
  j["munchausen"] = to_string(c.munchausen);
  j["log_floor"] = c.log_floor;
  j["divergence_bound"] = c.divergence_bound;
  j["record_timing"] = c.record_timing;
  return j.dump();
}

void write_atomic(const fs::path& path, const std::string& content) {
  static std::atomic<unsigned long> counter{0};
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(counter++);
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + tmp.string() + " for writing");
    os << content;
    os.flush();
    if (!os) throw Error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

int cmd_gen_env(const GenEnvArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::string text = mdp_to_json(make_env(args.spec));
    if (args.out) {
      if (args.out->has_parent_path()) fs::create_directories(args.out->parent_path());
      write_atomic(*args.out, text);
      err << "wrote " << args.out->string() << " (git blob " << git_blob_sha1(text) << ")\n";
    } else {
      out << text;
    }
    return kOk;
  });
}

int cmd_solve(const SolveArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ResolvedConfig rc = resolve_config(args.config, args.flags);
    const auto env_path = args.env ? args.env : rc.env;
    std::string bytes;
    const TabularMdp mdp = load_env(env_path, bytes);
    const Outcome o = run_into(mdp, *env_path, git_blob_sha1(bytes), rc.solver, args.out_dir);
    out << read_file(args.out_dir / "manifest.json");
    if (!o.ok) {
      err << "error: " << o.message << '\n';
    } else {
      err << to_string(rc.solver.algorithm) << " q=" << format_q(rc.solver.q) << ": " << to_string(o.status)
          << " after " << o.iterations << " iterations, value " << format_double(o.final_value) << '\n';
    }
    return exit_code_for(o);
  });
}

int cmd_sweep(const SweepArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (args.qs.empty()) throw DomainError("empty q list");
    ResolvedConfig rc = resolve_config(args.config, args.flags);
    std::vector<EntropicIndex> qs;
    std::set<std::string> seen;
    for (const std::string& t : args.qs) {
      qs.push_back(parse_q(t));
      if (!seen.insert(format_q(qs.back())).second) throw DomainError("q value " + t + " is listed twice");
    }
    std::vector<SolverConfig> configs;
    for (EntropicIndex q : qs) {
      SolverConfig c = rc.solver;
      c.q = q;
      if (auto it = rc.per_q.find(format_q(q)); it != rc.per_q.end()) apply_overrides(c, it->second);
      c.validate();
      configs.push_back(c);
    }
    for (const auto& [key, unused] : rc.per_q) {
      if (!seen.count(key)) err << "warning: per_q entry " << key << " matches no swept q\n";
    }
    const int jobs = resolve_jobs(args.jobs);
    const auto env_path = args.env ? args.env : rc.env;
    std::string bytes;
    const TabularMdp mdp = load_env(env_path, bytes);
    const std::string hash = git_blob_sha1(bytes);
    fs::create_directories(args.out_dir);

    std::vector<Outcome> outcomes(qs.size());
    std::vector<std::string> failures(qs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < qs.size(); i = next++) {
        try {
          outcomes[i] = run_into(mdp, *env_path, hash, configs[i], args.out_dir / ("q=" + format_q(qs[i])));
        } catch (const std::exception& e) {
          failures[i] = e.what();
        }
      }
    };
    {
      std::vector<std::jthread> pool;
      const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(jobs), qs.size());
      for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    }

    std::string csv = "q,final_value,iterations,converged\n";
    bool all_converged = true;
    for (std::size_t i = 0; i < qs.size(); ++i) {
      const Outcome& o = outcomes[i];
      if (!failures[i].empty()) throw Error("q=" + format_q(qs[i]) + ": " + failures[i]);
      const bool conv = o.ok && o.status == RunStatus::Converged;
      all_converged = all_converged && conv;
      csv += format_q(qs[i]) + "," + format_double(o.final_value) + "," + std::to_string(o.iterations) + "," +
             (conv ? "true" : "false") + "\n";
      if (!o.ok) err << "q=" << format_q(qs[i]) << ": error: " << o.message << '\n';
      else if (!conv) err << "q=" << format_q(qs[i]) << ": " << to_string(o.status) << '\n';
    }
    write_atomic(args.out_dir / "sweep.csv", csv);
    out << csv;
    return all_converged ? kOk : kNotConverged;
  });
}

int cmd_compare(const CompareArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ResolvedConfig rc = resolve_config(args.config, args.flags);
    const auto env_path = args.env ? args.env : rc.env;
    std::string bytes;
    const TabularMdp mdp = load_env(env_path, bytes);
    SolverConfig c = rc.solver;
    c.track_policy_value = true;
    const SolverResult a = run_mvi_q(mdp, c);
    const SolverResult b = run_naive_lnq(mdp, c);

    auto leader = [](double x, double y) -> std::string {
      if (x > y) return "mvi-q";
      if (y > x) return "naive";
      return "tie";
    };
    const std::size_t n = std::max(a.trace.size(), b.trace.size());
    std::string csv = "iter,mvi_q_value,naive_value,leader\n";
    for (std::size_t i = 0; i < n; ++i) {
      const double va = a.trace.records[std::min(i, a.trace.size() - 1)].policy_value;
      const double vb = b.trace.records[std::min(i, b.trace.size() - 1)].policy_value;
      csv += std::to_string(i + 1) + "," + format_double(va) + "," + format_double(vb) + "," + leader(va, vb) + "\n";
    }
    const double fa = initial_state_value(mdp, a.policy);
    const double fb = initial_state_value(mdp, b.policy);
    csv += "final," + format_double(fa) + "," + format_double(fb) + "," + leader(fa, fb) + "\n";
    if (args.out) {
      if (args.out->has_parent_path()) fs::create_directories(args.out->parent_path());
      write_atomic(*args.out, csv);
    } else {
      out << csv;
    }
    err << "q=" << format_q(c.q) << ": mvi-q " << format_double(fa) << " (" << to_string(a.status) << "), naive "
        << format_double(fb) << " (" << to_string(b.status) << "), margin " << format_double(fa - fb) << '\n';
    return a.converged() && b.converged() ? kOk : kNotConverged;
  });
}

int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto results = run_verify(options);
    out << format_verify_table(results);
    int failed = 0;
    for (const auto& r : results) failed += !r.passed;
    err << results.size() - static_cast<std::size_t>(failed) << "/" << results.size() << " checks passed\n";
    return failed == 0 ? kOk : kNotConverged;
  });
}

}  // namespace tsallis::cli
