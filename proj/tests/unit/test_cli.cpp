#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tsallis/cli.hpp"
#include "tsallis/errors.hpp"
#include "tsallis/hash.hpp"

using namespace tsallis;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("tsallis_cli_" + std::to_string(std::rand()) + "_" +
                                        std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_chain(const TempDir& dir) {
  cli::GenEnvArgs g;
  g.spec.kind = EnvKind::Chain;
  g.spec.length = 5;
  g.spec.noise = 0.1;
  g.out = dir.path / "chain.json";
  std::ostringstream out, err;
  REQUIRE(cli::cmd_gen_env(g, out, err) == cli::kOk);
  return *g.out;
}

}  // namespace

TEST_CASE("git blob hash matches git's ids") {
  CHECK(git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("q parsing") {
  CHECK(cli::parse_q("inf").is_infinite());
  CHECK(cli::parse_q("2").value() == 2.0);
  CHECK(cli::format_q(EntropicIndex::infinity()) == "inf");
  CHECK(cli::format_q(EntropicIndex(1.5)) == "1.5");
  CHECK_THROWS_AS(cli::parse_q("0"), DomainError);
  CHECK_THROWS_AS(cli::parse_q("two"), DomainError);
  CHECK_THROWS_AS(cli::parse_q("2x"), DomainError);
}

TEST_CASE("gen-env to stdout matches the file") {
  TempDir d;
  const auto path = write_chain(d);
  cli::GenEnvArgs g;
  g.spec.kind = EnvKind::Chain;
  g.spec.length = 5;
  g.spec.noise = 0.1;
  std::ostringstream out, err;
  CHECK(cli::cmd_gen_env(g, out, err) == cli::kOk);
  CHECK(out.str() == slurp(path));
}

TEST_CASE("config precedence: flags over file over defaults") {
  TempDir d;
  const auto cfg = d.path / "cfg.json";
  std::ofstream(cfg) << R"({"q": "inf", "tau": 0.3, "alpha": 0.5, "env": "chain.json"})";
  cli::ConfigOverrides flags;
  flags.tau = 0.7;
  auto rc = cli::resolve_config(cfg, flags);
  CHECK(rc.solver.q.is_infinite());
  CHECK(rc.solver.tau == 0.7);
  CHECK(rc.solver.alpha == 0.5);
  CHECK(rc.solver.max_iters == SolverConfig{}.max_iters);
  CHECK(*rc.env == d.path / "chain.json");

  std::ofstream(cfg) << R"({"tua": 0.3})";
  try {
    cli::resolve_config(cfg, {});
    FAIL("expected an error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("tua") != std::string::npos);
  }
  std::ofstream(cfg, std::ios::trunc) << R"({"max_iters": "many"})";
  CHECK_THROWS_AS(cli::resolve_config(cfg, {}), ParseError);
}

TEST_CASE("solve writes trace and manifest, exit codes") {
  TempDir d;
  const auto env = write_chain(d);
  cli::SolveArgs a;
  a.env = env;
  a.flags.q = "2";
  a.flags.tau = 0.1;
  a.out_dir = d.path / "run";
  std::ostringstream out, err;
  CHECK(cli::cmd_solve(a, out, err) == cli::kOk);
  auto m = nlohmann::json::parse(slurp(a.out_dir / "manifest.json"));
  CHECK(m["outcome"]["converged"] == true);
  CHECK(m["env"]["git_blob_sha1"] == git_blob_sha1(slurp(env)));
  CHECK(m["config"]["tau"] == 0.1);
  const std::string trace = slurp(a.out_dir / "trace.csv");
  CHECK(trace.rfind("iter,residual,q_change,policy_tv,entropy,tkl,wall_ms\n", 0) == 0);

  // Same inputs, same bytes.
  std::ostringstream out2, err2;
  CHECK(cli::cmd_solve(a, out2, err2) == cli::kOk);
  CHECK(slurp(a.out_dir / "trace.csv") == trace);

  a.flags.max_iters = 3;
  std::ostringstream o3, e3;
  CHECK(cli::cmd_solve(a, o3, e3) == cli::kNotConverged);

  a.flags.q = "0";
  std::ostringstream o4, e4;
  CHECK(cli::cmd_solve(a, o4, e4) == cli::kInputError);
  CHECK(e4.str().find("q > 0") != std::string::npos);

  cli::SolveArgs missing;
  std::ostringstream o5, e5;
  CHECK(cli::cmd_solve(missing, o5, e5) == cli::kInputError);
  CHECK(e5.str().find("--env") != std::string::npos);
}

TEST_CASE("sweep is identical across job counts") {
  TempDir d;
  const auto env = write_chain(d);
  cli::SweepArgs s;
  s.env = env;
  s.flags.tau = 0.1;
  s.qs = {"1", "2", "3", "inf"};
  std::string first;
  for (int jobs : {1, 2, 4}) {
    s.jobs = jobs;
    s.out_dir = d.path / ("sweep" + std::to_string(jobs));
    std::ostringstream out, err;
    CHECK(cli::cmd_sweep(s, out, err) == cli::kOk);
    const std::string csv = slurp(s.out_dir / "sweep.csv");
    if (first.empty()) first = csv;
    CHECK(csv == first);
    CHECK(fs::exists(s.out_dir / "q=inf" / "manifest.json"));
  }
  CHECK(first.rfind("q,final_value,iterations,converged\n1,", 0) == 0);

  s.qs = {};
  std::ostringstream out, err;
  CHECK(cli::cmd_sweep(s, out, err) == cli::kInputError);
  s.qs = {"2", "2.0"};
  CHECK(cli::cmd_sweep(s, out, err) == cli::kInputError);
}

TEST_CASE("sweep rows record failures and continue") {
  TempDir d;
  const auto env = write_chain(d);
  cli::SweepArgs s;
  s.env = env;
  s.flags.algorithm = "naive-lnq";
  s.qs = {"2", "inf"};
  s.jobs = 1;
  s.out_dir = d.path / "sw";
  std::ostringstream out, err;
  CHECK(cli::cmd_sweep(s, out, err) == cli::kNotConverged);
  CHECK(out.str().find("inf,nan,0,false") != std::string::npos);
  CHECK(err.str().find("q=inf") != std::string::npos);
}

TEST_CASE("per-q overrides from the config file") {
  TempDir d;
  const auto env = write_chain(d);
  const auto cfg = d.path / "cfg.json";
  std::ofstream(cfg) << R"({"tau": 0.1, "per_q": {"3": {"max_iters": 2}}})";
  cli::SweepArgs s;
  s.env = env;
  s.config = cfg;
  s.qs = {"2", "3"};
  s.out_dir = d.path / "sw";
  std::ostringstream out, err;
  CHECK(cli::cmd_sweep(s, out, err) == cli::kNotConverged);
  CHECK(out.str().find("3,") != std::string::npos);
  CHECK(out.str().find(",2,false") != std::string::npos);
}

TEST_CASE("compare at q = 1 gives identical traces") {
  TempDir d;
  const auto env = write_chain(d);
  cli::CompareArgs c;
  c.env = env;
  c.flags.q = "1";
  c.flags.tau = 0.1;
  std::ostringstream out, err;
  CHECK(cli::cmd_compare(c, out, err) == cli::kOk);
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "iter,mvi_q_value,naive_value,leader");
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    CHECK(line.substr(line.rfind(',') + 1) == "tie");
  }
  CHECK(rows > 1);
}

TEST_CASE("verify passes and the injected fault is named") {
  VerifyOptions o;
  o.cases = 100;
  std::ostringstream out, err;
  CHECK(cli::cmd_verify(o, out, err) == cli::kOk);
  o.fault = VerifyFault::SparsemaxNonStrict;
  std::ostringstream out2, err2;
  CHECK(cli::cmd_verify(o, out2, err2) != cli::kOk);
  CHECK(out2.str().find("FAIL  sparsemax closed form = support enumeration") != std::string::npos);
  CHECK(out2.str().find("row=[3,1,0]") != std::string::npos);
}
