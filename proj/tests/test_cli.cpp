// End-to-end tests for the command-line front end. Each case shells out to
// the built binary (path injected via PERMAPPROX_CLI_PATH) and checks exit
// codes, stream contents, and byte-level determinism of reruns.
//
// Exit code contract: 0 success, 1 bench card failure, 2 infeasible,
// 3 input error, 4 enumeration cap exceeded.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "permapprox/io.hpp"
#include "permapprox/model.hpp"

using namespace permapprox;

namespace {

const char* kDir = "/tmp/permapprox_cli_test";

struct CliResult {
  int status = -1;
  std::string out;
  std::string err;
};

std::string path_in_dir(const std::string& name) {
  std::filesystem::create_directories(kDir);
  return std::string(kDir) + "/" + name;
}

// Runs `[env] permapprox <args>` through the shell, capturing both streams.
CliResult run_cli(const std::string& args, const std::string& env = "") {
  const std::string out_path = path_in_dir("stdout.txt");
  const std::string err_path = path_in_dir("stderr.txt");
  const std::string cmd = (env.empty() ? "" : env + " ") + PERMAPPROX_CLI_PATH + " " + args +
                          " >" + out_path + " 2>" + err_path;
  const int raw = std::system(cmd.c_str());
  CliResult res;
  res.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  res.out = read_file(out_path);
  res.err = read_file(err_path);
  return res;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

// Two states with private tokens: exactly one arrangement can explain the
// trail, so the solver and the oracle must both return it.
Instance pinned_instance() {
  Instance inst;
  inst.model.states = {"A", "B"};
  inst.model.emissions = {{{"a", 0.9}}, {{"b", 0.9}}};
  inst.model.transitions = {{0.5, 0.5}, {0.5, 0.5}};
  inst.trail.episodes = {{"a"}, {"b"}};
  inst.ground_truth = {0, 1};
  return inst;
}

}  // namespace

TEST_CASE("gen is deterministic and refuses to overwrite without --force") {
  const CliResult first = run_cli("gen --states 5 --episodes 4 --seed 9");
  REQUIRE(first.status == 0);
  CHECK(first.err.empty());
  CHECK(contains(first.out, "\"model\""));
  CHECK(contains(first.out, "\"trail\""));
  CHECK(contains(first.out, "\"ground_truth\""));
  CHECK(first.out.back() == '\n');

  const CliResult again = run_cli("gen --states 5 --episodes 4 --seed 9");
  CHECK(again.out == first.out);

  const std::string out_file = path_in_dir("gen_guard.json");
  std::filesystem::remove(out_file);
  CHECK(run_cli("gen --states 5 --episodes 4 --seed 9 --out " + out_file).status == 0);
  const CliResult clobber = run_cli("gen --states 5 --episodes 4 --seed 9 --out " + out_file);
  CHECK(clobber.status == 3);
  CHECK(contains(clobber.err, "already exists, pass --force to overwrite"));
  CHECK(run_cli("gen --states 5 --episodes 4 --seed 9 --out " + out_file + " --force").status ==
        0);
  CHECK(read_file(out_file) == first.out);
}

TEST_CASE("omitting --seed draws an entropy seed and echoes it to stderr") {
  const CliResult res = run_cli("gen --states 4 --episodes 3");
  REQUIRE(res.status == 0);
  CHECK(contains(res.err, "seed: "));
  CHECK(contains(res.out, "\"model\""));
}

TEST_CASE("solve and oracle agree on a pinned bundle and reruns are byte-identical") {
  const std::string bundle = path_in_dir("pinned.json");
  write_file(bundle, bundle_to_json(pinned_instance()));

  const CliResult solved = run_cli("solve " + bundle + " --seed 11");
  REQUIRE(solved.status == 0);
  CHECK(contains(solved.out, "\"feasible\":true"));
  CHECK(contains(solved.out, "\"best\":[\"A\",\"B\"]"));
  CHECK(contains(solved.out, "\"positional_error\":0"));

  const CliResult oracle = run_cli("oracle " + bundle);
  REQUIRE(oracle.status == 0);
  CHECK(contains(oracle.out, "\"feasible\":true"));
  CHECK(contains(oracle.out, "\"best\":[\"A\",\"B\"]"));

  CHECK(run_cli("solve " + bundle + " --seed 11").out == solved.out);
}

TEST_CASE("solver output is invariant to the thread cap") {
  const std::string bundle = path_in_dir("threads.json");
  std::filesystem::remove(bundle);
  REQUIRE(run_cli("gen --states 6 --episodes 5 --seed 21 --out " + bundle).status == 0);

  const CliResult serial =
      run_cli("solve " + bundle + " --seed 13 --reps 2", "PERMAPPROX_THREADS=1");
  const CliResult parallel =
      run_cli("solve " + bundle + " --seed 13 --reps 2", "PERMAPPROX_THREADS=4");
  REQUIRE(serial.status == 0);
  CHECK(serial.out == parallel.out);
}

TEST_CASE("an unexplainable trail exits 2 from both solve and oracle") {
  Instance inst = pinned_instance();
  inst.trail.episodes = {{"zz"}, {"a"}};
  inst.ground_truth.clear();
  const std::string bundle = path_in_dir("infeasible.json");
  write_file(bundle, bundle_to_json(inst));

  const CliResult solved = run_cli("solve " + bundle + " --seed 1");
  CHECK(solved.status == 2);
  CHECK(contains(solved.out, "\"feasible\":false"));

  const CliResult oracle = run_cli("oracle " + bundle);
  CHECK(oracle.status == 2);
  CHECK(contains(oracle.out, "\"feasible\":false"));
}

TEST_CASE("malformed json exits 3 and reports the byte position") {
  const std::string bad = path_in_dir("bad.json");
  write_file(bad, "{\"model\": nope");
  const CliResult res = run_cli("solve " + bad + " --seed 1");
  CHECK(res.status == 3);
  CHECK(contains(res.err, "error: "));
  CHECK(contains(res.err, "parse error at byte"));
}

TEST_CASE("blowing the enumeration cap exits 4") {
  const std::string bundle = path_in_dir("big.json");
  std::filesystem::remove(bundle);
  REQUIRE(run_cli("gen --states 13 --episodes 13 --seed 1 --out " + bundle).status == 0);
  const CliResult res = run_cli("oracle " + bundle);
  CHECK(res.status == 4);
  CHECK(contains(res.err, "error: "));
}

TEST_CASE("sweep prints the frozen csv header and one row per cell") {
  const CliResult res = run_cli("sweep --episodes 3 --trials 2 --clique-size 3 --seed 4");
  REQUIRE(res.status == 0);
  CHECK(res.out.rfind("episodes,attention,clique_size,repetitions,dropout,trials,"
                      "mean_error,std_error,mean_scored,candidates,gt_survival\n",
                      0) == 0);
  CHECK(contains(res.out, "\n3,first,3,1,on,2,"));

  const CliResult both =
      run_cli("sweep --episodes 3 --trials 2 --clique-size 3 --dropout both --seed 4");
  REQUIRE(both.status == 0);
  CHECK(contains(both.out, "\n3,first,3,1,on,2,"));
  CHECK(contains(both.out, "\n3,first,3,1,off,2,"));
}

TEST_CASE("tsp reports oracle factors and reruns are byte-identical") {
  const std::string costs = path_in_dir("points.json");
  write_file(costs, "{\"points\":[[0,0],[0,1],[1,0],[1,1],[3,3]]}\n");

  const CliResult res = run_cli("tsp " + costs + " --reps 20 --seed 2 --two-local --oracle");
  REQUIRE(res.status == 0);
  CHECK(contains(res.out, "\"tour\""));
  CHECK(contains(res.out, "\"length\""));
  CHECK(contains(res.out, "\"optimal_length\""));
  CHECK(contains(res.out, "\"approx_factor\""));

  CHECK(run_cli("tsp " + costs + " --reps 20 --seed 2 --two-local --oracle").out == res.out);
}

TEST_CASE("tsp-sweep emits one row per instance and checkpoint") {
  const CliResult res = run_cli("tsp-sweep --cities 5 --instances 2 --reps 5,10 --seed 6");
  REQUIRE(res.status == 0);
  CHECK(res.out.rfind("instance,reps,length,optimal,factor\n", 0) == 0);
  CHECK(contains(res.out, "\n0,5,"));
  CHECK(contains(res.out, "\n0,10,"));
  CHECK(contains(res.out, "\n1,5,"));
  CHECK(contains(res.out, "\n1,10,"));
}

TEST_CASE("bench list names every card and bench run writes evidence") {
  const CliResult list = run_cli("bench list");
  REQUIRE(list.status == 0);
  for (const char* name :
       {"oracle-agreement", "tpp-trend-first-order", "tpp-majority-dominance",
        "tpp-clique-attention-robustness", "tpp-dropout-speedup", "tsp-reps", "tsp-two-local",
        "determinism", "log-fidelity"})
    CHECK(contains(list.out, name));

  const std::string evidence_dir = path_in_dir("bench-out");
  std::filesystem::remove_all(evidence_dir);
  const CliResult run =
      run_cli("bench run log-fidelity --seed 7 --out-dir " + evidence_dir);
  REQUIRE(run.status == 0);
  CHECK(run.out.rfind("PASS log-fidelity:", 0) == 0);
  CHECK(contains(run.out, "evidence: " + evidence_dir + "/log-fidelity-seed7.csv"));
  CHECK(std::filesystem::exists(evidence_dir + "/log-fidelity-seed7.csv"));

  CHECK(run_cli("bench run").status == 3);
  const CliResult unknown = run_cli("bench run no-such-card");
  CHECK(unknown.status == 3);
  CHECK(contains(unknown.err, "unknown bench card"));
}

TEST_CASE("bad flags exit 3 and --help exits 0") {
  CHECK(run_cli("gen --bogus 1").status == 3);
  CHECK(run_cli("").status == 3);
  CHECK(run_cli("solve").status == 3);
  CHECK(run_cli("sweep --attention sideways --seed 1").status == 3);

  const CliResult help = run_cli("--help");
  CHECK(help.status == 0);
  CHECK(contains(help.out, "gen"));
  CHECK(contains(help.out, "solve"));
  CHECK(contains(help.out, "tsp"));
}
