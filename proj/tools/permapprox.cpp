// Command-line front end for the permutation search toolkit.
//
// Exit codes: 0 success, 1 benchmark card failure, 2 search infeasible,
// 3 input error (bad JSON, bad flags, bad model), 4 enumeration cap exceeded.
// When --seed is omitted an entropy seed is drawn and echoed to stderr as
// "seed: N" so any run can be reproduced.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include <permapprox/permapprox.hpp>

namespace {

using namespace permapprox;

int g_exit = 0;

std::uint64_t resolve_seed(const std::uint64_t* flag) {
  if (flag) return *flag;
  std::random_device rd;
  const std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  std::fprintf(stderr, "seed: %llu\n", static_cast<unsigned long long>(seed));
  return seed;
}

void emit(const std::string& content, const std::string& out, bool force) {
  if (out.empty()) {
    std::fputs(content.c_str(), stdout);
    return;
  }
  if (!force && file_exists(out))
    throw InputError(out + ": already exists, pass --force to overwrite");
  write_file(out, content);
}

AttentionOrder parse_attention(const std::string& name) {
  if (name == "first") return AttentionOrder::kFirst;
  if (name == "second") return AttentionOrder::kSecond;
  throw InputError("unknown attention order '" + name + "' (expected first or second)");
}

bool parse_dropout(const std::string& name) {
  if (name == "on") return true;
  if (name == "off") return false;
  throw InputError("unknown dropout setting '" + name + "' (expected on or off)");
}

struct SolverFlags {
  int draws = 5;
  double thresh_rollout = 1e-3;
  double thresh_transition = 1e-3;
  int clique_size = 3;
  std::string attention = "first";
  int reps = 1;
  std::string dropout = "on";
  bool literal_pop = false;
  bool soft_transitions = false;
  double rv_thresh = 2.0;
  bool rv_literal_z = false;
  int energy_samples = 64;
};

void add_solver_flags(CLI::App* cmd, SolverFlags& f) {
  cmd->add_option("--draws", f.draws, "Activation draws per kernel call");
  cmd->add_option("--thresh-rollout", f.thresh_rollout, "Rollout activation threshold");
  cmd->add_option("--thresh-transition", f.thresh_transition, "Transition activation threshold");
  cmd->add_option("--clique-size", f.clique_size, "Pseudo-state clique size");
  cmd->add_option("--attention", f.attention, "Attention order: first or second");
  cmd->add_option("--reps", f.reps, "Search repetitions (majority vote when > 1)");
  cmd->add_option("--dropout", f.dropout, "Dropout arrangement filter: on or off");
  cmd->add_flag("--literal-pop", f.literal_pop, "Pop the weakest ranked state before selection");
  cmd->add_flag("--soft-transitions", f.soft_transitions,
                "Keep threshold-clamped transition activations instead of pruning");
  cmd->add_option("--rv-thresh", f.rv_thresh, "Real-valued z-score clamp threshold");
  cmd->add_flag("--rv-literal-z", f.rv_literal_z, "Use the clamped z-score itself as heuristic");
  cmd->add_option("--energy-samples", f.energy_samples,
                  "Samples drawn per Gaussian for energy distances");
}

MlaaConfig make_config(const SolverFlags& f, std::uint64_t seed) {
  MlaaConfig config;
  config.clique_size = f.clique_size;
  config.attention = parse_attention(f.attention);
  config.repetitions = f.reps;
  config.dropout_enabled = parse_dropout(f.dropout);
  config.rollout_spec.draws = f.draws;
  config.rollout_spec.thresh = f.thresh_rollout;
  config.transition_spec.draws = f.draws;
  config.transition_spec.thresh = f.thresh_transition;
  config.dropout_spec.draws = f.draws;
  config.literal_pop = f.literal_pop;
  config.soft_transitions = f.soft_transitions;
  config.rv_thresh = f.rv_thresh;
  config.rv_literal_z = f.rv_literal_z;
  config.energy_samples = f.energy_samples;
  config.seed = seed;
  return config;
}

void require_valid_model(const TppModel& model) {
  const auto violations = validate_model(model);
  if (!violations.empty()) throw InputError("invalid model: " + violations.front());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized permutation search for observation trails, plus a TSP heuristic"};
  app.require_subcommand(1);

  // --- gen ---
  auto* gen = app.add_subcommand("gen", "Generate a synthetic instance bundle");
  SyntheticSpec synth;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  bool gen_force = false;
  gen->add_option("--states", synth.n_states, "Number of model states");
  gen->add_option("--episodes", synth.episodes, "Trail length (episodes)");
  gen->add_option("--vocab", synth.vocab_size, "Token vocabulary size");
  gen->add_option("--max-tokens", synth.max_tokens_per_state, "Max tokens per state");
  gen->add_option("--p-lo", synth.p_lo, "Emission probability lower bound");
  gen->add_option("--p-hi", synth.p_hi, "Emission probability upper bound");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output path (default stdout)");
  gen->add_flag("--force", gen_force, "Overwrite an existing output file");
  gen->callback([&] {
    synth.seed = resolve_seed(gen->count("--seed") ? &gen_seed : nullptr);
    emit(bundle_to_json(generate_instance(synth)), gen_out, gen_force);
  });

  // --- solve ---
  auto* solve_cmd = app.add_subcommand("solve", "Run the randomized search on a bundle");
  std::string solve_input;
  SolverFlags solve_flags;
  std::uint64_t solve_seed = 0;
  std::string solve_out;
  bool solve_force = false;
  solve_cmd->add_option("bundle", solve_input, "Instance bundle JSON")->required();
  add_solver_flags(solve_cmd, solve_flags);
  solve_cmd->add_option("--seed", solve_seed, "Search seed");
  solve_cmd->add_option("--out", solve_out, "Output path (default stdout)");
  solve_cmd->add_flag("--force", solve_force, "Overwrite an existing output file");
  solve_cmd->callback([&] {
    const Bundle bundle = load_bundle(solve_input);
    const MlaaConfig config = make_config(
        solve_flags, resolve_seed(solve_cmd->count("--seed") ? &solve_seed : nullptr));
    SolveResult result;
    const std::vector<std::string>* states = nullptr;
    if (bundle.real_model) {
      const auto violations = validate_real_model(*bundle.real_model);
      if (!violations.empty()) throw InputError("invalid model: " + violations.front());
      result = solve_real_valued(*bundle.real_model, bundle.trail, config);
      states = &bundle.real_model->states;
    } else if (bundle.model) {
      require_valid_model(*bundle.model);
      result = solve(*bundle.model, bundle.trail, config);
      states = &bundle.model->states;
    } else {
      throw InputError(solve_input + ": bundle contains no model");
    }
    std::string json = solve_result_to_json(result, *states);
    if (!bundle.ground_truth.empty() && result.feasible) {
      const double err = positional_error(result.best, bundle.ground_truth);
      json.erase(json.find_last_of('}'));
      json += ",\"positional_error\":" + json_number(err) + "}\n";
    }
    emit(json, solve_out, solve_force);
    if (!result.feasible) g_exit = 2;
  });

  // --- oracle ---
  auto* oracle_cmd = app.add_subcommand("oracle", "Exhaustive exact MAP search on a bundle");
  std::string oracle_input;
  bool oracle_full = false;
  std::string oracle_out;
  bool oracle_force = false;
  oracle_cmd->add_option("bundle", oracle_input, "Instance bundle JSON")->required();
  oracle_cmd->add_flag("--full-bernoulli", oracle_full,
                       "Score unobserved tokens with their (1-p) factors");
  oracle_cmd->add_option("--out", oracle_out, "Output path (default stdout)");
  oracle_cmd->add_flag("--force", oracle_force, "Overwrite an existing output file");
  oracle_cmd->callback([&] {
    const Bundle bundle = load_bundle(oracle_input);
    if (!bundle.model) throw InputError(oracle_input + ": oracle requires a discrete model");
    require_valid_model(*bundle.model);
    const OracleResult result = exact_map_oracle(*bundle.model, bundle.trail, oracle_full);
    emit(oracle_result_to_json(result, bundle.model->states), oracle_out, oracle_force);
    if (!result.feasible) g_exit = 2;
  });

  // --- sweep ---
  auto* sweep_cmd = app.add_subcommand("sweep", "Paired benchmark sweep over synthetic instances");
  SweepSpec sweep_spec;
  std::vector<std::string> sweep_attention = {"first"};
  std::string sweep_dropout = "on";
  std::uint64_t sweep_seed = 0;
  std::string sweep_out;
  bool sweep_force = false;
  sweep_cmd->add_option("--episodes", sweep_spec.episodes, "Trail lengths to sweep")
      ->delimiter(',');
  sweep_cmd->add_option("--trials", sweep_spec.trials, "Trials per cell");
  sweep_cmd->add_option("--attention", sweep_attention, "Attention orders (first,second)")
      ->delimiter(',');
  sweep_cmd->add_option("--clique-size", sweep_spec.clique_sizes, "Clique sizes")->delimiter(',');
  sweep_cmd->add_option("--reps", sweep_spec.repetitions, "Repetition counts")->delimiter(',');
  sweep_cmd->add_option("--dropout", sweep_dropout, "Dropout arms: on, off or both");
  sweep_cmd->add_option("--states", sweep_spec.synth.n_states, "Synthetic state count");
  sweep_cmd->add_option("--vocab", sweep_spec.synth.vocab_size, "Synthetic vocabulary size");
  sweep_cmd->add_option("--max-tokens", sweep_spec.synth.max_tokens_per_state,
                        "Max tokens per synthetic state");
  sweep_cmd->add_option("--seed", sweep_seed, "Master sweep seed");
  sweep_cmd->add_option("--out", sweep_out, "Output CSV path (default stdout)");
  sweep_cmd->add_flag("--force", sweep_force, "Overwrite an existing output file");
  sweep_cmd->callback([&] {
    sweep_spec.seed = resolve_seed(sweep_cmd->count("--seed") ? &sweep_seed : nullptr);
    sweep_spec.attentions.clear();
    for (const std::string& name : sweep_attention)
      sweep_spec.attentions.push_back(parse_attention(name));
    if (sweep_dropout == "both")
      sweep_spec.dropout = {true, false};
    else
      sweep_spec.dropout = {parse_dropout(sweep_dropout)};
    emit(sweep_csv(run_sweep(sweep_spec).cells), sweep_out, sweep_force);
  });

  // --- tsp ---
  auto* tsp_cmd = app.add_subcommand("tsp", "Randomized partition search on a cost matrix");
  std::string tsp_input;
  int tsp_subset = 3;
  int tsp_reps = 100;
  std::uint64_t tsp_seed = 0;
  bool tsp_literal = false;
  bool tsp_two_local = false;
  bool tsp_oracle = false;
  std::string tsp_out;
  bool tsp_force = false;
  tsp_cmd->add_option("costs", tsp_input, "Cost matrix JSON ({n, costs} or {points})")
      ->required();
  tsp_cmd->add_option("--subset-size", tsp_subset, "Partition subset size");
  tsp_cmd->add_option("--reps", tsp_reps, "Search repetitions");
  tsp_cmd->add_option("--seed", tsp_seed, "Search seed");
  tsp_cmd->add_flag("--literal-ratio", tsp_literal,
                    "Use the raw cost ratio instead of its reciprocal");
  tsp_cmd->add_flag("--two-local", tsp_two_local, "Polish the best tour with 2-local moves");
  tsp_cmd->add_flag("--oracle", tsp_oracle, "Compare against Held-Karp (N <= 16)");
  tsp_cmd->add_option("--out", tsp_out, "Output path (default stdout)");
  tsp_cmd->add_flag("--force", tsp_force, "Overwrite an existing output file");
  tsp_cmd->callback([&] {
    const CostMatrix cost = load_costs(tsp_input);
    const std::uint64_t seed = resolve_seed(tsp_cmd->count("--seed") ? &tsp_seed : nullptr);
    PartitionSearchResult search = partition_search(cost, tsp_subset, tsp_reps, seed, tsp_literal);
    if (tsp_two_local) {
      search.best = two_local_improve(cost, search.best, 100, tsp_literal);
      search.length = tour_length(cost, search.best);
    }
    std::optional<double> optimal;
    std::optional<double> factor;
    if (tsp_oracle) {
      const HeldKarpResult hk = held_karp_oracle(cost);
      optimal = hk.length;
      factor = search.length / hk.length;
    }
    emit(tsp_result_to_json(search.best, search.length, optimal, factor), tsp_out, tsp_force);
  });

  // --- tsp-sweep ---
  auto* tspsweep_cmd =
      app.add_subcommand("tsp-sweep", "Approximation factor versus repetitions on random cities");
  int ts_cities = 9;
  int ts_instances = 20;
  std::vector<int> ts_reps = {10, 100, 1000};
  int ts_subset = 3;
  std::uint64_t ts_seed = 0;
  bool ts_literal = false;
  std::string ts_out;
  bool ts_force = false;
  tspsweep_cmd->add_option("--cities", ts_cities, "Cities per instance (<= 16 for the oracle)");
  tspsweep_cmd->add_option("--instances", ts_instances, "Random instances");
  tspsweep_cmd->add_option("--reps", ts_reps, "Repetition checkpoints")->delimiter(',');
  tspsweep_cmd->add_option("--subset-size", ts_subset, "Partition subset size");
  tspsweep_cmd->add_option("--seed", ts_seed, "Master seed");
  tspsweep_cmd->add_flag("--literal-ratio", ts_literal,
                         "Use the raw cost ratio instead of its reciprocal");
  tspsweep_cmd->add_option("--out", ts_out, "Output CSV path (default stdout)");
  tspsweep_cmd->add_flag("--force", ts_force, "Overwrite an existing output file");
  tspsweep_cmd->callback([&] {
    if (ts_instances < 1) throw InputError("tsp-sweep requires at least one instance");
    if (ts_reps.empty()) throw InputError("tsp-sweep requires at least one checkpoint");
    std::vector<int> checkpoints = ts_reps;
    std::sort(checkpoints.begin(), checkpoints.end());
    const std::uint64_t master =
        resolve_seed(tspsweep_cmd->count("--seed") ? &ts_seed : nullptr);
    std::string csv = "instance,reps,length,optimal,factor\n";
    for (int i = 0; i < ts_instances; ++i) {
      const RngStream inst_stream = RngStream(master).child("tsp-sweep").child(i);
      const CostMatrix cost =
          euclidean_costs(random_points(ts_cities, inst_stream.child("points")));
      const HeldKarpResult hk = held_karp_oracle(cost);
      std::vector<double> at(checkpoints.size(), 0.0);
      partition_search(cost, ts_subset, checkpoints.back(),
                       inst_stream.child("search").raw_state(), ts_literal,
                       [&](int rep, const Tour&, double len) {
                         for (std::size_t k = 0; k < checkpoints.size(); ++k)
                           if (rep == checkpoints[k] - 1) at[k] = len;
                       });
      for (std::size_t k = 0; k < checkpoints.size(); ++k)
        csv += std::to_string(i) + "," + std::to_string(checkpoints[k]) + "," +
               csv_double(at[k]) + "," + csv_double(hk.length) + "," +
               csv_double(at[k] / hk.length) + "\n";
    }
    emit(csv, ts_out, ts_force);
  });

  // --- bench ---
  auto* bench_cmd = app.add_subcommand("bench", "Experiment cards with pass/fail predicates");
  auto* bench_list = bench_cmd->add_subcommand("list", "List available cards");
  bench_list->callback([&] {
    for (const ExperimentCard& card : bench_cards())
      std::printf("%-32s %s\n", card.name.c_str(), card.description.c_str());
  });
  auto* bench_run = bench_cmd->add_subcommand("run", "Run one card or all of them");
  std::string bench_name;
  bool bench_all = false;
  BenchContext bench_ctx;
  bench_run->add_option("name", bench_name, "Card name (see bench list)");
  bench_run->add_flag("--all", bench_all, "Run every card");
  bench_run->add_option("--seed", bench_ctx.seed, "Benchmark seed");
  bench_run->add_option("--out-dir", bench_ctx.out_dir, "Evidence output directory");
  bench_run->callback([&] {
    std::vector<const ExperimentCard*> selected;
    if (bench_all) {
      for (const ExperimentCard& card : bench_cards()) selected.push_back(&card);
    } else {
      if (bench_name.empty())
        throw InputError("bench run needs a card name or --all");
      const ExperimentCard* card = find_bench_card(bench_name);
      if (!card) throw InputError("unknown bench card '" + bench_name + "'");
      selected.push_back(card);
    }
    bool all_pass = true;
    for (const ExperimentCard* card : selected) {
      const CardResult result = run_bench_card(*card, bench_ctx);
      std::printf("%s %s: %s\n", result.pass ? "PASS" : "FAIL", result.name.c_str(),
                  result.detail.c_str());
      for (const std::string& path : result.evidence)
        std::printf("  evidence: %s\n", path.c_str());
      std::fflush(stdout);
      if (!result.pass) all_pass = false;
    }
    if (!all_pass) g_exit = 1;
  });
  bench_cmd->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  } catch (const CapExceededError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return g_exit;
}
