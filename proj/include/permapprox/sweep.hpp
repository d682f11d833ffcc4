#pragma once

// Benchmark sweeps over synthetic instances. A sweep is a grid over
// (episodes, attention, clique size, repetitions, dropout); every cell at the
// same (episodes, trial) coordinate reuses the same generated instance and
// the same solver seed, so arm-versus-arm comparisons are paired. Instance
// seeds derive from the master seed via content keys, never from wall time.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "permapprox/io.hpp"
#include "permapprox/model.hpp"
#include "permapprox/solver.hpp"

namespace permapprox {

struct SweepSpec {
  std::vector<int> episodes = {3, 4, 5, 6, 7, 8, 9};
  int trials = 200;
  std::vector<AttentionOrder> attentions = {AttentionOrder::kFirst};
  std::vector<int> clique_sizes = {2, 3};
  std::vector<int> repetitions = {1};
  std::vector<bool> dropout = {true};
  std::uint64_t seed = 0;
  SyntheticSpec synth;  // episodes and seed fields are overwritten per trial
};

// One solver run inside a sweep cell.
struct TrialRecord {
  int episodes = 0;
  AttentionOrder attention = AttentionOrder::kFirst;
  int clique_size = 0;
  int repetitions = 0;
  bool dropout = false;
  int trial = 0;
  bool feasible = false;
  double error = 0.0;
  unsigned long long scored = 0;
  bool gt_survived = false;
};

// Aggregates over the trials of one cell.
struct CellResult {
  int episodes = 0;
  AttentionOrder attention = AttentionOrder::kFirst;
  int clique_size = 0;
  int repetitions = 0;
  bool dropout = false;
  int trials = 0;
  double mean_error = 0.0;
  double std_error = 0.0;  // standard error of the mean
  double mean_scored = 0.0;
  unsigned long long candidates = 0;
  double gt_survival = 0.0;
};

struct SweepResult {
  std::vector<CellResult> cells;
  std::vector<TrialRecord> trials;
};

inline std::string attention_name(AttentionOrder order) {
  return order == AttentionOrder::kFirst ? "first" : "second";
}

// Instance seed for (episodes, trial): shared by every arm so comparisons
// across attention/clique/repetitions/dropout are paired.
inline std::uint64_t sweep_gen_seed(std::uint64_t master, int episodes, int trial) {
  return RngStream(master).child("gen").child(episodes).child(trial).raw_state();
}

inline std::uint64_t sweep_solve_seed(std::uint64_t master, int episodes, int trial) {
  return RngStream(master).child("solve").child(episodes).child(trial).raw_state();
}

inline SweepResult run_sweep(const SweepSpec& spec) {
  if (spec.trials < 1) throw InputError("sweep requires at least one trial");
  SweepResult result;
  for (int t_len : spec.episodes)
    for (AttentionOrder attention : spec.attentions)
      for (int clique : spec.clique_sizes)
        for (int reps : spec.repetitions)
          for (bool drop : spec.dropout) {
            CellResult cell;
            cell.episodes = t_len;
            cell.attention = attention;
            cell.clique_size = clique;
            cell.repetitions = reps;
            cell.dropout = drop;
            cell.trials = spec.trials;
            cell.candidates =
                arrangement_count(spec.synth.n_states, t_len);

            std::vector<double> errors;
            errors.reserve(static_cast<std::size_t>(spec.trials));
            double scored_sum = 0.0;
            int survived = 0;
            for (int trial = 0; trial < spec.trials; ++trial) {
              SyntheticSpec synth = spec.synth;
              synth.episodes = t_len;
              synth.seed = sweep_gen_seed(spec.seed, t_len, trial);
              const Instance inst = generate_instance(synth);

              MlaaConfig config;
              config.attention = attention;
              config.clique_size = clique;
              config.repetitions = reps;
              config.dropout_enabled = drop;
              config.seed = sweep_solve_seed(spec.seed, t_len, trial);
              const SolveResult solved = solve(inst.model, inst.trail, config);

              TrialRecord rec;
              rec.episodes = t_len;
              rec.attention = attention;
              rec.clique_size = clique;
              rec.repetitions = reps;
              rec.dropout = drop;
              rec.trial = trial;
              rec.feasible = solved.feasible;
              rec.error = solved.feasible
                              ? positional_error(solved.best, inst.ground_truth)
                              : 1.0;
              rec.scored = solved.scored_total;

              // Did the true arrangement survive the dropout filter in every
              // repetition? Streams are content-keyed, so rebuilding the
              // predicate here reproduces exactly what the solver used.
              rec.gt_survived = true;
              if (drop)
                for (int r = 0; r < reps && rec.gt_survived; ++r)
                  rec.gt_survived =
                      dropout_function(inst.model, inst.trail, config.dropout_spec,
                                       rep_stream(config.seed, r), t_len,
                                       config.literal_pop)
                          .accepts(inst.ground_truth);

              errors.push_back(rec.error);
              scored_sum += static_cast<double>(rec.scored);
              if (rec.gt_survived) ++survived;
              result.trials.push_back(std::move(rec));
            }

            double mean = 0.0;
            for (double e : errors) mean += e;
            mean /= static_cast<double>(errors.size());
            double var = 0.0;
            for (double e : errors) var += (e - mean) * (e - mean);
            cell.mean_error = mean;
            cell.std_error = errors.size() > 1
                                 ? std::sqrt(var / static_cast<double>(errors.size() - 1)) /
                                       std::sqrt(static_cast<double>(errors.size()))
                                 : 0.0;
            cell.mean_scored = scored_sum / static_cast<double>(spec.trials);
            cell.gt_survival = static_cast<double>(survived) / static_cast<double>(spec.trials);
            result.cells.push_back(cell);
          }
  return result;
}

inline std::string sweep_csv(const std::vector<CellResult>& cells) {
  std::string out =
      "episodes,attention,clique_size,repetitions,dropout,trials,"
      "mean_error,std_error,mean_scored,candidates,gt_survival\n";
  for (const CellResult& c : cells) {
    out += std::to_string(c.episodes);
    out += ',';
    out += attention_name(c.attention);
    out += ',';
    out += std::to_string(c.clique_size);
    out += ',';
    out += std::to_string(c.repetitions);
    out += ',';
    out += c.dropout ? "on" : "off";
    out += ',';
    out += std::to_string(c.trials);
    out += ',';
    out += csv_double(c.mean_error);
    out += ',';
    out += csv_double(c.std_error);
    out += ',';
    out += csv_double(c.mean_scored);
    out += ',';
    out += std::to_string(c.candidates);
    out += ',';
    out += csv_double(c.gt_survival);
    out += '\n';
  }
  return out;
}

}  // namespace permapprox
