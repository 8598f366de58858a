#pragma once

// End-to-end workflow: datasets, constructor training, initial solutions,
// perturbator training over a pool of (instance, solution) pairs, evaluation
// against reference costs, and the memory/runtime benchmark of the two
// gradient strategies.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdcp/complexity.hpp"
#include "cdcp/constructor.hpp"
#include "cdcp/perturbator.hpp"

namespace cdcp::pipeline {

struct TrainConfig {
  std::string profile = "toy";
  int n = 10;
  int capacity = 20;
  std::uint64_t seed = 1;

  // Constructor model and training.
  int width = 32;
  int layers = 2;
  int heads = 4;
  Real logit_clip = 10.0;
  int batch_size = 64;
  int batches_per_epoch = 50;
  int epochs = 10;
  Real learning_rate = 1e-3;
  int eval_size = 128;  // held-out instances for the baseline comparison
  bool mem_efficient = true;

  // Initial solution pool.
  int ninstances = 512;
  int k = 10;

  // Perturbator model and training.
  int node_width = 16;
  int edge_width = 8;
  int egate_layers = 2;
  int critic_hidden = 16;
  int tsteps = 300;
  int bsize = 8;
  int perturbations = 10;
  int nnodes = 3;
  int buses = 4;
  Real eta = 3e-4;
  Real critic_eta = 3e-4;
  Real gamma = 0.99;
  Real epsilon = 0.2;
  Real t0 = 100.0;
  int steps_t1 = 1;
  int rsteps = 0;
  Real alpha_rand = 0.0;

  int eval_perturbations = 100;

  static TrainConfig toy(int n = 10);
  // Table-scale settings for n in {20, 50, 100}.
  static TrainConfig full(int n);

  constructor::ConstructorConfig constructor_model() const;
  perturbator::PerturbatorConfig perturbator_model() const;
  perturbator::PerturbTrainConfig perturbator_training() const;

  // Throws ParameterError naming the first invalid field.
  void check() const;

  nlohmann::json to_json() const;
  // Keys absent from `j` keep their values from `base`; unknown keys are an error.
  static TrainConfig from_json(const nlohmann::json& j, const TrainConfig& base);
};

// ---------------------------------------------------------------------------
// Data.

// Instance i is sample_instance(n, capacity, Rng::derive(seed, i)).
std::vector<CvrpInstance> generate_dataset(int n, int capacity, int count, std::uint64_t seed);
void generate_dataset(int n, int capacity, int count, std::uint64_t seed, const std::string& path);

// Per instance i, the best of k samples with stream Rng::derive(seed, i).
std::vector<RoutePlan> build_initial_solutions(const std::vector<CvrpInstance>& instances,
                                               const constructor::ConstructorParams& params, int k,
                                               std::uint64_t seed);

// 100 * (cost - reference) / reference.
Real gap_percent(Real cost, Real reference);

// ---------------------------------------------------------------------------
// Constructor training.

struct ConstructorStepReport {
  Real mean_cost = 0.0;
  Real baseline_cost = 0.0;
  Real loss = 0.0;
  double seconds = 0.0;
  std::size_t peak_retained = 0;
};

// REINFORCE with Adam and a greedy rollout baseline that is replaced at the end
// of an epoch when the current policy is better on the held-out set. Batch b
// uses instances and sampling streams derived from (seed, b) only, so a
// trainer restored from to_json continues exactly as an uninterrupted one.
class ConstructorTrainer {
 public:
  explicit ConstructorTrainer(const TrainConfig& config);

  ConstructorStepReport step();
  std::vector<ConstructorStepReport> run(int batches);

  const TrainConfig& config() const { return config_; }
  const constructor::ConstructorParams& params() const { return params_; }
  const constructor::BaselineParams& baseline() const { return baseline_; }
  long batches_done() const { return batches_done_; }

  nlohmann::json to_json() const;
  static ConstructorTrainer from_json(const nlohmann::json& j);

 private:
  ConstructorTrainer(const TrainConfig& config, constructor::ConstructorParams params,
                     constructor::BaselineParams baseline, Adam optimizer, long batches_done);

  TrainConfig config_;
  constructor::ConstructorParams params_;
  constructor::BaselineParams baseline_;
  Adam optimizer_;
  std::vector<CvrpInstance> eval_set_;
  long batches_done_ = 0;
};

// ---------------------------------------------------------------------------
// Perturbator training.

class PerturbatorTrainer {
 public:
  PerturbatorTrainer(const TrainConfig& config, std::vector<perturbator::StartingPoint> pool);

  perturbator::PerturbTrainReport run(int tsteps);

  const TrainConfig& config() const { return config_; }
  const perturbator::PerturbParams& params() const { return params_; }
  const perturbator::CriticParams& critic() const { return critic_; }
  long steps_done() const { return state_.steps_done; }

  // The pool is not stored; restore with the same pool to continue.
  nlohmann::json to_json() const;
  static PerturbatorTrainer from_json(const nlohmann::json& j, std::vector<perturbator::StartingPoint> pool);

 private:
  TrainConfig config_;
  std::vector<perturbator::StartingPoint> pool_;
  perturbator::PerturbParams params_;
  perturbator::CriticParams critic_;
  perturbator::PerturbTrainState state_;
};

std::vector<perturbator::StartingPoint> make_pool(const std::vector<CvrpInstance>& instances,
                                                  const std::vector<RoutePlan>& plans);

// ---------------------------------------------------------------------------
// Saved models. Both carry the TrainConfig they were trained with.

struct ConstructorModel {
  TrainConfig config;
  constructor::ConstructorParams params;
};

struct PerturbatorModel {
  TrainConfig config;
  perturbator::PerturbParams params;
};

void save_constructor(const std::string& path, const ConstructorTrainer& trainer);
ConstructorTrainer load_constructor_trainer(const std::string& path);
ConstructorModel load_constructor(const std::string& path);

void save_perturbator(const std::string& path, const PerturbatorTrainer& trainer);
PerturbatorTrainer load_perturbator_trainer(const std::string& path, std::vector<perturbator::StartingPoint> pool);
PerturbatorModel load_perturbator(const std::string& path);

// ---------------------------------------------------------------------------
// Evaluation.

struct EvalOptions {
  int k = 10;
  int perturbations = 100;
  int nnodes = 3;
  Real t0 = 100.0;
  int steps_t1 = 1;
  std::uint64_t seed = 0;
  bool include_greedy = true;
  // Models trained on a different n are refused unless this is set.
  bool allow_size_mismatch = false;
};

struct ResultRow {
  std::string instance_id;
  std::string method;
  Real cost = 0.0;
  std::optional<Real> gap_percent;
  double time_ms = 0.0;
  std::uint64_t seed = 0;
};

struct EvalOutput {
  std::vector<ResultRow> rows;
  std::vector<RoutePlan> initial;  // best-of-k construction per instance
  std::vector<RoutePlan> final;    // best plan after perturbation per instance
  std::vector<RoutePlan> greedy;   // empty unless include_greedy
};

inline constexpr const char* kMethodGreedy = "amd-greedy";
inline constexpr const char* kMethodSampled = "amd-sample";
inline constexpr const char* kMethodCombined = "cdcp";

// Instance i runs with seed Rng::derive(options.seed, i). A null perturbator
// skips the perturbation phase.
EvalOutput evaluate(const std::vector<CvrpInstance>& instances, const ConstructorModel& constructor_model,
                    const PerturbatorModel* perturbator_model, const EvalOptions& options);

// Fills gap_percent for rows whose instance has a reference cost.
void attach_gaps(std::vector<ResultRow>& rows, const std::map<std::string, Real>& reference);

// Columns instance_id, method, cost, gap_percent, time_ms, seed. With
// include_timing false the time column is written as 0, which makes repeated
// runs byte-identical.
std::string results_csv(const std::vector<ResultRow>& rows, bool include_timing);
void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows, bool include_timing);

// ---------------------------------------------------------------------------
// Memory / runtime benchmark of the two gradient strategies.

// Narrow heads and a small capacity keep the attention (n^2) terms and the
// number of re-encodings visible at n <= 80.
struct BenchOptions {
  constructor::ConstructorConfig model{32, 2, 16, 10.0};
  int batch_size = 8;
  int capacity = 20;
  int repeats = 3;
  std::uint64_t seed = 7;
};

struct BenchRow {
  int n = 0;
  std::string strategy;  // "original" or "memeff"
  std::size_t peak_retained = 0;
  std::size_t peak_nodes = 0;
  // Mean per batch, excluding the greedy baseline rollouts, which do not
  // depend on the strategy and are reported separately.
  double seconds = 0.0;
  double baseline_seconds = 0.0;
  std::string error;     // set when the run could not complete
};

struct BenchResult {
  std::vector<BenchRow> rows;
  std::optional<ComplexityFit> original_fit;
  std::optional<ComplexityFit> memeff_fit;
};

BenchResult bench_memory(const std::vector<int>& sizes, const BenchOptions& options);
std::string bench_csv(const BenchResult& result);

}  // namespace cdcp::pipeline
