#pragma once

// Learned destroy-and-repair local search. A stack of edge-aware graph
// attention layers encodes the instance together with the current plan; a GRU
// pointer decoder picks the customers to remove, which are reinserted at their
// cheapest positions in the picked order. Candidates are accepted by simulated
// annealing. Training is actor-critic: a small value network supplies TD
// errors that drive a clipped-ratio policy update.

#include <cstdint>
#include <memory>
#include <vector>

#include <json.hpp>

#include "cdcp/annealing.hpp"
#include "cdcp/cvrp.hpp"
#include "cdcp/layers.hpp"

namespace cdcp::perturbator {

using ad::Var;

inline constexpr int kNodeFeatures = 6;
inline constexpr int kEdgeFeatures = 2;

struct PerturbatorConfig {
  int node_width = 64;
  int edge_width = 16;
  int layers = 3;
  int critic_hidden = 64;

  static PerturbatorConfig full() { return {}; }
  static PerturbatorConfig toy() { return {16, 8, 2, 16}; }

  nlohmann::json to_json() const;
  static PerturbatorConfig from_json(const nlohmann::json& j);
};

// Shallow handles into `store`, as for the constructor.
struct PerturbParams {
  PerturbatorConfig config;
  ParameterStore store;
  nn::Linear node_lift;  // node features -> node_width
  nn::Linear edge_lift;  // edge features -> edge_width
  std::vector<nn::EgateLayer> encoder;
  nn::GruCell decoder;
  nn::Linear pointer_ref, pointer_query;  // node_width -> node_width
  Var pointer_v;                          // node_width x 1

  static PerturbParams init(const PerturbatorConfig& config, std::uint64_t seed);
  static PerturbParams from_store(const PerturbatorConfig& config, ParameterStore store);
  PerturbParams clone() const;
};

struct CriticParams {
  ParameterStore store;
  nn::Critic net;

  static CriticParams init(const PerturbatorConfig& config, std::uint64_t seed);
  static CriticParams from_store(ParameterStore store);
  CriticParams clone() const;
};

// Node rows: x, y, demand, tour demand, demand served before the node (the
// three divided by capacity), distance travelled from the depot up to the node.
// Edge rows (i * nodes + j): distance, 1 when i-j is a leg of the plan.
struct Features {
  Matrix nodes;
  Matrix edges;
};

Features compute_features(const CvrpInstance& instance, const RoutePlan& plan);

// Edges between two customers whose demands together exceed the capacity.
Mask constraint_mask(const CvrpInstance& instance);

struct PerturbState {
  std::shared_ptr<const CvrpInstance> instance;
  RoutePlan current;
  RoutePlan best;
  SaSchedule schedule;
  Features features;
  Eigen::ArrayXXi leg_count;  // legs of `current` between each pair of nodes
  Rng rng;
};

PerturbState make_state(std::shared_ptr<const CvrpInstance> instance, RoutePlan plan, const SaSchedule& schedule,
                        std::uint64_t seed);

// Replaces the current plan, refreshing only the rows of tours that changed.
void set_current(PerturbState& state, RoutePlan plan);

struct StateEncoding {
  Var nodes;   // nodes x node_width
  Var pooled;  // 1 x node_width
};

StateEncoding encode_features(const CvrpInstance& instance, const Features& features, const PerturbParams& params);
inline StateEncoding encode_state(const PerturbState& state, const PerturbParams& params) {
  return encode_features(*state.instance, state.features, params);
}

enum class SelectMode { Greedy, Sample };

struct Removal {
  NodeSet nodes;  // reinsertion order
  std::vector<Real> log_probs;
  Var total_log_prob;  // 1 x 1
};

Removal select_removals(const StateEncoding& encoding, const PerturbParams& params, int nnodes, SelectMode mode,
                        Rng& rng);

// Log-probability of a fixed removal sequence.
Var removal_log_prob(const StateEncoding& encoding, const PerturbParams& params, const NodeSet& nodes);

// Removes `nodes` and reinserts them in order at minimum cost.
RoutePlan destroy_repair(const CvrpInstance& instance, const RoutePlan& plan, const NodeSet& nodes);

struct Transition {
  std::shared_ptr<const CvrpInstance> instance;
  RoutePlan before;
  RoutePlan after;  // current plan once the candidate was accepted or rejected
  NodeSet removed;
  Real old_log_prob = 0.0;
  Real reward = 0.0;
  Real candidate_cost = 0.0;
  bool accepted = false;
};

// One destroy-repair move with SA acceptance; draws from state.rng.
Transition perturb_once(PerturbState& state, const PerturbParams& params, int nnodes, SelectMode mode);

// Uniformly random removals of min(10, n) customers under a schedule decaying
// by alpha_rand.
void initial_random_perturbation(PerturbState& state, int rsteps, Real alpha_rand, Rng& rng);

Real td_error(Real reward, Real gamma, Real v_next, Real v_prev);

Var state_value(const CriticParams& critic, const Matrix& pooled);

// phi += eta * mean_b(delta_b * grad v(pooled_b)).
void critic_update(CriticParams& critic, const std::vector<Matrix>& pooled, const std::vector<Real>& deltas, Real eta);

// min(R * a, clamp(R, 1 - epsilon, 1 + epsilon) * a) with R = exp(log_ratio).
Var clipped_surrogate(const Var& log_ratio, Real advantage, Real epsilon);

// Mean clipped surrogate over the batch, recorded for differentiation.
Var ppo_objective(const std::vector<Transition>& batch, const std::vector<Real>& advantages,
                  const PerturbParams& params, Real epsilon);

// Leaves d(ppo_objective)/d(theta) in the parameters' grad slots, accumulated
// one transition at a time. Returns the objective value.
Real ppo_actor_gradient(PerturbParams& params, const std::vector<Transition>& batch,
                        const std::vector<Real>& advantages, Real epsilon);

// One plain ascent step theta += eta * grad on ppo_objective. Returns the objective value.
Real ppo_actor_update(PerturbParams& params, const std::vector<Transition>& batch, const std::vector<Real>& advantages,
                      Real epsilon, Real eta);

struct PerturbTrainConfig {
  int tsteps = 1;
  int bsize = 128;
  int perturbations = 100;
  int nnodes = 10;
  int buses = 4;
  Real eta = 3e-4;
  Real critic_eta = 3e-4;
  Real gamma = 0.99;
  Real epsilon = 0.2;
  Real t0 = 100.0;
  int steps_t1 = 1;
  int rsteps = 0;
  Real alpha_rand = 0.0;
  // Actor steps use Adam at learning rate eta; plain ascent otherwise.
  bool adam = true;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static PerturbTrainConfig from_json(const nlohmann::json& j);
};

struct StartingPoint {
  std::shared_ptr<const CvrpInstance> instance;
  RoutePlan plan;
};

struct PerturbTrainReport {
  std::vector<Real> percent_change;  // per tstep, batch mean of best vs starting cost
  std::vector<Real> mean_cost;       // per tstep, batch mean best cost
  std::vector<Real> actor_objective;
  std::vector<Real> critic_loss;  // mean squared TD error
  std::vector<double> seconds;
};

struct PoolCursor {
  std::vector<std::size_t> order;
  std::size_t next = 0;
};

// Everything besides the weights that a resumed run needs.
struct PerturbTrainState {
  Rng rng;
  PoolCursor cursor;
  Adam actor_optimizer;
  long steps_done = 0;

  static PerturbTrainState start(const PerturbTrainConfig& config);
};

// Runs config.tsteps training steps, drawing starting points from `pool` in a
// cycle reshuffled on every pass.
PerturbTrainReport train_perturbator(const std::vector<StartingPoint>& pool, PerturbParams& params,
                                     CriticParams& critic, const PerturbTrainConfig& config,
                                     PerturbTrainState& state);

// Runs `perturbations` sample-mode moves from `start` and returns the best plan seen.
RoutePlan improve(std::shared_ptr<const CvrpInstance> instance, const RoutePlan& start, const PerturbParams& params,
                  int perturbations, int nnodes, Real t0, int steps_t1, std::uint64_t seed);

}  // namespace cdcp::perturbator
