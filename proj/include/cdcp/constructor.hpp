#pragma once

// Attention-based constructive policy: an MHA encoder that is re-run with the
// visited customers masked out each time the vehicle returns to the depot,
// and a single-query attention decoder over a capacity-aware context.
// Trained by REINFORCE against a greedy rollout baseline, either by one
// backward pass over the whole rollout or by replaying the rollout and
// differentiating every step separately.

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "cdcp/cvrp.hpp"
#include "cdcp/layers.hpp"

namespace cdcp::constructor {

using ad::Var;

struct ConstructorConfig {
  int width = 128;
  int layers = 3;
  int heads = 8;
  Real logit_clip = 10.0;

  static ConstructorConfig full() { return {}; }
  static ConstructorConfig toy() { return {32, 2, 4, 10.0}; }

  nlohmann::json to_json() const;
  static ConstructorConfig from_json(const nlohmann::json& j);
};

// Layer handles share their values with `store`; copies are shallow. Use
// clone() for an independent set of weights.
struct ConstructorParams {
  ConstructorConfig config;
  ParameterStore store;
  nn::Linear lift;  // (x, y, demand / capacity) -> width
  std::vector<nn::MhaLayer> encoder;
  nn::Linear context;  // (graph, last node, remaining capacity) -> query
  nn::Linear glimpse_key, glimpse_value, glimpse_out, logit_key;

  static ConstructorParams init(const ConstructorConfig& config, std::uint64_t seed);
  static ConstructorParams from_store(const ConstructorConfig& config, ParameterStore store);
  ConstructorParams clone() const;
};

// Node 0 is the depot; visited[c] marks customer c as already routed.
Var encode(const CvrpInstance& instance, const std::vector<char>& visited, const ConstructorParams& params);

struct Encoding {
  Var embeddings;  // nodes x width
  Var graph;       // 1 x width, mean over the depot and unvisited customers
  std::vector<Var> glimpse_keys, glimpse_values;  // per head, nodes x width/heads
  Var logit_keys;
};

Encoding encode_for_decoding(const CvrpInstance& instance, const std::vector<char>& visited,
                             const ConstructorParams& params);

struct DecodeState {
  std::vector<char> visited;  // per node, depot entry unused
  NodeId last = 0;
  int remaining = 0;
  int unvisited = 0;
  Tour current;
  std::vector<Tour> routes;
  Real log_prob = 0.0;  // running sum of step log-probabilities
  bool needs_encoding = true;

  bool finished() const { return unvisited == 0; }
};

DecodeState start_state(const CvrpInstance& instance);

// Excluded next nodes (1 x nodes): visited customers, customers whose demand
// exceeds the remaining capacity, and the depot while the current tour is empty.
Mask selection_mask(const CvrpInstance& instance, const DecodeState& state);

enum class DecodeMode { Greedy, Sample };

struct Step {
  NodeId node = 0;
  Var log_prob;  // 1 x 1
};

// Log-probabilities over next nodes (1 x nodes; masked entries are -inf).
Var next_node_log_probs(const CvrpInstance& instance, const Encoding& encoding, const DecodeState& state,
                        const ConstructorParams& params);

Step decode_step(const CvrpInstance& instance, const Encoding& encoding, const DecodeState& state,
                 const ConstructorParams& params, DecodeMode mode, Rng& rng);

// Scores a given next node; throws DeterminismError when it is not selectable.
Step replay_step(const CvrpInstance& instance, const Encoding& encoding, const DecodeState& state,
                 const ConstructorParams& params, NodeId node);

void apply_step(const CvrpInstance& instance, DecodeState& state, NodeId node);

struct Construction {
  RoutePlan plan;
  Var total_log_prob;  // sum over steps, recorded when recording is on
  std::vector<NodeId> actions;
  std::vector<Real> step_log_probs;
};

Construction construct(const CvrpInstance& instance, const ConstructorParams& params, DecodeMode mode,
                       std::uint64_t seed);

// Total log-probability of a fixed action sequence under `params`.
Var replay_log_prob(const CvrpInstance& instance, const ConstructorParams& params, const std::vector<NodeId>& actions);

RoutePlan sample_best_of_k(const CvrpInstance& instance, const ConstructorParams& params, int k, std::uint64_t seed);

struct BaselineParams {
  ConstructorParams params;  // frozen
  Real eval_cost = 0.0;      // greedy mean cost over the held-out set
};

BaselineParams make_baseline(const ConstructorParams& params, const std::vector<CvrpInstance>& eval_set);

// Greedy construction costs under the frozen baseline, without recording.
std::vector<Real> greedy_rollout_baseline(const std::vector<CvrpInstance>& batch, const BaselineParams& baseline);

Real greedy_mean_cost(const std::vector<CvrpInstance>& instances, const ConstructorParams& params);

// Replaces the baseline with a frozen copy of `params` iff their greedy mean
// cost on `eval_set` beats the baseline's by more than `threshold`.
BaselineParams maybe_update_baseline(const ConstructorParams& params, const BaselineParams& baseline,
                                     const std::vector<CvrpInstance>& eval_set, Real threshold = 0.0);

struct GradientReport {
  Vector gradient;  // flat, store order
  std::vector<Real> costs;
  std::vector<Real> baseline_costs;
  Real loss = 0.0;  // mean (cost - baseline) * log-prob
  std::size_t peak_retained = 0;
  std::size_t peak_nodes = 0;
  double seconds = 0.0;
  double baseline_seconds = 0.0;  // part of `seconds` spent in the greedy baseline rollouts
};

enum class GradientStrategy { Original, MemoryEfficient };

// REINFORCE gradient with greedy rollout baseline. Instance i samples with
// stream Rng::derive(seed, i) in both strategies. Leaves the gradient in the
// parameters' grad slots.
GradientReport reinforce_gradient(const std::vector<CvrpInstance>& batch, ConstructorParams& params,
                                  const BaselineParams& baseline, std::uint64_t seed, GradientStrategy strategy);

// One plain gradient step theta <- theta - learning_rate * grad.
GradientReport reinforce_step_original(const std::vector<CvrpInstance>& batch, ConstructorParams& params,
                                       const BaselineParams& baseline, Real learning_rate, std::uint64_t seed);
GradientReport reinforce_step_memeff(const std::vector<CvrpInstance>& batch, ConstructorParams& params,
                                     const BaselineParams& baseline, Real learning_rate, std::uint64_t seed);

}  // namespace cdcp::constructor
