#include "cdcp/constructor.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "cdcp/errors.hpp"

namespace cdcp::constructor {

nlohmann::json ConstructorConfig::to_json() const {
  return {{"width", width}, {"layers", layers}, {"heads", heads}, {"logit_clip", logit_clip}};
}

ConstructorConfig ConstructorConfig::from_json(const nlohmann::json& j) {
  ConstructorConfig c;
  c.width = j.at("width").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.logit_clip = j.at("logit_clip").get<Real>();
  return c;
}

namespace {

void check_config(const ConstructorConfig& c) {
  if (c.width < 1 || c.layers < 0 || c.heads < 1 || c.width % c.heads != 0) {
    throw ParameterError("constructor config: width must be positive and divisible by heads");
  }
}

ConstructorParams bind_all(const ConstructorConfig& config, ParameterStore store) {
  ConstructorParams p;
  p.config = config;
  p.store = std::move(store);
  p.lift = nn::Linear::bind(p.store, "lift", true);
  for (int l = 0; l < config.layers; ++l) {
    p.encoder.push_back(nn::MhaLayer::bind(p.store, "encoder." + std::to_string(l), config.width, config.heads));
  }
  p.context = nn::Linear::bind(p.store, "decoder.context", false);
  p.glimpse_key = nn::Linear::bind(p.store, "decoder.glimpse_key", false);
  p.glimpse_value = nn::Linear::bind(p.store, "decoder.glimpse_value", false);
  p.glimpse_out = nn::Linear::bind(p.store, "decoder.glimpse_out", false);
  p.logit_key = nn::Linear::bind(p.store, "decoder.logit_key", false);
  return p;
}

}  // namespace

ConstructorParams ConstructorParams::init(const ConstructorConfig& config, std::uint64_t seed) {
  check_config(config);
  Rng rng(seed);
  ParameterStore store;
  const int w = config.width;
  nn::Linear::create(store, "lift", 3, w, true, rng);
  for (int l = 0; l < config.layers; ++l) {
    nn::MhaLayer::create(store, "encoder." + std::to_string(l), w, config.heads, rng);
  }
  nn::Linear::create(store, "decoder.context", 2 * w + 1, w, false, rng);
  nn::Linear::create(store, "decoder.glimpse_key", w, w, false, rng);
  nn::Linear::create(store, "decoder.glimpse_value", w, w, false, rng);
  nn::Linear::create(store, "decoder.glimpse_out", w, w, false, rng);
  nn::Linear::create(store, "decoder.logit_key", w, w, false, rng);
  return bind_all(config, std::move(store));
}

ConstructorParams ConstructorParams::from_store(const ConstructorConfig& config, ParameterStore store) {
  check_config(config);
  ConstructorParams p = bind_all(config, std::move(store));
  if (p.lift.weight.rows() != 3 || p.lift.weight.cols() != config.width) {
    throw FormatError("constructor parameters do not match the configured width");
  }
  return p;
}

ConstructorParams ConstructorParams::clone() const { return bind_all(config, store.clone()); }

Var encode(const CvrpInstance& instance, const std::vector<char>& visited, const ConstructorParams& params) {
  const int nodes = instance.node_count();
  Matrix features(nodes, 3);
  Mask key_mask = Mask::Constant(1, nodes, false);
  for (NodeId v = 0; v < nodes; ++v) {
    const Point& p = instance.location(v);
    features.row(v) << p.x(), p.y(), static_cast<Real>(instance.demand(v)) / instance.capacity;
    if (v > 0 && visited[v]) key_mask(0, v) = true;
  }
  Var h = nn::linear(params.lift, ad::constant(std::move(features)));
  for (const auto& layer : params.encoder) h = nn::skip_connect(h, nn::mha(layer, h, h, h, key_mask));
  return h;
}

Encoding encode_for_decoding(const CvrpInstance& instance, const std::vector<char>& visited,
                             const ConstructorParams& params) {
  Encoding e;
  e.embeddings = encode(instance, visited, params);
  const int nodes = instance.node_count();
  int visible = 0;
  for (NodeId v = 0; v < nodes; ++v) visible += (v == 0 || !visited[v]) ? 1 : 0;
  Matrix weights = Matrix::Zero(1, nodes);
  for (NodeId v = 0; v < nodes; ++v) {
    if (v == 0 || !visited[v]) weights(0, v) = 1.0 / visible;
  }
  e.graph = ad::matmul(ad::constant(std::move(weights)), e.embeddings);
  const Var keys = nn::linear(params.glimpse_key, e.embeddings);
  const Var values = nn::linear(params.glimpse_value, e.embeddings);
  const int dk = params.config.width / params.config.heads;
  for (int h = 0; h < params.config.heads; ++h) {
    e.glimpse_keys.push_back(ad::slice_cols(keys, h * dk, dk));
    e.glimpse_values.push_back(ad::slice_cols(values, h * dk, dk));
  }
  e.logit_keys = nn::linear(params.logit_key, e.embeddings);
  return e;
}

DecodeState start_state(const CvrpInstance& instance) {
  DecodeState s;
  s.visited.assign(instance.node_count(), 0);
  s.remaining = instance.capacity;
  s.unvisited = instance.size();
  return s;
}

Mask selection_mask(const CvrpInstance& instance, const DecodeState& state) {
  const int nodes = instance.node_count();
  Mask mask(1, nodes);
  mask(0, 0) = state.current.empty();
  for (NodeId v = 1; v < nodes; ++v) mask(0, v) = state.visited[v] || instance.demand(v) > state.remaining;
  return mask;
}

Var next_node_log_probs(const CvrpInstance& instance, const Encoding& encoding, const DecodeState& state,
                        const ConstructorParams& params) {
  const Mask mask = selection_mask(instance, state);
  const int w = params.config.width;
  const int heads = params.config.heads;
  const int dk = w / heads;

  const int last[] = {state.last};
  const Var context_in[] = {
      encoding.graph, ad::gather_rows(encoding.embeddings, last),
      ad::scalar_constant(static_cast<Real>(state.remaining) / instance.capacity)};
  const Var query = nn::linear(params.context, ad::concat_cols(context_in));

  std::vector<Var> glimpse_heads;
  glimpse_heads.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    const Var compat = ad::scale(
        ad::matmul_nt(ad::slice_cols(query, h * dk, dk), encoding.glimpse_keys[h]),
        1.0 / std::sqrt(static_cast<Real>(dk)));
    glimpse_heads.push_back(
        ad::matmul(ad::masked_softmax(compat, mask), encoding.glimpse_values[h]));
  }
  const Var glimpse = nn::linear(params.glimpse_out, ad::concat_cols(glimpse_heads));
  const Var logits = ad::scale(
      ad::tanh(ad::scale(ad::matmul_nt(glimpse, encoding.logit_keys), 1.0 / std::sqrt(static_cast<Real>(w)))),
      params.config.logit_clip);
  return ad::masked_log_softmax(logits, mask);
}

namespace {

NodeId choose(const Matrix& log_probs, DecodeMode mode, Rng& rng) {
  const Eigen::Index nodes = log_probs.cols();
  NodeId pick = -1;
  if (mode == DecodeMode::Greedy) {
    for (Eigen::Index v = 0; v < nodes; ++v) {
      if (std::isinf(log_probs(0, v))) continue;
      if (pick < 0 || log_probs(0, v) > log_probs(0, pick)) pick = static_cast<NodeId>(v);
    }
  } else {
    const Real u = rng.uniform();
    Real cumulative = 0.0;
    for (Eigen::Index v = 0; v < nodes; ++v) {
      if (std::isinf(log_probs(0, v))) continue;
      pick = static_cast<NodeId>(v);
      cumulative += std::exp(log_probs(0, v));
      if (u < cumulative) break;
    }
  }
  if (pick < 0) throw std::logic_error("decode_step: no selectable node");
  return pick;
}

}  // namespace

Step decode_step(const CvrpInstance& instance, const Encoding& encoding, const DecodeState& state,
                 const ConstructorParams& params, DecodeMode mode, Rng& rng) {
  const Var log_probs = next_node_log_probs(instance, encoding, state, params);
  const NodeId node = choose(log_probs.value(), mode, rng);
  return {node, ad::gather(log_probs, 0, node)};
}

Step replay_step(const CvrpInstance& instance, const Encoding& encoding, const DecodeState& state,
                 const ConstructorParams& params, NodeId node) {
  const Var log_probs = next_node_log_probs(instance, encoding, state, params);
  if (node < 0 || node >= log_probs.cols() || std::isinf(log_probs.value()(0, node))) {
    throw DeterminismError("replay: recorded node " + std::to_string(node) + " is not selectable");
  }
  return {node, ad::gather(log_probs, 0, node)};
}

void apply_step(const CvrpInstance& instance, DecodeState& state, NodeId node) {
  if (node == 0) {
    state.routes.push_back(std::move(state.current));
    state.current.clear();
    state.remaining = instance.capacity;
    state.last = 0;
    state.needs_encoding = true;
    return;
  }
  state.visited[node] = 1;
  state.current.push_back(node);
  state.remaining -= instance.demand(node);
  state.unvisited -= 1;
  state.last = node;
  if (state.unvisited == 0) {
    state.routes.push_back(std::move(state.current));
    state.current.clear();
  }
}

Construction construct(const CvrpInstance& instance, const ConstructorParams& params, DecodeMode mode,
                       std::uint64_t seed) {
  Rng rng(seed);
  DecodeState state = start_state(instance);
  Construction out;
  Encoding encoding;
  while (!state.finished()) {
    if (state.needs_encoding) {
      encoding = encode_for_decoding(instance, state.visited, params);
      state.needs_encoding = false;
    }
    Step step = decode_step(instance, encoding, state, params, mode, rng);
    const Real lp = step.log_prob.scalar();
    out.total_log_prob = out.total_log_prob.defined() ? ad::add(out.total_log_prob, step.log_prob) : step.log_prob;
    out.actions.push_back(step.node);
    out.step_log_probs.push_back(lp);
    state.log_prob += lp;
    apply_step(instance, state, step.node);
  }
  if (!out.total_log_prob.defined()) out.total_log_prob = ad::scalar_constant(0.0);
  out.plan = make_plan(instance, std::move(state.routes));
  return out;
}

Var replay_log_prob(const CvrpInstance& instance, const ConstructorParams& params, const std::vector<NodeId>& actions) {
  DecodeState state = start_state(instance);
  Encoding encoding;
  Var total;
  for (NodeId node : actions) {
    if (state.finished()) throw DeterminismError("replay: more actions than the construction needs");
    if (state.needs_encoding) {
      encoding = encode_for_decoding(instance, state.visited, params);
      state.needs_encoding = false;
    }
    Step step = replay_step(instance, encoding, state, params, node);
    total = total.defined() ? ad::add(total, step.log_prob) : step.log_prob;
    apply_step(instance, state, node);
  }
  if (!state.finished()) throw DeterminismError("replay: action sequence ends before every customer is routed");
  return total.defined() ? total : ad::scalar_constant(0.0);
}

RoutePlan sample_best_of_k(const CvrpInstance& instance, const ConstructorParams& params, int k, std::uint64_t seed) {
  if (k < 1) throw ParameterError("sample_best_of_k: k must be >= 1");
  ad::RecordScope off(false);
  RoutePlan best;
  for (int s = 0; s < k; ++s) {
    Construction c = construct(instance, params, DecodeMode::Sample, Rng::derive(seed, static_cast<std::uint64_t>(s)));
    if (s == 0 || c.plan.cost < best.cost) best = std::move(c.plan);
  }
  return best;
}

Real greedy_mean_cost(const std::vector<CvrpInstance>& instances, const ConstructorParams& params) {
  if (instances.empty()) return 0.0;
  ad::RecordScope off(false);
  Real total = 0.0;
  for (const auto& instance : instances) total += construct(instance, params, DecodeMode::Greedy, 0).plan.cost;
  return total / static_cast<Real>(instances.size());
}

BaselineParams make_baseline(const ConstructorParams& params, const std::vector<CvrpInstance>& eval_set) {
  BaselineParams b{params.clone(), 0.0};
  b.eval_cost = greedy_mean_cost(eval_set, b.params);
  return b;
}

std::vector<Real> greedy_rollout_baseline(const std::vector<CvrpInstance>& batch, const BaselineParams& baseline) {
  ad::RecordScope off(false);
  std::vector<Real> costs;
  costs.reserve(batch.size());
  for (const auto& instance : batch) costs.push_back(construct(instance, baseline.params, DecodeMode::Greedy, 0).plan.cost);
  return costs;
}

BaselineParams maybe_update_baseline(const ConstructorParams& params, const BaselineParams& baseline,
                                     const std::vector<CvrpInstance>& eval_set, Real threshold) {
  const Real candidate = greedy_mean_cost(eval_set, params);
  if (candidate < baseline.eval_cost - threshold) return {params.clone(), candidate};
  return {baseline.params, baseline.eval_cost};
}

namespace {

using Clock = std::chrono::steady_clock;

void check_finite(const GradientReport& report) {
  if (std::isfinite(report.loss) && report.gradient.allFinite()) return;
  std::ostringstream msg;
  msg << "non-finite REINFORCE loss/gradient: loss=" << report.loss << " costs=[";
  for (Real c : report.costs) msg << c << ' ';
  msg << "] baseline=[";
  for (Real c : report.baseline_costs) msg << c << ' ';
  msg << "]";
  throw NumericError(msg.str());
}

GradientReport gradient_original(const std::vector<CvrpInstance>& batch, ConstructorParams& params,
                                 const BaselineParams& baseline, std::uint64_t seed) {
  GradientReport report;
  const auto start = Clock::now();
  params.store.zero_grad();
  ad::RetainedEpoch epoch;
  const auto baseline_start = Clock::now();
  report.baseline_costs = greedy_rollout_baseline(batch, baseline);
  report.baseline_seconds = std::chrono::duration<double>(Clock::now() - baseline_start).count();
  const Real scale = 1.0 / static_cast<Real>(batch.size());
  {
    ad::RecordScope on(true);
    std::vector<Var> log_likelihoods;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Construction c = construct(batch[i], params, DecodeMode::Sample, Rng::derive(seed, i));
      report.costs.push_back(c.plan.cost);
      log_likelihoods.push_back(std::move(c.total_log_prob));
    }
    Var loss;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Var term = ad::scale(log_likelihoods[i], (report.costs[i] - report.baseline_costs[i]) * scale);
      loss = loss.defined() ? ad::add(loss, term) : term;
    }
    report.loss = loss.scalar();
    if (loss.requires_grad()) ad::backward(loss);
  }
  report.peak_retained = epoch.peak();
  report.peak_nodes = epoch.peak_nodes();
  report.gradient = params.store.flat_grad();
  report.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  check_finite(report);
  return report;
}

GradientReport gradient_memeff(const std::vector<CvrpInstance>& batch, ConstructorParams& params,
                               const BaselineParams& baseline, std::uint64_t seed) {
  GradientReport report;
  const auto start = Clock::now();
  params.store.zero_grad();
  ad::RetainedEpoch epoch;
  const std::size_t count = batch.size();

  // Pass 1 fixes the sampled actions and costs without recording.
  std::vector<Construction> rollouts;
  {
    ad::RecordScope off(false);
    for (std::size_t i = 0; i < count; ++i) {
      rollouts.push_back(construct(batch[i], params, DecodeMode::Sample, Rng::derive(seed, i)));
      report.costs.push_back(rollouts.back().plan.cost);
    }
  }
  const auto baseline_start = Clock::now();
  report.baseline_costs = greedy_rollout_baseline(batch, baseline);
  report.baseline_seconds = std::chrono::duration<double>(Clock::now() - baseline_start).count();

  std::vector<Real> weight(count);
  std::size_t longest = 0;
  for (std::size_t i = 0; i < count; ++i) {
    weight[i] = (report.costs[i] - report.baseline_costs[i]) / static_cast<Real>(count);
    longest = std::max(longest, rollouts[i].actions.size());
  }

  // Pass 2 replays the actions step by step; each step's weighted
  // log-probabilities are differentiated immediately and the gradients add up.
  ad::RecordScope on(true);
  std::vector<DecodeState> states;
  for (const auto& instance : batch) states.push_back(start_state(instance));
  std::vector<std::optional<Encoding>> encodings(count);
  for (std::size_t j = 0; j < longest; ++j) {
    Var step_loss;
    for (std::size_t i = 0; i < count; ++i) {
      const auto& actions = rollouts[i].actions;
      if (j >= actions.size()) continue;
      if (states[i].needs_encoding) {
        encodings[i].reset();
        encodings[i] = encode_for_decoding(batch[i], states[i].visited, params);
        states[i].needs_encoding = false;
      }
      Step step = replay_step(batch[i], *encodings[i], states[i], params, actions[j]);
      if (step.log_prob.scalar() != rollouts[i].step_log_probs[j]) {
        throw DeterminismError("replay: log-probability of step " + std::to_string(j) + " of instance " +
                               std::to_string(i) + " differs from the recorded rollout");
      }
      apply_step(batch[i], states[i], actions[j]);
      if (states[i].finished()) encodings[i].reset();
      const Var term = ad::scale(step.log_prob, weight[i]);
      step_loss = step_loss.defined() ? ad::add(step_loss, term) : term;
    }
    if (!step_loss.defined()) continue;
    report.loss += step_loss.scalar();
    if (step_loss.requires_grad()) ad::backward(step_loss, ad::Retain::Graph);
  }
  encodings.clear();
  report.peak_retained = epoch.peak();
  report.peak_nodes = epoch.peak_nodes();
  report.gradient = params.store.flat_grad();
  report.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  check_finite(report);
  return report;
}

}  // namespace

GradientReport reinforce_gradient(const std::vector<CvrpInstance>& batch, ConstructorParams& params,
                                  const BaselineParams& baseline, std::uint64_t seed, GradientStrategy strategy) {
  if (batch.empty()) throw ParameterError("reinforce: empty batch");
  return strategy == GradientStrategy::Original ? gradient_original(batch, params, baseline, seed)
                                                : gradient_memeff(batch, params, baseline, seed);
}

GradientReport reinforce_step_original(const std::vector<CvrpInstance>& batch, ConstructorParams& params,
                                       const BaselineParams& baseline, Real learning_rate, std::uint64_t seed) {
  GradientReport report = reinforce_gradient(batch, params, baseline, seed, GradientStrategy::Original);
  params.store.apply_gradient(-learning_rate);
  return report;
}

GradientReport reinforce_step_memeff(const std::vector<CvrpInstance>& batch, ConstructorParams& params,
                                     const BaselineParams& baseline, Real learning_rate, std::uint64_t seed) {
  GradientReport report = reinforce_gradient(batch, params, baseline, seed, GradientStrategy::MemoryEfficient);
  params.store.apply_gradient(-learning_rate);
  return report;
}

}  // namespace cdcp::constructor
