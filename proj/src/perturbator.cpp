#include "cdcp/perturbator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "cdcp/errors.hpp"

namespace cdcp::perturbator {

nlohmann::json PerturbatorConfig::to_json() const {
  return {{"node_width", node_width}, {"edge_width", edge_width}, {"layers", layers}, {"critic_hidden", critic_hidden}};
}

PerturbatorConfig PerturbatorConfig::from_json(const nlohmann::json& j) {
  PerturbatorConfig c;
  c.node_width = j.at("node_width").get<int>();
  c.edge_width = j.at("edge_width").get<int>();
  c.layers = j.at("layers").get<int>();
  c.critic_hidden = j.at("critic_hidden").get<int>();
  return c;
}

namespace {

void check_config(const PerturbatorConfig& c) {
  if (c.node_width < 1 || c.edge_width < 1 || c.layers < 0 || c.critic_hidden < 1) {
    throw ParameterError("perturbator config: widths must be positive");
  }
}

PerturbParams bind_all(const PerturbatorConfig& config, ParameterStore store) {
  PerturbParams p;
  p.config = config;
  p.store = std::move(store);
  p.node_lift = nn::Linear::bind(p.store, "node_lift", true);
  p.edge_lift = nn::Linear::bind(p.store, "edge_lift", true);
  for (int l = 0; l < config.layers; ++l) {
    p.encoder.push_back(
        nn::EgateLayer::bind(p.store, "encoder." + std::to_string(l), config.node_width, config.edge_width));
  }
  p.decoder = nn::GruCell::bind(p.store, "decoder.gru", config.node_width, config.node_width);
  p.pointer_ref = nn::Linear::bind(p.store, "decoder.pointer_ref", false);
  p.pointer_query = nn::Linear::bind(p.store, "decoder.pointer_query", false);
  p.pointer_v = p.store.get("decoder.pointer_v");
  return p;
}

}  // namespace

PerturbParams PerturbParams::init(const PerturbatorConfig& config, std::uint64_t seed) {
  check_config(config);
  Rng rng(seed);
  ParameterStore store;
  const int w = config.node_width;
  nn::Linear::create(store, "node_lift", kNodeFeatures, w, true, rng);
  nn::Linear::create(store, "edge_lift", kEdgeFeatures, config.edge_width, true, rng);
  for (int l = 0; l < config.layers; ++l) {
    nn::EgateLayer::create(store, "encoder." + std::to_string(l), w, config.edge_width, rng);
  }
  nn::GruCell::create(store, "decoder.gru", w, w, rng);
  nn::Linear::create(store, "decoder.pointer_ref", w, w, false, rng);
  nn::Linear::create(store, "decoder.pointer_query", w, w, false, rng);
  store.add_uniform("decoder.pointer_v", w, 1, w, rng);
  return bind_all(config, std::move(store));
}

PerturbParams PerturbParams::from_store(const PerturbatorConfig& config, ParameterStore store) {
  check_config(config);
  PerturbParams p = bind_all(config, std::move(store));
  if (p.node_lift.weight.rows() != kNodeFeatures || p.node_lift.weight.cols() != config.node_width ||
      p.edge_lift.weight.cols() != config.edge_width) {
    throw FormatError("perturbator parameters do not match the configured widths");
  }
  return p;
}

PerturbParams PerturbParams::clone() const { return bind_all(config, store.clone()); }

CriticParams CriticParams::init(const PerturbatorConfig& config, std::uint64_t seed) {
  check_config(config);
  Rng rng(seed);
  CriticParams c;
  c.net = nn::Critic::create(c.store, "critic", config.node_width, config.critic_hidden, rng);
  return c;
}

CriticParams CriticParams::from_store(ParameterStore store) {
  CriticParams c;
  c.store = std::move(store);
  c.net = nn::Critic::bind(c.store, "critic");
  return c;
}

CriticParams CriticParams::clone() const { return from_store(store.clone()); }

// ---------------------------------------------------------------------------
// Features.

namespace {

void write_tour_rows(const CvrpInstance& instance, const Tour& tour, Matrix& nodes) {
  const Real cap = instance.capacity;
  const Real total = tour_demand(instance, tour);
  Real served = 0.0;
  Real travelled = 0.0;
  NodeId prev = 0;
  for (NodeId v : tour) {
    travelled += instance.distance(prev, v);
    nodes(v, 3) = total / cap;
    nodes(v, 4) = served / cap;
    nodes(v, 5) = travelled;
    served += instance.demand(v);
    prev = v;
  }
}

template <typename Visit>
void for_each_leg(const Tour& tour, Visit&& visit) {
  NodeId prev = 0;
  for (NodeId v : tour) {
    visit(prev, v);
    prev = v;
  }
  if (!tour.empty()) visit(prev, 0);
}

Matrix static_node_rows(const CvrpInstance& instance) {
  Matrix nodes = Matrix::Zero(instance.node_count(), kNodeFeatures);
  for (NodeId v = 0; v < instance.node_count(); ++v) {
    const Point& p = instance.location(v);
    nodes(v, 0) = p.x();
    nodes(v, 1) = p.y();
    nodes(v, 2) = static_cast<Real>(instance.demand(v)) / instance.capacity;
  }
  return nodes;
}

Matrix distance_edges(const CvrpInstance& instance) {
  const int n = instance.node_count();
  Matrix edges = Matrix::Zero(static_cast<Eigen::Index>(n) * n, kEdgeFeatures);
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = 0; j < n; ++j) edges(i * n + j, 0) = instance.distance(i, j);
  }
  return edges;
}

}  // namespace

Features compute_features(const CvrpInstance& instance, const RoutePlan& plan) {
  Features f;
  f.nodes = static_node_rows(instance);
  f.edges = distance_edges(instance);
  const int n = instance.node_count();
  for (const auto& tour : plan.routes) {
    write_tour_rows(instance, tour, f.nodes);
    for_each_leg(tour, [&](NodeId a, NodeId b) {
      f.edges(a * n + b, 1) = 1.0;
      f.edges(b * n + a, 1) = 1.0;
    });
  }
  return f;
}

Mask constraint_mask(const CvrpInstance& instance) {
  const int n = instance.node_count();
  Mask mask = Mask::Constant(n, n, false);
  for (NodeId i = 1; i < n; ++i) {
    for (NodeId j = 1; j < n; ++j) {
      mask(i, j) = i != j && instance.demand(i) + instance.demand(j) > instance.capacity;
    }
  }
  return mask;
}

PerturbState make_state(std::shared_ptr<const CvrpInstance> instance, RoutePlan plan, const SaSchedule& schedule,
                        std::uint64_t seed) {
  if (!instance) throw ParameterError("make_state: missing instance");
  PerturbState s;
  s.instance = std::move(instance);
  s.schedule = schedule;
  s.rng = Rng(seed);
  const int n = s.instance->node_count();
  s.features = compute_features(*s.instance, plan);
  s.leg_count = Eigen::ArrayXXi::Zero(n, n);
  for (const auto& tour : plan.routes) {
    for_each_leg(tour, [&](NodeId a, NodeId b) {
      ++s.leg_count(a, b);
      if (a != b) ++s.leg_count(b, a);
    });
  }
  s.best = plan;
  s.current = std::move(plan);
  return s;
}

void set_current(PerturbState& state, RoutePlan plan) {
  const CvrpInstance& instance = *state.instance;
  const int n = instance.node_count();
  std::vector<char> kept_old(state.current.routes.size(), 0);
  std::vector<char> kept_new(plan.routes.size(), 0);
  for (std::size_t a = 0; a < plan.routes.size(); ++a) {
    for (std::size_t b = 0; b < state.current.routes.size(); ++b) {
      if (!kept_old[b] && plan.routes[a] == state.current.routes[b]) {
        kept_old[b] = kept_new[a] = 1;
        break;
      }
    }
  }
  std::vector<std::pair<NodeId, NodeId>> touched;
  auto shift = [&](const Tour& tour, int delta) {
    for_each_leg(tour, [&](NodeId a, NodeId b) {
      state.leg_count(a, b) += delta;
      if (a != b) state.leg_count(b, a) += delta;
      touched.emplace_back(a, b);
    });
  };
  for (std::size_t b = 0; b < state.current.routes.size(); ++b) {
    if (!kept_old[b]) shift(state.current.routes[b], -1);
  }
  for (std::size_t a = 0; a < plan.routes.size(); ++a) {
    if (kept_new[a]) continue;
    shift(plan.routes[a], +1);
    write_tour_rows(instance, plan.routes[a], state.features.nodes);
  }
  for (const auto& [a, b] : touched) {
    const Real flag = state.leg_count(a, b) > 0 ? 1.0 : 0.0;
    state.features.edges(a * n + b, 1) = flag;
    state.features.edges(b * n + a, 1) = flag;
  }
  state.current = std::move(plan);
}

// ---------------------------------------------------------------------------
// Policy.

StateEncoding encode_features(const CvrpInstance& instance, const Features& features, const PerturbParams& params) {
  const Mask mask = constraint_mask(instance);
  Var h = nn::linear(params.node_lift, ad::constant(features.nodes));
  const Var e = nn::linear(params.edge_lift, ad::constant(features.edges));
  for (const auto& layer : params.encoder) h = nn::egate_forward(layer, h, e, mask);
  return {h, ad::mean_rows(h)};
}

namespace {

// Walks the pointer decoder; `pick` chooses the node at each step from the
// step's log-probabilities.
template <typename Pick>
Removal run_pointer(const StateEncoding& encoding, const PerturbParams& params, int nnodes, Pick&& pick) {
  const Eigen::Index nodes = encoding.nodes.rows();
  if (nnodes < 0 || nnodes > nodes - 1) {
    throw ParameterError("select_removals: nnodes must lie in [0, n], got " + std::to_string(nnodes));
  }
  Removal r;
  const Var ref = nn::linear(params.pointer_ref, encoding.nodes);
  Mask mask = Mask::Constant(1, nodes, false);
  mask(0, 0) = true;
  Var input = encoding.pooled;
  Var hidden = encoding.pooled;
  for (int k = 0; k < nnodes; ++k) {
    hidden = nn::gru_step(params.decoder, input, hidden);
    const Var scores = ad::tanh(ad::add_row_broadcast(ref, nn::linear(params.pointer_query, hidden)));
    const Var logits = ad::transpose(ad::matmul(scores, params.pointer_v));
    const Var log_probs = ad::masked_log_softmax(logits, mask);
    const NodeId node = pick(k, log_probs.value());
    if (node <= 0 || node >= nodes || mask(0, node)) {
      throw DeterminismError("select_removals: node " + std::to_string(node) + " is not selectable");
    }
    const Var lp = ad::gather(log_probs, 0, node);
    r.total_log_prob = r.total_log_prob.defined() ? ad::add(r.total_log_prob, lp) : lp;
    r.log_probs.push_back(lp.scalar());
    r.nodes.push_back(node);
    mask(0, node) = true;
    const int row[] = {node};
    input = ad::gather_rows(encoding.nodes, row);
  }
  if (!r.total_log_prob.defined()) r.total_log_prob = ad::scalar_constant(0.0);
  return r;
}

}  // namespace

Removal select_removals(const StateEncoding& encoding, const PerturbParams& params, int nnodes, SelectMode mode,
                        Rng& rng) {
  return run_pointer(encoding, params, nnodes, [&](int, const Matrix& log_probs) {
    NodeId pick = -1;
    if (mode == SelectMode::Greedy) {
      Real best = -std::numeric_limits<Real>::infinity();
      for (Eigen::Index v = 0; v < log_probs.cols(); ++v) {
        if (log_probs(0, v) > best) {
          best = log_probs(0, v);
          pick = static_cast<NodeId>(v);
        }
      }
      return pick;
    }
    const Real u = rng.uniform();
    Real cumulative = 0.0;
    for (Eigen::Index v = 0; v < log_probs.cols(); ++v) {
      if (std::isinf(log_probs(0, v))) continue;
      pick = static_cast<NodeId>(v);
      cumulative += std::exp(log_probs(0, v));
      if (u < cumulative) break;
    }
    return pick;
  });
}

Var removal_log_prob(const StateEncoding& encoding, const PerturbParams& params, const NodeSet& nodes) {
  return run_pointer(encoding, params, static_cast<int>(nodes.size()),
                     [&](int k, const Matrix&) { return nodes[static_cast<std::size_t>(k)]; })
      .total_log_prob;
}

RoutePlan destroy_repair(const CvrpInstance& instance, const RoutePlan& plan, const NodeSet& nodes) {
  RoutePlan out = remove_nodes(instance, plan, nodes);
  for (NodeId v : nodes) out = min_cost_insert(instance, out, v);
  RoutePlan exact = make_plan(instance, std::move(out.routes));
  exact.instance_id = out.instance_id;
  return exact;
}

Transition perturb_once(PerturbState& state, const PerturbParams& params, int nnodes, SelectMode mode) {
  ad::RecordScope off(false);
  const CvrpInstance& instance = *state.instance;
  const Removal removal = select_removals(encode_state(state, params), params, nnodes, mode, state.rng);

  Transition t;
  t.instance = state.instance;
  t.before = state.current;
  t.removed = removal.nodes;
  t.old_log_prob = removal.total_log_prob.scalar();

  RoutePlan candidate = destroy_repair(instance, state.current, removal.nodes);
  t.candidate_cost = candidate.cost;
  const Real mu = state.rng.uniform_open_zero();
  t.accepted = sa_accept(candidate.cost, state.current.cost, state.schedule, mu);
  if (candidate.cost < state.best.cost) state.best = candidate;
  if (t.accepted) {
    t.reward = state.current.cost - candidate.cost;
    set_current(state, std::move(candidate));
  }
  ++state.schedule.t;
  t.after = state.current;
  return t;
}

void initial_random_perturbation(PerturbState& state, int rsteps, Real alpha_rand, Rng& rng) {
  const CvrpInstance& instance = *state.instance;
  const int n = instance.size();
  const int k = std::min(10, n);
  const SaSchedule schedule = SaSchedule::with_alpha(state.schedule.t0, alpha_rand);
  std::vector<NodeId> customers(n);
  std::iota(customers.begin(), customers.end(), 1);
  for (int step = 0; step < rsteps; ++step) {
    for (int i = 0; i < k; ++i) std::swap(customers[i], customers[rng.uniform_int(i, n - 1)]);
    const NodeSet removed(customers.begin(), customers.begin() + k);
    RoutePlan candidate = destroy_repair(instance, state.current, removed);
    const Real mu = rng.uniform_open_zero();
    const bool accept = sa_accept(candidate.cost, state.current.cost, schedule.temperature_at(step), mu);
    if (candidate.cost < state.best.cost) state.best = candidate;
    if (accept) set_current(state, std::move(candidate));
  }
}

// ---------------------------------------------------------------------------
// Actor-critic.

Real td_error(Real reward, Real gamma, Real v_next, Real v_prev) { return reward + gamma * v_next - v_prev; }

Var state_value(const CriticParams& critic, const Matrix& pooled) {
  return nn::critic_value(critic.net, ad::constant(pooled));
}

void critic_update(CriticParams& critic, const std::vector<Matrix>& pooled, const std::vector<Real>& deltas, Real eta) {
  if (pooled.size() != deltas.size()) throw ShapeError("critic_update: one delta per state required");
  for (Real d : deltas) {
    if (!std::isfinite(d)) throw NumericError("critic_update: non-finite TD error");
  }
  if (!std::isfinite(eta)) throw NumericError("critic_update: non-finite learning rate");
  if (pooled.empty()) return;
  Matrix states(static_cast<Eigen::Index>(pooled.size()), pooled.front().cols());
  Matrix weights(1, states.rows());
  for (std::size_t b = 0; b < pooled.size(); ++b) {
    states.row(static_cast<Eigen::Index>(b)) = pooled[b];
    weights(0, static_cast<Eigen::Index>(b)) = deltas[b] / static_cast<Real>(pooled.size());
  }
  ad::RecordScope on(true);
  critic.store.zero_grad();
  ad::backward(ad::matmul(ad::constant(std::move(weights)), state_value(critic, states)));
  critic.store.apply_gradient(eta);
}

Var clipped_surrogate(const Var& log_ratio, Real advantage, Real epsilon) {
  const Var ratio = ad::exp(log_ratio);
  if (!std::isfinite(ratio.scalar())) throw NumericError("ppo: non-finite probability ratio");
  return ad::minimum(ad::scale(ratio, advantage), ad::scale(ad::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon), advantage));
}

namespace {

Var transition_surrogate(const Transition& t, Real advantage, const PerturbParams& params, Real epsilon) {
  const Features features = compute_features(*t.instance, t.before);
  const Var lp = removal_log_prob(encode_features(*t.instance, features, params), params, t.removed);
  return clipped_surrogate(ad::affine(lp, 1.0, -t.old_log_prob), advantage, epsilon);
}

void check_batch(const std::vector<Transition>& batch, const std::vector<Real>& advantages) {
  if (batch.size() != advantages.size()) throw ShapeError("ppo: one advantage per transition required");
  if (batch.empty()) throw ParameterError("ppo: empty batch");
}

}  // namespace

Var ppo_objective(const std::vector<Transition>& batch, const std::vector<Real>& advantages,
                  const PerturbParams& params, Real epsilon) {
  check_batch(batch, advantages);
  Var total;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Var term = transition_surrogate(batch[b], advantages[b], params, epsilon);
    total = total.defined() ? ad::add(total, term) : term;
  }
  return ad::scale(total, 1.0 / static_cast<Real>(batch.size()));
}

Real ppo_actor_gradient(PerturbParams& params, const std::vector<Transition>& batch,
                        const std::vector<Real>& advantages, Real epsilon) {
  check_batch(batch, advantages);
  ad::RecordScope on(true);
  params.store.zero_grad();
  const Real scale = 1.0 / static_cast<Real>(batch.size());
  Real objective = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Var term = ad::scale(transition_surrogate(batch[b], advantages[b], params, epsilon), scale);
    objective += term.scalar();
    if (term.requires_grad()) ad::backward(term);
  }
  if (!std::isfinite(objective)) throw NumericError("ppo: non-finite objective");
  return objective;
}

Real ppo_actor_update(PerturbParams& params, const std::vector<Transition>& batch, const std::vector<Real>& advantages,
                      Real epsilon, Real eta) {
  const Real objective = ppo_actor_gradient(params, batch, advantages, epsilon);
  params.store.apply_gradient(eta);
  return objective;
}

// ---------------------------------------------------------------------------
// Training loop.

nlohmann::json PerturbTrainConfig::to_json() const {
  return {{"tsteps", tsteps},   {"bsize", bsize},       {"perturbations", perturbations},
          {"nnodes", nnodes},   {"buses", buses},       {"eta", eta},
          {"critic_eta", critic_eta}, {"gamma", gamma}, {"epsilon", epsilon},
          {"t0", t0},           {"steps_t1", steps_t1}, {"rsteps", rsteps},
          {"alpha_rand", alpha_rand}, {"adam", adam}, {"seed", seed}};
}

PerturbTrainConfig PerturbTrainConfig::from_json(const nlohmann::json& j) {
  PerturbTrainConfig c;
  c.tsteps = j.at("tsteps").get<int>();
  c.bsize = j.at("bsize").get<int>();
  c.perturbations = j.at("perturbations").get<int>();
  c.nnodes = j.at("nnodes").get<int>();
  c.buses = j.at("buses").get<int>();
  c.eta = j.at("eta").get<Real>();
  c.critic_eta = j.at("critic_eta").get<Real>();
  c.gamma = j.at("gamma").get<Real>();
  c.epsilon = j.at("epsilon").get<Real>();
  c.t0 = j.at("t0").get<Real>();
  c.steps_t1 = j.at("steps_t1").get<int>();
  c.rsteps = j.at("rsteps").get<int>();
  c.alpha_rand = j.at("alpha_rand").get<Real>();
  c.adam = j.at("adam").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

namespace {

std::size_t draw(PoolCursor& cursor, std::size_t pool_size, Rng& rng) {
  if (cursor.order.size() != pool_size || cursor.next >= cursor.order.size()) {
    cursor.order.resize(pool_size);
    std::iota(cursor.order.begin(), cursor.order.end(), std::size_t{0});
    rng.shuffle(cursor.order);
    cursor.next = 0;
  }
  return cursor.order[cursor.next++];
}

Matrix pooled_embedding(const CvrpInstance& instance, const RoutePlan& plan, const PerturbParams& params) {
  return encode_features(instance, compute_features(instance, plan), params).pooled.value();
}

}  // namespace

PerturbTrainState PerturbTrainState::start(const PerturbTrainConfig& config) {
  return {Rng(config.seed), {}, Adam(config.eta), 0};
}

PerturbTrainReport train_perturbator(const std::vector<StartingPoint>& pool, PerturbParams& params,
                                     CriticParams& critic, const PerturbTrainConfig& config,
                                     PerturbTrainState& train) {
  Rng& rng = train.rng;
  PoolCursor& cursor = train.cursor;
  PerturbTrainReport report;
  if (config.tsteps <= 0) return report;
  if (pool.empty() || config.bsize < 1 || config.perturbations < 1) {
    throw ParameterError("train_perturbator: empty buffer (needs a pool, bsize >= 1 and perturbations >= 1)");
  }
  if (config.buses < 0 || config.nnodes < 0) throw ParameterError("train_perturbator: negative buses or nnodes");

  for (int step = 0; step < config.tsteps; ++step) {
    const auto started = std::chrono::steady_clock::now();
    std::vector<PerturbState> states;
    std::vector<Real> start_cost;
    for (int b = 0; b < config.bsize; ++b) {
      const StartingPoint& sp = pool[draw(cursor, pool.size(), rng)];
      start_cost.push_back(sp.plan.cost);
      states.push_back(make_state(sp.instance, sp.plan, SaSchedule::reaching_one(config.t0, config.steps_t1),
                                  rng.next()));
      if (config.rsteps > 0) initial_random_perturbation(states.back(), config.rsteps, config.alpha_rand, rng);
    }

    std::vector<Transition> buffer;
    buffer.reserve(static_cast<std::size_t>(config.perturbations) * states.size());
    for (int p = 0; p < config.perturbations; ++p) {
      for (auto& s : states) {
        buffer.push_back(perturb_once(s, params, std::min(config.nnodes, s.instance->size()), SelectMode::Sample));
      }
    }

    Real change = 0.0;
    Real cost = 0.0;
    for (std::size_t b = 0; b < states.size(); ++b) {
      change += 100.0 * (states[b].best.cost - start_cost[b]) / start_cost[b];
      cost += states[b].best.cost;
    }
    report.percent_change.push_back(change / static_cast<Real>(states.size()));
    report.mean_cost.push_back(cost / static_cast<Real>(states.size()));

    Real objective = 0.0;
    Real td_square = 0.0;
    std::size_t td_count = 0;
    std::size_t updates = 0;
    const auto chunk = static_cast<std::size_t>(config.bsize);
    for (int pass = 0; pass < config.buses; ++pass) {
      for (std::size_t begin = 0; begin < buffer.size(); begin += chunk) {
        const std::size_t end = std::min(buffer.size(), begin + chunk);
        const std::vector<Transition> batch(buffer.begin() + static_cast<std::ptrdiff_t>(begin),
                                            buffer.begin() + static_cast<std::ptrdiff_t>(end));
        std::vector<Matrix> next_states;
        std::vector<Real> deltas;
        {
          ad::RecordScope off(false);
          for (const auto& t : batch) {
            const Matrix prev = pooled_embedding(*t.instance, t.before, params);
            next_states.push_back(pooled_embedding(*t.instance, t.after, params));
            const Real v_prev = state_value(critic, prev).scalar();
            const Real v_next = state_value(critic, next_states.back()).scalar();
            deltas.push_back(td_error(t.reward, config.gamma, v_next, v_prev));
            td_square += deltas.back() * deltas.back();
            ++td_count;
          }
        }
        critic_update(critic, next_states, deltas, config.critic_eta);
        if (config.adam) {
          objective += ppo_actor_gradient(params, batch, deltas, config.epsilon);
          train.actor_optimizer.step(params.store, +1.0);
        } else {
          objective += ppo_actor_update(params, batch, deltas, config.epsilon, config.eta);
        }
        ++updates;
      }
    }
    report.actor_objective.push_back(updates ? objective / static_cast<Real>(updates) : 0.0);
    report.critic_loss.push_back(td_count ? td_square / static_cast<Real>(td_count) : 0.0);
    report.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    ++train.steps_done;
  }
  return report;
}

RoutePlan improve(std::shared_ptr<const CvrpInstance> instance, const RoutePlan& start, const PerturbParams& params,
                  int perturbations, int nnodes, Real t0, int steps_t1, std::uint64_t seed) {
  const int k = std::min(nnodes, instance->size());
  PerturbState state = make_state(std::move(instance), start, SaSchedule::reaching_one(t0, steps_t1), seed);
  for (int p = 0; p < perturbations; ++p) perturb_once(state, params, k, SelectMode::Sample);
  return state.best;
}

}  // namespace cdcp::perturbator
