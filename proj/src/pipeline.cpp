#include "cdcp/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <new>
#include <sstream>

#include "cdcp/checkpoint.hpp"
#include "cdcp/errors.hpp"
#include "cdcp/io.hpp"

namespace cdcp::pipeline {

using constructor::ConstructorParams;
using perturbator::PerturbParams;
using Clock = std::chrono::steady_clock;

namespace {

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Sub-streams of the master seed.
enum Stream : std::uint64_t {
  kConstructorInit = 11,
  kBaselineEval = 12,
  kTrainBatches = 13,
  kTrainSampling = 14,
  kActorInit = 21,
  kCriticInit = 22,
  kPerturbTraining = 23,
};

std::uint64_t stream(std::uint64_t seed, Stream s) { return Rng::derive(seed, s); }

}  // namespace

// ---------------------------------------------------------------------------
// TrainConfig.

TrainConfig TrainConfig::toy(int n) {
  TrainConfig c;
  c.n = n;
  return c;
}

TrainConfig TrainConfig::full(int n) {
  if (n < 1) throw ParameterError("full profile: n must be positive");
  TrainConfig c;
  c.profile = "full";
  c.n = n;
  c.capacity = n <= 20 ? 30 : n <= 50 ? 40 : 50;
  c.width = 128;
  c.layers = 3;
  c.heads = 8;
  c.batch_size = n <= 50 ? 512 : 256;
  c.batches_per_epoch = 2500;
  c.epochs = n <= 20 ? 146 : n <= 50 ? 65 : 100;
  c.learning_rate = 3e-4;
  c.eval_size = 10000;
  c.mem_efficient = n > 20;
  c.ninstances = 13056;
  c.k = 100;
  c.node_width = 64;
  c.edge_width = 16;
  c.egate_layers = 3;
  c.critic_hidden = 64;
  c.tsteps = n <= 20 ? 600 : n <= 50 ? 700 : 1000;
  c.bsize = 128;
  c.perturbations = 100;
  c.nnodes = 10;
  c.eval_perturbations = 1000;
  return c;
}

constructor::ConstructorConfig TrainConfig::constructor_model() const { return {width, layers, heads, logit_clip}; }

perturbator::PerturbatorConfig TrainConfig::perturbator_model() const {
  return {node_width, edge_width, egate_layers, critic_hidden};
}

perturbator::PerturbTrainConfig TrainConfig::perturbator_training() const {
  perturbator::PerturbTrainConfig c;
  c.tsteps = tsteps;
  c.bsize = bsize;
  c.perturbations = perturbations;
  c.nnodes = nnodes;
  c.buses = buses;
  c.eta = eta;
  c.critic_eta = critic_eta;
  c.gamma = gamma;
  c.epsilon = epsilon;
  c.t0 = t0;
  c.steps_t1 = steps_t1;
  c.rsteps = rsteps;
  c.alpha_rand = alpha_rand;
  c.seed = stream(seed, kPerturbTraining);
  return c;
}

void TrainConfig::check() const {
  auto require = [](bool ok, const char* field) {
    if (!ok) throw ParameterError(std::string("invalid config value for ") + field);
  };
  require(profile == "toy" || profile == "full", "profile");
  require(n >= 1, "n");
  require(capacity >= 9, "capacity");
  require(width >= 1 && heads >= 1 && width % heads == 0, "width/heads");
  require(layers >= 0, "layers");
  require(logit_clip > 0.0, "logit_clip");
  require(batch_size >= 1, "batch_size");
  require(batches_per_epoch >= 1, "batches_per_epoch");
  require(epochs >= 0, "epochs");
  require(learning_rate >= 0.0, "learning_rate");
  require(eval_size >= 1, "eval_size");
  require(ninstances >= 1, "ninstances");
  require(k >= 1, "k");
  require(node_width >= 1 && edge_width >= 1 && egate_layers >= 0 && critic_hidden >= 1, "perturbator widths");
  require(tsteps >= 0, "tsteps");
  require(bsize >= 1, "bsize");
  require(perturbations >= 1, "perturbations");
  require(nnodes >= 1, "nnodes");
  require(buses >= 0, "buses");
  require(eta >= 0.0 && critic_eta >= 0.0, "eta");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma");
  require(epsilon > 0.0 && epsilon < 1.0, "epsilon");
  require(t0 >= 1.0, "t0");
  require(steps_t1 >= 1, "steps_t1");
  require(rsteps >= 0, "rsteps");
  require(alpha_rand >= 0.0 && alpha_rand <= 1.0, "alpha_rand");
  require(eval_perturbations >= 0, "eval_perturbations");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"profile", profile},
          {"n", n},
          {"capacity", capacity},
          {"seed", seed},
          {"width", width},
          {"layers", layers},
          {"heads", heads},
          {"logit_clip", logit_clip},
          {"batch_size", batch_size},
          {"batches_per_epoch", batches_per_epoch},
          {"epochs", epochs},
          {"learning_rate", learning_rate},
          {"eval_size", eval_size},
          {"mem_efficient", mem_efficient},
          {"ninstances", ninstances},
          {"k", k},
          {"node_width", node_width},
          {"edge_width", edge_width},
          {"egate_layers", egate_layers},
          {"critic_hidden", critic_hidden},
          {"tsteps", tsteps},
          {"bsize", bsize},
          {"perturbations", perturbations},
          {"nnodes", nnodes},
          {"buses", buses},
          {"eta", eta},
          {"critic_eta", critic_eta},
          {"gamma", gamma},
          {"epsilon", epsilon},
          {"t0", t0},
          {"steps_t1", steps_t1},
          {"rsteps", rsteps},
          {"alpha_rand", alpha_rand},
          {"eval_perturbations", eval_perturbations}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j, const TrainConfig& base) {
  if (!j.is_object()) throw ParameterError("config must be a JSON object");
  nlohmann::json merged = base.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!merged.contains(key)) throw ParameterError("unknown config key '" + key + "'");
    merged[key] = value;
  }
  TrainConfig c;
  try {
    c.profile = merged.at("profile").get<std::string>();
    c.n = merged.at("n").get<int>();
    c.capacity = merged.at("capacity").get<int>();
    c.seed = merged.at("seed").get<std::uint64_t>();
    c.width = merged.at("width").get<int>();
    c.layers = merged.at("layers").get<int>();
    c.heads = merged.at("heads").get<int>();
    c.logit_clip = merged.at("logit_clip").get<Real>();
    c.batch_size = merged.at("batch_size").get<int>();
    c.batches_per_epoch = merged.at("batches_per_epoch").get<int>();
    c.epochs = merged.at("epochs").get<int>();
    c.learning_rate = merged.at("learning_rate").get<Real>();
    c.eval_size = merged.at("eval_size").get<int>();
    c.mem_efficient = merged.at("mem_efficient").get<bool>();
    c.ninstances = merged.at("ninstances").get<int>();
    c.k = merged.at("k").get<int>();
    c.node_width = merged.at("node_width").get<int>();
    c.edge_width = merged.at("edge_width").get<int>();
    c.egate_layers = merged.at("egate_layers").get<int>();
    c.critic_hidden = merged.at("critic_hidden").get<int>();
    c.tsteps = merged.at("tsteps").get<int>();
    c.bsize = merged.at("bsize").get<int>();
    c.perturbations = merged.at("perturbations").get<int>();
    c.nnodes = merged.at("nnodes").get<int>();
    c.buses = merged.at("buses").get<int>();
    c.eta = merged.at("eta").get<Real>();
    c.critic_eta = merged.at("critic_eta").get<Real>();
    c.gamma = merged.at("gamma").get<Real>();
    c.epsilon = merged.at("epsilon").get<Real>();
    c.t0 = merged.at("t0").get<Real>();
    c.steps_t1 = merged.at("steps_t1").get<int>();
    c.rsteps = merged.at("rsteps").get<int>();
    c.alpha_rand = merged.at("alpha_rand").get<Real>();
    c.eval_perturbations = merged.at("eval_perturbations").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("config has a value of the wrong type: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Data.

std::vector<CvrpInstance> generate_dataset(int n, int capacity, int count, std::uint64_t seed) {
  if (count < 0) throw ParameterError("generate_dataset: count must be >= 0");
  std::vector<CvrpInstance> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(sample_instance(n, capacity, Rng::derive(seed, static_cast<std::uint64_t>(i))));
  return out;
}

void generate_dataset(int n, int capacity, int count, std::uint64_t seed, const std::string& path) {
  io::write_instances(path, generate_dataset(n, capacity, count, seed));
}

std::vector<RoutePlan> build_initial_solutions(const std::vector<CvrpInstance>& instances, const ConstructorParams& params,
                                               int k, std::uint64_t seed) {
  if (k < 1) throw ParameterError("build_initial_solutions: k must be >= 1");
  ad::RecordScope off(false);
  std::vector<RoutePlan> out;
  out.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    out.push_back(constructor::sample_best_of_k(instances[i], params, k, Rng::derive(seed, i)));
  }
  return out;
}

Real gap_percent(Real cost, Real reference) {
  if (!(reference > 0.0)) throw ParameterError("gap_percent: reference cost must be positive");
  return 100.0 * (cost - reference) / reference;
}

// ---------------------------------------------------------------------------
// Constructor training.

ConstructorTrainer::ConstructorTrainer(const TrainConfig& config)
    : ConstructorTrainer(config, ConstructorParams::init(config.constructor_model(), stream(config.seed, kConstructorInit)),
                         {}, Adam(config.learning_rate), 0) {
  baseline_ = constructor::make_baseline(params_, eval_set_);
}

ConstructorTrainer::ConstructorTrainer(const TrainConfig& config, ConstructorParams params,
                                       constructor::BaselineParams baseline, Adam optimizer, long batches_done)
    : config_(config),
      params_(std::move(params)),
      baseline_(std::move(baseline)),
      optimizer_(std::move(optimizer)),
      batches_done_(batches_done) {
  config_.check();
  eval_set_ = generate_dataset(config_.n, config_.capacity, config_.eval_size, stream(config_.seed, kBaselineEval));
}

ConstructorStepReport ConstructorTrainer::step() {
  const auto b = static_cast<std::uint64_t>(batches_done_);
  const auto batch =
      generate_dataset(config_.n, config_.capacity, config_.batch_size, Rng::derive(stream(config_.seed, kTrainBatches), b));
  const auto strategy =
      config_.mem_efficient ? constructor::GradientStrategy::MemoryEfficient : constructor::GradientStrategy::Original;
  const constructor::GradientReport g = constructor::reinforce_gradient(
      batch, params_, baseline_, Rng::derive(stream(config_.seed, kTrainSampling), b), strategy);
  optimizer_.step(params_.store, -1.0);
  ++batches_done_;
  if (batches_done_ % config_.batches_per_epoch == 0) {
    baseline_ = constructor::maybe_update_baseline(params_, baseline_, eval_set_);
  }
  ConstructorStepReport r;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    r.mean_cost += g.costs[i] / static_cast<Real>(batch.size());
    r.baseline_cost += g.baseline_costs[i] / static_cast<Real>(batch.size());
  }
  r.loss = g.loss;
  r.seconds = g.seconds;
  r.peak_retained = g.peak_retained;
  return r;
}

std::vector<ConstructorStepReport> ConstructorTrainer::run(int batches) {
  std::vector<ConstructorStepReport> out;
  for (int i = 0; i < batches; ++i) out.push_back(step());
  return out;
}

nlohmann::json ConstructorTrainer::to_json() const {
  return {{"config", config_.to_json()},
          {"params", params_.store.to_json()},
          {"baseline_params", baseline_.params.store.to_json()},
          {"baseline_cost", baseline_.eval_cost},
          {"optimizer", optimizer_.to_json()},
          {"batches_done", batches_done_}};
}

ConstructorTrainer ConstructorTrainer::from_json(const nlohmann::json& j) {
  try {
    const TrainConfig config = TrainConfig::from_json(j.at("config"), TrainConfig{});
    const auto model = config.constructor_model();
    ConstructorParams params = ConstructorParams::from_store(model, ParameterStore::from_json(j.at("params")));
    constructor::BaselineParams baseline{
        ConstructorParams::from_store(model, ParameterStore::from_json(j.at("baseline_params"))),
        j.at("baseline_cost").get<Real>()};
    return ConstructorTrainer(config, std::move(params), std::move(baseline), Adam::from_json(j.at("optimizer")),
                              j.at("batches_done").get<long>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("constructor checkpoint: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Perturbator training.

std::vector<perturbator::StartingPoint> make_pool(const std::vector<CvrpInstance>& instances,
                                                  const std::vector<RoutePlan>& plans) {
  if (instances.size() != plans.size()) throw ParameterError("make_pool: one solution per instance required");
  std::vector<perturbator::StartingPoint> pool;
  pool.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (!plans[i].instance_id.empty() && plans[i].instance_id != instances[i].id) {
      throw ParameterError("make_pool: solution " + std::to_string(i) + " belongs to " + plans[i].instance_id +
                           ", not " + instances[i].id);
    }
    const auto violations = validate(instances[i], plans[i]);
    if (!violations.empty()) {
      throw StructuralError("make_pool: solution for " + instances[i].id + " is invalid: " + violations.front().message);
    }
    pool.push_back({std::make_shared<const CvrpInstance>(instances[i]), plans[i]});
  }
  return pool;
}

PerturbatorTrainer::PerturbatorTrainer(const TrainConfig& config, std::vector<perturbator::StartingPoint> pool)
    : config_(config),
      pool_(std::move(pool)),
      params_(PerturbParams::init(config.perturbator_model(), stream(config.seed, kActorInit))),
      critic_(perturbator::CriticParams::init(config.perturbator_model(), stream(config.seed, kCriticInit))),
      state_(perturbator::PerturbTrainState::start(config.perturbator_training())) {
  config_.check();
  if (pool_.empty()) throw ParameterError("perturbator training needs a non-empty pool");
}

perturbator::PerturbTrainReport PerturbatorTrainer::run(int tsteps) {
  perturbator::PerturbTrainConfig c = config_.perturbator_training();
  c.tsteps = tsteps;
  return perturbator::train_perturbator(pool_, params_, critic_, c, state_);
}

nlohmann::json PerturbatorTrainer::to_json() const {
  std::vector<std::uint64_t> order(state_.cursor.order.begin(), state_.cursor.order.end());
  return {{"config", config_.to_json()},
          {"params", params_.store.to_json()},
          {"critic", critic_.store.to_json()},
          {"rng", state_.rng.serialize()},
          {"pool_order", order},
          {"pool_next", state_.cursor.next},
          {"optimizer", state_.actor_optimizer.to_json()},
          {"steps_done", state_.steps_done}};
}

PerturbatorTrainer PerturbatorTrainer::from_json(const nlohmann::json& j, std::vector<perturbator::StartingPoint> pool) {
  try {
    PerturbatorTrainer t(TrainConfig::from_json(j.at("config"), TrainConfig{}), std::move(pool));
    t.params_ = PerturbParams::from_store(t.config_.perturbator_model(), ParameterStore::from_json(j.at("params")));
    t.critic_ = perturbator::CriticParams::from_store(ParameterStore::from_json(j.at("critic")));
    t.state_.rng.deserialize(j.at("rng").get<std::string>());
    const auto order = j.at("pool_order").get<std::vector<std::uint64_t>>();
    t.state_.cursor.order.assign(order.begin(), order.end());
    t.state_.cursor.next = j.at("pool_next").get<std::size_t>();
    t.state_.actor_optimizer = Adam::from_json(j.at("optimizer"));
    t.state_.steps_done = j.at("steps_done").get<long>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("perturbator checkpoint: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Saved models.

namespace {

constexpr const char* kConstructorKind = "constructor";
constexpr const char* kPerturbatorKind = "perturbator";

}  // namespace

void save_constructor(const std::string& path, const ConstructorTrainer& trainer) {
  checkpoint::save(path, kConstructorKind, trainer.to_json());
}

ConstructorTrainer load_constructor_trainer(const std::string& path) {
  return ConstructorTrainer::from_json(checkpoint::load(path, kConstructorKind));
}

ConstructorModel load_constructor(const std::string& path) {
  const nlohmann::json j = checkpoint::load(path, kConstructorKind);
  try {
    TrainConfig config = TrainConfig::from_json(j.at("config"), TrainConfig{});
    ConstructorParams params =
        ConstructorParams::from_store(config.constructor_model(), ParameterStore::from_json(j.at("params")));
    return {std::move(config), std::move(params)};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void save_perturbator(const std::string& path, const PerturbatorTrainer& trainer) {
  checkpoint::save(path, kPerturbatorKind, trainer.to_json());
}

PerturbatorTrainer load_perturbator_trainer(const std::string& path, std::vector<perturbator::StartingPoint> pool) {
  return PerturbatorTrainer::from_json(checkpoint::load(path, kPerturbatorKind), std::move(pool));
}

PerturbatorModel load_perturbator(const std::string& path) {
  const nlohmann::json j = checkpoint::load(path, kPerturbatorKind);
  try {
    TrainConfig config = TrainConfig::from_json(j.at("config"), TrainConfig{});
    PerturbParams params = PerturbParams::from_store(config.perturbator_model(), ParameterStore::from_json(j.at("params")));
    return {std::move(config), std::move(params)};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Evaluation.

namespace {

void check_size(const CvrpInstance& instance, const TrainConfig& config, const char* what, bool allowed) {
  if (allowed || instance.size() == config.n) return;
  throw SizeMismatchError(std::string(what) + " was trained on n=" + std::to_string(config.n) + " but instance " +
                          instance.id + " has n=" + std::to_string(instance.size()) +
                          " (use --allow-size-mismatch to evaluate anyway)");
}

void require_valid(const CvrpInstance& instance, const RoutePlan& plan, const char* method) {
  const auto violations = validate(instance, plan);
  if (!violations.empty()) {
    throw StructuralError(std::string(method) + " produced an invalid plan for " + instance.id + ": " +
                          violations.front().message);
  }
}

}  // namespace

EvalOutput evaluate(const std::vector<CvrpInstance>& instances, const ConstructorModel& constructor_model,
                    const PerturbatorModel* perturbator_model, const EvalOptions& options) {
  if (options.k < 1) throw ParameterError("evaluate: k must be >= 1");
  if (options.perturbations < 0) throw ParameterError("evaluate: perturbations must be >= 0");
  for (const auto& instance : instances) {
    check_size(instance, constructor_model.config, "constructor", options.allow_size_mismatch);
    if (perturbator_model) check_size(instance, perturbator_model->config, "perturbator", options.allow_size_mismatch);
  }
  ad::RecordScope off(false);
  EvalOutput out;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const CvrpInstance& instance = instances[i];
    const std::uint64_t seed = Rng::derive(options.seed, i);
    if (options.include_greedy) {
      const auto start = Clock::now();
      RoutePlan plan =
          constructor::construct(instance, constructor_model.params, constructor::DecodeMode::Greedy, seed).plan;
      const double ms = elapsed_ms(start);
      require_valid(instance, plan, kMethodGreedy);
      out.rows.push_back({instance.id, kMethodGreedy, plan.cost, std::nullopt, ms, seed});
      out.greedy.push_back(std::move(plan));
    }
    const auto start = Clock::now();
    RoutePlan initial = constructor::sample_best_of_k(instance, constructor_model.params, options.k, seed);
    const double construct_ms = elapsed_ms(start);
    require_valid(instance, initial, kMethodSampled);
    out.rows.push_back({instance.id, kMethodSampled, initial.cost, std::nullopt, construct_ms, seed});
    if (perturbator_model) {
      const auto perturb_start = Clock::now();
      RoutePlan improved = perturbator::improve(std::make_shared<const CvrpInstance>(instance), initial,
                                                perturbator_model->params, options.perturbations, options.nnodes,
                                                options.t0, options.steps_t1, Rng::derive(seed, 1));
      const double ms = construct_ms + elapsed_ms(perturb_start);
      require_valid(instance, improved, kMethodCombined);
      if (improved.cost > initial.cost) throw std::logic_error("evaluate: best plan is worse than its starting plan");
      out.rows.push_back({instance.id, kMethodCombined, improved.cost, std::nullopt, ms, seed});
      out.final.push_back(std::move(improved));
    } else {
      out.final.push_back(initial);
    }
    out.initial.push_back(std::move(initial));
  }
  return out;
}

void attach_gaps(std::vector<ResultRow>& rows, const std::map<std::string, Real>& reference) {
  for (auto& row : rows) {
    const auto it = reference.find(row.instance_id);
    if (it != reference.end()) row.gap_percent = gap_percent(row.cost, it->second);
  }
}

std::string results_csv(const std::vector<ResultRow>& rows, bool include_timing) {
  std::ostringstream out;
  out << "instance_id,method,cost,gap_percent,time_ms,seed\n";
  char buffer[160];
  for (const auto& row : rows) {
    char gap[48] = "";
    if (row.gap_percent) std::snprintf(gap, sizeof gap, "%.6f", *row.gap_percent);
    std::snprintf(buffer, sizeof buffer, "%.9f,%s,%.3f,%llu", row.cost, gap, include_timing ? row.time_ms : 0.0,
                  static_cast<unsigned long long>(row.seed));
    out << row.instance_id << ',' << row.method << ',' << buffer << '\n';
  }
  return out.str();
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows, bool include_timing) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << results_csv(rows, include_timing);
  if (!out) throw std::runtime_error("failed writing " + path);
}

// ---------------------------------------------------------------------------
// Benchmark.

BenchResult bench_memory(const std::vector<int>& sizes, const BenchOptions& options) {
  if (sizes.size() < 4) throw ParameterError("bench_memory: at least 4 sizes are needed for the fits");
  if (options.repeats < 1 || options.batch_size < 1) throw ParameterError("bench_memory: repeats and batch must be >= 1");
  BenchResult result;
  const ConstructorParams base = ConstructorParams::init(options.model, options.seed);
  for (int n : sizes) {
    const auto batch = generate_dataset(n, options.capacity, options.batch_size, Rng::derive(options.seed, n));
    for (const auto strategy : {constructor::GradientStrategy::Original, constructor::GradientStrategy::MemoryEfficient}) {
      BenchRow row;
      row.n = n;
      row.strategy = strategy == constructor::GradientStrategy::Original ? "original" : "memeff";
      try {
        ConstructorParams params = base.clone();
        const constructor::BaselineParams baseline = constructor::make_baseline(params, {});
        for (int r = 0; r < options.repeats; ++r) {
          const auto g = constructor::reinforce_gradient(batch, params, baseline, Rng::derive(options.seed, r), strategy);
          row.peak_retained = std::max(row.peak_retained, g.peak_retained);
          row.peak_nodes = std::max(row.peak_nodes, g.peak_nodes);
          row.seconds += (g.seconds - g.baseline_seconds) / options.repeats;
          row.baseline_seconds += g.baseline_seconds / options.repeats;
        }
      } catch (const std::bad_alloc&) {
        row.error = "out of memory";
      } catch (const std::length_error& e) {
        row.error = std::string("allocation failed: ") + e.what();
      }
      result.rows.push_back(row);
    }
  }
  for (const char* name : {"original", "memeff"}) {
    std::vector<Real> xs, ys;
    for (const auto& row : result.rows) {
      if (row.strategy == name && row.error.empty()) {
        xs.push_back(row.n);
        ys.push_back(static_cast<Real>(row.peak_retained));
      }
    }
    if (xs.size() < 4) continue;
    (std::string(name) == "original" ? result.original_fit : result.memeff_fit) = fit_complexity(xs, ys);
  }
  return result;
}

std::string bench_csv(const BenchResult& result) {
  std::ostringstream out;
  out << "n,strategy,peak_retained,peak_nodes,seconds,baseline_seconds,error\n";
  char buffer[64];
  for (const auto& row : result.rows) {
    std::snprintf(buffer, sizeof buffer, "%.6f,%.6f", row.seconds, row.baseline_seconds);
    out << row.n << ',' << row.strategy << ',' << row.peak_retained << ',' << row.peak_nodes << ',' << buffer << ','
        << row.error << '\n';
  }
  return out.str();
}

}  // namespace cdcp::pipeline
