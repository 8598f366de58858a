// Acceptance gate: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes. argv[1] is the path of the command-line tool.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cdcp/annealing.hpp"
#include "cdcp/constructor.hpp"
#include "cdcp/errors.hpp"
#include "cdcp/gradcheck.hpp"
#include "cdcp/io.hpp"
#include "cdcp/oracle.hpp"
#include "cdcp/perturbator.hpp"
#include "cdcp/pipeline.hpp"
#include "dense_oracles.hpp"
#include "test_util.hpp"

using namespace cdcp;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr Real kStrategyTolerance = 1e-6;
constexpr int kStrategyCases = 20;
constexpr int kStrategyN = 12;
constexpr int kStrategyBatch = 8;

constexpr Real kCubicLo = 2.6, kCubicHi = 3.4;
constexpr Real kQuadraticLo = 1.7, kQuadraticHi = 2.3;
constexpr Real kSeparationLo = 1.5, kSeparationHi = 2.5;
constexpr Real kTimeRatioLo = 2.0, kTimeRatioHi = 4.0;

constexpr Real kGradTolerance = 1e-6;
constexpr testing::Wide kGradStep = 1e-3L;
constexpr Real kGradFloor = 1e-8;
constexpr Real kForwardTolerance = 1e-10;
constexpr int kGradRepetitions = 10;

constexpr int kAcceptDraws = 100000;
constexpr Real kAcceptTolerance = 0.005;
constexpr Real kIdentityTolerance = 1e-9;

constexpr int kInsertionCases = 1000;

constexpr Real kOracleGapLimit = 0.10;
constexpr int kHeldOut = 100;

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer, format, args...);
  return buffer;
}

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, Real scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

// ---------------------------------------------------------------------------

Outcome strategy_equivalence() {
  Real worst = 0.0;
  Real worst_coordinate = 0.0;
  for (int c = 0; c < kStrategyCases; ++c) {
    const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(c);
    constructor::ConstructorParams params = constructor::ConstructorParams::init({16, 2, 4, 10.0}, seed);
    const auto baseline = constructor::make_baseline(constructor::ConstructorParams::init({16, 2, 4, 10.0}, seed + 500), {});
    const auto batch = pipeline::generate_dataset(kStrategyN, 30, kStrategyBatch, seed);
    const auto a = constructor::reinforce_gradient(batch, params, baseline, seed, constructor::GradientStrategy::Original);
    const auto b =
        constructor::reinforce_gradient(batch, params, baseline, seed, constructor::GradientStrategy::MemoryEfficient);
    if (a.costs != b.costs) return {false, fmt("case %d: the two strategies sampled different solutions", c)};
    const Real scale = a.gradient.cwiseAbs().maxCoeff();
    worst = std::max(worst, (a.gradient - b.gradient).cwiseAbs().maxCoeff() / (scale + 1e-12));
    for (Eigen::Index i = 0; i < a.gradient.size(); ++i) {
      const Real d = std::abs(a.gradient[i] - b.gradient[i]);
      if (d > 0.0) worst_coordinate = std::max(worst_coordinate, d / (std::abs(a.gradient[i]) + std::abs(b.gradient[i])));
    }
  }
  return {worst < kStrategyTolerance,
          fmt("max |g3-g4|/|g3|inf = %.3g over %d cases (largest per-coordinate relative difference %.3g)", worst,
              kStrategyCases, worst_coordinate)};
}

// ---------------------------------------------------------------------------

pipeline::BenchOptions bench_options() {
  pipeline::BenchOptions o;
  o.model = {32, 2, 16, 10.0};
  o.capacity = 20;
  o.batch_size = 8;
  o.repeats = 3;
  o.seed = 7;
  return o;
}

struct BenchSummary {
  pipeline::BenchResult result;
  std::map<int, std::pair<const pipeline::BenchRow*, const pipeline::BenchRow*>> by_size;
};

const BenchSummary& bench() {
  static BenchSummary summary = [] {
    BenchSummary s;
    s.result = pipeline::bench_memory({10, 20, 40, 80}, bench_options());
    return s;
  }();
  if (summary.by_size.empty()) {
    for (const auto& row : summary.result.rows) {
      auto& slot = summary.by_size[row.n];
      (row.strategy == "original" ? slot.first : slot.second) = &row;
    }
  }
  return summary;
}

Outcome memory_reduction() {
  const auto& s = bench();
  for (const auto& row : s.result.rows) {
    if (!row.error.empty()) return {false, "n=" + std::to_string(row.n) + " " + row.strategy + ": " + row.error};
  }
  if (!s.result.original_fit || !s.result.memeff_fit) return {false, "fits missing"};
  const Real e3 = s.result.original_fit->dominant_exponent;
  const Real e4 = s.result.memeff_fit->dominant_exponent;
  auto ratio = [&](int n) {
    const auto& [a, b] = s.by_size.at(n);
    return static_cast<Real>(a->peak_retained) / static_cast<Real>(b->peak_retained);
  };
  const Real g40 = ratio(40) / ratio(20);
  const Real g80 = ratio(80) / ratio(40);
  const bool pass = e3 >= kCubicLo && e3 <= kCubicHi && e4 >= kQuadraticLo && e4 <= kQuadraticHi &&
                    g40 >= kSeparationLo && g40 <= kSeparationHi && g80 >= kSeparationLo && g80 <= kSeparationHi;
  std::string peaks;
  for (const auto& [n, rows] : s.by_size) {
    peaks += fmt(" n=%d %zu/%zu", n, rows.first->peak_retained, rows.second->peak_retained);
  }
  return {pass, fmt("exponent original %.2f, memeff %.2f; peak ratio growth %.2f (20->40), %.2f (40->80); peaks", e3,
                    e4, g40, g80) +
                    peaks};
}

Outcome runtime_tradeoff() {
  const auto& s = bench();
  const auto& [a, b] = s.by_size.at(80);
  if (!a->error.empty() || !b->error.empty()) return {false, "n=80 benchmark failed"};
  const Real ratio = b->seconds / a->seconds;
  return {ratio >= kTimeRatioLo && ratio <= kTimeRatioHi,
          fmt("memeff/original per-batch time at n=80: %.2f (%.4fs vs %.4fs; greedy baseline rollouts %.4fs excluded)",
              ratio, b->seconds, a->seconds, a->baseline_seconds)};
}

// ---------------------------------------------------------------------------

// Each block's backward pass is compared with finite differences of an
// independent long-double implementation of the same function.
Outcome gradient_correctness() {
  using ad::Var;
  using testing::Pieces;
  using testing::WideParams;
  using testing::WMatrix;
  Rng rng(4242);
  std::map<std::string, Real> worst;
  Real forward = 0.0;
  auto check = [&](const std::string& block, const std::function<Var()>& tape,
                   const std::function<testing::Wide(const WideParams&, Pieces&)>& dense, std::vector<Var> params) {
    const auto r = testing::wide_grad_check(tape, dense, params, kGradStep, kGradFloor);
    worst[block] = std::max(worst[block], r.max_relative_error);
    forward = std::max(forward, r.value_error);
  };
  auto project = [](const Var& v, const Matrix& m) { return ad::sum(ad::mul(v, ad::constant(m))); };
  auto wproject = [](const WMatrix& v, const Matrix& m) { return v.cwiseProduct(m.cast<testing::Wide>()).sum(); };

  for (int rep = 0; rep < kGradRepetitions; ++rep) {
    const int nodes = rng.uniform_int(3, 6);
    const int heads = rng.uniform_int(1, 3);
    const int width = heads * rng.uniform_int(1, 3);
    const int edge_width = rng.uniform_int(1, 3);
    ParameterStore store;
    const auto attn = nn::MhaLayer::create(store, "mha", width, heads, rng);
    const auto egate = nn::EgateLayer::create(store, "egate", width, edge_width, rng);
    const auto cell = nn::GruCell::create(store, "gru", width, width + 1, rng);
    const auto critic = nn::Critic::create(store, "critic", width, rng.uniform_int(2, 6), rng);
    Var x = ad::parameter(random_matrix(rng, nodes, width));
    Var e = ad::parameter(random_matrix(rng, nodes * nodes, edge_width));
    Var h0 = ad::parameter(random_matrix(rng, 1, width + 1));
    Mask mask = Mask::Constant(nodes, nodes, false);
    mask(0, nodes - 1) = mask(nodes - 1, 0) = true;
    Mask key_mask = Mask::Constant(1, nodes, false);
    key_mask(0, nodes - 1) = true;
    const Matrix w = random_matrix(rng, nodes, width);
    const Matrix wh = random_matrix(rng, 1, width + 1);

    check(
        "MHA", [&] { return project(nn::mha(attn, x, x, x, key_mask), w); },
        [&](const WideParams& P, Pieces&) { return wproject(testing::wide_mha(P, attn, P(x), key_mask), w); },
        {attn.wq, attn.wk, attn.wv, attn.wo, x});
    check(
        "EGATE", [&] { return project(nn::egate_forward(egate, nn::egate_forward(egate, x, e, mask), e, mask), w); },
        [&](const WideParams& P, Pieces& k) {
          const WMatrix once = testing::wide_egate(P, egate, P(x), P(e), mask, k);
          return wproject(testing::wide_egate(P, egate, once, P(e), mask, k), w);
        },
        {egate.w_node, egate.w_edge, egate.a_src, egate.a_dst, egate.a_edge, x, e});
    check(
        "GRU",
        [&] {
          Var state = h0;
          for (int t = 0; t < nodes; ++t) state = nn::gru_step(cell, ad::slice_rows(x, t, 1), state);
          return project(state, wh);
        },
        [&](const WideParams& P, Pieces&) {
          WMatrix state = P(h0);
          for (int t = 0; t < nodes; ++t) state = testing::wide_gru(P, cell, P(x).row(t), state);
          return wproject(state, wh);
        },
        {cell.w_z, cell.u_z, cell.b_z, cell.w_r, cell.u_r, cell.b_r, cell.w_n, cell.u_n, cell.b_n, x, h0});
    Var pooled = ad::parameter(random_matrix(rng, 1, width));
    check(
        "critic", [&] { return nn::critic_value(critic, pooled); },
        [&](const WideParams& P, Pieces& k) { return testing::wide_critic(P, critic, P(pooled), k); },
        {critic.hidden.weight, critic.hidden.bias, critic.out.weight, critic.out.bias, pooled});

    // Full constructor log-probability of a sampled solution.
    {
      const auto cparams = constructor::ConstructorParams::init({4 * heads, 2, heads, 10.0}, 77 + rep);
      const CvrpInstance instance = sample_instance(rng.uniform_int(3, 6), 12, 300 + rep);
      const auto c = [&] {
        ad::RecordScope off(false);
        return constructor::construct(instance, cparams, constructor::DecodeMode::Sample, 5 + rep);
      }();
      check(
          "constructor log-prob", [&] { return constructor::replay_log_prob(instance, cparams, c.actions); },
          [&](const WideParams& P, Pieces&) { return testing::wide_constructor_log_prob(P, instance, cparams, c.actions); },
          cparams.store.vars());
    }

    // Clipped surrogate through the perturbator encoder and pointer decoder,
    // evaluated after the parameters moved away from the ones that sampled.
    {
      perturbator::PerturbParams pparams = perturbator::PerturbParams::init({4, 2, 2, 4}, 90 + rep);
      auto instance = std::make_shared<const CvrpInstance>(sample_instance(6, 15, 400 + rep));
      auto state = perturbator::make_state(instance, naive_initial_solution(*instance, rep), SaSchedule::reaching_one(10.0, 5),
                                           500 + rep);
      std::vector<perturbator::Transition> batch;
      {
        ad::RecordScope off(false);
        for (int t = 0; t < 4; ++t) batch.push_back(perturbator::perturb_once(state, pparams, 3, perturbator::SelectMode::Sample));
      }
      Vector moved = pparams.store.flat_values();
      for (Eigen::Index i = 0; i < moved.size(); ++i) moved[i] += rng.uniform(-0.1, 0.1);
      pparams.store.set_flat_values(moved);
      std::vector<Real> advantages;
      for (std::size_t t = 0; t < batch.size(); ++t) advantages.push_back(rng.uniform(-1.0, 1.0));
      check(
          "PPO surrogate", [&] { return perturbator::ppo_objective(batch, advantages, pparams, 0.2); },
          [&](const WideParams& P, Pieces& k) { return testing::wide_ppo_objective(P, batch, advantages, pparams, 0.2L, k); },
          pparams.store.vars());

      // The production path accumulates one transition at a time.
      const Vector fused = pparams.store.flat_grad();
      pparams.store.zero_grad();
      perturbator::ppo_actor_gradient(pparams, batch, advantages, 0.2);
      const Vector split = pparams.store.flat_grad();
      const Real diff = (fused - split).cwiseAbs().maxCoeff() / (fused.cwiseAbs().maxCoeff() + 1e-12);
      worst["PPO accumulated"] = std::max(worst["PPO accumulated"], diff);
    }
  }
  bool pass = forward <= kForwardTolerance;
  std::string detail;
  for (const auto& [block, err] : worst) {
    pass = pass && err < kGradTolerance;
    detail += fmt("%s%s %.2e", detail.empty() ? "" : ", ", block.c_str(), err);
  }
  return {pass, "max relative error over " + std::to_string(kGradRepetitions) + " repetitions: " + detail +
                    fmt("; forward values agree to %.2e", forward)};
}

// ---------------------------------------------------------------------------

Outcome annealing_law() {
  Rng rng(99);
  int accepted = 0;
  for (int i = 0; i < kAcceptDraws; ++i) accepted += sa_accept(1.1, 1.0, 1.0, rng.uniform_open_zero()) ? 1 : 0;
  const Real freq = static_cast<Real>(accepted) / kAcceptDraws;
  const Real expected = std::exp(-0.1);
  Real identity = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Real t0 = rng.uniform(1.0, 1000.0);
    const int steps = rng.uniform_int(1, 10000);
    identity = std::max(identity, std::abs(t0 * std::pow(sa_alpha(t0, steps), steps) - 1.0));
    identity = std::max(identity, std::abs(SaSchedule::reaching_one(t0, steps).temperature_at(steps) - 1.0));
  }
  return {std::abs(freq - expected) <= kAcceptTolerance && identity <= kIdentityTolerance,
          fmt("acceptance %.5f vs exp(-0.1) = %.5f; max |t0*alpha^steps_t1 - 1| = %.2e", freq, expected, identity)};
}

// ---------------------------------------------------------------------------

Outcome insertion_oracle() {
  Rng rng(31337);
  int mismatches = 0;
  for (int c = 0; c < kInsertionCases; ++c) {
    const int n = rng.uniform_int(1, 50);
    const CvrpInstance instance = sample_instance(n, rng.uniform_int(9, 50), 70000 + c);
    const NodeId node = rng.uniform_int(1, n);
    const RoutePlan plan = testing::random_plan(instance, rng, node);
    const InsertionPosition where = best_insertion(instance, plan, node);
    const testing::ScanResult scan = testing::exhaustive_insertion(instance, plan, node);
    const RoutePlan out = min_cost_insert(instance, plan, node);
    if (where.tour != scan.tour || where.position != scan.position || !is_valid(instance, out)) ++mismatches;
  }
  return {mismatches == 0, fmt("%d of %d cases differ from the exhaustive scan", mismatches, kInsertionCases)};
}

// ---------------------------------------------------------------------------

Outcome oracle_gap() {
  const pipeline::TrainConfig config = pipeline::TrainConfig::toy(10);
  pipeline::ConstructorTrainer constructor_trainer(config);
  const int batches = config.epochs * config.batches_per_epoch;
  constructor_trainer.run(batches);

  const auto pool_instances =
      pipeline::generate_dataset(config.n, config.capacity, config.ninstances, Rng::derive(config.seed, 31));
  const auto pool_plans =
      pipeline::build_initial_solutions(pool_instances, constructor_trainer.params(), config.k, Rng::derive(config.seed, 32));
  pipeline::PerturbatorTrainer perturbator_trainer(config, pipeline::make_pool(pool_instances, pool_plans));
  perturbator_trainer.run(config.tsteps);

  const auto held_out = pipeline::generate_dataset(8, config.capacity, kHeldOut, 20261016);
  const pipeline::ConstructorModel cmodel{config, constructor_trainer.params().clone()};
  const pipeline::PerturbatorModel pmodel{config, perturbator_trainer.params().clone()};
  pipeline::EvalOptions options;
  options.k = config.k;
  options.perturbations = config.eval_perturbations;
  options.nnodes = config.nnodes;
  options.t0 = config.t0;
  options.steps_t1 = config.steps_t1;
  options.seed = 5;
  options.allow_size_mismatch = true;
  const auto out = pipeline::evaluate(held_out, cmodel, &pmodel, options);

  Real optimum = 0.0, combined = 0.0, greedy = 0.0;
  for (std::size_t i = 0; i < held_out.size(); ++i) {
    optimum += brute_force_optimal(held_out[i]).cost;
    combined += out.final[i].cost;
    greedy += out.greedy[i].cost;
  }
  optimum /= kHeldOut;
  combined /= kHeldOut;
  greedy /= kHeldOut;
  const Real gap = (combined - optimum) / optimum;
  return {gap <= kOracleGapLimit && combined <= greedy,
          fmt("%d constructor batches, %d perturbator steps; mean cost on %d CVRP8: combined %.4f, greedy %.4f, "
              "optimum %.4f (gap %.2f%%)",
              batches, config.tsteps, kHeldOut, combined, greedy, optimum, 100.0 * gap)};
}

// ---------------------------------------------------------------------------

Outcome gap_arithmetic() {
  const std::string a = fmt("%.2f", pipeline::gap_percent(6.13, 6.10));
  const std::string b = fmt("%.2f", pipeline::gap_percent(15.85, 15.56));
  return {a == "0.49" && b == "1.86", "gap(6.13, 6.10) = " + a + ", gap(15.85, 15.56) = " + b};
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome pipeline_invariants(const std::string& cli) {
  if (cli.empty()) return {false, "path of the command-line tool not given"};
  const fs::path dir = fs::temp_directory_path() / ("cdcp-acceptance-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  auto run = [&](const std::string& args) {
    const std::string command = "\"" + cli + "\" " + args + " > \"" + (dir / "log.txt").string() + "\" 2>&1";
    if (std::system(command.c_str()) != 0) {
      throw std::runtime_error("command failed: " + args + "\n" + slurp(dir / "log.txt"));
    }
  };
  auto at = [&](const char* name) { return "\"" + (dir / name).string() + "\""; };

  run("gen --n 8 --capacity 20 --count 20 --seed 5 --out " + at("data.jsonl"));
  run("train-constructor --n 8 --batch_size 8 --batches_per_epoch 5 --eval_size 16 --batches 10 --seed 3 --out " +
      at("constructor.json"));
  run("train-cdcp --n 8 --constructor " + at("constructor.json") +
      " --ninstances 16 --k 2 --steps 5 --bsize 4 --perturbations 4 --seed 3 --out " + at("perturbator.json"));
  const std::string common = " --dataset " + at("data.jsonl") + " --constructor " + at("constructor.json") +
                             " --perturbator " + at("perturbator.json") + " --k 4 --perturbations 30 --seed 11";
  run("eval" + common + " --oracle --no-timing --results " + at("first.csv"));
  run("eval" + common + " --oracle --no-timing --results " + at("second.csv"));
  run("solve" + common + " --out " + at("solutions.jsonl"));

  const std::string first = slurp(dir / "first.csv");
  const bool identical = !first.empty() && first == slurp(dir / "second.csv");

  const auto instances = io::read_instances((dir / "data.jsonl").string());
  const auto plans = io::read_solutions((dir / "solutions.jsonl").string());
  int invalid = 0;
  if (plans.size() != instances.size()) invalid = static_cast<int>(instances.size());
  for (std::size_t i = 0; i < plans.size() && i < instances.size(); ++i) {
    if (plans[i].instance_id != instances[i].id || !is_valid(instances[i], plans[i])) ++invalid;
  }

  std::map<std::string, std::map<std::string, Real>> cost;  // id -> method -> cost
  std::istringstream lines(first);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    std::istringstream fields(line);
    std::string id, method, value;
    std::getline(fields, id, ',');
    std::getline(fields, method, ',');
    std::getline(fields, value, ',');
    cost[id][method] = std::stod(value);
  }
  int worse = 0;
  for (const auto& instance : instances) {
    const auto& row = cost[instance.id];
    if (!row.contains(pipeline::kMethodCombined) || !row.contains(pipeline::kMethodSampled) ||
        row.at(pipeline::kMethodCombined) > row.at(pipeline::kMethodSampled)) {
      ++worse;
    }
  }
  // Solutions written by solve carry the same final costs as the eval rows.
  int disagree = 0;
  for (std::size_t i = 0; i < plans.size() && i < instances.size(); ++i) {
    const auto& row = cost[instances[i].id];
    if (!row.contains(pipeline::kMethodCombined) || std::abs(row.at(pipeline::kMethodCombined) - plans[i].cost) > 1e-8) {
      ++disagree;
    }
  }
  fs::remove_all(dir);
  return {identical && invalid == 0 && worse == 0 && disagree == 0,
          fmt("%zu instances: %d invalid solutions, %d above their initial construction, %d solve/eval cost "
              "mismatches, results CSV %s",
              instances.size(), invalid, worse, disagree, identical ? "byte-identical across runs" : "NOT reproducible")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient-strategy equivalence", strategy_equivalence},
      {"memory-complexity reduction", memory_reduction},
      {"runtime tradeoff", runtime_tradeoff},
      {"gradient correctness", gradient_correctness},
      {"annealing acceptance law", annealing_law},
      {"min-cost insertion oracle", insertion_oracle},
      {"oracle-gap training efficacy", oracle_gap},
      {"gap arithmetic", gap_arithmetic},
      {"pipeline invariants", [&] { return pipeline_invariants(cli); }},
  };
  // Further arguments restrict the run to the listed criterion numbers.
  std::vector<bool> selected(criteria.size(), argc <= 2);
  for (int a = 2; a < argc; ++a) {
    const int k = std::atoi(argv[a]);
    if (k >= 1 && k <= static_cast<int>(criteria.size())) selected[k - 1] = true;
  }
  int failed = 0;
  int ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    ++ran;
    const auto start = Clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    failed += outcome.pass ? 0 : 1;
    std::printf("criterion %zu %-30s %s  %s [%.1fs]\n", i + 1, criteria[i].first.c_str(), outcome.pass ? "PASS" : "FAIL",
                outcome.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
