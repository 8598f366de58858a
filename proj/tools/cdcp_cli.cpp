#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cdcp/errors.hpp"
#include "cdcp/io.hpp"
#include "cdcp/oracle.hpp"
#include "cdcp/pipeline.hpp"

using namespace cdcp;
using namespace cdcp::pipeline;

namespace {

// Every TrainConfig field becomes a --<field> flag. Values are kept as text and
// converted against the chosen profile's JSON types once parsing is done.
struct TrainFlags {
  std::string profile = "toy";
  int n = 10;
  std::map<std::string, std::string> values;

  void attach(CLI::App& app) {
    app.add_option("--profile", profile, "toy or full")->check(CLI::IsMember({"toy", "full"}));
    app.add_option("--n", n, "problem size");
    const nlohmann::json fields = TrainConfig::toy().to_json();
    for (const auto& [key, value] : fields.items()) {
      if (key == "profile" || key == "n") continue;
      app.add_option("--" + key, values[key], "TrainConfig." + key);
    }
  }

  TrainConfig build() const {
    const TrainConfig base = profile == "full" ? TrainConfig::full(n) : TrainConfig::toy(n);
    const nlohmann::json types = base.to_json();
    nlohmann::json overlay = nlohmann::json::object();
    for (const auto& [key, text] : values) {
      if (text.empty()) continue;
      const auto& type = types.at(key);
      if (type.is_boolean()) {
        overlay[key] = text == "true" || text == "1" || text == "on";
      } else if (type.is_number_unsigned()) {
        overlay[key] = std::stoull(text);
      } else if (type.is_number_integer()) {
        overlay[key] = std::stoll(text);
      } else if (type.is_number()) {
        overlay[key] = std::stod(text);
      } else {
        overlay[key] = text;
      }
    }
    TrainConfig config = TrainConfig::from_json(overlay, base);
    config.check();
    return config;
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path);
}

void write_json(const std::string& path, const nlohmann::json& j) { write_text(path, j.dump(1) + "\n"); }

nlohmann::json constructor_report(const std::vector<ConstructorStepReport>& steps, const TrainConfig& config) {
  nlohmann::json cost = nlohmann::json::array(), baseline = nlohmann::json::array(), seconds = nlohmann::json::array(),
                 retained = nlohmann::json::array();
  for (const auto& s : steps) {
    cost.push_back(s.mean_cost);
    baseline.push_back(s.baseline_cost);
    seconds.push_back(s.seconds);
    retained.push_back(s.peak_retained);
  }
  return {{"config", config.to_json()},    {"seed", config.seed},   {"cost", cost},
          {"baseline_cost", baseline},     {"seconds", seconds},    {"peak_retained", retained}};
}

nlohmann::json perturbator_report(const perturbator::PerturbTrainReport& r, const TrainConfig& config) {
  return {{"config", config.to_json()},          {"seed", config.seed},
          {"cost", r.mean_cost},                 {"percent_change", r.percent_change},
          {"actor_objective", r.actor_objective}, {"critic_loss", r.critic_loss},
          {"seconds", r.seconds}};
}

void check_sizes(const std::vector<CvrpInstance>& instances, const std::vector<RoutePlan>& plans) {
  if (instances.size() != plans.size()) {
    throw ParameterError("dataset has " + std::to_string(instances.size()) + " instances but solutions file has " +
                         std::to_string(plans.size()));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Combined constructive and perturbative CVRP solver"};
  app.set_config("--config", "", "TOML/INI file with flag values, one [subcommand] section each");
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Sample a dataset of random instances");
  int gen_n = 10, gen_capacity = 20, gen_count = 100;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("--n", gen_n, "customers per instance");
  gen->add_option("--capacity", gen_capacity, "vehicle capacity");
  gen->add_option("--count", gen_count, "number of instances");
  gen->add_option("--seed", gen_seed, "dataset seed");
  gen->add_option("--out", gen_out, "output JSON-lines file")->required();

  // train-constructor
  auto* tc = app.add_subcommand("train-constructor", "Train the constructive policy");
  TrainFlags tc_flags;
  tc_flags.attach(*tc);
  std::string tc_out, tc_resume, tc_report;
  int tc_batches = -1;
  tc->add_option("--out", tc_out, "checkpoint to write")->required();
  tc->add_option("--resume", tc_resume, "checkpoint to continue from (its config wins)");
  tc->add_option("--batches", tc_batches, "batches to run (default epochs * batches_per_epoch)");
  tc->add_option("--report", tc_report, "JSON training report");

  // build-init
  auto* bi = app.add_subcommand("build-init", "Best-of-k initial solutions from a trained constructor");
  std::string bi_dataset, bi_constructor, bi_out;
  int bi_k = 10;
  std::uint64_t bi_seed = 0;
  bool bi_mismatch = false;
  bi->add_option("--dataset", bi_dataset)->required();
  bi->add_option("--constructor", bi_constructor, "constructor checkpoint")->required();
  bi->add_option("--k", bi_k, "samples per instance");
  bi->add_option("--seed", bi_seed);
  bi->add_option("--out", bi_out, "solutions file")->required();
  bi->add_flag("--allow-size-mismatch", bi_mismatch);

  // train-cdcp
  auto* td = app.add_subcommand("train-cdcp", "Train the perturbator on a pool of constructed solutions");
  TrainFlags td_flags;
  td_flags.attach(*td);
  std::string td_constructor, td_dataset, td_solutions, td_out, td_resume, td_report;
  int td_tsteps = -1;
  td->add_option("--constructor", td_constructor, "constructor checkpoint")->required();
  td->add_option("--dataset", td_dataset, "pool instances (default: ninstances sampled from the seed)");
  td->add_option("--solutions", td_solutions, "pool solutions (default: built with best-of-k)");
  td->add_option("--out", td_out, "perturbator checkpoint")->required();
  td->add_option("--resume", td_resume, "perturbator checkpoint to continue from");
  td->add_option("--steps", td_tsteps, "training steps to run (default tsteps)");
  td->add_option("--report", td_report, "JSON training report");

  // solve / eval share their options.
  struct RunFlags {
    std::string dataset, constructor, perturbator, solutions, results, reference;
    EvalOptions options;
    bool no_timing = false;
    bool oracle = false;
  };
  RunFlags solve_flags, eval_flags;
  auto add_run = [](CLI::App* sub, RunFlags& f) {
    sub->add_option("--dataset", f.dataset)->required();
    sub->add_option("--constructor", f.constructor, "constructor checkpoint")->required();
    sub->add_option("--perturbator", f.perturbator, "perturbator checkpoint (omit for construction only)");
    sub->add_option("--k", f.options.k, "samples per instance");
    sub->add_option("--perturbations", f.options.perturbations, "perturbation steps per instance");
    sub->add_option("--nnodes", f.options.nnodes, "customers removed per perturbation");
    sub->add_option("--t0", f.options.t0, "initial SA temperature");
    sub->add_option("--steps_t1", f.options.steps_t1, "SA steps until temperature 1");
    sub->add_option("--seed", f.options.seed);
    sub->add_option("--results", f.results, "results CSV");
    sub->add_flag("--no-timing", f.no_timing, "write time_ms as 0 for reproducible CSVs");
    sub->add_flag("--allow-size-mismatch", f.options.allow_size_mismatch);
  };
  auto* solve = app.add_subcommand("solve", "Solve a dataset and write the solutions");
  add_run(solve, solve_flags);
  solve->add_option("--out", solve_flags.solutions, "solutions file")->required();
  auto* eval = app.add_subcommand("eval", "Evaluate against reference costs");
  add_run(eval, eval_flags);
  eval->add_option("--reference", eval_flags.reference, "solutions file with reference costs");
  eval->add_flag("--oracle", eval_flags.oracle, "use exact optima as reference (n <= 9)");

  // bench-memory
  auto* bm = app.add_subcommand("bench-memory", "Peak retained graph and time of both gradient strategies");
  std::vector<int> bm_sizes{10, 20, 40, 80};
  BenchOptions bm_options;
  std::string bm_out;
  bm->add_option("--sizes", bm_sizes, "problem sizes")->delimiter(',');
  bm->add_option("--width", bm_options.model.width);
  bm->add_option("--layers", bm_options.model.layers);
  bm->add_option("--heads", bm_options.model.heads);
  bm->add_option("--capacity", bm_options.capacity);
  bm->add_option("--batch_size", bm_options.batch_size);
  bm->add_option("--repeats", bm_options.repeats);
  bm->add_option("--seed", bm_options.seed);
  bm->add_option("--out", bm_out, "CSV file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      generate_dataset(gen_n, gen_capacity, gen_count, gen_seed, gen_out);
      std::cout << "wrote " << gen_count << " instances to " << gen_out << "\n";
    } else if (*tc) {
      ConstructorTrainer trainer = tc_resume.empty() ? ConstructorTrainer(tc_flags.build())
                                                     : load_constructor_trainer(tc_resume);
      const TrainConfig& config = trainer.config();
      const long total = static_cast<long>(config.epochs) * config.batches_per_epoch;
      const int batches = tc_batches >= 0 ? tc_batches : static_cast<int>(std::max(0L, total - trainer.batches_done()));
      std::vector<ConstructorStepReport> steps;
      for (int b = 0; b < batches; ++b) {
        steps.push_back(trainer.step());
        if ((b + 1) % config.batches_per_epoch == 0 || b + 1 == batches) {
          std::cout << "batch " << trainer.batches_done() << " cost " << steps.back().mean_cost << " baseline "
                    << trainer.baseline().eval_cost << "\n";
        }
      }
      save_constructor(tc_out, trainer);
      if (!tc_report.empty()) write_json(tc_report, constructor_report(steps, config));
    } else if (*bi) {
      const ConstructorModel model = load_constructor(bi_constructor);
      const auto instances = io::read_instances(bi_dataset);
      for (const auto& instance : instances) {
        if (!bi_mismatch && instance.size() != model.config.n) {
          throw SizeMismatchError("constructor was trained on n=" + std::to_string(model.config.n) + " but " +
                                  instance.id + " has n=" + std::to_string(instance.size()) +
                                  " (use --allow-size-mismatch)");
        }
      }
      io::write_solutions(bi_out, build_initial_solutions(instances, model.params, bi_k, bi_seed));
    } else if (*td) {
      const ConstructorModel cmodel = load_constructor(td_constructor);
      TrainConfig config = td_flags.build();
      std::vector<CvrpInstance> instances =
          td_dataset.empty() ? generate_dataset(config.n, config.capacity, config.ninstances, Rng::derive(config.seed, 31))
                             : io::read_instances(td_dataset);
      std::vector<RoutePlan> plans = td_solutions.empty()
                                         ? build_initial_solutions(instances, cmodel.params, config.k, Rng::derive(config.seed, 32))
                                         : io::read_solutions(td_solutions);
      check_sizes(instances, plans);
      auto pool = make_pool(instances, plans);
      PerturbatorTrainer trainer = td_resume.empty() ? PerturbatorTrainer(config, std::move(pool))
                                                     : load_perturbator_trainer(td_resume, std::move(pool));
      const int steps = td_tsteps >= 0 ? td_tsteps
                                       : static_cast<int>(std::max(0L, trainer.config().tsteps - trainer.steps_done()));
      const auto report = trainer.run(steps);
      for (std::size_t s = 0; s < report.percent_change.size(); ++s) {
        if (!std::isfinite(report.actor_objective[s]) || !std::isfinite(report.critic_loss[s])) {
          throw NumericError("non-finite loss at training step " + std::to_string(s));
        }
      }
      if (!report.percent_change.empty()) {
        std::cout << "steps " << trainer.steps_done() << " last percent change " << report.percent_change.back() << "\n";
      }
      save_perturbator(td_out, trainer);
      if (!td_report.empty()) write_json(td_report, perturbator_report(report, trainer.config()));
    } else if (*solve || *eval) {
      RunFlags& f = *solve ? solve_flags : eval_flags;
      const auto instances = io::read_instances(f.dataset);
      const ConstructorModel cmodel = load_constructor(f.constructor);
      std::optional<PerturbatorModel> pmodel;
      if (!f.perturbator.empty()) pmodel = load_perturbator(f.perturbator);
      EvalOutput out = evaluate(instances, cmodel, pmodel ? &*pmodel : nullptr, f.options);
      if (*solve) io::write_solutions(f.solutions, out.final);
      if (*eval) {
        std::map<std::string, Real> reference;
        if (!f.reference.empty()) reference = io::read_reference_costs(f.reference);
        if (f.oracle) {
          for (const auto& instance : instances) reference[instance.id] = brute_force_optimal(instance).cost;
        }
        attach_gaps(out.rows, reference);
        std::map<std::string, std::pair<Real, int>> gaps;
        for (const auto& row : out.rows) {
          auto& [sum, count] = gaps[row.method];
          if (row.gap_percent) {
            sum += *row.gap_percent;
            ++count;
          }
        }
        for (const auto& [method, acc] : gaps) {
          if (acc.second > 0) std::cout << method << " mean gap " << acc.first / acc.second << "%\n";
        }
      }
      if (!f.results.empty()) write_results_csv(f.results, out.rows, !f.no_timing);
      std::map<std::string, std::pair<Real, int>> costs;
      for (const auto& row : out.rows) {
        costs[row.method].first += row.cost;
        ++costs[row.method].second;
      }
      for (const auto& [method, acc] : costs) std::cout << method << " mean cost " << acc.first / acc.second << "\n";
    } else if (*bm) {
      const BenchResult result = bench_memory(bm_sizes, bm_options);
      const std::string csv = bench_csv(result);
      if (bm_out.empty()) {
        std::cout << csv;
      } else {
        write_text(bm_out, csv);
      }
      for (const auto& row : result.rows) {
        if (!row.error.empty()) throw std::runtime_error("bench-memory: n=" + std::to_string(row.n) + " failed: " + row.error);
      }
      if (result.original_fit && result.memeff_fit) {
        std::cout << "memory exponent original " << result.original_fit->dominant_exponent << " memeff "
                  << result.memeff_fit->dominant_exponent << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
