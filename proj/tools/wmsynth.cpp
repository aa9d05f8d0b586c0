// Command-line front end for the experiment pipeline. Every subcommand works
// on a run directory (--out); stages already present there are reused.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wmsynth/pipeline/grid.hpp"

namespace {

using namespace wmsynth;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
  bool quiet = false;
  std::size_t workers = 1;
  std::optional<std::size_t> regime;
  std::optional<std::string> condition;
};

std::string quoted(const std::string& s) {
  std::string q = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') q += '\\';
    q += c == '\n' ? ' ' : c;
  }
  return q + "\"";
}

int fail(const std::string& kind, const std::string& message, int code) {
  std::printf("error kind=%s message=%s\n", kind.c_str(), quoted(message).c_str());
  return code;
}

pipeline::Run open_run(const Common& c, bool persist, bool cached_only = false) {
  pipeline::ExperimentConfig cfg = c.config.empty() ? pipeline::ExperimentConfig{} : pipeline::load_config(c.config);
  if (c.seed) cfg.master_seed = *c.seed;
  pipeline::RunOptions opts;
  opts.force = c.force;
  opts.persist = persist;
  opts.cached_only = cached_only;
  opts.workers = c.workers;
  opts.log = c.quiet ? nullptr : &std::cerr;
  return pipeline::Run(cfg, c.out, opts);
}

std::vector<std::size_t> regimes(const Common& c, const pipeline::Run& run) {
  if (c.regime) return {*c.regime};
  return run.config().regimes;
}

std::vector<pipeline::Condition> conditions(const Common& c) {
  if (c.condition) return {pipeline::parse_condition(*c.condition)};
  return {std::begin(pipeline::kConditions), std::end(pipeline::kConditions)};
}

void print_result(const eval::ConditionResult& r) {
  std::printf("regime=%zu condition=%s cartesian=%.6e rotation=%.6e jaw=%.6e total=%.6e success=%zu/%zu\n", r.regime,
              r.condition.c_str(), r.mse.cartesian.mean, r.mse.rotation.mean, r.mse.jaw.mean, r.mse.total.mean,
              r.success.successes, r.success.total);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wmsynth: synthetic-data pipeline for action-chunk policies"};
  app.require_subcommand(1);
  Common c;

  auto add = [&](const std::string& name, const std::string& help, bool regime, bool condition) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", c.config, "JSON experiment config (defaults when omitted)")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "master seed (overrides the config)");
    sub->add_option("--out", c.out, "run directory")->required();
    sub->add_flag("--force", c.force, "discard a run directory made with a different config");
    sub->add_flag("--quiet", c.quiet, "no progress on stderr");
    sub->add_option("--workers", c.workers, "threads for episode generation")->check(CLI::PositiveNumber);
    if (regime) sub->add_option("--regime", c.regime, "number of real demos (default: every regime)");
    if (condition) sub->add_option("--condition", c.condition, "Real, Real+Syn or Real+Syn10x (default: all)");
    return sub;
  };

  auto* gen = add("gen-data", "generate and store demos, general-motion episodes and initial frames", false, false);
  auto* wm = add("train-wm", "train the codec, the base world model and the finetuned ones", true, false);
  auto* idm = add("train-idm", "train the base and per-regime inverse dynamics models", true, false);
  auto* roll = add("rollout", "generate and store world-model rollouts", true, false);
  auto* label = add("label", "pseudo-label rollouts and store them as synthetic episodes", true, false);
  auto* pol = add("train-policy", "train policies", true, true);
  auto* ev = add("eval", "evaluate policies on the test split", true, true);
  auto* grid = add("grid", "run the full grid and write the report", false, false);
  auto* report = add("report", "write CSV tables and SVG charts from stored results", false, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (gen->parsed()) {
      auto run = open_run(c, true);
      const auto& d = run.datasets();
      std::printf("train=%zu test=%zu general=%zu init=%zu dir=%s\n", d.train_real.size(), d.test_real.size(),
                  d.general.size(), d.init.size(), (run.dir() / "data").c_str());
    } else if (wm->parsed()) {
      auto run = open_run(c, false);
      run.wm_untrained();
      run.wm_base();
      for (std::size_t n : regimes(c, run)) run.wm_finetuned(n);
      std::printf("dir=%s\n", (run.dir() / "checkpoints").c_str());
    } else if (idm->parsed()) {
      auto run = open_run(c, false);
      run.idm_base();
      for (std::size_t n : regimes(c, run)) run.idm_regime(n);
      std::printf("dir=%s\n", (run.dir() / "checkpoints").c_str());
    } else if (roll->parsed()) {
      auto run = open_run(c, true);
      for (std::size_t n : regimes(c, run)) {
        std::printf("regime=%zu videos=%zu\n", n, run.rollouts(n).size());
        run.release(n);
      }
    } else if (label->parsed()) {
      auto run = open_run(c, true);
      for (std::size_t n : regimes(c, run)) {
        std::printf("regime=%zu labeled=%zu\n", n, run.labeled(n).size());
        run.release(n);
      }
    } else if (pol->parsed()) {
      auto run = open_run(c, false);
      for (std::size_t n : regimes(c, run)) {
        for (auto cond : conditions(c)) run.policy(n, cond);
        run.release(n);
      }
      std::printf("dir=%s\n", (run.dir() / "checkpoints").c_str());
    } else if (ev->parsed()) {
      auto run = open_run(c, false);
      for (std::size_t n : regimes(c, run)) {
        for (auto cond : conditions(c)) print_result(run.evaluate(n, cond));
        run.release(n);
      }
    } else if (grid->parsed() || report->parsed()) {
      auto run = open_run(c, false, report->parsed());
      const auto r = run.run_grid();
      for (const auto& res : r.results) print_result(res);
      std::printf("report=%s\n", (run.dir() / "report").c_str());
    }
  } catch (const pipeline::StageError& e) {
    return fail("stage", e.what(), 1);
  } catch (const std::invalid_argument& e) {
    return fail("invalid", e.what(), 1);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), 1);
  }
  return 0;
}
