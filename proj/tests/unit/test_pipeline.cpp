#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tiny_config.hpp"
#include "wmsynth/numerics/container.hpp"
#include "wmsynth/pipeline/config.hpp"
#include "wmsynth/pipeline/datasets.hpp"
#include "wmsynth/pipeline/grid.hpp"
#include "wmsynth/pipeline/manifest.hpp"
#include "wmsynth/pipeline/parallel.hpp"
#include "wmsynth/sim/render.hpp"

namespace pl = wmsynth::pipeline;
namespace fs = std::filesystem;
using nlohmann::json;
using wmsynth::testing::tiny_config;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("wmsynth_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) { return wmsynth::numerics::read_file(p); }

// Runs the CLI, returning the exit code and combined output.
std::pair<int, std::string> cli(const std::string& args) {
  const auto out = fs::temp_directory_path() / "wmsynth_cli_out.txt";
  const std::string cmd = std::string(WMSYNTH_CLI) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WEXITSTATUS(status), slurp(out)};
}

}  // namespace

TEST(Config, JsonRoundTripAndHash) {
  const pl::ExperimentConfig c = tiny_config(3);
  const auto back = pl::config_from_json(pl::to_json(c));
  EXPECT_EQ(pl::to_json(back), pl::to_json(c));
  EXPECT_EQ(pl::config_hash(back), pl::config_hash(c));
  EXPECT_EQ(pl::config_hash(c).size(), 16u);
  EXPECT_NE(pl::config_hash(c), pl::config_hash(tiny_config(4)));
}

TEST(Config, DefaultsMatchProtocol) {
  const pl::ExperimentConfig c;
  EXPECT_EQ(c.total_demos, 60u);
  EXPECT_EQ(c.test_demos, 40u);
  EXPECT_EQ(c.regimes, (std::vector<std::size_t>{5, 10, 20}));
  EXPECT_EQ(c.init_frames, 56u);
  EXPECT_EQ(c.rollouts_per_frame, 10u);
  EXPECT_EQ(c.general_episodes, 66u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, UnknownAndInvalidFieldsRejected) {
  EXPECT_THROW(pl::config_from_json(json{{"regims", {5}}}), std::invalid_argument);
  EXPECT_THROW(pl::config_from_json(json{{"codec", {{"latnt_dim", 3}}}}), std::invalid_argument);
  try {
    pl::config_from_json(json{{"regimes", {5, 30}}});
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("regimes"), std::string::npos);
  }
  const auto partial = pl::config_from_json(json{{"master_seed", 9}});
  EXPECT_EQ(partial.master_seed, 9u);
  EXPECT_EQ(partial.test_demos, 40u);
}

TEST(Config, StageSeedsArePureAndDistinct) {
  const auto c = tiny_config(5);
  EXPECT_EQ(pl::stage_seed(c, "demo", {1}), pl::stage_seed(tiny_config(5), "demo", {1}));
  EXPECT_NE(pl::stage_seed(c, "demo", {1}), pl::stage_seed(c, "demo", {2}));
  EXPECT_NE(pl::stage_seed(c, "rollout", {0, 1}), pl::stage_seed(c, "rollout", {1, 0}));
  EXPECT_NE(pl::stage_seed(c, "demo", {1}), pl::stage_seed(tiny_config(6), "demo", {1}));
}

TEST(ParallelFor, IndependentOfWorkerCountAndRethrowsLowestIndex) {
  auto run = [](std::size_t workers) {
    std::vector<std::uint64_t> out(200);
    pl::parallel_for(out.size(), workers, [&](std::size_t i) { out[i] = i * i + 7; });
    return out;
  };
  EXPECT_EQ(run(1), run(3));
  try {
    pl::parallel_for(50, 4, [](std::size_t i) {
      if (i == 17 || i == 40) throw std::runtime_error("fail " + std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "fail 17");
  }
}

TEST(Manifest, RoundTripAndVersionMismatch) {
  const auto dir = scratch("manifest");
  fs::create_directories(dir);
  pl::RunManifest m;
  m.config_hash = "0123456789abcdef";
  m.artifacts["codec"] = "checkpoints/codec.bin";
  m.timings["codec"] = 1.5;
  pl::save_manifest(dir / "m.json", m);
  EXPECT_EQ(pl::to_json(pl::load_manifest(dir / "m.json")), pl::to_json(m));

  json j = pl::to_json(m);
  j["format_version"] = 99;
  std::ofstream(dir / "bad.json") << j.dump();
  try {
    pl::load_manifest(dir / "bad.json");
    FAIL();
  } catch (const pl::ManifestError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("99"), std::string::npos) << msg;
    EXPECT_NE(msg.find(std::to_string(pl::kManifestFormatVersion)), std::string::npos) << msg;
  }
  fs::remove_all(dir);
}

TEST(Datasets, CountsSplitsAndDeterminism) {
  const auto c = tiny_config();
  const auto d = pl::generate_datasets(c);
  EXPECT_EQ(d.train_real.size(), c.train_pool);
  EXPECT_EQ(d.test_real.size(), c.test_demos);
  EXPECT_EQ(d.general.size(), c.general_episodes);
  EXPECT_EQ(d.init.size(), c.init_frames);
  for (const auto& e : d.train_real) EXPECT_EQ(e.meta.split, "train");
  for (const auto& e : d.test_real) {
    EXPECT_EQ(e.meta.split, "test");
    for (const auto& r : d.train_real) EXPECT_NE(e.meta.id, r.meta.id);
  }
  for (const auto& f : d.init_frames()) EXPECT_TRUE(pl::needle_visible(f));
  EXPECT_EQ(d.regime(2).size(), 2u);
  EXPECT_EQ(d.regime(1)[0].meta.id, d.regime(2)[0].meta.id);

  const auto again = pl::generate_datasets(c, 2);
  EXPECT_EQ(again.train_real, d.train_real);
  EXPECT_EQ(again.test_real, d.test_real);
  EXPECT_EQ(again.init, d.init);
}

TEST(Datasets, SaveLoadChecksSplitTags) {
  const auto dir = scratch("datasets");
  auto d = pl::generate_datasets(tiny_config());
  pl::save_datasets(dir, d);
  const auto back = pl::load_datasets(dir);
  EXPECT_EQ(back.general, d.general);
  EXPECT_EQ(back.test_real, d.test_real);

  // A test episode filed under train/ must not load.
  d.train_real[0].meta.split = "test";
  pl::save_datasets(dir, d, true);
  EXPECT_THROW(pl::load_datasets(dir), std::exception);
  fs::remove_all(dir);
}

TEST(Datasets, NeedleVisiblePredicate) {
  wmsynth::sim::Frame blank(wmsynth::sim::FrameGeometry{});
  EXPECT_FALSE(pl::needle_visible(blank));
}

TEST(Grid, StageErrorMessage) {
  const pl::StageError e("idm/regime-5", 3, "boom");
  EXPECT_STREQ(e.what(), "stage=idm/regime-5 seed=3: boom");
  EXPECT_EQ(e.stage(), "idm/regime-5");
}

TEST(Grid, TinyGridIsDeterministicAndResumes) {
  const auto a = scratch("grid_a"), b = scratch("grid_b");
  const auto cfg = tiny_config(2);
  const auto ra = pl::run_grid(cfg, a);
  ASSERT_EQ(ra.results.size(), cfg.regimes.size() * 3);
  for (const auto& r : ra.results) EXPECT_EQ(r.mse.episodes.size(), cfg.test_demos);
  EXPECT_EQ(ra.counts["synthetic"]["2"]["multi"], cfg.init_frames * cfg.rollouts_per_frame);
  EXPECT_EQ(ra.counts["synthetic"]["2"]["single"], cfg.init_frames);

  pl::run_grid(cfg, b);
  for (const char* f : {"mse.csv", "generation.csv", "summary.json"}) {
    EXPECT_EQ(slurp(a / "report" / f), slurp(b / "report" / f)) << f;
  }

  // Remove one downstream checkpoint and its result: only that stage re-runs,
  // and the report is unchanged.
  const std::string csv = slurp(a / "report" / "mse.csv");
  const auto m0 = pl::load_manifest(a / "manifest.json");
  const std::string pol = m0.artifacts.at("policy/regime-2/Real+Syn10x");
  const std::string codec_before = slurp(a / m0.artifacts.at("codec"));
  fs::remove(a / pol);
  fs::remove(a / "results" / "eval" / "regime-2" / "Real+Syn10x.json");
  fs::remove_all(a / "report");
  std::ostringstream log;
  pl::run_grid(cfg, a, {.log = &log});
  EXPECT_EQ(slurp(a / "report" / "mse.csv"), csv);
  EXPECT_EQ(slurp(a / m0.artifacts.at("codec")), codec_before);
  EXPECT_NE(log.str().find("policy/regime-2/Real+Syn10x"), std::string::npos) << log.str();
  EXPECT_EQ(log.str().find("] codec"), std::string::npos) << log.str();

  // A different config may not reuse the directory without force.
  EXPECT_THROW(pl::Run(tiny_config(3), a), pl::ManifestError);
  EXPECT_NO_THROW(pl::Run(tiny_config(3), a, {.force = true}));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, ErrorsAreOneLineWithKind) {
  auto [code, out] = cli("train-wm");
  EXPECT_EQ(code, 2);
  EXPECT_EQ(out.rfind("error kind=usage", 0), 0u) << out;
  EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), 1) << out;

  const auto dir = scratch("cli");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << R"({"regimes": [5, 99]})";
  std::tie(code, out) = cli("gen-data --out " + (dir / "run").string() + " --config " + (dir / "bad.json").string());
  EXPECT_EQ(code, 1);
  EXPECT_EQ(out.rfind("error kind=invalid", 0), 0u) << out;
  EXPECT_NE(out.find("regimes"), std::string::npos) << out;

  std::ofstream(dir / "tiny.json") << pl::to_json(tiny_config()).dump();
  std::tie(code, out) = cli("report --out " + (dir / "empty").string() + " --config " + (dir / "tiny.json").string());
  EXPECT_EQ(code, 1);
  EXPECT_EQ(out.rfind("error kind=stage", 0), 0u) << out;
  fs::remove_all(dir);
}
