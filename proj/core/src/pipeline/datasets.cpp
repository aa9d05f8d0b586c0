#include "wmsynth/pipeline/datasets.hpp"

#include <cstdio>
#include <stdexcept>

#include "wmsynth/sim/demo.hpp"
#include "wmsynth/pipeline/parallel.hpp"
#include "wmsynth/sim/episode_io.hpp"

namespace wmsynth::pipeline {

namespace {

std::string numbered(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%03zu", prefix, i);
  return buf;
}

void require_split(const std::vector<sim::Episode>& eps, const char* split, const std::filesystem::path& dir) {
  for (const auto& e : eps) {
    if (e.meta.split != split) {
      throw std::runtime_error("episode " + e.meta.id + " in " + dir.string() + " has split '" + e.meta.split +
                               "', expected '" + split + "'");
    }
  }
}

}  // namespace

std::span<const sim::Episode> Datasets::regime(std::size_t n) const {
  if (n > train_real.size()) {
    throw std::out_of_range("regime " + std::to_string(n) + " exceeds the train pool of " +
                            std::to_string(train_real.size()));
  }
  return std::span<const sim::Episode>(train_real).first(n);
}

std::vector<sim::Frame> Datasets::init_frames() const {
  std::vector<sim::Frame> out;
  out.reserve(init.size());
  for (const auto& e : init) out.push_back(e.frames.front());
  return out;
}

bool needle_visible(const sim::Frame& f, std::size_t min_pixels) {
  const sim::Palette palette;
  if (sim::count_color(f, palette.needle) < min_pixels) return false;
  const auto c = sim::color_centroid(f, palette.needle);
  return c[0] >= 0.0 && c[0] < static_cast<double>(f.geometry.width) && c[1] >= 0.0 &&
         c[1] < static_cast<double>(f.geometry.height);
}

Datasets generate_datasets(const ExperimentConfig& cfg, std::size_t workers) {
  cfg.validate();
  sim::DemoOptions opts;
  opts.geometry = cfg.geometry;
  Datasets d;

  std::vector<sim::Episode> demos(cfg.total_demos);
  parallel_for(demos.size(), workers, [&](std::size_t i) {
    demos[i] = sim::scripted_demo(stage_seed(cfg, "demo", {i}), cfg.demo_noise, cfg.task, opts);
    demos[i].meta.id = numbered("demo", i);
  });
  // Demos between the pool and the test split are generated so that the
  // seeds of the test split do not depend on the pool size, then dropped.
  for (std::size_t i = 0; i < demos.size(); ++i) {
    if (i < cfg.train_pool) {
      demos[i].meta.split = "train";
      d.train_real.push_back(std::move(demos[i]));
    } else if (i >= cfg.total_demos - cfg.test_demos) {
      demos[i].meta.split = "test";
      d.test_real.push_back(std::move(demos[i]));
    }
  }

  d.general.resize(cfg.general_episodes);
  parallel_for(d.general.size(), workers, [&](std::size_t i) {
    sim::Episode& e = d.general[i] = sim::general_motion_episode(stage_seed(cfg, "general", {i}), opts);
    e.meta.id = numbered("general", i);
    e.meta.split = "general";
  });

  const std::size_t scan_limit = cfg.init_frames * 20;
  for (std::size_t k = 0; d.init.size() < cfg.init_frames; ++k) {
    if (k == scan_limit) {
      throw std::runtime_error("only " + std::to_string(d.init.size()) + " of " + std::to_string(cfg.init_frames) +
                               " initial frames passed the needle-visible predicate after " +
                               std::to_string(scan_limit) + " candidates");
    }
    const std::uint64_t seed = stage_seed(cfg, "init", {k});
    sim::Episode e = sim::record_episode(seed, {}, sim::kTaskGeneralMotion, cfg.geometry, opts.sim);
    if (!needle_visible(e.frames.front())) continue;
    e.meta.id = numbered("init", d.init.size());
    e.meta.split = "init";
    e.meta.generator = "general_motion";
    d.init.push_back(std::move(e));
  }
  return d;
}

void save_datasets(const std::filesystem::path& dir, const Datasets& d, bool force) {
  sim::write_dataset(dir / "train", d.train_real, force);
  sim::write_dataset(dir / "test", d.test_real, force);
  sim::write_dataset(dir / "general", d.general, force);
  sim::write_dataset(dir / "init", d.init, force);
}

Datasets load_datasets(const std::filesystem::path& dir) {
  Datasets d;
  d.train_real = sim::read_dataset(dir / "train");
  d.test_real = sim::read_dataset(dir / "test");
  d.general = sim::read_dataset(dir / "general");
  d.init = sim::read_dataset(dir / "init");
  require_split(d.train_real, "train", dir);
  require_split(d.test_real, "test", dir);
  require_split(d.general, "general", dir);
  require_split(d.init, "init", dir);
  return d;
}

}  // namespace wmsynth::pipeline
