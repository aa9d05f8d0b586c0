#include "wmsynth/eval/mse.hpp"

#include <cmath>
#include <stdexcept>

#include "wmsynth/numerics/rng.hpp"

namespace wmsynth::eval {

using kinematics::kActionDim;

NormalizedChunk normalize_chunk(const kinematics::MinMaxStats& stats, std::span<const ActionVector> raw) {
  NormalizedChunk c;
  c.rows.reserve(raw.size());
  for (const auto& a : raw) c.rows.push_back(kinematics::apply(stats, a));
  return c;
}

const ComponentStat& MseReport::component(Component c) const {
  switch (c) {
    case Component::kCartesian: return cartesian;
    case Component::kRotation: return rotation;
    case Component::kJaw: return jaw;
  }
  throw std::invalid_argument("unknown component");
}

namespace {

ComponentStat summarize(const std::vector<double>& v) {
  ComponentStat s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(var / static_cast<double>(v.size()));
  return s;
}

}  // namespace

MseReport trajectory_mse(const ChunkModel& model, std::span<const sim::Episode> episodes,
                         const kinematics::MinMaxStats& stats) {
  if (episodes.empty()) throw std::invalid_argument("trajectory_mse: no episodes");
  const sim::FrameGeometry geometry = episodes[0].geometry;
  MseReport report;
  constexpr std::array<Component, 3> comps{Component::kCartesian, Component::kRotation, Component::kJaw};
  for (const auto& e : episodes) {
    if (e.geometry != geometry) throw std::invalid_argument("trajectory_mse: episode " + e.meta.id + " has a different frame geometry");
    if (e.actions.size() < kChunk) continue;
    std::vector<std::size_t> starts;
    for (std::size_t t = 0; t + kChunk <= e.actions.size(); ++t) starts.push_back(t);
    const auto predicted = model(e, starts);
    if (predicted.size() != starts.size()) throw std::logic_error("trajectory_mse: model returned the wrong chunk count");

    EpisodeMse em;
    em.id = e.meta.id;
    em.chunks = starts.size();
    for (std::size_t i = 0; i < starts.size(); ++i) {
      const auto& rows = predicted[i].rows;
      if (rows.size() != kChunk) throw std::logic_error("trajectory_mse: chunk must have 16 rows");
      const NormalizedChunk truth =
          normalize_chunk(stats, std::span<const ActionVector>(e.actions).subspan(starts[i], kChunk));
      for (std::size_t c = 0; c < comps.size(); ++c) {
        const auto idx = kinematics::component_indices(comps[c]);
        double acc = 0.0;
        for (std::size_t s = 0; s < kChunk; ++s) {
          for (std::size_t d : idx) {
            const double diff = rows[s][d] - truth.rows[s][d];
            acc += diff * diff;
          }
        }
        em.component[c] += acc / static_cast<double>(kChunk * idx.size());
      }
      double acc = 0.0;
      for (std::size_t s = 0; s < kChunk; ++s) {
        for (std::size_t d = 0; d < kActionDim; ++d) {
          const double diff = rows[s][d] - truth.rows[s][d];
          acc += diff * diff;
        }
      }
      em.total += acc / static_cast<double>(kChunk * kActionDim);
    }
    for (auto& c : em.component) c /= static_cast<double>(em.chunks);
    em.total /= static_cast<double>(em.chunks);
    report.episodes.push_back(em);
  }
  if (report.episodes.empty()) throw std::invalid_argument("trajectory_mse: no episode has a full chunk");
  std::array<std::vector<double>, 4> cols;
  for (const auto& em : report.episodes) {
    for (std::size_t c = 0; c < 3; ++c) cols[c].push_back(em.component[c]);
    cols[3].push_back(em.total);
  }
  report.cartesian = summarize(cols[0]);
  report.rotation = summarize(cols[1]);
  report.jaw = summarize(cols[2]);
  report.total = summarize(cols[3]);
  return report;
}

ChunkModel policy_chunk_model(const policy::PolicyNet& policy, std::uint64_t seed, int ode_steps) {
  return [&policy, seed, ode_steps](const sim::Episode& e, std::span<const std::size_t> starts) {
    numerics::Rng rng(numerics::derive_seed(seed, "eval.episode", {e.meta.seed}));
    const auto& codec = policy.codec();
    std::vector<const sim::Frame*> frames;
    std::vector<ActionVector> states;
    for (std::size_t t : starts) {
      frames.push_back(&e.frames.at(t));
      states.push_back(policy::state_at(e.actions, t));
    }
    const numerics::Tensor z =
        codec.encode_pooled(worldmodel::pool_frames(std::span<const sim::Frame* const>(frames), codec.config().pool));
    const std::vector<std::size_t> tokens(starts.size(), policy.token_id(e.meta.task));
    std::vector<numerics::Rng*> rngs(starts.size(), &rng);
    const numerics::Tensor chunks = policy.predict_normalized(z, tokens, states, rngs, ode_steps);
    std::vector<NormalizedChunk> out(starts.size());
    for (std::size_t i = 0; i < starts.size(); ++i) {
      out[i].rows.resize(kChunk);
      for (std::size_t s = 0; s < kChunk; ++s) {
        for (std::size_t d = 0; d < kActionDim; ++d) out[i].rows[s][d] = chunks[(i * kChunk + s) * kActionDim + d];
      }
    }
    return out;
  };
}

}  // namespace wmsynth::eval
