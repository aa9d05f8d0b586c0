// Acceptance run: one PASS/FAIL line per criterion 1-9. Criteria 5-9 share
// the grid runs in --dir (seed-<s>/ plus a from-scratch rerun of the first seed).
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Geometry>

#include "gradcheck.hpp"
#include "wmsynth/flowmatch/flow_head.hpp"
#include "wmsynth/flowmatch/flowmatch.hpp"
#include "wmsynth/idm/idm.hpp"
#include "wmsynth/kinematics/rotation.hpp"
#include "wmsynth/numerics/adam.hpp"
#include "wmsynth/numerics/container.hpp"
#include "wmsynth/numerics/rng.hpp"
#include "wmsynth/pipeline/grid.hpp"

namespace {

using namespace wmsynth;
namespace fs = std::filesystem;
using numerics::Tensor;
using numerics::Tensor64;
using numerics::Var64;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;
std::ofstream transcript;  // copy of stdout in <dir>/acceptance.txt

void emit(const std::string& line) {
  std::printf("%s\n", line.c_str());
  std::fflush(stdout);
  if (transcript.is_open()) transcript << line << std::endl;
}

void verdict(int id, bool ok, const std::string& what) {
  emit("criterion " + std::to_string(id) + (ok ? " PASS " : " FAIL ") + what);
  if (!ok) ++failures;
}

void detail(const std::string& s) { emit("  " + s); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Runs `body`; an exception counts as a failure of criterion `id`.
void guarded(int id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    verdict(id, false, std::string("raised: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// 1. Finite-difference gradient checks

Tensor64 randn(numerics::Shape s, std::uint64_t seed, double sd = 1.0) {
  numerics::Rng rng(seed);
  return numerics::normal_tensor<double>(std::move(s), rng, sd);
}

Var64 probe(numerics::Graph64& g, Var64 y) { return numerics::sum(numerics::mul(y, g.constant(randn(y.shape(), 99)))); }

void criterion_gradients() {
  namespace nm = numerics;
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_op;
  std::size_t checked = 0;
  auto check = [&](const std::string& op, const testing::ScalarFn& fn, std::vector<Tensor64> in) {
    const auto r = testing::gradcheck(fn, std::move(in));
    checked += r.checked;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_op = op;
    }
  };
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const std::size_t m = 2 + s % 3, k = 3 + s % 4, n = 2 + (s * 7) % 5;
    const std::vector<std::size_t> ids{0, 2, 1, 2};
    check("matmul", [](auto& g, auto& v) { return probe(g, nm::matmul(v[0], v[1])); }, {randn({m, k}, s), randn({k, n}, s + 1)});
    check("bmm", [](auto& g, auto& v) { return probe(g, nm::bmm(v[0], v[1])); }, {randn({2, m, k}, s), randn({2, k, n}, s + 1)});
    check("transpose", [](auto& g, auto& v) { return probe(g, nm::transpose(v[0])); }, {randn({2, m, k}, s)});
    check("add", [](auto& g, auto& v) { return probe(g, nm::add(v[0], v[1])); }, {randn({m, k}, s), randn({m, k}, s + 1)});
    check("sub", [](auto& g, auto& v) { return probe(g, nm::sub(v[0], v[1])); }, {randn({m, k}, s), randn({m, k}, s + 1)});
    check("mul", [](auto& g, auto& v) { return probe(g, nm::mul(v[0], v[1])); }, {randn({m, k}, s), randn({m, k}, s + 1)});
    check("add_rowvec", [](auto& g, auto& v) { return probe(g, nm::add_rowvec(v[0], v[1])); }, {randn({m, k}, s), randn({k}, s + 1)});
    check("mul_rowvec", [](auto& g, auto& v) { return probe(g, nm::mul_rowvec(v[0], v[1])); }, {randn({m, k}, s), randn({k}, s + 1)});
    check("scale", [](auto& g, auto& v) { return probe(g, nm::scale(v[0], 0.3)); }, {randn({m, k}, s)});
    check("relu", [](auto& g, auto& v) { return probe(g, nm::relu(v[0])); }, {randn({m, k}, s)});
    check("gelu", [](auto& g, auto& v) { return probe(g, nm::gelu(v[0])); }, {randn({m, k}, s)});
    check("sigmoid", [](auto& g, auto& v) { return probe(g, nm::sigmoid(v[0])); }, {randn({m, k}, s)});
    check("tanh", [](auto& g, auto& v) { return probe(g, nm::tanh(v[0])); }, {randn({m, k}, s)});
    check("layer_norm", [](auto& g, auto& v) { return probe(g, nm::layer_norm(v[0])); }, {randn({m, k}, s)});
    check("softmax", [](auto& g, auto& v) { return probe(g, nm::softmax(v[0])); }, {randn({m, k}, s)});
    check("reshape", [=](auto& g, auto& v) { return probe(g, nm::reshape(v[0], {k, m})); }, {randn({m, k}, s)});
    check("concat", [](auto& g, auto& v) { return probe(g, nm::concat<double>({v[0], v[1]}, 1)); }, {randn({m, k}, s), randn({m, n}, s + 1)});
    check("slice", [=](auto& g, auto& v) { return probe(g, nm::slice(v[0], 1, 1, k - 2)); }, {randn({m, k}, s)});
    check("expand", [=](auto& g, auto& v) { return probe(g, nm::expand(v[0], 0, n)); }, {randn({m, k}, s)});
    check("embedding", [&ids](auto& g, auto& v) { return probe(g, nm::embedding(v[0], std::span(ids))); }, {randn({3, k}, s)});
    check("sum", [](auto&, auto& v) { return nm::sum(nm::mul(v[0], v[0])); }, {randn({m, k}, s)});
    check("mean", [](auto&, auto& v) { return nm::mean(nm::mul(v[0], v[0])); }, {randn({m, k}, s)});
    check("mse", [](auto&, auto& v) { return nm::mse(v[0], v[1]); }, {randn({m, k}, s), randn({m, k}, s + 1)});
    check("masked_mse",
          [=](auto&, auto& v) {
            Tensor64 mask({m, k});
            for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = (i % 3) ? 1.0 : 0.0;
            return nm::masked_mse(v[0], v[1], mask);
          },
          {randn({m, k}, s), randn({m, k}, s + 1)});
  }
  check("mlp2",
        [](auto& g, auto& v) {
          auto h = nm::gelu(nm::add_rowvec(nm::matmul(v[0], v[1]), v[2]));
          return nm::mse(nm::add_rowvec(nm::matmul(h, v[3]), v[4]), g.constant(randn({6, 3}, 17)));
        },
        {randn({6, 5}, 10), randn({5, 8}, 11, 0.5), randn({8}, 12, 0.1), randn({8, 3}, 13, 0.5), randn({3}, 14, 0.1)});
  const double secs = seconds_since(t0);
  verdict(1, worst < 1e-4 && secs < 60.0,
          fmt("gradient checks: %zu entries, max rel err %.2e at %s (< 1e-4), %.1f s (< 60 s)", checked, worst,
              worst_op.c_str(), secs));
}

// ---------------------------------------------------------------------------
// 2. rot6d round trip

void criterion_rot6d() {
  numerics::Rng rng(2024);
  double round_trip = 0.0, ortho = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Eigen::Quaterniond q(numerics::standard_normal(rng), numerics::standard_normal(rng), numerics::standard_normal(rng),
                         numerics::standard_normal(rng));
    const kinematics::Mat3 r = q.normalized().toRotationMatrix();
    const kinematics::Mat3 back = kinematics::matrix_from_rot6d(kinematics::rot6d_from_matrix(r));
    round_trip = std::max(round_trip, (back - r).cwiseAbs().maxCoeff());
    ortho = std::max(ortho, (back.transpose() * back - kinematics::Mat3::Identity()).cwiseAbs().maxCoeff());
    ortho = std::max(ortho, std::abs(back.determinant() - 1.0));
  }
  verdict(2, round_trip < 1e-9 && ortho < 1e-6,
          fmt("rot6d round trip on 1000 rotations: max err %.2e (< 1e-9), orthonormality %.2e (< 1e-6)", round_trip,
              ortho));
}

// ---------------------------------------------------------------------------
// 3. Flow-matching analytic suite

void criterion_flowmatch() {
  namespace fm = flowmatch;
  numerics::Rng rng(3);
  const Tensor clean = numerics::normal_tensor<float>({8, 20}, rng);
  const Tensor noise = numerics::normal_tensor<float>({8, 20}, rng);

  const bool endpoints = fm::interpolate(clean, noise, 0.0) == clean && fm::interpolate(clean, noise, 1.0) == noise;

  fm::FMBatch a{clean, noise, std::vector<float>(8, 0.1f)};
  fm::FMBatch b{clean, noise, std::vector<float>(8, 0.9f)};
  const bool t_free = a.target() == b.target();

  // Constant field of the pair, with the starting noise drawn from a copy of the generator.
  numerics::Rng sampler(4), peek(4);
  const Tensor eps = numerics::normal_tensor<float>({8, 20}, peek);
  const Tensor v = fm::velocity_target(clean, eps);
  const Tensor one_step = fm::ode_sample([&](const Tensor&, float) { return v; }, {8, 20}, sampler, 1);
  // Float Euler update eps - (eps - I): exact up to the rounding of the difference.
  double worst = 0.0, bound_ok = true;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double err = std::abs(one_step[i] - clean[i]);
    const double ulp = std::ldexp(std::max(std::abs(eps[i]), std::abs(clean[i])), -23);
    worst = std::max(worst, err);
    bound_ok = bound_ok && err <= ulp;
  }
  // Dyadic data makes every update exact, for any step count.
  const Tensor dc({1, 4}, {0.5f, -1.25f, 2.0f, 0.0f}), dn({1, 4}, {1.0f, 0.25f, -2.0f, 1.5f});
  const Tensor dv = fm::velocity_target(dc, dn);
  bool dyadic = true;
  for (int steps : {1, 2, 4, 8, 64}) {
    dyadic = dyadic && fm::ode_integrate([&](const Tensor&, float) { return dv; }, dn, steps) == dc;
  }

  const fm::FMBatch batch = fm::make_batch(clean, rng, {});
  const Tensor target = batch.target();
  fm::VelocityModel oracle = [&](numerics::Graph& g, numerics::Var, std::span<const float>) {
    return g.constant(target);
  };
  numerics::Graph g;
  const float loss = fm::fm_loss(g, oracle, batch).value().item();

  verdict(3, endpoints && t_free && bound_ok && dyadic && loss == 0.0f,
          fmt("flow-matching analytic suite: endpoints %s, velocity t-free %s, oracle 1-step err %.1e (within float "
              "rounding %s, dyadic exact for 1..64 steps %s), oracle loss %g",
              endpoints ? "exact" : "WRONG", t_free ? "yes" : "NO", worst, bound_ok ? "yes" : "NO",
              dyadic ? "yes" : "NO", static_cast<double>(loss)));
}

// ---------------------------------------------------------------------------
// 4. 1-D gaussian mixture

void criterion_mixture() {
  namespace fm = flowmatch;
  const auto t0 = Clock::now();
  numerics::Rng rng(4);
  numerics::ParameterStore store;
  // Clamp disabled: the modes lie outside the default bound.
  fm::FlowHead head(store, "gmm", {.data_dim = 1, .cond_dim = 1, .hidden = 64, .time_dim = 16, .depth = 2, .clamp = 0.0},
                    rng);
  const std::size_t params = store.numel();
  const std::size_t B = 256;
  const Tensor cond({B, 1});
  numerics::Adam adam({.learning_rate = 2e-3});
  for (int step = 0; step < 4000; ++step) {
    if (step == 3000) adam.set_learning_rate(5e-4);
    Tensor x({B, 1});
    for (std::size_t i = 0; i < B; ++i) {
      const double mode = numerics::uniform(rng, 0.0, 1.0) < 0.5 ? -2.0 : 2.0;
      x[i] = static_cast<float>(mode + 0.1 * numerics::standard_normal(rng));
    }
    const fm::FMBatch batch = fm::make_batch(std::move(x), rng, {});
    store.zero_grad();
    numerics::Graph g;
    fm::VelocityModel u = [&](numerics::Graph& gg, numerics::Var noisy, std::span<const float> t) {
      return head.forward(gg, store, noisy, t, gg.constant(cond));
    };
    auto loss = fm::fm_loss(g, u, batch);
    g.backward(loss);
    adam.step(store);
  }
  const std::size_t N = 2000;
  const Tensor zero({N, 1});
  fm::VelocityField field = [&](const Tensor& x, float t) {
    numerics::Graph g(numerics::GradMode::kInference);
    const std::vector<float> ts(N, t);
    return head.forward(g, store, g.constant(x), ts, g.constant(zero)).value();
  };
  numerics::Rng sample_rng(44);
  const Tensor s = fm::ode_sample(field, {N, 1}, sample_rng, 64);
  std::size_t near = 0, left = 0, right = 0;
  for (std::size_t i = 0; i < N; ++i) {
    if (std::abs(s[i] + 2.0f) <= 0.3f) ++left, ++near;
    if (std::abs(s[i] - 2.0f) <= 0.3f) ++right, ++near;
  }
  const double secs = seconds_since(t0);
  const double frac = static_cast<double>(near) / N, fl = static_cast<double>(left) / N,
               fr = static_cast<double>(right) / N;
  verdict(4, params <= 10000 && frac >= 0.95 && fl >= 0.2 && fr >= 0.2 && secs < 300.0,
          fmt("mixture: %zu params (<= 10000), %.1f%% within 3 sigma (>= 95%%), modes %.1f%% / %.1f%% (>= 20%%), "
              "%.1f s (< 300 s)",
              params, 100 * frac, 100 * fl, 100 * fr, secs));
}

// ---------------------------------------------------------------------------
// 5. IDM pseudo-label quality

void criterion_idm(pipeline::Run& run) {
  const auto t0 = Clock::now();
  const idm::IdmNet& net = run.idm_regime(20);
  const auto& test = run.datasets().test_real;
  const std::size_t held_out = std::min<std::size_t>(10, test.size());
  std::array<double, 3> mse{};
  constexpr std::array<kinematics::Component, 3> comps{kinematics::Component::kCartesian,
                                                       kinematics::Component::kRotation, kinematics::Component::kJaw};
  std::size_t rotation_failures = 0;
  for (std::size_t e = 0; e < held_out; ++e) {
    numerics::Rng rng(pipeline::stage_seed(run.config(), "accept.idm", {e}));
    const auto r = idm::pseudo_label(net, test[e].frames, rng, run.config().idm_ode_steps);
    rotation_failures += r.rotation_failures;
    std::array<double, 3> acc{};
    for (std::size_t t = 0; t < r.episode.actions.size(); ++t) {
      const auto p = kinematics::apply(net.stats(), r.episode.actions[t]);
      const auto q = kinematics::apply(net.stats(), test[e].actions[t]);
      for (std::size_t c = 0; c < 3; ++c) {
        for (auto d : kinematics::component_indices(comps[c])) acc[c] += (p[d] - q[d]) * (p[d] - q[d]);
      }
    }
    for (std::size_t c = 0; c < 3; ++c) {
      mse[c] += acc[c] / static_cast<double>(r.episode.actions.size() * kinematics::component_indices(comps[c]).size());
    }
  }
  for (auto& m : mse) m /= static_cast<double>(held_out);

  bool counts_ok = true;
  std::string counts;
  for (std::size_t n : {16, 17, 33, 100}) {
    const std::vector<sim::Frame> frames(test[0].frames.begin(), test[0].frames.begin() + static_cast<long>(n + 1));
    numerics::Rng rng(n);
    const auto r = idm::pseudo_label(net, frames, rng, 1);
    counts_ok = counts_ok && r.episode.actions.size() == frames.size() - 1;
    counts += fmt(" %zu->%zu", frames.size(), r.episode.actions.size());
  }
  const bool quality = mse[0] < 0.02 && mse[1] < 0.02 && mse[2] < 0.02;
  verdict(5, quality && counts_ok && rotation_failures == 0,
          fmt("IDM pseudo-labels on %zu held-out episodes: cartesian %.4f, rotation %.4f, jaw %.4f (each < 0.02); "
              "frames->labels%s; rotation failures %zu; %.0f s",
              held_out, mse[0], mse[1], mse[2], counts.c_str(), rotation_failures, seconds_since(t0)));
}

// ---------------------------------------------------------------------------
// 6-8 over the grid reports

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

void criterion_generation(const std::vector<eval::ExperimentReport>& reports) {
  std::vector<double> fin, untr, zero;
  for (const auto& r : reports) {
    for (const auto& g : r.generation) {
      fin.push_back(g.finetuned.distance);
      detail(fmt("seed %llu regime %zu: FD finetuned %.6f zero-shot %.6f untrained %.6f",
                 static_cast<unsigned long long>(r.master_seed), g.regime, g.finetuned.distance,
                 g.zero_shot.distance, g.untrained.distance));
    }
    untr.push_back(r.generation.at(0).untrained.distance);
    zero.push_back(r.generation.at(0).zero_shot.distance);
  }
  const double f = mean_of(fin), u = mean_of(untr);
  verdict(6, f < u,
          fmt("Frechet distance over %zu seeds: finetuned %.6f < untrained %.6f (zero-shot %.6f)", reports.size(), f, u,
              mean_of(zero)));
}

const eval::ConditionResult& find(const eval::ExperimentReport& r, std::size_t n, const std::string& c) {
  for (const auto& x : r.results)
    if (x.regime == n && x.condition == c) return x;
  throw std::runtime_error("report lacks regime " + std::to_string(n) + " condition " + c);
}

void criterion_trend(const std::vector<eval::ExperimentReport>& reports) {
  std::vector<double> real_total, syn_total, real_cart, syn_cart;
  for (const auto& r : reports) {
    for (std::size_t n : {5, 10, 20}) {
      std::string line = fmt("seed %llu regime %zu total/cartesian:", static_cast<unsigned long long>(r.master_seed), n);
      for (const char* c : {"Real", "Real+Syn", "Real+Syn10x"}) {
        const auto& x = find(r, n, c);
        line += fmt(" %s %.5f/%.5f", c, x.mse.total.mean, x.mse.cartesian.mean);
      }
      detail(line);
    }
    real_total.push_back(find(r, 5, "Real").mse.total.mean);
    syn_total.push_back(find(r, 5, "Real+Syn10x").mse.total.mean);
    real_cart.push_back(find(r, 5, "Real").mse.cartesian.mean);
    syn_cart.push_back(find(r, 5, "Real+Syn10x").mse.cartesian.mean);
  }
  const double rt = mean_of(real_total), st = mean_of(syn_total), rc = mean_of(real_cart), sc = mean_of(syn_cart);
  verdict(7, rt > st && rc > sc,
          fmt("n=5 over %zu seeds: Real total %.5f > Real+Syn10x %.5f, Real cartesian %.5f > Real+Syn10x %.5f",
              reports.size(), rt, st, rc, sc));
}

void criterion_counts(const std::vector<eval::ExperimentReport>& reports) {
  bool ok = true;
  std::string why;
  auto want = [&](bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      why += " " + what;
    }
  };
  for (const auto& r : reports) {
    const auto& c = r.counts;
    want(c.at("demos") == 60, "demos");
    want(c.at("test") == 40, "test");
    want(c.at("train_pool") == 20, "train_pool");
    want(c.at("regimes") == nlohmann::json({5, 10, 20}), "regimes");
    want(c.at("nested") == true, "nested");
    want(c.at("init_frames") == 56, "init_frames");
    want(c.at("idm_chunk") == nlohmann::json({16, 20}), "idm_chunk");
    want(c.at("policy_chunk") == nlohmann::json({16, 20}), "policy_chunk");
    want(c.at("action_dim") == 20, "action_dim");
    for (const char* n : {"5", "10", "20"}) {
      want(c.at("synthetic").at(n).at("single") == 56, std::string("single/") + n);
      want(c.at("synthetic").at(n).at("multi") == 560, std::string("multi/") + n);
      want(c.at("synthetic").at(n).at("videos_with_wrong_label_count") == 0, std::string("labels/") + n);
    }
  }
  verdict(8, ok,
          ok ? fmt("protocol counts on %zu seeds: 60 demos / 40 test, regimes {5,10,20} nested, 56 / 560 videos, "
                   "16x20 chunks, 20-dim actions",
                   reports.size())
             : "protocol counts differ:" + why);
}

void criterion_determinism(const fs::path& first, const fs::path& rerun) {
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(first / "report")) {
    if (e.path().extension() == ".csv") files.push_back(e.path().filename().string());
  }
  std::sort(files.begin(), files.end());
  bool ok = !files.empty();
  std::string list;
  for (const auto& f : files) {
    const bool same = fs::exists(rerun / "report" / f) &&
                      numerics::read_file(first / "report" / f) == numerics::read_file(rerun / "report" / f);
    ok = ok && same;
    list += " " + f + (same ? " identical" : " DIFFERS");
  }
  verdict(9, ok, "same-seed rerun from scratch:" + list);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-9"};
  std::string dir = "acceptance_runs";
  std::vector<std::uint64_t> seeds{1, 2, 3};
  bool fresh = false;
  app.add_option("--dir", dir, "Directory for the grid runs");
  app.add_option("--seeds", seeds, "Master seeds for the averaged criteria");
  app.add_flag("--fresh", fresh, "Discard earlier runs in --dir first");
  CLI11_PARSE(app, argc, argv);

  const fs::path root(dir);
  if (fresh) fs::remove_all(root);
  fs::create_directories(root);
  transcript.open(root / "acceptance.txt");

  const auto t0 = Clock::now();
  guarded(1, criterion_gradients);
  guarded(2, criterion_rot6d);
  guarded(3, criterion_flowmatch);
  guarded(4, criterion_mixture);

  std::vector<eval::ExperimentReport> reports;
  std::optional<pipeline::Run> first;
  bool grid_ok = true;
  for (std::uint64_t s : seeds) {
    try {
      pipeline::ExperimentConfig cfg;
      cfg.master_seed = s;
      pipeline::Run run(cfg, root / ("seed-" + std::to_string(s)), {.log = &std::cerr});
      reports.push_back(run.run_grid());
      detail(fmt("seed %llu grid done at %.0f s", static_cast<unsigned long long>(s), seconds_since(t0)));
      if (!first) first.emplace(std::move(run));
    } catch (const std::exception& e) {
      detail(std::string("grid failed: ") + e.what());
      grid_ok = false;
    }
  }
  if (first) {
    guarded(5, [&] { criterion_idm(*first); });
  } else {
    verdict(5, false, "no grid run available");
  }
  if (grid_ok && !reports.empty()) {
    guarded(6, [&] { criterion_generation(reports); });
    guarded(7, [&] { criterion_trend(reports); });
    guarded(8, [&] { criterion_counts(reports); });
  } else {
    for (int id : {6, 7, 8}) verdict(id, false, "grid did not complete");
  }
  guarded(9, [&] {
    const fs::path rerun = root / ("seed-" + std::to_string(seeds.at(0)) + "-rerun");
    fs::remove_all(rerun);
    pipeline::ExperimentConfig cfg;
    cfg.master_seed = seeds.at(0);
    pipeline::run_grid(cfg, rerun, {.log = &std::cerr});
    criterion_determinism(root / ("seed-" + std::to_string(seeds.at(0))), rerun);
  });
  detail(fmt("total %.0f s", seconds_since(t0)));
  return failures == 0 ? 0 : 1;
}
