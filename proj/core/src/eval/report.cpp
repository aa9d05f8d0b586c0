#include "wmsynth/eval/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "wmsynth/numerics/container.hpp"

namespace wmsynth::eval {

namespace fs = std::filesystem;
using nlohmann::json;

SuccessReport success_rate(std::span<const sim::Episode> episodes, const sim::SimConfig& cfg) {
  SuccessReport r;
  for (const auto& e : episodes) {
    ++r.total;
    if (sim::detect_success(e, cfg)) ++r.successes;
  }
  return r;
}

namespace {

constexpr std::array<Component, 3> kComponents{Component::kCartesian, Component::kRotation, Component::kJaw};

std::string fmt(double v, const char* spec = "%.8e") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

json stat_json(const ComponentStat& s) { return {{"mean", s.mean}, {"std", s.std}}; }
ComponentStat stat_from(const json& j) { return {j.at("mean").get<double>(), j.at("std").get<double>()}; }

}  // namespace

json to_json(const FrechetReport& f) {
  return {{"distance", f.distance}, {"extractor", f.extractor}, {"count_a", f.count_a},
          {"count_b", f.count_b},   {"shrinkage", f.shrinkage}};
}

FrechetReport frechet_from_json(const json& j) {
  return {j.at("distance").get<double>(), j.at("extractor").get<std::string>(), j.at("count_a").get<std::size_t>(),
          j.at("count_b").get<std::size_t>(), j.at("shrinkage").get<bool>()};
}

json to_json(const ConditionResult& c) {
  json e;
  e["regime"] = c.regime;
  e["condition"] = c.condition;
  e["cartesian"] = stat_json(c.mse.cartesian);
  e["rotation"] = stat_json(c.mse.rotation);
  e["jaw"] = stat_json(c.mse.jaw);
  e["total"] = stat_json(c.mse.total);
  e["n_episodes"] = c.mse.episodes.size();
  e["episodes"] = json::array();
  for (const auto& ep : c.mse.episodes) {
    e["episodes"].push_back({{"id", ep.id},
                             {"cartesian", ep.component[0]},
                             {"rotation", ep.component[1]},
                             {"jaw", ep.component[2]},
                             {"total", ep.total},
                             {"chunks", ep.chunks}});
  }
  e["success"] = {{"successes", c.success.successes}, {"total", c.success.total}, {"rate", c.success.rate()}};
  return e;
}

ConditionResult condition_from_json(const json& e) {
  ConditionResult c;
  c.regime = e.at("regime").get<std::size_t>();
  c.condition = e.at("condition").get<std::string>();
  c.mse.cartesian = stat_from(e.at("cartesian"));
  c.mse.rotation = stat_from(e.at("rotation"));
  c.mse.jaw = stat_from(e.at("jaw"));
  c.mse.total = stat_from(e.at("total"));
  for (const auto& ep : e.at("episodes")) {
    EpisodeMse m;
    m.id = ep.at("id").get<std::string>();
    m.component = {ep.at("cartesian").get<double>(), ep.at("rotation").get<double>(), ep.at("jaw").get<double>()};
    m.total = ep.at("total").get<double>();
    m.chunks = ep.at("chunks").get<std::size_t>();
    c.mse.episodes.push_back(std::move(m));
  }
  c.success.successes = e.at("success").at("successes").get<std::size_t>();
  c.success.total = e.at("success").at("total").get<std::size_t>();
  return c;
}

json to_json(const ExperimentReport& r) {
  json j;
  j["master_seed"] = r.master_seed;
  j["config_hash"] = r.config_hash;
  j["units"] = kNormalizedUnits;
  j["averaging"] = "per-chunk: squared error averaged within each 16-step chunk, then over chunks, then over episodes";
  j["results"] = json::array();
  for (const auto& c : r.results) j["results"].push_back(to_json(c));
  j["generation"] = json::array();
  for (const auto& g : r.generation) {
    j["generation"].push_back({{"regime", g.regime},
                               {"finetuned", to_json(g.finetuned)},
                               {"zero_shot", to_json(g.zero_shot)},
                               {"untrained", to_json(g.untrained)}});
  }
  j["counts"] = r.counts;
  return j;
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  r.master_seed = j.at("master_seed").get<std::uint64_t>();
  r.config_hash = j.at("config_hash").get<std::string>();
  for (const auto& e : j.at("results")) r.results.push_back(condition_from_json(e));
  for (const auto& g : j.at("generation")) {
    r.generation.push_back({g.at("regime").get<std::size_t>(), frechet_from_json(g.at("finetuned")),
                            frechet_from_json(g.at("zero_shot")), frechet_from_json(g.at("untrained"))});
  }
  r.counts = j.value("counts", json::object());
  return r;
}

std::string mse_csv(const ExperimentReport& r) {
  std::string out = "regime,condition,component,mean_mse,std_mse,n_episodes\n";
  for (const auto& c : r.results) {
    for (Component comp : kComponents) {
      const auto& s = c.mse.component(comp);
      out += std::to_string(c.regime) + "," + c.condition + "," + kinematics::component_name(comp) + "," +
             fmt(s.mean) + "," + fmt(s.std) + "," + std::to_string(c.mse.episodes.size()) + "\n";
    }
  }
  return out;
}

std::string mse_svg(const ExperimentReport& r, Component comp) {
  std::vector<std::size_t> regimes;
  std::vector<std::string> conditions;
  for (const auto& c : r.results) {
    if (std::find(regimes.begin(), regimes.end(), c.regime) == regimes.end()) regimes.push_back(c.regime);
    if (std::find(conditions.begin(), conditions.end(), c.condition) == conditions.end()) conditions.push_back(c.condition);
  }
  double top = 0.0;
  for (const auto& c : r.results) {
    const auto& s = c.mse.component(comp);
    top = std::max(top, s.mean + s.std);
  }
  if (top <= 0.0) top = 1.0;

  const double W = 640, H = 400, left = 80, right = 160, bottom = 60, topm = 40;
  const double plot_w = W - left - right, plot_h = H - topm - bottom;
  const char* colors[] = {"#7f7f7f", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"};
  auto y = [&](double v) { return topm + plot_h * (1.0 - v / top); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  s += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  s += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">Trajectory MSE (" +
       std::string(kinematics::component_name(comp)) + ")</text>\n";
  s += "<line x1=\"" + fmt(left, "%.1f") + "\" y1=\"" + fmt(topm, "%.1f") + "\" x2=\"" + fmt(left, "%.1f") + "\" y2=\"" +
       fmt(topm + plot_h, "%.1f") + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + fmt(left, "%.1f") + "\" y1=\"" + fmt(topm + plot_h, "%.1f") + "\" x2=\"" +
       fmt(left + plot_w, "%.1f") + "\" y2=\"" + fmt(topm + plot_h, "%.1f") + "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = top * k / 4.0;
    s += "<text x=\"" + fmt(left - 6, "%.1f") + "\" y=\"" + fmt(y(v) + 4, "%.1f") +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + fmt(v, "%.3g") + "</text>\n";
  }
  s += "<text x=\"20\" y=\"" + fmt(topm + plot_h / 2, "%.1f") + "\" transform=\"rotate(-90 20 " +
       fmt(topm + plot_h / 2, "%.1f") +
       ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">MSE (normalized units)</text>\n";
  s += "<text x=\"" + fmt(left + plot_w / 2, "%.1f") + "\" y=\"" + fmt(H - 15, "%.1f") +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">real demonstrations</text>\n";

  const double group_w = plot_w / static_cast<double>(std::max<std::size_t>(regimes.size(), 1));
  const double bar_w = group_w * 0.8 / static_cast<double>(std::max<std::size_t>(conditions.size(), 1));
  for (std::size_t gi = 0; gi < regimes.size(); ++gi) {
    const double gx = left + gi * group_w + group_w * 0.1;
    s += "<text x=\"" + fmt(left + (gi + 0.5) * group_w, "%.1f") + "\" y=\"" + fmt(topm + plot_h + 18, "%.1f") +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + std::to_string(regimes[gi]) +
         "</text>\n";
    for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
      for (const auto& c : r.results) {
        if (c.regime != regimes[gi] || c.condition != conditions[ci]) continue;
        const auto& st = c.mse.component(comp);
        const double x = gx + ci * bar_w;
        s += "<rect x=\"" + fmt(x, "%.1f") + "\" y=\"" + fmt(y(st.mean), "%.1f") + "\" width=\"" +
             fmt(bar_w * 0.9, "%.1f") + "\" height=\"" + fmt(topm + plot_h - y(st.mean), "%.1f") + "\" fill=\"" +
             colors[ci % 5] + "\"/>\n";
        const double cx = x + bar_w * 0.45;
        s += "<line x1=\"" + fmt(cx, "%.1f") + "\" y1=\"" + fmt(y(st.mean + st.std), "%.1f") + "\" x2=\"" +
             fmt(cx, "%.1f") + "\" y2=\"" + fmt(y(std::max(st.mean - st.std, 0.0)), "%.1f") +
             "\" stroke=\"black\"/>\n";
      }
    }
  }
  for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
    const double ly = topm + 10 + ci * 20.0;
    s += "<rect x=\"" + fmt(W - right + 16, "%.1f") + "\" y=\"" + fmt(ly, "%.1f") + "\" width=\"12\" height=\"12\" fill=\"" +
         colors[ci % 5] + "\"/>\n";
    s += "<text x=\"" + fmt(W - right + 34, "%.1f") + "\" y=\"" + fmt(ly + 10, "%.1f") +
         "\" font-family=\"sans-serif\" font-size=\"12\">" + conditions[ci] + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::vector<fs::path> emit_report(const ExperimentReport& r, const fs::path& out_dir) {
  if (r.results.empty()) throw std::invalid_argument("emit_report: no results");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create report directory " + out_dir.string() + ": " + ec.message());
  std::vector<fs::path> written;
  auto put = [&](const std::string& name, const std::string& bytes) {
    const fs::path p = out_dir / name;
    numerics::write_file(p, bytes, true);
    written.push_back(p);
  };
  put("mse.csv", mse_csv(r));
  for (Component c : kComponents) put(std::string("mse_") + kinematics::component_name(c) + ".svg", mse_svg(r, c));
  std::string gen = "regime,model,frechet_distance,extractor,n_generated,n_real,shrinkage\n";
  for (const auto& g : r.generation) {
    for (const auto& [name, f] : {std::pair<const char*, const FrechetReport&>{"finetuned", g.finetuned},
                                  {"zero_shot", g.zero_shot},
                                  {"untrained", g.untrained}}) {
      gen += std::to_string(g.regime) + "," + name + "," + fmt(f.distance) + "," + f.extractor + "," +
             std::to_string(f.count_a) + "," + std::to_string(f.count_b) + "," + (f.shrinkage ? "1" : "0") + "\n";
    }
  }
  put("generation.csv", gen);
  put("summary.json", to_json(r).dump(2) + "\n");
  return written;
}

}  // namespace wmsynth::eval
