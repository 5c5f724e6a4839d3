#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "evgnep/common.hpp"
#include "evgnep/imaging.hpp"
#include "evgnep/solver.hpp"

namespace evgnep {

// Full parameterization of a run. Serialized as flat `key = value` text
// with one section per module; a saved manifest is itself a valid config,
// so runs can be reproduced from it.
struct RunConfig {
  // [run]
  std::string events_path;  // exactly one of events_path / scene_path
  std::string scene_path;
  Grid grid{0, 0};
  int players = 2;
  std::uint64_t seed = 0;
  std::string t0_policy = "min";  // min | mid | value
  double t0_value = 0.0;
  std::vector<std::pair<double, double>> keep_windows;

  ModelParams model;
  GAConfig ga;
  RefineConfig refine;

  void validate_input_choice() const {
    if (events_path.empty() == scene_path.empty())
      throw ValidationError("config: exactly one of events / scene must be given");
  }

  double resolve_t0(const EventSet& es) const {
    if (t0_policy == "min") return es.t_min();
    if (t0_policy == "mid") return 0.5 * (es.t_min() + es.t_max());
    if (t0_policy == "value") return t0_value;
    throw ValidationError("config: t0 policy must be min, mid, or a numeric value");
  }
};

namespace detail {

inline std::string fmt_window_list(const std::vector<std::pair<double, double>>& ws) {
  std::string out;
  char buf[160];
  for (const auto& [lo, hi] : ws) {
    std::snprintf(buf, sizeof(buf), "%s%.17g:%.17g", out.empty() ? "" : " ", lo, hi);
    out += buf;
  }
  return out;
}

inline std::pair<double, double> parse_window(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos)
    throw ParseError("config: keep window must be 't_lo:t_hi', got '" + s + "'");
  try {
    return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw ParseError("config: malformed keep window '" + s + "'");
  }
}

}  // namespace detail

inline void save_config(const RunConfig& cfg, const std::string& path,
                        const std::vector<std::pair<std::string, std::string>>& metrics = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_config: cannot open '" + path + "' for writing");
  char buf[64];
  auto d = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "[run]\n";
  if (!cfg.events_path.empty()) out << "events = " << cfg.events_path << '\n';
  if (!cfg.scene_path.empty()) out << "scene = " << cfg.scene_path << '\n';
  out << "grid = " << cfg.grid.nx << ' ' << cfg.grid.ny << '\n';
  out << "players = " << cfg.players << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "t0_policy = " << cfg.t0_policy << '\n';
  out << "t0_value = " << d(cfg.t0_value) << '\n';
  if (!cfg.keep_windows.empty())
    out << "keep_windows = " << detail::fmt_window_list(cfg.keep_windows) << '\n';
  out << "\n[model]\n";
  out << "lambda1 = " << d(cfg.model.lambda1) << '\n';
  out << "lambda2 = " << d(cfg.model.lambda2) << '\n';
  out << "alpha = " << d(cfg.model.alpha) << '\n';
  out << "beta = " << d(cfg.model.beta) << '\n';
  out << "m = " << d(cfg.model.relax.m) << '\n';
  out << "n = " << d(cfg.model.relax.n) << '\n';
  out << "gamma = " << d(cfg.model.relax.gamma) << '\n';
  out << "\n[ga]\n";
  out << "population = " << cfg.ga.population << '\n';
  out << "max_generations = " << cfg.ga.max_generations << '\n';
  out << "stall_tolerance = " << d(cfg.ga.stall_tolerance) << '\n';
  out << "stall_generations = " << cfg.ga.stall_generations << '\n';
  out << "mutation_rate = " << d(cfg.ga.mutation_rate) << '\n';
  out << "crossover_rate = " << d(cfg.ga.crossover_rate) << '\n';
  out << "elite_count = " << cfg.ga.elite_count << '\n';
  out << "\n[refine]\n";
  out << "tolerance = " << d(cfg.refine.tolerance) << '\n';
  out << "max_iterations = " << cfg.refine.max_iterations << '\n';
  out << "armijo_coeff = " << d(cfg.refine.armijo_coeff) << '\n';
  out << "backtrack_factor = " << d(cfg.refine.backtrack_factor) << '\n';
  if (!metrics.empty()) {
    out << "\n[metrics]\n";
    for (const auto& [k, v] : metrics) out << k << " = " << v << '\n';
  }
  if (!out) throw IoError("save_config: write failure on '" + path + "'");
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_config: cannot open '" + path + "'");
  RunConfig cfg;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string sv{detail::trim(line)};
    if (sv.empty()) continue;
    if (sv.front() == '[' && sv.back() == ']') {
      section = sv.substr(1, sv.size() - 2);
      continue;
    }
    const auto eq = sv.find('=');
    if (eq == std::string::npos)
      throw ParseError("config: " + path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key{detail::trim(sv.substr(0, eq))};
    const std::string value{detail::trim(sv.substr(eq + 1))};
    std::istringstream vals(value);
    auto need = [&](bool ok) {
      if (!ok)
        throw ParseError("config: " + path + ":" + std::to_string(lineno) +
                         ": malformed value for '" + key + "'");
    };
    if (section == "run") {
      if (key == "events")
        cfg.events_path = value;
      else if (key == "scene")
        cfg.scene_path = value;
      else if (key == "grid")
        need(static_cast<bool>(vals >> cfg.grid.nx >> cfg.grid.ny));
      else if (key == "players")
        need(static_cast<bool>(vals >> cfg.players));
      else if (key == "seed")
        need(static_cast<bool>(vals >> cfg.seed));
      else if (key == "t0_policy")
        cfg.t0_policy = value;
      else if (key == "t0_value")
        need(static_cast<bool>(vals >> cfg.t0_value));
      else if (key == "keep_windows") {
        std::string tok;
        while (vals >> tok) cfg.keep_windows.push_back(detail::parse_window(tok));
      } else
        need(false);
    } else if (section == "model") {
      if (key == "lambda1")
        need(static_cast<bool>(vals >> cfg.model.lambda1));
      else if (key == "lambda2")
        need(static_cast<bool>(vals >> cfg.model.lambda2));
      else if (key == "alpha")
        need(static_cast<bool>(vals >> cfg.model.alpha));
      else if (key == "beta")
        need(static_cast<bool>(vals >> cfg.model.beta));
      else if (key == "m")
        need(static_cast<bool>(vals >> cfg.model.relax.m));
      else if (key == "n")
        need(static_cast<bool>(vals >> cfg.model.relax.n));
      else if (key == "gamma")
        need(static_cast<bool>(vals >> cfg.model.relax.gamma));
      else
        need(false);
    } else if (section == "ga") {
      if (key == "population")
        need(static_cast<bool>(vals >> cfg.ga.population));
      else if (key == "max_generations")
        need(static_cast<bool>(vals >> cfg.ga.max_generations));
      else if (key == "stall_tolerance")
        need(static_cast<bool>(vals >> cfg.ga.stall_tolerance));
      else if (key == "stall_generations")
        need(static_cast<bool>(vals >> cfg.ga.stall_generations));
      else if (key == "mutation_rate")
        need(static_cast<bool>(vals >> cfg.ga.mutation_rate));
      else if (key == "crossover_rate")
        need(static_cast<bool>(vals >> cfg.ga.crossover_rate));
      else if (key == "elite_count")
        need(static_cast<bool>(vals >> cfg.ga.elite_count));
      else
        need(false);
    } else if (section == "refine") {
      if (key == "tolerance")
        need(static_cast<bool>(vals >> cfg.refine.tolerance));
      else if (key == "max_iterations")
        need(static_cast<bool>(vals >> cfg.refine.max_iterations));
      else if (key == "armijo_coeff")
        need(static_cast<bool>(vals >> cfg.refine.armijo_coeff));
      else if (key == "backtrack_factor")
        need(static_cast<bool>(vals >> cfg.refine.backtrack_factor));
      else
        need(false);
    } else if (section == "metrics") {
      // run output echoed back into manifests; ignored on load
    } else {
      throw ParseError("config: " + path + ":" + std::to_string(lineno) + ": unknown section '" +
                       section + "'");
    }
  }
  return cfg;
}

}  // namespace evgnep
