#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "evgnep/common.hpp"
#include "evgnep/solver.hpp"

namespace evgnep {

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Structured text serialization of an EquilibriumResult:
//
//   evgnep-result 1
//   grid = NX NY
//   num_events = N_E
//   players = N
//   t0 = T0
//   [player J]
//   objective = ...
//   theta = TX TY
//   ga_generations / ga_termination / refine_iterations /
//   refine_termination / polish_flips
//   z = z_1 z_2 ... z_{N_e}
inline void save_result(const EquilibriumResult& res, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_result: cannot open '" + path + "' for writing");
  const Eigen::Index n = res.strategies.empty() ? 0 : res.strategies[0].size();
  out << "evgnep-result 1\n";
  out << "grid = " << res.grid.nx << ' ' << res.grid.ny << '\n';
  out << "num_events = " << n << '\n';
  out << "players = " << res.players() << '\n';
  out << "t0 = " << detail::fmt_double(res.t0) << '\n';
  for (int j = 0; j < res.players(); ++j) {
    const auto& d = res.diagnostics[j];
    out << "[player " << (j + 1) << "]\n";
    out << "objective = " << detail::fmt_double(res.objectives[j]) << '\n';
    out << "theta = " << detail::fmt_double(res.thetas[j].x) << ' '
        << detail::fmt_double(res.thetas[j].y) << '\n';
    out << "ga_generations = " << d.ga_generations << '\n';
    out << "ga_termination = " << d.ga_termination << '\n';
    out << "refine_iterations = " << d.refine_iterations << '\n';
    out << "refine_termination = " << d.refine_termination << '\n';
    out << "polish_flips = " << d.polish_flips << '\n';
    out << "z =";
    const auto& z = res.strategies[j];
    for (Eigen::Index k = 0; k < z.size(); ++k) out << ' ' << detail::fmt_double(z[k]);
    out << '\n';
  }
  if (!out) throw IoError("save_result: write failure on '" + path + "'");
}

inline EquilibriumResult load_result(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_result: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "evgnep-result 1")
    throw ParseError("load_result: " + path + ": missing 'evgnep-result 1' header");

  EquilibriumResult res;
  Eigen::Index num_events = 0;
  int players = 0;
  int current = -1;  // player index being parsed
  int lineno = 1;
  auto fail = [&](const std::string& msg) {
    return ParseError("load_result: " + path + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("[player ", 0) == 0) {
      ++current;
      res.strategies.emplace_back();
      res.thetas.emplace_back();
      res.objectives.push_back(0.0);
      res.diagnostics.emplace_back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw fail("expected 'key = value'");
    std::string key = line.substr(0, eq);
    while (!key.empty() && key.back() == ' ') key.pop_back();
    std::istringstream vals(line.substr(eq + 1));
    auto need = [&](bool ok) {
      if (!ok) throw fail("malformed value for '" + key + "'");
    };
    if (current < 0) {
      if (key == "grid")
        need(static_cast<bool>(vals >> res.grid.nx >> res.grid.ny));
      else if (key == "num_events")
        need(static_cast<bool>(vals >> num_events));
      else if (key == "players")
        need(static_cast<bool>(vals >> players));
      else if (key == "t0")
        need(static_cast<bool>(vals >> res.t0));
      else
        throw fail("unknown key '" + key + "'");
    } else {
      auto& d = res.diagnostics[current];
      if (key == "objective")
        need(static_cast<bool>(vals >> res.objectives[current]));
      else if (key == "theta")
        need(static_cast<bool>(vals >> res.thetas[current].x >> res.thetas[current].y));
      else if (key == "ga_generations")
        need(static_cast<bool>(vals >> d.ga_generations));
      else if (key == "ga_termination")
        need(static_cast<bool>(vals >> d.ga_termination));
      else if (key == "refine_iterations")
        need(static_cast<bool>(vals >> d.refine_iterations));
      else if (key == "refine_termination")
        need(static_cast<bool>(vals >> d.refine_termination));
      else if (key == "polish_flips")
        need(static_cast<bool>(vals >> d.polish_flips));
      else if (key == "z") {
        std::vector<double> zv;
        double v;
        while (vals >> v) zv.push_back(v);
        need(static_cast<Eigen::Index>(zv.size()) == num_events);
        res.strategies[current] = Eigen::Map<const Eigen::ArrayXd>(zv.data(), zv.size());
      } else {
        throw fail("unknown key '" + key + "'");
      }
    }
  }
  if (static_cast<int>(res.strategies.size()) != players)
    throw ParseError("load_result: " + path + ": player count mismatch");
  for (const auto& z : res.strategies)
    if (z.size() != num_events)
      throw ParseError("load_result: " + path + ": strategy length mismatch");
  return res;
}

}  // namespace evgnep
