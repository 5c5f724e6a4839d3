#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "evgnep/common.hpp"
#include "evgnep/events.hpp"
#include "evgnep/imaging.hpp"
#include "evgnep/kinematics.hpp"

namespace evgnep {

// Player strategy: per-event confidence vector in [0,1]^{N_e}.
using Strategy = Eigen::ArrayXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-event confidence budget left for the current player:
// remaining = b - sum of earlier players' strategies.
struct LevelConstraint {
  Eigen::ArrayXd remaining;

  static LevelConstraint from_prior(const std::vector<Strategy>& prior, Eigen::Index n_events) {
    Eigen::ArrayXd rem = Eigen::ArrayXd::Ones(n_events);
    for (const auto& z : prior) {
      if (z.size() != n_events) throw ValidationError("constraint: prior strategy size mismatch");
      rem -= z;
    }
    if ((rem < -1e-9).any()) throw ValidationError("constraint: prior strategies exceed budget");
    return LevelConstraint{rem.max(0.0).min(1.0)};
  }

  bool unclaimed(Eigen::Index k) const { return remaining[k] >= 1.0 - 1e-9; }
};

struct GAConfig {
  int population = 50;
  int max_generations = 1000;
  double stall_tolerance = 1e-2;
  int stall_generations = 50;
  double mutation_rate = 0.0;  // <= 0 means 1 / genome length
  double crossover_rate = 0.9;
  int elite_count = 2;
  std::uint64_t seed = 0;

  void validate() const {
    if (population < 2) throw ValidationError("ga: population must be >= 2");
    if (max_generations < 1) throw ValidationError("ga: max_generations must be >= 1");
    if (mutation_rate > 1.0 || crossover_rate < 0.0 || crossover_rate > 1.0)
      throw ValidationError("ga: rates must be in [0,1]");
    if (elite_count < 0 || elite_count >= population)
      throw ValidationError("ga: elite_count must be in [0, population)");
  }
};

struct RefineConfig {
  double tolerance = 1e-4;  // on projected-gradient norm and objective stall
  int max_iterations = 500;
  double armijo_coeff = 1e-4;
  double backtrack_factor = 0.5;

  void validate() const {
    if (!(tolerance > 0.0)) throw ValidationError("refine: tolerance must be > 0");
    if (max_iterations < 0) throw ValidationError("refine: max_iterations must be >= 0");
    if (!(armijo_coeff > 0.0 && armijo_coeff < 1.0))
      throw ValidationError("refine: armijo coefficient must be in (0,1)");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
      throw ValidationError("refine: backtrack factor must be in (0,1)");
  }
};

struct LevelDiagnostics {
  int ga_generations = 0;
  std::string ga_termination;
  int refine_iterations = 0;
  std::string refine_termination;
  int polish_flips = 0;
};

struct EquilibriumResult {
  std::vector<Strategy> strategies;
  std::vector<Theta> thetas;
  std::vector<double> objectives;  // exact-mode J of the final strategies
  std::vector<LevelDiagnostics> diagnostics;
  double t0 = 0.0;
  Grid grid;

  int players() const { return static_cast<int>(strategies.size()); }
};

// Exact-mode objective with degenerate candidates mapped to +inf so the
// global search stays defined on all of {0,1}^{N_e}.
inline double fitness_or_inf(const Strategy& z, const EventSet& es, const ModelParams& params) {
  try {
    return objective(z, es, params, Gate::exact);
  } catch (const DegenerateSelectionError&) {
    return kInf;
  } catch (const DegenerateMotionError&) {
    return kInf;
  }
}

namespace detail {

inline std::vector<Eigen::Index> unclaimed_indices(const LevelConstraint& cons) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index k = 0; k < cons.remaining.size(); ++k)
    if (cons.unclaimed(k)) idx.push_back(k);
  return idx;
}

inline void require_solvable(const std::vector<Eigen::Index>& idx, const EventSet& es) {
  if (idx.size() < 2)
    throw LevelInfeasibleError("level infeasible: fewer than 2 unclaimed events");
  bool distinct = false;
  for (std::size_t i = 1; i < idx.size() && !distinct; ++i)
    if (es.t[idx[i]] != es.t[idx[0]]) distinct = true;
  if (!distinct)
    throw LevelInfeasibleError("level infeasible: unclaimed events share a single timestamp");
}

inline Strategy decode(const std::vector<char>& genome, const std::vector<Eigen::Index>& idx,
                       Eigen::Index n_events) {
  Strategy z = Strategy::Zero(n_events);
  for (std::size_t i = 0; i < idx.size(); ++i) z[idx[i]] = genome[i] ? 1.0 : 0.0;
  return z;
}

}  // namespace detail

// Generational GA over binary strategies restricted to unclaimed events:
// tournament selection (size 3), uniform crossover, per-bit mutation,
// elitism. Fitness is the exact-mode objective. Deterministic per seed.
inline Strategy ga_minimize(const EventSet& es, const LevelConstraint& cons,
                            const ModelParams& params, const GAConfig& cfg,
                            LevelDiagnostics* diag = nullptr) {
  cfg.validate();
  const auto idx = detail::unclaimed_indices(cons);
  detail::require_solvable(idx, es);
  const std::size_t glen = idx.size();
  const double mut = cfg.mutation_rate > 0.0 ? cfg.mutation_rate : 1.0 / static_cast<double>(glen);

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, cfg.population - 1);

  std::vector<std::vector<char>> pop(cfg.population, std::vector<char>(glen, 1));
  for (int i = 1; i < cfg.population; ++i)
    for (auto& bit : pop[i]) bit = coin(rng) < 0.5 ? 1 : 0;

  std::vector<double> fit(cfg.population);
  auto evaluate = [&](const std::vector<char>& g) {
    return fitness_or_inf(detail::decode(g, idx, es.size()), es, params);
  };
  for (int i = 0; i < cfg.population; ++i) fit[i] = evaluate(pop[i]);

  auto tournament = [&]() -> int {
    int best = pick(rng);
    for (int r = 1; r < 3; ++r) {
      const int c = pick(rng);
      if (fit[c] < fit[best] || (fit[c] == fit[best] && c < best)) best = c;
    }
    return best;
  };

  std::vector<double> best_history;
  int generations = 0;
  std::string termination = "max_generations";
  for (int gen = 0; gen < cfg.max_generations; ++gen) {
    generations = gen + 1;
    // elite indices, best first
    std::vector<int> order(cfg.population);
    for (int i = 0; i < cfg.population; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fit[a] < fit[b]; });
    best_history.push_back(fit[order[0]]);

    if (static_cast<int>(best_history.size()) > cfg.stall_generations) {
      const double prev = best_history[best_history.size() - 1 - cfg.stall_generations];
      const double cur = best_history.back();
      if (std::isfinite(cur) && prev - cur < cfg.stall_tolerance) {
        termination = "stall";
        break;
      }
    }

    std::vector<std::vector<char>> next;
    next.reserve(cfg.population);
    for (int e = 0; e < cfg.elite_count; ++e) next.push_back(pop[order[e]]);
    while (static_cast<int>(next.size()) < cfg.population) {
      const auto& pa = pop[tournament()];
      const auto& pb = pop[tournament()];
      std::vector<char> child(glen);
      if (coin(rng) < cfg.crossover_rate) {
        for (std::size_t b = 0; b < glen; ++b) child[b] = coin(rng) < 0.5 ? pa[b] : pb[b];
      } else {
        child = pa;
      }
      for (std::size_t b = 0; b < glen; ++b)
        if (coin(rng) < mut) child[b] = child[b] ? 0 : 1;
      next.push_back(std::move(child));
    }
    pop = std::move(next);
    for (int i = 0; i < cfg.population; ++i) fit[i] = evaluate(pop[i]);
  }

  int best = 0;
  for (int i = 1; i < cfg.population; ++i)
    if (fit[i] < fit[best]) best = i;
  if (!std::isfinite(fit[best]))
    throw DegenerateSelectionError("ga_minimize: every candidate strategy is degenerate");
  if (diag) {
    diag->ga_generations = generations;
    diag->ga_termination = termination;
  }
  return detail::decode(pop[best], idx, es.size());
}

// Projected gradient with Armijo backtracking on the box [0, remaining_k].
// Works on the relaxed objective; never increases it.
inline Strategy refine(const Strategy& z0, const EventSet& es, const LevelConstraint& cons,
                       const ModelParams& params, const RefineConfig& cfg,
                       LevelDiagnostics* diag = nullptr) {
  cfg.validate();
  if (z0.size() != cons.remaining.size()) throw ValidationError("refine: size mismatch");
  if ((z0 < -1e-12).any() || (z0 > cons.remaining + 1e-9).any())
    throw ValidationError("refine: z0 violates box constraints");

  auto project = [&](const Eigen::ArrayXd& v) -> Eigen::ArrayXd {
    return v.max(0.0).min(cons.remaining);
  };
  auto relaxed_j = [&](const Strategy& z) { return objective(z, es, params, Gate::relaxed); };

  Strategy z = project(z0);
  double j_cur = relaxed_j(z);
  int iterations = 0;
  std::string termination = "max_iterations";
  double step = 1.0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const Eigen::ArrayXd g = objective_gradient(z, es, params);
    const double pg_norm = (z - project(z - g)).matrix().norm();
    if (pg_norm <= cfg.tolerance) {
      termination = "projected_gradient";
      break;
    }
    // Armijo backtracking; candidates whose objective is undefined are
    // treated as failed steps.
    double s = step;
    bool accepted = false;
    while (s > 1e-14) {
      const Strategy cand = project(z - s * g);
      double j_cand;
      try {
        j_cand = relaxed_j(cand);
      } catch (const Error&) {
        s *= cfg.backtrack_factor;
        continue;
      }
      const double model = (g * (cand - z)).sum();
      if (j_cand <= j_cur + cfg.armijo_coeff * model) {
        const double decrease = j_cur - j_cand;
        z = cand;
        j_cur = j_cand;
        accepted = true;
        ++iterations;
        step = std::min(1.0, s * 2.0);
        if (decrease <= cfg.tolerance) {
          termination = "objective_stall";
        }
        break;
      }
      s *= cfg.backtrack_factor;
    }
    if (!accepted) {
      termination = "line_search_failed";
      break;
    }
    if (termination == "objective_stall") break;
    termination = "max_iterations";
  }
  if (diag) {
    diag->refine_iterations = iterations;
    diag->refine_termination = termination;
  }
  return z;
}

// Exhaustive minimum of the exact-mode objective over feasible binary
// strategies; ties broken by lexicographically smallest vector. Capped at
// 20 unclaimed events.
inline std::pair<Strategy, double> brute_force_oracle(const EventSet& es,
                                                      const LevelConstraint& cons,
                                                      const ModelParams& params) {
  const auto idx = detail::unclaimed_indices(cons);
  const std::size_t m = idx.size();
  if (m > 20)
    throw ValidationError("brute_force_oracle: " + std::to_string(m) +
                          " unclaimed events exceed the enumeration cap of 20");
  double best_j = kInf;
  Strategy best_z;
  std::vector<char> genome(m);
  const std::uint64_t total = std::uint64_t{1} << m;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    for (std::size_t i = 0; i < m; ++i)
      genome[i] = (mask >> (m - 1 - i)) & 1u;  // component 0 is the most significant bit
    const Strategy z = detail::decode(genome, idx, es.size());
    const double j = fitness_or_inf(z, es, params);
    if (j < best_j) {
      best_j = j;
      best_z = z;
    }
  }
  if (!std::isfinite(best_j))
    throw DegenerateSelectionError("brute_force_oracle: all feasible binary strategies degenerate");
  return {best_z, best_j};
}

namespace detail {

// Greedy single-bit-flip descent on the exact-mode objective, restricted to
// feasible flips. Strict decreases only, so it terminates.
inline Strategy bitflip_polish(Strategy z, const EventSet& es, const LevelConstraint& cons,
                               const ModelParams& params, int* flips = nullptr) {
  double j_cur = fitness_or_inf(z, es, params);
  bool improved = true;
  int count = 0;
  while (improved) {
    improved = false;
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      const bool selected = z[k] >= 0.5;
      if (!selected && !cons.unclaimed(k)) continue;
      Strategy cand = z;
      cand[k] = selected ? 0.0 : 1.0;
      const double j_cand = fitness_or_inf(cand, es, params);
      if (j_cand < j_cur) {
        z = std::move(cand);
        j_cur = j_cand;
        improved = true;
        ++count;
      }
    }
  }
  if (flips) *flips = count;
  return z;
}

}  // namespace detail

// One level of the N-level scheme: constraint from prior strategies, GA
// global phase, projected-gradient refinement, then binarization at 0.5
// followed by bit-flip descent so the returned strategy is binary and
// single-flip locally optimal under the exact objective.
inline Strategy solve_level(int player, const std::vector<Strategy>& prior, const EventSet& es,
                            const ModelParams& params, const GAConfig& ga_cfg,
                            const RefineConfig& refine_cfg, LevelDiagnostics* diag = nullptr) {
  (void)player;
  const LevelConstraint cons = LevelConstraint::from_prior(prior, es.size());
  const Strategy z_ga = ga_minimize(es, cons, params, ga_cfg, diag);
  const Strategy z_ref = refine(z_ga, es, cons, params, refine_cfg, diag);
  Strategy z_bin = (z_ref >= 0.5).cast<double>();
  // Binarization may leave z outside the feasible box where remaining is
  // fractional; clamp back before polishing.
  z_bin = z_bin.min(cons.remaining.unaryExpr([](double r) { return r >= 1.0 - 1e-9 ? 1.0 : 0.0; }));
  int flips = 0;
  Strategy z = detail::bitflip_polish(std::move(z_bin), es, cons, params, &flips);
  if (diag) diag->polish_flips = flips;
  return z;
}

// Algorithm: solve the levels in ascending order, single pass, each player
// constrained by the budget left over from the previous players.
inline EquilibriumResult solve_nlevel(int n_players, const EventSet& es, const ModelParams& params,
                                      const GAConfig& ga_cfg, const RefineConfig& refine_cfg) {
  if (n_players < 1) throw ValidationError("solve_nlevel: N must be >= 1");
  params.validate();
  EquilibriumResult res;
  res.t0 = params.t0;
  res.grid = es.grid;
  for (int j = 1; j <= n_players; ++j) {
    GAConfig level_cfg = ga_cfg;
    level_cfg.seed = ga_cfg.seed + static_cast<std::uint64_t>(j);
    LevelDiagnostics diag;
    Strategy z;
    try {
      z = solve_level(j, res.strategies, es, params, level_cfg, refine_cfg, &diag);
    } catch (const Error& e) {
      throw LevelInfeasibleError("level " + std::to_string(j) + ": " + e.what());
    }
    res.strategies.push_back(z);
    res.thetas.push_back(estimate_theta(z, es, Gate::exact));
    res.objectives.push_back(objective(z, es, params, Gate::exact));
    res.diagnostics.push_back(diag);
  }
  return res;
}

struct VerifyCheck {
  bool pass = true;
  std::vector<std::string> violations;
};

struct VerifyReport {
  VerifyCheck feasibility;  // shared budget + box membership
  VerifyCheck masking;      // events claimed earlier stay unclaimed later
  VerifyCheck local_optimality;  // no feasible single-bit flip lowers exact J

  bool pass() const { return feasibility.pass && masking.pass && local_optimality.pass; }
};

// Structural equilibrium check of a solver result against the event set.
inline VerifyReport verify_equilibrium(const EquilibriumResult& res, const EventSet& es,
                                       const ModelParams& params) {
  const Eigen::Index n = es.size();
  for (const auto& z : res.strategies)
    if (z.size() != n)
      throw ValidationError("verify: strategy length " + std::to_string(z.size()) +
                            " does not match event count " + std::to_string(n));
  VerifyReport report;
  const int np = res.players();

  Eigen::ArrayXd total = Eigen::ArrayXd::Zero(n);
  for (int j = 0; j < np; ++j) {
    const auto& z = res.strategies[j];
    for (Eigen::Index k = 0; k < n; ++k)
      if (z[k] < -1e-12 || z[k] > 1.0 + 1e-12) {
        report.feasibility.pass = false;
        report.feasibility.violations.push_back("player " + std::to_string(j + 1) + " component " +
                                                std::to_string(k + 1) + " outside [0,1]");
      }
    total += z;
  }
  for (Eigen::Index k = 0; k < n; ++k)
    if (total[k] > 1.0 + 1e-9) {
      report.feasibility.pass = false;
      report.feasibility.violations.push_back("component " + std::to_string(k + 1) +
                                              ": summed confidence exceeds budget");
    }

  std::vector<Eigen::ArrayXd> binarized;
  binarized.reserve(np);
  for (const auto& z : res.strategies) binarized.push_back((z >= 0.5).cast<double>());

  for (int j = 1; j < np; ++j)
    for (Eigen::Index k = 0; k < n; ++k) {
      bool claimed_earlier = false;
      for (int i = 0; i < j && !claimed_earlier; ++i) claimed_earlier = binarized[i][k] == 1.0;
      if (claimed_earlier && res.strategies[j][k] > 1e-9) {
        report.masking.pass = false;
        report.masking.violations.push_back("player " + std::to_string(j + 1) +
                                            " claims component " + std::to_string(k + 1) +
                                            " already taken by an earlier player");
      }
    }

  for (int j = 0; j < np; ++j) {
    const Eigen::ArrayXd& zb = binarized[j];
    Eigen::ArrayXd others = Eigen::ArrayXd::Zero(n);
    for (int i = 0; i < np; ++i)
      if (i != j) others += binarized[i];
    const double base = fitness_or_inf(zb, es, params);
    for (Eigen::Index k = 0; k < n; ++k) {
      const bool selected = zb[k] == 1.0;
      if (!selected && others[k] >= 1.0 - 1e-9) continue;  // flip would break the budget
      Eigen::ArrayXd cand = zb;
      cand[k] = selected ? 0.0 : 1.0;
      const double j_cand = fitness_or_inf(cand, es, params);
      if (j_cand < base - 1e-9) {
        report.local_optimality.pass = false;
        report.local_optimality.violations.push_back(
            "player " + std::to_string(j + 1) + ": flipping component " + std::to_string(k + 1) +
            " lowers the objective");
      }
    }
  }
  return report;
}

}  // namespace evgnep
