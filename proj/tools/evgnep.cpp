// Command-line front end: synthesize scenes, segment event streams by
// N-level equilibrium solving, verify results, and render images.

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "evgnep/config.hpp"
#include "evgnep/events.hpp"
#include "evgnep/image_io.hpp"
#include "evgnep/imaging.hpp"
#include "evgnep/result_io.hpp"
#include "evgnep/solver.hpp"

namespace fs = std::filesystem;
using namespace evgnep;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitSolver = 2;
constexpr int kExitVerification = 3;

std::string fmt(double v) { return detail::fmt_double(v); }

EventSet load_input(const RunConfig& cfg) {
  cfg.validate_input_choice();
  EventSet es;
  if (!cfg.scene_path.empty()) {
    es = synthesize(parse_scene_file(cfg.scene_path), cfg.seed);
  } else {
    if (cfg.grid.nx < 1 || cfg.grid.ny < 1)
      throw ValidationError("segment: --grid NX NY required with --events");
    es = load_events(cfg.events_path, cfg.grid);
  }
  if (!cfg.keep_windows.empty()) es = filter_time_window(es, cfg.keep_windows);
  return es;
}

EventSet select_events(const EventSet& es, const Strategy& z) {
  std::vector<Event> rows;
  std::vector<int> labels;
  for (Eigen::Index k = 0; k < es.size(); ++k)
    if (z[k] >= 0.5) {
      rows.push_back(es.event(k));
      if (es.has_labels()) labels.push_back(es.labels[k]);
    }
  return detail::from_rows(rows, es.grid, std::move(labels));
}

Eigen::ArrayXXi composite_image(const EventSet& es, const EquilibriumResult& res) {
  Eigen::ArrayXXi levels = Eigen::ArrayXXi::Zero(es.grid.nx, es.grid.ny);
  for (int j = 0; j < res.players(); ++j)
    for (Eigen::Index k = 0; k < es.size(); ++k)
      if (res.strategies[j][k] >= 0.5) {
        const int px = static_cast<int>(es.x[k]), py = static_cast<int>(es.y[k]);
        if (levels(px - 1, py - 1) == 0) levels(px - 1, py - 1) = j + 1;
      }
  return levels;
}

void write_player_images(const EventSet& es, const EquilibriumResult& res,
                         const ModelParams& params, const fs::path& out) {
  for (int j = 0; j < res.players(); ++j) {
    const auto& z = res.strategies[j];
    if ((z < 0.5).all())
      std::cerr << "warning: player " << (j + 1) << " selects no events; layer is blank\n";
    const WarpedImage img = image_of_warped_events(z, es, res.thetas[j], params, Gate::exact);
    write_pgm(img, (out / ("player" + std::to_string(j + 1) + "_warped.pgm")).string());
  }
  write_pgm_indexed(composite_image(es, res), std::max(1, res.players()),
                    (out / "composite.pgm").string());
}

int cmd_synth(const std::string& scene_path, const std::string& out_dir, std::uint64_t seed) {
  const SceneSpec spec = parse_scene_file(scene_path);
  const EventSet es = synthesize(spec, seed);
  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  save_events(es, (out / "events.csv").string());
  RunConfig manifest;
  manifest.scene_path = scene_path;
  manifest.grid = spec.grid;
  manifest.seed = seed;
  save_config(manifest, (out / "manifest.txt").string(),
              {{"num_events", std::to_string(es.size())},
               {"num_objects", std::to_string(spec.objects.size())},
               {"noise_events", std::to_string(spec.noise_events)}});
  std::cout << "synth: wrote " << es.size() << " events to " << (out / "events.csv").string()
            << '\n';
  return kExitOk;
}

int cmd_segment(RunConfig cfg, const std::string& out_dir) {
  const EventSet es = load_input(cfg);
  cfg.grid = es.grid;
  cfg.model.t0 = cfg.resolve_t0(es);
  cfg.model.validate();

  EquilibriumResult res;
  try {
    res = solve_nlevel(cfg.players, es, cfg.model, cfg.ga, cfg.refine);
  } catch (const LevelInfeasibleError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  }

  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  save_result(res, (out / "result.txt").string());
  std::vector<std::pair<std::string, std::string>> metrics;
  for (int j = 0; j < res.players(); ++j) {
    save_events(select_events(es, res.strategies[j]),
                (out / ("player" + std::to_string(j + 1) + ".csv")).string());
    const WarpedImage warped =
        image_of_warped_events(res.strategies[j], es, res.thetas[j], cfg.model, Gate::exact);
    const WarpedImage base =
        image_of_warped_events(res.strategies[j], es, Theta{0.0, 0.0}, cfg.model, Gate::exact);
    const std::string pj = "player" + std::to_string(j + 1);
    metrics.emplace_back(pj + "_objective", fmt(res.objectives[j]));
    metrics.emplace_back(pj + "_theta", fmt(res.thetas[j].x) + " " + fmt(res.thetas[j].y));
    metrics.emplace_back(pj + "_entropy_warped", fmt(entropy(warped, cfg.model)));
    metrics.emplace_back(pj + "_entropy_baseline", fmt(entropy(base, cfg.model)));
    metrics.emplace_back(pj + "_selected", std::to_string((res.strategies[j] >= 0.5).count()));
  }
  write_player_images(es, res, cfg.model, out);
  save_config(cfg, (out / "manifest.txt").string(), metrics);
  std::cout << "segment: " << cfg.players << " players, " << es.size() << " events, results in "
            << out_dir << '\n';
  return kExitOk;
}

int cmd_verify(const std::string& result_path, const std::string& events_path, RunConfig cfg,
               const std::string& report_path) {
  const EquilibriumResult res = load_result(result_path);
  const EventSet es = load_events(events_path, res.grid);
  cfg.model.t0 = res.t0;
  cfg.model.validate();
  const VerifyReport report = verify_equilibrium(res, es, cfg.model);

  auto print_check = [](const char* name, const VerifyCheck& c) {
    std::cout << name << ": " << (c.pass ? "pass" : "FAIL") << '\n';
    for (const auto& v : c.violations) std::cout << "  " << v << '\n';
  };
  print_check("feasibility", report.feasibility);
  print_check("masking", report.masking);
  print_check("local-optimality", report.local_optimality);
  std::cout << "verify: " << (report.pass() ? "pass" : "FAIL") << '\n';

  if (!report_path.empty()) {
    std::ofstream out(report_path, std::ios::binary);
    if (!out) throw IoError("verify: cannot open '" + report_path + "' for writing");
    auto dump = [&](const char* name, const VerifyCheck& c) {
      out << name << " = " << (c.pass ? "pass" : "fail") << '\n';
      for (const auto& v : c.violations) out << name << "_violation = " << v << '\n';
    };
    dump("feasibility", report.feasibility);
    dump("masking", report.masking);
    dump("local_optimality", report.local_optimality);
    out << "overall = " << (report.pass() ? "pass" : "fail") << '\n';
  }
  return report.pass() ? kExitOk : kExitVerification;
}

int cmd_render(const std::string& result_path, const std::string& events_path,
               const std::string& out_dir, RunConfig cfg) {
  const EquilibriumResult res = load_result(result_path);
  const EventSet es = load_events(events_path, res.grid);
  cfg.model.t0 = res.t0;
  cfg.model.validate();
  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  write_player_images(es, res, cfg.model, out);

  // x-y-t scatter as three player-indexed 2D projections; t binned to 256.
  constexpr int kTimeBins = 256;
  const double t_lo = es.t_min(), t_hi = es.t_max();
  const double t_span = t_hi > t_lo ? t_hi - t_lo : 1.0;
  auto t_bin = [&](double t) {
    return std::min(kTimeBins - 1, static_cast<int>((t - t_lo) / t_span * kTimeBins));
  };
  Eigen::ArrayXXi xy = Eigen::ArrayXXi::Zero(es.grid.nx, es.grid.ny);
  Eigen::ArrayXXi xt = Eigen::ArrayXXi::Zero(es.grid.nx, kTimeBins);
  Eigen::ArrayXXi yt = Eigen::ArrayXXi::Zero(es.grid.ny, kTimeBins);
  for (int j = 0; j < res.players(); ++j)
    for (Eigen::Index k = 0; k < es.size(); ++k)
      if (res.strategies[j][k] >= 0.5) {
        const int px = static_cast<int>(es.x[k]) - 1;
        const int py = static_cast<int>(es.y[k]) - 1;
        const int pt = t_bin(es.t[k]);
        if (xy(px, py) == 0) xy(px, py) = j + 1;
        if (xt(px, pt) == 0) xt(px, pt) = j + 1;
        if (yt(py, pt) == 0) yt(py, pt) = j + 1;
      }
  const int maxval = std::max(1, res.players());
  write_pgm_indexed(xy, maxval, (out / "proj_xy.pgm").string());
  write_pgm_indexed(xt, maxval, (out / "proj_xt.pgm").string());
  write_pgm_indexed(yt, maxval, (out / "proj_yt.pgm").string());
  std::cout << "render: wrote images to " << out_dir << '\n';
  return kExitOk;
}

// Shared model/solver flags. Values given on the command line override the
// config file; everything else keeps the config file (or default) value.
struct CliOptions {
  std::string config_path;
  std::string events_path;
  std::string scene_path;
  std::vector<int> grid;
  int players = 0;
  std::uint64_t seed = 0;
  std::string t0 = "min";
  std::vector<std::string> keep_windows;
  double lambda1 = 0, lambda2 = 0, alpha = 0, beta = 0, gamma = 0, m = 0, n = 0;
  int ga_population = 0, ga_max_generations = 0, ga_stall_generations = 0, ga_elite = 0;
  double ga_stall_tolerance = 0, ga_mutation_rate = 0, ga_crossover_rate = 0;
  double refine_tolerance = 0;
  int refine_max_iterations = 0;
};

void add_common_options(CLI::App* sub, CliOptions& o) {
  sub->add_option("--config", o.config_path, "config/manifest file; flags override its values");
  sub->add_option("--events", o.events_path, "input event CSV (x,y,t[,label])");
  sub->add_option("--scene", o.scene_path, "scene spec file (synthesized input)");
  sub->add_option("--grid", o.grid, "grid dims NX NY")->expected(2);
  sub->add_option("--players", o.players, "number of players N");
  sub->add_option("--seed", o.seed, "RNG seed");
  sub->add_option("--t0", o.t0, "reference time policy: min, mid, or a numeric value");
  sub->add_option("--keep-window", o.keep_windows, "keep events with t in t_lo:t_hi (repeatable)");
  sub->add_option("--lambda1", o.lambda1, "variance penalty weight");
  sub->add_option("--lambda2", o.lambda2, "selection regularizer weight");
  sub->add_option("--alpha", o.alpha, "entropy scale (alpha + beta = 1)");
  sub->add_option("--beta", o.beta, "entropy shift (alpha + beta = 1)");
  sub->add_option("--gamma", o.gamma, "Kronecker relaxation decay");
  sub->add_option("--m", o.m, "Heaviside relaxation steepness");
  sub->add_option("--n", o.n, "Heaviside relaxation shift");
  sub->add_option("--ga-population", o.ga_population, "GA population size");
  sub->add_option("--ga-max-generations", o.ga_max_generations, "GA generation cap");
  sub->add_option("--ga-stall-generations", o.ga_stall_generations, "GA stall window");
  sub->add_option("--ga-stall-tolerance", o.ga_stall_tolerance, "GA stall tolerance");
  sub->add_option("--ga-mutation-rate", o.ga_mutation_rate, "GA per-bit mutation rate");
  sub->add_option("--ga-crossover-rate", o.ga_crossover_rate, "GA crossover rate");
  sub->add_option("--ga-elite", o.ga_elite, "GA elite count");
  sub->add_option("--refine-tolerance", o.refine_tolerance, "refinement tolerance");
  sub->add_option("--refine-max-iterations", o.refine_max_iterations, "refinement iteration cap");
}

RunConfig build_config(const CLI::App* sub, const CliOptions& o) {
  RunConfig cfg;
  if (!o.config_path.empty()) cfg = load_config(o.config_path);
  auto set = [&](const char* flag) { return sub->count(flag) > 0; };
  if (set("--events")) {
    cfg.events_path = o.events_path;
    cfg.scene_path.clear();
  }
  if (set("--scene")) {
    cfg.scene_path = o.scene_path;
    cfg.events_path.clear();
  }
  if (set("--grid")) cfg.grid = Grid{o.grid[0], o.grid[1]};
  if (set("--players")) cfg.players = o.players;
  if (set("--seed")) {
    cfg.seed = o.seed;
    cfg.ga.seed = o.seed;
  }
  if (set("--t0")) {
    if (o.t0 == "min" || o.t0 == "mid") {
      cfg.t0_policy = o.t0;
    } else {
      cfg.t0_policy = "value";
      cfg.t0_value = std::stod(o.t0);
    }
  }
  if (set("--keep-window")) {
    cfg.keep_windows.clear();
    for (const auto& w : o.keep_windows) cfg.keep_windows.push_back(detail::parse_window(w));
  }
  if (set("--lambda1")) cfg.model.lambda1 = o.lambda1;
  if (set("--lambda2")) cfg.model.lambda2 = o.lambda2;
  if (set("--alpha")) cfg.model.alpha = o.alpha;
  if (set("--beta")) cfg.model.beta = o.beta;
  if (set("--gamma")) cfg.model.relax.gamma = o.gamma;
  if (set("--m")) cfg.model.relax.m = o.m;
  if (set("--n")) cfg.model.relax.n = o.n;
  if (set("--ga-population")) cfg.ga.population = o.ga_population;
  if (set("--ga-max-generations")) cfg.ga.max_generations = o.ga_max_generations;
  if (set("--ga-stall-generations")) cfg.ga.stall_generations = o.ga_stall_generations;
  if (set("--ga-stall-tolerance")) cfg.ga.stall_tolerance = o.ga_stall_tolerance;
  if (set("--ga-mutation-rate")) cfg.ga.mutation_rate = o.ga_mutation_rate;
  if (set("--ga-crossover-rate")) cfg.ga.crossover_rate = o.ga_crossover_rate;
  if (set("--ga-elite")) cfg.ga.elite_count = o.ga_elite;
  if (set("--refine-tolerance")) cfg.refine.tolerance = o.refine_tolerance;
  if (set("--refine-max-iterations")) cfg.refine.max_iterations = o.refine_max_iterations;
  cfg.ga.seed = cfg.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"event-stream motion segmentation by N-level equilibrium solving"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "synthesize a labeled event stream from a scene spec");
  std::string synth_scene, synth_out = "out";
  std::uint64_t synth_seed = 0;
  synth->add_option("--scene", synth_scene, "scene spec file")->required();
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--seed", synth_seed, "RNG seed");

  // segment
  auto* segment = app.add_subcommand("segment", "segment events into per-player clusters");
  CliOptions seg_opts;
  std::string seg_out = "out";
  add_common_options(segment, seg_opts);
  segment->add_option("--out", seg_out, "output directory");

  // verify
  auto* verify = app.add_subcommand("verify", "check a result file for equilibrium properties");
  CliOptions ver_opts;
  std::string ver_result, ver_events, ver_report;
  add_common_options(verify, ver_opts);
  verify->add_option("--result", ver_result, "result file from segment")->required();
  verify->add_option("--report", ver_report, "write machine-readable report here");

  // render
  auto* render = app.add_subcommand("render", "render result images");
  CliOptions ren_opts;
  std::string ren_result, ren_out = "out";
  add_common_options(render, ren_opts);
  render->add_option("--result", ren_result, "result file from segment")->required();
  render->add_option("--out", ren_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_scene, synth_out, synth_seed);
    if (segment->parsed()) return cmd_segment(build_config(segment, seg_opts), seg_out);
    if (verify->parsed()) {
      if (ver_opts.events_path.empty())
        throw ValidationError("verify: --events is required");
      return cmd_verify(ver_result, ver_opts.events_path, build_config(verify, ver_opts),
                        ver_report);
    }
    if (render->parsed()) {
      if (ren_opts.events_path.empty())
        throw ValidationError("render: --events is required");
      return cmd_render(ren_result, ren_opts.events_path, ren_out, build_config(render, ren_opts));
    }
  } catch (const LevelInfeasibleError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  } catch (const DegenerateSelectionError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  } catch (const DegenerateMotionError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitOk;
}
