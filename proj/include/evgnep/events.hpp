#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "evgnep/common.hpp"

namespace evgnep {

// Label id reserved for spurious (noise) events in synthetic data.
// Object labels are 1-based.
inline constexpr int kNoiseLabel = 0;

struct Event {
  int x = 0;  // pixel column, 1..nx
  int y = 0;  // pixel row, 1..ny
  double t = 0.0;  // seconds
};

// Column-wise storage of an ordered event collection. x and y hold integer
// pixel coordinates as doubles so kinematics can consume them directly.
struct EventSet {
  Eigen::ArrayXd x;
  Eigen::ArrayXd y;
  Eigen::ArrayXd t;
  Grid grid;
  std::vector<int> labels;  // empty, or one ground-truth id per event

  Eigen::Index size() const { return t.size(); }
  bool has_labels() const { return !labels.empty(); }

  Event event(Eigen::Index k) const {
    return Event{static_cast<int>(x[k]), static_cast<int>(y[k]), t[k]};
  }

  double t_min() const { return t.minCoeff(); }
  double t_max() const { return t.maxCoeff(); }
};

struct SceneObject {
  double cx = 0.0;  // circle center at t = 0
  double cy = 0.0;
  double radius = 0.0;
  double vx = 0.0;  // pixels/second
  double vy = 0.0;
};

struct SceneSpec {
  std::vector<SceneObject> objects;
  std::vector<double> timesteps;  // strictly increasing sample times
  Grid grid;
  int noise_events = 0;

  void validate() const {
    if (grid.nx < 1 || grid.ny < 1) throw ValidationError("scene: grid dims must be positive");
    if (objects.empty()) throw ValidationError("scene: at least one object required");
    if (timesteps.empty()) throw ValidationError("scene: at least one timestep required");
    for (std::size_t i = 1; i < timesteps.size(); ++i)
      if (!(timesteps[i] > timesteps[i - 1]))
        throw ValidationError("scene: timesteps must be strictly increasing");
    for (std::size_t i = 0; i < objects.size(); ++i) {
      const auto& o = objects[i];
      if (!(o.radius > 0.0))
        throw ValidationError("scene: object " + std::to_string(i + 1) + ": radius must be > 0");
      if (!std::isfinite(o.vx) || !std::isfinite(o.vy))
        throw ValidationError("scene: object " + std::to_string(i + 1) + ": velocity must be finite");
    }
    if (noise_events < 0) throw ValidationError("scene: noise_events must be >= 0");
  }
};

namespace detail {

inline EventSet from_rows(const std::vector<Event>& rows, Grid grid, std::vector<int> labels) {
  EventSet es;
  es.grid = grid;
  const auto n = static_cast<Eigen::Index>(rows.size());
  es.x.resize(n);
  es.y.resize(n);
  es.t.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    es.x[k] = rows[k].x;
    es.y[k] = rows[k].y;
    es.t[k] = rows[k].t;
  }
  es.labels = std::move(labels);
  return es;
}

inline bool parse_int(std::string_view s, int& out) {
  auto* first = s.data();
  auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline bool parse_double(std::string_view s, double& out) {
  auto* first = s.data();
  auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

// Reads `x,y,t[,label]` CSV. A header line is detected by a non-numeric
// first field and skipped. Row order is preserved.
inline EventSet load_events(const std::string& path, Grid grid) {
  if (grid.nx < 1 || grid.ny < 1) throw ValidationError("load_events: grid dims must be positive");
  std::ifstream in(path);
  if (!in) throw IoError("load_events: cannot open '" + path + "'");

  std::vector<Event> rows;
  std::vector<int> labels;
  std::string line;
  int lineno = 0;
  bool first_data_line = true;
  while (std::getline(in, line)) {
    ++lineno;
    auto sv = detail::trim(line);
    if (sv.empty()) continue;
    auto fields = detail::split(sv, ',');
    if (first_data_line) {
      int probe;
      if (!detail::parse_int(detail::trim(fields[0]), probe)) {
        first_data_line = false;
        continue;  // header
      }
    }
    first_data_line = false;
    if (fields.size() != 3 && fields.size() != 4)
      throw ParseError("load_events: " + path + ":" + std::to_string(lineno) +
                       ": expected 3 or 4 comma-separated fields");
    Event ev;
    if (!detail::parse_int(detail::trim(fields[0]), ev.x) ||
        !detail::parse_int(detail::trim(fields[1]), ev.y) ||
        !detail::parse_double(detail::trim(fields[2]), ev.t) || !std::isfinite(ev.t))
      throw ParseError("load_events: " + path + ":" + std::to_string(lineno) + ": malformed row '" +
                       std::string(sv) + "'");
    if (!grid.contains(ev.x, ev.y))
      throw ValidationError("load_events: " + path + ":" + std::to_string(lineno) + ": event (" +
                            std::to_string(ev.x) + "," + std::to_string(ev.y) +
                            ") outside grid " + std::to_string(grid.nx) + "x" + std::to_string(grid.ny));
    if (fields.size() == 4) {
      int lab;
      if (!detail::parse_int(detail::trim(fields[3]), lab))
        throw ParseError("load_events: " + path + ":" + std::to_string(lineno) + ": malformed label");
      labels.resize(rows.size(), kNoiseLabel);
      labels.push_back(lab);
    } else if (!labels.empty()) {
      labels.push_back(kNoiseLabel);
    }
    rows.push_back(ev);
  }
  if (rows.empty()) throw ParseError("load_events: " + path + ": no events");
  return detail::from_rows(rows, grid, std::move(labels));
}

// Writes `x,y,t[,label]` CSV; t printed with %.17g so load(save(es))
// round-trips field-exactly.
inline void save_events(const EventSet& es, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_events: cannot open '" + path + "' for writing");
  char buf[64];
  for (Eigen::Index k = 0; k < es.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g", es.t[k]);
    out << static_cast<int>(es.x[k]) << ',' << static_cast<int>(es.y[k]) << ',' << buf;
    if (es.has_labels()) out << ',' << es.labels[k];
    out << '\n';
  }
  if (!out) throw IoError("save_events: write failure on '" + path + "'");
}

// Keeps events whose timestamp lies in the union of the closed intervals.
inline EventSet filter_time_window(const EventSet& es,
                                   const std::vector<std::pair<double, double>>& keep) {
  std::vector<std::pair<double, double>> sorted = keep;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (!(sorted[i].first < sorted[i].second))
      throw ValidationError("filter_time_window: interval must satisfy t_lo < t_hi");
    if (i > 0 && sorted[i].first < sorted[i - 1].second)
      throw ValidationError("filter_time_window: intervals must be non-overlapping");
  }
  std::vector<Event> rows;
  std::vector<int> labels;
  for (Eigen::Index k = 0; k < es.size(); ++k) {
    const double t = es.t[k];
    bool in = false;
    for (const auto& [lo, hi] : sorted)
      if (t >= lo && t <= hi) {
        in = true;
        break;
      }
    if (in) {
      rows.push_back(es.event(k));
      if (es.has_labels()) labels.push_back(es.labels[k]);
    }
  }
  if (rows.empty()) throw ValidationError("filter_time_window: no events remain in kept intervals");
  return detail::from_rows(rows, es.grid, std::move(labels));
}

// Rasterizes each object's circle boundary at each timestep: a pixel is on
// the boundary if its center's distance to the circle center lies within
// [r - 0.5, r + 0.5]. Noise events are uniform over the grid and time span,
// labeled kNoiseLabel. Deterministic for a fixed seed.
inline EventSet synthesize(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<Event> rows;
  std::vector<int> labels;
  for (std::size_t oi = 0; oi < spec.objects.size(); ++oi) {
    const auto& obj = spec.objects[oi];
    for (std::size_t ti = 0; ti < spec.timesteps.size(); ++ti) {
      const double t = spec.timesteps[ti];
      const double cx = obj.cx + obj.vx * t;
      const double cy = obj.cy + obj.vy * t;
      const int x_lo = std::max(1, static_cast<int>(std::floor(cx - obj.radius - 0.5)));
      const int x_hi = std::min(spec.grid.nx, static_cast<int>(std::ceil(cx + obj.radius + 0.5)));
      const int y_lo = std::max(1, static_cast<int>(std::floor(cy - obj.radius - 0.5)));
      const int y_hi = std::min(spec.grid.ny, static_cast<int>(std::ceil(cy + obj.radius + 0.5)));
      std::size_t emitted = 0;
      for (int px = x_lo; px <= x_hi; ++px)
        for (int py = y_lo; py <= y_hi; ++py) {
          const double d = std::hypot(px - cx, py - cy);
          if (d >= obj.radius - 0.5 && d <= obj.radius + 0.5) {
            rows.push_back(Event{px, py, t});
            labels.push_back(static_cast<int>(oi) + 1);
            ++emitted;
          }
        }
      if (emitted == 0)
        throw ValidationError("synthesize: object " + std::to_string(oi + 1) +
                              " fully outside grid at timestep " + std::to_string(ti + 1));
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ux(1, spec.grid.nx), uy(1, spec.grid.ny);
  std::uniform_real_distribution<double> ut(spec.timesteps.front(), spec.timesteps.back());
  for (int i = 0; i < spec.noise_events; ++i) {
    rows.push_back(Event{ux(rng), uy(rng), ut(rng)});
    labels.push_back(kNoiseLabel);
  }
  return detail::from_rows(rows, spec.grid, std::move(labels));
}

// Scene spec file: `key = value` lines, '#' comments. Keys:
//   grid = NX NY
//   timesteps = t1 t2 ...
//   noise_events = K
//   object = CX CY RADIUS VX VY   (repeatable)
inline SceneSpec parse_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("scene: cannot open '" + path + "'");
  SceneSpec spec;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto sv = detail::trim(line);
    if (sv.empty()) continue;
    auto eq = sv.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("scene: " + path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    auto key = detail::trim(sv.substr(0, eq));
    std::istringstream vals{std::string(detail::trim(sv.substr(eq + 1)))};
    auto bad = [&] {
      return ParseError("scene: " + path + ":" + std::to_string(lineno) + ": malformed value for '" +
                        std::string(key) + "'");
    };
    if (key == "grid") {
      if (!(vals >> spec.grid.nx >> spec.grid.ny)) throw bad();
    } else if (key == "timesteps") {
      double t;
      while (vals >> t) spec.timesteps.push_back(t);
      if (spec.timesteps.empty()) throw bad();
    } else if (key == "noise_events") {
      if (!(vals >> spec.noise_events)) throw bad();
    } else if (key == "object") {
      SceneObject o;
      if (!(vals >> o.cx >> o.cy >> o.radius >> o.vx >> o.vy)) throw bad();
      spec.objects.push_back(o);
    } else {
      throw ParseError("scene: " + path + ":" + std::to_string(lineno) + ": unknown key '" +
                       std::string(key) + "'");
    }
  }
  spec.validate();
  return spec;
}

}  // namespace evgnep
