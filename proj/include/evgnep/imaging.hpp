#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <vector>

#include "evgnep/common.hpp"
#include "evgnep/events.hpp"
#include "evgnep/kinematics.hpp"

namespace evgnep {

struct ModelParams {
  double lambda1 = 1e-3;  // variance penalty weight
  double lambda2 = 1.0;   // selection-cardinality regularizer weight
  double alpha = 0.9;     // entropy log scale; alpha + beta = 1 required
  double beta = 0.1;
  RelaxParams relax;
  double t0 = 0.0;  // reference time for warping, seconds

  void validate() const {
    if (lambda1 < 0.0 || lambda2 < 0.0) throw ValidationError("params: lambda1, lambda2 must be >= 0");
    if (!(alpha > 0.0 && alpha <= 1.0) || beta < 0.0)
      throw ValidationError("params: alpha in (0,1], beta >= 0 required");
    if (std::abs(alpha + beta - 1.0) > 1e-12)
      throw ValidationError("params: alpha + beta = 1 required");
    relax.validate();
  }
};

// Dense accumulation of warped event mass on the pixel grid.
struct WarpedImage {
  Eigen::ArrayXXd values;  // (nx, ny), values(x-1, y-1)
  double t0 = 0.0;

  double total_mass() const { return values.sum(); }
};

inline double default_t0(const EventSet& es) { return es.t_min(); }

namespace detail {

// Gaussian contributions below 1e-12 are truncated; this window radius
// covers everything above that threshold.
inline int relaxed_window_radius(double gamma) {
  return static_cast<int>(std::ceil(std::sqrt(std::log(1e12) / gamma)));
}

inline bool warped_in_frame(double wx, double wy, Grid grid) {
  return wx >= 0.5 && wx <= grid.nx + 0.5 && wy >= 0.5 && wy <= grid.ny + 0.5;
}

// Nearest-pixel binding of a warped coordinate; ties at .5 round half-up.
inline int bind_pixel(double w) { return static_cast<int>(std::floor(w + 0.5)); }

// Sparse image: (pixel key -> mass), canonically ordered so sums are
// reproducible regardless of accumulation container.
struct SparsePixel {
  int key;  // (x-1) * ny + (y-1)
  double mass;
};

inline std::vector<SparsePixel> accumulate_sparse(const Eigen::ArrayXd& weights, const EventSet& es,
                                                  const Eigen::ArrayX2d& w, Gate mode,
                                                  const RelaxParams& relax) {
  const Grid grid = es.grid;
  std::unordered_map<int, double> acc;
  acc.reserve(static_cast<std::size_t>(es.size()));
  if (mode == Gate::exact) {
    for (Eigen::Index k = 0; k < es.size(); ++k) {
      if (weights[k] == 0.0) continue;
      const int px = bind_pixel(w(k, 0));
      const int py = bind_pixel(w(k, 1));
      if (grid.contains(px, py)) acc[(px - 1) * grid.ny + (py - 1)] += weights[k];
    }
  } else {
    const int R = relaxed_window_radius(relax.gamma);
    for (Eigen::Index k = 0; k < es.size(); ++k) {
      if (weights[k] == 0.0) continue;
      const double wx = w(k, 0), wy = w(k, 1);
      if (!warped_in_frame(wx, wy, grid)) continue;
      const int x_lo = std::max(1, static_cast<int>(std::ceil(wx - R)));
      const int x_hi = std::min(grid.nx, static_cast<int>(std::floor(wx + R)));
      const int y_lo = std::max(1, static_cast<int>(std::ceil(wy - R)));
      const int y_hi = std::min(grid.ny, static_cast<int>(std::floor(wy + R)));
      for (int px = x_lo; px <= x_hi; ++px)
        for (int py = y_lo; py <= y_hi; ++py) {
          const double dx = px - wx, dy = py - wy;
          acc[(px - 1) * grid.ny + (py - 1)] +=
              weights[k] * std::exp(-relax.gamma * (dx * dx + dy * dy));
        }
    }
  }
  std::vector<SparsePixel> out;
  out.reserve(acc.size());
  for (const auto& [key, mass] : acc) out.push_back({key, mass});
  std::sort(out.begin(), out.end(), [](const SparsePixel& a, const SparsePixel& b) { return a.key < b.key; });
  return out;
}

// Per-pixel entropy term I * log(alpha * I + beta), with 0 * log(0) := 0
// covering the exact limit (alpha, beta) = (1, 0).
inline double entropy_term(double mass, double alpha, double beta) {
  if (mass <= 0.0) return 0.0;
  const double arg = alpha * mass + beta;
  if (arg <= 0.0) return 0.0;
  return mass * std::log(arg);
}

inline double entropy_sparse(const std::vector<SparsePixel>& img, double alpha, double beta) {
  double e = 0.0;
  for (const auto& p : img) e += entropy_term(p.mass, alpha, beta);
  return e;
}

}  // namespace detail

// Accumulates per-event mass z_k at warped positions. Exact mode bins each
// warped coordinate to its nearest pixel; relaxed mode spreads a Gaussian
// bump exp(-gamma ||w_k - pixel||^2). Warped positions out of frame
// contribute nothing.
inline WarpedImage image_of_warped_events(const Eigen::ArrayXd& z, const EventSet& es, Theta theta,
                                          const ModelParams& params, Gate mode) {
  params.validate();
  if (!std::isfinite(theta.x) || !std::isfinite(theta.y))
    throw ValidationError("image_of_warped_events: theta must be finite");
  WarpedImage img;
  img.t0 = params.t0;
  img.values = Eigen::ArrayXXd::Zero(es.grid.nx, es.grid.ny);
  const Eigen::ArrayX2d w = warp(es, theta, params.t0);
  for (const auto& p : detail::accumulate_sparse(z, es, w, mode, params.relax))
    img.values(p.key / es.grid.ny, p.key % es.grid.ny) += p.mass;
  return img;
}

// Modified entropy E(I) = sum_pixels I * log(alpha * I + beta).
inline double entropy(const WarpedImage& img, const ModelParams& params) {
  double e = 0.0;
  const double* data = img.values.data();
  for (Eigen::Index i = 0; i < img.values.size(); ++i)
    e += detail::entropy_term(data[i], params.alpha, params.beta);
  return e;
}

// V(z, x) + V(z, y): gated second moment of pixel coordinates about the
// selected means. Per the model, unselected events still contribute their
// -mu terms. The x term is scaled by 1/nx, the y term by 1/ny.
inline double variance_penalty(const Eigen::ArrayXd& z, const EventSet& es, Gate gate,
                               const RelaxParams& relax = {}) {
  const Eigen::ArrayXd h = gate_vector(z, gate, relax);
  const Means m = detail::means_from_gate(h, es);
  const double vx = (h * es.x - m.mu_x).square().sum() / es.grid.nx;
  const double vy = (h * es.y - m.mu_y).square().sum() / es.grid.ny;
  return vx + vy;
}

// Full per-player objective
//   J(z) = -E(I(z)) + lambda1/2 (V(z,x) + V(z,y)) + lambda2/2 ||gate(z)||^2
// with theta estimated from z through the selected gate.
inline double objective(const Eigen::ArrayXd& z, const EventSet& es, const ModelParams& params,
                        Gate mode) {
  params.validate();
  const Theta theta = estimate_theta(z, es, mode, params.relax);
  const Eigen::ArrayX2d w = warp(es, theta, params.t0);
  const auto img = detail::accumulate_sparse(z, es, w, mode, params.relax);
  const double e = detail::entropy_sparse(img, params.alpha, params.beta);
  const double v = variance_penalty(z, es, mode, params.relax);
  const Eigen::ArrayXd h = gate_vector(z, mode, params.relax);
  return -e + 0.5 * params.lambda1 * v + 0.5 * params.lambda2 * h.square().sum();
}

// Analytic gradient of the relaxed objective. Theta is a function of z
// through the tanh gate and is differentiated through the least-squares
// quotient; the centered sums sum_k h_k (t_k - mu_t) and
// sum_k h_k (x_k - mu_x) vanish identically, which collapses the mean
// terms in dA/dz and dD/dz.
inline Eigen::ArrayXd objective_gradient(const Eigen::ArrayXd& z, const EventSet& es,
                                         const ModelParams& params) {
  params.validate();
  const auto n = es.size();
  const RelaxParams& relax = params.relax;
  const Eigen::ArrayXd h = heaviside_relaxed(z, relax);
  const Eigen::ArrayXd hp = gate_derivative_relaxed(z, relax);
  const double S = h.sum();
  if (!(S > kGateMassFloor))
    throw DegenerateSelectionError("objective_gradient: relaxed gate mass underflows floor");
  const double mu_t = (h * es.t).sum() / S;
  const double mu_x = (h * es.x).sum() / S;
  const double mu_y = (h * es.y).sum() / S;
  const Eigen::ArrayXd ct = es.t - mu_t;
  const Eigen::ArrayXd cx = es.x - mu_x;
  const Eigen::ArrayXd cy = es.y - mu_y;
  const double D = (h * ct * ct).sum();
  if (!(D > kTimeVarianceFloor))
    throw DegenerateMotionError("objective_gradient: selected time variance underflows floor");
  const Theta theta{(h * ct * cx).sum() / D, (h * ct * cy).sum() / D};

  const Eigen::ArrayXd dtheta_x = hp * ct * (cx - theta.x * ct) / D;
  const Eigen::ArrayXd dtheta_y = hp * ct * (cy - theta.y * ct) / D;

  // Entropy term. First pass: sparse image; second pass: per-event
  // sensitivities against the per-pixel entropy derivative
  //   phi(I) = log(alpha I + beta) + alpha I / (alpha I + beta).
  if (!(params.beta > 0.0))
    throw ValidationError("objective_gradient: beta > 0 required in relaxed mode");
  const Eigen::ArrayX2d w = warp(es, theta, params.t0);
  const auto img = detail::accumulate_sparse(z, es, w, Gate::relaxed, relax);
  std::unordered_map<int, double> phi;
  phi.reserve(img.size());
  for (const auto& p : img) {
    const double arg = params.alpha * p.mass + params.beta;
    phi[p.key] = std::log(arg) + params.alpha * p.mass / arg;
  }
  const double phi_empty = std::log(params.beta);  // pixels holding no mass
  const int R = detail::relaxed_window_radius(relax.gamma);
  Eigen::ArrayXd dE = Eigen::ArrayXd::Zero(n);
  double gx = 0.0, gy = 0.0;  // sum_k z_k (t0 - t_k) d_k
  for (Eigen::Index k = 0; k < n; ++k) {
    const double wx = w(k, 0), wy = w(k, 1);
    if (!detail::warped_in_frame(wx, wy, es.grid)) continue;
    const int x_lo = std::max(1, static_cast<int>(std::ceil(wx - R)));
    const int x_hi = std::min(es.grid.nx, static_cast<int>(std::floor(wx + R)));
    const int y_lo = std::max(1, static_cast<int>(std::ceil(wy - R)));
    const int y_hi = std::min(es.grid.ny, static_cast<int>(std::floor(wy + R)));
    double ck = 0.0, dkx = 0.0, dky = 0.0;
    for (int px = x_lo; px <= x_hi; ++px)
      for (int py = y_lo; py <= y_hi; ++py) {
        const double dx = wx - px, dy = wy - py;
        const double g = std::exp(-relax.gamma * (dx * dx + dy * dy));
        const auto it = phi.find((px - 1) * es.grid.ny + (py - 1));
        const double f = it != phi.end() ? it->second : phi_empty;
        ck += f * g;
        dkx += f * g * (-2.0 * relax.gamma) * dx;
        dky += f * g * (-2.0 * relax.gamma) * dy;
      }
    dE[k] += ck;  // direct dependence of I on z_k
    const double dt = params.t0 - es.t[k];
    gx += z[k] * dt * dkx;
    gy += z[k] * dt * dky;
  }
  dE += gx * dtheta_x + gy * dtheta_y;  // dependence through theta(z)

  // Variance penalty term.
  const Eigen::ArrayXd rx = h * es.x - mu_x;
  const Eigen::ArrayXd ry = h * es.y - mu_y;
  const double sx = rx.sum();
  const double sy = ry.sum();
  const Eigen::ArrayXd dVx = (2.0 / es.grid.nx) * (rx * es.x * hp - hp * cx / S * sx);
  const Eigen::ArrayXd dVy = (2.0 / es.grid.ny) * (ry * es.y * hp - hp * cy / S * sy);

  return -dE + 0.5 * params.lambda1 * (dVx + dVy) + params.lambda2 * h * hp;
}

}  // namespace evgnep
