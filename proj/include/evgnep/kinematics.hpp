#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "evgnep/common.hpp"
#include "evgnep/events.hpp"

namespace evgnep {

// Minimum gate mass / gated time variance below which a selection is
// treated as degenerate.
inline constexpr double kGateMassFloor = 1e-8;
inline constexpr double kTimeVarianceFloor = 1e-12;

struct Theta {
  double x = 0.0;  // pixels/second
  double y = 0.0;
};

// tanh Heaviside surrogate H^(z) = (1 + tanh(m (z - n))) / 2 and Gaussian
// Kronecker surrogate exp(-gamma ||.||^2). m > 50 makes the surrogate
// gradient spike-like and unstable.
struct RelaxParams {
  double m = 25.0;
  double n = 0.25;
  double gamma = 30.0;

  void validate() const {
    if (!(m > 0.0)) throw ValidationError("relax: m must be > 0");
    if (!(n > 0.0 && n < 1.0)) throw ValidationError("relax: n must be in (0,1)");
    if (!(gamma > 0.0)) throw ValidationError("relax: gamma must be > 0");
  }
};

inline Eigen::ArrayXd heaviside(const Eigen::ArrayXd& z) {
  return (z > 0.0).cast<double>();
}

inline Eigen::ArrayXd heaviside_relaxed(const Eigen::ArrayXd& z, const RelaxParams& p) {
  return 0.5 * (1.0 + (p.m * (z - p.n)).tanh());
}

inline Eigen::ArrayXd gate_vector(const Eigen::ArrayXd& z, Gate gate, const RelaxParams& p) {
  return gate == Gate::exact ? heaviside(z) : heaviside_relaxed(z, p);
}

// Derivative of the relaxed gate: h' = 2 m h (1 - h).
inline Eigen::ArrayXd gate_derivative_relaxed(const Eigen::ArrayXd& z, const RelaxParams& p) {
  const Eigen::ArrayXd h = heaviside_relaxed(z, p);
  return 2.0 * p.m * h * (1.0 - h);
}

struct Means {
  double mu_t = 0.0;
  double mu_x = 0.0;
  double mu_y = 0.0;
  double gate_mass = 0.0;
};

namespace detail {

inline Means means_from_gate(const Eigen::ArrayXd& h, const EventSet& es) {
  const double mass = h.sum();
  if (!(mass > kGateMassFloor))
    throw DegenerateSelectionError("selected_means: gate mass is zero, no events selected");
  Means m;
  m.gate_mass = mass;
  m.mu_t = (h * es.t).sum() / mass;
  m.mu_x = (h * es.x).sum() / mass;
  m.mu_y = (h * es.y).sum() / mass;
  return m;
}

}  // namespace detail

// Gate-weighted means of t, x, y over the selected events.
inline Means selected_means(const Eigen::ArrayXd& z, const EventSet& es, Gate gate,
                            const RelaxParams& p = {}) {
  return detail::means_from_gate(gate_vector(z, gate, p), es);
}

// Gated, mean-centered least-squares slope of x (and y) on t: the average
// image-plane velocity of the selected events.
inline Theta estimate_theta(const Eigen::ArrayXd& z, const EventSet& es, Gate gate,
                            const RelaxParams& p = {}) {
  const Eigen::ArrayXd h = gate_vector(z, gate, p);
  const Means m = detail::means_from_gate(h, es);
  const Eigen::ArrayXd ct = es.t - m.mu_t;
  const double denom = (h * ct * ct).sum();
  if (!(denom > kTimeVarianceFloor))
    throw DegenerateMotionError("estimate_theta: selected events have zero time variance");
  Theta theta;
  theta.x = (h * ct * (es.x - m.mu_x)).sum() / denom;
  theta.y = (h * ct * (es.y - m.mu_y)).sum() / denom;
  return theta;
}

// Projects every event to the reference time t0 along theta:
// row k = (x_k, y_k) + (t0 - t_k) * (theta_x, theta_y).
inline Eigen::ArrayX2d warp(const EventSet& es, Theta theta, double t0) {
  Eigen::ArrayX2d w(es.size(), 2);
  const Eigen::ArrayXd dt = t0 - es.t;
  w.col(0) = es.x + dt * theta.x;
  w.col(1) = es.y + dt * theta.y;
  return w;
}

inline Eigen::VectorXd rowwise_norm2(const Eigen::MatrixXd& V) {
  return V.rowwise().norm();
}

}  // namespace evgnep
