#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "evgnep/imaging.hpp"
#include "test_support.hpp"

using namespace evgnep;

namespace {

// Independent reference for the relaxed objective, used by the gradient
// finite-difference oracle.
double fd_gradient(const Eigen::ArrayXd& z, Eigen::Index k, const EventSet& es,
                   const ModelParams& p, double h = 1e-6) {
  Eigen::ArrayXd zp = z, zm = z;
  zp[k] += h;
  zm[k] -= h;
  return (objective(zp, es, p, Gate::relaxed) - objective(zm, es, p, Gate::relaxed)) / (2.0 * h);
}

// Guarded componentwise relative error: |a - b| / max(|a| + |b|, 1).
double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1.0);
}

}  // namespace

TEST_CASE("exact image accumulates z at the warped pixel") {
  // two events at the same pixel, static
  auto es = testing::make_events({{3, 4, 0.0}, {3, 4, 1.0}}, {8, 8});
  ModelParams p;
  p.t0 = 0.0;
  Eigen::ArrayXd z(2);
  z << 1, 1;
  auto img = image_of_warped_events(z, es, Theta{0.0, 0.0}, p, Gate::exact);
  CHECK(img.values(2, 3) == 2.0);
  CHECK(img.total_mass() == 2.0);

  z << 0.5, 1;
  auto img2 = image_of_warped_events(z, es, Theta{0.0, 0.0}, p, Gate::exact);
  CHECK(img2.values(2, 3) == 1.5);
}

TEST_CASE("relaxed image reproduces the gamma=2 worked value at unit distance") {
  auto es = testing::make_events({{1, 1, 0.0}}, {4, 4});
  ModelParams p;
  p.t0 = 0.0;
  p.relax.gamma = 2.0;
  Eigen::ArrayXd z = Eigen::ArrayXd::Ones(1);
  auto img = image_of_warped_events(z, es, Theta{0.0, 0.0}, p, Gate::relaxed);
  CHECK(img.values(0, 1) == doctest::Approx(0.1353).epsilon(5e-4));  // exp(-2 * 1^2)
  CHECK(std::abs(img.values(0, 1) - 0.1353) <= 5e-5);
  CHECK(img.values(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exact image drops out-of-frame warped mass") {
  auto es = testing::make_events({{2, 2, 1.0}}, {4, 4});
  ModelParams p;
  p.t0 = 0.0;
  // warps to x = 2 - 10 = -8: off grid
  auto img = image_of_warped_events(Eigen::ArrayXd::Ones(1), es, Theta{10.0, 0.0}, p, Gate::exact);
  CHECK(img.total_mass() == 0.0);
}

TEST_CASE("mass conservation: binary z, all warps in-grid") {
  auto es = synthesize(testing::two_circle_spec({64, 64}, 4.0, 10.0, 5), 31);
  ModelParams p = testing::default_params(es);
  std::mt19937_64 rng(5);
  std::bernoulli_distribution coin(0.6);
  Eigen::ArrayXd z(es.size());
  for (auto& v : z.reshaped()) v = coin(rng) ? 1.0 : 0.0;
  const Theta theta = estimate_theta(z, es, Gate::exact);
  // moderate theta: all warped positions stay inside the 64x64 frame
  auto img = image_of_warped_events(z, es, theta, p, Gate::exact);
  CHECK(img.total_mass() == doctest::Approx(z.sum()).epsilon(1e-12));
  CHECK((img.values >= 0.0).all());
}

TEST_CASE("entropy: unit mass pixel contributes zero, empty image is zero") {
  ModelParams p;
  WarpedImage img;
  img.values = Eigen::ArrayXXd::Zero(4, 4);
  CHECK(entropy(img, p) == 0.0);
  img.values(1, 2) = 1.0;
  CHECK(entropy(img, p) == doctest::Approx(0.0).epsilon(1e-15));  // log(0.9 + 0.1) = 0
  img.values(1, 2) = 2.0;
  CHECK(entropy(img, p) == doctest::Approx(2.0 * std::log(1.9)).epsilon(1e-12));
  CHECK(entropy(img, p) == doctest::Approx(1.2837).epsilon(1e-4));
}

TEST_CASE("entropy exact limit uses the 0 log 0 guard") {
  ModelParams p;
  p.alpha = 1.0;
  p.beta = 0.0;
  WarpedImage img;
  img.values = Eigen::ArrayXXd::Zero(3, 3);
  CHECK(entropy(img, p) == 0.0);
  img.values(0, 0) = 2.0;
  CHECK(entropy(img, p) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("variance penalty evaluates the formula as written") {
  // all events at one pixel, all selected: V contribution is
  // sum_k (x_k - mu_x)^2 / nx = 0
  auto es = testing::make_events({{5, 5, 0.0}, {5, 5, 1.0}, {5, 5, 2.0}}, {10, 10});
  CHECK(variance_penalty(Eigen::ArrayXd::Ones(3), es, Gate::exact) == 0.0);

  // unselected events contribute mu^2 / nx each
  Eigen::ArrayXd z(3);
  z << 1, 1, 0;
  const double mu = 5.0;
  const double expected = (mu * mu / 10.0) * 2.0;  // one unselected event, x and y terms
  CHECK(variance_penalty(z, es, Gate::exact) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("variance penalty: all-ones on a symmetric 4-event instance") {
  // x = {2, 4, 6, 8}: mu = 5, centered second moment = 9+1+1+9 = 20
  auto es = testing::make_events({{2, 3, 0.0}, {4, 3, 1.0}, {6, 3, 2.0}, {8, 3, 3.0}}, {10, 10});
  const double vx = 20.0 / 10.0;
  const double vy = 0.0;
  CHECK(variance_penalty(Eigen::ArrayXd::Ones(4), es, Gate::exact) ==
        doctest::Approx(vx + vy).epsilon(1e-12));
}

TEST_CASE("lemma: V(z,.) = V(H(z),.) exactly under the exact gate") {
  auto es = synthesize(testing::two_circle_spec({32, 32}, 3.0, 8.0, 4), 41);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    auto z = testing::random_strategy(es.size(), rng);
    CHECK(variance_penalty(z, es, Gate::exact) ==
          variance_penalty(heaviside(z), es, Gate::exact));
  }
}

TEST_CASE("objective: lambda isolation") {
  auto es = synthesize(testing::two_circle_spec({32, 32}, 3.0, 8.0, 0), 51);
  ModelParams p = testing::default_params(es);
  Eigen::ArrayXd z = Eigen::ArrayXd::Ones(es.size());

  ModelParams p0 = p;
  p0.lambda1 = 0.0;
  p0.lambda2 = 0.0;
  const Theta theta = estimate_theta(z, es, Gate::exact);
  auto img = image_of_warped_events(z, es, theta, p0, Gate::exact);
  CHECK(objective(z, es, p0, Gate::exact) == doctest::Approx(-entropy(img, p0)).epsilon(1e-12));

  // binary z, lambda2 = 1: regularizer adds selected-count / 2
  ModelParams p2 = p0;
  p2.lambda2 = 1.0;
  CHECK(objective(z, es, p2, Gate::exact) - objective(z, es, p0, Gate::exact) ==
        doctest::Approx(0.5 * es.size()).epsilon(1e-12));
}

TEST_CASE("objective prefers a coherent cluster over a random half") {
  auto spec = testing::two_circle_spec({64, 64}, 5.0, 25.0, 0);
  auto es = synthesize(spec, 61);
  ModelParams p = testing::default_params(es);

  Eigen::ArrayXd coherent = Eigen::ArrayXd::Zero(es.size());
  int cluster_size = 0;
  for (Eigen::Index k = 0; k < es.size(); ++k)
    if (es.labels[k] == 1) {
      coherent[k] = 1.0;
      ++cluster_size;
    }
  // random selection of the same cardinality
  std::mt19937_64 rng(7);
  std::vector<Eigen::Index> idx(es.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  Eigen::ArrayXd random_half = Eigen::ArrayXd::Zero(es.size());
  for (int i = 0; i < cluster_size; ++i) random_half[idx[i]] = 1.0;

  const double j_coherent = objective(coherent, es, p, Gate::exact);
  const double j_random = objective(random_half, es, p, Gate::exact);
  CHECK(j_coherent < j_random);
}

TEST_CASE("per-pixel dominance: I(p, z) <= I(p, H(z)) with theta fixed") {
  auto es = synthesize(testing::two_circle_spec({32, 32}, 3.0, 8.0, 4), 71);
  ModelParams p = testing::default_params(es);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 25; ++trial) {
    auto z = testing::random_strategy(es.size(), rng);
    const Theta theta = estimate_theta(heaviside(z), es, Gate::exact);
    auto iz = image_of_warped_events(z, es, theta, p, Gate::exact);
    auto ih = image_of_warped_events(heaviside(z), es, theta, p, Gate::exact);
    CHECK((iz.values <= ih.values + 1e-12).all());
  }
}

TEST_CASE("lemma: per-term entropy inequality for alpha + beta = 1") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uz(0.0, 1.0), ua(0.05, 1.0);
  std::bernoulli_distribution udelta(0.5);
  auto term = [](double zv, double delta, double alpha) {
    const double v = zv * delta;
    const double arg = alpha * v + (1.0 - alpha);
    return arg > 0.0 ? v * std::log(arg) : 0.0;
  };
  auto check_one = [&](double zv, double delta, double alpha) {
    const double hz = zv > 0.0 ? 1.0 : 0.0;
    CHECK(term(zv, delta, alpha) <= term(hz, delta, alpha) + 1e-15);
  };
  for (int i = 0; i < 20000; ++i) check_one(uz(rng), udelta(rng) ? 1.0 : 0.0, ua(rng));
  // endpoints
  for (double zv : {0.0, 1.0, 0.5})
    for (double delta : {0.0, 1.0})
      for (double alpha : {0.9, 1.0, 0.5}) check_one(zv, delta, alpha);
}

TEST_CASE("lemma: H maps [0,1]^n onto the binary vectors") {
  std::mt19937_64 rng(10);
  const Eigen::Index n = 12;
  std::set<std::vector<bool>> images;
  for (int trial = 0; trial < 3000; ++trial) {
    auto z = testing::random_strategy(n, rng);
    // zero out a random subset so all positivity patterns appear
    for (Eigen::Index k = 0; k < n; ++k)
      if (rng() % 3 == 0) z[k] = 0.0;
    auto h = heaviside(z);
    std::vector<bool> bits(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      CHECK((h[k] == 0.0 || h[k] == 1.0));
      CHECK(h[k] == (z[k] > 0.0 ? 1.0 : 0.0));
      bits[k] = h[k] == 1.0;
    }
    images.insert(bits);
  }
  CHECK(images.size() <= (std::size_t{1} << n));
  // every binary vector is its own Heaviside image
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::ArrayXd b(n);
    for (Eigen::Index k = 0; k < n; ++k) b[k] = rng() % 2;
    CHECK((heaviside(b) == b).all());
  }
}

TEST_CASE("sparse objective path matches the dense image") {
  auto es = synthesize(testing::two_circle_spec({48, 48}, 4.0, 15.0, 6), 81);
  ModelParams p = testing::default_params(es);
  std::mt19937_64 rng(11);
  for (Gate mode : {Gate::exact, Gate::relaxed}) {
    auto z = testing::random_strategy(es.size(), rng, 0.3, 1.0);
    const Theta theta = estimate_theta(z, es, mode, p.relax);
    auto img = image_of_warped_events(z, es, theta, p, mode);
    const Eigen::ArrayXd h = gate_vector(z, mode, p.relax);
    const double expected = -entropy(img, p) +
                            0.5 * p.lambda1 * variance_penalty(z, es, mode, p.relax) +
                            0.5 * p.lambda2 * h.square().sum();
    CHECK(objective(z, es, p, mode) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("gradient matches central finite differences") {
  auto es = synthesize(testing::two_circle_spec({48, 48}, 3.0, 15.0, 4), 91);
  ModelParams p = testing::default_params(es);
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    auto z = testing::random_strategy(es.size(), rng, 0.3, 0.7);
    auto g = objective_gradient(z, es, p);
    for (Eigen::Index k = 0; k < es.size(); k += 7) {
      CHECK(rel_err(g[k], fd_gradient(z, k, es, p)) <= 1e-5);
    }
  }
}

TEST_CASE("gradient: lambda1 = lambda2 = 0 leaves only the entropy term") {
  auto es = synthesize(testing::two_circle_spec({48, 48}, 3.0, 15.0, 0), 92);
  ModelParams p0 = testing::default_params(es);
  p0.lambda1 = 0.0;
  p0.lambda2 = 0.0;
  std::mt19937_64 rng(13);
  auto z = testing::random_strategy(es.size(), rng, 0.3, 0.7);
  auto g = objective_gradient(z, es, p0);
  for (Eigen::Index k = 0; k < es.size(); k += 11)
    CHECK(rel_err(g[k], fd_gradient(z, k, es, p0)) <= 1e-5);
}

TEST_CASE("gradient: regularizer term vanishes where the gate saturates") {
  auto es = synthesize(testing::two_circle_spec({48, 48}, 3.0, 15.0, 0), 93);
  ModelParams p1 = testing::default_params(es);
  p1.lambda1 = 0.0;
  p1.lambda2 = 1.0;
  ModelParams p0 = p1;
  p0.lambda2 = 0.0;
  Eigen::ArrayXd z = Eigen::ArrayXd::Ones(es.size());
  const Eigen::ArrayXd reg_grad = objective_gradient(z, es, p1) - objective_gradient(z, es, p0);
  CHECK(reg_grad.abs().maxCoeff() <= 1e-6);
}

TEST_CASE("gradient raises the degenerate-selection error below the gate floor") {
  auto es = synthesize(testing::two_circle_spec({32, 32}, 3.0, 8.0, 0), 94);
  ModelParams p = testing::default_params(es);
  // far below the relaxed gate's shift: total mass underflows the floor
  Eigen::ArrayXd z = Eigen::ArrayXd::Constant(es.size(), -5.0);
  CHECK_THROWS_AS(objective_gradient(z, es, p), DegenerateSelectionError);
}

TEST_CASE("model params validation") {
  ModelParams p;
  p.alpha = 0.5;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p.alpha = 0.9;
  p.beta = 0.1;
  p.lambda1 = -1.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
}
