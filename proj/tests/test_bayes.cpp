#include <doctest.h>

#include <cmath>
#include <numbers>

#include "viewrec/bayes.hpp"
#include "viewrec/errors.hpp"

using namespace viewrec;
using namespace viewrec::bayes;
using geometry::PointSet3D;
using geometry::Priors;
using geometry::View;

namespace {

const double kPi = std::numbers::pi;

// Quadrature oracle for the single-point model at height 1: the projected
// point is uniform on the unit sphere (hat-box), blurred by the imaging
// Gaussian. Integrates over z in [-1,1] and azimuth.
double projected_sphere_density(const Eigen::Vector2d& v, double sigma,
                                int grid) {
  double total = 0.0;
  const double dz = 2.0 / grid;
  const double dphi = 2.0 * kPi / grid;
  const double c = 1.0 / (2.0 * kPi * sigma * sigma);
  for (int i = 0; i < grid; ++i) {
    const double z = -1.0 + (i + 0.5) * dz;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    for (int j = 0; j < grid; ++j) {
      const double phi = (j + 0.5) * dphi;
      const Eigen::Vector2d p(rho * std::cos(phi), rho * std::sin(phi));
      const double d2 = (v - p).squaredNorm();
      if (d2 > 50.0 * sigma * sigma) continue;
      total += c * std::exp(-d2 / (2.0 * sigma * sigma)) * (dz / 2.0) *
               (dphi / (2.0 * kPi));
    }
  }
  return total;
}

}  // namespace

TEST_CASE("serial and OpenMP density kernels are bit-identical") {
  RandomStream rng(1);
  Priors priors;
  priors.noise.sigma = 0.05;
  const PointSet3D m = geometry::sample_model(priors, 4, 0, rng);
  std::vector<geometry::Rotation3> rots(257);
  for (auto& r : rots) r = geometry::sample_rotation(rng);
  Eigen::MatrixXd views(8, 5);
  for (int j = 0; j < 5; ++j) {
    views.col(j) = geometry::project(m, geometry::sample_rotation(rng));
  }
  Eigen::MatrixXd a, b;
  rotation_log_density_matrix_serial(m.points, rots, views, 0.05, a);
  rotation_log_density_matrix(m.points, rots, views, 0.05, b);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("likelihood_known_model rotation-invariant case") {
  // point model at the origin: every rotation projects to (0,0)
  PointSet3D m;
  m.points = Eigen::Matrix3Xd::Zero(3, 1);
  Priors priors;
  priors.noise.sigma = 1.0;
  View v(2);
  v << 0, 0;
  MonteCarloParams mc;
  mc.rotation_samples = 200;
  RandomStream rng(2);
  const LikelihoodEstimate est = likelihood_known_model(v, m, priors, mc, rng);
  CHECK(std::abs(est.log_value - std::log(1.0 / (2.0 * kPi))) <= 1e-12);
  CHECK(est.std_error <= 1e-12);
}

TEST_CASE("likelihood_known_model matches hat-box quadrature oracle") {
  PointSet3D m;
  m.points.resize(3, 1);
  m.points.col(0) = Eigen::Vector3d(0, 0, 1);
  Priors priors;
  priors.noise.sigma = 0.01;
  View v(2);
  v << 0.6, 0.0;
  MonteCarloParams mc;
  mc.rotation_samples = 1000000;
  RandomStream rng(3);
  const LikelihoodEstimate est = likelihood_known_model(v, m, priors, mc, rng);

  const double oracle =
      projected_sphere_density(Eigen::Vector2d(0.6, 0.0), 0.01, 4000);
  // sigma is small, so the oracle sits near the analytic sigma->0 limit
  CHECK(std::abs(oracle - 1.0 / (2.0 * kPi * 0.8)) / oracle < 0.02);
  CHECK(std::abs(est.log_value - std::log(oracle)) <= 3.0 * est.std_error);
}

TEST_CASE("likelihood_known_model determinism") {
  RandomStream mrng(4);
  Priors priors;
  priors.noise.sigma = 0.1;
  const PointSet3D m = geometry::sample_model(priors, 3, 0, mrng);
  const View v = geometry::project(m, geometry::sample_rotation(mrng));
  MonteCarloParams mc;
  mc.rotation_samples = 500;
  RandomStream a(5), b(5);
  const auto ea = likelihood_known_model(v, m, priors, mc, a);
  const auto eb = likelihood_known_model(v, m, priors, mc, b);
  CHECK(ea.log_value == eb.log_value);
  CHECK(ea.std_error == eb.std_error);
}

TEST_CASE("quadrupling rotation samples roughly halves std_error") {
  // sigma wide enough that many rotations contribute; a near-degenerate
  // integrand would leave the variance estimate dominated by one sample
  RandomStream mrng(6);
  Priors priors;
  priors.noise.sigma = 0.5;
  const PointSet3D m = geometry::sample_model(priors, 3, 0, mrng);
  const View v = geometry::project(m, geometry::sample_rotation(mrng));
  MonteCarloParams small, big;
  small.rotation_samples = 256;
  big.rotation_samples = 1024;
  double se_small = 0.0, se_big = 0.0;
  RandomStream rng(7);
  for (int rep = 0; rep < 40; ++rep) {
    RandomStream r1 = rng.derive("a").derive(std::uint64_t(rep));
    RandomStream r2 = rng.derive("b").derive(std::uint64_t(rep));
    se_small += likelihood_known_model(v, m, priors, small, r1).std_error;
    se_big += likelihood_known_model(v, m, priors, big, r2).std_error;
  }
  const double ratio = se_small / se_big;
  CHECK(ratio > 1.6);
  CHECK(ratio < 2.4);
}

TEST_CASE("likelihood_from_training empty training is the prior predictive") {
  // k=1: the marginal of the view is an exact isotropic Gaussian
  Priors priors;
  priors.model_tau = 0.5;
  priors.noise.sigma = 0.2;
  View v(2);
  v << 0.3, -0.1;
  MonteCarloParams mc;
  mc.rotation_samples = 256;
  mc.model_samples = 4000;
  RandomStream rng(8);
  Eigen::MatrixXd empty(2, 0);
  const auto est = likelihood_from_training(v, empty, priors, mc, rng);
  const double var = 0.5 * 0.5 + 0.2 * 0.2;
  const double truth =
      std::exp(-v.squaredNorm() / (2.0 * var)) / (2.0 * kPi * var);
  CHECK(std::abs(est.log_value - std::log(truth)) <=
        3.0 * est.std_error + 0.01);
}

TEST_CASE("likelihood_from_training monotonicity sanity") {
  Priors priors;
  priors.model_tau = 2.0;
  priors.noise.sigma = 0.05;
  RandomStream mrng(9);
  const PointSet3D m = geometry::sample_model(priors, 3, 0, mrng);
  const View v = geometry::project(m, geometry::sample_rotation(mrng));

  Eigen::MatrixXd near(6, 3), far(6, 3);
  for (int j = 0; j < 3; ++j) {
    near.col(j) = v;
    far.col(j) = v + Eigen::VectorXd::Constant(6, 15.0);
  }
  MonteCarloParams mc;
  mc.rotation_samples = 256;
  mc.model_samples = 64;
  RandomStream a(10), b(10);
  const auto en = likelihood_from_training(v, near, priors, mc, a);
  const auto ef = likelihood_from_training(v, far, priors, mc, b);
  CHECK(en.log_value > ef.log_value);
}

TEST_CASE("likelihood_from_training determinism") {
  Priors priors;
  priors.noise.sigma = 0.1;
  RandomStream mrng(11);
  const PointSet3D m = geometry::sample_model(priors, 2, 0, mrng);
  Eigen::MatrixXd training(4, 4);
  for (int j = 0; j < 4; ++j) {
    training.col(j) = geometry::project(m, geometry::sample_rotation(mrng));
  }
  const View v = geometry::project(m, geometry::sample_rotation(mrng));
  MonteCarloParams mc;
  mc.rotation_samples = 128;
  mc.model_samples = 32;
  RandomStream a(12), b(12);
  CHECK(likelihood_from_training(v, training, priors, mc, a).log_value ==
        likelihood_from_training(v, training, priors, mc, b).log_value);
}

TEST_CASE("map_model_estimate self-consistency at the optimum") {
  RandomStream rng(13);
  Priors priors;
  priors.model_tau = 1.0;
  priors.noise.sigma = 0.0;  // noise-free test mode, no regularization
  const PointSet3D truth = geometry::sample_model(priors, 4, 0, rng);
  const int r = 6;
  std::vector<geometry::Rotation3> rots(r);
  Eigen::MatrixXd training(8, r);
  for (int j = 0; j < r; ++j) {
    rots[j] = geometry::sample_rotation(rng);
    training.col(j) = geometry::project(truth, rots[j]);
  }
  RandomStream fit_rng(14);
  const MapModelResult fit =
      map_model_estimate(training, priors, 30, fit_rng, &rots, 1);
  double reproj = 0.0;
  for (int j = 0; j < r; ++j) {
    PointSet3D m;
    m.points = fit.model.points;
    reproj = std::max(
        reproj,
        (geometry::project(m, fit.rotations[j]) - training.col(j))
            .cwiseAbs()
            .maxCoeff());
  }
  CHECK(reproj <= 1e-8);
}

TEST_CASE("map_model_estimate objective is monotone") {
  RandomStream rng(15);
  Priors priors;
  priors.model_tau = 1.0;
  priors.noise.sigma = 0.05;
  const PointSet3D truth = geometry::sample_model(priors, 4, 0, rng);
  Eigen::MatrixXd training(8, 6);
  for (int j = 0; j < 6; ++j) {
    RandomStream nrng = rng.derive("n").derive(std::uint64_t(j));
    training.col(j) = geometry::add_noise(
        geometry::project(truth, geometry::sample_rotation(rng)),
        priors.noise, nrng);
  }
  RandomStream fit_rng(16);
  std::vector<double> trace;
  map_model_estimate(training, priors, 40, fit_rng, nullptr, 1, &trace);
  REQUIRE(trace.size() > 1);
  for (size_t i = 1; i < trace.size(); ++i) {
    CHECK(trace[i] >= trace[i - 1] - 1e-12 * (1.0 + std::abs(trace[i])));
  }
}

TEST_CASE("map model beats a random prior draw on held-out views") {
  RandomStream rng(17);
  Priors priors;
  priors.model_tau = 1.0;
  priors.noise.sigma = 0.05;
  const PointSet3D truth = geometry::sample_model(priors, 4, 0, rng);
  Eigen::MatrixXd training(8, 8);
  for (int j = 0; j < 8; ++j) {
    RandomStream nrng = rng.derive("tn").derive(std::uint64_t(j));
    training.col(j) = geometry::add_noise(
        geometry::project(truth, geometry::sample_rotation(rng)),
        priors.noise, nrng);
  }
  RandomStream fit_rng(18);
  const MapModelResult fit = map_model_estimate(training, priors, 40, fit_rng);
  RandomStream draw_rng(19);
  const PointSet3D random_model = geometry::sample_model(priors, 4, 0,
                                                         draw_rng);

  // held-out views, each scored by the best rotation fit found by polish
  auto heldout_cost = [&](const PointSet3D& model) {
    double total = 0.0;
    RandomStream hrng(20);
    for (int h = 0; h < 4; ++h) {
      const geometry::View view = geometry::add_noise(
          geometry::project(truth, geometry::sample_rotation(hrng)),
          priors.noise, hrng);
      Eigen::MatrixXd one(8, 2);
      one.col(0) = view;
      one.col(1) = view;
      // reuse the alternating fitter with the model fixed via tiny tau? no:
      // just search rotations directly
      double best = std::numeric_limits<double>::infinity();
      RandomStream srng = hrng.derive("starts");
      for (int s = 0; s < 24; ++s) {
        geometry::Rotation3 rot = geometry::sample_rotation(srng);
        auto cost = [&](const geometry::Rotation3& q) {
          PointSet3D m = model;
          return (geometry::project(m, q) - view).squaredNorm();
        };
        double cur = cost(rot);
        for (double step = 0.4; step > 1e-6; step *= 0.5) {
          bool improved = true;
          while (improved) {
            improved = false;
            for (int axis = 0; axis < 3; ++axis) {
              for (double sgn : {1.0, -1.0}) {
                const geometry::Rotation3 cand =
                    Eigen::AngleAxisd(sgn * step,
                                      Eigen::Vector3d::Unit(axis))
                        .toRotationMatrix() *
                    rot;
                if (cost(cand) < cur) {
                  rot = cand;
                  cur = cost(cand);
                  improved = true;
                }
              }
            }
          }
        }
        best = std::min(best, cur);
      }
      total += best;
    }
    return std::sqrt(total / 4.0);
  };

  CHECK(heldout_cost(fit.model) < heldout_cost(random_model));
}

TEST_CASE("likelihood_map_model determinism") {
  Priors priors;
  priors.noise.sigma = 0.1;
  RandomStream mrng(21);
  const PointSet3D m = geometry::sample_model(priors, 3, 0, mrng);
  Eigen::MatrixXd training(6, 4);
  for (int j = 0; j < 4; ++j) {
    training.col(j) = geometry::project(m, geometry::sample_rotation(mrng));
  }
  const View v = geometry::project(m, geometry::sample_rotation(mrng));
  MonteCarloParams mc;
  mc.rotation_samples = 128;
  RandomStream a(22), b(22);
  CHECK(likelihood_map_model(v, training, priors, mc, a).log_value ==
        likelihood_map_model(v, training, priors, mc, b).log_value);
}

TEST_CASE("decide basics") {
  Priors priors;
  priors.class_prior = {0.5, 0.5};
  std::map<int, LikelihoodEstimate> pc;
  pc[0].log_value = std::log(0.2);
  pc[1].log_value = std::log(0.1);
  CHECK(decide(pc, priors).chosen == 0);

  priors.class_prior = {0.1, 0.9};
  CHECK(decide(pc, priors).chosen == 1);

  // exact tie goes to the lowest label
  priors.class_prior = {0.5, 0.5};
  pc[1].log_value = std::log(0.2);
  const Decision tie = decide(pc, priors);
  CHECK(tie.chosen == 0);
  CHECK(tie.margin == 0.0);
}

TEST_CASE("decide is shift invariant") {
  Priors priors;
  priors.class_prior = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::map<int, LikelihoodEstimate> pc;
  pc[0].log_value = -10.0;
  pc[1].log_value = -12.5;
  pc[2].log_value = -11.0;
  const Decision base = decide(pc, priors);
  for (auto& [k, v] : pc) v.log_value += 123.456;
  const Decision shifted = decide(pc, priors);
  CHECK(base.chosen == shifted.chosen);
  CHECK(base.margin == doctest::Approx(shifted.margin).epsilon(1e-12));
}

TEST_CASE("decide underflow fallback") {
  Priors priors;
  priors.class_prior = {0.2, 0.8};
  std::map<int, LikelihoodEstimate> pc;
  pc[0].log_value = -std::numeric_limits<double>::infinity();
  pc[1].log_value = -std::numeric_limits<double>::infinity();
  const Decision d = decide(pc, priors);
  CHECK(d.all_underflow);
  CHECK(d.chosen == 1);  // prior arg max
}
