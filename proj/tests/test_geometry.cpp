#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "viewrec/errors.hpp"
#include "viewrec/geometry.hpp"

using namespace viewrec;
using namespace viewrec::geometry;

namespace {

Rotation3 rot_euler(double a, double b, double c) {
  return (Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(b, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(c, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

double rms_after_best_translation(const Eigen::Matrix3d& r, bool reflect,
                                  const Eigen::MatrixXd& src,
                                  const Eigen::MatrixXd& tgt) {
  Eigen::Matrix3d m = r;
  if (reflect) m = r * Eigen::Vector3d(1, 1, -1).asDiagonal();
  const Eigen::MatrixXd mapped = m * src;
  const Eigen::VectorXd t = (tgt - mapped).rowwise().mean();
  return std::sqrt(((mapped.colwise() + t) - tgt)
                       .colwise()
                       .squaredNorm()
                       .sum() /
                   double(src.cols()));
}

// independent oracle: dense Euler-angle grid plus coordinate-descent polish
double brute_force_residual(const Eigen::MatrixXd& src,
                            const Eigen::MatrixXd& tgt,
                            bool allow_reflection) {
  const double pi = std::numbers::pi;
  double best = std::numeric_limits<double>::infinity();
  double ba = 0, bb = 0, bc = 0;
  bool brefl = false;
  const int g = 14;
  for (int refl = 0; refl <= (allow_reflection ? 1 : 0); ++refl) {
    for (int i = 0; i < g; ++i) {
      for (int j = 0; j < g; ++j) {
        for (int l = 0; l < g; ++l) {
          const double a = 2 * pi * i / g;
          const double b = pi * j / g;
          const double c = 2 * pi * l / g;
          const double r = rms_after_best_translation(rot_euler(a, b, c),
                                                      refl, src, tgt);
          if (r < best) {
            best = r;
            ba = a;
            bb = b;
            bc = c;
            brefl = refl;
          }
        }
      }
    }
  }
  for (double step = 0.3; step > 1e-9; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (int axis = 0; axis < 3; ++axis) {
        for (double sgn : {1.0, -1.0}) {
          double a = ba, b = bb, c = bc;
          (axis == 0 ? a : axis == 1 ? b : c) += sgn * step;
          const double r =
              rms_after_best_translation(rot_euler(a, b, c), brefl, src, tgt);
          if (r < best) {
            best = r;
            ba = a;
            bb = b;
            bc = c;
            improved = true;
          }
        }
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("sample_rotation determinism and invariants") {
  RandomStream a(5), b(5);
  const Rotation3 qa = sample_rotation(a);
  const Rotation3 qb = sample_rotation(b);
  CHECK((qa - qb).cwiseAbs().maxCoeff() == 0.0);

  RandomStream rng(17);
  for (int i = 0; i < 200; ++i) {
    const Rotation3 q = sample_rotation(rng);
    CHECK((q.transpose() * q - Eigen::Matrix3d::Identity())
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
    CHECK(q.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("sample_rotation group closure") {
  RandomStream rng(21);
  for (int i = 0; i < 100; ++i) {
    const Rotation3 p = sample_rotation(rng) * sample_rotation(rng);
    CHECK((p.transpose() * p - Eigen::Matrix3d::Identity())
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
    CHECK(p.determinant() == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("sample_rotation hat-box uniformity") {
  // z-component of the image of e_z under Haar rotation is uniform on [-1,1]
  RandomStream rng(99);
  const int n = 100000;
  std::vector<double> z(n);
  for (int i = 0; i < n; ++i) z[i] = sample_rotation(rng)(2, 2);
  std::sort(z.begin(), z.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double cdf = (z[i] + 1.0) / 2.0;
    ks = std::max(ks, std::abs(cdf - double(i + 1) / n));
    ks = std::max(ks, std::abs(cdf - double(i) / n));
  }
  CHECK(ks < 0.01);
}

TEST_CASE("project axis cases") {
  PointSet3D m;
  m.points.resize(3, 1);

  m.points.col(0) = Eigen::Vector3d(1, 2, 3);
  View v = project(m, Rotation3::Identity());
  CHECK(v(0) == 1.0);
  CHECK(v(1) == 2.0);

  m.points.col(0) = Eigen::Vector3d(1, 0, 0);
  const Rotation3 rz =
      Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitZ())
          .toRotationMatrix();
  v = project(m, rz);
  CHECK(v(0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(v(1) == doctest::Approx(1.0));

  m.points.col(0) = Eigen::Vector3d(0, 0, 1);
  const Rotation3 rx =
      Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitX())
          .toRotationMatrix();
  v = project(m, rx);
  CHECK(v(0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(v(1) == doctest::Approx(-1.0));
}

TEST_CASE("project preserves feature order") {
  RandomStream rng(3);
  Priors priors;
  const PointSet3D m = sample_model(priors, 6, 0, rng);
  const Rotation3 r = sample_rotation(rng);
  const View v = project(m, r);
  REQUIRE(v.size() == 12);
  for (int i = 0; i < 6; ++i) {
    const Eigen::Vector3d p = r * m.points.col(i);
    CHECK(v(2 * i) == p.x());
    CHECK(v(2 * i + 1) == p.y());
  }
}

TEST_CASE("add_noise") {
  View v(4);
  v << 1, 2, 3, 4;

  RandomStream rng(11);
  CHECK((add_noise(v, {0.0}, rng) - v).cwiseAbs().maxCoeff() == 0.0);

  RandomStream a(12), b(12);
  CHECK((add_noise(v, {0.5}, a) - add_noise(v, {0.5}, b))
            .cwiseAbs()
            .maxCoeff() == 0.0);

  // moment check on one coordinate
  RandomStream mrng(13);
  View single(1);
  single << 2.5;
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = add_noise(single, {1.0}, mrng)(0);
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sum_sq / n - mean * mean);
  CHECK(std::abs(mean - 2.5) < 0.02);
  CHECK(std::abs(sd - 1.0) < 0.02);
}

TEST_CASE("sample_model") {
  Priors priors;
  priors.model_tau = 0.0;
  RandomStream rng(4);
  const PointSet3D zero = sample_model(priors, 5, 2, rng);
  CHECK(zero.points.cwiseAbs().maxCoeff() == 0.0);
  CHECK(zero.label == 2);

  priors.model_tau = 0.7;
  RandomStream a(6), b(6);
  CHECK((sample_model(priors, 4, 0, a).points -
         sample_model(priors, 4, 0, b).points)
            .cwiseAbs()
            .maxCoeff() == 0.0);

  RandomStream mrng(8);
  double sum_sq = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    sum_sq += sample_model(priors, 1, 0, mrng).points.squaredNorm();
  }
  const double var = sum_sq / (3.0 * n);
  CHECK(std::abs(var - 0.49) < 0.05 * 0.49);
}

TEST_CASE("procrustes exact fit") {
  RandomStream rng(31);
  Eigen::MatrixXd src(3, 7);
  for (int i = 0; i < 7; ++i) {
    src.col(i) = Eigen::Vector3d(rng.gaussian(), rng.gaussian(),
                                 rng.gaussian());
  }
  const Rotation3 q = sample_rotation(rng);
  const Eigen::Vector3d t(0.3, -1.2, 2.0);
  const Eigen::MatrixXd tgt = (q * src).colwise() + t;

  const auto fit = procrustes_align(src, tgt, false);
  CHECK(fit.residual <= 1e-10);
  CHECK((fit.transform.apply_cols(src) - tgt).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("procrustes reflection case") {
  RandomStream rng(32);
  Eigen::MatrixXd src(3, 6);
  for (int i = 0; i < 6; ++i) {
    src.col(i) = Eigen::Vector3d(rng.gaussian(), rng.gaussian(),
                                 rng.gaussian());
  }
  Eigen::MatrixXd mirror = src;
  mirror.row(2) *= -1.0;

  CHECK(procrustes_align(src, mirror, false).residual > 0.0);
  CHECK(procrustes_align(src, mirror, true).residual <= 1e-10);
}

TEST_CASE("procrustes identity and pre-isometry invariance") {
  RandomStream rng(33);
  Eigen::MatrixXd a(3, 5), b(3, 5);
  for (int i = 0; i < 5; ++i) {
    a.col(i) = Eigen::Vector3d(rng.gaussian(), rng.gaussian(), rng.gaussian());
    b.col(i) = Eigen::Vector3d(rng.gaussian(), rng.gaussian(), rng.gaussian());
  }
  const auto self = procrustes_align(a, a, false);
  CHECK(self.residual <= 1e-12);
  CHECK((self.transform.ortho - Eigen::Matrix3d::Identity())
            .cwiseAbs()
            .maxCoeff() <= 1e-10);

  const Rotation3 q = sample_rotation(rng);
  const Eigen::Vector3d t(1, -2, 0.5);
  const Eigen::MatrixXd a2 = (q * a).colwise() + t;
  CHECK(std::abs(procrustes_align(a2, b, false).residual -
                 procrustes_align(a, b, false).residual) <= 1e-10);
}

TEST_CASE("procrustes empty input") {
  Eigen::MatrixXd empty(3, 0);
  CHECK_THROWS_AS(procrustes_align(empty, empty, false), EmptyInput);
}

TEST_CASE("procrustes matches brute-force oracle") {
  RandomStream rng(34);
  for (int rep = 0; rep < 3; ++rep) {
    Eigen::MatrixXd src(3, 5), tgt(3, 5);
    for (int i = 0; i < 5; ++i) {
      src.col(i) =
          Eigen::Vector3d(rng.gaussian(), rng.gaussian(), rng.gaussian());
    }
    const Rotation3 q = sample_rotation(rng);
    for (int i = 0; i < 5; ++i) {
      tgt.col(i) = q * src.col(i) +
                   0.1 * Eigen::Vector3d(rng.gaussian(), rng.gaussian(),
                                         rng.gaussian());
    }
    for (bool refl : {false, true}) {
      const double ours = procrustes_align(src, tgt, refl).residual;
      const double oracle = brute_force_residual(src, tgt, refl);
      CHECK(std::abs(ours - oracle) <= 1e-4);
    }
  }
}
