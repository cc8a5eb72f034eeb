// Timing comparison of the OpenMP rotation-density kernel against the
// serial reference, plus a whole-trial likelihood timing.

#include <chrono>
#include <iostream>

#include "viewrec/bayes.hpp"
#include "viewrec/geometry.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace viewrec;

int main(int argc, char** argv) {
  const int rotations = argc > 1 ? std::atoi(argv[1]) : 4096;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 20;
  const int k = 4;
  const int n_views = 9;

  geometry::Priors priors;
  priors.model_tau = 1.0;
  priors.noise.sigma = 0.05;
  RandomStream rng(7);
  const geometry::PointSet3D model =
      geometry::sample_model(priors, k, 0, rng);
  std::vector<geometry::Rotation3> rots(rotations);
  for (auto& r : rots) r = geometry::sample_rotation(rng);
  Eigen::MatrixXd views(2 * k, n_views);
  for (int j = 0; j < n_views; ++j) {
    views.col(j) = geometry::project(model, geometry::sample_rotation(rng));
  }

  Eigen::MatrixXd out_serial, out_parallel;
  using clock = std::chrono::steady_clock;

  auto t0 = clock::now();
  for (int i = 0; i < repeats; ++i) {
    bayes::rotation_log_density_matrix_serial(model.points, rots, views,
                                              priors.noise.sigma, out_serial);
  }
  auto t1 = clock::now();
  for (int i = 0; i < repeats; ++i) {
    bayes::rotation_log_density_matrix(model.points, rots, views,
                                       priors.noise.sigma, out_parallel);
  }
  auto t2 = clock::now();

  const double ms_serial =
      std::chrono::duration<double, std::milli>(t1 - t0).count() / repeats;
  const double ms_parallel =
      std::chrono::duration<double, std::milli>(t2 - t1).count() / repeats;
  const double max_diff = (out_serial - out_parallel).cwiseAbs().maxCoeff();

#ifdef _OPENMP
  std::cout << "threads:  " << omp_get_max_threads() << "\n";
#else
  std::cout << "threads:  1 (OpenMP disabled)\n";
#endif
  std::cout << "kernel:   " << rotations << " rotations x " << n_views
            << " views\n";
  std::cout << "serial:   " << ms_serial << " ms\n";
  std::cout << "parallel: " << ms_parallel << " ms  (speedup "
            << ms_serial / ms_parallel << "x)\n";
  std::cout << "max |serial - parallel| = " << max_diff << "\n";
  return max_diff == 0.0 ? 0 : 1;
}
