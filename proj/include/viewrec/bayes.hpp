#pragma once

#include <map>
#include <string>
#include <vector>

#include "viewrec/geometry.hpp"

namespace viewrec::bayes {

struct MonteCarloParams {
  int rotation_samples = 512;  // inner integral over rotations
  int model_samples = 128;     // outer integral over latent models
  std::string stream_label = "mc";
};

struct LikelihoodEstimate {
  double log_value = 0.0;  // natural-log density estimate
  double std_error = 0.0;  // delta-method standard error of log_value
  long samples_used = 0;
  bool underflow = false;
  bool ess_collapse = false;
};

struct Decision {
  int chosen = -1;
  std::vector<int> labels;
  std::vector<double> log_posteriors;  // parallel to labels
  double margin = 0.0;  // best minus second-best log posterior
  bool all_underflow = false;
  bool degraded = false;  // set by observers running below exact-mode size
  int ess_collapse_count = 0;  // flagged per-class estimates
};

// Per-rotation log Gaussian densities log N(view_j; project(model, R_s),
// sigma^2 I) for a shared rotation set. out is rotation-major:
// out(s, j). The OpenMP path fills independent entries and is bit-identical
// to the serial reference at any thread count.
void rotation_log_density_matrix(const Eigen::Matrix3Xd& model_points,
                                 const std::vector<geometry::Rotation3>& rots,
                                 const Eigen::MatrixXd& views, double sigma,
                                 Eigen::MatrixXd& out);
void rotation_log_density_matrix_serial(
    const Eigen::Matrix3Xd& model_points,
    const std::vector<geometry::Rotation3>& rots, const Eigen::MatrixXd& views,
    double sigma, Eigen::MatrixXd& out);

// P(V | M): Monte-Carlo average of the imaging density over Haar rotations.
LikelihoodEstimate likelihood_known_model(const geometry::View& v,
                                          const geometry::PointSet3D& m,
                                          const geometry::Priors& priors,
                                          const MonteCarloParams& mc,
                                          RandomStream& rng);

// P(V | training views): importance-sampling over latent models drawn from
// the Gaussian model prior, weighted by the training-view likelihoods.
LikelihoodEstimate likelihood_from_training(const geometry::View& v,
                                            const Eigen::MatrixXd& training,
                                            const geometry::Priors& priors,
                                            const MonteCarloParams& mc,
                                            RandomStream& rng);

struct MapModelResult {
  geometry::PointSet3D model;
  std::vector<geometry::Rotation3> rotations;  // per training view
  double objective = 0.0;  // log posterior up to an additive constant
  bool converged = false;
};

// Alternating maximization of the posterior over structure and per-view
// rotations; gradient-free rotation polish, multiple restarts.
MapModelResult map_model_estimate(
    const Eigen::MatrixXd& training, const geometry::Priors& priors,
    int iters, RandomStream& rng,
    const std::vector<geometry::Rotation3>* initial_rotations = nullptr,
    int restarts = 8, std::vector<double>* objective_trace = nullptr);

// The delta-posterior model-based observer's likelihood: P(V | MAP model).
LikelihoodEstimate likelihood_map_model(const geometry::View& v,
                                        const Eigen::MatrixXd& training,
                                        const geometry::Priors& priors,
                                        const MonteCarloParams& mc,
                                        RandomStream& rng);

// arg max over classes of log likelihood + log prior; ties to lowest label.
Decision decide(const std::map<int, LikelihoodEstimate>& per_class,
                const geometry::Priors& priors);

}  // namespace viewrec::bayes
