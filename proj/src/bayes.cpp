#include "viewrec/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "viewrec/errors.hpp"

namespace viewrec::bayes {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_norm_const(int k, double sigma) {
  // (2*pi*sigma^2)^{-k} over 2k coordinates
  return -k * std::log(2.0 * std::numbers::pi * sigma * sigma);
}

void density_column(const Eigen::Matrix3Xd& model_points,
                    const geometry::Rotation3& rot,
                    const Eigen::MatrixXd& views, double inv_two_sigma_sq,
                    double log_c, Eigen::MatrixXd& out, int s) {
  const int k = static_cast<int>(model_points.cols());
  Eigen::VectorXd proj(2 * k);
  for (int i = 0; i < k; ++i) {
    proj(2 * i) = rot.row(0) * model_points.col(i);
    proj(2 * i + 1) = rot.row(1) * model_points.col(i);
  }
  for (Eigen::Index j = 0; j < views.cols(); ++j) {
    const double d2 = (views.col(j) - proj).squaredNorm();
    out(s, j) = log_c - d2 * inv_two_sigma_sq;
  }
}

// log of the mean of exp(column), max-shifted; also reports the delta-method
// standard error of that log-mean.
struct LogMean {
  double log_value = kNegInf;
  double std_error = 0.0;
};

LogMean log_mean_exp(const Eigen::Ref<const Eigen::VectorXd>& logs) {
  const Eigen::Index s = logs.size();
  LogMean out;
  const double mx = logs.maxCoeff();
  if (!std::isfinite(mx)) return out;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (Eigen::Index i = 0; i < s; ++i) {
    const double w = std::exp(logs(i) - mx);
    sum += w;
    sum_sq += w * w;
  }
  const double mean = sum / double(s);
  out.log_value = mx + std::log(mean);
  if (s > 1) {
    const double var = (sum_sq - sum * sum / double(s)) / double(s - 1);
    out.std_error = std::sqrt(std::max(var, 0.0) / double(s)) / mean;
  }
  return out;
}

void require_sigma(const geometry::Priors& priors) {
  if (priors.noise.sigma <= 0.0) {
    throw ConfigError("likelihood: noise sigma must be positive");
  }
}

}  // namespace

void rotation_log_density_matrix_serial(
    const Eigen::Matrix3Xd& model_points,
    const std::vector<geometry::Rotation3>& rots, const Eigen::MatrixXd& views,
    double sigma, Eigen::MatrixXd& out) {
  const int s_count = static_cast<int>(rots.size());
  const int k = static_cast<int>(model_points.cols());
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double log_c = log_norm_const(k, sigma);
  out.resize(s_count, views.cols());
  for (int s = 0; s < s_count; ++s) {
    density_column(model_points, rots[s], views, inv2s2, log_c, out, s);
  }
}

void rotation_log_density_matrix(const Eigen::Matrix3Xd& model_points,
                                 const std::vector<geometry::Rotation3>& rots,
                                 const Eigen::MatrixXd& views, double sigma,
                                 Eigen::MatrixXd& out) {
  const int s_count = static_cast<int>(rots.size());
  const int k = static_cast<int>(model_points.cols());
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double log_c = log_norm_const(k, sigma);
  out.resize(s_count, views.cols());
#pragma omp parallel for schedule(static)
  for (int s = 0; s < s_count; ++s) {
    density_column(model_points, rots[s], views, inv2s2, log_c, out, s);
  }
}

LikelihoodEstimate likelihood_known_model(const geometry::View& v,
                                          const geometry::PointSet3D& m,
                                          const geometry::Priors& priors,
                                          const MonteCarloParams& mc,
                                          RandomStream& rng) {
  require_sigma(priors);
  if (v.size() != 2 * m.feature_count()) {
    throw LengthMismatch("likelihood_known_model: view/model size mismatch");
  }
  std::vector<geometry::Rotation3> rots(mc.rotation_samples);
  for (auto& r : rots) r = geometry::sample_rotation(rng);

  Eigen::MatrixXd logd;
  rotation_log_density_matrix(m.points, rots, v, priors.noise.sigma, logd);

  LikelihoodEstimate est;
  est.samples_used = mc.rotation_samples;
  const LogMean lm = log_mean_exp(logd.col(0));
  est.log_value = lm.log_value;
  est.std_error = lm.std_error;
  est.underflow = !std::isfinite(est.log_value);
  return est;
}

LikelihoodEstimate likelihood_from_training(const geometry::View& v,
                                            const Eigen::MatrixXd& training,
                                            const geometry::Priors& priors,
                                            const MonteCarloParams& mc,
                                            RandomStream& rng) {
  require_sigma(priors);
  const int r = static_cast<int>(training.cols());
  const int k = static_cast<int>(v.size()) / 2;
  if (r > 0 && training.rows() != v.size()) {
    throw LengthMismatch("likelihood_from_training: view size mismatch");
  }

  // latent model draws, then a rotation set shared across models and views
  std::vector<geometry::PointSet3D> models(mc.model_samples);
  for (auto& m : models) m = geometry::sample_model(priors, k, 0, rng);
  std::vector<geometry::Rotation3> rots(mc.rotation_samples);
  for (auto& rot : rots) rot = geometry::sample_rotation(rng);

  Eigen::MatrixXd views(v.size(), r + 1);
  for (int j = 0; j < r; ++j) views.col(j) = training.col(j);
  views.col(r) = v;

  Eigen::VectorXd log_w(mc.model_samples);
  Eigen::VectorXd log_l(mc.model_samples);
  Eigen::MatrixXd logd;
  for (int s = 0; s < mc.model_samples; ++s) {
    rotation_log_density_matrix(models[s].points, rots, views,
                                priors.noise.sigma, logd);
    double lw = 0.0;
    for (int j = 0; j < r; ++j) lw += log_mean_exp(logd.col(j)).log_value;
    log_w(s) = lw;
    log_l(s) = log_mean_exp(logd.col(r)).log_value;
  }

  LikelihoodEstimate est;
  est.samples_used =
      static_cast<long>(mc.model_samples) * mc.rotation_samples;

  const double max_lw = log_w.maxCoeff();
  if (!std::isfinite(max_lw)) {
    est.log_value = kNegInf;
    est.underflow = true;
    est.ess_collapse = true;
    return est;
  }
  double denom = 0.0;
  double numer_max = (log_w + log_l).maxCoeff();
  double numer = 0.0;
  for (int s = 0; s < mc.model_samples; ++s) {
    denom += std::exp(log_w(s) - max_lw);
    if (std::isfinite(numer_max)) {
      numer += std::exp(log_w(s) + log_l(s) - numer_max);
    }
  }
  const double log_denom = max_lw + std::log(denom);
  if (!std::isfinite(numer_max) || numer == 0.0) {
    est.log_value = kNegInf;
    est.underflow = true;
  } else {
    est.log_value = numer_max + std::log(numer) - log_denom;
  }
  est.ess_collapse = denom < 2.0;  // sum w / max w

  if (std::isfinite(est.log_value)) {
    double var = 0.0;
    for (int s = 0; s < mc.model_samples; ++s) {
      const double u = std::exp(log_w(s) - log_denom);
      const double ratio = std::exp(log_l(s) - est.log_value) - 1.0;
      var += u * u * ratio * ratio;
    }
    est.std_error = std::sqrt(var);
  }
  return est;
}

namespace {

double fit_cost(const Eigen::MatrixXd& training,
                const Eigen::Matrix3Xd& model,
                const std::vector<geometry::Rotation3>& rots,
                double reg) {
  double cost = reg * model.squaredNorm();
  const int k = static_cast<int>(model.cols());
  for (size_t j = 0; j < rots.size(); ++j) {
    for (int i = 0; i < k; ++i) {
      const Eigen::Vector3d p = rots[j] * model.col(i);
      const double dx = training(2 * i, j) - p.x();
      const double dy = training(2 * i + 1, j) - p.y();
      cost += dx * dx + dy * dy;
    }
  }
  return cost;
}

geometry::Rotation3 axis_angle(const Eigen::Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace

MapModelResult map_model_estimate(
    const Eigen::MatrixXd& training, const geometry::Priors& priors,
    int iters, RandomStream& rng,
    const std::vector<geometry::Rotation3>* initial_rotations, int restarts,
    std::vector<double>* objective_trace) {
  const int r = static_cast<int>(training.cols());
  if (r < 2) {
    throw EmptyInput("map_model_estimate: need at least 2 training views");
  }
  const int k = static_cast<int>(training.rows()) / 2;
  const double sigma = priors.noise.sigma;
  const double reg = (sigma * sigma) / (priors.model_tau * priors.model_tau);

  MapModelResult best;
  double best_cost = std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < restarts; ++restart) {
    std::vector<geometry::Rotation3> rots(r);
    if (restart == 0 && initial_rotations) {
      rots = *initial_rotations;
    } else if (restart == 0) {
      for (auto& rot : rots) rot = geometry::Rotation3::Identity();
    } else {
      for (auto& rot : rots) rot = geometry::sample_rotation(rng);
    }

    Eigen::Matrix3Xd model = Eigen::Matrix3Xd::Zero(3, k);
    double cost = std::numeric_limits<double>::infinity();
    bool converged = false;

    for (int it = 0; it < iters; ++it) {
      // structure step: exact regularized least squares per point
      Eigen::Matrix3d ata = reg * Eigen::Matrix3d::Identity();
      std::vector<Eigen::Matrix<double, 2, 3>> proj(r);
      for (int j = 0; j < r; ++j) proj[j] = rots[j].topRows<2>();
      for (int j = 0; j < r; ++j) ata += proj[j].transpose() * proj[j];
      const Eigen::Matrix3d ata_inv = ata.inverse();
      for (int i = 0; i < k; ++i) {
        Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
        for (int j = 0; j < r; ++j) {
          rhs += proj[j].transpose() * training.block<2, 1>(2 * i, j);
        }
        model.col(i) = ata_inv * rhs;
      }

      // rotation step: accept-only local polish per view
      for (int j = 0; j < r; ++j) {
        auto view_cost = [&](const geometry::Rotation3& rot) {
          double c = 0.0;
          for (int i = 0; i < k; ++i) {
            const Eigen::Vector3d p = rot * model.col(i);
            const double dx = training(2 * i, j) - p.x();
            const double dy = training(2 * i + 1, j) - p.y();
            c += dx * dx + dy * dy;
          }
          return c;
        };
        double cur = view_cost(rots[j]);
        for (double step = 0.5; step > 1e-8; step *= 0.5) {
          bool improved = true;
          while (improved) {
            improved = false;
            for (int axis = 0; axis < 3; ++axis) {
              for (double sgn : {1.0, -1.0}) {
                const geometry::Rotation3 cand =
                    axis_angle(Eigen::Vector3d::Unit(axis), sgn * step) *
                    rots[j];
                const double c = view_cost(cand);
                if (c < cur) {
                  rots[j] = cand;
                  cur = c;
                  improved = true;
                }
              }
            }
          }
        }
      }

      const double new_cost = fit_cost(training, model, rots, reg);
      const double improvement = cost - new_cost;
      cost = new_cost;
      if (objective_trace && restart == 0) objective_trace->push_back(-cost);
      if (improvement >= 0.0 && improvement <= 1e-10 * (1.0 + cost)) {
        converged = true;
        break;
      }
    }

    if (cost < best_cost) {
      best_cost = cost;
      best.model.points = model;
      best.rotations = rots;
      best.converged = converged;
    }
  }

  const double sigma_sq = sigma > 0.0 ? sigma * sigma : 1.0;
  best.objective = -best_cost / (2.0 * sigma_sq);
  return best;
}

LikelihoodEstimate likelihood_map_model(const geometry::View& v,
                                        const Eigen::MatrixXd& training,
                                        const geometry::Priors& priors,
                                        const MonteCarloParams& mc,
                                        RandomStream& rng) {
  RandomStream map_rng = rng.derive("map-fit");
  RandomStream rot_rng = rng.derive("map-eval");
  const MapModelResult fit =
      map_model_estimate(training, priors, 50, map_rng);
  return likelihood_known_model(v, fit.model, priors, mc, rot_rng);
}

Decision decide(const std::map<int, LikelihoodEstimate>& per_class,
                const geometry::Priors& priors) {
  if (per_class.empty()) throw EmptyInput("decide: no classes");
  Decision d;
  bool any_finite = false;
  for (const auto& [label, est] : per_class) {
    if (est.ess_collapse) ++d.ess_collapse_count;
    if (label < 0 || label >= static_cast<int>(priors.class_prior.size())) {
      throw ConfigError("decide: no class prior for label");
    }
    const double lp = priors.class_prior[label] > 0.0
                          ? est.log_value + std::log(priors.class_prior[label])
                          : kNegInf;
    d.labels.push_back(label);
    d.log_posteriors.push_back(lp);
    if (std::isfinite(lp)) any_finite = true;
  }

  if (!any_finite) {
    // fall back to the prior arg max, flagged
    d.all_underflow = true;
    int best = d.labels.front();
    for (int label : d.labels) {
      if (priors.class_prior[label] > priors.class_prior[best]) best = label;
    }
    d.chosen = best;
    d.margin = 0.0;
    return d;
  }

  size_t best = 0;
  for (size_t i = 1; i < d.labels.size(); ++i) {
    if (d.log_posteriors[i] > d.log_posteriors[best]) best = i;
  }
  d.chosen = d.labels[best];
  double second = kNegInf;
  for (size_t i = 0; i < d.labels.size(); ++i) {
    if (i != best) second = std::max(second, d.log_posteriors[i]);
  }
  d.margin = d.labels.size() > 1 ? d.log_posteriors[best] - second : 0.0;
  return d;
}

}  // namespace viewrec::bayes
