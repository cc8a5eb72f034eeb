#pragma once

#include <Eigen/Dense>
#include <vector>

#include "viewrec/rng.hpp"

namespace viewrec::geometry {

// A view is an ordered list of k 2D feature points flattened to R^{2k}:
// feature i occupies coords 2i, 2i+1.
using View = Eigen::VectorXd;

using Rotation3 = Eigen::Matrix3d;

struct PointSet3D {
  Eigen::Matrix3Xd points;  // one column per feature point
  int label = 0;

  int feature_count() const { return static_cast<int>(points.cols()); }
};

struct NoiseModel {
  double sigma = 0.0;  // std-dev of isotropic Gaussian per 2D coordinate
};

// n-dimensional orthogonal map plus translation: x -> ortho*x + translation
struct IsometryN {
  Eigen::MatrixXd ortho;
  Eigen::VectorXd translation;

  int dim() const { return static_cast<int>(ortho.rows()); }
  bool reflection() const { return ortho.determinant() < 0.0; }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    return ortho * x + translation;
  }
  Eigen::MatrixXd apply_cols(const Eigen::MatrixXd& pts) const {
    return (ortho * pts).colwise() + translation;
  }
  IsometryN inverse() const {
    IsometryN inv;
    inv.ortho = ortho.transpose();
    inv.translation = -(ortho.transpose() * translation);
    return inv;
  }
  static IsometryN identity(int n) {
    return {Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n)};
  }
};

struct Priors {
  std::vector<double> class_prior;  // per object label, sums to 1
  double model_tau = 1.0;           // std-dev of Gaussian model-coordinate prior
  NoiseModel noise;
};

// Haar-uniform rotation via normalized Gaussian quaternion.
Rotation3 sample_rotation(RandomStream& rng);

// Rotate then drop the depth coordinate; output length 2k in point order.
View project(const PointSet3D& model, const Rotation3& rot);

View add_noise(const View& view, const NoiseModel& noise, RandomStream& rng);

PointSet3D sample_model(const Priors& priors, int k, int label,
                        RandomStream& rng);

struct ProcrustesResult {
  IsometryN transform;  // maps source points onto target points
  double residual = 0.0;  // RMS distance after alignment
};

// Least-squares alignment of matched point columns over translations and
// orthogonal maps (rotations only when allow_reflection is false).
ProcrustesResult procrustes_align(const Eigen::MatrixXd& source,
                                  const Eigen::MatrixXd& target,
                                  bool allow_reflection);

}  // namespace viewrec::geometry
