#include "viewrec/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "viewrec/errors.hpp"

namespace viewrec::geometry {

Rotation3 sample_rotation(RandomStream& rng) {
  double w = rng.gaussian();
  double x = rng.gaussian();
  double y = rng.gaussian();
  double z = rng.gaussian();
  double norm = std::sqrt(w * w + x * x + y * y + z * z);
  while (norm < 1e-12) {
    w = rng.gaussian();
    x = rng.gaussian();
    y = rng.gaussian();
    z = rng.gaussian();
    norm = std::sqrt(w * w + x * x + y * y + z * z);
  }
  w /= norm;
  x /= norm;
  y /= norm;
  z /= norm;

  Rotation3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

View project(const PointSet3D& model, const Rotation3& rot) {
  const int k = model.feature_count();
  View view(2 * k);
  for (int i = 0; i < k; ++i) {
    const Eigen::Vector3d p = rot * model.points.col(i);
    view(2 * i) = p.x();
    view(2 * i + 1) = p.y();
  }
  return view;
}

View add_noise(const View& view, const NoiseModel& noise, RandomStream& rng) {
  if (noise.sigma == 0.0) return view;
  View out = view;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out(i) += noise.sigma * rng.gaussian();
  }
  return out;
}

PointSet3D sample_model(const Priors& priors, int k, int label,
                        RandomStream& rng) {
  PointSet3D model;
  model.label = label;
  model.points.resize(3, k);
  for (int i = 0; i < k; ++i) {
    for (int d = 0; d < 3; ++d) {
      model.points(d, i) = priors.model_tau * rng.gaussian();
    }
  }
  return model;
}

ProcrustesResult procrustes_align(const Eigen::MatrixXd& source,
                                  const Eigen::MatrixXd& target,
                                  bool allow_reflection) {
  if (source.cols() == 0) throw EmptyInput("procrustes_align: empty point set");
  if (source.cols() != target.cols() || source.rows() != target.rows()) {
    throw LengthMismatch("procrustes_align: mismatched point sets");
  }
  const Eigen::Index m = source.cols();
  const Eigen::VectorXd cs = source.rowwise().mean();
  const Eigen::VectorXd ct = target.rowwise().mean();
  const Eigen::MatrixXd x = source.colwise() - cs;
  const Eigen::MatrixXd y = target.colwise() - ct;

  const Eigen::MatrixXd h = x * y.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(h, Eigen::ComputeFullU |
                                               Eigen::ComputeFullV);
  Eigen::MatrixXd q = svd.matrixV() * svd.matrixU().transpose();
  if (!allow_reflection && q.determinant() < 0.0) {
    Eigen::MatrixXd v = svd.matrixV();
    v.col(v.cols() - 1) *= -1.0;
    q = v * svd.matrixU().transpose();
  }

  ProcrustesResult res;
  res.transform.ortho = q;
  res.transform.translation = ct - q * cs;
  const Eigen::MatrixXd mapped = res.transform.apply_cols(source);
  res.residual =
      std::sqrt((mapped - target).colwise().squaredNorm().sum() / double(m));
  return res;
}

}  // namespace viewrec::geometry
