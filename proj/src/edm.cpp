#include "viewrec/edm.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <vector>

#include "viewrec/errors.hpp"

namespace viewrec::edm {

DistanceMatrix DistanceMatrix::from_points(const Eigen::MatrixXd& pts) {
  const Eigen::Index n = pts.cols();
  DistanceMatrix d;
  d.entries = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dist = (pts.col(i) - pts.col(j)).norm();
      d.entries(i, j) = dist;
      d.entries(j, i) = dist;
    }
  }
  return d;
}

double view_distance(const geometry::View& a, const geometry::View& b) {
  if (a.size() != b.size()) {
    throw LengthMismatch("view_distance: views have different lengths");
  }
  return (a - b).norm();
}

SimilaritySet similarity_set(const geometry::View& target,
                             const std::vector<LabeledView>& base) {
  if (base.empty()) throw EmptyInput("similarity_set: empty base");
  const Eigen::Index n = static_cast<Eigen::Index>(base.size());
  SimilaritySet s;
  s.base_distances.entries = Eigen::MatrixXd::Zero(n, n);
  s.target_distances.resize(n);
  s.labels.reserve(base.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    s.labels.push_back(base[i].label);
    s.target_distances(i) = view_distance(target, base[i].coords);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = view_distance(base[i].coords, base[j].coords);
      s.base_distances.entries(i, j) = d;
      s.base_distances.entries(j, i) = d;
    }
  }
  return s;
}

SphereIntersection sphere_intersect(const Eigen::VectorXd& center_b,
                                    double r_a, double r_b, double tol) {
  SphereIntersection out;
  const double b2 = center_b.squaredNorm();
  if (b2 == 0.0) {
    if (std::abs(r_a - r_b) <= tol * (1.0 + r_a)) {
      out.kind = SphereIntersection::Kind::Coincident;
    } else {
      out.kind = SphereIntersection::Kind::Empty;
    }
    return out;
  }
  const double lambda = (r_a * r_a - r_b * r_b + b2) / (2.0 * b2);
  const double disc = r_a * r_a - lambda * lambda * b2;
  const double scale = 1.0 + r_a * r_a + r_b * r_b + b2;
  out.lambda = lambda;
  if (disc < -tol * scale) {
    out.kind = SphereIntersection::Kind::Empty;
  } else if (disc <= tol * scale) {
    out.kind = SphereIntersection::Kind::Tangent;
    out.q_norm = 0.0;
  } else {
    out.kind = SphereIntersection::Kind::Intersect;
    out.q_norm = std::sqrt(disc);
  }
  return out;
}

namespace {

void check_matrix(const DistanceMatrix& d) {
  const Eigen::MatrixXd& e = d.entries;
  if (e.rows() != e.cols()) {
    throw InconsistentDistances("distance matrix not square");
  }
  const double scale = e.cwiseAbs().maxCoeff();
  if ((e - e.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + scale)) {
    throw InconsistentDistances("distance matrix not symmetric");
  }
  if (e.diagonal().cwiseAbs().maxCoeff() > 1e-12 * (1.0 + scale)) {
    throw InconsistentDistances("distance matrix has nonzero diagonal");
  }
  if (e.minCoeff() < 0.0) {
    throw InconsistentDistances("distance matrix has negative entries");
  }
}

double recompute_quality(const Eigen::MatrixXd& pts,
                         const Eigen::MatrixXd& d) {
  double q = 0.0;
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    for (Eigen::Index j = i + 1; j < pts.cols(); ++j) {
      q = std::max(q, std::abs((pts.col(i) - pts.col(j)).norm() - d(i, j)));
    }
  }
  return q;
}

// Least-squares position of point j from its distances to the placed points,
// relative to a reference placed at the origin. Returns the in-span
// coordinates and the squared radial (out-of-span) component.
struct Multilat {
  Eigen::VectorXd in_span;
  double radial_sq = 0.0;
};

Multilat multilaterate(const Eigen::MatrixXd& coords,
                       const std::vector<int>& placed, int ref, int dims,
                       const Eigen::MatrixXd& d, int j) {
  Multilat out;
  out.in_span = Eigen::VectorXd::Zero(dims);
  const double dref2 = d(ref, j) * d(ref, j);
  if (dims > 0) {
    const int rows = static_cast<int>(placed.size()) - 1;
    Eigen::MatrixXd a(rows, dims);
    Eigen::VectorXd b(rows);
    int r = 0;
    for (int i : placed) {
      if (i == ref) continue;
      const Eigen::VectorXd p = coords.col(i).head(dims);
      a.row(r) = 2.0 * p.transpose();
      b(r) = p.squaredNorm() + dref2 - d(i, j) * d(i, j);
      ++r;
    }
    if (rows > 0) out.in_span = a.colPivHouseholderQr().solve(b);
  }
  out.radial_sq = dref2 - out.in_span.squaredNorm();
  return out;
}

}  // namespace

Embedding reconstruct_incremental(const DistanceMatrix& d, int n) {
  check_matrix(d);
  const int num = d.size();
  if (n < 1) throw DegenerateInput("reconstruct: dimension must be >= 1");
  if (num < n + 1) {
    throw DegenerateInput("reconstruct: need at least n+1 points");
  }
  const Eigen::MatrixXd& e = d.entries;
  const double scale = e.maxCoeff();
  const double scale_sq = 1.0 + scale * scale;
  const double rank_tol_sq = kRankTol * scale_sq;

  Eigen::MatrixXd coords = Eigen::MatrixXd::Zero(n, num);
  std::vector<bool> is_placed(num, false);
  std::vector<int> placed;
  const int ref = 0;
  is_placed[ref] = true;
  placed.push_back(ref);
  int dims = 0;

  // Frame phase: greedily pick the point with the largest out-of-span
  // component; each pick opens one axis with positive sign (the mirror
  // choice is made here, once per axis).
  while (dims < n) {
    int best = -1;
    double best_radial = rank_tol_sq;
    double worst_radial = 0.0;
    Eigen::VectorXd best_in_span;
    for (int j = 0; j < num; ++j) {
      if (is_placed[j]) continue;
      Multilat m = multilaterate(coords, placed, ref, dims, e, j);
      worst_radial = std::min(worst_radial, m.radial_sq);
      if (m.radial_sq > best_radial) {
        best_radial = m.radial_sq;
        best = j;
        best_in_span = m.in_span;
      }
    }
    if (best < 0) {
      // For a realizable distance matrix the out-of-span component is a
      // projection residual and cannot go significantly negative.
      if (worst_radial < -kResidualTol * scale_sq) {
        throw InconsistentDistances(
            "reconstruct: distances are not Euclidean");
      }
      throw DegenerateInput(
          "reconstruct: no affinely independent subset of size n+1");
    }
    coords.col(best).head(dims) = best_in_span;
    coords(dims, best) = std::sqrt(best_radial);
    is_placed[best] = true;
    placed.push_back(best);
    ++dims;
  }

  // Fill phase: remaining points are fully determined by the frame.
  const std::vector<int> frame = placed;
  for (int j = 0; j < num; ++j) {
    if (is_placed[j]) continue;
    Multilat m = multilaterate(coords, frame, ref, n, e, j);
    coords.col(j) = m.in_span;
    is_placed[j] = true;
  }

  Embedding emb;
  emb.dim = n;
  emb.points = coords;
  emb.quality = recompute_quality(coords, e);
  if (emb.quality > kResidualTol * (1.0 + scale)) {
    throw InconsistentDistances(
        "reconstruct: distances are not realizable in the requested "
        "dimension");
  }
  return emb;
}

Embedding reconstruct_spectral(const DistanceMatrix& d, int n) {
  check_matrix(d);
  const int num = d.size();
  if (n < 1) throw DegenerateInput("reconstruct: dimension must be >= 1");
  if (num < n + 1) {
    throw DegenerateInput("reconstruct: need at least n+1 points");
  }
  const Eigen::MatrixXd& e = d.entries;
  const double scale = e.maxCoeff();

  const Eigen::MatrixXd dsq = e.array().square().matrix();
  const Eigen::MatrixXd j =
      Eigen::MatrixXd::Identity(num, num) -
      Eigen::MatrixXd::Constant(num, num, 1.0 / num);
  const Eigen::MatrixXd gram = -0.5 * j * dsq * j;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  // ascending order from Eigen; index num-1 is the largest
  const Eigen::VectorXd ev = es.eigenvalues();
  const double lead = ev(num - 1);
  if (lead <= 0.0) {
    throw DegenerateInput("reconstruct_spectral: all points coincident");
  }
  if (ev(0) < -1e-8 * lead) {
    throw InconsistentDistances(
        "reconstruct_spectral: Gram matrix has a significant negative "
        "eigenvalue");
  }
  const double nth = ev(num - n);
  if (nth <= kRankTol * lead) {
    throw DegenerateInput(
        "reconstruct_spectral: configuration spans fewer than n dimensions");
  }
  if (num > n + 0 && num - n - 1 >= 0) {
    const double next = ev(num - n - 1);
    if (next > kRankTol * lead) {
      throw DegenerateInput(
          "reconstruct_spectral: configuration needs more than n dimensions");
    }
  }

  Embedding emb;
  emb.dim = n;
  emb.points.resize(n, num);
  for (int a = 0; a < n; ++a) {
    const int idx = num - 1 - a;
    const double lam = std::max(ev(idx), 0.0);
    emb.points.row(a) = std::sqrt(lam) * es.eigenvectors().col(idx).transpose();
  }
  emb.quality = recompute_quality(emb.points, e);
  if (emb.quality > kResidualTol * (1.0 + scale)) {
    throw InconsistentDistances(
        "reconstruct_spectral: distances are not realizable in the requested "
        "dimension");
  }
  return emb;
}

Eigen::VectorXd embed_target(const Embedding& base,
                             const Eigen::VectorXd& target_distances) {
  const int num = static_cast<int>(base.points.cols());
  if (target_distances.size() != num) {
    throw LengthMismatch("embed_target: wrong number of distances");
  }
  if (num < base.dim + 1) {
    throw DegenerateInput("embed_target: base too small to span");
  }
  const Eigen::VectorXd p0 = base.points.col(0);
  const double d0sq = target_distances(0) * target_distances(0);
  Eigen::MatrixXd a(num - 1, base.dim);
  Eigen::VectorXd b(num - 1);
  for (int i = 1; i < num; ++i) {
    const Eigen::VectorXd pi = base.points.col(i);
    a.row(i - 1) = 2.0 * (pi - p0).transpose();
    b(i - 1) = pi.squaredNorm() - p0.squaredNorm() + d0sq -
               target_distances(i) * target_distances(i);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(kRankTol);
  if (qr.rank() < base.dim) {
    throw DegenerateInput("embed_target: base does not span affinely");
  }
  const Eigen::VectorXd x = qr.solve(b);

  const double dmax = target_distances.maxCoeff();
  double resid = 0.0;
  for (int i = 0; i < num; ++i) {
    resid = std::max(resid, std::abs((x - base.points.col(i)).norm() -
                                     target_distances(i)));
  }
  if (resid > kResidualTol * (1.0 + dmax) + base.quality) {
    throw InconsistentDistances("embed_target: distances are not consistent");
  }
  return x;
}

}  // namespace viewrec::edm
