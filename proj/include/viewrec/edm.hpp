#pragma once

#include <Eigen/Dense>
#include <vector>

#include "viewrec/geometry.hpp"

namespace viewrec::edm {

constexpr double kRankTol = 1e-9;      // relative rank tolerance
constexpr double kResidualTol = 1e-8;  // relative distance residual tolerance

struct DistanceMatrix {
  Eigen::MatrixXd entries;  // symmetric, zero diagonal, nonnegative

  int size() const { return static_cast<int>(entries.rows()); }

  static DistanceMatrix from_points(const Eigen::MatrixXd& pts);
};

struct ViewLabel {
  int object = 0;
  int view_index = 0;
};

// The entire input a strongly two-dimensional observer may read: pairwise
// training-view distances plus target-to-training distances.
struct SimilaritySet {
  DistanceMatrix base_distances;
  Eigen::VectorXd target_distances;
  std::vector<ViewLabel> labels;

  int size() const { return base_distances.size(); }
};

struct Embedding {
  int dim = 0;
  Eigen::MatrixXd points;  // dim x N, one column per input row
  double quality = 0.0;    // max abs pairwise-distance residual, recomputed
};

double view_distance(const geometry::View& a, const geometry::View& b);

struct LabeledView {
  geometry::View coords;
  ViewLabel label;
};

SimilaritySet similarity_set(const geometry::View& target,
                             const std::vector<LabeledView>& base);

struct SphereIntersection {
  enum class Kind { Intersect, Tangent, Empty, Coincident };
  Kind kind = Kind::Empty;
  double lambda = 0.0;
  double q_norm = 0.0;
};

// Intersection of the sphere |x| = r_a (centered at the origin) with
// |x - b| = r_b, parametrized as x = lambda*b + q with q perpendicular to b.
SphereIntersection sphere_intersect(const Eigen::VectorXd& center_b,
                                    double r_a, double r_b,
                                    double tol = 1e-10);

// Coordinate recovery from distances alone, up to isometry: greedy frame
// selection, then multilateration of the remaining points.
Embedding reconstruct_incremental(const DistanceMatrix& d, int n);

// Classical double-centering embedding; independent oracle for the
// incremental path.
Embedding reconstruct_spectral(const DistanceMatrix& d, int n);

// Locate one additional point from its distances to an already-embedded,
// affinely spanning base. Unique (no mirror freedom).
Eigen::VectorXd embed_target(const Embedding& base,
                             const Eigen::VectorXd& target_distances);

}  // namespace viewrec::edm
