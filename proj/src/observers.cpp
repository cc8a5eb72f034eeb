#include "viewrec/observers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "viewrec/errors.hpp"

namespace viewrec::observers {

AnchorInfo make_anchors(const LabeledViews& base) {
  const int n = base.view_dim();
  const int want = n + 1;  // 2k+1
  AnchorInfo a;
  const int count = std::min(want, base.size());
  a.degraded = count < want;
  a.anchor_indices.resize(count);
  a.anchor_coords.resize(n, count);
  for (int i = 0; i < count; ++i) {
    a.anchor_indices[i] = i;
    a.anchor_coords.col(i) = base.views.col(i);
  }
  return a;
}

namespace {

std::vector<int> present_classes(const std::vector<edm::ViewLabel>& labels) {
  std::set<int> s;
  for (const auto& l : labels) s.insert(l.object);
  return {s.begin(), s.end()};
}

Eigen::MatrixXd class_views(const LabeledViews& base, int object) {
  int count = 0;
  for (const auto& l : base.labels) count += (l.object == object);
  Eigen::MatrixXd out(base.view_dim(), count);
  int c = 0;
  for (int i = 0; i < base.size(); ++i) {
    if (base.labels[i].object == object) out.col(c++) = base.views.col(i);
  }
  return out;
}

}  // namespace

bayes::Decision observer_3d(const geometry::View& v, const LabeledViews& base,
                            const geometry::Priors& priors,
                            const bayes::MonteCarloParams& mc,
                            const RandomStream& stream) {
  std::map<int, bayes::LikelihoodEstimate> per_class;
  for (int object : present_classes(base.labels)) {
    RandomStream sub = stream.derive("class").derive(
        static_cast<std::uint64_t>(object));
    per_class[object] = bayes::likelihood_from_training(
        v, class_views(base, object), priors, mc, sub);
  }
  return bayes::decide(per_class, priors);
}

bayes::Decision observer_strongly_2d(const edm::SimilaritySet& s,
                                     const AnchorInfo& anchors,
                                     const geometry::Priors& priors,
                                     const bayes::MonteCarloParams& mc,
                                     const RandomStream& stream,
                                     double* recon_quality) {
  const int n = static_cast<int>(anchors.anchor_coords.rows());
  const int num = s.size();
  const bool degraded = num < n + 1 || anchors.degraded;

  Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(n, num);
  Eigen::VectorXd tgt = Eigen::VectorXd::Zero(n);
  if (!degraded) {
    edm::Embedding emb = edm::reconstruct_incremental(s.base_distances, n);
    pts = emb.points;
    tgt = edm::embed_target(emb, s.target_distances);
    if (recon_quality) *recon_quality = emb.quality;
  } else {
    // too few views to span: embed base and target jointly in the affine
    // span of all num+1 points, then zero-pad up to the view dimension
    const int recon_dim = num;
    Eigen::MatrixXd joint =
        Eigen::MatrixXd::Zero(num + 1, num + 1);
    joint.topLeftCorner(num, num) = s.base_distances.entries;
    joint.col(num).head(num) = s.target_distances;
    joint.row(num).head(num) = s.target_distances.transpose();
    edm::DistanceMatrix jd;
    jd.entries = joint;
    edm::Embedding emb = edm::reconstruct_incremental(jd, recon_dim);
    pts.topRows(recon_dim) = emb.points.leftCols(num);
    tgt.head(recon_dim) = emb.points.col(num);
    if (recon_quality) *recon_quality = emb.quality;
  }

  Eigen::MatrixXd rec_anchors(n,
                              static_cast<int>(anchors.anchor_indices.size()));
  for (size_t i = 0; i < anchors.anchor_indices.size(); ++i) {
    rec_anchors.col(static_cast<int>(i)) =
        pts.col(anchors.anchor_indices[i]);
  }
  const geometry::ProcrustesResult fit = geometry::procrustes_align(
      rec_anchors, anchors.anchor_coords, /*allow_reflection=*/true);
  const double coord_scale = anchors.anchor_coords.cwiseAbs().maxCoeff();
  if (!degraded && fit.residual > 1e-6 * (1.0 + coord_scale)) {
    throw AnchorMismatch(
        "observer_strongly_2d: anchors do not match the reconstruction");
  }

  LabeledViews restored;
  restored.views = fit.transform.apply_cols(pts);
  restored.labels = s.labels;
  const geometry::View v = fit.transform.apply(tgt);

  bayes::Decision d = observer_3d(v, restored, priors, mc, stream);
  d.degraded = degraded;
  return d;
}

bayes::Decision observer_nn(const edm::SimilaritySet& s) {
  if (s.size() < 1) throw EmptyInput("observer_nn: empty base");
  std::map<int, double> best_per_class;
  for (int i = 0; i < s.size(); ++i) {
    const int object = s.labels[i].object;
    const double d = s.target_distances(i);
    auto it = best_per_class.find(object);
    if (it == best_per_class.end() || d < it->second) {
      best_per_class[object] = d;
    }
  }
  bayes::Decision d;
  size_t best = 0;
  for (const auto& [object, dist] : best_per_class) {
    d.labels.push_back(object);
    d.log_posteriors.push_back(-dist);  // rank-faithful placeholder
  }
  for (size_t i = 1; i < d.labels.size(); ++i) {
    if (d.log_posteriors[i] > d.log_posteriors[best]) best = i;
  }
  d.chosen = d.labels[best];
  double second = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < d.labels.size(); ++i) {
    if (i != best) second = std::max(second, d.log_posteriors[i]);
  }
  d.margin = d.labels.size() > 1 ? d.log_posteriors[best] - second : 0.0;
  return d;
}

KernelWeights train_kernel(const LabeledViews& base, double bandwidth,
                           double ridge) {
  if (bandwidth <= 0.0) throw ConfigError("train_kernel: bandwidth <= 0");
  if (ridge < 0.0) throw ConfigError("train_kernel: ridge < 0");
  const int num = base.size();
  const edm::DistanceMatrix d = edm::DistanceMatrix::from_points(base.views);

  Eigen::MatrixXd gram(num, num);
  const double denom = 2.0 * bandwidth * bandwidth;
  for (int i = 0; i < num; ++i) {
    for (int j = 0; j < num; ++j) {
      const double s = d.entries(i, j);
      gram(i, j) = std::exp(-s * s / denom);
    }
  }

  KernelWeights w;
  w.bandwidth = bandwidth;
  w.class_labels = present_classes(base.labels);
  const int classes = static_cast<int>(w.class_labels.size());
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(num, classes);
  for (int i = 0; i < num; ++i) {
    for (int c = 0; c < classes; ++c) {
      if (base.labels[i].object == w.class_labels[c]) targets(i, c) = 1.0;
    }
  }

  const Eigen::MatrixXd sys =
      gram + ridge * Eigen::MatrixXd::Identity(num, num);
  if (ridge == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sys);
    qr.setThreshold(1e-12);
    if (qr.rank() < num) {
      throw SingularSystem("train_kernel: kernel Gram is rank-deficient");
    }
    w.alpha = qr.solve(targets);
  } else {
    w.alpha = sys.ldlt().solve(targets);
  }
  return w;
}

bayes::Decision score_kernel(const edm::SimilaritySet& s,
                             const KernelWeights& w) {
  if (s.size() != w.alpha.rows()) {
    throw LengthMismatch("score_kernel: weight/base size mismatch");
  }
  const double denom = 2.0 * w.bandwidth * w.bandwidth;
  Eigen::VectorXd g(s.size());
  for (int i = 0; i < s.size(); ++i) {
    const double d = s.target_distances(i);
    g(i) = std::exp(-d * d / denom);
  }
  const Eigen::VectorXd scores = w.alpha.transpose() * g;

  bayes::Decision d;
  d.labels = w.class_labels;
  d.log_posteriors.assign(scores.data(), scores.data() + scores.size());
  size_t best = 0;
  for (size_t i = 1; i < d.labels.size(); ++i) {
    if (d.log_posteriors[i] > d.log_posteriors[best]) best = i;
  }
  d.chosen = d.labels[best];
  double second = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < d.labels.size(); ++i) {
    if (i != best) second = std::max(second, d.log_posteriors[i]);
  }
  d.margin = d.labels.size() > 1 ? d.log_posteriors[best] - second : 0.0;
  return d;
}

double median_pairwise_distance(const LabeledViews& base) {
  const edm::DistanceMatrix d = edm::DistanceMatrix::from_points(base.views);
  std::vector<double> vals;
  for (int i = 0; i < base.size(); ++i) {
    for (int j = i + 1; j < base.size(); ++j) {
      vals.push_back(d.entries(i, j));
    }
  }
  if (vals.empty()) return 1.0;
  std::sort(vals.begin(), vals.end());
  return vals[vals.size() / 2];
}

std::vector<std::string> mu_trial(const geometry::View& v,
                                  const LabeledViews& base,
                                  const codec::FixedPointCodec& codec) {
  std::vector<std::string> out;
  out.reserve(base.size());
  for (int i = 0; i < base.size(); ++i) {
    out.push_back(codec::mu_similarity(v, base.views.col(i), codec));
  }
  return out;
}

bayes::Decision observer_from_mu(const std::vector<std::string>& mus,
                                 const std::vector<edm::ViewLabel>& labels,
                                 int view_size,
                                 const codec::FixedPointCodec& codec,
                                 const geometry::Priors& priors,
                                 const bayes::MonteCarloParams& mc,
                                 const RandomStream& stream) {
  if (mus.empty()) throw EmptyInput("observer_from_mu: no mu values");
  if (mus.size() != labels.size()) {
    throw LengthMismatch("observer_from_mu: label count mismatch");
  }
  LabeledViews base;
  base.views.resize(view_size, static_cast<int>(mus.size()));
  base.labels = labels;
  geometry::View v;
  for (size_t i = 0; i < mus.size(); ++i) {
    const codec::MuParts parts = codec::mu_decode(mus[i], view_size, codec);
    base.views.col(static_cast<int>(i)) = parts.t;
    v = parts.v;  // identical across mu values by construction
  }
  return observer_3d(v, base, priors, mc, stream);
}

}  // namespace viewrec::observers
