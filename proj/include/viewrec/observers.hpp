#pragma once

#include <string>
#include <vector>

#include "viewrec/bayes.hpp"
#include "viewrec/codec.hpp"
#include "viewrec/edm.hpp"

namespace viewrec::observers {

struct LabeledViews {
  Eigen::MatrixXd views;  // 2k x N, one column per training view
  std::vector<edm::ViewLabel> labels;

  int size() const { return static_cast<int>(views.cols()); }
  int view_dim() const { return static_cast<int>(views.rows()); }
};

// The sanctioned side channel for inferring the nuisance isometry: true
// coordinates of a spanning subset of training views.
struct AnchorInfo {
  std::vector<int> anchor_indices;
  Eigen::MatrixXd anchor_coords;  // 2k x (anchor count)
  bool degraded = false;          // fewer than 2k+1 anchors available
};

AnchorInfo make_anchors(const LabeledViews& base);

// Reference observer with full coordinate access; per-class likelihoods from
// training views, common substreams derived from the given stream.
bayes::Decision observer_3d(const geometry::View& v, const LabeledViews& base,
                            const geometry::Priors& priors,
                            const bayes::MonteCarloParams& mc,
                            const RandomStream& stream);

// The similarity-only observer: reconstructs all views from distances alone,
// undoes the nuisance isometry via the anchors, then runs the exact same
// likelihood-and-decide path as observer_3d.
bayes::Decision observer_strongly_2d(const edm::SimilaritySet& s,
                                     const AnchorInfo& anchors,
                                     const geometry::Priors& priors,
                                     const bayes::MonteCarloParams& mc,
                                     const RandomStream& stream,
                                     double* recon_quality = nullptr);

bayes::Decision observer_nn(const edm::SimilaritySet& s);

struct KernelWeights {
  Eigen::MatrixXd alpha;  // N x (class count)
  std::vector<int> class_labels;
  double bandwidth = 1.0;
};

// Ridge-regularized least squares on one-hot targets over the Gaussian
// kernel of pairwise training similarities.
KernelWeights train_kernel(const LabeledViews& base, double bandwidth,
                           double ridge);

bayes::Decision score_kernel(const edm::SimilaritySet& s,
                             const KernelWeights& w);

double median_pairwise_distance(const LabeledViews& base);

// Interleaving-similarity values for one trial: mu(v, t_i) per training view.
std::vector<std::string> mu_trial(const geometry::View& v,
                                  const LabeledViews& base,
                                  const codec::FixedPointCodec& codec);

// Decode the mu values back into views and rerun the 3D observer; equal to
// observer_3d on grid-exact inputs.
bayes::Decision observer_from_mu(const std::vector<std::string>& mus,
                                 const std::vector<edm::ViewLabel>& labels,
                                 int view_size,
                                 const codec::FixedPointCodec& codec,
                                 const geometry::Priors& priors,
                                 const bayes::MonteCarloParams& mc,
                                 const RandomStream& stream);

}  // namespace viewrec::observers
