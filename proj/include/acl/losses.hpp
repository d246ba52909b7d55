#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "acl/numerics.hpp"

namespace acl {
namespace losses {

// 2N augmented views; rows (2k, 2k+1) are the two views of source item k.
// z lives in projection space, h in encoder space.
struct PairBatch {
  Matrix z;
  Matrix h;

  std::size_t n_pairs() const { return z.rows / 2; }

  // Validates: equal, even row counts >= 2 and no (near-)zero rows.
  static PairBatch create(Matrix z, Matrix h);
};

struct LossConfig {
  double tau = 0.2;                      // temperature, > 0
  double margin = num::kPi / 2.0;        // angular margin m_g in radians, (0, pi]
  double alpha = 0.3;                    // combination weight in [0, 1]

  void validate() const;
};

struct LossResult {
  double value = 0.0;
  Matrix grad;   // same shape as the differentiated input
};

// s[i][j] = 1 iff rows i and j are a positive pair (SSL: two views of one
// item; supervised: same class). Symmetric, zero diagonal.
struct PairRelation {
  std::size_t n = 0;
  std::vector<std::uint8_t> s;

  bool positive(std::size_t i, std::size_t j) const { return s[i * n + j] != 0; }

  static PairRelation for_pairs(std::size_t n_pairs);
  static PairRelation from_labels(std::span<const int> labels);
};

// The contrastive and margin terms attach at different pipeline depths, so
// the combined loss carries one gradient block per space: grad_z is already
// scaled by alpha, grad_h by (1 - alpha). Component values are kept raw.
struct AclResult {
  double value = 0.0;
  double contrastive = 0.0;
  double margin = 0.0;
  Matrix grad_z;
  Matrix grad_h;
};

struct SupervisedResult {
  double value = 0.0;
  double ce = 0.0;
  double margin = 0.0;
  Matrix grad_logits;
  Matrix grad_h;
};

// NT-Xent over cosine similarities, averaged over all 2N anchors. Gradient
// is taken with respect to the raw (unnormalized) z rows.
LossResult nt_xent(const PairBatch& batch, double tau);

// Squared angle for positives, squared hinge at margin for negatives, mean
// over all unordered row pairs. Rows are normalized internally; the gradient
// is with respect to the raw h. A single-row input has no pairs and yields 0.
LossResult angular_margin(const Matrix& h, const PairRelation& relation, double margin);

// alpha * nt_xent + (1 - alpha) * angular_margin, gradients per space.
AclResult acl(const PairBatch& batch, const PairRelation& relation, const LossConfig& cfg);

// Mean softmax cross-entropy; grad = (softmax - one_hot) / batch.
LossResult cross_entropy(const Matrix& logits, std::span<const int> labels);

// alpha * CE + (1 - alpha) * angular_margin with the relation derived from
// labels (positive iff equal).
SupervisedResult supervised_combined(const Matrix& logits, const Matrix& h,
                                     std::span<const int> labels, const LossConfig& cfg);

// SSL relation: s[2k][2k+1] = s[2k+1][2k] = 1.
PairRelation build_pair_relation(std::size_t n_pairs);

}  // namespace losses
}  // namespace acl
