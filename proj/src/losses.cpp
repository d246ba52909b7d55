#include "acl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace acl {
namespace losses {

namespace {

// Width of the arccos endpoint layer. Inside it the 1/sqrt(1-u^2) factor is
// replaced by a finite form so pair gradients stay bounded at u = +/-1.
constexpr double kEdge = 1e-7;

// d(theta^2)/du for a positive pair, theta = arccos(u). Near u = 1 the exact
// expression is 0/0; its series is -2 - 2(1-u)/3 + O((1-u)^2).
double d_positive_du(double u, double theta) {
  if (u > 1.0 - kEdge) return -2.0 - 2.0 * (1.0 - u) / 3.0;
  return -2.0 * theta / std::sqrt((1.0 - u) * std::max(1.0 + u, kEdge));
}

// d(max(0, m - theta)^2)/du for a negative pair with active hinge margin
// m = m_g - theta > 0. Genuinely singular at u = 1; the clamped factor keeps
// the value finite inside the endpoint layer.
double d_negative_du(double u, double hinge) {
  return 2.0 * hinge / std::sqrt(std::max(1.0 - u, kEdge) * std::max(1.0 + u, kEdge));
}

void check_rows_nonzero(const Matrix& m, const char* what) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    if (num::l2_norm(m.row(i)) < num::kZeroNormEps) {
      raise(Err::ZeroVector, std::string(what) + ": row " + std::to_string(i) +
                                 " has (near-)zero norm");
    }
  }
}

}  // namespace

PairBatch PairBatch::create(Matrix z, Matrix h) {
  if (z.rows != h.rows) raise(Err::DimMismatch, "PairBatch: z/h row counts differ");
  if (z.rows < 2 || z.rows % 2 != 0) {
    raise(Err::DegenerateBatch, "PairBatch: row count must be even and >= 2");
  }
  check_rows_nonzero(z, "PairBatch z");
  check_rows_nonzero(h, "PairBatch h");
  return PairBatch{std::move(z), std::move(h)};
}

void LossConfig::validate() const {
  if (!(tau > 0.0)) raise(Err::ConfigError, "loss.tau must be > 0");
  if (!(margin > 0.0) || margin > num::kPi) {
    raise(Err::ConfigError, "loss.margin must be in (0, pi]");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    raise(Err::ConfigError, "loss.alpha must be in [0, 1]");
  }
}

PairRelation PairRelation::for_pairs(std::size_t n_pairs) {
  if (n_pairs < 1) raise(Err::EmptyInput, "PairRelation: need at least one pair");
  std::size_t n = 2 * n_pairs;
  PairRelation rel{n, std::vector<std::uint8_t>(n * n, 0)};
  for (std::size_t k = 0; k < n_pairs; ++k) {
    rel.s[(2 * k) * n + (2 * k + 1)] = 1;
    rel.s[(2 * k + 1) * n + (2 * k)] = 1;
  }
  return rel;
}

PairRelation PairRelation::from_labels(std::span<const int> labels) {
  std::size_t n = labels.size();
  PairRelation rel{n, std::vector<std::uint8_t>(n * n, 0)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && labels[i] == labels[j]) rel.s[i * n + j] = 1;
    }
  }
  return rel;
}

PairRelation build_pair_relation(std::size_t n_pairs) {
  return PairRelation::for_pairs(n_pairs);
}

LossResult nt_xent(const PairBatch& batch, double tau) {
  if (!(tau > 0.0)) raise(Err::ConfigError, "nt_xent: tau must be > 0");
  const Matrix& z = batch.z;
  const std::size_t n = z.rows;
  const std::size_t d = z.cols;

  // Unit rows and their raw norms; the gradient passes back through the
  // normalization onto raw z.
  Matrix zu(n, d);
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vector u = num::l2_normalize(z.row(i));
    norms[i] = num::l2_norm(z.row(i));
    std::copy(u.begin(), u.end(), zu.row(i).begin());
  }

  Matrix sim(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      sim.at(i, j) = std::clamp(num::dot(zu.row(i), zu.row(j)), -1.0, 1.0);
    }
  }

  LossResult out;
  out.grad = Matrix(n, d);
  double total = 0.0;
  std::vector<double> scaled(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t partner = i ^ 1ULL;
    std::size_t m = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k != i) scaled[m++] = sim.at(i, k) / tau;
    }
    double lse = num::log_sum_exp(scaled);
    total += lse - sim.at(i, partner) / tau;

    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      double softmax = std::exp(sim.at(i, k) / tau - lse);
      double c = (softmax - (k == partner ? 1.0 : 0.0)) / (tau * static_cast<double>(n));
      if (c == 0.0) continue;
      double s_ik = sim.at(i, k);
      double* gi = out.grad.data.data() + i * d;
      double* gk = out.grad.data.data() + k * d;
      const double* ui = zu.data.data() + i * d;
      const double* uk = zu.data.data() + k * d;
      for (std::size_t t = 0; t < d; ++t) {
        gi[t] += c * (uk[t] - s_ik * ui[t]) / norms[i];
        gk[t] += c * (ui[t] - s_ik * uk[t]) / norms[k];
      }
    }
  }
  // Loss can dip an ulp below zero for N=1; it is exactly zero there.
  out.value = std::max(total / static_cast<double>(n), 0.0);
  return out;
}

LossResult angular_margin(const Matrix& h, const PairRelation& relation, double margin) {
  if (!(margin > 0.0) || margin > num::kPi) {
    raise(Err::ConfigError, "angular_margin: margin must be in (0, pi]");
  }
  if (relation.n != h.rows) {
    raise(Err::DimMismatch, "angular_margin: relation size does not match rows");
  }
  if (h.rows == 0) raise(Err::EmptyInput, "angular_margin: empty batch");

  const std::size_t n = h.rows;
  const std::size_t d = h.cols;
  LossResult out;
  out.grad = Matrix(n, d);
  if (n < 2) return out;  // no pairs

  Matrix hu(n, d);
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vector u = num::l2_normalize(h.row(i));
    norms[i] = num::l2_norm(h.row(i));
    std::copy(u.begin(), u.end(), hu.row(i).begin());
  }

  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double u = std::clamp(num::dot(hu.row(i), hu.row(j)), -1.0, 1.0);
      double theta = num::stable_arccos(u);
      double dterm_du;
      if (relation.positive(i, j)) {
        total += theta * theta;
        dterm_du = d_positive_du(u, theta);
      } else {
        double hinge = margin - theta;
        if (hinge <= 0.0) continue;
        total += hinge * hinge;
        dterm_du = d_negative_du(u, hinge);
      }
      double c = dterm_du / pairs;
      double* gi = out.grad.data.data() + i * d;
      double* gj = out.grad.data.data() + j * d;
      const double* ui = hu.data.data() + i * d;
      const double* uj = hu.data.data() + j * d;
      for (std::size_t t = 0; t < d; ++t) {
        gi[t] += c * (uj[t] - u * ui[t]) / norms[i];
        gj[t] += c * (ui[t] - u * uj[t]) / norms[j];
      }
    }
  }
  out.value = total / pairs;
  return out;
}

AclResult acl(const PairBatch& batch, const PairRelation& relation, const LossConfig& cfg) {
  cfg.validate();
  LossResult contrastive = nt_xent(batch, cfg.tau);
  LossResult margin = angular_margin(batch.h, relation, cfg.margin);

  AclResult out;
  out.contrastive = contrastive.value;
  out.margin = margin.value;
  out.value = cfg.alpha * contrastive.value + (1.0 - cfg.alpha) * margin.value;
  out.grad_z = std::move(contrastive.grad);
  for (double& g : out.grad_z.data) g *= cfg.alpha;
  out.grad_h = std::move(margin.grad);
  for (double& g : out.grad_h.data) g *= 1.0 - cfg.alpha;
  return out;
}

LossResult cross_entropy(const Matrix& logits, std::span<const int> labels) {
  if (logits.rows == 0) raise(Err::EmptyInput, "cross_entropy: empty batch");
  if (labels.size() != logits.rows) {
    raise(Err::LengthMismatch, "cross_entropy: label count does not match rows");
  }
  const std::size_t n = logits.rows;
  const std::size_t c = logits.cols;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      raise(Err::LabelOutOfRange,
            "cross_entropy: label " + std::to_string(labels[i]) + " at row " +
                std::to_string(i) + " outside [0, " + std::to_string(c) + ")");
    }
  }

  LossResult out;
  out.grad = Matrix(n, c);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto row = logits.row(i);
    double lse = num::log_sum_exp(row);
    total += lse - row[static_cast<std::size_t>(labels[i])];
    double* g = out.grad.data.data() + i * c;
    for (std::size_t k = 0; k < c; ++k) {
      double p = std::exp(row[k] - lse);
      g[k] = (p - (static_cast<std::size_t>(labels[i]) == k ? 1.0 : 0.0)) /
             static_cast<double>(n);
    }
  }
  out.value = std::max(total / static_cast<double>(n), 0.0);
  return out;
}

SupervisedResult supervised_combined(const Matrix& logits, const Matrix& h,
                                     std::span<const int> labels, const LossConfig& cfg) {
  cfg.validate();
  if (h.rows != logits.rows) {
    raise(Err::DimMismatch, "supervised_combined: h/logits row counts differ");
  }
  LossResult ce = cross_entropy(logits, labels);
  PairRelation rel = PairRelation::from_labels(labels);
  LossResult margin = angular_margin(h, rel, cfg.margin);

  SupervisedResult out;
  out.ce = ce.value;
  out.margin = margin.value;
  out.value = cfg.alpha * ce.value + (1.0 - cfg.alpha) * margin.value;
  out.grad_logits = std::move(ce.grad);
  for (double& g : out.grad_logits.data) g *= cfg.alpha;
  out.grad_h = std::move(margin.grad);
  for (double& g : out.grad_h.data) g *= 1.0 - cfg.alpha;
  return out;
}

}  // namespace losses
}  // namespace acl
