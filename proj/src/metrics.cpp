#include "acl/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "acl/io.hpp"
#include "acl/losses.hpp"
#include "acl/rng.hpp"

namespace acl {
namespace metrics {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    double d = a[t] - b[t];
    s += d * d;
  }
  return s;
}

}  // namespace

LabeledEmbeddings LabeledEmbeddings::create(Matrix raw, std::vector<int> labels) {
  if (labels.size() != raw.rows) {
    raise(Err::LengthMismatch, "LabeledEmbeddings: labels do not match rows");
  }
  for (std::size_t i = 0; i < raw.rows; ++i) {
    Vector u = num::l2_normalize(raw.row(i));
    std::copy(u.begin(), u.end(), raw.row(i).begin());
  }
  return LabeledEmbeddings{std::move(raw), std::move(labels)};
}

const char* MetricReport::csv_header() { return "step,uniformity,tolerance,t,probe_acc"; }

std::string MetricReport::csv_row(long step, double probe_acc) const {
  return std::to_string(step) + "," + io::fmt_double(uniformity) + "," +
         io::fmt_double(tolerance) + "," + io::fmt_double(t_param) + "," +
         io::fmt_double(probe_acc);
}

double uniformity(const LabeledEmbeddings& emb, double t, const UniformityOptions& opt) {
  if (!(t > 0.0)) raise(Err::ConfigError, "uniformity: t must be > 0");
  const std::size_t n = emb.size();
  if (n < 2) raise(Err::TooFewSamples, "uniformity: need at least 2 samples");

  std::vector<double> terms;
  if (n <= opt.exact_limit) {
    terms.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        terms.push_back(-t * sq_dist(emb.z.row(i), emb.z.row(j)));
      }
    }
  } else {
    // Fixed-seed sampled estimator: uniform distinct index pairs.
    Rng rng = Rng(opt.seed).split(0x756E6966ULL);  // "unif"
    terms.reserve(opt.sample_pairs);
    for (std::size_t k = 0; k < opt.sample_pairs; ++k) {
      std::size_t i = static_cast<std::size_t>(rng.next_below(n));
      std::size_t j = static_cast<std::size_t>(rng.next_below(n - 1));
      if (j >= i) ++j;
      terms.push_back(-t * sq_dist(emb.z.row(i), emb.z.row(j)));
    }
  }
  double u = num::log_sum_exp(terms) - std::log(static_cast<double>(terms.size()));
  return std::min(u, 0.0);
}

double tolerance(const LabeledEmbeddings& emb, ToleranceNorm norm) {
  const std::size_t n = emb.size();
  if (n < 2) raise(Err::TooFewSamples, "tolerance: need at least 2 samples");

  double sum = 0.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (emb.labels[i] == emb.labels[j]) {
        sum += num::dot(emb.z.row(i), emb.z.row(j));
        ++same;
      }
    }
  }
  double denom;
  if (norm == ToleranceNorm::AllPairs) {
    denom = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  } else {
    if (same == 0) return 0.0;
    denom = static_cast<double>(same);
  }
  return std::clamp(sum / denom, -1.0, 1.0);
}

double linear_probe(const LabeledEmbeddings& train, const LabeledEmbeddings& test,
                    std::size_t epochs, double lr, std::uint64_t seed) {
  std::vector<int> pred = linear_probe_predict(train, test, epochs, lr, seed);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (pred[i] == test.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

std::vector<int> linear_probe_predict(const LabeledEmbeddings& train,
                                      const LabeledEmbeddings& test, std::size_t epochs,
                                      double lr, std::uint64_t seed) {
  if (train.z.cols != test.z.cols) {
    raise(Err::DimMismatch, "linear_probe: train/test dims differ");
  }
  int max_label = -1;
  for (int l : train.labels) {
    if (l < 0) raise(Err::LabelOutOfRange, "linear_probe: negative label");
    max_label = std::max(max_label, l);
  }
  const std::size_t classes = static_cast<std::size_t>(max_label) + 1;
  for (int l : test.labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      raise(Err::LabelMismatch, "linear_probe: test label outside train label space");
    }
  }

  const std::size_t d = train.z.cols;
  Matrix w(classes, d);
  Vector b(classes, 0.0);
  Rng rng = Rng(seed).split(0x70726F62ULL);  // "prob"
  double bound = std::sqrt(6.0 / static_cast<double>(d + classes));
  for (double& x : w.data) x = rng.next_range(-bound, bound);

  for (std::size_t e = 0; e < epochs; ++e) {
    Matrix logits = num::matmul_a_bt(train.z, w);
    num::add_row_inplace(logits, b);
    losses::LossResult ce = losses::cross_entropy(logits, train.labels);
    Matrix gw = num::matmul_at_b(ce.grad, train.z);  // classes x d
    Vector gb = num::col_sums(ce.grad);
    for (std::size_t i = 0; i < w.data.size(); ++i) w.data[i] -= lr * gw.data[i];
    for (std::size_t i = 0; i < classes; ++i) b[i] -= lr * gb[i];
  }

  Matrix logits = num::matmul_a_bt(test.z, w);
  num::add_row_inplace(logits, b);
  std::vector<int> pred(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    auto row = logits.row(i);
    std::size_t arg = 0;
    for (std::size_t k = 1; k < classes; ++k) {
      if (row[k] > row[arg]) arg = k;
    }
    pred[i] = static_cast<int>(arg);
  }
  return pred;
}

ClassAccuracy class_wise_accuracy(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) {
    raise(Err::LengthMismatch, "class_wise_accuracy: length mismatch");
  }
  std::map<int, std::pair<std::size_t, std::size_t>> counts;  // class -> (correct, total)
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& c = counts[truth[i]];
    ++c.second;
    if (pred[i] == truth[i]) ++c.first;
  }
  ClassAccuracy out;
  double sum = 0.0;
  for (const auto& [cls, c] : counts) {
    double acc = static_cast<double>(c.first) / static_cast<double>(c.second);
    out.per_class[cls] = acc;
    sum += acc;
  }
  if (!counts.empty()) out.macro = sum / static_cast<double>(counts.size());
  return out;
}

}  // namespace metrics
}  // namespace acl
