#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "acl/numerics.hpp"

namespace acl {
namespace metrics {

// Embedding rows are L2-normalized on construction so the tolerance inner
// product is a cosine and uniformity sees unit-hypersphere points.
struct LabeledEmbeddings {
  Matrix z;                  // n x d, unit rows
  std::vector<int> labels;   // length n

  std::size_t size() const { return z.rows; }

  static LabeledEmbeddings create(Matrix raw, std::vector<int> labels);
};

struct MetricReport {
  double uniformity = 0.0;   // <= 0
  double tolerance = 0.0;    // in [-1, 1]
  double t_param = 2.0;      // > 0
  std::size_t n_samples = 0;

  // One CSV row: step,uniformity,tolerance,t,probe_acc
  std::string csv_row(long step, double probe_acc) const;
  static const char* csv_header();
};

struct UniformityOptions {
  // Above this many rows the exact all-pairs estimator switches to a
  // fixed-seed sampled estimator of `sample_pairs` pairs.
  std::size_t exact_limit = 2048;
  std::size_t sample_pairs = 1 << 21;
  std::uint64_t seed = 0;
};

// U(z; t) = log mean exp(-t ||z_x - z_y||^2) over unordered distinct pairs.
double uniformity(const LabeledEmbeddings& emb, double t,
                  const UniformityOptions& opt = {});

enum class ToleranceNorm {
  AllPairs,        // literal formula: cross-label pairs count in the denominator
  SameClassOnly,   // mean over same-label pairs only
};

// T = mean z_x . z_y 1[l(z_x) = l(z_y)] over unordered distinct pairs.
double tolerance(const LabeledEmbeddings& emb,
                 ToleranceNorm norm = ToleranceNorm::AllPairs);

// Trains one linear softmax layer on frozen train embeddings by full-batch
// gradient descent and returns test accuracy in [0, 1].
double linear_probe(const LabeledEmbeddings& train, const LabeledEmbeddings& test,
                    std::size_t epochs, double lr, std::uint64_t seed = 0);

// Same probe, but returns the per-row test predictions (argmax, lowest index
// wins ties).
std::vector<int> linear_probe_predict(const LabeledEmbeddings& train,
                                      const LabeledEmbeddings& test, std::size_t epochs,
                                      double lr, std::uint64_t seed = 0);

struct ClassAccuracy {
  std::map<int, double> per_class;   // recall per class present in truth
  double macro = 0.0;
};

ClassAccuracy class_wise_accuracy(std::span<const int> pred, std::span<const int> truth);

}  // namespace metrics
}  // namespace acl
