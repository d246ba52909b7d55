#include "acl/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <thread>

#include "acl/io.hpp"
#include "acl/losses.hpp"
#include "acl/metrics.hpp"

namespace acl {
namespace training {

namespace {

// Substream tags under the experiment seed; fixed, see README.md. Tags 1 and
// 2 belong to the synthetic generator.
constexpr std::uint64_t kTagAugment = 3;
constexpr std::uint64_t kTagShuffle = 4;
constexpr std::uint64_t kTagInit = 6;
constexpr std::uint64_t kTagClassifier = 7;
constexpr std::uint64_t kTagAudioSplit = 8;

// Per-item augmentation channels under split(kTagAugment).split(epoch).split(item).
constexpr std::uint64_t kChanView0 = 0;
constexpr std::uint64_t kChanView1 = 1;
constexpr std::uint64_t kChanShared = 2;

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

Vector flatten_patch(const data::TFPatch& patch) {
  return patch.grid.data;
}

data::TFPatch center_crop(const data::TFPatch& patch, std::size_t target_frames) {
  std::size_t off = (patch.frames() - target_frames) / 2;
  data::TFPatch out;
  out.source_id = patch.source_id;
  out.grid = Matrix(patch.bands(), target_frames);
  for (std::size_t m = 0; m < patch.bands(); ++m) {
    for (std::size_t t = 0; t < target_frames; ++t) {
      out.grid.at(m, t) = patch.grid.at(m, off + t);
    }
  }
  return out;
}

// Two views of item `idx` for one epoch, as encoder input rows.
std::pair<Vector, Vector> make_views(const config::ExperimentConfig& cfg,
                                     const DataBundle& bundle, const Rng& aug_root,
                                     std::size_t epoch_tag, std::size_t idx) {
  Rng item = aug_root.split(epoch_tag).split(idx);
  if (!bundle.patch_mode) {
    Vector x(bundle.train.x.row(idx).begin(), bundle.train.x.row(idx).end());
    Rng r0 = item.split(kChanView0);
    Rng r1 = item.split(kChanView1);
    return {data::augment_vector(x, cfg.dataset.vec_aug, r0),
            data::augment_vector(x, cfg.dataset.vec_aug, r1)};
  }

  const auto& audio = cfg.dataset.audio;
  Rng shared = item.split(kChanShared);
  auto [xi, xj] = data::crop_pair(bundle.train_patches[idx], audio.target_frames, shared);
  auto finish = [&](data::TFPatch view, std::uint64_t chan) {
    Rng rng = item.split(chan);
    std::size_t n = bundle.train_patches.size();
    std::size_t bg = idx;
    if (n > 1) {
      bg = static_cast<std::size_t>(rng.next_below(n - 1));
      if (bg >= idx) ++bg;
    }
    const data::TFPatch& bgp = bundle.train_patches[bg];
    std::size_t span = bgp.frames() - audio.target_frames + 1;
    std::size_t off = static_cast<std::size_t>(rng.next_below(span));
    data::TFPatch bgc;
    bgc.grid = Matrix(bgp.bands(), audio.target_frames);
    for (std::size_t m = 0; m < bgp.bands(); ++m) {
      for (std::size_t t = 0; t < audio.target_frames; ++t) {
        bgc.grid.at(m, t) = bgp.grid.at(m, off + t);
      }
    }
    view = data::mix_back(view, bgc, audio.aug.mixback_lambda_max, rng);
    view = data::random_resized_crop(view, audio.aug, rng);
    view = data::spec_masks(view, audio.aug, rng);
    view = data::gaussian_blur(view, audio.aug, rng);
    return flatten_patch(view);
  };
  return {finish(std::move(xi), kChanView0), finish(std::move(xj), kChanView1)};
}

struct EpochStats {
  double total = 0.0, c = 0.0, a = 0.0;
  std::size_t items = 0;

  void add(double v, double cv, double av, std::size_t n) {
    total += v * static_cast<double>(n);
    c += cv * static_cast<double>(n);
    a += av * static_cast<double>(n);
    items += n;
  }
  double mean_total() const { return items ? total / static_cast<double>(items) : 0.0; }
  double mean_c() const { return items ? c / static_cast<double>(items) : 0.0; }
  double mean_a() const { return items ? a / static_cast<double>(items) : 0.0; }
};

[[noreturn]] void numeric_abort(std::size_t epoch, std::size_t batch,
                                const std::string& detail) {
  raise(Err::NumericFailure, "epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batch) + ": " + detail);
}

bool loss_breaking(Err kind) {
  return kind == Err::ZeroVector || kind == Err::DegenerateBatch ||
         kind == Err::NumericFailure || kind == Err::EmptyInput;
}

// One pass over the data; opt == nullptr evaluates without updates (the
// epoch-0 preview runs that way on scratch parameters).
EpochStats run_ssl_epoch(const config::ExperimentConfig& cfg, const DataBundle& bundle,
                         encoder::EncoderParams& params, OptimizerState* opt,
                         std::size_t epoch_tag) {
  Rng master(cfg.seed);
  Rng aug_root = master.split(kTagAugment);
  std::vector<std::size_t> order =
      shuffled_indices(bundle.train.size(), master.split(kTagShuffle).split(epoch_tag));

  std::vector<encoder::TensorRef> param_refs = params.trainable_tensors();
  EpochStats stats;
  std::size_t batch_size = cfg.optimizer.batch;
  std::size_t n_batches = (order.size() + batch_size - 1) / batch_size;
  for (std::size_t b = 0; b < n_batches; ++b) {
    std::size_t lo = b * batch_size;
    std::size_t hi = std::min(lo + batch_size, order.size());
    std::size_t n_items = hi - lo;
    try {
      Matrix x(2 * n_items, bundle.d_in);
      for (std::size_t k = 0; k < n_items; ++k) {
        auto [v0, v1] = make_views(cfg, bundle, aug_root, epoch_tag, order[lo + k]);
        std::copy(v0.begin(), v0.end(), x.row(2 * k).begin());
        std::copy(v1.begin(), v1.end(), x.row(2 * k + 1).begin());
      }
      encoder::ForwardResult fwd = encoder::forward(params, x, encoder::Mode::Train);
      losses::PairBatch batch = losses::PairBatch::create(fwd.z, fwd.h);
      losses::PairRelation relation = losses::build_pair_relation(n_items);
      losses::AclResult res = losses::acl(batch, relation, cfg.loss);
      if (!std::isfinite(res.value)) numeric_abort(epoch_tag, b, "non-finite loss");
      if (opt) {
        encoder::EncoderGrads grads =
            encoder::backward(params, fwd.trace, res.grad_h, res.grad_z);
        opt->apply(param_refs, grads.trainable_tensors());
      }
      stats.add(res.value, res.contrastive, res.margin, n_items);
    } catch (const AclError& e) {
      if (loss_breaking(e.kind())) numeric_abort(epoch_tag, b, e.what());
      throw;
    }
  }
  return stats;
}

struct SupervisedNet {
  encoder::EncoderParams params;
  encoder::LinearClassifier cls;

  std::vector<encoder::TensorRef> trainable_tensors() {
    std::vector<encoder::TensorRef> refs = params.trainable_tensors();
    refs.push_back({"classifier.W", &cls.w.data, {cls.w.rows, cls.w.cols}});
    refs.push_back({"classifier.b", &cls.b, {cls.b.size()}});
    return refs;
  }
};

Matrix classifier_logits(const encoder::LinearClassifier& cls, const Matrix& h) {
  Matrix logits = num::matmul_a_bt(h, cls.w);
  num::add_row_inplace(logits, cls.b);
  return logits;
}

EpochStats run_supervised_epoch(const config::ExperimentConfig& cfg,
                                const DataBundle& bundle, SupervisedNet& net,
                                OptimizerState* opt, std::size_t epoch_tag) {
  Rng master(cfg.seed);
  std::vector<std::size_t> order =
      shuffled_indices(bundle.train.size(), master.split(kTagShuffle).split(epoch_tag));

  std::vector<encoder::TensorRef> param_refs = net.trainable_tensors();
  EpochStats stats;
  std::size_t batch_size = cfg.optimizer.batch;
  std::size_t n_batches = (order.size() + batch_size - 1) / batch_size;
  for (std::size_t b = 0; b < n_batches; ++b) {
    std::size_t lo = b * batch_size;
    std::size_t hi = std::min(lo + batch_size, order.size());
    std::size_t n_items = hi - lo;
    try {
      Matrix x(n_items, bundle.d_in);
      std::vector<int> labels(n_items);
      for (std::size_t k = 0; k < n_items; ++k) {
        auto row = bundle.train.x.row(order[lo + k]);
        std::copy(row.begin(), row.end(), x.row(k).begin());
        labels[k] = bundle.train.labels[order[lo + k]];
      }
      encoder::ForwardResult fwd = encoder::forward(net.params, x, encoder::Mode::Train);
      Matrix logits = classifier_logits(net.cls, fwd.h);
      losses::SupervisedResult res =
          losses::supervised_combined(logits, fwd.h, labels, cfg.loss);
      if (!std::isfinite(res.value)) numeric_abort(epoch_tag, b, "non-finite loss");
      if (opt) {
        Matrix grad_h = res.grad_h;
        Matrix from_cls = num::matmul(res.grad_logits, net.cls.w);
        for (std::size_t i = 0; i < grad_h.data.size(); ++i) {
          grad_h.data[i] += from_cls.data[i];
        }
        Matrix grad_z(x.rows, net.params.d_z);
        encoder::EncoderGrads grads =
            encoder::backward(net.params, fwd.trace, grad_h, grad_z);
        Matrix d_w = num::matmul_at_b(res.grad_logits, fwd.h);
        Vector d_b = num::col_sums(res.grad_logits);
        std::vector<encoder::TensorRef> grad_refs = grads.trainable_tensors();
        grad_refs.push_back({"classifier.W", &d_w.data, {d_w.rows, d_w.cols}});
        grad_refs.push_back({"classifier.b", &d_b, {d_b.size()}});
        opt->apply(param_refs, grad_refs);
      }
      stats.add(res.value, res.ce, res.margin, n_items);
    } catch (const AclError& e) {
      if (loss_breaking(e.kind())) numeric_abort(epoch_tag, b, e.what());
      throw;
    }
  }
  return stats;
}

Matrix embed(const encoder::EncoderParams& params, const Matrix& x) {
  return encoder::forward_eval(params, x).h;
}

struct Snapshot {
  double uniformity = 0.0;
  double tolerance = 0.0;
  metrics::LabeledEmbeddings train_emb, test_emb;
};

Snapshot take_snapshot(const config::ExperimentConfig& cfg, const DataBundle& bundle,
                       const encoder::EncoderParams& params, std::size_t epoch_tag) {
  try {
    Snapshot snap;
    snap.train_emb = metrics::LabeledEmbeddings::create(embed(params, bundle.train.x),
                                                        bundle.train.labels);
    snap.test_emb = metrics::LabeledEmbeddings::create(embed(params, bundle.test.x),
                                                       bundle.test.labels);
    metrics::UniformityOptions uopt;
    uopt.seed = cfg.seed;
    snap.uniformity = metrics::uniformity(snap.train_emb, cfg.metrics.t, uopt);
    snap.tolerance = metrics::tolerance(snap.train_emb, cfg.metrics.tolerance_norm);
    return snap;
  } catch (const AclError& e) {
    if (loss_breaking(e.kind())) {
      raise(Err::NumericFailure,
            "metrics after epoch " + std::to_string(epoch_tag) + ": " + e.what());
    }
    throw;
  }
}

bool probe_due(const config::ExperimentConfig& cfg, std::size_t epoch) {
  return epoch == 0 || epoch == cfg.epochs || epoch % cfg.metrics.probe_every == 0;
}

double run_probe(const config::ExperimentConfig& cfg, const Snapshot& snap) {
  return metrics::linear_probe(snap.train_emb, snap.test_emb, cfg.metrics.probe_epochs,
                               cfg.metrics.probe_lr, cfg.seed);
}

TrainRecord make_record(std::size_t epoch, const EpochStats& stats, const Snapshot& snap,
                        double probe_acc) {
  TrainRecord r;
  r.epoch = epoch;
  r.loss_total = stats.mean_total();
  r.loss_c = stats.mean_c();
  r.loss_a = stats.mean_a();
  r.uniformity = snap.uniformity;
  r.tolerance = snap.tolerance;
  r.probe_acc = probe_acc;
  r.wall_ms = 0.0;
  return r;
}

}  // namespace

OptimizerState OptimizerState::create(config::OptKind kind, double lr,
                                      const std::vector<encoder::TensorRef>& params) {
  if (!(lr >= 0.0)) raise(Err::ConfigError, "optimizer.lr must be >= 0");
  OptimizerState opt;
  opt.kind = kind;
  opt.lr = lr;
  for (const auto& ref : params) {
    opt.m.emplace_back(ref.data->size(), 0.0);
    opt.v.emplace_back(ref.data->size(), 0.0);
  }
  return opt;
}

void OptimizerState::apply(const std::vector<encoder::TensorRef>& params,
                           const std::vector<encoder::TensorRef>& grads) {
  if (params.size() != m.size() || grads.size() != m.size()) {
    raise(Err::ShapeMismatch, "optimizer tensor list changed size");
  }
  ++step_count;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  for (std::size_t t = 0; t < params.size(); ++t) {
    Vector& p = *params[t].data;
    const Vector& g = *grads[t].data;
    if (p.size() != m[t].size() || g.size() != m[t].size()) {
      raise(Err::ShapeMismatch, "optimizer buffer shape mismatch for " + params[t].name);
    }
    if (kind == config::OptKind::Sgd) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
      continue;
    }
    Vector& mt = m[t];
    Vector& vt = v[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      mt[i] = beta1 * mt[i] + (1.0 - beta1) * g[i];
      vt[i] = beta2 * vt[i] + (1.0 - beta2) * g[i] * g[i];
      double mhat = mt[i] / bc1;
      double vhat = vt[i] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

std::string records_csv_header() {
  return "epoch,loss_total,loss_c,loss_a,uniformity,tolerance,probe_acc,wall_ms";
}

std::string record_csv_row(const TrainRecord& r) {
  std::string out = std::to_string(r.epoch);
  for (double v : {r.loss_total, r.loss_c, r.loss_a, r.uniformity, r.tolerance,
                   r.probe_acc, r.wall_ms}) {
    out += ",";
    out += io::fmt_double(v);
  }
  return out;
}

std::string records_csv(const std::vector<TrainRecord>& records) {
  std::string out = records_csv_header() + "\n";
  for (const TrainRecord& r : records) out += record_csv_row(r) + "\n";
  return out;
}

DataBundle load_data(const config::ExperimentConfig& cfg) {
  DataBundle bundle;
  if (cfg.dataset.kind == config::DatasetKind::Synthetic) {
    bundle.patch_mode = false;
    bundle.train = data::generate_synthetic(cfg.dataset.synth, 0);
    data::SyntheticDatasetSpec test_spec = cfg.dataset.synth;
    test_spec.n_per_class = cfg.dataset.n_test_per_class;
    bundle.test = data::generate_synthetic(test_spec, 1);
    bundle.d_in = cfg.dataset.synth.dim;
    return bundle;
  }

  const auto& audio = cfg.dataset.audio;
  data::AudioCorpus corpus = data::load_audio_corpus(audio.root);
  std::vector<data::TFPatch> patches(corpus.clips.size());
  for (std::size_t i = 0; i < corpus.clips.size(); ++i) {
    try {
      patches[i] = data::log_mel(corpus.clips[i].samples, corpus.clips[i].sample_rate,
                                 audio.n_mels, audio.frame_len, audio.hop);
    } catch (const AclError& e) {
      raise(Err::DataError, "clip " + std::to_string(i) + " (class " +
                                corpus.class_names[corpus.labels[i]] + "): " + e.what());
    }
    if (patches[i].frames() < audio.target_frames) {
      raise(Err::DataError, "clip " + std::to_string(i) + " has " +
                                std::to_string(patches[i].frames()) +
                                " frames, need >= " + std::to_string(audio.target_frames));
    }
    patches[i].source_id = std::to_string(i);
  }

  // Per-class seeded holdout; membership is seed-determined, order is by
  // original clip index.
  std::size_t n_classes = corpus.class_names.size();
  Rng split_rng = Rng(cfg.seed).split(kTagAudioSplit);
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < corpus.labels.size(); ++i) {
      if (corpus.labels[i] == static_cast<int>(c)) members.push_back(i);
    }
    if (members.size() < 2) {
      raise(Err::DataError, "class " + corpus.class_names[c] + " needs >= 2 clips");
    }
    std::vector<std::size_t> order = shuffled_indices(members.size(), split_rng.split(c));
    std::size_t n_test = static_cast<std::size_t>(
        std::llround(audio.test_fraction * static_cast<double>(members.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, members.size() - 1);
    for (std::size_t k = 0; k < members.size(); ++k) {
      (k < n_test ? test_idx : train_idx).push_back(members[order[k]]);
    }
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  bundle.patch_mode = true;
  bundle.d_in = audio.n_mels * audio.target_frames;
  auto fill = [&](const std::vector<std::size_t>& idx, data::Dataset& ds, bool keep) {
    ds.x = Matrix(idx.size(), bundle.d_in);
    ds.labels.resize(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      Vector flat = flatten_patch(center_crop(patches[idx[k]], audio.target_frames));
      std::copy(flat.begin(), flat.end(), ds.x.row(k).begin());
      ds.labels[k] = corpus.labels[idx[k]];
      if (keep) bundle.train_patches.push_back(patches[idx[k]]);
    }
  };
  fill(train_idx, bundle.train, true);
  fill(test_idx, bundle.test, false);
  return bundle;
}

TrainResult train_ssl(const config::ExperimentConfig& cfg) {
  cfg.validate();
  auto t0 = std::chrono::steady_clock::now();
  DataBundle bundle = load_data(cfg);

  Rng master(cfg.seed);
  encoder::EncoderParams params =
      encoder::EncoderParams::init(bundle.d_in, cfg.encoder.hidden, cfg.encoder.d_h,
                                   cfg.encoder.g_hidden, cfg.encoder.d_z,
                                   master.split(kTagInit));
  params.bn_momentum = cfg.encoder.bn_momentum;
  OptimizerState opt =
      OptimizerState::create(cfg.optimizer.kind, cfg.optimizer.lr, params.trainable_tensors());

  TrainResult result;
  {
    encoder::EncoderParams scratch = params;
    EpochStats stats0 = run_ssl_epoch(cfg, bundle, scratch, nullptr, 0);
    Snapshot snap = take_snapshot(cfg, bundle, params, 0);
    result.records.push_back(make_record(0, stats0, snap, run_probe(cfg, snap)));
  }
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochStats stats = run_ssl_epoch(cfg, bundle, params, &opt, epoch);
    Snapshot snap = take_snapshot(cfg, bundle, params, epoch);
    double acc = probe_due(cfg, epoch) ? run_probe(cfg, snap)
                                       : std::numeric_limits<double>::quiet_NaN();
    result.records.push_back(make_record(epoch, stats, snap, acc));
  }
  result.params = std::move(params);
  auto t1 = std::chrono::steady_clock::now();
  result.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return result;
}

TrainResult train_supervised(const config::ExperimentConfig& cfg) {
  cfg.validate();
  auto t0 = std::chrono::steady_clock::now();
  DataBundle bundle = load_data(cfg);

  int max_label = 0;
  for (int l : bundle.train.labels) max_label = std::max(max_label, l);
  std::size_t n_classes = static_cast<std::size_t>(max_label) + 1;

  Rng master(cfg.seed);
  SupervisedNet net;
  net.params = encoder::EncoderParams::init(bundle.d_in, cfg.encoder.hidden,
                                            cfg.encoder.d_h, cfg.encoder.g_hidden,
                                            cfg.encoder.d_z, master.split(kTagInit));
  net.params.bn_momentum = cfg.encoder.bn_momentum;
  net.cls.w = Matrix(n_classes, cfg.encoder.d_h);
  net.cls.b = Vector(n_classes, 0.0);
  {
    Rng crng = master.split(kTagClassifier);
    double limit = std::sqrt(6.0 / static_cast<double>(cfg.encoder.d_h + n_classes));
    for (double& w : net.cls.w.data) w = crng.next_range(-limit, limit);
  }
  OptimizerState opt =
      OptimizerState::create(cfg.optimizer.kind, cfg.optimizer.lr, net.trainable_tensors());

  auto classifier_accuracy = [&](const SupervisedNet& n) {
    Matrix h = embed(n.params, bundle.test.x);
    Matrix logits = classifier_logits(n.cls, h);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < logits.cols; ++c) {
        if (logits.at(i, c) > logits.at(i, best)) best = c;
      }
      if (static_cast<int>(best) == bundle.test.labels[i]) ++hits;
    }
    return logits.rows ? static_cast<double>(hits) / static_cast<double>(logits.rows) : 0.0;
  };

  TrainResult result;
  {
    SupervisedNet scratch = net;
    EpochStats stats0 = run_supervised_epoch(cfg, bundle, scratch, nullptr, 0);
    Snapshot snap = take_snapshot(cfg, bundle, net.params, 0);
    result.records.push_back(make_record(0, stats0, snap, classifier_accuracy(net)));
  }
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochStats stats = run_supervised_epoch(cfg, bundle, net, &opt, epoch);
    Snapshot snap = take_snapshot(cfg, bundle, net.params, epoch);
    double acc = probe_due(cfg, epoch) ? classifier_accuracy(net)
                                       : std::numeric_limits<double>::quiet_NaN();
    result.records.push_back(make_record(epoch, stats, snap, acc));
  }
  result.params = std::move(net.params);
  result.classifier = std::move(net.cls);
  auto t1 = std::chrono::steady_clock::now();
  result.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return result;
}

std::size_t worker_cap() {
  const char* env = std::getenv("ACL_LAB_THREADS");
  if (env == nullptr) {
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
  }
  std::string s(env);
  long v = 0;
  try {
    v = io::parse_long(s, "ACL_LAB_THREADS");
  } catch (const AclError&) {
    raise(Err::ConfigError, "ACL_LAB_THREADS must be a positive integer, got '" + s + "'");
  }
  if (v < 1) {
    raise(Err::ConfigError, "ACL_LAB_THREADS must be a positive integer, got '" + s + "'");
  }
  return static_cast<std::size_t>(v);
}

std::vector<SweepRow> sweep(const config::ExperimentConfig& cfg, SweepAxis axis,
                            const std::vector<double>& values) {
  if (values.empty()) raise(Err::ConfigError, "sweep needs at least one value");
  struct Point {
    double value;
    bool baseline;
  };
  std::vector<Point> points;
  for (double v : values) {
    points.push_back({v, false});
    points.push_back({v, true});
  }

  // Validate every point before spawning workers so config errors surface
  // with a clean single-threaded diagnostic.
  auto point_config = [&](const Point& p) {
    config::ExperimentConfig run = cfg;
    run.mode = config::Mode::Ssl;
    if (axis == SweepAxis::Tau) {
      run.loss.tau = p.value;
    } else {
      if (!p.baseline) run.loss.alpha = p.value;
    }
    if (p.baseline) run.loss.alpha = 1.0;
    run.validate();
    return run;
  };
  for (const Point& p : points) point_config(p);

  std::vector<SweepRow> rows(points.size());
  std::vector<std::exception_ptr> errors(points.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= points.size()) return;
      try {
        TrainResult res = train_ssl(point_config(points[i]));
        const TrainRecord& last = res.records.back();
        rows[i] = {points[i].value, points[i].baseline ? "baseline" : "acl",
                   last.uniformity, last.tolerance, last.probe_acc};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  std::size_t n_workers = std::min(worker_cap(), points.size());
  if (n_workers <= 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "value,variant,uniformity,tolerance,probe_acc\n";
  for (const SweepRow& r : rows) {
    out += io::fmt_double(r.value) + "," + r.variant + "," + io::fmt_double(r.uniformity) +
           "," + io::fmt_double(r.tolerance) + "," + io::fmt_double(r.probe_acc) + "\n";
  }
  return out;
}

}  // namespace training
}  // namespace acl
