#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "acl/encoder.hpp"
#include "acl/rng.hpp"
#include "oracles.hpp"

using namespace acl;
namespace enc = acl::encoder;
namespace fs = std::filesystem;

namespace {

// Smooth scalar functional of (h, z): the analytic gradient injected at each
// depth is the coefficient times the cosine of the output entry.
struct SmoothLoss {
  Matrix ch, cz;

  double value(const Matrix& h, const Matrix& z) const {
    double l = 0.0;
    for (std::size_t i = 0; i < h.data.size(); ++i) l += ch.data[i] * std::sin(h.data[i]);
    for (std::size_t i = 0; i < z.data.size(); ++i) l += cz.data[i] * std::sin(z.data[i]);
    return l;
  }
  Matrix grad_h(const Matrix& h) const {
    Matrix g(h.rows, h.cols);
    for (std::size_t i = 0; i < h.data.size(); ++i)
      g.data[i] = ch.data[i] * std::cos(h.data[i]);
    return g;
  }
  Matrix grad_z(const Matrix& z) const {
    Matrix g(z.rows, z.cols);
    for (std::size_t i = 0; i < z.data.size(); ++i)
      g.data[i] = cz.data[i] * std::cos(z.data[i]);
    return g;
  }
};

double loss_at(enc::EncoderParams& p, const Matrix& x, const SmoothLoss& sl) {
  auto res = enc::forward(p, x, enc::Mode::Train);
  return sl.value(res.h, res.z);
}

// ReLU kinks and near-constant batch-norm columns break central
// differences; candidate cases must keep clear of both. Freshly initialized
// nets hit exact-zero pre-activations whenever a whole previous row dies, so
// this filter is load-bearing, not paranoia.
bool kink_safe(const enc::EncoderParams& p, const enc::ForwardTrace& tr) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    if (p.layers[l].act != enc::Activation::Relu) continue;
    for (double v : tr.layer_pre[l].data) {
      if (std::abs(v) < 1e-4) return false;
    }
  }
  for (double v : tr.bn_out.data) {
    if (std::abs(v) < 1e-4) return false;
  }
  for (double v : tr.bn_var) {
    if (v < 5e-3) return false;
  }
  return true;
}

// Central differences over every trainable entry against the analytic
// backward pass.
void check_full_gradient(enc::EncoderParams& params, const Matrix& x,
                         const SmoothLoss& sl) {
  auto fwd = enc::forward(params, x, enc::Mode::Train);
  auto grads = enc::backward(params, fwd.trace, sl.grad_h(fwd.h), sl.grad_z(fwd.z));

  auto p_refs = params.trainable_tensors();
  auto g_refs = grads.trainable_tensors();
  REQUIRE(p_refs.size() == g_refs.size());
  const double eps = 1e-6;
  for (std::size_t t = 0; t < p_refs.size(); ++t) {
    auto& data = *p_refs[t].data;
    const auto& g = *g_refs[t].data;
    REQUIRE(data.size() == g.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      double orig = data[i];
      data[i] = orig + eps;
      double lp = loss_at(params, x, sl);
      data[i] = orig - eps;
      double lm = loss_at(params, x, sl);
      data[i] = orig;
      double numeric = (lp - lm) / (2.0 * eps);
      double err = std::abs(g[i] - numeric);
      double scale = std::max(std::abs(g[i]), std::abs(numeric));
      INFO("tensor ", p_refs[t].name, " entry ", i, " analytic ", g[i], " numeric ",
           numeric);
      CHECK(err <= std::max(1e-7, 1e-5 * scale));
    }
  }
}

bool params_equal(enc::EncoderParams& a, enc::EncoderParams& b) {
  auto ta = a.all_tensors();
  auto tb = b.all_tensors();
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].name != tb[i].name) return false;
    if (ta[i].dims != tb[i].dims) return false;
    if (*ta[i].data != *tb[i].data) return false;
  }
  return a.d_in == b.d_in && a.d_h == b.d_h && a.d_z == b.d_z &&
         a.bn_momentum == b.bn_momentum;
}

}  // namespace

TEST_CASE("init produces the documented shapes and bounds") {
  auto p = enc::EncoderParams::init(5, {8, 6}, 4, 7, 3, Rng(11));
  REQUIRE(p.layers.size() == 3);
  CHECK(p.layers[0].w.rows == 5);
  CHECK(p.layers[0].w.cols == 8);
  CHECK(p.layers[0].act == enc::Activation::Relu);
  CHECK(p.layers[1].w.rows == 8);
  CHECK(p.layers[1].w.cols == 6);
  CHECK(p.layers[2].w.rows == 6);
  CHECK(p.layers[2].w.cols == 4);
  CHECK(p.layers[2].act == enc::Activation::Identity);
  CHECK(p.head.w1.rows == 4);
  CHECK(p.head.w1.cols == 7);
  CHECK(p.head.w2.rows == 7);
  CHECK(p.head.w2.cols == 3);
  CHECK(p.g_hidden() == 7);

  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    double bound =
        std::sqrt(6.0 / static_cast<double>(p.layers[l].w.rows + p.layers[l].w.cols));
    for (double w : p.layers[l].w.data) CHECK(std::abs(w) <= bound);
    for (double b : p.layers[l].b) CHECK(b == 0.0);
  }
  for (double g : p.head.bn_gamma) CHECK(g == 1.0);
  for (double b : p.head.bn_beta) CHECK(b == 0.0);
  for (double m : p.head.bn_run_mean) CHECK(m == 0.0);
  for (double v : p.head.bn_run_var) CHECK(v == 1.0);

  auto q = enc::EncoderParams::init(5, {8, 6}, 4, 7, 3, Rng(11));
  CHECK(params_equal(p, q));
  auto r = enc::EncoderParams::init(5, {8, 6}, 4, 7, 3, Rng(12));
  CHECK_FALSE(params_equal(p, r));

  CHECK_THROWS_AS(enc::EncoderParams::init(0, {4}, 4, 4, 2, Rng(1)), AclError);
  CHECK_THROWS_AS(enc::EncoderParams::init(3, {0}, 4, 4, 2, Rng(1)), AclError);
}

TEST_CASE("tensor registry names and order") {
  auto p = enc::EncoderParams::init(3, {4}, 3, 4, 2, Rng(2));
  auto trainable = p.trainable_tensors();
  std::vector<std::string> names;
  for (const auto& t : trainable) names.push_back(t.name);
  std::vector<std::string> want{"f.0.W", "f.0.b", "f.1.W", "f.1.b", "g.W1",
                                "g.b1", "g.bn_gamma", "g.bn_beta", "g.W2", "g.b2"};
  CHECK(names == want);

  auto all = p.all_tensors();
  CHECK(all.size() == trainable.size() + 2);
  CHECK(all[8].name == "g.bn_run_mean");
  CHECK(all[9].name == "g.bn_run_var");
  CHECK(all[10].name == "g.W2");
  CHECK(all[11].name == "g.b2");
}

TEST_CASE("train-mode batch norm standardizes columns and tracks running stats") {
  auto p = enc::EncoderParams::init(4, {6}, 5, 6, 3, Rng(3));
  p.bn_momentum = 0.9;
  Rng rng(4);
  Matrix x = oracles::random_matrix(rng, 16, 4, -1.5, 1.5);

  auto res = enc::forward(p, x, enc::Mode::Train);
  const Matrix& xhat = res.trace.bn_xhat;
  for (std::size_t j = 0; j < xhat.cols; ++j) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < xhat.rows; ++i) m += xhat.at(i, j);
    m /= static_cast<double>(xhat.rows);
    for (std::size_t i = 0; i < xhat.rows; ++i) {
      double d = xhat.at(i, j) - m;
      v += d * d;
    }
    v /= static_cast<double>(xhat.rows);
    CHECK(std::abs(m) < 1e-9);
    CHECK(std::abs(v - 1.0) < 1e-6);
  }

  // Running stats blend the identity-initialized values with batch stats.
  for (std::size_t j = 0; j < res.trace.bn_mean.size(); ++j) {
    CHECK(std::abs(p.head.bn_run_mean[j] - 0.1 * res.trace.bn_mean[j]) < 1e-12);
    CHECK(std::abs(p.head.bn_run_var[j] - (0.9 + 0.1 * res.trace.bn_var[j])) < 1e-12);
  }
}

TEST_CASE("eval mode is frozen and per-row deterministic") {
  auto p = enc::EncoderParams::init(4, {6}, 5, 6, 3, Rng(5));
  Rng rng(6);
  // Move running stats off their init values first.
  Matrix warm = oracles::random_matrix(rng, 8, 4, -1.0, 1.0);
  enc::forward(p, warm, enc::Mode::Train);
  auto run_mean = p.head.bn_run_mean;
  auto run_var = p.head.bn_run_var;

  Matrix x = oracles::random_matrix(rng, 5, 4, -1.0, 1.0);
  auto full = enc::forward_eval(p, x);
  CHECK(p.head.bn_run_mean == run_mean);
  CHECK(p.head.bn_run_var == run_var);

  auto again = enc::forward_eval(p, x);
  CHECK(full.h.data == again.h.data);
  CHECK(full.z.data == again.z.data);

  for (std::size_t i = 0; i < x.rows; ++i) {
    Matrix row(1, x.cols);
    for (std::size_t j = 0; j < x.cols; ++j) row.at(0, j) = x.at(i, j);
    auto one = enc::forward_eval(p, row);
    for (std::size_t j = 0; j < full.h.cols; ++j) CHECK(one.h.at(0, j) == full.h.at(i, j));
    for (std::size_t j = 0; j < full.z.cols; ++j) CHECK(one.z.at(0, j) == full.z.at(i, j));
  }
}

TEST_CASE("backward matches finite differences through the full composition") {
  Rng rng(7);
  int done = 0, attempts = 0;
  while (done < 20 && attempts < 400) {
    ++attempts;
    std::size_t d_in = 2 + rng.next_below(3);
    std::size_t d_h = 2 + rng.next_below(3);
    std::size_t g_hidden = 2 + rng.next_below(3);
    std::size_t d_z = 2 + rng.next_below(2);
    std::vector<std::size_t> hidden{2 + rng.next_below(3)};
    if (rng.next_below(2) == 1) hidden.push_back(2 + rng.next_below(3));
    std::size_t batch = 3 + rng.next_below(4);

    auto p = enc::EncoderParams::init(d_in, hidden, d_h, g_hidden, d_z,
                                      Rng(rng.next_u64()));
    Matrix x = oracles::random_matrix(rng, batch, d_in, -1.2, 1.2);
    auto probe = enc::forward(p, x, enc::Mode::Train);
    if (!kink_safe(p, probe.trace)) continue;

    SmoothLoss sl{oracles::random_matrix(rng, batch, d_h, -1.0, 1.0),
                  oracles::random_matrix(rng, batch, d_z, -1.0, 1.0)};
    INFO("attempt ", attempts);
    check_full_gradient(p, x, sl);
    ++done;
  }
  CHECK(done == 20);
}

TEST_CASE("gradient injection points are independent") {
  auto p = enc::EncoderParams::init(3, {4}, 3, 4, 2, Rng(8));
  Rng rng(9);
  Matrix x = oracles::random_matrix(rng, 5, 3, -1.0, 1.0);
  auto fwd = enc::forward(p, x, enc::Mode::Train);

  // With grad_z = 0 nothing reaches the projection head parameters.
  Matrix zero_z(5, 2);
  Matrix gh = oracles::random_matrix(rng, 5, 3, -1.0, 1.0);
  auto grads = enc::backward(p, fwd.trace, gh, zero_z);
  for (double v : grads.head.w1.data) CHECK(v == 0.0);
  for (double v : grads.head.b1) CHECK(v == 0.0);
  for (double v : grads.head.bn_gamma) CHECK(v == 0.0);
  for (double v : grads.head.bn_beta) CHECK(v == 0.0);
  for (double v : grads.head.w2.data) CHECK(v == 0.0);
  for (double v : grads.head.b2) CHECK(v == 0.0);

  // Injections add: backward(gh, gz) = backward(gh, 0) + backward(0, gz).
  Matrix gz = oracles::random_matrix(rng, 5, 2, -1.0, 1.0);
  Matrix zero_h(5, 3);
  auto both = enc::backward(p, fwd.trace, gh, gz);
  auto only_z = enc::backward(p, fwd.trace, zero_h, gz);
  auto ga = grads.trainable_tensors();
  auto gb = only_z.trainable_tensors();
  auto gc = both.trainable_tensors();
  for (std::size_t t = 0; t < gc.size(); ++t) {
    for (std::size_t i = 0; i < gc[t].data->size(); ++i) {
      CHECK(std::abs((*gc[t].data)[i] - ((*ga[t].data)[i] + (*gb[t].data)[i])) < 1e-12);
    }
  }
}

TEST_CASE("backward rejects stale or mismatched traces") {
  auto p = enc::EncoderParams::init(3, {4}, 3, 4, 2, Rng(10));
  Rng rng(11);
  Matrix x = oracles::random_matrix(rng, 4, 3, -1.0, 1.0);

  auto eval_fwd = enc::forward_eval(p, x);
  Matrix gh(4, 3), gz(4, 2);
  CHECK_THROWS_AS(enc::backward(p, eval_fwd.trace, gh, gz), AclError);

  auto fwd = enc::forward(p, x, enc::Mode::Train);
  Matrix bad_h(3, 3);
  CHECK_THROWS_AS(enc::backward(p, fwd.trace, bad_h, gz), AclError);
  Matrix bad_z(4, 3);
  CHECK_THROWS_AS(enc::backward(p, fwd.trace, gh, bad_z), AclError);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  auto dir = fs::temp_directory_path();
  auto path = dir / "acl_test_encoder_ckpt.bin";

  auto p = enc::EncoderParams::init(4, {5}, 3, 6, 2, Rng(12));
  p.bn_momentum = 0.75;
  Rng rng(13);
  // Perturb running stats so the round-trip covers non-default values.
  Matrix warm = oracles::random_matrix(rng, 8, 4, -1.0, 1.0);
  enc::forward(p, warm, enc::Mode::Train);

  enc::save_checkpoint(p, path);
  auto loaded = enc::load_checkpoint(path);
  CHECK(params_equal(p, loaded.params));
  CHECK_FALSE(loaded.classifier.has_value());

  enc::LinearClassifier cls;
  cls.w = oracles::random_matrix(rng, 3, 3, -1.0, 1.0);
  cls.b = Vector{0.5, -0.25, 0.0};
  enc::save_checkpoint(p, path, &cls);
  auto with_cls = enc::load_checkpoint(path);
  REQUIRE(with_cls.classifier.has_value());
  CHECK(with_cls.classifier->w.data == cls.w.data);
  CHECK(with_cls.classifier->b == cls.b);
  CHECK(params_equal(p, with_cls.params));

  fs::remove(path);
}

TEST_CASE("checkpoint loader rejects corrupt files") {
  auto dir = fs::temp_directory_path();
  auto p = enc::EncoderParams::init(3, {4}, 3, 4, 2, Rng(14));

  auto garbage = dir / "acl_test_bad_magic.bin";
  {
    std::ofstream f(garbage, std::ios::binary);
    f << "NOPE with arbitrary trailing bytes";
  }
  CHECK_THROWS_WITH_AS(enc::load_checkpoint(garbage),
                       doctest::Contains("not a checkpoint"), AclError);
  fs::remove(garbage);

  auto versioned = dir / "acl_test_bad_version.bin";
  enc::save_checkpoint(p, versioned);
  {
    std::fstream f(versioned, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(4);
    char two = 2;
    f.write(&two, 1);
  }
  CHECK_THROWS_WITH_AS(enc::load_checkpoint(versioned), doctest::Contains("version"),
                       AclError);
  fs::remove(versioned);

  auto truncated = dir / "acl_test_truncated.bin";
  enc::save_checkpoint(p, truncated);
  fs::resize_file(truncated, fs::file_size(truncated) - 11);
  CHECK_THROWS_AS(enc::load_checkpoint(truncated), AclError);
  fs::remove(truncated);
}
