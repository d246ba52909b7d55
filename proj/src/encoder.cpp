#include "acl/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

namespace acl {
namespace encoder {

namespace {

constexpr double kBnEps = 1e-8;
constexpr char kMagic[4] = {'A', 'C', 'L', '1'};
constexpr std::uint32_t kFormatVersion = 1;

Matrix glorot(std::size_t fan_in, std::size_t fan_out, Rng rng) {
  Matrix w(fan_in, fan_out);
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& x : w.data) x = rng.next_range(-bound, bound);
  return w;
}

void apply_activation(Matrix& m, Activation act) {
  if (act == Activation::Relu) {
    for (double& x : m.data) x = std::max(x, 0.0);
  }
}

}  // namespace

EncoderParams EncoderParams::init(std::size_t d_in, const std::vector<std::size_t>& hidden,
                                  std::size_t d_h, std::size_t g_hidden, std::size_t d_z,
                                  Rng rng) {
  if (d_in == 0 || d_h == 0 || g_hidden == 0 || d_z == 0) {
    raise(Err::ConfigError, "encoder dims must be positive");
  }
  EncoderParams p;
  p.d_in = d_in;
  p.d_h = d_h;
  p.d_z = d_z;

  std::uint64_t tensor_idx = 0;
  std::size_t in = d_in;
  for (std::size_t width : hidden) {
    if (width == 0) raise(Err::ConfigError, "encoder hidden width must be positive");
    p.layers.push_back({glorot(in, width, rng.split(tensor_idx++)),
                        Vector(width, 0.0), Activation::Relu});
    in = width;
  }
  p.layers.push_back({glorot(in, d_h, rng.split(tensor_idx++)),
                      Vector(d_h, 0.0), Activation::Identity});

  p.head.w1 = glorot(d_h, g_hidden, rng.split(tensor_idx++));
  p.head.b1 = Vector(g_hidden, 0.0);
  p.head.bn_gamma = Vector(g_hidden, 1.0);
  p.head.bn_beta = Vector(g_hidden, 0.0);
  p.head.bn_run_mean = Vector(g_hidden, 0.0);
  p.head.bn_run_var = Vector(g_hidden, 1.0);
  p.head.w2 = glorot(g_hidden, d_z, rng.split(tensor_idx++));
  p.head.b2 = Vector(d_z, 0.0);
  return p;
}

namespace {

std::vector<TensorRef> collect(std::vector<DenseLayer>& layers, ProjectionHead& head,
                               bool with_running) {
  std::vector<TensorRef> out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::string base = "f." + std::to_string(l) + ".";
    out.push_back({base + "W", &layers[l].w.data, {layers[l].w.rows, layers[l].w.cols}});
    out.push_back({base + "b", &layers[l].b, {layers[l].b.size()}});
  }
  out.push_back({"g.W1", &head.w1.data, {head.w1.rows, head.w1.cols}});
  out.push_back({"g.b1", &head.b1, {head.b1.size()}});
  out.push_back({"g.bn_gamma", &head.bn_gamma, {head.bn_gamma.size()}});
  out.push_back({"g.bn_beta", &head.bn_beta, {head.bn_beta.size()}});
  if (with_running) {
    out.push_back({"g.bn_run_mean", &head.bn_run_mean, {head.bn_run_mean.size()}});
    out.push_back({"g.bn_run_var", &head.bn_run_var, {head.bn_run_var.size()}});
  }
  out.push_back({"g.W2", &head.w2.data, {head.w2.rows, head.w2.cols}});
  out.push_back({"g.b2", &head.b2, {head.b2.size()}});
  return out;
}

}  // namespace

std::vector<TensorRef> EncoderParams::trainable_tensors() {
  return collect(layers, head, false);
}

std::vector<TensorRef> EncoderParams::all_tensors() { return collect(layers, head, true); }

EncoderGrads EncoderGrads::zeros_like(const EncoderParams& params) {
  EncoderGrads g;
  for (const DenseLayer& l : params.layers) {
    g.layers.push_back({Matrix(l.w.rows, l.w.cols), Vector(l.b.size(), 0.0), l.act});
  }
  g.head.w1 = Matrix(params.head.w1.rows, params.head.w1.cols);
  g.head.b1 = Vector(params.head.b1.size(), 0.0);
  g.head.bn_gamma = Vector(params.head.bn_gamma.size(), 0.0);
  g.head.bn_beta = Vector(params.head.bn_beta.size(), 0.0);
  g.head.w2 = Matrix(params.head.w2.rows, params.head.w2.cols);
  g.head.b2 = Vector(params.head.b2.size(), 0.0);
  return g;
}

std::vector<TensorRef> EncoderGrads::trainable_tensors() {
  return collect(layers, head, false);
}

void EncoderGrads::accumulate(const EncoderGrads& other) {
  auto mine = trainable_tensors();
  auto theirs = const_cast<EncoderGrads&>(other).trainable_tensors();
  for (std::size_t t = 0; t < mine.size(); ++t) {
    auto& a = *mine[t].data;
    const auto& b = *theirs[t].data;
    if (a.size() != b.size()) raise(Err::DimMismatch, "gradient accumulate shape mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  }
}

ForwardResult forward(EncoderParams& params, const Matrix& x, Mode mode) {
  if (x.cols != params.d_in) {
    raise(Err::DimMismatch, "forward: input has " + std::to_string(x.cols) +
                                " cols, encoder expects " + std::to_string(params.d_in));
  }
  ForwardResult res;
  ForwardTrace& tr = res.trace;
  tr.mode = mode;
  tr.input = x;

  Matrix cur = x;
  for (const DenseLayer& layer : params.layers) {
    Matrix pre = num::matmul(cur, layer.w);
    num::add_row_inplace(pre, layer.b);
    tr.layer_pre.push_back(pre);
    apply_activation(pre, layer.act);
    tr.layer_act.push_back(pre);
    cur = std::move(pre);
  }
  res.h = cur;

  // Projection head: linear -> BN -> ReLU -> linear.
  Matrix p1 = num::matmul(res.h, params.head.w1);
  num::add_row_inplace(p1, params.head.b1);
  tr.head_pre1 = p1;

  const std::size_t b = p1.rows;
  const std::size_t g = p1.cols;
  Vector mean(g, 0.0), var(g, 0.0);
  if (mode == Mode::Train) {
    for (std::size_t j = 0; j < g; ++j) {
      double m = 0.0;
      for (std::size_t i = 0; i < b; ++i) m += p1.at(i, j);
      m /= static_cast<double>(b);
      double v = 0.0;
      for (std::size_t i = 0; i < b; ++i) {
        double dxc = p1.at(i, j) - m;
        v += dxc * dxc;
      }
      v /= static_cast<double>(b);
      mean[j] = m;
      var[j] = v;
      params.head.bn_run_mean[j] =
          params.bn_momentum * params.head.bn_run_mean[j] + (1.0 - params.bn_momentum) * m;
      params.head.bn_run_var[j] =
          params.bn_momentum * params.head.bn_run_var[j] + (1.0 - params.bn_momentum) * v;
    }
  } else {
    mean = params.head.bn_run_mean;
    var = params.head.bn_run_var;
  }
  tr.bn_mean = mean;
  tr.bn_var = var;

  Matrix xhat(b, g), bn_out(b, g);
  for (std::size_t j = 0; j < g; ++j) {
    double ivar = 1.0 / std::sqrt(var[j] + kBnEps);
    for (std::size_t i = 0; i < b; ++i) {
      double xh = (p1.at(i, j) - mean[j]) * ivar;
      xhat.at(i, j) = xh;
      bn_out.at(i, j) = params.head.bn_gamma[j] * xh + params.head.bn_beta[j];
    }
  }
  tr.bn_xhat = xhat;
  tr.bn_out = bn_out;

  Matrix relu_out = bn_out;
  apply_activation(relu_out, Activation::Relu);
  tr.relu_out = relu_out;

  res.z = num::matmul(relu_out, params.head.w2);
  num::add_row_inplace(res.z, params.head.b2);
  return res;
}

ForwardResult forward_eval(const EncoderParams& params, const Matrix& x) {
  EncoderParams& mut = const_cast<EncoderParams&>(params);
  return forward(mut, x, Mode::Eval);   // eval mode never mutates
}

EncoderGrads backward(const EncoderParams& params, const ForwardTrace& trace,
                      const Matrix& grad_h, const Matrix& grad_z) {
  if (trace.mode != Mode::Train) {
    raise(Err::StaleTrace, "backward: trace must come from a train-mode forward");
  }
  if (trace.layer_act.size() != params.layers.size()) {
    raise(Err::StaleTrace, "backward: trace does not match encoder depth");
  }
  const Matrix& h = trace.layer_act.back();
  if (!grad_h.same_shape(h)) raise(Err::StaleTrace, "backward: grad_h shape mismatch");
  if (grad_z.rows != h.rows || grad_z.cols != params.d_z) {
    raise(Err::StaleTrace, "backward: grad_z shape mismatch");
  }

  EncoderGrads grads = EncoderGrads::zeros_like(params);
  const std::size_t b = h.rows;
  const std::size_t g = params.g_hidden();

  // Head backward: z = relu_out * W2 + b2.
  grads.head.w2 = num::matmul_at_b(trace.relu_out, grad_z);
  grads.head.b2 = num::col_sums(grad_z);
  Matrix d_relu = num::matmul_a_bt(grad_z, params.head.w2);
  for (std::size_t i = 0; i < d_relu.data.size(); ++i) {
    if (trace.bn_out.data[i] <= 0.0) d_relu.data[i] = 0.0;
  }

  // BN backward, batch statistics path:
  // dx = ivar/B * (B*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat)).
  Matrix d_p1(b, g);
  for (std::size_t j = 0; j < g; ++j) {
    double ivar = 1.0 / std::sqrt(trace.bn_var[j] + kBnEps);
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      double dy = d_relu.at(i, j);
      sum_dy += dy;
      sum_dy_xhat += dy * trace.bn_xhat.at(i, j);
    }
    grads.head.bn_beta[j] = sum_dy;
    grads.head.bn_gamma[j] = sum_dy_xhat;
    double gamma = params.head.bn_gamma[j];
    double bf = static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i) {
      double dxhat = d_relu.at(i, j) * gamma;
      d_p1.at(i, j) = ivar / bf *
                      (bf * dxhat - gamma * sum_dy -
                       trace.bn_xhat.at(i, j) * gamma * sum_dy_xhat);
    }
  }

  grads.head.w1 = num::matmul_at_b(h, d_p1);
  grads.head.b1 = num::col_sums(d_p1);

  // Total gradient at f's output: injected grad_h plus the head path.
  Matrix d_act = num::matmul_a_bt(d_p1, params.head.w1);
  for (std::size_t i = 0; i < d_act.data.size(); ++i) d_act.data[i] += grad_h.data[i];

  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const DenseLayer& layer = params.layers[l];
    Matrix d_pre = std::move(d_act);
    if (layer.act == Activation::Relu) {
      const Matrix& pre = trace.layer_pre[l];
      for (std::size_t i = 0; i < d_pre.data.size(); ++i) {
        if (pre.data[i] <= 0.0) d_pre.data[i] = 0.0;
      }
    }
    const Matrix& in = (l == 0) ? trace.input : trace.layer_act[l - 1];
    grads.layers[l].w = num::matmul_at_b(in, d_pre);
    grads.layers[l].b = num::col_sums(d_pre);
    if (l > 0) d_act = num::matmul_a_bt(d_pre, layer.w);
  }
  return grads;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double x) {
  std::uint64_t v = std::bit_cast<std::uint64_t>(x);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  Reader(const std::string& buf) : buf_(buf) {}

  bool at_end() const { return pos_ == buf_.size(); }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return std::bit_cast<double>(v);
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) {
    if (pos_ + n > buf_.size()) {
      raise(Err::TruncatedFile, "checkpoint ends mid-record");
    }
  }
  const std::string& buf_;
  std::size_t pos_ = 0;
};

void append_tensor(std::string& out, const std::string& name,
                   const std::vector<std::size_t>& dims, const std::vector<double>& data) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (std::size_t d : dims) put_u32(out, static_cast<std::uint32_t>(d));
  for (double x : data) put_f64(out, x);
}

struct RawTensor {
  std::vector<std::size_t> dims;
  std::vector<double> data;
};

}  // namespace

void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path,
                     const LinearClassifier* classifier) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kFormatVersion);

  EncoderParams& mut = const_cast<EncoderParams&>(params);
  std::vector<double> meta = {static_cast<double>(params.d_in),
                              static_cast<double>(params.d_h),
                              static_cast<double>(params.d_z),
                              static_cast<double>(params.g_hidden()),
                              params.bn_momentum,
                              static_cast<double>(params.layers.size())};
  for (const DenseLayer& l : params.layers) {
    meta.push_back(l.act == Activation::Relu ? 1.0 : 0.0);
  }
  append_tensor(out, "meta", {meta.size()}, meta);
  for (const TensorRef& t : mut.all_tensors()) {
    append_tensor(out, t.name, t.dims, *t.data);
  }
  if (classifier != nullptr) {
    append_tensor(out, "classifier.W", {classifier->w.rows, classifier->w.cols},
                  classifier->w.data);
    append_tensor(out, "classifier.b", {classifier->b.size()}, classifier->b);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) raise(Err::DataError, "cannot write checkpoint: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) raise(Err::DataError, "checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) raise(Err::DataError, "cannot open checkpoint: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0) {
    raise(Err::BadMagic, "not a checkpoint file: " + path.string());
  }
  Reader r(buf);
  r.bytes(4);
  std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    raise(Err::VersionMismatch, "checkpoint format version " + std::to_string(version) +
                                    ", expected " + std::to_string(kFormatVersion));
  }

  std::map<std::string, RawTensor> tensors;
  while (!r.at_end()) {
    std::uint32_t name_len = r.u32();
    std::string name = r.bytes(name_len);
    std::uint32_t rank = r.u32();
    RawTensor t;
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      std::size_t d = r.u32();
      t.dims.push_back(d);
      count *= d;
    }
    t.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) t.data[i] = r.f64();
    tensors[name] = std::move(t);
  }

  auto take = [&](const std::string& name) -> RawTensor {
    auto it = tensors.find(name);
    if (it == tensors.end()) {
      raise(Err::DataError, "checkpoint missing tensor: " + name);
    }
    RawTensor t = std::move(it->second);
    tensors.erase(it);
    return t;
  };
  auto as_matrix = [](RawTensor t, const std::string& name) -> Matrix {
    if (t.dims.size() != 2) raise(Err::DataError, "tensor " + name + " is not rank 2");
    Matrix m(t.dims[0], t.dims[1]);
    m.data = std::move(t.data);
    return m;
  };

  RawTensor meta = take("meta");
  if (meta.data.size() < 6) raise(Err::DataError, "checkpoint meta tensor too small");
  Checkpoint ck;
  EncoderParams& p = ck.params;
  p.d_in = static_cast<std::size_t>(meta.data[0]);
  p.d_h = static_cast<std::size_t>(meta.data[1]);
  p.d_z = static_cast<std::size_t>(meta.data[2]);
  p.bn_momentum = meta.data[4];
  std::size_t n_layers = static_cast<std::size_t>(meta.data[5]);
  if (meta.data.size() != 6 + n_layers) {
    raise(Err::DataError, "checkpoint meta tensor has wrong length");
  }

  for (std::size_t l = 0; l < n_layers; ++l) {
    std::string base = "f." + std::to_string(l) + ".";
    DenseLayer layer;
    layer.w = as_matrix(take(base + "W"), base + "W");
    layer.b = take(base + "b").data;
    layer.act = meta.data[6 + l] != 0.0 ? Activation::Relu : Activation::Identity;
    p.layers.push_back(std::move(layer));
  }
  p.head.w1 = as_matrix(take("g.W1"), "g.W1");
  p.head.b1 = take("g.b1").data;
  p.head.bn_gamma = take("g.bn_gamma").data;
  p.head.bn_beta = take("g.bn_beta").data;
  p.head.bn_run_mean = take("g.bn_run_mean").data;
  p.head.bn_run_var = take("g.bn_run_var").data;
  p.head.w2 = as_matrix(take("g.W2"), "g.W2");
  p.head.b2 = take("g.b2").data;

  if (tensors.count("classifier.W") != 0) {
    LinearClassifier c;
    c.w = as_matrix(take("classifier.W"), "classifier.W");
    c.b = take("classifier.b").data;
    ck.classifier = std::move(c);
  }
  if (!tensors.empty()) {
    raise(Err::DataError, "checkpoint has unexpected tensor: " + tensors.begin()->first);
  }
  for (double v : p.head.bn_run_var) {
    if (!(v > 0.0)) raise(Err::DataError, "checkpoint running variance not positive");
  }
  return ck;
}

}  // namespace encoder
}  // namespace acl
