#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "acl/numerics.hpp"
#include "acl/rng.hpp"

namespace acl {
namespace encoder {

enum class Activation { Relu, Identity };
enum class Mode { Train, Eval };

struct DenseLayer {
  Matrix w;   // in x out
  Vector b;   // out
  Activation act = Activation::Relu;
};

// Projection head g: linear -> batch norm -> ReLU -> linear.
struct ProjectionHead {
  Matrix w1;   // d_h x g_hidden
  Vector b1;
  Vector bn_gamma, bn_beta;
  Vector bn_run_mean, bn_run_var;
  Matrix w2;   // g_hidden x d_z
  Vector b2;
};

// Reference to one named parameter tensor, used by the optimizer and the
// checkpoint writer. Order is fixed and part of the checkpoint layout.
struct TensorRef {
  std::string name;
  std::vector<double>* data;
  std::vector<std::size_t> dims;
};

struct EncoderParams {
  std::vector<DenseLayer> layers;   // encoder f
  ProjectionHead head;              // projection g
  std::size_t d_in = 0, d_h = 0, d_z = 0;
  double bn_momentum = 0.9;

  std::size_t g_hidden() const { return head.w1.cols; }

  // Glorot-uniform weights, zero biases, identity batch norm.
  static EncoderParams init(std::size_t d_in, const std::vector<std::size_t>& hidden,
                            std::size_t d_h, std::size_t g_hidden, std::size_t d_z,
                            Rng rng);

  std::vector<TensorRef> trainable_tensors();
  std::vector<TensorRef> all_tensors();   // trainable + batch norm running stats
};

// Gradients in the same shapes and order as EncoderParams' trainables.
struct EncoderGrads {
  std::vector<DenseLayer> layers;
  ProjectionHead head;

  static EncoderGrads zeros_like(const EncoderParams& params);
  std::vector<TensorRef> trainable_tensors();
  void accumulate(const EncoderGrads& other);
};

struct ForwardTrace {
  Mode mode = Mode::Train;
  Matrix input;
  std::vector<Matrix> layer_pre;
  std::vector<Matrix> layer_act;
  Matrix head_pre1;
  Vector bn_mean, bn_var;
  Matrix bn_xhat;
  Matrix bn_out;
  Matrix relu_out;
};

struct ForwardResult {
  Matrix h;   // encoder output, pre-projection
  Matrix z;   // head output
  ForwardTrace trace;
};

// Train mode uses batch statistics and updates the running ones; eval mode
// uses the stored running statistics and leaves params untouched.
ForwardResult forward(EncoderParams& params, const Matrix& x, Mode mode);

// Eval-mode forward without a trace; per-row deterministic.
ForwardResult forward_eval(const EncoderParams& params, const Matrix& x);

// Total derivative with gradients injected at both depths: grad_z flows back
// through g then f, grad_h joins at f's output.
EncoderGrads backward(const EncoderParams& params, const ForwardTrace& trace,
                      const Matrix& grad_h, const Matrix& grad_z);

struct LinearClassifier {
  Matrix w;   // classes x d_h
  Vector b;
};

struct Checkpoint {
  EncoderParams params;
  std::optional<LinearClassifier> classifier;
};

// Binary format: magic "ACL1", version u32, then per tensor: name length
// u32, UTF-8 name, rank u32, dims u32 each, little-endian f64 payload.
// Round-trips bit-exactly.
void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path,
                     const LinearClassifier* classifier = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace encoder
}  // namespace acl
