#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "qrw/corpus.hpp"

namespace qrw {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

enum class Activation { kGelu, kTanh };

std::string_view to_string(Activation act);
Activation parse_activation(std::string_view name);

struct EncoderConfig {
  int d = 64;
  int layers = 2;
  int heads = 2;
  int ff_width = 0;     // 0 means 4 * d
  int attn_hidden = 0;  // width of the comprehension attention, 0 means d
  int max_len = 512;
  int vocab = 0;
  Activation activation = Activation::kGelu;
  double layer_norm_eps = 1e-5;
  std::uint64_t seed = 13;

  int ff() const { return ff_width > 0 ? ff_width : 4 * d; }
  int hidden() const { return attn_hidden > 0 ? attn_hidden : d; }
  void validate() const;  // throws ShapeError
};

struct LayerParams {
  Matrix wq, bq, wk, bk, wv, bv, wo, bo;  // d x d, 1 x d
  Matrix ln1_gain, ln1_bias;              // 1 x d
  Matrix w1, b1;                          // d x ff, 1 x ff
  Matrix w2, b2;                          // ff x d, 1 x d
  Matrix ln2_gain, ln2_bias;
};

// Every trainable tensor: the encoder plus the detect head (W_d, b_d) and the
// comprehension heads (W_s, b_s, v_s, W_e, b_e, v_e). Vectors are stored as
// 1 x k matrices so every tensor can be visited uniformly.
struct ModelParams {
  EncoderConfig config;

  Matrix token_embedding;     // vocab x d
  Matrix position_embedding;  // max_len x d
  std::vector<LayerParams> layers;

  Matrix detect_w;  // 4 x d
  Matrix detect_b;  // 1 x 4
  Matrix start_w;   // h x 2d, columns [context ; query]
  Matrix start_b;   // 1 x h
  Matrix start_v;   // 1 x h
  Matrix end_w;
  Matrix end_b;
  Matrix end_v;

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, unit
  // layer-norm gains. Seeded from config.seed.
  static ModelParams initialize(const EncoderConfig& config);
  // All-zero tensors of the right shapes (layer-norm gains included).
  static ModelParams zeros(const EncoderConfig& config);

  ModelParams zeros_like() const;

  struct Named {
    std::string name;
    Matrix* tensor;
  };
  struct ConstNamed {
    std::string name;
    const Matrix* tensor;
  };
  std::vector<Named> tensors();
  std::vector<ConstNamed> tensors() const;

  std::size_t parameter_count() const;
  bool all_finite() const;

  // this += scale * other, tensor by tensor.
  void add_scaled(const ModelParams& other, double scale);
};

bool same_values(const ModelParams& a, const ModelParams& b);

struct EncoderOutput {
  Matrix context;   // m x d
  Matrix question;  // (n + 1) x d, row 0 is BOS
};

// Per-layer activations kept for the backward pass.
struct LayerTrace {
  Matrix input;
  Matrix q, k, v;
  std::vector<Matrix> attention;  // one T x T matrix per head
  Matrix mixed;                   // concatenated head outputs
  Matrix xhat1;
  Eigen::VectorXd inv_std1;
  Matrix y;
  Matrix pre_act;
  Matrix act;
  Matrix xhat2;
  Eigen::VectorXd inv_std2;
};

struct EncoderTrace {
  std::vector<int> ids;
  std::vector<LayerTrace> layers;
  Matrix output;  // T x d
  std::vector<std::size_t> context_positions;
  std::size_t bos_index = 0;
  std::size_t question_rows = 0;

  EncoderOutput slice() const;
};

EncoderTrace encode_traced(const ModelParams& params, const JointSequence& seq);

// Token + position embedding followed by post-norm transformer layers.
// Throws LengthError when the sequence exceeds max_len.
EncoderOutput encode(const ModelParams& params, const JointSequence& seq);

// Accumulates d(output . upstream)/d(params) into `grad`.
void encoder_backward(const ModelParams& params, const EncoderTrace& trace,
                      const EncoderOutput& upstream, ModelParams& grad);

// Exact reverse-mode gradient of <encode(params, seq), upstream>.
// Throws ShapeError when upstream does not match the output shapes.
ModelParams encode_with_grad(const ModelParams& params, const JointSequence& seq,
                             const EncoderOutput& upstream);

}  // namespace qrw
