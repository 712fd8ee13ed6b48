#include "qrw/encoder.hpp"

#include <cmath>
#include <random>

#include "qrw/error.hpp"

namespace qrw {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double activate(double x, Activation act) {
  if (act == Activation::kTanh) return std::tanh(x);
  return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
}

double activate_grad(double x, Activation act) {
  if (act == Activation::kTanh) {
    double t = std::tanh(x);
    return 1.0 - t * t;
  }
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

void softmax_rows(Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
}

// Row-wise layer norm. Writes normalized values and inverse std for backward.
Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, double eps, Matrix& xhat,
                  Eigen::VectorXd& inv_std) {
  const auto d = static_cast<double>(x.cols());
  Eigen::VectorXd mean = x.rowwise().sum() / d;
  xhat = x.colwise() - mean;
  Eigen::VectorXd var = xhat.array().square().rowwise().sum() / d;
  inv_std = (var.array() + eps).rsqrt();
  xhat = inv_std.asDiagonal() * xhat;
  Matrix out = xhat.array().rowwise() * gain.row(0).array();
  out.rowwise() += bias.row(0);
  return out;
}

Matrix layer_norm_backward(const Matrix& dy, const Matrix& xhat, const Eigen::VectorXd& inv_std,
                           const Matrix& gain, Matrix& dgain, Matrix& dbias) {
  dgain.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  const auto d = static_cast<double>(dy.cols());
  Eigen::VectorXd mean_dxhat = dxhat.rowwise().sum() / d;
  Eigen::VectorXd mean_dxhat_xhat = (dxhat.array() * xhat.array()).rowwise().sum() / d;
  Matrix dx = dxhat.colwise() - mean_dxhat;
  dx -= mean_dxhat_xhat.asDiagonal() * xhat;
  return inv_std.asDiagonal() * dx;
}

Matrix add_bias(Matrix m, const Matrix& bias) {
  m.rowwise() += bias.row(0);
  return m;
}

void check_finite(const Matrix& m, const char* where) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite activation after ") + where);
}

void fill_uniform(Matrix& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
}

template <typename Params, typename Out, typename Wrap>
void visit_tensors(Params& p, Out& out, Wrap wrap) {
  out.push_back(wrap("embed.token", p.token_embedding));
  out.push_back(wrap("embed.position", p.position_embedding));
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& L = p.layers[l];
    const std::string pre = "layer" + std::to_string(l) + ".";
    out.push_back(wrap(pre + "attn.wq", L.wq));
    out.push_back(wrap(pre + "attn.bq", L.bq));
    out.push_back(wrap(pre + "attn.wk", L.wk));
    out.push_back(wrap(pre + "attn.bk", L.bk));
    out.push_back(wrap(pre + "attn.wv", L.wv));
    out.push_back(wrap(pre + "attn.bv", L.bv));
    out.push_back(wrap(pre + "attn.wo", L.wo));
    out.push_back(wrap(pre + "attn.bo", L.bo));
    out.push_back(wrap(pre + "ln1.gain", L.ln1_gain));
    out.push_back(wrap(pre + "ln1.bias", L.ln1_bias));
    out.push_back(wrap(pre + "ff.w1", L.w1));
    out.push_back(wrap(pre + "ff.b1", L.b1));
    out.push_back(wrap(pre + "ff.w2", L.w2));
    out.push_back(wrap(pre + "ff.b2", L.b2));
    out.push_back(wrap(pre + "ln2.gain", L.ln2_gain));
    out.push_back(wrap(pre + "ln2.bias", L.ln2_bias));
  }
  out.push_back(wrap("detect.w", p.detect_w));
  out.push_back(wrap("detect.b", p.detect_b));
  out.push_back(wrap("comprehend.start.w", p.start_w));
  out.push_back(wrap("comprehend.start.b", p.start_b));
  out.push_back(wrap("comprehend.start.v", p.start_v));
  out.push_back(wrap("comprehend.end.w", p.end_w));
  out.push_back(wrap("comprehend.end.b", p.end_b));
  out.push_back(wrap("comprehend.end.v", p.end_v));
}

}  // namespace

std::string_view to_string(Activation act) { return act == Activation::kGelu ? "gelu" : "tanh"; }

Activation parse_activation(std::string_view name) {
  if (name == "gelu") return Activation::kGelu;
  if (name == "tanh") return Activation::kTanh;
  throw Error("unknown activation '" + std::string(name) + "'");
}

void EncoderConfig::validate() const {
  if (d <= 0 || heads <= 0 || layers < 0 || max_len <= 0 || vocab <= 0 || ff() <= 0 || hidden() <= 0)
    throw ShapeError("encoder dimensions must be positive");
  if (d % heads != 0) throw ShapeError("d must be divisible by heads");
}

ModelParams ModelParams::zeros(const EncoderConfig& config) {
  config.validate();
  const int d = config.d, ff = config.ff(), h = config.hidden();
  ModelParams p;
  p.config = config;
  p.token_embedding = Matrix::Zero(config.vocab, d);
  p.position_embedding = Matrix::Zero(config.max_len, d);
  p.layers.resize(static_cast<std::size_t>(config.layers));
  for (auto& L : p.layers) {
    for (Matrix* w : {&L.wq, &L.wk, &L.wv, &L.wo}) *w = Matrix::Zero(d, d);
    for (Matrix* b : {&L.bq, &L.bk, &L.bv, &L.bo, &L.ln1_gain, &L.ln1_bias, &L.b2, &L.ln2_gain,
                      &L.ln2_bias})
      *b = Matrix::Zero(1, d);
    L.w1 = Matrix::Zero(d, ff);
    L.b1 = Matrix::Zero(1, ff);
    L.w2 = Matrix::Zero(ff, d);
  }
  p.detect_w = Matrix::Zero(4, d);
  p.detect_b = Matrix::Zero(1, 4);
  p.start_w = Matrix::Zero(h, 2 * d);
  p.end_w = Matrix::Zero(h, 2 * d);
  for (Matrix* v : {&p.start_b, &p.start_v, &p.end_b, &p.end_v}) *v = Matrix::Zero(1, h);
  return p;
}

ModelParams ModelParams::initialize(const EncoderConfig& config) {
  ModelParams p = zeros(config);
  std::mt19937_64 rng(config.seed);
  const double d = config.d, ff = config.ff(), h = config.hidden();
  fill_uniform(p.token_embedding, 1.0 / std::sqrt(d), rng);
  fill_uniform(p.position_embedding, 1.0 / std::sqrt(d), rng);
  for (auto& L : p.layers) {
    for (Matrix* w : {&L.wq, &L.wk, &L.wv, &L.wo}) fill_uniform(*w, 1.0 / std::sqrt(d), rng);
    fill_uniform(L.w1, 1.0 / std::sqrt(d), rng);
    fill_uniform(L.w2, 1.0 / std::sqrt(ff), rng);
    L.ln1_gain.setOnes();
    L.ln2_gain.setOnes();
  }
  fill_uniform(p.detect_w, 1.0 / std::sqrt(d), rng);
  fill_uniform(p.start_w, 1.0 / std::sqrt(2 * d), rng);
  fill_uniform(p.end_w, 1.0 / std::sqrt(2 * d), rng);
  fill_uniform(p.start_v, 1.0 / std::sqrt(h), rng);
  fill_uniform(p.end_v, 1.0 / std::sqrt(h), rng);
  return p;
}

ModelParams ModelParams::zeros_like() const { return zeros(config); }

std::vector<ModelParams::Named> ModelParams::tensors() {
  std::vector<Named> out;
  visit_tensors(*this, out, [](std::string name, Matrix& m) { return Named{std::move(name), &m}; });
  return out;
}

std::vector<ModelParams::ConstNamed> ModelParams::tensors() const {
  std::vector<ConstNamed> out;
  visit_tensors(*this, out,
                [](std::string name, const Matrix& m) { return ConstNamed{std::move(name), &m}; });
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += static_cast<std::size_t>(t.tensor->size());
  return n;
}

bool ModelParams::all_finite() const {
  for (const auto& t : tensors())
    if (!t.tensor->allFinite()) return false;
  return true;
}

void ModelParams::add_scaled(const ModelParams& other, double scale) {
  auto mine = tensors();
  auto theirs = other.tensors();
  if (mine.size() != theirs.size()) throw ShapeError("parameter sets differ in layout");
  for (std::size_t i = 0; i < mine.size(); ++i) *mine[i].tensor += scale * *theirs[i].tensor;
}

bool same_values(const ModelParams& a, const ModelParams& b) {
  auto ta = a.tensors();
  auto tb = b.tensors();
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].tensor->rows() != tb[i].tensor->rows() || ta[i].tensor->cols() != tb[i].tensor->cols())
      return false;
    if (*ta[i].tensor != *tb[i].tensor) return false;
  }
  return true;
}

EncoderOutput EncoderTrace::slice() const {
  EncoderOutput out;
  out.context.resize(static_cast<Eigen::Index>(context_positions.size()), output.cols());
  for (std::size_t i = 0; i < context_positions.size(); ++i)
    out.context.row(static_cast<Eigen::Index>(i)) = output.row(static_cast<Eigen::Index>(context_positions[i]));
  out.question = output.middleRows(static_cast<Eigen::Index>(bos_index),
                                   static_cast<Eigen::Index>(question_rows));
  return out;
}

EncoderTrace encode_traced(const ModelParams& params, const JointSequence& seq) {
  const auto& cfg = params.config;
  const auto T = static_cast<Eigen::Index>(seq.size());
  if (T > cfg.max_len)
    throw LengthError("sequence of length " + std::to_string(T) + " exceeds max_len " +
                      std::to_string(cfg.max_len));

  EncoderTrace trace;
  trace.context_positions = seq.context_positions;
  trace.bos_index = seq.bos_index;
  trace.question_rows = seq.question_range.end - seq.bos_index;

  Matrix x(T, cfg.d);
  for (Eigen::Index t = 0; t < T; ++t) {
    int id = seq.tokens[static_cast<std::size_t>(t)].id;
    if (id < 0 || id >= params.token_embedding.rows())
      throw ShapeError("token id " + std::to_string(id) + " outside vocabulary");
    trace.ids.push_back(id);
    x.row(t) = params.token_embedding.row(id) + params.position_embedding.row(t);
  }
  check_finite(x, "embedding");

  const int heads = cfg.heads;
  const int dh = cfg.d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  for (const auto& L : params.layers) {
    LayerTrace lt;
    lt.input = x;
    lt.q = add_bias(x * L.wq, L.bq);
    lt.k = add_bias(x * L.wk, L.bk);
    lt.v = add_bias(x * L.wv, L.bv);
    lt.mixed.resize(T, cfg.d);
    for (int h = 0; h < heads; ++h) {
      Matrix scores = lt.q.middleCols(h * dh, dh) * lt.k.middleCols(h * dh, dh).transpose() * scale;
      softmax_rows(scores);
      lt.mixed.middleCols(h * dh, dh) = scores * lt.v.middleCols(h * dh, dh);
      lt.attention.push_back(std::move(scores));
    }
    Matrix z1 = x + add_bias(lt.mixed * L.wo, L.bo);
    lt.y = layer_norm(z1, L.ln1_gain, L.ln1_bias, cfg.layer_norm_eps, lt.xhat1, lt.inv_std1);

    lt.pre_act = add_bias(lt.y * L.w1, L.b1);
    lt.act = lt.pre_act.unaryExpr([&](double v) { return activate(v, cfg.activation); });
    Matrix z2 = lt.y + add_bias(lt.act * L.w2, L.b2);
    x = layer_norm(z2, L.ln2_gain, L.ln2_bias, cfg.layer_norm_eps, lt.xhat2, lt.inv_std2);
    check_finite(x, "encoder layer");
    trace.layers.push_back(std::move(lt));
  }
  trace.output = std::move(x);
  return trace;
}

EncoderOutput encode(const ModelParams& params, const JointSequence& seq) {
  return encode_traced(params, seq).slice();
}

void encoder_backward(const ModelParams& params, const EncoderTrace& trace,
                      const EncoderOutput& upstream, ModelParams& grad) {
  const auto& cfg = params.config;
  const Eigen::Index T = trace.output.rows();
  const auto m = static_cast<Eigen::Index>(trace.context_positions.size());
  if (upstream.context.rows() != m || upstream.question.rows() != static_cast<Eigen::Index>(trace.question_rows) ||
      (m > 0 && upstream.context.cols() != cfg.d) || upstream.question.cols() != cfg.d)
    throw ShapeError("upstream gradient does not match encoder output shapes");

  Matrix dx = Matrix::Zero(T, cfg.d);
  for (Eigen::Index i = 0; i < m; ++i)
    dx.row(static_cast<Eigen::Index>(trace.context_positions[static_cast<std::size_t>(i)])) += upstream.context.row(i);
  dx.middleRows(static_cast<Eigen::Index>(trace.bos_index), upstream.question.rows()) += upstream.question;

  const int heads = cfg.heads;
  const int dh = cfg.d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const auto& L = params.layers[li];
    const auto& lt = trace.layers[li];
    auto& G = grad.layers[li];

    Matrix dz2 = layer_norm_backward(dx, lt.xhat2, lt.inv_std2, L.ln2_gain, G.ln2_gain, G.ln2_bias);
    Matrix dy = dz2;
    G.w2 += lt.act.transpose() * dz2;
    G.b2.row(0) += dz2.colwise().sum();
    Matrix dact = dz2 * L.w2.transpose();
    Matrix dpre = dact.array() *
                  lt.pre_act.unaryExpr([&](double v) { return activate_grad(v, cfg.activation); }).array();
    G.w1 += lt.y.transpose() * dpre;
    G.b1.row(0) += dpre.colwise().sum();
    dy += dpre * L.w1.transpose();

    Matrix dz1 = layer_norm_backward(dy, lt.xhat1, lt.inv_std1, L.ln1_gain, G.ln1_gain, G.ln1_bias);
    Matrix dinput = dz1;
    G.wo += lt.mixed.transpose() * dz1;
    G.bo.row(0) += dz1.colwise().sum();
    Matrix dmixed = dz1 * L.wo.transpose();

    Matrix dq(T, cfg.d), dk(T, cfg.d), dv(T, cfg.d);
    for (int h = 0; h < heads; ++h) {
      const Matrix& a = lt.attention[static_cast<std::size_t>(h)];
      auto dmix_h = dmixed.middleCols(h * dh, dh);
      Matrix da = dmix_h * lt.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh) = a.transpose() * dmix_h;
      Eigen::VectorXd row_dot = (da.array() * a.array()).rowwise().sum();
      Matrix ds = a.array() * (da.colwise() - row_dot).array();
      dq.middleCols(h * dh, dh) = ds * lt.k.middleCols(h * dh, dh) * scale;
      dk.middleCols(h * dh, dh) = ds.transpose() * lt.q.middleCols(h * dh, dh) * scale;
    }
    G.wq += lt.input.transpose() * dq;
    G.wk += lt.input.transpose() * dk;
    G.wv += lt.input.transpose() * dv;
    G.bq.row(0) += dq.colwise().sum();
    G.bk.row(0) += dk.colwise().sum();
    G.bv.row(0) += dv.colwise().sum();
    dinput += dq * L.wq.transpose() + dk * L.wk.transpose() + dv * L.wv.transpose();
    dx = std::move(dinput);
  }

  for (Eigen::Index t = 0; t < T; ++t) {
    grad.token_embedding.row(trace.ids[static_cast<std::size_t>(t)]) += dx.row(t);
    grad.position_embedding.row(t) += dx.row(t);
  }
}

ModelParams encode_with_grad(const ModelParams& params, const JointSequence& seq,
                             const EncoderOutput& upstream) {
  auto trace = encode_traced(params, seq);
  ModelParams grad = params.zeros_like();
  encoder_backward(params, trace, upstream, grad);
  return grad;
}

}  // namespace qrw
