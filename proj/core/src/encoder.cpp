#include "specfil/encoder.hpp"

#include <cmath>

#include "specfil/error.hpp"

namespace specfil {

namespace {

void fill_glorot(Matrix& m, Pcg64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-limit, limit);
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

EncoderState EncoderState::init(Index d, Index d_prime, bool per_channel_slope, Pcg64& rng) {
  if (d < 1 || d_prime < 1) throw Error("encoder: dimensions must be >= 1");
  EncoderState s;
  s.theta = Matrix::Zero(d, d_prime);
  fill_glorot(s.theta, rng);
  s.prelu_slope = Vector::Constant(per_channel_slope ? d_prime : 1, 0.25);
  s.disc_w = Matrix::Zero(d_prime, d_prime);
  fill_glorot(s.disc_w, rng);

  s.theta_m = Matrix::Zero(d, d_prime);
  s.theta_v = Matrix::Zero(d, d_prime);
  s.slope_m = Vector::Zero(s.prelu_slope.size());
  s.slope_v = Vector::Zero(s.prelu_slope.size());
  s.w_m = Matrix::Zero(d_prime, d_prime);
  s.w_v = Matrix::Zero(d_prime, d_prime);
  return s;
}

void EncoderState::check_finite() const {
  if (!theta.allFinite() || !prelu_slope.allFinite() || !disc_w.allFinite())
    throw Error("encoder: non-finite parameter");
}

EncoderGrads EncoderGrads::zeros_like(const EncoderState& s) {
  EncoderGrads g;
  g.theta = Matrix::Zero(s.theta.rows(), s.theta.cols());
  g.prelu_slope = Vector::Zero(s.prelu_slope.size());
  g.disc_w = Matrix::Zero(s.disc_w.rows(), s.disc_w.cols());
  return g;
}

void EncoderGrads::accumulate(const EncoderGrads& other) {
  theta += other.theta;
  prelu_slope += other.prelu_slope;
  disc_w += other.disc_w;
}

void EncoderGrads::check_finite() const {
  if (!theta.allFinite() || !prelu_slope.allFinite() || !disc_w.allFinite())
    throw Error("encoder: non-finite gradient");
}

Matrix prelu(const Matrix& z, const Vector& slope) {
  Matrix h = z;
  const bool per_channel = slope.size() > 1;
  for (Index i = 0; i < h.rows(); ++i) {
    for (Index j = 0; j < h.cols(); ++j) {
      if (h(i, j) < 0.0) h(i, j) *= slope(per_channel ? j : 0);
    }
  }
  return h;
}

Matrix encode(const EncoderState& state, const Matrix& feats, const FilterHandle& filt) {
  if (feats.cols() != state.theta.rows())
    throw Error("encode: feature dim " + std::to_string(feats.cols()) + " != theta rows " +
                std::to_string(state.theta.rows()));
  Matrix h = prelu(apply_filter(filt, feats * state.theta), state.prelu_slope);
  if (!h.allFinite()) throw Error("encode: non-finite output");
  return h;
}

Vector readout(const Matrix& h) {
  if (h.rows() == 0) throw Error("readout: empty input");
  Vector m = h.colwise().mean();
  for (Index j = 0; j < m.size(); ++j) m(j) = sigmoid(m(j));
  return m;
}

double discriminate(const EncoderState& state, const Vector& h_node, const Vector& h_global) {
  return sigmoid(h_node.dot(state.disc_w * h_global));
}

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;

template <typename T>
void adam_tensor(T& param, T& m, T& v, const T& grad, double lr, double bc1, double bc2) {
  m = kBeta1 * m + (1.0 - kBeta1) * grad;
  v = kBeta2 * v.array().matrix() + (1.0 - kBeta2) * grad.array().square().matrix();
  param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kEps);
}

}  // namespace

void adam_update(EncoderState& state, const EncoderGrads& grads, double lr) {
  state.adam_step += 1;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.adam_step));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.adam_step));
  adam_tensor(state.theta, state.theta_m, state.theta_v, grads.theta, lr, bc1, bc2);
  adam_tensor(state.prelu_slope, state.slope_m, state.slope_v, grads.prelu_slope, lr, bc1, bc2);
  adam_tensor(state.disc_w, state.w_m, state.w_v, grads.disc_w, lr, bc1, bc2);
  state.check_finite();
}

}  // namespace specfil
