#pragma once

#include <cstdint>

#include "specfil/filter_bank.hpp"
#include "specfil/matrix.hpp"
#include "specfil/rng.hpp"

namespace specfil {

/// Parameters of the shared single-layer encoder plus the bilinear
/// discriminator, with their Adam moments. One instance per training run;
/// snapshots are plain copies.
struct EncoderState {
  Matrix theta;        // d x d', shared across all filters
  Vector prelu_slope;  // size 1 (shared scalar) or d' (per-channel)
  Matrix disc_w;       // d' x d' bilinear form

  Matrix theta_m, theta_v;
  Vector slope_m, slope_v;
  Matrix w_m, w_v;
  std::int64_t adam_step = 0;

  Index input_dim() const { return theta.rows(); }
  Index embed_dim() const { return theta.cols(); }

  /// Glorot-uniform theta and disc_w, slope initialized to 0.25. Draw order
  /// (theta row-major, then disc_w row-major) is fixed for reproducibility.
  static EncoderState init(Index d, Index d_prime, bool per_channel_slope, Pcg64& rng);

  /// Throws Error if any parameter is non-finite.
  void check_finite() const;
};

struct EncoderGrads {
  Matrix theta;
  Vector prelu_slope;
  Matrix disc_w;

  static EncoderGrads zeros_like(const EncoderState& s);
  void accumulate(const EncoderGrads& other);
  void check_finite() const;
};

Matrix prelu(const Matrix& z, const Vector& slope);

/// H = PReLU(F_i (feats Theta)); the filter acts on the projected features,
/// which equals filtering first by linearity.
Matrix encode(const EncoderState& state, const Matrix& feats, const FilterHandle& filt);

/// Sigmoid of the column-wise mean: the global anchor.
Vector readout(const Matrix& h);

/// sigma(h_node^T W h_global) in (0, 1).
double discriminate(const EncoderState& state, const Vector& h_node, const Vector& h_global);

/// One Adam step (beta1 0.9, beta2 0.999, eps 1e-8) over all three tensors.
void adam_update(EncoderState& state, const EncoderGrads& grads, double lr);

}  // namespace specfil
