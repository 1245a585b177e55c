#pragma once

#include <string>

#include "specfil/matrix.hpp"
#include "specfil/sparse.hpp"

namespace specfil {

enum class FilterKind { Gprgnn, Bernstein, Chebyshev };

FilterKind filter_kind_from_string(const std::string& s);
std::string to_string(FilterKind kind);

/// Normalized operators for one graph; filters act on these and never
/// materialize their own matrices.
struct FilterOperators {
  SparseMatrix adj_n;  // D^{-1/2} (A + I) D^{-1/2}
  SparseMatrix lap_n;  // I - adj_n

  static FilterOperators build(const SparseMatrix& raw_adjacency);
};

/// A bank of `order` polynomial filters over the normalized operators:
///   Gprgnn:    { I, A_n, A_n^2, ..., A_n^{order-1} }
///   Bernstein: { B_0, ..., B_{order-1} },
///              B_i = 2^{-(order-1)} C(order-1, i) (2I - L_n)^{order-1-i} L_n^i
///   Chebyshev: { T_0(L^), ..., T_{order-1}(L^) } with L^ = L_n - I,
///              so the recurrence runs on the [-1, 1] spectrum. The
///              unhalved T_0 = I convention is used.
struct FilterBank {
  FilterKind kind = FilterKind::Gprgnn;
  int order = 4;
  // True when filter 0 acts as the identity operator. This holds for Gprgnn
  // by construction and for Chebyshev because T_0 = I; identity filters are
  // skipped during contrastive training and included at embedding time.
  bool includes_identity = true;

  static FilterBank make(FilterKind kind, int order);

  int size() const { return order; }
  bool is_identity(int i) const { return includes_identity && i == 0; }
  int trainable_count() const { return order - (includes_identity ? 1 : 0); }

  std::string describe() const;
};

/// Reference to one filter of a bank over a concrete graph.
struct FilterHandle {
  const FilterBank* bank = nullptr;
  const FilterOperators* ops = nullptr;
  int index = 0;

  bool is_identity() const { return bank->is_identity(index); }
};

/// Applies filter `f` to a dense matrix via repeated sparse products; the
/// filter matrix itself is never formed. Every bank element is a polynomial
/// in a symmetric operator, so the result of apply_filter is also what the
/// transposed filter would produce (used by backpropagation).
Matrix apply_filter(const FilterHandle& f, const Matrix& x);

/// Scalar frequency response g_i(lambda) on the Laplacian spectrum
/// lambda in [0, 2].
double spectral_response(const FilterBank& bank, int i, double lambda);

}  // namespace specfil
