#include "specfil/filter_bank.hpp"

#include <cmath>

#include "specfil/error.hpp"

namespace specfil {

FilterKind filter_kind_from_string(const std::string& s) {
  if (s == "gprgnn") return FilterKind::Gprgnn;
  if (s == "bernstein") return FilterKind::Bernstein;
  if (s == "chebyshev") return FilterKind::Chebyshev;
  throw ConfigError("filter.kind must be one of gprgnn|bernstein|chebyshev, got '" + s + "'");
}

std::string to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::Gprgnn: return "gprgnn";
    case FilterKind::Bernstein: return "bernstein";
    case FilterKind::Chebyshev: return "chebyshev";
  }
  return "?";
}

FilterOperators FilterOperators::build(const SparseMatrix& raw_adjacency) {
  FilterOperators ops;
  ops.adj_n = normalize_adjacency(raw_adjacency);
  ops.lap_n = normalized_laplacian(ops.adj_n);
  return ops;
}

FilterBank FilterBank::make(FilterKind kind, int order) {
  if (order < 1) throw ConfigError("filter.order must be >= 1");
  FilterBank bank;
  bank.kind = kind;
  bank.order = order;
  bank.includes_identity = (kind == FilterKind::Gprgnn) || (kind == FilterKind::Chebyshev);
  return bank;
}

std::string FilterBank::describe() const {
  return to_string(kind) + "(K=" + std::to_string(order) + ")";
}

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

}  // namespace

Matrix apply_filter(const FilterHandle& f, const Matrix& x) {
  const auto& bank = *f.bank;
  const auto& ops = *f.ops;
  const int i = f.index;
  if (i < 0 || i >= bank.order) throw Error("apply_filter: filter index out of range");
  if (x.rows() != ops.adj_n.n_rows) throw Error("apply_filter: row count mismatch");

  switch (bank.kind) {
    case FilterKind::Gprgnn: {
      Matrix y = x;
      for (int p = 0; p < i; ++p) y = spmv(ops.adj_n, y);
      return y;
    }
    case FilterKind::Bernstein: {
      const int degree = bank.order - 1;
      const double coeff = binomial(degree, i) * std::pow(0.5, degree);
      Matrix y = x;
      for (int p = 0; p < i; ++p) y = spmv(ops.lap_n, y);
      for (int p = 0; p < degree - i; ++p) y = 2.0 * y - spmv(ops.lap_n, y);
      return coeff * y;
    }
    case FilterKind::Chebyshev: {
      // T_j on the shifted operator L^ = lap_n - I.
      auto shifted = [&](const Matrix& v) { return Matrix(spmv(ops.lap_n, v) - v); };
      if (i == 0) return x;
      Matrix prev = x;
      Matrix cur = shifted(x);
      for (int j = 2; j <= i; ++j) {
        Matrix next = 2.0 * shifted(cur) - prev;
        prev = std::move(cur);
        cur = std::move(next);
      }
      return cur;
    }
  }
  throw Error("apply_filter: unknown bank kind");
}

double spectral_response(const FilterBank& bank, int i, double lambda) {
  if (i < 0 || i >= bank.order) throw Error("spectral_response: filter index out of range");
  switch (bank.kind) {
    case FilterKind::Gprgnn:
      return std::pow(1.0 - lambda, i);
    case FilterKind::Bernstein: {
      const int degree = bank.order - 1;
      return binomial(degree, i) * std::pow(0.5, degree) * std::pow(2.0 - lambda, degree - i) *
             std::pow(lambda, i);
    }
    case FilterKind::Chebyshev: {
      const double x = lambda - 1.0;
      if (i == 0) return 1.0;
      double prev = 1.0, cur = x;
      for (int j = 2; j <= i; ++j) {
        const double next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
      }
      return cur;
    }
  }
  throw Error("spectral_response: unknown bank kind");
}

}  // namespace specfil
