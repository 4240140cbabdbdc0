#pragma once

// Partial symmetric eigensolvers. Small problems go through Eigen's dense
// tridiagonal QR; larger ones through a thick-restart Lanczos iteration with
// full reorthogonalization that only needs operator-vector products.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <concepts>
#include <type_traits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "geosbm/parallel.hpp"
#include "geosbm/rng.hpp"

namespace geosbm {

enum class EigenOrder {
  LargestMagnitude,  // descending |lambda|, ties -> larger signed value first
  LargestAlgebraic,  // descending lambda
};

struct EigenPairs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // columns, orthonormal
};

struct EigenOptions {
  EigenOrder order = EigenOrder::LargestMagnitude;
  std::size_t dense_threshold = 256;  // dimensions at or below use the dense solver
  double tolerance = 1e-10;           // Ritz residual relative to the largest |Ritz value|
  std::size_t max_restarts = 500;
  std::size_t basis_size = 0;  // 0 -> automatic
  std::uint64_t seed = 0x5EED;
};

/// Symmetric operator given only by products, y = A x.
template <typename Op>
concept LinearOperator = requires(const Op& op, const Eigen::VectorXd& x, Eigen::VectorXd& y) {
  { op.dim() } -> std::convertible_to<std::size_t>;
  op.apply(x, y);
};

class DenseOperator {
 public:
  explicit DenseOperator(const Eigen::MatrixXd& m) : m_(m) {}
  std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const { y.noalias() = m_ * x; }
  const Eigen::MatrixXd& matrix() const { return m_; }

 private:
  const Eigen::MatrixXd& m_;
};

class SparseOperator {
 public:
  explicit SparseOperator(const Eigen::SparseMatrix<double, Eigen::RowMajor>& m, std::size_t threads = 1)
      : m_(m), threads_(threads) {}
  std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    y.resize(m_.rows());
    parallel_for(static_cast<std::size_t>(m_.outerSize()), threads_, [&](std::size_t i) {
      double acc = 0.0;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(m_, static_cast<Eigen::Index>(i)); it; ++it) {
        acc += it.value() * x[it.col()];
      }
      y[static_cast<Eigen::Index>(i)] = acc;
    });
  }

 private:
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& m_;
  std::size_t threads_;
};

namespace detail {

// Positions of the `count` wanted values under `order`, best first.
inline std::vector<Eigen::Index> select_wanted(const Eigen::VectorXd& values, EigenOrder order,
                                               std::size_t count) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(values.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  const double scale = values.size() ? values.cwiseAbs().maxCoeff() : 0.0;
  const double tie = 1e-12 * std::max(scale, 1e-300);
  auto better = [&](Eigen::Index a, Eigen::Index b) {
    const double va = values[a];
    const double vb = values[b];
    if (order == EigenOrder::LargestAlgebraic) return va > vb;
    const double da = std::fabs(va);
    const double db = std::fabs(vb);
    if (std::fabs(da - db) > tie) return da > db;
    if (va != vb) return va > vb;
    return a < b;
  };
  std::stable_sort(idx.begin(), idx.end(), better);
  idx.resize(std::min(count, idx.size()));
  return idx;
}

// Flip each column so its first coordinate of non-negligible size is positive.
inline void fix_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    const double scale = vectors.col(c).cwiseAbs().maxCoeff();
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      if (std::fabs(vectors(r, c)) > 1e-8 * scale) {
        if (vectors(r, c) < 0) vectors.col(c) *= -1.0;
        break;
      }
    }
  }
}

inline EigenPairs finish(const Eigen::VectorXd& values, const Eigen::MatrixXd& vectors, EigenOrder order,
                         std::size_t k) {
  const auto wanted = select_wanted(values, order, k);
  EigenPairs out;
  out.values.resize(static_cast<Eigen::Index>(wanted.size()));
  out.vectors.resize(vectors.rows(), static_cast<Eigen::Index>(wanted.size()));
  for (std::size_t i = 0; i < wanted.size(); ++i) {
    out.values[static_cast<Eigen::Index>(i)] = values[wanted[i]];
    out.vectors.col(static_cast<Eigen::Index>(i)) = vectors.col(wanted[i]);
  }
  fix_signs(out.vectors);
  return out;
}

}  // namespace detail

/// All eigenpairs of a dense symmetric matrix ordered by `order`.
inline EigenPairs dense_eigen(const Eigen::MatrixXd& m, std::size_t k, EigenOrder order) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) throw std::runtime_error("dense eigensolver failed");
  return detail::finish(solver.eigenvalues(), solver.eigenvectors(), order, k);
}

/// Thick-restart Lanczos for the k wanted eigenpairs of a symmetric operator.
template <LinearOperator Op>
EigenPairs lanczos(const Op& op, std::size_t k, const EigenOptions& opts = {}) {
  const std::size_t n = op.dim();
  if (k == 0 || k > n) throw std::invalid_argument("lanczos: need 1 <= K <= dim");
  std::size_t m = opts.basis_size ? opts.basis_size : std::max<std::size_t>(3 * k + 30, 60);
  m = std::min(m, n);
  const std::size_t keep = std::min<std::size_t>(m > k + 1 ? m - 1 : k, std::max<std::size_t>(k + 10, m / 2));

  Eigen::MatrixXd basis(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m + 1));
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  Rng rng(opts.seed, "lanczos");

  auto random_unit_orthogonal = [&](std::size_t against) -> bool {
    const auto cols = static_cast<Eigen::Index>(against);
    for (int attempt = 0; attempt < 5; ++attempt) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(n));
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
      for (int pass = 0; pass < 2 && cols > 0; ++pass) {
        v -= basis.leftCols(cols) * (basis.leftCols(cols).transpose() * v);
      }
      const double norm = v.norm();
      if (norm > 1e-8) {
        basis.col(cols) = v / norm;
        return true;
      }
    }
    return false;
  };

  random_unit_orthogonal(0);
  std::size_t start = 0;  // first basis column still to be expanded
  double beta = 0.0;
  Eigen::VectorXd w(static_cast<Eigen::Index>(n));
  Eigen::VectorXd coeff;

  for (std::size_t cycle = 0;; ++cycle) {
    std::size_t size = m;
    for (std::size_t j = start; j < m; ++j) {
      const auto cols = static_cast<Eigen::Index>(j + 1);
      op.apply(basis.col(static_cast<Eigen::Index>(j)), w);
      coeff = basis.leftCols(cols).transpose() * w;
      w.noalias() -= basis.leftCols(cols) * coeff;
      const Eigen::VectorXd again = basis.leftCols(cols).transpose() * w;
      w.noalias() -= basis.leftCols(cols) * again;
      coeff += again;
      for (Eigen::Index i = 0; i < cols; ++i) {
        h(i, cols - 1) = coeff[i];
        h(cols - 1, i) = coeff[i];
      }
      beta = w.norm();
      const double scale = std::max(h.topLeftCorner(cols, cols).cwiseAbs().maxCoeff(), 1e-300);
      if (j + 1 == n) {
        beta = 0.0;
        size = j + 1;
        break;
      }
      if (beta <= 1e-12 * scale) {
        // invariant subspace found: continue in a fresh orthogonal direction
        beta = 0.0;
        if (!random_unit_orthogonal(j + 1)) {
          size = j + 1;
          break;
        }
      } else {
        basis.col(cols) = w / beta;
      }
    }

    const auto sz = static_cast<Eigen::Index>(size);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(h.topLeftCorner(sz, sz));
    if (small.info() != Eigen::Success) throw std::runtime_error("lanczos: projected eigensolve failed");
    const Eigen::VectorXd& theta = small.eigenvalues();
    const Eigen::MatrixXd& y = small.eigenvectors();
    const auto wanted = detail::select_wanted(theta, opts.order, std::min(keep, size));
    const double norm_est = std::max(theta.cwiseAbs().maxCoeff(), 1e-300);

    bool converged = true;
    for (std::size_t i = 0; i < std::min(k, wanted.size()); ++i) {
      const double residual = std::fabs(beta * y(sz - 1, wanted[i]));
      if (residual > opts.tolerance * norm_est) converged = false;
    }
    if (wanted.size() < k) throw std::runtime_error("lanczos: basis smaller than K");

    if (converged || size < m || cycle + 1 >= opts.max_restarts) {
      if (!converged && size == m) {
        throw std::runtime_error("lanczos: no convergence after " + std::to_string(opts.max_restarts) +
                                 " restarts");
      }
      Eigen::VectorXd values(static_cast<Eigen::Index>(k));
      Eigen::MatrixXd ritz(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
      for (std::size_t i = 0; i < k; ++i) {
        values[static_cast<Eigen::Index>(i)] = theta[wanted[i]];
        ritz.col(static_cast<Eigen::Index>(i)) = basis.leftCols(sz) * y.col(wanted[i]);
      }
      return detail::finish(values, ritz, opts.order, k);
    }

    // thick restart: keep the wanted Ritz vectors plus the residual direction
    const std::size_t p = wanted.size();
    Eigen::MatrixXd ritz(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    Eigen::VectorXd coupling(static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < p; ++i) {
      ritz.col(static_cast<Eigen::Index>(i)) = basis.leftCols(sz) * y.col(wanted[i]);
      coupling[static_cast<Eigen::Index>(i)] = beta * y(sz - 1, wanted[i]);
    }
    basis.col(static_cast<Eigen::Index>(p)) = basis.col(sz);
    basis.leftCols(static_cast<Eigen::Index>(p)) = ritz;
    h.setZero();
    for (std::size_t i = 0; i < p; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      h(ii, ii) = theta[wanted[i]];
      h(ii, static_cast<Eigen::Index>(p)) = h(static_cast<Eigen::Index>(p), ii) = coupling[ii];
    }
    start = p;
  }
}

/// Top-k eigenpairs of a symmetric operator; dense solve for small dimension.
template <LinearOperator Op>
EigenPairs top_k_eigen(const Op& op, std::size_t k, const EigenOptions& opts = {}) {
  const std::size_t n = op.dim();
  if (k < 1) throw std::invalid_argument("top_k_eigen: K must be >= 1");
  if (k > n) {
    throw std::invalid_argument("top_k_eigen: K=" + std::to_string(k) + " exceeds dimension " +
                                std::to_string(n));
  }
  if (n <= opts.dense_threshold) {
    Eigen::MatrixXd dense(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    if constexpr (std::is_same_v<Op, DenseOperator>) {
      dense = op.matrix();
    } else {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
      Eigen::VectorXd col;
      for (std::size_t j = 0; j < n; ++j) {
        e[static_cast<Eigen::Index>(j)] = 1.0;
        op.apply(e, col);
        dense.col(static_cast<Eigen::Index>(j)) = col;
        e[static_cast<Eigen::Index>(j)] = 0.0;
      }
    }
    return dense_eigen(0.5 * (dense + dense.transpose()), k, opts.order);
  }
  return lanczos(op, k, opts);
}

inline EigenPairs top_k_eigen(const Eigen::MatrixXd& m, std::size_t k, const EigenOptions& opts = {}) {
  if (m.rows() != m.cols()) throw std::invalid_argument("top_k_eigen: matrix must be square");
  return top_k_eigen(DenseOperator(m), k, opts);
}

}  // namespace geosbm
