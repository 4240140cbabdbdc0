#pragma once

// Classical-MDS style normalization of the geodesic matrix and its top-K
// spectral embedding.
//
// The normalized matrix is -J S J with J = I - 11^T/n and S the entrywise
// square of the distances. The usual MDS factor 1/2 is left out; it does not
// change eigenvectors. For large n the matrix is never formed: the operator
// below applies -J S J to a vector straight from the 16/32-bit distance
// storage.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "geosbm/eigen.hpp"
#include "geosbm/geodesic.hpp"
#include "geosbm/parallel.hpp"

namespace geosbm {

enum class SentinelPolicy {
  AsIs,         // sentinel n+1 enters the arithmetic as an ordinary distance
  ClampToCap,   // sentinel replaced by the cap
};

/// How distances enter the eigenproblem.
enum class Normalize {
  Mds,  // -J (D∘D) J
  Raw,  // D / ln n, no centering
};

struct CenteredMatrix {
  Eigen::MatrixXd entries;
  std::size_t size() const { return static_cast<std::size_t>(entries.rows()); }
};

struct Embedding {
  Eigen::MatrixXd rows;       // n x K, orthonormal columns
  Eigen::VectorXd eigenvalues;  // descending |lambda|
};

namespace detail {
inline double effective_distance(std::uint32_t v, const DistanceMatrix& d, SentinelPolicy policy) {
  if (v == d.sentinel() && policy == SentinelPolicy::ClampToCap) return d.cap();
  return v;
}
}  // namespace detail

/// Dense -J (D∘D) J. Rows and columns sum to zero.
inline CenteredMatrix double_center(const DistanceMatrix& d, SentinelPolicy policy = SentinelPolicy::AsIs) {
  const auto n = static_cast<Eigen::Index>(d.size());
  if (n < 2) throw std::invalid_argument("double_center: need at least 2 vertices");
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = detail::effective_distance(d(static_cast<std::size_t>(i), static_cast<std::size_t>(j)), d, policy);
      s(i, j) = v * v;
    }
  }
  const Eigen::VectorXd row_mean = s.rowwise().mean();
  const Eigen::RowVectorXd col_mean = s.colwise().mean();
  const double grand = row_mean.mean();
  CenteredMatrix out;
  out.entries = -((s.colwise() - row_mean).rowwise() - col_mean).array() - grand;
  out.entries = (0.5 * (out.entries + out.entries.transpose())).eval();
  return out;
}

/// Matrix-free form of the distance eigenproblem: y = -J (D∘D) J x for Mds,
/// y = (D / ln n) x for Raw. Rows are processed in parallel; each output
/// entry is a sequential sum, so results do not depend on the thread count.
class DistanceOperator {
 public:
  DistanceOperator(const DistanceMatrix& d, Normalize mode, SentinelPolicy policy = SentinelPolicy::AsIs,
                   std::size_t threads = 1)
      : d_(d), mode_(mode), threads_(threads) {
    if (d.size() < 2) throw std::invalid_argument("DistanceOperator: need at least 2 vertices");
    sentinel_value_ = detail::effective_distance(d.sentinel(), d, policy);
    scale_ = mode == Normalize::Raw ? 1.0 / std::log(static_cast<double>(d.size())) : 1.0;
  }

  std::size_t dim() const { return d_.size(); }

  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    const std::size_t n = d_.size();
    Eigen::VectorXd in = x;
    if (mode_ == Normalize::Mds) in.array() -= in.mean();
    y.resize(static_cast<Eigen::Index>(n));
    const double* xp = in.data();
    const std::uint32_t sentinel = d_.sentinel();
    const double sent = sentinel_value_;
    const bool squared = mode_ == Normalize::Mds;
    d_.visit([&](const auto& e) {
      parallel_for(n, threads_, [&](std::size_t i) {
        const auto* row = e.data() + i * n;
        double acc = 0.0;
        if (squared) {
          for (std::size_t j = 0; j < n; ++j) {
            const double v = row[j] == sentinel ? sent : static_cast<double>(row[j]);
            acc += v * v * xp[j];
          }
        } else {
          for (std::size_t j = 0; j < n; ++j) {
            const double v = row[j] == sentinel ? sent : static_cast<double>(row[j]);
            acc += v * xp[j];
          }
        }
        y[static_cast<Eigen::Index>(i)] = acc;
      });
    });
    if (mode_ == Normalize::Mds) {
      y.array() -= y.mean();
      y = -y;
    } else {
      y *= scale_;
    }
  }

 private:
  const DistanceMatrix& d_;
  Normalize mode_;
  std::size_t threads_;
  double sentinel_value_ = 0.0;
  double scale_ = 1.0;
};

inline Embedding make_embedding(EigenPairs pairs) {
  return {std::move(pairs.vectors), std::move(pairs.values)};
}

/// Top-K eigenvectors (by |lambda|) of the centered matrix as embedding rows.
inline Embedding spectral_embed(const CenteredMatrix& c, std::size_t k, const EigenOptions& opts = {}) {
  EigenOptions o = opts;
  o.order = EigenOrder::LargestMagnitude;
  return make_embedding(top_k_eigen(c.entries, k, o));
}

/// Same, matrix-free.
inline Embedding spectral_embed(const DistanceOperator& op, std::size_t k, const EigenOptions& opts = {}) {
  EigenOptions o = opts;
  o.order = EigenOrder::LargestMagnitude;
  return make_embedding(top_k_eigen(op, k, o));
}

/// CSV: a comment line with the eigenvalues, then one row per vertex.
inline void write_embedding_csv(std::ostream& out, const Embedding& e) {
  const auto old_precision = out.precision(17);
  out << "# eigenvalues";
  for (Eigen::Index i = 0; i < e.eigenvalues.size(); ++i) out << (i ? "," : " ") << e.eigenvalues[i];
  out << '\n';
  for (Eigen::Index r = 0; r < e.rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < e.rows.cols(); ++c) {
      if (c) out << ',';
      out << e.rows(r, c);
    }
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace geosbm
