#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "geosbm/graph.hpp"
#include "geosbm/labeling.hpp"
#include "geosbm/rng.hpp"

namespace geosbm {

/// Generative description of a stochastic block model: vertex types are
/// i.i.d. multinomial(pi), and for i < j the edge {i, j} is present with
/// probability P_ab = min(rho_n * B_ab, 1) given types a, b.
struct BlockModelParams {
  std::vector<double> pi;
  Eigen::MatrixXd kernel;  // B, K x K symmetric nonnegative
  double rho_n = 0.0;
  std::size_t n = 0;

  std::size_t k() const { return pi.size(); }

  double connection_probability(std::size_t a, std::size_t b) const {
    return std::min(rho_n * kernel(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)), 1.0);
  }

  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const {
    const auto k = static_cast<Eigen::Index>(pi.size());
    if (k < 1) throw std::invalid_argument("BlockModelParams: K must be >= 1");
    if (kernel.rows() != k || kernel.cols() != k) {
      throw std::invalid_argument("BlockModelParams: kernel must be K x K");
    }
    double total = 0.0;
    for (double p : pi) {
      if (!(p > 0.0)) throw std::invalid_argument("BlockModelParams: pi entries must be > 0");
      total += p;
    }
    if (std::fabs(total - 1.0) > 1e-12) {
      throw std::invalid_argument("BlockModelParams: pi must sum to 1");
    }
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) {
        if (kernel(a, b) != kernel(b, a)) {
          throw std::invalid_argument("BlockModelParams: kernel must be symmetric");
        }
        if (!(kernel(a, b) >= 0.0) || !std::isfinite(kernel(a, b))) {
          throw std::invalid_argument("BlockModelParams: kernel entries must be finite and >= 0");
        }
      }
    }
    if (!(rho_n >= 0.0) || !std::isfinite(rho_n)) {
      throw std::invalid_argument("BlockModelParams: rho_n must be finite and >= 0");
    }
  }
};

/// B = (p - q) I + q 11^T.
inline Eigen::MatrixXd planted_partition_kernel(double p, double q, int k) {
  if (k < 1) throw std::invalid_argument("planted_partition_kernel: K must be >= 1");
  if (!(q > 0.0)) throw std::invalid_argument("planted_partition_kernel: requires q > 0");
  if (!(p > q)) throw std::invalid_argument("planted_partition_kernel: requires p > q");
  Eigen::MatrixXd b = Eigen::MatrixXd::Constant(k, k, q);
  b.diagonal().setConstant(p);
  return b;
}

/// Uniform-prior planted partition at the sparse scaling rho_n = 1/n.
inline BlockModelParams planted_partition(std::size_t n, int k, double p, double q) {
  BlockModelParams params;
  params.pi.assign(static_cast<std::size_t>(k), 1.0 / k);
  params.kernel = planted_partition_kernel(p, q, k);
  params.rho_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  params.n = n;
  return params;
}

struct SbmSample {
  SparseGraph graph;
  Labeling labels;
};

namespace detail {

// Walks the Bernoulli(p) trials over `trials` ordered slots by geometric
// skipping and calls emit(slot) for every success.
template <typename Emit>
void bernoulli_slots(Rng& rng, std::uint64_t trials, double p, Emit&& emit) {
  if (trials == 0 || p <= 0.0) return;
  if (p >= 1.0) {
    for (std::uint64_t s = 0; s < trials; ++s) emit(s);
    return;
  }
  const double log_q = std::log1p(-p);
  std::uint64_t slot = 0;
  for (;;) {
    const std::uint64_t skip = rng.geometric_skip(log_q);
    if (skip >= trials - slot) return;
    slot += skip;
    emit(slot);
    if (++slot >= trials) return;
  }
}

}  // namespace detail

/// Samples (graph, labels). Labels come first from substream "labels"; edges of
/// block pair (a <= b) come from substream ("edges", pair index), so the result
/// is a pure function of (params, seed). Expected cost O(n + m).
inline SbmSample sample_sbm(const BlockModelParams& params, std::uint64_t seed) {
  params.validate();
  if (params.n == 0) throw std::invalid_argument("sample_sbm: n must be > 0");
  const std::size_t k = params.k();
  const std::size_t n = params.n;

  std::vector<double> cumulative(k);
  double acc = 0.0;
  for (std::size_t a = 0; a < k; ++a) cumulative[a] = (acc += params.pi[a]);
  Rng label_rng(seed, "labels");
  std::vector<std::uint32_t> labels(n);
  std::vector<std::vector<Vertex>> members(k);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = label_rng.uniform() * acc;
    auto a = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    a = std::min(a, k - 1);
    labels[i] = static_cast<std::uint32_t>(a + 1);
    members[a].push_back(static_cast<Vertex>(i));
  }

  std::vector<Edge> edges;
  std::uint64_t pair_index = 0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b, ++pair_index) {
      const double p = params.connection_probability(a, b);
      Rng rng(seed, "edges", pair_index);
      const auto& ma = members[a];
      const auto& mb = members[b];
      if (a == b) {
        // slot s enumerates pairs (row, col) with col < row, row-major
        const std::uint64_t na = ma.size();
        const std::uint64_t trials = na < 2 ? 0 : na * (na - 1) / 2;
        std::uint64_t row = 1;
        std::uint64_t row_start = 0;  // first slot of the current row
        detail::bernoulli_slots(rng, trials, p, [&](std::uint64_t s) {
          while (s >= row_start + row) {
            row_start += row;
            ++row;
          }
          edges.emplace_back(ma[s - row_start], ma[row]);
        });
      } else {
        const std::uint64_t nb = mb.size();
        detail::bernoulli_slots(rng, static_cast<std::uint64_t>(ma.size()) * nb, p,
                                [&](std::uint64_t s) { edges.emplace_back(ma[s / nb], mb[s % nb]); });
      }
    }
  }
  return {SparseGraph::from_edges(n, edges), Labeling(std::move(labels), static_cast<std::uint32_t>(k))};
}

}  // namespace geosbm
