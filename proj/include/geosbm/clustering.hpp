#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geosbm/graph.hpp"
#include "geosbm/labeling.hpp"
#include "geosbm/rng.hpp"

namespace geosbm {

struct KMeansOptions {
  std::size_t restarts = 20;
  std::size_t max_iterations = 300;
  std::uint64_t seed = 0;
};

struct KMeansResult {
  Labeling assignment;
  Eigen::MatrixXd centroids;       // K x d
  double objective = 0.0;          // sum of squared distances to assigned centroid
  std::vector<double> trace;       // objective after every assignment step of the best run
  std::vector<double> restart_objectives;
  std::size_t best_restart = 0;
};

namespace detail {

inline std::size_t count_distinct_rows(const Eigen::MatrixXd& x) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(x.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (x(a, c) != x(b, c)) return x(a, c) < x(b, c);
    }
    return false;
  };
  std::sort(idx.begin(), idx.end(), less);
  std::size_t distinct = idx.empty() ? 0 : 1;
  for (std::size_t i = 1; i < idx.size(); ++i) {
    if (less(idx[i - 1], idx[i])) ++distinct;
  }
  return distinct;
}

// Nearest centroid, ties to the lower index.
inline std::size_t nearest(const Eigen::MatrixXd& x, Eigen::Index i, const Eigen::MatrixXd& centroids,
                           double* dist = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (x.row(i) - centroids.row(c)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(c);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

inline Eigen::MatrixXd kmeans_plus_plus(const Eigen::MatrixXd& x, std::size_t k, Rng& rng) {
  const auto n = x.rows();
  Eigen::MatrixXd centroids(static_cast<Eigen::Index>(k), x.cols());
  centroids.row(0) = x.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = (x.row(i) - centroids.row(0)).squaredNorm();
  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      chosen = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double w = d2[static_cast<std::size_t>(i)];
        if (w <= 0.0) continue;
        chosen = i;  // last positive-weight point covers rounding at the top end
        acc += w;
        if (acc > target) break;
      }
    } else {
      chosen = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centroids.row(static_cast<Eigen::Index>(c)) = x.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] =
          std::min(d2[static_cast<std::size_t>(i)], (x.row(i) - centroids.row(static_cast<Eigen::Index>(c))).squaredNorm());
    }
  }
  return centroids;
}

struct LloydRun {
  std::vector<std::uint32_t> assignment;  // 0-based
  Eigen::MatrixXd centroids;
  double objective = 0.0;
  std::vector<double> trace;
};

// Assign every point to its nearest centroid, then re-seed each empty
// cluster at the point farthest from its centroid.
inline void assign_step(const Eigen::MatrixXd& x, Eigen::MatrixXd& centroids, std::vector<std::uint32_t>& assignment,
                        std::vector<double>& dist) {
  const auto n = x.rows();
  const auto k = static_cast<std::size_t>(centroids.rows());
  std::vector<std::size_t> counts(k, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = nearest(x, i, centroids, &dist[static_cast<std::size_t>(i)]);
    assignment[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(c);
    ++counts[c];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] != 0) continue;
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
      if (counts[assignment[i]] > 1 && dist[i] > far_d) {
        far_d = dist[i];
        far = i;
      }
    }
    if (far_d < 0.0) continue;
    --counts[assignment[far]];
    assignment[far] = static_cast<std::uint32_t>(c);
    ++counts[c];
    centroids.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(far));
    dist[far] = 0.0;
  }
}

inline void update_step(const Eigen::MatrixXd& x, const std::vector<std::uint32_t>& assignment, Eigen::MatrixXd& centroids) {
  const auto k = centroids.rows();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    sums.row(assignment[static_cast<std::size_t>(i)]) += x.row(i);
    ++counts[assignment[static_cast<std::size_t>(i)]];
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) {
      centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
  }
}

inline LloydRun lloyd(const Eigen::MatrixXd& x, Eigen::MatrixXd centroids, std::size_t max_iterations) {
  const auto n = static_cast<std::size_t>(x.rows());
  LloydRun run;
  run.assignment.assign(n, 0);
  std::vector<double> dist(n);
  assign_step(x, centroids, run.assignment, dist);
  run.trace.push_back(std::accumulate(dist.begin(), dist.end(), 0.0));
  std::vector<std::uint32_t> next(n);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    update_step(x, run.assignment, centroids);
    assign_step(x, centroids, next, dist);
    run.trace.push_back(std::accumulate(dist.begin(), dist.end(), 0.0));
    if (next == run.assignment) break;
    run.assignment.swap(next);
  }
  run.centroids = std::move(centroids);
  run.objective = run.trace.back();
  return run;
}

}  // namespace detail

/// Best-of-restarts Lloyd's algorithm with k-means++ seeding. Restart r draws
/// from substream ("kmeans", r) of the seed.
inline KMeansResult kmeans(const Eigen::MatrixXd& rows, std::size_t k, const KMeansOptions& opts = {}) {
  const auto n = static_cast<std::size_t>(rows.rows());
  if (k < 1) throw std::invalid_argument("kmeans: K must be >= 1");
  if (n < k) throw std::invalid_argument("kmeans: n=" + std::to_string(n) + " is smaller than K=" + std::to_string(k));
  if (opts.restarts < 1) throw std::invalid_argument("kmeans: restarts must be >= 1");
  if (!rows.allFinite()) throw std::invalid_argument("kmeans: non-finite input");
  const std::size_t distinct = detail::count_distinct_rows(rows);
  if (distinct < k) {
    throw std::invalid_argument("kmeans: degenerate input, only " + std::to_string(distinct) +
                                " distinct rows for K=" + std::to_string(k) + " clusters");
  }

  KMeansResult result;
  detail::LloydRun best;
  for (std::size_t r = 0; r < opts.restarts; ++r) {
    Rng rng(opts.seed, "kmeans", r);
    auto run = detail::lloyd(rows, detail::kmeans_plus_plus(rows, k, rng), opts.max_iterations);
    result.restart_objectives.push_back(run.objective);
    if (r == 0 || run.objective < best.objective) {
      best = std::move(run);
      result.best_restart = r;
    }
  }
  std::vector<std::uint32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = best.assignment[i] + 1;
  result.assignment = Labeling(std::move(labels), static_cast<std::uint32_t>(k));
  result.centroids = std::move(best.centroids);
  result.objective = best.objective;
  result.trace = std::move(best.trace);
  return result;
}

struct GmmOptions {
  KMeansOptions init;
  std::size_t max_iterations = 500;
  double tolerance = 1e-8;       // stop when the log-likelihood gain falls below this
  double variance_floor = 1e-8;
};

struct GmmResult {
  Labeling assignment;             // argmax responsibility
  Eigen::VectorXd weights;         // K, sums to 1
  Eigen::MatrixXd means;           // K x d
  Eigen::MatrixXd variances;       // K x d, diagonal covariances
  double log_likelihood = 0.0;
  std::vector<double> trace;
};

/// EM for a diagonal-covariance Gaussian mixture initialized from k-means.
inline GmmResult gmm_em(const Eigen::MatrixXd& x, std::size_t k, const GmmOptions& opts = {}) {
  const KMeansResult init = kmeans(x, k, opts.init);
  const auto n = x.rows();
  const auto d = x.cols();
  const auto kk = static_cast<Eigen::Index>(k);
  constexpr double log_2pi = 1.8378770664093454836;

  GmmResult g;
  g.weights = Eigen::VectorXd::Zero(kk);
  g.means = Eigen::MatrixXd::Zero(kk, d);
  g.variances = Eigen::MatrixXd::Zero(kk, d);
  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, kk);
  for (Eigen::Index i = 0; i < n; ++i) resp(i, init.assignment[static_cast<std::size_t>(i)] - 1) = 1.0;

  auto m_step = [&] {
    const Eigen::VectorXd nk = resp.colwise().sum().transpose();
    for (Eigen::Index c = 0; c < kk; ++c) {
      if (nk[c] <= 1e-300) continue;  // keep previous parameters for a vanished component
      g.weights[c] = nk[c] / static_cast<double>(n);
      g.means.row(c) = (resp.col(c).transpose() * x) / nk[c];
      for (Eigen::Index j = 0; j < d; ++j) {
        const double v = (resp.col(c).array() * (x.col(j).array() - g.means(c, j)).square()).sum() / nk[c];
        g.variances(c, j) = std::max(v, opts.variance_floor);
      }
    }
    g.weights /= g.weights.sum();
  };

  auto e_step = [&] {
    double ll = 0.0;
    Eigen::VectorXd logp(kk);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < kk; ++c) {
        double lp = std::log(g.weights[c]);
        for (Eigen::Index j = 0; j < d; ++j) {
          const double diff = x(i, j) - g.means(c, j);
          lp -= 0.5 * (log_2pi + std::log(g.variances(c, j)) + diff * diff / g.variances(c, j));
        }
        logp[c] = lp;
      }
      const double mx = logp.maxCoeff();
      const double lse = mx + std::log((logp.array() - mx).exp().sum());
      ll += lse;
      resp.row(i) = (logp.array() - lse).exp().transpose();
    }
    return ll;
  };

  m_step();
  g.log_likelihood = e_step();
  g.trace.push_back(g.log_likelihood);
  for (std::size_t it = 0; it < opts.max_iterations; ++it) {
    m_step();
    const double ll = e_step();
    g.trace.push_back(ll);
    const double gain = ll - g.log_likelihood;
    g.log_likelihood = ll;
    if (gain < opts.tolerance) break;
  }

  std::vector<std::uint32_t> labels(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    resp.row(i).maxCoeff(&best);
    labels[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(best + 1);
  }
  g.assignment = Labeling(std::move(labels), static_cast<std::uint32_t>(k));
  return g;
}

// ---------------------------------------------------------------------------
// Label alignment

using Confusion = std::vector<std::vector<std::int64_t>>;

/// confusion[a][b] = #{i : truth_i = a+1, pred_i = b+1}, square of size max K.
inline Confusion confusion_matrix(const Labeling& truth, const Labeling& pred) {
  if (truth.size() != pred.size()) {
    throw std::invalid_argument("misclassification: label vectors differ in length (" +
                                std::to_string(truth.size()) + " vs " + std::to_string(pred.size()) + ")");
  }
  const std::size_t k = std::max(truth.k(), pred.k());
  Confusion c(k, std::vector<std::int64_t>(k, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) ++c[truth[i] - 1][pred[i] - 1];
  return c;
}

/// Maximum over permutations sigma of sum_b confusion[sigma(b)][b], by enumeration.
inline std::int64_t best_alignment_exhaustive(const Confusion& c) {
  std::vector<std::size_t> perm(c.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::int64_t best = std::numeric_limits<std::int64_t>::min();
  do {
    std::int64_t s = 0;
    for (std::size_t b = 0; b < perm.size(); ++b) s += c[perm[b]][b];
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return c.empty() ? 0 : best;
}

/// Same maximum via the Hungarian algorithm (shortest augmenting paths with
/// potentials), O(K^3).
inline std::int64_t best_alignment_hungarian(const Confusion& c) {
  const std::size_t k = c.size();
  if (k == 0) return 0;
  std::int64_t top = 0;
  for (const auto& row : c) top = std::max(top, *std::max_element(row.begin(), row.end()));
  // minimize cost = top - c; 1-based arrays as in the classic formulation
  constexpr std::int64_t inf = std::numeric_limits<std::int64_t>::max() / 4;
  std::vector<std::int64_t> u(k + 1, 0), v(k + 1, 0);
  std::vector<std::size_t> match(k + 1, 0), way(k + 1, 0);
  for (std::size_t i = 1; i <= k; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<std::int64_t> minv(k + 1, inf);
    std::vector<char> used(k + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      std::int64_t delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= k; ++j) {
        if (used[j]) continue;
        const std::int64_t cur = (top - c[i0 - 1][j - 1]) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= k; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::int64_t total = 0;
  for (std::size_t j = 1; j <= k; ++j) total += c[match[j] - 1][j - 1];
  return total;
}

/// Fraction of vertices misassigned under the best relabeling of `pred`.
/// Exhaustive search up to K = 8, Hungarian above.
inline double misclassification_rate(const Labeling& truth, const Labeling& pred) {
  const auto c = confusion_matrix(truth, pred);
  if (truth.size() == 0) return 0.0;
  const std::int64_t matched = c.size() <= 8 ? best_alignment_exhaustive(c) : best_alignment_hungarian(c);
  return 1.0 - static_cast<double>(matched) / static_cast<double>(truth.size());
}

/// P_hat_ab = (sum_ij A_ij 1(c_i = a, c_j = b)) / O_ab with O_ab = n_a n_b for
/// a != b and n_a (n_a - 1) for a = b. Undefined entries (O_ab = 0) are NaN.
inline Eigen::MatrixXd estimate_connection_matrix(const SparseGraph& g, const Labeling& labels) {
  if (labels.size() != g.n()) throw std::invalid_argument("estimate_connection_matrix: labels do not match graph");
  const auto k = static_cast<Eigen::Index>(labels.k());
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t u = 0; u < g.n(); ++u) {
    for (auto v : g.neighbors(u)) counts(labels[u] - 1, labels[v] - 1) += 1.0;
  }
  const auto nb = labels.block_counts();
  Eigen::MatrixXd p(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      const double na = static_cast<double>(nb[static_cast<std::size_t>(a)]);
      const double nbb = static_cast<double>(nb[static_cast<std::size_t>(b)]);
      const double o = a == b ? na * (na - 1.0) : na * nbb;
      p(a, b) = o > 0.0 ? counts(a, b) / o : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return p;
}

}  // namespace geosbm
