#pragma once

// End-to-end community detection: distances, giant component, centering,
// embedding and clustering of the embedding rows.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "geosbm/baselines.hpp"
#include "geosbm/clustering.hpp"
#include "geosbm/embedding.hpp"
#include "geosbm/geodesic.hpp"
#include "geosbm/graph.hpp"
#include "geosbm/labeling.hpp"

namespace geosbm {

enum class Clusterer { KMeans, Gmm };

inline std::string_view to_string(Clusterer c) { return c == Clusterer::KMeans ? "kmeans" : "gmm"; }
inline Clusterer parse_clusterer(std::string_view s) {
  if (s == "kmeans") return Clusterer::KMeans;
  if (s == "gmm") return Clusterer::Gmm;
  throw std::invalid_argument("unknown clusterer '" + std::string(s) + "'");
}

inline std::string_view to_string(Normalize n) { return n == Normalize::Mds ? "mds" : "raw"; }
inline Normalize parse_normalize(std::string_view s) {
  if (s == "mds") return Normalize::Mds;
  if (s == "raw") return Normalize::Raw;
  throw std::invalid_argument("unknown normalization '" + std::string(s) + "'");
}

struct DetectOptions {
  SpectralMethod method = SpectralMethod::Geodesic;
  Clusterer clusterer = Clusterer::KMeans;
  Normalize normalize = Normalize::Mds;
  SentinelPolicy sentinel = SentinelPolicy::AsIs;
  double cap_factor = 3.0;
  std::size_t restarts = 20;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  EigenOptions eigen;
  bool keep_distances = false;
};

struct DetectionResult {
  Labeling labels;                 // over the giant component, in index_map order
  std::vector<Vertex> index_map;   // giant index -> original vertex id
  Eigen::VectorXd eigenvalues;     // top K+1 (fewer if the giant is tiny), for gap inspection
  Eigen::MatrixXd embedding;       // n_C x K rows that were clustered
  std::optional<DistanceMatrix> distances;  // giant-component geodesics when requested
};

inline Labeling cluster_rows(const Eigen::MatrixXd& rows, std::size_t k, Clusterer clusterer, std::size_t restarts,
                             std::uint64_t seed) {
  KMeansOptions ko;
  ko.restarts = restarts;
  ko.seed = seed;
  if (clusterer == Clusterer::KMeans) return kmeans(rows, k, ko).assignment;
  GmmOptions go;
  go.init = ko;
  return gmm_em(rows, k, go).assignment;
}

inline DetectionResult detect_communities(const SparseGraph& g, std::size_t k, const DetectOptions& opts = {}) {
  if (g.n() == 0) throw std::invalid_argument("detect_communities: empty graph");
  if (k < 1) throw std::invalid_argument("detect_communities: K must be >= 1");
  Subgraph giant = giant_component(g);
  const std::size_t nc = giant.graph.n();
  if (nc < 2 * k) {
    throw std::runtime_error("detect_communities: giant component has " + std::to_string(nc) +
                             " vertices, fewer than 2K = " + std::to_string(2 * k));
  }
  DetectionResult result;
  result.index_map = std::move(giant.original_ids);
  const std::size_t want = std::min(k + 1, nc);
  EigenOptions eo = opts.eigen;
  eo.seed = derive_seed(opts.seed, "eigen");

  if (opts.method == SpectralMethod::Geodesic) {
    DistanceMatrix d = apsp(giant.graph, opts.cap_factor, opts.threads);
    eo.order = EigenOrder::LargestMagnitude;
    const DistanceOperator op(d, opts.normalize, opts.sentinel, opts.threads);
    const EigenPairs pairs = top_k_eigen(op, want, eo);
    result.eigenvalues = pairs.values;
    result.embedding = pairs.vectors.leftCols(static_cast<Eigen::Index>(k));
    if (opts.keep_distances) result.distances = std::move(d);
  } else {
    const SpectralMatrix sm = build_matrix(giant.graph, opts.method);
    eo.order = sm.order;
    const EigenPairs pairs = top_k_eigen(SparseOperator(sm.symmetric, opts.threads), want, eo);
    result.eigenvalues = pairs.values;
    result.embedding = coordinates_from_vectors(sm, pairs.vectors.leftCols(static_cast<Eigen::Index>(k)));
    if (opts.keep_distances) result.distances = apsp(giant.graph, opts.cap_factor, opts.threads);
  }

  if (k == 1) {
    result.labels = Labeling(std::vector<std::uint32_t>(nc, 1), 1);
  } else {
    result.labels = cluster_rows(result.embedding, k, opts.clusterer, opts.restarts, derive_seed(opts.seed, "cluster"));
  }
  return result;
}

}  // namespace geosbm
