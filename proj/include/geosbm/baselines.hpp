#pragma once

// Classical spectral clustering baselines: adjacency, unnormalized Laplacian
// (through the generalized problem L v = lambda D v), random-walk and
// symmetric normalized Laplacians.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "geosbm/clustering.hpp"
#include "geosbm/eigen.hpp"
#include "geosbm/graph.hpp"
#include "geosbm/labeling.hpp"

namespace geosbm {

enum class SpectralMethod {
  Adjacency,
  UnnormalizedLaplacian,
  RandomWalkLaplacian,
  SymmetricLaplacian,
  Geodesic,
};

inline std::string_view to_string(SpectralMethod m) {
  switch (m) {
    case SpectralMethod::Adjacency: return "adjacency";
    case SpectralMethod::UnnormalizedLaplacian: return "laplacian";
    case SpectralMethod::RandomWalkLaplacian: return "rw";
    case SpectralMethod::SymmetricLaplacian: return "sym";
    case SpectralMethod::Geodesic: return "geodesic";
  }
  return "?";
}

inline SpectralMethod parse_method(std::string_view s) {
  for (auto m : {SpectralMethod::Adjacency, SpectralMethod::UnnormalizedLaplacian, SpectralMethod::RandomWalkLaplacian,
                 SpectralMethod::SymmetricLaplacian, SpectralMethod::Geodesic}) {
    if (s == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown spectral method '" + std::string(s) + "'");
}

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// A method's matrix together with the symmetric matrix actually handed to
/// the eigensolver and the map back to the method's eigenvectors.
struct SpectralMatrix {
  SpectralMethod method = SpectralMethod::Adjacency;
  SparseMatrix matrix;     // A, D - A, D^-1 A or D^-1/2 A D^-1/2
  SparseMatrix symmetric;  // A, or D^-1/2 A D^-1/2 for every Laplacian variant
  EigenOrder order = EigenOrder::LargestMagnitude;
  Eigen::VectorXd degree;
  // eigenvectors of `matrix` (generalized ones for the unnormalized
  // Laplacian) are D^-1/2 times eigenvectors of `symmetric`
  bool rescale_by_inv_sqrt_degree = false;
};

inline SparseMatrix adjacency_matrix(const SparseGraph& g) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(2 * g.m());
  for (std::size_t u = 0; u < g.n(); ++u) {
    for (auto v : g.neighbors(u)) t.emplace_back(static_cast<int>(u), static_cast<int>(v), 1.0);
  }
  SparseMatrix a(static_cast<Eigen::Index>(g.n()), static_cast<Eigen::Index>(g.n()));
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

inline SpectralMatrix build_matrix(const SparseGraph& g, SpectralMethod method) {
  if (method == SpectralMethod::Geodesic) {
    throw std::invalid_argument("build_matrix: the geodesic method has no sparse matrix; use detect_communities");
  }
  SpectralMatrix out;
  out.method = method;
  const auto n = static_cast<Eigen::Index>(g.n());
  const SparseMatrix a = adjacency_matrix(g);
  out.degree.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) out.degree[i] = static_cast<double>(g.degree(static_cast<std::size_t>(i)));

  if (method == SpectralMethod::Adjacency) {
    out.matrix = a;
    out.symmetric = a;
    out.order = EigenOrder::LargestMagnitude;
    return out;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (out.degree[i] == 0.0) {
      throw std::invalid_argument("build_matrix: vertex " + std::to_string(i) +
                                  " has degree 0; normalized methods need the giant component");
    }
  }
  const Eigen::VectorXd inv_sqrt = out.degree.cwiseSqrt().cwiseInverse();
  out.symmetric = inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
  out.order = EigenOrder::LargestAlgebraic;
  switch (method) {
    case SpectralMethod::UnnormalizedLaplacian: {
      SparseMatrix d(n, n);
      std::vector<Eigen::Triplet<double>> t;
      for (Eigen::Index i = 0; i < n; ++i) t.emplace_back(static_cast<int>(i), static_cast<int>(i), out.degree[i]);
      d.setFromTriplets(t.begin(), t.end());
      out.matrix = d - a;
      out.rescale_by_inv_sqrt_degree = true;
      break;
    }
    case SpectralMethod::RandomWalkLaplacian:
      out.matrix = out.degree.cwiseInverse().asDiagonal() * a;
      out.rescale_by_inv_sqrt_degree = true;
      break;
    default:
      out.matrix = out.symmetric;
      break;
  }
  return out;
}

struct SpectralClusterOptions {
  KMeansOptions kmeans;
  EigenOptions eigen;
  std::size_t threads = 1;
};

/// Maps eigenvectors of `sm.symmetric` to the method's coordinates.
inline Eigen::MatrixXd coordinates_from_vectors(const SpectralMatrix& sm, Eigen::MatrixXd coords) {
  if (sm.rescale_by_inv_sqrt_degree) {
    coords = sm.degree.cwiseSqrt().cwiseInverse().asDiagonal() * coords;
    for (Eigen::Index c = 0; c < coords.cols(); ++c) coords.col(c).normalize();
  }
  if (sm.method == SpectralMethod::SymmetricLaplacian) {
    for (Eigen::Index r = 0; r < coords.rows(); ++r) {
      const double norm = coords.row(r).norm();
      if (norm > 0.0) coords.row(r) /= norm;
    }
  }
  return coords;
}

/// n x K spectral coordinates of a baseline method, before k-means.
inline Eigen::MatrixXd spectral_coordinates(const SpectralMatrix& sm, std::size_t k, const SpectralClusterOptions& opts = {}) {
  EigenOptions eo = opts.eigen;
  eo.order = sm.order;
  return coordinates_from_vectors(sm, top_k_eigen(SparseOperator(sm.symmetric, opts.threads), k, eo).vectors);
}

/// Build matrix, take top-K eigenvectors, (L_sym) normalize rows, k-means.
inline Labeling spectral_cluster(const SparseGraph& g, SpectralMethod method, std::size_t k,
                                 const SpectralClusterOptions& opts = {}) {
  if (g.n() == 0) throw std::invalid_argument("spectral_cluster: empty graph");
  if (k == 1) return Labeling(std::vector<std::uint32_t>(g.n(), 1), 1);
  const SpectralMatrix sm = build_matrix(g, method);
  return kmeans(spectral_coordinates(sm, k, opts), k, opts.kmeans).assignment;
}

}  // namespace geosbm
