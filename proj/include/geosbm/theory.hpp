#pragma once

// Closed-form and Monte-Carlo quantities of the planted-partition theory:
// model eigenvalues, the detectability ratio, typical geodesic lengths,
// the ideal block-constant distance matrix, the multi-type Poisson
// Galton-Watson process and the Davis-Kahan subspace bound.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geosbm/eigen.hpp"
#include "geosbm/labeling.hpp"
#include "geosbm/rng.hpp"

namespace geosbm {

/// Spectral description of (B, pi): M = Pi B, S = Pi^1/2 B Pi^1/2.
struct SpectralParams {
  Eigen::VectorXd lambdas;  // eigenvalues of S, descending |lambda|
  Eigen::MatrixXd phi;      // columns: left eigenvectors of M, Pi^-1/2 varphi_k
  Eigen::MatrixXd psi;      // columns: right eigenvectors of M, Pi^1/2 varphi_k
  Eigen::MatrixXd varphi;   // columns: orthonormal eigenvectors of S
  Eigen::MatrixXd mean_offspring;  // M

  /// K0 = number of leading k with lambda_k^2 > lambda_1.
  std::size_t k0() const {
    std::size_t count = 0;
    for (Eigen::Index k = 0; k < lambdas.size(); ++k) {
      if (lambdas[k] * lambdas[k] > lambdas[0]) {
        ++count;
      } else {
        break;
      }
    }
    return count;
  }
};

inline void check_model(const Eigen::MatrixXd& b, const std::vector<double>& pi) {
  const auto k = static_cast<Eigen::Index>(pi.size());
  if (k < 1 || b.rows() != k || b.cols() != k) throw std::invalid_argument("kernel must be K x K with K = |pi|");
  double total = 0.0;
  for (double p : pi) {
    if (!(p > 0.0)) throw std::invalid_argument("pi entries must be positive");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-12) throw std::invalid_argument("pi must sum to 1");
  if ((b - b.transpose()).cwiseAbs().maxCoeff() != 0.0) throw std::invalid_argument("kernel must be symmetric");
}

inline SpectralParams spectral_params(const Eigen::MatrixXd& b, const std::vector<double>& pi) {
  check_model(b, pi);
  const auto k = static_cast<Eigen::Index>(pi.size());
  Eigen::VectorXd sqrt_pi(k);
  for (Eigen::Index a = 0; a < k; ++a) sqrt_pi[a] = std::sqrt(pi[static_cast<std::size_t>(a)]);
  const Eigen::MatrixXd s = sqrt_pi.asDiagonal() * b * sqrt_pi.asDiagonal();
  const EigenPairs e = dense_eigen(s, static_cast<std::size_t>(k), EigenOrder::LargestMagnitude);
  SpectralParams out;
  out.lambdas = e.values;
  out.varphi = e.vectors;
  out.phi = sqrt_pi.cwiseInverse().asDiagonal() * e.vectors;
  out.psi = sqrt_pi.asDiagonal() * e.vectors;
  out.mean_offspring = (sqrt_pi.array().square().matrix()).asDiagonal() * b;
  return out;
}

/// (p - q)^2 / (K (p + (K - 1) q)); the model is detectable when this exceeds 1.
inline double threshold_ratio(double p, double q, int k) {
  if (!(p > q && q > 0.0)) throw std::invalid_argument("threshold_ratio: requires p > q > 0");
  if (k < 1) throw std::invalid_argument("threshold_ratio: K must be >= 1");
  return (p - q) * (p - q) / (k * (p + (k - 1) * q));
}

/// F = 2 (B11 - B12)^2 / (B11 + B12), the two-block equal-prior statistic.
inline double decelle_f(double b11, double b12) {
  if (!(b11 > 0.0 && b12 > 0.0)) throw std::invalid_argument("decelle_f: requires B11, B12 > 0");
  return 2.0 * (b11 - b12) * (b11 - b12) / (b11 + b12);
}

enum class PairType { Within, Cross };

/// Minimal positive t with lambda2^t + (lambda1^t - lambda2^t)/K = n (within)
/// or (lambda1^t - lambda2^t)/K = n (cross). The first sign change is located
/// on a grid over [0, 10 log_lambda1 n] and refined by bisection.
inline double solve_tau(double lambda1, double lambda2, int k, double n, PairType which) {
  if (!(lambda1 > 1.0)) throw std::invalid_argument("solve_tau: requires lambda1 > 1");
  if (!(lambda2 >= 0.0 && lambda2 <= lambda1)) throw std::invalid_argument("solve_tau: requires 0 <= lambda2 <= lambda1");
  if (k < 1) throw std::invalid_argument("solve_tau: K must be >= 1");
  if (!(n > 1.0)) throw std::invalid_argument("solve_tau: requires n > 1");
  auto lhs = [&](double t) {
    const double l1 = std::pow(lambda1, t);
    const double l2 = std::pow(lambda2, t);
    return which == PairType::Within ? l2 + (l1 - l2) / k : (l1 - l2) / k;
  };
  const double upper = 10.0 * std::log(n) / std::log(lambda1);
  constexpr int grid = 20000;
  double lo = 0.0;
  double hi = -1.0;
  for (int i = 1; i <= grid; ++i) {
    const double t = upper * i / grid;
    if (lhs(t) >= n) {
      hi = t;
      break;
    }
    lo = t;
  }
  if (hi < 0.0) {
    throw std::domain_error("solve_tau: no root below t = 10 log_lambda1(n) = " + std::to_string(upper));
  }
  while (hi - lo > 1e-13 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (lhs(mid) >= n) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Minimal positive t with (S^t)_ab = n for a general kernel; S^t through the
/// eigendecomposition, so every eigenvalue of S must be positive.
inline double solve_tau_general(const SpectralParams& sp, std::size_t a, std::size_t b, double n) {
  const auto k = sp.lambdas.size();
  if (a >= static_cast<std::size_t>(k) || b >= static_cast<std::size_t>(k)) {
    throw std::invalid_argument("solve_tau_general: block index out of range");
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    if (!(sp.lambdas[i] > 0.0)) throw std::domain_error("solve_tau_general: needs all eigenvalues of S positive");
  }
  auto lhs = [&](double t) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      s += sp.varphi(static_cast<Eigen::Index>(a), i) * std::pow(sp.lambdas[i], t) * sp.varphi(static_cast<Eigen::Index>(b), i);
    }
    return s;
  };
  if (!(sp.lambdas[0] > 1.0)) throw std::domain_error("solve_tau_general: requires lambda1 > 1");
  const double upper = 10.0 * std::log(n) / std::log(sp.lambdas[0]);
  constexpr int grid = 20000;
  double lo = 0.0;
  double hi = -1.0;
  for (int i = 1; i <= grid; ++i) {
    const double t = upper * i / grid;
    if (lhs(t) >= n) {
      hi = t;
      break;
    }
    lo = t;
  }
  if (hi < 0.0) throw std::domain_error("solve_tau_general: no root in range");
  while (hi - lo > 1e-13 * hi) {
    const double mid = 0.5 * (lo + hi);
    (lhs(mid) >= n ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

struct GeodesicConstants {
  double tau1 = std::numeric_limits<double>::quiet_NaN();  // same-type pairs
  double tau2 = std::numeric_limits<double>::quiet_NaN();  // different-type pairs
  double sigma1 = std::numeric_limits<double>::quiet_NaN();
  double sigma2 = std::numeric_limits<double>::quiet_NaN();
};

/// Planted-partition constants at size n. For K = 1 only tau1 exists
/// (lambda1^t = n); tau2 stays NaN when its equation has no root.
inline GeodesicConstants geodesic_constants(double lambda1, double lambda2, int k, double n) {
  GeodesicConstants c;
  const double l2 = k == 1 ? lambda1 : lambda2;
  c.tau1 = solve_tau(lambda1, l2, k, n, PairType::Within);
  c.sigma1 = c.tau1 / std::log(n);
  if (k > 1) {
    try {
      c.tau2 = solve_tau(lambda1, l2, k, n, PairType::Cross);
      c.sigma2 = c.tau2 / std::log(n);
    } catch (const std::domain_error&) {
    }
  }
  return c;
}

/// Block-constant matrix: sigma1 for same-type pairs, sigma2 otherwise, zero diagonal.
inline Eigen::MatrixXd ideal_distance_matrix(const Labeling& labels, double sigma1, double sigma2) {
  if (!(sigma1 > 0.0 && sigma2 > 0.0)) throw std::invalid_argument("ideal_distance_matrix: sigmas must be positive");
  const auto n = static_cast<Eigen::Index>(labels.size());
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      d(i, j) = i == j ? 0.0 : (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)] ? sigma1 : sigma2);
    }
  }
  return d;
}

/// Kernel of the process conditioned on the giant component:
/// B * (2 rho / K - rho^2 / K^2).
inline Eigen::MatrixXd giant_kernel_adjust(const Eigen::MatrixXd& b, double rho, int k) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("giant_kernel_adjust: rho must lie in [0,1]");
  if (k < 1) throw std::invalid_argument("giant_kernel_adjust: K must be >= 1");
  return b * (2.0 * rho / k - rho * rho / (static_cast<double>(k) * k));
}

// ---------------------------------------------------------------------------
// Multi-type Poisson Galton-Watson process

struct BranchingTrajectory {
  std::vector<std::vector<std::uint64_t>> generations;  // Z_0, Z_1, ...
  std::uint32_t root_type = 1;                          // 1-based
  bool truncated = false;                               // the population cap stopped the run while alive

  bool extinct() const {
    if (generations.empty()) return true;
    for (auto z : generations.back()) {
      if (z) return false;
    }
    return true;
  }
};

inline std::uint64_t population(const std::vector<std::uint64_t>& z) {
  std::uint64_t s = 0;
  for (auto v : z) s += v;
  return s;
}

/// One run from a single root particle. A type-a particle has Poisson(M_ab)
/// type-b children; the Z_t(a) particles of type a together have
/// Poisson(Z_t(a) M_ab) type-b children. Stops at extinction, after
/// `max_generations` generations, or once the population exceeds
/// `max_population`; only the population cap sets `truncated`, since every
/// recorded generation is exact otherwise.
inline BranchingTrajectory simulate_mtgw(const Eigen::MatrixXd& mean_offspring, std::uint32_t root_type,
                                         std::size_t max_generations, std::uint64_t max_population, Rng& rng) {
  const auto k = mean_offspring.rows();
  if (root_type < 1 || root_type > static_cast<std::uint32_t>(k)) throw std::invalid_argument("simulate_mtgw: bad root type");
  BranchingTrajectory traj;
  traj.root_type = root_type;
  std::vector<std::uint64_t> z(static_cast<std::size_t>(k), 0);
  z[root_type - 1] = 1;
  traj.generations.push_back(z);
  for (std::size_t t = 0; t < max_generations; ++t) {
    if (population(z) == 0) return traj;
    if (population(z) > max_population) {
      traj.truncated = true;
      return traj;
    }
    std::vector<std::uint64_t> next(static_cast<std::size_t>(k), 0);
    for (Eigen::Index a = 0; a < k; ++a) {
      if (z[static_cast<std::size_t>(a)] == 0) continue;
      for (Eigen::Index b = 0; b < k; ++b) {
        next[static_cast<std::size_t>(b)] += rng.poisson(static_cast<double>(z[static_cast<std::size_t>(a)]) * mean_offspring(a, b));
      }
    }
    z = std::move(next);
    traj.generations.push_back(z);
  }
  return traj;
}

/// Root type drawn from pi; substream keyed by `seed` alone.
inline BranchingTrajectory simulate_mtgw(const Eigen::MatrixXd& b, const std::vector<double>& pi, std::size_t max_generations,
                                         std::uint64_t max_population, std::uint64_t seed) {
  check_model(b, pi);
  Rng rng(seed, "mtgw");
  double u = rng.uniform();
  std::uint32_t root = static_cast<std::uint32_t>(pi.size());
  for (std::size_t a = 0; a < pi.size(); ++a) {
    if (u < pi[a]) {
      root = static_cast<std::uint32_t>(a + 1);
      break;
    }
    u -= pi[a];
  }
  const auto sp = spectral_params(b, pi);
  return simulate_mtgw(sp.mean_offspring, root, max_generations, max_population, rng);
}

struct SurvivalEstimate {
  double probability = 0.0;
  double standard_error = 0.0;
  std::size_t reps = 0;
};

/// Monte-Carlo survival probability: a run survives if it is alive after
/// `horizon` generations or its population exceeds `escape`.
inline SurvivalEstimate survival_probability(const Eigen::MatrixXd& b, const std::vector<double>& pi, std::size_t reps,
                                             std::size_t horizon, std::uint64_t seed, std::uint64_t escape = 10000) {
  if (reps < 1) throw std::invalid_argument("survival_probability: reps must be >= 1");
  check_model(b, pi);
  const Eigen::MatrixXd m = spectral_params(b, pi).mean_offspring;
  std::size_t survived = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rng(seed, "survival", r);
    double u = rng.uniform();
    std::uint32_t root = static_cast<std::uint32_t>(pi.size());
    for (std::size_t a = 0; a < pi.size(); ++a) {
      if (u < pi[a]) {
        root = static_cast<std::uint32_t>(a + 1);
        break;
      }
      u -= pi[a];
    }
    const auto traj = simulate_mtgw(m, root, horizon, escape, rng);
    if (!traj.extinct()) ++survived;
  }
  SurvivalEstimate est;
  est.reps = reps;
  est.probability = static_cast<double>(survived) / static_cast<double>(reps);
  est.standard_error = std::sqrt(est.probability * (1.0 - est.probability) / static_cast<double>(reps));
  return est;
}

inline double project(const Eigen::MatrixXd& phi, std::size_t k, const std::vector<std::uint64_t>& z) {
  double s = 0.0;
  for (std::size_t a = 0; a < z.size(); ++a) s += phi(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(k)) * static_cast<double>(z[a]);
  return s;
}

/// |<phi_k, Z_s> - lambda_k^(s-t) <phi_k, Z_t>| / ((t+1)^2 lambda1^(s/2)), k 1-based.
inline double martingale_deviation(const BranchingTrajectory& traj, const SpectralParams& params, std::size_t k,
                                   std::size_t s, std::size_t t) {
  if (traj.truncated) throw std::invalid_argument("martingale_deviation: trajectory was truncated");
  if (k < 1 || k > static_cast<std::size_t>(params.lambdas.size())) throw std::invalid_argument("martingale_deviation: k out of range");
  if (!(s < t)) throw std::invalid_argument("martingale_deviation: requires s < t");
  // an extinct run stays at Z = 0 after its last recorded generation
  const std::vector<std::uint64_t> zero(traj.generations.empty() ? 0 : traj.generations[0].size(), 0);
  auto gen = [&](std::size_t i) -> const std::vector<std::uint64_t>& {
    if (i < traj.generations.size()) return traj.generations[i];
    if (!traj.extinct()) throw std::invalid_argument("martingale_deviation: generation index beyond trajectory");
    return zero;
  };
  const double lk = params.lambdas[static_cast<Eigen::Index>(k - 1)];
  const double l1 = params.lambdas[0];
  const double zs = project(params.phi, k - 1, gen(s));
  const double zt = project(params.phi, k - 1, gen(t));
  const double dev = std::fabs(zs - std::pow(lk, static_cast<double>(s) - static_cast<double>(t)) * zt);
  const double tt = static_cast<double>(t) + 1.0;
  return dev / (tt * tt * std::pow(l1, 0.5 * static_cast<double>(s)));
}

// ---------------------------------------------------------------------------
// Davis-Kahan

struct DavisKahan {
  double bound = 0.0;     // sqrt(2) ||H - H'||_F / delta
  double achieved = 0.0;  // min over orthogonal R of ||W R - W'||_F
  double delta = 0.0;
};

/// min_R ||W R - W'||_F over orthogonal R (orthogonal Procrustes via SVD).
inline double procrustes_distance(const Eigen::MatrixXd& w, const Eigen::MatrixXd& w_prime) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(w.transpose() * w_prime, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::MatrixXd r = svd.matrixU() * svd.matrixV().transpose();
  return (w * r - w_prime).norm();
}

/// Subspaces of the K eigenvalues largest in |lambda|; delta is the gap
/// |lambda_K| - |lambda_K+1| of H, which never exceeds the distance between
/// the selected and the remaining eigenvalues.
inline DavisKahan davis_kahan_bound(const Eigen::MatrixXd& h, const Eigen::MatrixXd& h_prime, std::size_t k) {
  if (h.rows() != h.cols() || h_prime.rows() != h.rows() || h_prime.cols() != h.cols()) {
    throw std::invalid_argument("davis_kahan_bound: matrices must be square of equal size");
  }
  if (k < 1 || k >= static_cast<std::size_t>(h.rows())) throw std::invalid_argument("davis_kahan_bound: need 1 <= K < n");
  const auto n = static_cast<std::size_t>(h.rows());
  const EigenPairs e = dense_eigen(h, n, EigenOrder::LargestMagnitude);
  const EigenPairs e_prime = dense_eigen(h_prime, k, EigenOrder::LargestMagnitude);
  DavisKahan out;
  out.delta = std::fabs(e.values[static_cast<Eigen::Index>(k - 1)]) - std::fabs(e.values[static_cast<Eigen::Index>(k)]);
  const double pert = (h - h_prime).norm();
  if (!(out.delta > 0.0)) throw std::domain_error("davis_kahan_bound: delta = 0, top-K eigenspace not separated");
  out.bound = std::sqrt(2.0) * pert / out.delta;
  out.achieved = procrustes_distance(e.vectors.leftCols(static_cast<Eigen::Index>(k)), e_prime.vectors);
  return out;
}

}  // namespace geosbm
