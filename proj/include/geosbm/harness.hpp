#pragma once

// Seeded experiments: ratio sweeps at fixed average degree and geodesic
// concentration checks. Every rep draws its graph from substream
// ("rep", grid index, rep index) of the base seed, so outputs depend only on
// the configuration.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "geosbm/geodesic.hpp"
#include "geosbm/pipeline.hpp"
#include "geosbm/sbm.hpp"
#include "geosbm/theory.hpp"

namespace geosbm {

struct ExperimentConfig {
  std::size_t n = 10000;
  int k = 2;
  double p = 0.0;  // planted-partition rates for fixed-(p, q) experiments
  double q = 0.0;
  double alpha = 8.0;               // average degree held fixed by sweeps
  std::vector<double> ratios;       // sweep grid of threshold ratios
  std::vector<std::size_t> n_grid;  // concentration grid (empty -> {n})
  DetectOptions detect;
  std::size_t reps = 10;
  std::uint64_t base_seed = 1;
  std::size_t threads = 1;  // rep-level workers

  void validate() const {
    if (n < 1) throw std::invalid_argument("config: n must be positive");
    if (k < 1) throw std::invalid_argument("config: K must be positive");
    if (reps < 1) throw std::invalid_argument("config: reps must be >= 1");
    if (detect.restarts < 1) throw std::invalid_argument("config: restarts must be >= 1");
    if (!(detect.cap_factor > 0.0)) throw std::invalid_argument("config: cap factor must be positive");
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"n", c.n},
          {"k", c.k},
          {"p", c.p},
          {"q", c.q},
          {"alpha", c.alpha},
          {"ratios", c.ratios},
          {"n_grid", c.n_grid},
          {"method", std::string(to_string(c.detect.method))},
          {"clusterer", std::string(to_string(c.detect.clusterer))},
          {"normalize", std::string(to_string(c.detect.normalize))},
          {"cap_factor", c.detect.cap_factor},
          {"restarts", c.detect.restarts},
          {"reps", c.reps},
          {"seed", c.base_seed}};
}

struct PlantedRates {
  double p = 0.0;
  double q = 0.0;
};

/// (p, q) with (p + (K-1) q)/K = alpha and threshold_ratio(p, q, K) = r, that is
/// (p - q)^2 = r K^2 alpha. Empty when q <= 0.
inline std::optional<PlantedRates> derive_pq(double ratio, double alpha, int k) {
  if (!(ratio > 0.0)) throw std::invalid_argument("derive_pq: ratio must be > 0 (ratio 0 means p = q)");
  if (!(alpha > 0.0)) throw std::invalid_argument("derive_pq: alpha must be > 0");
  if (k < 2) throw std::invalid_argument("derive_pq: needs K >= 2");
  const double gap = k * std::sqrt(ratio * alpha);
  const double q = alpha - gap / k;
  if (!(q > 0.0)) return std::nullopt;
  return PlantedRates{q + gap, q};
}

/// Planted partition at rho_n = 1/n; for K = 1 the kernel is [[p]] and q is ignored.
inline BlockModelParams planted_model(std::size_t n, int k, double p, double q) {
  if (k != 1) return planted_partition(n, k, p, q);
  if (!(p > 0.0)) throw std::invalid_argument("planted_model: requires p > 0");
  BlockModelParams params;
  params.pi = {1.0};
  params.kernel = Eigen::MatrixXd::Constant(1, 1, p);
  params.rho_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  params.n = n;
  return params;
}

inline double quantile(std::vector<double> v, double prob) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = prob * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}
inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

/// Formats doubles identically on every run: 10 significant digits, "nan".
inline std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream ss;
  ss << std::setprecision(10) << v;
  return ss.str();
}

/// Runs job(i) for i in [0, count) on `threads` workers and hands results to
/// sink in index order as soon as each prefix is complete.
template <typename Result, typename Job, typename Sink>
void ordered_pool(std::size_t count, std::size_t threads, Job&& job, Sink&& sink) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
  std::vector<std::optional<Result>> done(count);
  std::size_t next_emit = 0;
  std::mutex mutex;
  std::atomic<std::size_t> next_job{0};
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next_job.fetch_add(1);
      if (i >= count) return;
      std::optional<Result> r;
      try {
        r = job(i);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!error) error = std::current_exception();
        return;
      }
      std::lock_guard lock(mutex);
      done[i] = std::move(r);
      while (next_emit < count && done[next_emit]) {
        sink(*done[next_emit]);
        done[next_emit].reset();
        ++next_emit;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepRecord {
  std::size_t grid_index = 0;
  double ratio = 0.0;
  double p = 0.0;
  double q = 0.0;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  bool skipped = false;
  double misclassification = std::numeric_limits<double>::quiet_NaN();
  double giant_fraction = std::numeric_limits<double>::quiet_NaN();
  double within_mean = std::numeric_limits<double>::quiet_NaN();
  double cross_mean = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
};

inline std::string sweep_csv_header() {
  return "n,k,alpha,ratio,p,q,method,clusterer,normalize,cap_factor,restarts,rep,seed,status,"
         "misclassification,giant_fraction,within_mean,cross_mean";
}

/// One CSV row; wall time is left out so rows are reproducible byte for byte.
inline std::string sweep_csv_row(const ExperimentConfig& c, const SweepRecord& r) {
  std::ostringstream ss;
  ss << c.n << ',' << c.k << ',' << fmt_num(c.alpha) << ',' << fmt_num(r.ratio) << ',' << fmt_num(r.p) << ','
     << fmt_num(r.q) << ',' << to_string(c.detect.method) << ',' << to_string(c.detect.clusterer) << ','
     << to_string(c.detect.normalize) << ',' << fmt_num(c.detect.cap_factor) << ',' << c.detect.restarts << ','
     << r.rep << ',' << r.seed << ',' << (r.skipped ? "skipped_infeasible_q" : "ok") << ','
     << fmt_num(r.misclassification) << ',' << fmt_num(r.giant_fraction) << ',' << fmt_num(r.within_mean) << ','
     << fmt_num(r.cross_mean);
  return ss.str();
}

/// One rep of the planted-partition experiment: sample, detect on the giant
/// component, score against the true labels of the giant vertices.
inline SweepRecord run_rep(const ExperimentConfig& c, double p, double q, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  SweepRecord r;
  r.p = p;
  r.q = q;
  r.seed = seed;
  const SbmSample sample = sample_sbm(planted_partition(c.n, c.k, p, q), seed);
  DetectOptions opts = c.detect;
  opts.seed = derive_seed(seed, "detect");
  opts.keep_distances = true;
  const DetectionResult det = detect_communities(sample.graph, static_cast<std::size_t>(c.k), opts);
  const Labeling truth = sample.labels.restrict_to(det.index_map);
  r.misclassification = misclassification_rate(truth, det.labels);
  r.giant_fraction = static_cast<double>(det.index_map.size()) / static_cast<double>(c.n);
  const auto acc = block_accumulators(*det.distances, truth);
  PairAccumulator within;
  PairAccumulator cross;
  const std::size_t k = truth.k();
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) (a == b ? within : cross).merge(acc[a * k + b]);
  }
  r.within_mean = within.stats().mean;
  r.cross_mean = cross.count ? cross.stats().mean : std::numeric_limits<double>::quiet_NaN();
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Emits one record per (ratio, rep) in grid-then-rep order. Infeasible
/// ratios (q <= 0 at the requested alpha) yield a single skipped record.
inline std::vector<SweepRecord> run_sweep(const ExperimentConfig& c,
                                          const std::function<void(const SweepRecord&)>& emit = {}) {
  c.validate();
  if (c.ratios.empty()) throw std::invalid_argument("run_sweep: ratio grid is empty");
  struct Task {
    std::size_t grid_index;
    double ratio;
    std::optional<PlantedRates> rates;
    std::size_t rep;
  };
  std::vector<Task> tasks;
  for (std::size_t gi = 0; gi < c.ratios.size(); ++gi) {
    const auto rates = derive_pq(c.ratios[gi], c.alpha, c.k);
    if (!rates) {
      tasks.push_back({gi, c.ratios[gi], std::nullopt, 0});
      continue;
    }
    for (std::size_t rep = 0; rep < c.reps; ++rep) tasks.push_back({gi, c.ratios[gi], rates, rep});
  }
  std::vector<SweepRecord> out;
  ExperimentConfig inner = c;
  inner.detect.threads = c.threads > 1 ? 1 : c.detect.threads;
  ordered_pool<SweepRecord>(
      tasks.size(), c.threads,
      [&](std::size_t i) {
        const Task& t = tasks[i];
        SweepRecord r;
        if (t.rates) {
          r = run_rep(inner, t.rates->p, t.rates->q, derive_seed(c.base_seed, "rep", t.grid_index * 1000003ULL + t.rep));
        } else {
          r.skipped = true;
        }
        r.grid_index = t.grid_index;
        r.ratio = t.ratio;
        r.rep = t.rep;
        return r;
      },
      [&](const SweepRecord& r) {
        out.push_back(r);
        if (emit) emit(r);
      });
  return out;
}

inline nlohmann::json sweep_summary(const ExperimentConfig& c, const std::vector<SweepRecord>& records) {
  nlohmann::json j;
  j["config"] = to_json(c);
  j["grid"] = nlohmann::json::array();
  for (std::size_t gi = 0; gi < c.ratios.size(); ++gi) {
    std::vector<double> rates;
    std::vector<double> giant;
    std::vector<double> walls;
    bool skipped = false;
    double p = 0.0;
    double q = 0.0;
    for (const auto& r : records) {
      if (r.grid_index != gi) continue;
      if (r.skipped) {
        skipped = true;
        continue;
      }
      rates.push_back(r.misclassification);
      giant.push_back(r.giant_fraction);
      walls.push_back(r.wall_seconds);
      p = r.p;
      q = r.q;
    }
    nlohmann::json g{{"ratio", c.ratios[gi]}, {"skipped", skipped}};
    if (!skipped) {
      g["p"] = p;
      g["q"] = q;
      g["median_misclassification"] = median(rates);
      g["iqr_misclassification"] = {quantile(rates, 0.25), quantile(rates, 0.75)};
      g["median_giant_fraction"] = median(giant);
      g["wall_seconds"] = walls;
    }
    j["grid"].push_back(g);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Concentration

struct ConcentrationRecord {
  std::size_t n = 0;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  double giant_fraction = 0.0;
  double within_mean_over_log = std::numeric_limits<double>::quiet_NaN();
  double cross_mean_over_log = std::numeric_limits<double>::quiet_NaN();
  double sigma1 = std::numeric_limits<double>::quiet_NaN();
  double sigma2 = std::numeric_limits<double>::quiet_NaN();
  bool swapped = false;  // true when within pairs were matched to sigma2
  double frobenius_gap_over_n = std::numeric_limits<double>::quiet_NaN();
  double outside_10 = std::numeric_limits<double>::quiet_NaN();  // fraction outside (1 +- 0.1) tau
  double outside_20 = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
};

inline std::string concentration_csv_header() {
  return "n,k,p,q,rep,seed,giant_fraction,within_mean_over_log,cross_mean_over_log,sigma1,sigma2,matched_swapped,"
         "frobenius_gap_over_n,outside_0.1,outside_0.2";
}

inline std::string concentration_csv_row(const ExperimentConfig& c, const ConcentrationRecord& r) {
  std::ostringstream ss;
  ss << r.n << ',' << c.k << ',' << fmt_num(c.p) << ',' << fmt_num(c.q) << ',' << r.rep << ',' << r.seed << ','
     << fmt_num(r.giant_fraction) << ',' << fmt_num(r.within_mean_over_log) << ',' << fmt_num(r.cross_mean_over_log)
     << ',' << fmt_num(r.sigma1) << ',' << fmt_num(r.sigma2) << ',' << (r.swapped ? 1 : 0) << ','
     << fmt_num(r.frobenius_gap_over_n) << ',' << fmt_num(r.outside_10) << ',' << fmt_num(r.outside_20);
  return ss.str();
}

/// Compares the giant-component geodesics of one sampled graph with the
/// planted-partition constants. Distances are streamed row by row, so memory
/// stays O(n + m). The within/cross assignment of (sigma1, sigma2) is the one
/// with the smaller Frobenius gap; for K = 1 every pair is a within pair.
inline ConcentrationRecord concentration_rep(const ExperimentConfig& c, std::size_t n, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  if (!(c.p > 0.0) || (c.k > 1 && !(c.q > 0.0))) {
    throw std::invalid_argument("concentration: p and q must be positive");
  }
  const BlockModelParams params = planted_model(n, c.k, c.p, c.q);
  const SbmSample sample = sample_sbm(params, seed);
  const Subgraph giant = giant_component(sample.graph);
  const Labeling truth = sample.labels.restrict_to(giant.original_ids);

  const double lambda1 = (c.p + (c.k - 1) * c.q) / c.k;
  const double lambda2 = (c.p - c.q) / c.k;
  const double nn = static_cast<double>(n);
  const double log_n = std::log(nn);
  const GeodesicConstants gc = geodesic_constants(lambda1, lambda2, c.k, nn);

  ConcentrationRecord r;
  r.n = n;
  r.seed = seed;
  r.giant_fraction = static_cast<double>(giant.graph.n()) / nn;
  r.sigma1 = gc.sigma1;
  r.sigma2 = gc.sigma2;

  const bool has_cross = c.k > 1 && std::isfinite(gc.tau2);
  // assignment 0: within -> tau1, cross -> tau2; assignment 1: swapped
  const double tau_within[2] = {gc.tau1, has_cross ? gc.tau2 : gc.tau1};
  const double tau_cross[2] = {has_cross ? gc.tau2 : gc.tau1, gc.tau1};
  double frob[2] = {0.0, 0.0};
  std::uint64_t out10[2] = {0, 0};
  std::uint64_t out20[2] = {0, 0};
  std::uint64_t finite_pairs = 0;
  PairAccumulator within;
  PairAccumulator cross;
  const std::uint32_t cap = distance_cap(giant.graph.n(), c.detect.cap_factor);
  const std::size_t nc = giant.graph.n();
  for_each_distance_row(giant.graph, cap, [&](std::size_t i, std::span<const std::uint32_t> row) {
    const std::uint32_t sentinel = static_cast<std::uint32_t>(nc + 1);
    for (std::size_t j = i + 1; j < nc; ++j) {
      const bool same = truth[i] == truth[j];
      const double d = row[j];
      for (int a = 0; a < 2; ++a) {
        const double tau = same ? tau_within[a] : tau_cross[a];
        const double diff = d / log_n - tau / log_n;
        frob[a] += 2.0 * diff * diff;  // (i, j) and (j, i)
        if (row[j] != sentinel) {
          if (std::fabs(d - tau) > 0.1 * tau) ++out10[a];
          if (std::fabs(d - tau) > 0.2 * tau) ++out20[a];
        }
      }
      if (row[j] == sentinel) continue;
      ++finite_pairs;
      (same ? within : cross).add(row[j]);
    }
  });
  const int best = (has_cross && frob[1] < frob[0]) ? 1 : 0;
  r.swapped = best == 1;
  r.frobenius_gap_over_n = std::sqrt(frob[best]) / static_cast<double>(nc);
  if (finite_pairs) {
    r.outside_10 = static_cast<double>(out10[best]) / static_cast<double>(finite_pairs);
    r.outside_20 = static_cast<double>(out20[best]) / static_cast<double>(finite_pairs);
  }
  if (within.count) r.within_mean_over_log = within.stats().mean / log_n;
  if (cross.count) r.cross_mean_over_log = cross.stats().mean / log_n;
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// For each n in the grid, `reps` records in (n, rep) order.
inline std::vector<ConcentrationRecord> run_concentration(
    const ExperimentConfig& c, const std::function<void(const ConcentrationRecord&)>& emit = {}) {
  c.validate();
  if (c.k > 1 && !(c.p > c.q)) throw std::invalid_argument("run_concentration: requires p > q");
  const std::vector<std::size_t> grid = c.n_grid.empty() ? std::vector<std::size_t>{c.n} : c.n_grid;
  std::vector<ConcentrationRecord> out;
  ordered_pool<ConcentrationRecord>(
      grid.size() * c.reps, c.threads,
      [&](std::size_t i) {
        const std::size_t gi = i / c.reps;
        const std::size_t rep = i % c.reps;
        auto r = concentration_rep(c, grid[gi], derive_seed(c.base_seed, "concentration", gi * 1000003ULL + rep));
        r.rep = rep;
        return r;
      },
      [&](const ConcentrationRecord& r) {
        out.push_back(r);
        if (emit) emit(r);
      });
  return out;
}

inline nlohmann::json concentration_summary(const ExperimentConfig& c, const std::vector<ConcentrationRecord>& records) {
  nlohmann::json j;
  j["config"] = to_json(c);
  j["grid"] = nlohmann::json::array();
  const std::vector<std::size_t> grid = c.n_grid.empty() ? std::vector<std::size_t>{c.n} : c.n_grid;
  for (auto n : grid) {
    std::vector<double> gap, o10, o20, wm, cm, walls;
    double s1 = 0.0, s2 = 0.0;
    for (const auto& r : records) {
      if (r.n != n) continue;
      gap.push_back(r.frobenius_gap_over_n);
      o10.push_back(r.outside_10);
      o20.push_back(r.outside_20);
      wm.push_back(r.within_mean_over_log);
      cm.push_back(r.cross_mean_over_log);
      walls.push_back(r.wall_seconds);
      s1 = r.sigma1;
      s2 = r.sigma2;
    }
    j["grid"].push_back({{"n", n},
                         {"sigma1", s1},
                         {"sigma2", s2},
                         {"median_within_mean_over_log", median(wm)},
                         {"median_cross_mean_over_log", median(cm)},
                         {"median_frobenius_gap_over_n", median(gap)},
                         {"median_outside_0.1", median(o10)},
                         {"median_outside_0.2", median(o20)},
                         {"wall_seconds", walls}});
  }
  return j;
}

}  // namespace geosbm
