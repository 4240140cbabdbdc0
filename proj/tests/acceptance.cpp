// Acceptance run: one PASS/FAIL line per criterion. Exit status is 1 when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geosbm/clustering.hpp"
#include "geosbm/embedding.hpp"
#include "geosbm/geodesic.hpp"
#include "geosbm/harness.hpp"
#include "geosbm/parallel.hpp"
#include "geosbm/pipeline.hpp"
#include "geosbm/sbm.hpp"
#include "geosbm/theory.hpp"
#include "oracles.hpp"

using namespace geosbm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("%s %d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string num(double v) { return fmt_num(v); }

std::vector<SweepRecord> g_sweep;  // shared by criteria 1 and 2
ExperimentConfig g_sweep_config;

double sweep_median(double ratio) {
  std::vector<double> v;
  for (const auto& r : g_sweep)
    if (r.ratio == ratio && !r.skipped) v.push_back(r.misclassification);
  return median(v);
}

bool sweep_skipped(double ratio) {
  for (const auto& r : g_sweep)
    if (r.ratio == ratio && r.skipped) return true;
  return false;
}

Outcome phase_transition() {
  g_sweep_config.n = 10000;
  g_sweep_config.k = 2;
  g_sweep_config.alpha = 8;
  g_sweep_config.ratios = {0.5, 1.5, 3, 4.5, 8};
  g_sweep_config.reps = 10;
  g_sweep_config.base_seed = 101;
  g_sweep_config.threads = default_threads();
  g_sweep = run_sweep(g_sweep_config);
  const double m45 = sweep_median(4.5), m15 = sweep_median(1.5), m05 = sweep_median(0.5);
  const bool ok = m45 < 0.25 && m15 < 0.45 && m05 >= 0.40 && m05 <= 0.50;
  return {ok, "median r=4.5 " + num(m45) + " (<0.25), r=1.5 " + num(m15) + " (<0.45), r=0.5 " + num(m05) +
                  " (in [0.40,0.50])"};
}

Outcome monotone_trend() {
  if (g_sweep.empty()) return {false, "sweep from criterion 1 unavailable"};
  std::string detail;
  bool ok = true;
  double previous = 1.0;
  for (double r : {1.5, 3.0, 4.5, 8.0}) {
    if (sweep_skipped(r)) {
      detail += " r=" + num(r) + " infeasible (q = alpha - sqrt(r alpha) = " +
                num(g_sweep_config.alpha - std::sqrt(r * g_sweep_config.alpha)) + " <= 0)";
      ok = false;
      continue;
    }
    const double m = sweep_median(r);
    detail += " r=" + num(r) + " " + num(m);
    if (m > previous) ok = false;
    previous = m;
  }
  if (!sweep_skipped(8.0) && !(sweep_median(8.0) < 0.10)) ok = false;
  return {ok, "medians" + detail + "; need non-increasing and r=8 < 0.10"};
}

Outcome concentration() {
  ExperimentConfig c;
  c.k = 2;
  c.p = 14;
  c.q = 2;
  c.n_grid = {5000, 10000, 20000};
  c.reps = 5;
  c.base_seed = 202;
  c.threads = default_threads();
  const auto records = run_concentration(c);
  std::vector<double> gaps;
  double outside20 = 0;
  for (auto n : c.n_grid) {
    std::vector<double> g, o;
    for (const auto& r : records) {
      if (r.n != n) continue;
      g.push_back(r.frobenius_gap_over_n);
      o.push_back(r.outside_20);
    }
    gaps.push_back(median(g));
    if (n == 20000) outside20 = median(o);
  }
  const bool decreasing = gaps[0] > gaps[1] && gaps[1] > gaps[2];
  const bool tight = outside20 < 0.1;
  return {decreasing && tight, "(a) median gap/n " + num(gaps[0]) + " > " + num(gaps[1]) + " > " + num(gaps[2]) +
                                   (decreasing ? " holds" : " violated") + "; (b) outside (1+-0.2)tau at n=2e4 " +
                                   num(outside20) + " (<0.1)"};
}

Outcome giant_component_law() {
  const Eigen::MatrixXd b = planted_partition_kernel(14, 2, 2);
  const std::vector<double> pi{0.5, 0.5};
  std::string detail;
  bool ok = true;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto sample = sample_sbm(planted_partition(50000, 2, 14, 2), derive_seed(303, "graph", s));
    const auto comps = connected_components(sample.graph);
    const double frac = static_cast<double>(comps.sizes[comps.giant_index]) / 50000.0;
    const auto rho = survival_probability(b, pi, 10000, 50, derive_seed(303, "survival", s));
    const double diff = std::fabs(frac - rho.probability);
    if (!(diff < 0.02)) ok = false;
    detail += (s ? ", " : "") + num(diff);
  }
  return {ok, "|n_C/n - rho_hat| per seed: " + detail + " (each < 0.02)"};
}

Outcome apsp_oracle() {
  Rng rng(404);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(59);
    const double p = 0.02 + 0.3 * rng.uniform();
    const auto g = oracle::random_graph(n, p, rng);
    const auto fw = oracle::floyd_warshall(g);
    // cap well above n so no finite distance is cut off
    const auto d = apsp(g, 100.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const std::int64_t expect = fw[i][j] == oracle::kUnreachable ? static_cast<std::int64_t>(n + 1) : fw[i][j];
        if (static_cast<std::int64_t>(d(i, j)) != expect) ++mismatches;
      }
    }
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatching entries over 200 graphs"};
}

Outcome eigensolver_oracle() {
  Rng rng(505);
  double worst_residual = 0, worst_value = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<Eigen::Index>(4 + rng.below(61));
    const Eigen::MatrixXd m = oracle::random_symmetric(n, rng);
    const std::size_t k = 1 + rng.below(4);
    EigenOptions o;
    o.dense_threshold = 0;  // force the Krylov path
    o.seed = static_cast<std::uint64_t>(trial);
    const auto e = top_k_eigen(m, k, o);
    const auto expect = oracle::by_magnitude(oracle::jacobi_eigen(m).values);
    for (std::size_t i = 0; i < k; ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      worst_residual = std::max(worst_residual, (m * e.vectors.col(c) - e.values[c] * e.vectors.col(c)).norm());
      worst_value = std::max(worst_value, std::fabs(e.values[c] - expect[i]));
    }
  }
  double worst_ideal = 0;
  for (int k = 1; k <= 4; ++k) {
    const std::size_t n = 120;
    std::vector<std::uint32_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::uint32_t>(1 + i % static_cast<std::size_t>(k));
    const double s1 = 2.5, s2 = 3.25;
    const Eigen::MatrixXd d = ideal_distance_matrix(Labeling(labels, static_cast<std::uint32_t>(k)), s1, s2) +
                              s1 * Eigen::MatrixXd::Identity(n, n);
    const auto e = top_k_eigen(d, static_cast<std::size_t>(k));
    const double nk = static_cast<double>(n) / k;
    const double lead = nk * (s1 + (k - 1) * s2);
    const double rest = nk * (s1 - s2);
    worst_ideal = std::max(worst_ideal, std::fabs(e.values[0] - lead));
    for (int i = 1; i < k; ++i) worst_ideal = std::max(worst_ideal, std::fabs(e.values[i] - rest));
    // the remaining spectrum is zero
    const auto all = oracle::jacobi_eigen(d).values;
    std::vector<double> mags(all.data(), all.data() + all.size());
    std::sort(mags.begin(), mags.end(), [](double a, double b) { return std::fabs(a) > std::fabs(b); });
    for (std::size_t i = static_cast<std::size_t>(k); i < n; ++i) worst_ideal = std::max(worst_ideal, std::fabs(mags[i]));
  }
  const bool ok = worst_residual < 1e-8 && worst_value < 1e-8 && worst_ideal < 1e-8;
  return {ok, "max residual " + num(worst_residual) + ", max eigenvalue error " + num(worst_value) +
                  ", ideal spectrum error " + num(worst_ideal) + " (all < 1e-8)"};
}

Outcome davis_kahan() {
  Rng rng(606);
  int triples = 0, violations = 0, attempts = 0;
  double tightest = 0;
  while (triples < 100 && attempts < 10000) {
    ++attempts;
    const auto n = static_cast<Eigen::Index>(8 + rng.below(33));
    const std::size_t k = 1 + rng.below(4);
    Eigen::MatrixXd h = oracle::random_symmetric(n, rng);
    const Eigen::MatrixXd e = (0.01 + 0.5 * rng.uniform()) * oracle::random_symmetric(n, rng);
    DavisKahan r;
    try {
      r = davis_kahan_bound(h, h + e, k);
    } catch (const std::domain_error&) {
      continue;
    }
    if (!(r.delta > 0.1)) continue;
    ++triples;
    if (r.achieved > r.bound) ++violations;
    tightest = std::max(tightest, r.achieved / r.bound);
  }
  return {triples == 100 && violations == 0, std::to_string(violations) + " violations on " + std::to_string(triples) +
                                                 " triples; largest achieved/bound " + num(tightest)};
}

Outcome branching_moments() {
  Eigen::MatrixXd b(2, 2);
  b << 3, 1, 1, 2;
  const std::vector<double> pi{0.6, 0.4};
  const Eigen::MatrixXd m = spectral_params(b, pi).mean_offspring;
  const int reps = 10000, horizon = 6;
  std::vector<Eigen::Vector2d> sum(horizon + 1, Eigen::Vector2d::Zero()), sq(horizon + 1, Eigen::Vector2d::Zero());
  for (int r = 0; r < reps; ++r) {
    Rng rng(707, "moments", static_cast<std::uint64_t>(r));
    const auto traj = simulate_mtgw(m, 1, horizon, 1ull << 50, rng);
    for (int t = 0; t <= horizon; ++t) {
      Eigen::Vector2d z = Eigen::Vector2d::Zero();
      if (t < static_cast<int>(traj.generations.size())) {
        z << static_cast<double>(traj.generations[t][0]), static_cast<double>(traj.generations[t][1]);
      }
      sum[t] += z;
      sq[t] += z.cwiseProduct(z);
    }
  }
  bool ok = true;
  double worst = 0;
  Eigen::Vector2d expect(1, 0);
  for (int t = 0; t <= horizon; ++t) {
    const Eigen::Vector2d mean = sum[t] / reps;
    for (int a = 0; a < 2; ++a) {
      const double se = std::sqrt(std::max(sq[t][a] / reps - mean[a] * mean[a], 0.0) / reps);
      const double dev = std::fabs(mean[a] - expect[a]);
      if (se > 0) worst = std::max(worst, dev / se);
      if (dev > 3 * se + 1e-12) ok = false;
    }
    expect = m.transpose() * expect;
  }
  std::string surv;
  for (double alpha : {1.5, 2.0, 4.0}) {
    const auto est = survival_probability(Eigen::MatrixXd::Constant(1, 1, alpha), {1.0}, 10000, 50,
                                          derive_seed(708, "alpha", static_cast<std::uint64_t>(alpha * 10)));
    const double rho = oracle::poisson_survival(alpha);
    const double z = std::fabs(est.probability - rho) / est.standard_error;
    if (!(z <= 2)) ok = false;
    surv += " alpha=" + num(alpha) + " " + num(est.probability) + " vs " + num(rho) + " (" + num(z) + " se)";
  }
  return {ok, "E[Z_t] worst deviation " + num(worst) + " se (<= 3);" + surv + " (<= 2 se)"};
}

Outcome alignment() {
  Rng rng(808);
  int disagreements = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 1 + rng.below(6);
    Confusion c(k, std::vector<std::int64_t>(k));
    for (auto& row : c)
      for (auto& v : row) v = static_cast<std::int64_t>(rng.below(trial % 3 == 0 ? 4 : 500));
    if (best_alignment_hungarian(c) != best_alignment_exhaustive(c)) ++disagreements;
  }
  return {disagreements == 0, std::to_string(disagreements) + " disagreements on 500 matrices"};
}

Outcome determinism(const std::string& cli) {
  if (cli.empty()) return {false, "no --cli given"};
  const auto dir = std::filesystem::temp_directory_path() / "geosbm_acceptance";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::string args = " sweep --n 1500 --k 2 --alpha 8 --ratio 1.5,4.5 --reps 4 --restarts 5 --seed 909 --out ";
  std::vector<std::string> outputs;
  int run = 0;
  for (const char* threads : {"1", "1", "8", "8"}) {
    const auto prefix = (dir / ("run" + std::to_string(run++))).string();
    const std::string cmd = std::string("GEOSBM_THREADS=") + threads + " " + cli + args + prefix + " 2>/dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "sweep command failed: " + cmd};
    std::ifstream in(prefix + ".csv", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    outputs.push_back(ss.str());
  }
  bool same = !outputs[0].empty();
  for (const auto& o : outputs) same = same && o == outputs[0];
  return {same, std::string(same ? "identical" : "differing") + " CSV across 2 runs x threads {1, 8} (" +
                    std::to_string(outputs[0].size()) + " bytes)"};
}

Outcome baseline_sanity() {
  std::vector<double> adj, geo;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto sample = sample_sbm(planted_partition(2000, 2, 60, 20), derive_seed(1111, "graph", s));
    DetectOptions o;
    o.seed = derive_seed(1111, "detect", s);
    o.threads = default_threads();
    for (auto method : {SpectralMethod::Adjacency, SpectralMethod::Geodesic}) {
      o.method = method;
      const auto r = detect_communities(sample.graph, 2, o);
      const double rate = misclassification_rate(sample.labels.restrict_to(r.index_map), r.labels);
      (method == SpectralMethod::Adjacency ? adj : geo).push_back(rate);
    }
  }
  const double ma = median(adj), mg = median(geo);
  return {ma < 0.05 && mg < 0.10, "median adjacency " + num(ma) + " (<0.05), geodesic " + num(mg) + " (<0.10)"};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) {
      cli = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string item; std::getline(ss, item, ',');) only.push_back(std::stoi(item));
    } else {
      std::cerr << "usage: acceptance [--cli PATH] [--only 1,2,...]\n";
      return 1;
    }
  }
  auto want = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  if (want(1) || want(2)) report(1, "phase transition", phase_transition);
  if (want(2)) report(2, "monotone trend", monotone_trend);
  if (want(3)) report(3, "geodesic concentration", concentration);
  if (want(4)) report(4, "giant component law", giant_component_law);
  if (want(5)) report(5, "apsp oracle", apsp_oracle);
  if (want(6)) report(6, "eigensolver oracle", eigensolver_oracle);
  if (want(7)) report(7, "davis-kahan", davis_kahan);
  if (want(8)) report(8, "branching moments", branching_moments);
  if (want(9)) report(9, "alignment", alignment);
  if (want(10)) report(10, "determinism", [&] { return determinism(cli); });
  if (want(11)) report(11, "baseline sanity", baseline_sanity);
  std::printf("%d criteria failed\n", failures);
  return failures ? 1 : 0;
}
