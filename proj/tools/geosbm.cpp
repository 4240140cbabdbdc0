#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "geosbm/geodesic.hpp"
#include "geosbm/graph.hpp"
#include "geosbm/harness.hpp"
#include "geosbm/labeling.hpp"
#include "geosbm/parallel.hpp"
#include "geosbm/pipeline.hpp"
#include "geosbm/sbm.hpp"
#include "geosbm/theory.hpp"

namespace {

using namespace geosbm;

// Bad flag values discovered after parsing; reported with exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::vector<std::size_t> n{10000};
  int k = 2;
  std::optional<double> p;
  std::optional<double> q;
  std::vector<double> ratio;
  double alpha = 8.0;
  std::string method = "geodesic";
  std::string clusterer = "kmeans";
  std::string normalize = "mds";
  double cap_factor = 3.0;
  std::size_t restarts = 20;
  std::size_t reps = 10;
  std::uint64_t seed = 1;
  std::string out;
  std::string input;
  std::string truth;
  std::string embedding_out;
  std::string distances_out;
};

void add_model_flags(CLI::App* cmd, Flags& f, bool n_list) {
  if (n_list) {
    cmd->add_option("--n", f.n, "vertex counts (comma separated)")->delimiter(',');
  } else {
    cmd->add_option("--n", f.n, "vertex count")->expected(1);
  }
  cmd->add_option("--k", f.k, "number of communities");
  cmd->add_option("--p", f.p, "within-community rate (edge probability p/n)");
  cmd->add_option("--q", f.q, "cross-community rate (edge probability q/n)");
}

void add_detect_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--method", f.method)->check(CLI::IsMember({"geodesic", "adjacency", "laplacian", "rw", "sym"}));
  cmd->add_option("--clusterer", f.clusterer)->check(CLI::IsMember({"kmeans", "gmm"}));
  cmd->add_option("--normalize", f.normalize)->check(CLI::IsMember({"mds", "raw"}));
  cmd->add_option("--cap-factor", f.cap_factor, "distance cap is ceil(cap_factor * ln n)");
  cmd->add_option("--restarts", f.restarts, "k-means restarts");
}

DetectOptions detect_options(const Flags& f) {
  DetectOptions o;
  o.method = parse_method(f.method);
  o.clusterer = parse_clusterer(f.clusterer);
  o.normalize = parse_normalize(f.normalize);
  o.cap_factor = f.cap_factor;
  o.restarts = f.restarts;
  o.seed = f.seed;
  if (!(o.cap_factor > 0.0)) throw UsageError("--cap-factor must be positive");
  if (o.restarts < 1) throw UsageError("--restarts must be >= 1");
  return o;
}

std::size_t single_n(const Flags& f) {
  if (f.n.size() != 1 || f.n[0] < 1) throw UsageError("--n takes one positive integer here");
  return f.n[0];
}

// (p, q) from --p/--q, or from a single --ratio at --alpha.
PlantedRates resolve_rates(const Flags& f) {
  if (f.k == 1) {
    if (!f.p || !(*f.p > 0.0)) throw UsageError("--k 1 needs a positive --p");
    return {*f.p, *f.p};
  }
  if (f.p && f.q) {
    if (f.k > 1 && !(*f.p > *f.q)) throw UsageError("--p must exceed --q");
    if (!(*f.q > 0.0)) throw UsageError("--q must be positive");
    return {*f.p, *f.q};
  }
  if (f.p || f.q) throw UsageError("give both --p and --q, or --ratio with --alpha");
  if (f.ratio.size() != 1) throw UsageError("give --p and --q, or exactly one --ratio");
  if (f.k < 2) throw UsageError("--ratio needs --k >= 2");
  if (!(f.ratio[0] > 0.0)) throw UsageError("--ratio must be positive");
  const auto rates = derive_pq(f.ratio[0], f.alpha, f.k);
  if (!rates) throw UsageError("--ratio " + fmt_num(f.ratio[0]) + " is infeasible at --alpha " + fmt_num(f.alpha));
  return *rates;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

int cmd_generate(const Flags& f) {
  if (f.out.empty()) throw UsageError("generate needs --out <prefix>");
  if (f.k < 1) throw UsageError("--k must be >= 1");
  const std::size_t n = single_n(f);
  const PlantedRates r = resolve_rates(f);
  const SbmSample s = sample_sbm(planted_model(n, f.k, r.p, r.q), f.seed);
  {
    auto out = open_out(f.out + ".edges");
    write_edge_list(out, s.graph);
  }
  {
    auto out = open_out(f.out + ".labels");
    write_labels(out, s.labels);
  }
  std::cerr << "wrote " << f.out << ".edges (" << s.graph.n() << " vertices, " << s.graph.m() << " edges) and "
            << f.out << ".labels\n";
  return 0;
}

int cmd_detect(const Flags& f) {
  if (f.input.empty()) throw UsageError("detect needs an edge list");
  if (f.k < 1) throw UsageError("--k must be >= 1");
  DetectOptions o = detect_options(f);
  o.threads = default_threads();
  o.keep_distances = !f.distances_out.empty();
  const SparseGraph g = load_edge_list(f.input);
  const DetectionResult det = detect_communities(g, static_cast<std::size_t>(f.k), o);

  nlohmann::json summary;
  summary["vertices"] = g.n();
  summary["giant_size"] = det.index_map.size();
  summary["eigenvalues"] = std::vector<double>(det.eigenvalues.data(), det.eigenvalues.data() + det.eigenvalues.size());
  if (!f.truth.empty()) {
    const Labeling truth = read_labels(f.truth, static_cast<std::uint32_t>(f.k));
    if (truth.size() != g.n()) throw std::runtime_error("truth labels do not match the graph size");
    summary["misclassification"] = misclassification_rate(truth.restrict_to(det.index_map), det.labels);
  }
  if (!f.out.empty()) {
    {
      auto out = open_out(f.out);
      write_labels(out, det.labels);
    }
    auto ids = open_out(f.out + ".vertices");
    for (auto v : det.index_map) ids << v << '\n';
  } else {
    write_labels(std::cout, det.labels);
  }
  if (!f.embedding_out.empty()) {
    auto out = open_out(f.embedding_out);
    write_embedding_csv(out, Embedding{det.embedding, det.eigenvalues});
  }
  if (!f.distances_out.empty()) {
    auto out = open_out(f.distances_out);
    if (f.distances_out.size() > 4 && f.distances_out.substr(f.distances_out.size() - 4) == ".csv") {
      write_csv(out, *det.distances);
    } else {
      write_binary(out, *det.distances);
    }
  }
  std::cerr << summary.dump() << '\n';
  return 0;
}

ExperimentConfig base_config(const Flags& f) {
  ExperimentConfig c;
  c.k = f.k;
  c.alpha = f.alpha;
  c.detect = detect_options(f);
  c.reps = f.reps;
  c.base_seed = f.seed;
  c.threads = default_threads();
  if (f.k < 1) throw UsageError("--k must be >= 1");
  if (f.reps < 1) throw UsageError("--reps must be >= 1");
  return c;
}

int cmd_sweep(const Flags& f) {
  ExperimentConfig c = base_config(f);
  c.n = single_n(f);
  if (f.ratio.empty()) throw UsageError("sweep needs --ratio (comma separated grid)");
  if (f.k < 2) throw UsageError("sweep needs --k >= 2");
  if (!(f.alpha > 0.0)) throw UsageError("--alpha must be positive");
  for (double r : f.ratio) {
    if (!(r > 0.0)) throw UsageError("--ratio values must be positive (ratio 0 means p = q)");
  }
  c.ratios = f.ratio;

  std::ofstream csv_file;
  std::ostream* csv = &std::cout;
  if (!f.out.empty()) {
    csv_file = open_out(f.out + ".csv");
    csv = &csv_file;
  }
  *csv << sweep_csv_header() << '\n';
  const auto records = run_sweep(c, [&](const SweepRecord& r) {
    if (r.skipped) std::cerr << "warning: ratio " << fmt_num(r.ratio) << " gives q <= 0 at this alpha; skipped\n";
    *csv << sweep_csv_row(c, r) << '\n';
    csv->flush();
  });
  if (!f.out.empty()) {
    auto json = open_out(f.out + ".json");
    json << sweep_summary(c, records).dump(2) << '\n';
  }
  return 0;
}

int cmd_concentration(const Flags& f) {
  ExperimentConfig c = base_config(f);
  for (auto n : f.n) {
    if (n < 2) throw UsageError("--n values must be >= 2");
  }
  c.n = f.n.front();
  c.n_grid = f.n;
  if (!f.p || (f.k > 1 && !f.q)) throw UsageError("concentration needs --p and --q");
  c.p = *f.p;
  c.q = f.q.value_or(0.0);
  if (f.k > 1 && !(c.p > c.q && c.q > 0.0)) throw UsageError("need p > q > 0");
  if (!(c.p > 0.0)) throw UsageError("--p must be positive");

  std::ofstream csv_file;
  std::ostream* csv = &std::cout;
  if (!f.out.empty()) {
    csv_file = open_out(f.out + ".csv");
    csv = &csv_file;
  }
  *csv << concentration_csv_header() << '\n';
  const auto records = run_concentration(c, [&](const ConcentrationRecord& r) {
    *csv << concentration_csv_row(c, r) << '\n';
    csv->flush();
  });
  if (!f.out.empty()) {
    auto json = open_out(f.out + ".json");
    json << concentration_summary(c, records).dump(2) << '\n';
  }
  return 0;
}

int cmd_oracle(const Flags& f) {
  if (f.k < 1) throw UsageError("--k must be >= 1");
  const std::size_t n = single_n(f);
  const PlantedRates r = resolve_rates(f);
  const double nn = static_cast<double>(n);
  const double lambda1 = (r.p + (f.k - 1) * r.q) / f.k;
  const double lambda2 = (r.p - r.q) / f.k;
  const GeodesicConstants gc = geodesic_constants(lambda1, lambda2, f.k, nn);
  const BlockModelParams params = planted_model(n, f.k, r.p, r.q);
  const SurvivalEstimate rho = survival_probability(params.kernel, params.pi, f.reps, 50, f.seed);
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j{{"n", n},
                   {"k", f.k},
                   {"p", r.p},
                   {"q", r.q},
                   {"lambda1", lambda1},
                   {"lambda2", f.k > 1 ? num(lambda2) : nlohmann::json(nullptr)},
                   {"tau1", num(gc.tau1)},
                   {"tau2", num(gc.tau2)},
                   {"sigma1", num(gc.sigma1)},
                   {"sigma2", num(gc.sigma2)},
                   {"ratio", f.k > 1 ? num(threshold_ratio(r.p, r.q, f.k)) : nlohmann::json(nullptr)},
                   {"rho", rho.probability},
                   {"rho_standard_error", rho.standard_error},
                   {"rho_reps", rho.reps}};
  if (f.out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    auto out = open_out(f.out);
    out << j.dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Community detection in sparse block models from geodesic distances"};
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("generate", "sample a planted-partition graph; writes <out>.edges and <out>.labels");
  add_model_flags(gen, f, false);
  gen->add_option("--ratio", f.ratio, "threshold ratio, used with --alpha instead of --p/--q")->expected(1);
  gen->add_option("--alpha", f.alpha, "average degree");
  gen->add_option("--seed", f.seed);
  gen->add_option("--out", f.out, "output prefix")->required();

  auto* det = app.add_subcommand("detect", "cluster the giant component of an edge list");
  det->add_option("input", f.input, "edge list")->required();
  det->add_option("--k", f.k, "number of communities");
  add_detect_flags(det, f);
  det->add_option("--seed", f.seed);
  det->add_option("--out", f.out, "labels file (giant-component order); vertex ids go to <out>.vertices");
  det->add_option("--truth", f.truth, "true labels, reports misclassification");
  det->add_option("--embedding", f.embedding_out, "embedding CSV");
  det->add_option("--distances", f.distances_out, "distance matrix (binary, or CSV if the name ends in .csv)");

  auto* sweep = app.add_subcommand("sweep", "misclassification over a grid of threshold ratios at fixed average degree");
  add_model_flags(sweep, f, false);
  sweep->add_option("--ratio", f.ratio, "ratio grid (comma separated)")->delimiter(',');
  sweep->add_option("--alpha", f.alpha, "average degree");
  add_detect_flags(sweep, f);
  sweep->add_option("--reps", f.reps);
  sweep->add_option("--seed", f.seed);
  sweep->add_option("--out", f.out, "output prefix for <out>.csv and <out>.json (CSV to stdout if omitted)");

  auto* conc = app.add_subcommand("concentration", "geodesic distances against the planted-partition constants");
  add_model_flags(conc, f, true);
  conc->add_option("--cap-factor", f.cap_factor);
  conc->add_option("--reps", f.reps);
  conc->add_option("--seed", f.seed);
  conc->add_option("--out", f.out, "output prefix for <out>.csv and <out>.json (CSV to stdout if omitted)");

  auto* oracle = app.add_subcommand("oracle", "print theory constants as JSON");
  add_model_flags(oracle, f, false);
  oracle->add_option("--ratio", f.ratio)->expected(1);
  oracle->add_option("--alpha", f.alpha);
  oracle->add_option("--reps", f.reps, "Monte-Carlo reps for the survival probability");
  oracle->add_option("--seed", f.seed);
  oracle->add_option("--out", f.out, "JSON file (stdout if omitted)");
  oracle->callback([&] {
    if (oracle->count("--reps") == 0) f.reps = 10000;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*gen) return cmd_generate(f);
    if (*det) return cmd_detect(f);
    if (*sweep) return cmd_sweep(f);
    if (*conc) return cmd_concentration(f);
    if (*oracle) return cmd_oracle(f);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
