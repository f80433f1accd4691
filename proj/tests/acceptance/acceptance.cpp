// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "hyperflow/io/config.hpp"
#include "hyperflow/io/dataset.hpp"
#include "hyperflow/io/pipeline.hpp"
#include "hyperflow/line/line_graph.hpp"
#include "hyperflow/train/trainer.hpp"
#include "oracles.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace hyperflow;
using io::json;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = HYPERFLOW_CONFIG_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hyperflow_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

io::RunConfig config_with(const std::string& file, std::uint64_t seed, const fs::path& out,
                          std::vector<std::pair<std::string, json>> extra = {}) {
  extra.emplace_back("seed", seed);
  extra.emplace_back("output", out.string());
  return io::load_config(kConfigs / file, extra);
}

std::vector<double> loss_column(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  while (std::getline(in, line)) {
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    out.push_back(std::stod(line.substr(a + 1, b - a - 1)));
  }
  return out;
}

// ---- 1: gradients ----------------------------------------------------------------------

Outcome gradients() {
  double worst = 0.0, slowest = 0.0;
  std::size_t entries = 0, skipped = 0;
  std::string worst_where;
  for (Activation act : {Activation::relu, Activation::tanh, Activation::sigmoid, Activation::identity}) {
    const auto t0 = Clock::now();
    const bool kinks = act == Activation::relu;
    TrainConfig tc;
    tc.activation = act;
    io::RandomSpec spec;  // N=12, d=5, C=3
    spec.seed = 0;
    const Hypergraph g = io::random_hypergraph(spec);
    WalkConfig wc;
    wc.seed = derive_seed(spec.seed, "line");
    const auto ops = GraphOperators::build(g, build_incidence(g), fast_line_graph(g, wc), tc.hops, tc.gamma);
    for (std::size_t pt = 0; pt < 20; ++pt) {
      TrainConfig at = tc;
      at.seed = derive_seed(spec.seed, pt);
      Rng rng = make_rng(at.seed, "grad-check/point");
      const auto params = perturbed(initial_params(g.feature_dim(), at), 0.1, rng);
      const auto batch = sample_pairs(g.pairwise(), tc.neg_ratio, derive_seed(at.seed, "batch"));
      const auto rep = gradient_check(g.features(), ops, params, batch, tc, 1e-5, nullptr, nullptr, kinks);
      entries += rep.entries;
      skipped += rep.skipped;
      if (rep.max_rel_error > worst) {
        worst = rep.max_rel_error;
        worst_where = activation_name(act) + "/" + rep.worst_tensor;
      }
    }
    slowest = std::max(slowest, seconds_since(t0));
  }
  return {worst < 1e-4 && slowest < 30.0,
          "max rel err " + fmt(worst) + " (" + worst_where + "), " + std::to_string(entries) + " entries over 4 activations x 20 points, " +
              std::to_string(skipped) + " relu kink-straddling entries skipped, slowest activation " + fmt(slowest, 3) + " s"};
}

// ---- 2: walk consistency ---------------------------------------------------------------

std::vector<std::vector<NodeSet>> walk_fixtures() {
  return {
      {{0, 1}, {1, 2}},
      {{0, 1, 2}, {2, 3}, {3, 4, 5}, {1, 5, 6}},
      {{0, 1, 2, 3, 4}, {0, 5}, {1, 6}, {2, 7}},
      {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}},
      {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}},
      {{0, 1, 2, 3}, {2, 3, 4, 5}, {4, 5, 6, 7}, {6, 7, 0, 1}, {0, 4}, {8, 9}},
  };
}

// One-step co-occurrence: from hyperedge k, a uniform member u, then a uniform other hyperedge of u.
std::map<NodePair, double> one_step(std::size_t n, const std::vector<NodeSet>& edges) {
  std::vector<std::vector<std::size_t>> memb(n);
  for (std::size_t k = 0; k < edges.size(); ++k)
    for (auto u : edges[k]) memb[u].push_back(k);
  std::map<NodePair, double> out;
  for (std::size_t k = 0; k < edges.size(); ++k)
    for (auto u : edges[k]) {
      if (memb[u].size() < 2) continue;
      for (auto j : memb[u])
        if (j != k)
          out[canonical_pair(static_cast<NodeId>(k), static_cast<NodeId>(j))] +=
              1.0 / static_cast<double>(edges[k].size()) / static_cast<double>(memb[u].size() - 1);
    }
  double total = 0.0;
  for (auto& [_, v] : out) total += v;
  for (auto& [_, v] : out) v /= total;
  return out;
}

Outcome walks() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (const auto& edges : walk_fixtures()) {
    std::size_t n = 0;
    for (const auto& e : edges) n = std::max<std::size_t>(n, e.back() + 1);
    const Hypergraph g(Matrix::Zero(static_cast<Eigen::Index>(n), 1), edges, EdgeSet(n, {}));
    WalkConfig cfg;
    cfg.max_length = 1;
    cfg.repeats = 5000;
    cfg.seed = 2024;
    const auto c = random_walk_multiset(g, cfg);
    auto want = one_step(n, g.hyperedges());
    for (auto [p, _] : c.pair_counts) want.emplace(p, 0.0);
    double tv = 0.0;
    for (auto [p, w] : want) {
      const auto it = c.pair_counts.find(p);
      const double got = it == c.pair_counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(c.total);
      tv += std::abs(got - w);
    }
    worst = std::max(worst, 0.5 * tv);
  }
  const double secs = seconds_since(t0);
  return {worst < 0.05 && secs < 10.0,
          "max TV " + fmt(worst) + " over " + std::to_string(walk_fixtures().size()) + " fixtures, " + fmt(secs, 3) + " s"};
}

// ---- 3: influence operator -------------------------------------------------------------

Outcome theta_algebra() {
  double uniform_err = 0.0;
  for (std::size_t n = 1; n <= 20; ++n) {
    NodeSet all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<NodeId>(i);
    const Hypergraph g(Matrix::Zero(static_cast<Eigen::Index>(n), 1), {all}, EdgeSet(n, {}), Vector::Ones(1),
                       Vector::Ones(static_cast<Eigen::Index>(n)));
    const Matrix t(theta(g, build_incidence(g)));
    uniform_err = std::max(uniform_err, (t.array() - 1.0 / static_cast<double>(n)).abs().maxCoeff());
  }

  double asym = 0.0;
  Rng rng(50);
  for (std::uint64_t s = 0; s < 50; ++s) {
    io::RandomSpec spec;
    spec.nodes = 5 + s % 20;
    spec.hyperedges = 1 + s % 6;
    spec.seed = s;
    const auto base = io::random_hypergraph(spec);
    Vector w(static_cast<Eigen::Index>(base.hyperedge_count())), u(static_cast<Eigen::Index>(spec.nodes));
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = 0.1 + 3.0 * uniform_unit(rng);
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = 0.1 + 3.0 * uniform_unit(rng);
    const Hypergraph g(base.features(), base.hyperedges(), base.pairwise(), w, u);
    const Matrix t(theta(g, build_incidence(g)));
    asym = std::max(asym, (t - t.transpose()).cwiseAbs().maxCoeff());
  }

  double fwd_err = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    io::RandomSpec spec;
    spec.nodes = 4 + s % 7;  // N <= 10
    spec.dim = 3;
    spec.hyperedges = 1 + s % 4;
    spec.seed = 100 + s;
    const auto g = io::random_hypergraph(spec);
    const std::size_t n = spec.nodes;
    WalkConfig wc;
    wc.seed = s;
    const auto lg = fast_line_graph(g, wc);
    const auto ops = GraphOperators::build(g, build_incidence(g), lg, 2, 0.5);
    TrainConfig tc;
    tc.seed = s;
    tc.shape.dim_h = 3;
    tc.shape.dim_p = 2;
    tc.shape.init_scale = 1.0;
    Rng prng(s);
    const auto p = perturbed(initial_params(3, tc), 0.1, prng);
    const auto c = forward(g.features(), ops, p);

    std::vector<double> wv(g.hyperedge_weights().data(), g.hyperedge_weights().data() + g.hyperedge_weights().size());
    std::vector<double> uv(g.node_weights().data(), g.node_weights().data() + g.node_weights().size());
    const Matrix inc = oracle::incidence(n, g.hyperedges());
    Matrix prop = oracle::theta_sum(oracle::theta(inc, wv, uv), 2, 0.5);
    for (Eigen::Index i = 0; i < prop.rows(); ++i) prop(i, i) = 1.0;
    const Matrix adj = oracle::normalized_adjacency(n, g.pairwise().pairs());
    Matrix h = g.features(), q = g.features();
    for (const auto& w : p.hyper_layers) h = oracle::apply(oracle::matmul(oracle::matmul(prop, h), w), oracle::relu);
    for (const auto& w : p.pair_layers) q = oracle::apply(oracle::matmul(oracle::matmul(adj, q), w), oracle::relu);
    Matrix enc(h.rows(), h.cols() + q.cols());
    enc << h, q;
    const Matrix al = oracle::normalized_adjacency(g.hyperedge_count(), lg.edges);
    const Matrix r_star = oracle::matmul(
        inc, oracle::apply(oracle::matmul(oracle::matmul(al, oracle::matmul(inc.transpose(), enc)), p.line_layers[0]),
                           oracle::relu));
    Matrix dec_in(h.rows(), r_star.cols() + h.cols() + q.cols());
    dec_in << r_star, h, q;
    Matrix z = oracle::matmul(dec_in, p.dec_w1);
    for (Eigen::Index i = 0; i < z.rows(); ++i) z.row(i) += p.dec_b1.row(0);
    Matrix x_hat = oracle::matmul(oracle::apply(z, oracle::relu), p.dec_w2);
    for (Eigen::Index i = 0; i < x_hat.rows(); ++i) x_hat.row(i) += p.dec_b2.row(0);
    fwd_err = std::max({fwd_err, (c.emb.r_encode - enc).cwiseAbs().maxCoeff(),
                        (c.emb.r_star - r_star).cwiseAbs().maxCoeff(), (c.emb.x_hat - x_hat).cwiseAbs().maxCoeff()});
  }
  return {uniform_err <= 1e-12 && asym <= 1e-12 && fwd_err <= 1e-10,
          "uniform err " + fmt(uniform_err) + ", asymmetry " + fmt(asym) + " (50 instances), forward err " + fmt(fwd_err) +
              " (20 instances, N<=10)"};
}

// ---- 4: convergence on KarateClub --------------------------------------------------------

Outcome convergence() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto dir = scratch("karate_" + std::to_string(seed));
    io::run_pipeline(config_with("karate.json", seed, dir));
    const auto loss = loss_column(dir / "loss.csv");
    if (loss.size() < 200) return {false, "loss history too short"};
    auto ma = [&](std::size_t epoch) {
      double s = 0.0;
      for (std::size_t e = epoch - 9; e <= epoch; ++e) s += loss[e - 1];
      return s / 10.0;
    };
    const double ratio = ma(200) / ma(10);
    ok = ok && ratio <= 0.5;
    detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) + " " + fmt(ratio, 3);
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 120.0, "MA10(200)/MA10(10): " + detail + "; " + fmt(secs, 3) + " s"};
}

// ---- 5 and 6: planted environments -----------------------------------------------------

struct PlantedRuns {
  std::vector<json> metrics;
};

const PlantedRuns& planted_runs() {
  static const PlantedRuns runs = [] {
    PlantedRuns r;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto dir = scratch("planted_" + std::to_string(seed));
      io::run_pipeline(config_with("planted.json", seed, dir));
      r.metrics.push_back(json::parse(slurp(dir / "metrics.json")));
    }
    return r;
  }();
  return runs;
}

Outcome equivalence_observed() {
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < planted_runs().metrics.size(); ++i) {
    const auto& eq = planted_runs().metrics[i]["equivalence"];
    ok = ok && eq["value"].get<double>() > 1.0;
    detail += (i ? ", " : "") + std::string("seed ") + std::to_string(i + 1) + " " +
              (eq["infinite"].get<bool>() ? std::string("inf") : fmt(eq["value"].get<double>(), 3));
  }
  return {ok, "eq: " + detail};
}

Outcome polarization() {
  std::size_t lower = 0, total = 0;
  for (const auto& m : planted_runs().metrics)
    for (const auto& g : m["groups"]) {
      ++total;
      if (g["entropy"].get<double>() < g["initial_entropy"].get<double>()) ++lower;
    }
  const double frac = total ? static_cast<double>(lower) / static_cast<double>(total) : 0.0;
  return {total > 0 && frac >= 0.8, std::to_string(lower) + "/" + std::to_string(total) + " groups lower after training"};
}

// ---- 7: joint link prediction ----------------------------------------------------------

Outcome link_prediction() {
  auto aucs = [](const std::string& file, const std::string& tag, std::vector<std::pair<std::string, json>> extra) {
    std::vector<double> out;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto dir = scratch(tag + std::to_string(seed));
      io::run_pipeline(config_with(file, seed, dir, extra));
      out.push_back(json::parse(slurp(dir / "eval.json"))["auc_inner_product"].get<double>());
    }
    return out;
  };
  const std::vector<std::pair<std::string, json>> joint = {{"train.mode", "unpluggable"},
                                                           {"train.task", "link_prediction"},
                                                           {"eval.holdout", 0.2},
                                                           {"eval.neg_per_pos", 10}};
  const auto planted = aucs("planted.json", "lp_planted_", joint);
  const auto karate = aucs("karate_linkpred.json", "lp_karate_", {});
  auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); };
  auto list = [](const std::vector<double>& v) {
    std::string s;
    for (double a : v) s += (s.empty() ? "" : " ") + fmt(a, 3);
    return s;
  };
  const double mp = mean(planted), mk = mean(karate);
  return {mp > 0.9 && mk > 0.65,
          "planted mean " + fmt(mp, 3) + " [" + list(planted) + "], karate mean " + fmt(mk, 3) + " [" + list(karate) + "]"};
}

// ---- 8: determinism through the command line -------------------------------------------

Outcome determinism() {
  const std::vector<std::string> files = {"embeddings.csv", "line_graph.tsv", "loss.csv", "hyperedges.txt", "model.ckpt"};
  std::map<std::string, std::string> reference;
  std::string detail;
  bool ok = true;
  int run = 0;
  for (const char* threads : {"1", "1", "4", "8"}) {
    const auto dir = scratch("det_" + std::to_string(run++));
    const std::string cmd = std::string("HYPERFLOW_THREADS=") + threads + " " + HYPERFLOW_CLI + " run -c " +
                            (kConfigs / "karate.json").string() + " -o " + dir.string() + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    if (!WIFEXITED(rc) || WEXITSTATUS(rc) != 0) return {false, "cli run failed with threads=" + std::string(threads)};
    for (const auto& f : files) {
      const auto bytes = slurp(dir / f);
      if (bytes.empty()) return {false, f + " missing"};
      if (!reference.count(f)) {
        reference[f] = bytes;
      } else if (reference[f] != bytes) {
        ok = false;
        detail += f + " differs at threads=" + threads + "; ";
      }
    }
  }
  return {ok, ok ? "identical across 4 runs (threads 1, 1, 4, 8)" : detail};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const std::vector<Criterion> criteria = {
      {"1 gradient correctness", gradients},
      {"2 walk-pair consistency", walks},
      {"3 influence operator algebra", theta_algebra},
      {"4 KarateClub convergence", convergence},
      {"5 social equivalence on planted cliques", equivalence_observed},
      {"6 polarization direction", polarization},
      {"7 joint link prediction", link_prediction},
      {"8 determinism", determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
