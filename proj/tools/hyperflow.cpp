// Command-line front end: one subcommand per pipeline stage plus `run` and `grad-check`.

#include "hyperflow/io/config.hpp"
#include "hyperflow/io/dataset.hpp"
#include "hyperflow/io/pipeline.hpp"
#include "hyperflow/line/line_graph.hpp"
#include "hyperflow/train/trainer.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace hyperflow;

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumeric = 4 };

struct CommonOptions {
  std::string config;
  std::vector<std::string> sets;
  std::string output;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config, "flat JSON config file")->required();
  cmd->add_option("-s,--set", o.sets, "override a config value, key=value (repeatable)");
  cmd->add_option("-o,--output", o.output, "output directory (overrides the config)");
}

io::RunConfig resolve(const CommonOptions& o) {
  std::vector<std::pair<std::string, io::json>> overrides;
  for (const auto& kv : o.sets) overrides.push_back(io::parse_override(kv));
  if (!o.output.empty()) overrides.emplace_back("output", o.output);
  return io::load_config(o.config, overrides);
}

struct GradCheckOptions {
  std::string config;
  std::vector<std::string> sets;
  std::size_t nodes = 12, dim = 5, envs = 3, points = 20;
  double eps = 1e-5, tol = 1e-4, init_scale = 0.1, sigma = 0.1;
  std::uint64_t seed = 0;
  bool skip_kinks = false;
};

int grad_check(const GradCheckOptions& o) {
  TrainConfig tc;
  if (!o.config.empty() || !o.sets.empty()) {
    io::json file = io::json::object();
    if (!o.config.empty()) {
      std::ifstream in(o.config);
      if (!in) throw ConfigError("cannot open config " + o.config);
      file = io::json::parse(in, nullptr, false, true);
      if (file.is_discarded()) throw ConfigError("config is not valid JSON: " + o.config);
    }
    std::vector<std::pair<std::string, io::json>> overrides;
    for (const auto& kv : o.sets) overrides.push_back(io::parse_override(kv));
    if (!file.contains("seed")) file["seed"] = o.seed;
    if (!file.contains("data.edges") && !file.contains("data.planted")) file["data.planted"] = true;
    tc = io::make_config(file, overrides, false).train();
  }
  tc.shape.init_scale = o.init_scale;
  tc.validate();

  io::RandomSpec spec;
  spec.nodes = o.nodes;
  spec.dim = o.dim;
  spec.hyperedges = o.envs;
  spec.seed = o.seed;
  const Hypergraph g = io::random_hypergraph(spec);
  const auto inc = build_incidence(g);
  WalkConfig wc;
  wc.seed = derive_seed(o.seed, "line");
  const LineGraph lg = fast_line_graph(g, wc);
  const GraphOperators ops = GraphOperators::build(g, inc, lg, tc.hops, tc.gamma);

  double worst = 0.0;
  std::string worst_tensor;
  std::size_t entries = 0, skipped = 0;
  for (std::size_t pt = 0; pt < o.points; ++pt) {
    TrainConfig at = tc;
    at.seed = derive_seed(o.seed, pt);
    Rng rng = make_rng(at.seed, "grad-check/point");
    const ModelParams params = perturbed(initial_params(g.feature_dim(), at), o.sigma, rng);
    const PairBatch batch = sample_pairs(g.pairwise(), tc.neg_ratio, derive_seed(at.seed, "batch"));
    const auto rep = gradient_check(g.features(), ops, params, batch, tc, o.eps, nullptr, nullptr, o.skip_kinks);
    entries += rep.entries;
    skipped += rep.skipped;
    if (rep.max_rel_error > worst) {
      worst = rep.max_rel_error;
      worst_tensor = rep.worst_tensor;
    }
  }
  std::cout << "points " << o.points << ", entries " << entries << ", max relative error " << worst;
  if (!worst_tensor.empty()) std::cout << " (" << worst_tensor << ")";
  if (o.skip_kinks) std::cout << ", " << skipped << " kink-straddling entries skipped";
  std::cout << '\n';
  if (worst >= o.tol) {
    std::cerr << "gradient check failed: " << worst << " >= " << o.tol << '\n';
    return kNumeric;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyperflow: hypergraph social-environment embeddings"};
  app.require_subcommand(1);

  struct Stage {
    const char* name;
    const char* help;
    void (io::Pipeline::*fn)();
  };
  const std::vector<Stage> stages = {
      {"envs", "build environments (hyperedges)", &io::Pipeline::stage_envs},
      {"linegraph", "sample the line graph of the hyperedges", &io::Pipeline::stage_linegraph},
      {"train", "train the flow model", &io::Pipeline::stage_train},
      {"embed", "export embeddings from a trained model", &io::Pipeline::stage_embed},
      {"metrics", "compute conformity, equivalence, entropy and evolving ratios", &io::Pipeline::stage_metrics},
      {"eval", "held-out link prediction", &io::Pipeline::stage_eval},
      {"run", "run the full pipeline", &io::Pipeline::run_all},
  };
  std::vector<CommonOptions> opts(stages.size());
  std::vector<CLI::App*> cmds;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    auto* cmd = app.add_subcommand(stages[i].name, stages[i].help);
    add_common(cmd, opts[i]);
    cmds.push_back(cmd);
  }

  GradCheckOptions gc;
  auto* gcmd = app.add_subcommand("grad-check", "compare analytic gradients with central differences");
  gcmd->add_option("-c,--config", gc.config, "config supplying model settings (optional)");
  gcmd->add_option("-s,--set", gc.sets, "override a config value, key=value");
  gcmd->add_option("--nodes", gc.nodes, "nodes in the random instance");
  gcmd->add_option("--dim", gc.dim, "feature dimension");
  gcmd->add_option("--envs", gc.envs, "hyperedges");
  gcmd->add_option("--points", gc.points, "random parameter points");
  gcmd->add_option("--eps", gc.eps, "finite-difference step");
  gcmd->add_option("--tol", gc.tol, "maximum relative error");
  gcmd->add_option("--init-scale", gc.init_scale, "initialization scale of the probed points");
  gcmd->add_option("--sigma", gc.sigma, "noise added to every parameter entry at each point");
  gcmd->add_option("--seed", gc.seed, "seed");
  gcmd->add_flag("--skip-kinks", gc.skip_kinks, "leave out entries whose difference step crosses a kink");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (gcmd->parsed()) return grad_check(gc);
    for (std::size_t i = 0; i < stages.size(); ++i) {
      if (!cmds[i]->parsed()) continue;
      io::Pipeline p(resolve(opts[i]));
      (p.*stages[i].fn)();
      p.finish();
      std::cout << "wrote " << p.artifacts().dir.string() << " (config " << p.config().hash_hex() << ")\n";
    }
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
