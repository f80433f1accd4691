#pragma once

#include "hyperflow/common.hpp"
#include "hyperflow/core/graph.hpp"
#include "hyperflow/env/baselines.hpp"
#include "hyperflow/env/membership.hpp"
#include "hyperflow/io/config.hpp"
#include "hyperflow/io/dataset.hpp"
#include "hyperflow/io/formats.hpp"
#include "hyperflow/line/line_graph.hpp"
#include "hyperflow/metrics/link_eval.hpp"
#include "hyperflow/metrics/socio.hpp"
#include "hyperflow/model/influence.hpp"
#include "hyperflow/train/trainer.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hyperflow::io {

/// Artifact file names inside the output directory.
struct Artifacts {
  fs::path dir;
  fs::path hyperedges() const { return dir / "hyperedges.txt"; }
  fs::path line_graph() const { return dir / "line_graph.tsv"; }
  fs::path checkpoint() const { return dir / "model.ckpt"; }
  fs::path loss() const { return dir / "loss.csv"; }
  fs::path embeddings() const { return dir / "embeddings.csv"; }
  fs::path r_h() const { return dir / "r_h.csv"; }
  fs::path r_p() const { return dir / "r_p.csv"; }
  fs::path r_star() const { return dir / "r_star.csv"; }
  fs::path snapshots() const { return dir / "snapshots"; }
  fs::path snapshot(std::size_t epoch) const {
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%06zu.csv", epoch);
    return snapshots() / name;
  }
  fs::path metrics() const { return dir / "metrics.json"; }
  fs::path eval() const { return dir / "eval.json"; }
  fs::path manifest() const { return dir / "manifest.json"; }
};

struct StageFailure {
  std::string stage;
};

/// Thrown after the manifest has been persisted; carries the failing stage.
template <class Base>
class StageError : public Base, public StageFailure {
 public:
  StageError(const std::string& stage, const std::string& what)
      : Base("stage '" + stage + "': " + what), StageFailure{stage} {}
};

/// Lazily built state shared by the stages. Each stage either computes its inputs in-process
/// or reloads them from artifacts written by an earlier invocation.
class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg) : cfg_(std::move(cfg)), art_{cfg_.output()} {
    manifest_["config_hash"] = cfg_.hash_hex();
    manifest_["seed"] = cfg_.seed();
    manifest_["config"] = cfg_.values;
    manifest_["stages"] = json::array();
    manifest_["status"] = "running";
  }

  const RunConfig& config() const { return cfg_; }
  const Artifacts& artifacts() const { return art_; }
  const json& manifest() const { return manifest_; }

  // ---- stages --------------------------------------------------------------------------

  void stage_envs() {
    stage("env", [&] {
      const auto& ds = dataset();
      const EdgeSet& links = training_links();
      const auto method = cfg_.str("env.method");
      std::vector<NodeSet> edges;
      if (method == "learned") {
        const auto fit = fit_membership(ds.features, links, cfg_.membership());
        edges = extract_hyperedges(fit.membership, cfg_.real("env.tau"));
      } else if (method == "cluster") {
        edges = hyperedges_from_clusters(ds.features, cfg_.count("env.C"), derive_seed(cfg_.seed(), "env"));
      } else if (method == "community") {
        edges = hyperedges_from_communities(links);
      } else if (method == "khop") {
        edges = hyperedges_from_khop(links, cfg_.count("env.khop"));
      } else {
        edges = ds.hyperedges.value_or(std::vector<NodeSet>{});
      }
      edges = normalize_hyperedges(ds.node_count, std::move(edges));
      if (edges.empty()) throw DataError("environment construction produced no hyperedges");
      write_hyperedge_file(art_.hyperedges(), edges);
      hyperedges_ = std::move(edges);
    });
  }

  void stage_incidence() {
    stage("incidence", [&] {
      const auto& edges = hyperedges();
      const auto& ds = dataset();
      Hypergraph probe(ds.features, edges, training_links());
      graph_ = Hypergraph(ds.features, probe.hyperedges(), training_links(), probe.hyperedge_weights(),
                          node_weights(probe));
      incidence_ = build_incidence(*graph_);
    });
  }

  void stage_linegraph() {
    stage("linegraph", [&] {
      line_ = fast_line_graph(graph(), cfg_.walk(), cfg_.count("line.samples"));
      write_line_graph(art_.line_graph(), *line_);
    });
  }

  void stage_train() {
    stage("train", [&] {
      const TrainConfig tc = cfg_.train();
      const auto& ops = operators();
      const std::size_t every = cfg_.count("train.snapshot_every");
      fs::create_directories(art_.snapshots());
      for (const auto& f : fs::directory_iterator(art_.snapshots())) fs::remove(f.path());
      snapshots_.clear();
      snapshot_epochs_.clear();
      auto on_epoch = [&](std::size_t epoch, const ModelParams& p) {
        if (epoch == 0 || epoch == tc.epochs || (every > 0 && epoch % every == 0)) {
          Matrix emb = forward(graph().features(), ops, p).emb.r_encode;
          write_embeddings(art_.snapshot(epoch), emb);
          snapshots_.push_back(std::move(emb));
          snapshot_epochs_.push_back(epoch);
        }
      };
      TrainResult res;
      try {
        if (tc.mode == TrainMode::unpluggable)
          res = train_with_task(graph(), ops, tc, task_data(), on_epoch);
        else
          res = train(graph(), ops, tc, on_epoch);
      } catch (const TrainingDiverged& e) {
        write_loss_history(art_.loss(), e.history);
        throw;
      }
      write_loss_history(art_.loss(), res.history);
      write_checkpoint(art_.checkpoint(), res.params);
      manifest_["final_loss"] = res.history.empty() ? 0.0 : res.history.back().loss;
      params_ = std::move(res.params);
    });
  }

  void stage_embed() {
    stage("embed", [&] {
      const ForwardCache c = forward(graph().features(), operators(), params());
      ensure_finite(c.emb.r_encode, "embeddings");
      write_embeddings(art_.embeddings(), c.emb.r_encode);
      write_embeddings(art_.r_h(), c.emb.r_h);
      write_embeddings(art_.r_p(), c.emb.r_p);
      write_embeddings(art_.r_star(), c.emb.r_star);
      embeddings_ = c.emb.r_encode;
    });
  }

  void stage_metrics() {
    stage("metrics", [&] {
      const Matrix& emb = embeddings();
      const auto& edges = hyperedges();
      const auto mode = cfg_.entropy_mode();
      const TrainConfig tc = cfg_.train();
      const Matrix initial = forward(graph().features(), operators(), initial_params(graph().feature_dim(), tc)).emb.r_encode;
      load_snapshots();

      json out;
      out["conformity"] = conformity(emb, edges, cfg_.real("metrics.rho"));
      const auto eq = equivalence(edges, training_links(), cfg_.count("metrics.samples"), derive_seed(cfg_.seed(), "metrics"));
      out["equivalence"] = {{"value", eq.value},
                            {"numerator", eq.numerator},
                            {"denominator", eq.denominator},
                            {"numerator_se", eq.numerator_se},
                            {"denominator_se", eq.denominator_se},
                            {"infinite", eq.infinite}};
      out["entropy_mode"] = cfg_.str("metrics.entropy_mode");
      out["groups"] = json::array();
      for (std::size_t k = 0; k < edges.size(); ++k) {
        json grp = {{"hyperedge", k},
                    {"size", edges[k].size()},
                    {"entropy", group_entropy(emb, edges[k], mode)},
                    {"initial_entropy", group_entropy(initial, edges[k], mode)}};
        if (!snapshots_.empty()) {
          grp["evolving"] = json::array();
          for (const auto& pt : evolving_ratio(snapshots_, edges[k], snapshot_epochs_))
            grp["evolving"].push_back({{"epoch", pt.stage}, {"count", pt.count}, {"ratio", pt.ratio}});
        }
        out["groups"].push_back(std::move(grp));
      }
      write_json(art_.metrics(), out);
    });
  }

  void stage_eval() {
    stage("eval", [&] {
      if (!split()) throw ConfigError("eval needs eval.holdout > 0");
      const auto& s = *split();
      const Matrix& emb = embeddings();
      json out;
      out["mode"] = cfg_.str("train.mode");
      out["test_links"] = s.test_pos.size();
      out["test_non_links"] = s.test_neg.size();
      out["auc_inner_product"] = roc_auc(inner_product_scores(emb, s.test_pos), inner_product_scores(emb, s.test_neg));
      if (cfg_.str("train.mode") == "pluggable") {
        // Separately trained head on training links against sampled training non-links.
        Rng rng = make_rng(cfg_.seed(), "eval/head");
        std::vector<NodePair> pos = s.train.pairs(), neg;
        while (neg.size() < pos.size()) {
          const auto u = static_cast<NodeId>(uniform_index(rng, s.train.node_count()));
          const auto v = static_cast<NodeId>(uniform_index(rng, s.train.node_count()));
          if (u != v && !s.train.contains(u, v)) neg.push_back(canonical_pair(u, v));
        }
        const auto head = HadamardLogistic::fit(emb, pos, neg);
        std::vector<double> sp, sn;
        for (auto p : s.test_pos) sp.push_back(head.score(emb, p));
        for (auto p : s.test_neg) sn.push_back(head.score(emb, p));
        out["auc_head"] = roc_auc(sp, sn);
      }
      write_json(art_.eval(), out);
    });
  }

  /// Full pipeline: env, incidence, line graph, train, embed, metrics and, with a holdout, eval.
  void run_all() {
    stage_envs();
    stage_incidence();
    stage_linegraph();
    stage_train();
    stage_embed();
    stage_metrics();
    if (cfg_.real("eval.holdout") > 0.0) stage_eval();
  }

  void finish() {
    manifest_["status"] = "ok";
    persist_manifest();
  }

  // ---- lazily loaded state ------------------------------------------------------------

  const Dataset& dataset() {
    if (!dataset_) {
      stage("load", [&] {
        Dataset ds;
        if (cfg_.flag("data.planted")) {
          PlantedSpec ps;
          ps.cliques = cfg_.count("planted.cliques");
          ps.clique_size = cfg_.count("planted.size");
          ps.inter_p = cfg_.real("planted.inter_p");
          ps.noise = cfg_.real("planted.noise");
          ps.block = cfg_.count("planted.block");
          ps.seed = derive_seed(cfg_.seed(), "data");
          ds = generate_planted(ps);
        } else {
          DatasetPaths p;
          p.edges = cfg_.str("data.edges");
          if (!cfg_.str("data.features").empty()) p.features = cfg_.str("data.features");
          p.features_header = cfg_.flag("data.features_header");
          if (!cfg_.str("data.hyperedges").empty()) p.hyperedges = cfg_.str("data.hyperedges");
          p.node_count = cfg_.count("data.nodes");
          ds = load_dataset(p);
          if (!p.features && cfg_.str("data.default_features") == "identity")
            ds.features = Matrix::Identity(static_cast<Eigen::Index>(ds.node_count), static_cast<Eigen::Index>(ds.node_count));
        }
        if (ds.edges.empty()) throw DataError("dataset has no links");
        dataset_ = std::move(ds);
      });
    }
    return *dataset_;
  }

  /// Held-out split, present when eval.holdout > 0.
  const std::optional<LinkSplit>& split() {
    if (!split_done_) {
      const double f = cfg_.real("eval.holdout");
      if (f > 0.0) split_ = split_links(dataset().edges, f, cfg_.count("eval.neg_per_pos"), derive_seed(cfg_.seed(), "eval"));
      split_done_ = true;
    }
    return split_;
  }

  /// Links visible to every learning stage: the training part of the split, or all links.
  const EdgeSet& training_links() { return split() ? split()->train : dataset().edges; }

  const std::vector<NodeSet>& hyperedges() {
    if (!hyperedges_) {
      if (!fs::exists(art_.hyperedges())) throw DataError("missing " + art_.hyperedges().string() + "; run `envs` first");
      hyperedges_ = read_hyperedge_file(art_.hyperedges(), dataset().node_count);
    }
    return *hyperedges_;
  }

  const Hypergraph& graph() {
    if (!graph_) stage_incidence();
    return *graph_;
  }

  const LineGraph& line_graph() {
    if (!line_) {
      if (!fs::exists(art_.line_graph())) throw DataError("missing " + art_.line_graph().string() + "; run `linegraph` first");
      line_ = read_line_graph(art_.line_graph(), graph().hyperedge_count());
    }
    return *line_;
  }

  const GraphOperators& operators() {
    if (!ops_) {
      const Hypergraph& g = graph();
      const LineGraph& lg = line_graph();
      ops_ = GraphOperators::build(g, *incidence_, lg, cfg_.count("model.K"), cfg_.real("model.gamma"));
    }
    return *ops_;
  }

  const ModelParams& params() {
    if (!params_) {
      if (!fs::exists(art_.checkpoint())) throw DataError("missing " + art_.checkpoint().string() + "; run `train` first");
      params_ = read_checkpoint(art_.checkpoint());
    }
    return *params_;
  }

  const Matrix& embeddings() {
    if (!embeddings_) {
      if (!fs::exists(art_.embeddings())) throw DataError("missing " + art_.embeddings().string() + "; run `embed` first");
      embeddings_ = read_embeddings(art_.embeddings());
      if (static_cast<std::size_t>(embeddings_->rows()) != dataset().node_count)
        throw DataError("embedding rows do not match node count");
    }
    return *embeddings_;
  }

  TaskData task_data() {
    TaskData t;
    t.kind = cfg_.task();
    const EdgeSet& links = training_links();
    if (t.kind == TaskKind::link_prediction) {
      t.pairs = links.pairs();
      t.known = links;
      t.neg_ratio = cfg_.count("train.task_neg_ratio");
    } else if (t.kind == TaskKind::rating_regression) {
      std::vector<double> raw;
      for (const auto& [pair, w] : dataset().edge_weights) {
        if (!links.contains(pair.first, pair.second)) continue;
        t.pairs.push_back(pair);
        raw.push_back(w);
      }
      if (t.pairs.empty()) throw DataError("rating task needs weighted links in the edge file");
      t.targets = scale_unit(raw);
    }
    return t;
  }

  // ---- manifest -----------------------------------------------------------------------

  /// Runs `fn` as a named stage, records its timing and persists the manifest either way.
  void stage(const std::string& name, const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    auto record = [&](const std::string& status, const std::string& err) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      json rec = {{"name", name}, {"seconds", secs}, {"status", status}};
      if (!err.empty()) rec["error"] = err;
      manifest_["stages"].push_back(std::move(rec));
      if (status != "ok") {
        manifest_["status"] = "failed";
        if (!manifest_.contains("failed_stage")) manifest_["failed_stage"] = name;
      }
      persist_manifest();
    };
    try {
      fn();
    } catch (const StageFailure& inner) {
      record("failed", "nested stage '" + inner.stage + "' failed");
      throw;
    } catch (const ConfigError& e) {
      record("failed", e.what());
      throw StageError<ConfigError>(name, e.what());
    } catch (const NumericError& e) {
      record("failed", e.what());
      throw StageError<NumericError>(name, e.what());
    } catch (const DataError& e) {
      record("failed", e.what());
      throw StageError<DataError>(name, e.what());
    } catch (const std::invalid_argument& e) {
      record("failed", e.what());
      throw StageError<DataError>(name, e.what());
    } catch (const std::exception& e) {
      record("failed", e.what());
      throw;
    }
    record("ok", "");
  }

 private:
  Vector node_weights(const Hypergraph& probe) const {
    const auto mode = cfg_.str("env.node_weights");
    Vector u = probe.node_weights();
    if (mode == "uniform") return Vector::Ones(u.size());
    if (mode == "degree_mean") return u / u.mean();
    return u;
  }

  void load_snapshots() {
    if (!snapshots_.empty() || !fs::exists(art_.snapshots())) return;
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(art_.snapshots()))
      if (f.path().extension() == ".csv") files.push_back(f.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const auto stem = f.stem().string();
      snapshot_epochs_.push_back(static_cast<std::size_t>(std::stoull(stem.substr(stem.find('_') + 1))));
      snapshots_.push_back(read_embeddings(f));
    }
  }

  static void write_json(const fs::path& p, const json& j) {
    auto out = open_out(p);
    out << j.dump(2) << '\n';
  }

  void persist_manifest() { write_json(art_.manifest(), manifest_); }

  RunConfig cfg_;
  Artifacts art_;
  json manifest_;
  std::optional<Dataset> dataset_;
  std::optional<LinkSplit> split_;
  bool split_done_ = false;
  std::optional<std::vector<NodeSet>> hyperedges_;
  std::optional<Hypergraph> graph_;
  std::optional<IncidenceMatrix> incidence_;
  std::optional<LineGraph> line_;
  std::optional<GraphOperators> ops_;
  std::optional<ModelParams> params_;
  std::optional<Matrix> embeddings_;
  std::vector<Matrix> snapshots_;
  std::vector<std::size_t> snapshot_epochs_;
};

/// Runs every stage and marks the manifest complete.
inline Pipeline run_pipeline(const RunConfig& cfg) {
  Pipeline p(cfg);
  p.run_all();
  p.finish();
  return p;
}

}  // namespace hyperflow::io
