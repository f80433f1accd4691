#pragma once

#include "hyperflow/common.hpp"
#include "hyperflow/core/graph.hpp"
#include "hyperflow/model/influence.hpp"
#include "hyperflow/model/nn.hpp"
#include "hyperflow/train/objective.hpp"

#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace hyperflow {

enum class OptimizerKind { adam, sgd };
enum class TrainMode { pluggable, unpluggable };

struct TrainConfig {
  double margin_pos = 0.1;
  double margin_neg = 1.0;
  std::size_t neg_ratio = 10;
  std::size_t epochs = 200;
  double learning_rate = 0.01;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::pluggable;
  double task_weight = 1.0;  // lambda
  bool resample_negatives = true;
  ModelShape shape;
  Activation activation = Activation::relu;
  std::size_t hops = 2;
  double gamma = 0.5;

  void validate() const {
    if (!(margin_neg > margin_pos && margin_pos >= 0.0)) throw ConfigError("margins must satisfy m_n > m_p >= 0");
    if (neg_ratio < 1) throw ConfigError("negative ratio must be at least 1");
    if (learning_rate < 0.0) throw ConfigError("learning rate must be nonnegative");
    if (hops < 1) throw ConfigError("hop count must be at least 1");
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("decay must lie in [0, 1]");
    if (shape.layers < 1) throw ConfigError("at least one layer");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;  // total, including the weighted task term
  double pos_term = 0.0;
  double neg_term = 0.0;
  double task_term = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> history;
};

class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(std::string msg, std::vector<EpochRecord> history)
      : NumericError(std::move(msg)), history(std::move(history)) {}
  std::vector<EpochRecord> history;
};

/// Loss terms and gradients at one parameter point for a fixed pair batch.
struct Evaluation {
  LossValue contrastive;
  double task = 0.0;
  double total = 0.0;
  ModelParams grads;
};

inline Evaluation evaluate(const Matrix& x, const GraphOperators& ops, const ModelParams& p, const PairBatch& batch,
                           const TrainConfig& cfg, const TaskData* task = nullptr, const LinkBatch* link = nullptr,
                           bool with_grads = true) {
  const ForwardCache c = forward(x, ops, p);
  Evaluation ev;
  Matrix g_hat;
  ev.contrastive = dual_contrastive_loss(x, c.emb.x_hat, batch, cfg.margin_pos, cfg.margin_neg, with_grads ? &g_hat : nullptr);
  Matrix g_enc;
  const bool has_task = task && task->kind != TaskKind::none && cfg.task_weight != 0.0;
  if (has_task) {
    if (task->kind == TaskKind::link_prediction) {
      require(link != nullptr, "link task needs a sampled batch");
      ev.task = link_logistic_loss(c.emb.r_encode, *link, with_grads ? &g_enc : nullptr);
    } else {
      ev.task = rating_l1_loss(c.emb.r_encode, task->pairs, task->targets, with_grads ? &g_enc : nullptr);
    }
    if (with_grads) g_enc *= cfg.task_weight;
  }
  ev.total = ev.contrastive.total + cfg.task_weight * ev.task * (has_task ? 1.0 : 0.0);
  if (with_grads) {
    ev.grads = backward(ops, p, c, g_hat, has_task ? &g_enc : nullptr);
    const auto names = p.tensor_names();
    const auto gs = ev.grads.tensors();
    for (std::size_t i = 0; i < gs.size(); ++i)
      if (!gs[i]->allFinite()) throw NumericError("non-finite gradient in " + names[i]);
  }
  return ev;
}

/// Seeded parameter initialization shared by train() and train_with_task().
inline ModelParams initial_params(std::size_t in_dim, const TrainConfig& cfg) {
  ModelShape shape = cfg.shape;
  shape.in_dim = in_dim;
  Rng rng = make_rng(cfg.seed, "train/init");
  ModelParams p = ModelParams::init(shape, rng);
  p.activation = cfg.activation;
  p.hops = cfg.hops;
  p.gamma = cfg.gamma;
  return p;
}

using EpochCallback = std::function<void(std::size_t epoch, const ModelParams&)>;

namespace detail {

inline TrainResult run_training(const Hypergraph& g, const GraphOperators& ops, const TrainConfig& cfg,
                                const TaskData* task, const EpochCallback& on_epoch) {
  cfg.validate();
  const Matrix& x = g.features();
  TrainResult res;
  res.params = initial_params(g.feature_dim(), cfg);
  Adam adam(cfg.learning_rate);
  Sgd sgd(cfg.learning_rate);
  const std::uint64_t neg_root = derive_seed(cfg.seed, "train/negatives");
  const std::uint64_t task_root = derive_seed(cfg.seed, "train/task");
  PairBatch batch;
  if (on_epoch) on_epoch(0, res.params);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (epoch == 1 || cfg.resample_negatives) {
      Rng rng(derive_seed(neg_root, cfg.resample_negatives ? epoch : 1));
      batch = sample_pairs(g.pairwise(), cfg.neg_ratio, rng);
    }
    LinkBatch link;
    if (task && task->kind == TaskKind::link_prediction) {
      Rng rng(derive_seed(task_root, epoch));
      link = sample_link_batch(*task, rng);
    }
    const Evaluation ev = evaluate(x, ops, res.params, batch, cfg, task, &link);
    EpochRecord rec{epoch, ev.total, ev.contrastive.positive, ev.contrastive.negative, ev.task};
    res.history.push_back(rec);
    if (!std::isfinite(ev.total)) throw TrainingDiverged("loss diverged at epoch " + std::to_string(epoch), res.history);
    if (cfg.optimizer == OptimizerKind::adam)
      adam.step(res.params.tensors(), ev.grads.tensors());
    else
      sgd.step(res.params.tensors(), ev.grads.tensors());
    if (on_epoch) on_epoch(epoch, res.params);
  }
  return res;
}

}  // namespace detail

/// Self-supervised ("pluggable") training: full-batch steps on the dual-contrastive loss.
inline TrainResult train(const Hypergraph& g, const GraphOperators& ops, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  return detail::run_training(g, ops, cfg, nullptr, on_epoch);
}

/// Joint ("unpluggable") training: contrastive loss + lambda * task loss.
inline TrainResult train_with_task(const Hypergraph& g, const GraphOperators& ops, const TrainConfig& cfg,
                                   const TaskData& task, const EpochCallback& on_epoch = {}) {
  if (task.kind == TaskKind::none) throw ConfigError("unknown task for joint training");
  return detail::run_training(g, ops, cfg, &task, on_epoch);
}

/// Adds N(0, sigma^2) noise to every entry, biases included, so that a probe point does not sit
/// on the exact rectifier kinks that zero-initialized biases can produce.
inline ModelParams perturbed(const ModelParams& p, double sigma, Rng& rng) {
  ModelParams q = p;
  for (Matrix* m : q.tensors())
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] += sigma * standard_normal(rng);
  return q;
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t points = 0;
  std::size_t entries = 0;
  std::size_t skipped = 0;  // entries whose difference step straddles a kink
};

/// Which side of every kink the point lies on: rectifier pre-activations (for relu) and
/// the two margin clamps of the contrastive loss.
inline std::vector<bool> kink_pattern(const Matrix& x, const GraphOperators& ops, const ModelParams& p,
                                      const PairBatch& batch, const TrainConfig& cfg) {
  const ForwardCache c = forward(x, ops, p);
  std::vector<bool> out;
  auto add = [&](const Matrix& z) {
    for (Eigen::Index i = 0; i < z.size(); ++i) out.push_back(z.data()[i] > 0.0);
  };
  if (p.activation == Activation::relu) {
    for (const auto& z : c.hyper_z) add(z);
    for (const auto& z : c.pair_z) add(z);
    add(c.line_z);
    add(c.dec_z);
  }
  const Matrix& xh = c.emb.x_hat;
  for (auto [u, v] : batch.positives) out.push_back((x.row(u) - xh.row(v)).squaredNorm() > cfg.margin_pos);
  for (auto [u, v] : batch.negatives) out.push_back((x.row(u) - xh.row(v)).squaredNorm() < cfg.margin_neg);
  return out;
}

inline constexpr double kGradCheckFloor = 1e-6;

/// |a - n| / max(|a|, |n|, floor): relative error with a floor so exact zeros compare sanely.
inline double relative_error(double analytic, double numeric, double floor = kGradCheckFloor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares analytic gradients against central differences on every parameter entry. The
/// relative-error floor grows with |loss|: central-difference roundoff is about
/// machine-epsilon * |loss| / eps, so smaller gradient entries cannot be resolved.
inline GradCheckReport gradient_check(const Matrix& x, const GraphOperators& ops, const ModelParams& params,
                                      const PairBatch& batch, const TrainConfig& cfg, double eps = 1e-5,
                                      const TaskData* task = nullptr, const LinkBatch* link = nullptr,
                                      bool skip_kinks = false) {
  GradCheckReport rep;
  rep.points = 1;
  const Evaluation ev = evaluate(x, ops, params, batch, cfg, task, link);
  const double floor = kGradCheckFloor * std::max(1.0, std::abs(ev.total));
  ModelParams probe = params;
  auto probe_t = probe.tensors();
  auto grad_t = ev.grads.tensors();
  const auto names = params.tensor_names();
  for (std::size_t t = 0; t < probe_t.size(); ++t) {
    Matrix& m = *probe_t[t];
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double orig = m.data()[i];
      m.data()[i] = orig + eps;
      const double up = evaluate(x, ops, probe, batch, cfg, task, link, false).total;
      m.data()[i] = orig - eps;
      const double down = evaluate(x, ops, probe, batch, cfg, task, link, false).total;
      bool straddles = false;
      if (skip_kinks) {
        m.data()[i] = orig + eps;
        const auto hi = kink_pattern(x, ops, probe, batch, cfg);
        m.data()[i] = orig - eps;
        straddles = hi != kink_pattern(x, ops, probe, batch, cfg);
      }
      m.data()[i] = orig;
      if (straddles) {
        ++rep.skipped;
        continue;
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(grad_t[t]->data()[i], numeric, floor);
      ++rep.entries;
      if (err > rep.max_rel_error) {
        rep.max_rel_error = err;
        rep.worst_tensor = names[t];
      }
    }
  }
  return rep;
}

}  // namespace hyperflow
