#pragma once

// Training objectives and the training loop.
//
//   disc_set, fusion, disc_reg:  mean_tau l(E_c[Diff^k] - margin)
//   supervised:                  mean_tau l(Diff^{label} - margin)
//   disc_reg adds lambda * HIK(c_tau, c_reverse(tau)) for gated triplets.

#include <algorithm>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "condsim/aligneval.hpp"
#include "condsim/losses.hpp"
#include "condsim/model.hpp"

namespace condsim {

enum class LossKind { margin, logistic };

inline const char* loss_name(LossKind k) { return k == LossKind::margin ? "margin" : "logistic"; }

inline LossKind parse_loss(const std::string& s) {
  if (s == "margin") return LossKind::margin;
  if (s == "logistic") return LossKind::logistic;
  throw ConfigError("unknown loss '" + s + "'");
}

// When the semantic regularizer fires for a (triplet, reversal) pair.
enum class GateMode {
  fused,   // both fused predictions sum_k c^k Diff^k are valid
  argmax,  // each is valid under its own most likely condition
  per_k,   // some single k has Diff^k > 0 for both; never fires since the
           // reversal negates every Diff^k, kept for comparison
};

inline const char* gate_name(GateMode g) {
  switch (g) {
    case GateMode::fused: return "fused";
    case GateMode::argmax: return "argmax";
    case GateMode::per_k: return "per_k";
  }
  return "?";
}

inline GateMode parse_gate(const std::string& s) {
  if (s == "fused") return GateMode::fused;
  if (s == "argmax") return GateMode::argmax;
  if (s == "per_k") return GateMode::per_k;
  throw ConfigError("unknown gate mode '" + s + "'");
}

struct TrainConfig {
  Variant variant = Variant::disc_set;
  LossKind loss = LossKind::margin;
  double margin = 1.0;
  double lambda = 1e-3;
  GateMode gate = GateMode::fused;
  double lr = 0.01;
  int epochs = 90;
  int lr_decay_every = 30;
  double lr_decay = 0.1;
  int batch_size = 64;
  OptimizerMode optimizer = OptimizerMode::adam;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (!(margin > 0.0)) throw ConfigError("margin must be > 0");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
    if (lr_decay_every < 1) throw ConfigError("lr decay period must be >= 1");
    if (!(lr_decay > 0.0)) throw ConfigError("lr decay factor must be > 0");
  }
};

struct LossBreakdown {
  double total = 0.0;
  double main = 0.0;
  double reg = 0.0;
  long gated = 0;
};

inline double apply_loss(LossKind kind, double t) {
  return kind == LossKind::margin ? margin_loss(t) : logistic_loss(t);
}
inline double apply_loss_grad(LossKind kind, double t) {
  return kind == LossKind::margin ? margin_loss_grad(t) : logistic_loss_grad(t);
}

inline Eigen::Index argmax_first(const Vec& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

// Gate evaluated on values only; it never carries gradient.
inline bool regularizer_gate(GateMode mode, const Vec& diffs, const Vec& w1, const Vec& w2) {
  if (mode == GateMode::fused) return w1.dot(diffs) > 0.0 && w2.dot(-diffs) > 0.0;
  if (mode == GateMode::per_k) {
    for (Eigen::Index k = 0; k < diffs.size(); ++k)
      if (diffs(k) > 0.0 && -diffs(k) > 0.0) return true;
    return false;
  }
  return diffs(argmax_first(w1)) > 0.0 && -diffs(argmax_first(w2)) > 0.0;
}

// lambda * HIK(c1, c2) if the gate is open, else 0.
inline double semantic_regularizer(GateMode mode, const Vec& diffs, const Vec& w1, const Vec& w2,
                                   double lambda) {
  return regularizer_gate(mode, diffs, w1, w2) ? lambda * hik(w1, w2) : 0.0;
}

inline double semantic_regularizer(const Model& m, const Mat& instances, const Triplet& t,
                                   GateMode mode, double lambda) {
  const Triplet one[1] = {t};
  const ForwardPass fp = forward(m, instances, one, true, true);
  const ReversedWeights rw = reversed_weights(m, fp);
  return semantic_regularizer(mode, fp.diffs.row(0).transpose(), fp.weights.row(0).transpose(),
                              rw.weights.row(0).transpose(), lambda);
}

inline void check_model_for(const Model& m, const TrainConfig& cfg, int n_conditions) {
  if (cfg.variant == Variant::supervised && n_conditions > m.config.n_embeddings)
    throw ConfigError("supervised variant needs one embedding per condition");
  if (cfg.variant == Variant::disc_set && m.config.encoder != EncoderVariant::set2)
    throw ConfigError("disc_set requires the set2 encoder");
}

// Mean loss over the batch; with accumulate_grads the gradient of that mean
// is added into m.params.
inline LossBreakdown batch_loss(Model& m, const Mat& instances, std::span<const Triplet> batch,
                                const TrainConfig& cfg, bool accumulate_grads) {
  LossBreakdown out;
  if (batch.empty()) return out;
  const bool supervised = cfg.variant == Variant::supervised;
  if (supervised) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (!batch[i].cond) throw DataError("supervised training needs condition labels");
      if (*batch[i].cond >= m.config.n_embeddings)
        throw DataError("condition label exceeds the number of embeddings");
    }
  }
  const bool regularize = cfg.variant == Variant::disc_reg;
  const ForwardPass fp = forward(m, instances, batch, !supervised, accumulate_grads);
  const Eigen::Index b = fp.diffs.rows();
  const Eigen::Index k = fp.diffs.cols();
  const double inv_b = 1.0 / static_cast<double>(b);

  Mat dDiffs = Mat::Zero(b, k);
  Mat dWeights = Mat::Zero(b, supervised ? 0 : k);
  for (Eigen::Index i = 0; i < b; ++i) {
    double s;
    if (supervised) {
      s = fp.diffs(i, *batch[static_cast<std::size_t>(i)].cond);
    } else {
      s = fp.weights.row(i).dot(fp.diffs.row(i));
    }
    const double t = s - cfg.margin;
    out.main += apply_loss(cfg.loss, t);
    if (!accumulate_grads) continue;
    const double ds = apply_loss_grad(cfg.loss, t) * inv_b;
    if (ds == 0.0) continue;
    if (supervised) {
      dDiffs(i, *batch[static_cast<std::size_t>(i)].cond) += ds;
    } else {
      dDiffs.row(i) += ds * fp.weights.row(i);
      dWeights.row(i) += ds * fp.diffs.row(i);
    }
  }
  out.main *= inv_b;

  std::optional<ReversedWeights> rev;
  Mat dRev;
  if (regularize) {
    rev = reversed_weights(m, fp);
    dRev = Mat::Zero(b, k);
    for (Eigen::Index i = 0; i < b; ++i) {
      const Vec d = fp.diffs.row(i).transpose();
      const Vec w1 = fp.weights.row(i).transpose();
      const Vec w2 = rev->weights.row(i).transpose();
      if (!regularizer_gate(cfg.gate, d, w1, w2)) continue;
      ++out.gated;
      out.reg += cfg.lambda * hik(w1, w2);
      if (accumulate_grads && cfg.lambda > 0.0) {
        Vec g1, g2;
        hik_backward(w1, w2, cfg.lambda * inv_b, g1, g2);
        dWeights.row(i) += g1.transpose();
        dRev.row(i) += g2.transpose();
      }
    }
    out.reg *= inv_b;
  }
  out.total = out.main + out.reg;
  if (!std::isfinite(out.total))
    throw NumericError("loss diverged (main=" + format_double(out.main) +
                       ", reg=" + format_double(out.reg) + ")");

  if (accumulate_grads) {
    backward(m, fp, dDiffs, supervised ? nullptr : &dWeights, rev ? &*rev : nullptr,
             rev ? &dRev : nullptr);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double main = 0.0;
  double reg = 0.0;
  long gated = 0;
  std::optional<double> val_gr;
  std::optional<double> val_ot;
};

inline void write_epoch_log(std::ostream& os, const EpochLog& e) {
  os << "epoch=" << e.epoch << " lr=" << format_double(e.lr) << " loss=" << format_double(e.loss)
     << " main=" << format_double(e.main) << " reg=" << format_double(e.reg)
     << " gated=" << e.gated;
  os << " val_gr=" << (e.val_gr ? format_double(*e.val_gr) : std::string("-"));
  os << " val_ot=" << (e.val_ot ? format_double(*e.val_ot) : std::string("-")) << '\n';
}

struct FitResult {
  Model model;  // best-validation parameters (final ones without validation)
  std::vector<EpochLog> log;
  int best_epoch = 0;  // 0: the initialization
  double initial_loss = 0.0;
};

inline double learning_rate_at(const TrainConfig& cfg, int epoch0) {
  return cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch0 / cfg.lr_decay_every));
}

inline LossBreakdown dataset_loss(Model& m, const TripletDataset& ds, const TrainConfig& cfg) {
  LossBreakdown acc;
  const std::span<const Triplet> all(ds.triplets);
  for (std::size_t off = 0; off < all.size(); off += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, all.size() - off);
    const LossBreakdown lb = batch_loss(m, ds.instances, all.subspan(off, n), cfg, false);
    acc.main += lb.main * static_cast<double>(n);
    acc.reg += lb.reg * static_cast<double>(n);
    acc.gated += lb.gated;
  }
  const double inv = 1.0 / static_cast<double>(std::max<std::size_t>(all.size(), 1));
  acc.main *= inv;
  acc.reg *= inv;
  acc.total = acc.main + acc.reg;
  return acc;
}

using EpochCallback = std::function<void(const EpochLog&)>;

inline FitResult fit(const TripletDataset& train, const TripletDataset* val,
                     const ModelConfig& model_cfg, const TrainConfig& cfg,
                     const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (train.triplets.empty()) throw DataError("training set is empty");
  if (cfg.variant == Variant::supervised && !train.fully_labeled())
    throw DataError("supervised variant needs fully labeled training triplets");
  if (train.dim() != model_cfg.input_dim)
    throw ConfigError("training data dimension does not match the model");
  if (val && (val->triplets.empty() || !val->fully_labeled())) val = nullptr;

  Model model = init_model(model_cfg, cfg.seed);
  check_model_for(model, cfg, train.n_conditions);

  FitResult res;
  res.initial_loss = dataset_loss(model, train, cfg).total;
  res.model = model;
  if (cfg.epochs == 0) return res;

  double best_val = -1.0;
  if (val) best_val = evaluate(model, *val).ot_accuracy;

  Optimizer opt(cfg.optimizer);
  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Triplet> order(train.triplets);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double lr = learning_rate_at(cfg, epoch);
    EpochLog e;
    e.epoch = epoch + 1;
    e.lr = lr;
    std::size_t seen = 0;
    const std::span<const Triplet> all(order);
    for (std::size_t off = 0; off < all.size(); off += bs) {
      const std::size_t n = std::min(bs, all.size() - off);
      model.params.zero_grads();
      const LossBreakdown lb = batch_loss(model, train.instances, all.subspan(off, n), cfg, true);
      opt.step(model.params, lr);
      e.main += lb.main * static_cast<double>(n);
      e.reg += lb.reg * static_cast<double>(n);
      e.gated += lb.gated;
      seen += n;
    }
    e.main /= static_cast<double>(seen);
    e.reg /= static_cast<double>(seen);
    e.loss = e.main + e.reg;
    if (!std::isfinite(e.loss))
      throw NumericError("training diverged at epoch " + std::to_string(e.epoch));

    if (val) {
      const EvalReport rep = evaluate(model, *val);
      e.val_gr = rep.gr_accuracy;
      e.val_ot = rep.ot_accuracy;
      if (rep.ot_accuracy > best_val) {
        best_val = rep.ot_accuracy;
        res.model = model;
        res.best_epoch = e.epoch;
      }
    }
    res.log.push_back(e);
    if (on_epoch) on_epoch(e);
  }
  model.params.zero_grads();
  if (!val) {
    res.model = model;
    res.best_epoch = cfg.epochs;
  }
  res.model.params.zero_grads();
  return res;
}

}  // namespace condsim
