#pragma once

// Instance-instance spaces: the shared backbone phi, residual conditional
// embeddings psi_k(x) = phi(x) + L_k^T phi(x), and per-condition triplet
// differences Diff^k = |psi_k(x) - psi_k(z)|^2 - |psi_k(x) - psi_k(y)|^2.
//
// Column-vector convention for single vectors; batched functions hold one
// embedding per row, where the same map reads E + E L_k.

#include <string>
#include <vector>

#include "condsim/numcore.hpp"

namespace condsim {

struct BackboneConfig {
  int input_dim = 16;
  int embed_dim = 64;
  int hidden_layers = 1;  // 0: a single affine map
};

inline std::string backbone_weight(int layer) { return "backbone.W" + std::to_string(layer); }
inline std::string backbone_bias(int layer) { return "backbone.b" + std::to_string(layer); }
inline std::string projection_name(int k) { return "proj.L" + std::to_string(k); }

inline void add_backbone_params(ParamStore& ps, const BackboneConfig& cfg) {
  if (cfg.input_dim < 1 || cfg.embed_dim < 1 || cfg.hidden_layers < 0)
    throw ConfigError("backbone: bad dimensions");
  int in = cfg.input_dim;
  for (int l = 0; l <= cfg.hidden_layers; ++l) {
    ps.add(backbone_weight(l), cfg.embed_dim, in);
    ps.add(backbone_bias(l), cfg.embed_dim, 1);
    in = cfg.embed_dim;
  }
}

inline void add_projection_params(ParamStore& ps, int n_embeddings, int embed_dim) {
  if (n_embeddings < 1) throw ConfigError("need at least one conditional embedding");
  for (int k = 0; k < n_embeddings; ++k) ps.add(projection_name(k), embed_dim, embed_dim);
}

struct BackboneTrace {
  std::vector<Mat> inputs;  // input to each layer
  std::vector<Mat> pre;     // pre-activation of each hidden layer
};

// With final_bias=false the last layer's bias is left out. Distances only
// see differences of embeddings, where that bias cancels exactly.
inline Mat backbone_forward(const ParamStore& ps, const BackboneConfig& cfg, const Mat& X,
                            BackboneTrace* trace = nullptr, bool final_bias = true) {
  if (X.cols() != cfg.input_dim)
    throw ConfigError("backbone expects " + std::to_string(cfg.input_dim) + " inputs, got " +
                      std::to_string(X.cols()));
  if (trace) {
    trace->inputs.clear();
    trace->pre.clear();
  }
  Mat h = X;
  for (int l = 0; l <= cfg.hidden_layers; ++l) {
    if (trace) trace->inputs.push_back(h);
    Mat a = (l < cfg.hidden_layers || final_bias)
                ? affine_rows(ps.value(backbone_weight(l)), ps.value(backbone_bias(l)), h)
                : Mat(h * ps.value(backbone_weight(l)).transpose());
    if (l < cfg.hidden_layers) {
      h = relu_rows(a);
      if (trace) trace->pre.push_back(std::move(a));
    } else {
      h = std::move(a);
    }
  }
  return h;
}

inline void backbone_backward(ParamStore& ps, const BackboneConfig& cfg,
                              const BackboneTrace& trace, const Mat& dE) {
  Mat d = dE;
  for (int l = cfg.hidden_layers; l >= 0; --l) {
    if (l < cfg.hidden_layers) d = relu_backward(trace.pre[l], d);
    Param& W = ps.at(backbone_weight(l));
    Param& b = ps.at(backbone_bias(l));
    Mat dIn = affine_rows_backward(W.value, trace.inputs[l], d, W.grad, b.grad);
    if (l > 0) d = std::move(dIn);
  }
}

inline Vec embed(const ParamStore& ps, const BackboneConfig& cfg, const Vec& x) {
  if (x.size() != cfg.input_dim)
    throw ConfigError("embed: expected dimension " + std::to_string(cfg.input_dim) +
                      ", got " + std::to_string(x.size()));
  Mat row = x.transpose();
  return backbone_forward(ps, cfg, row).row(0).transpose();
}

inline Vec conditional_embed(const Vec& e, const Mat& L) { return e + L.transpose() * e; }

inline double cond_distance2(const Vec& e1, const Vec& e2, const Mat& L) {
  return conditional_embed(e1 - e2, L).squaredNorm();
}

inline double triplet_diff(const Vec& ex, const Vec& ey, const Vec& ez, const Mat& L) {
  return cond_distance2(ex, ez, L) - cond_distance2(ex, ey, L);
}

inline Vec diff_all(const Vec& ex, const Vec& ey, const Vec& ez, const std::vector<Mat>& Ls) {
  Vec out(static_cast<Eigen::Index>(Ls.size()));
  for (std::size_t k = 0; k < Ls.size(); ++k) out(k) = triplet_diff(ex, ey, ez, Ls[k]);
  return out;
}

// Embeddings of a batch of triplets, one triplet per row.
struct TripletEmbeddings {
  Mat ex, ey, ez;
};

// B x K matrix of Diff^k. Works on differences since psi_k is linear, which
// keeps Diff(x, z, y) the exact negation of Diff(x, y, z).
inline Mat diffs_rows(const TripletEmbeddings& E, const std::vector<const Mat*>& Ls) {
  const Mat A = E.ex - E.ez;
  const Mat B = E.ex - E.ey;
  Mat out(E.ex.rows(), static_cast<Eigen::Index>(Ls.size()));
  for (std::size_t k = 0; k < Ls.size(); ++k) {
    const Mat PA = A + A * (*Ls[k]);
    const Mat PB = B + B * (*Ls[k]);
    out.col(k) = PA.rowwise().squaredNorm() - PB.rowwise().squaredNorm();
  }
  return out;
}

struct TripletEmbeddingGrads {
  Mat dx, dy, dz;
  explicit TripletEmbeddingGrads(Eigen::Index rows = 0, Eigen::Index cols = 0)
      : dx(Mat::Zero(rows, cols)), dy(Mat::Zero(rows, cols)), dz(Mat::Zero(rows, cols)) {}
};

// Backward of diffs_rows given dL/dDiff (B x K); accumulates into dLs and dE.
inline void diffs_rows_backward(const TripletEmbeddings& E, const std::vector<const Mat*>& Ls,
                                const Mat& dDiff, const std::vector<Mat*>& dLs,
                                TripletEmbeddingGrads& dE) {
  const Mat A = E.ex - E.ez;
  const Mat B = E.ex - E.ey;
  for (std::size_t k = 0; k < Ls.size(); ++k) {
    const Mat& L = *Ls[k];
    const Vec g = dDiff.col(k);
    if (g.isZero(0.0)) continue;
    const Mat PA = A + A * L;
    const Mat PB = B + B * L;
    const Mat dPA = 2.0 * (PA.array().colwise() * g.array()).matrix();
    const Mat dPB = -2.0 * (PB.array().colwise() * g.array()).matrix();
    dLs[k]->noalias() += A.transpose() * dPA + B.transpose() * dPB;
    const Mat dA = dPA + dPA * L.transpose();
    const Mat dB = dPB + dPB * L.transpose();
    dE.dx += dA + dB;
    dE.dz -= dA;
    dE.dy -= dB;
  }
}

}  // namespace condsim
