#pragma once

// Triplets-condition space: a triplet is summarized by g(tau) =
// FC2(max_p ReLU(FC1(p))) over pairwise concatenations p of its instance
// embeddings, then matched against K anchors by temperature softmax over
// cosine similarities.

#include <string>
#include <vector>

#include "condsim/embeddings.hpp"
#include "condsim/numcore.hpp"

namespace condsim {

enum class EncoderVariant {
  set2,  // {[x,y], [x,z]}: identical for a triplet and its reversal
  seq3,  // {[x,y], [x,z], [y,z]}: order-aware
};

inline const char* encoder_name(EncoderVariant v) {
  return v == EncoderVariant::set2 ? "set2" : "seq3";
}

inline EncoderVariant parse_encoder(const std::string& s) {
  if (s == "set2") return EncoderVariant::set2;
  if (s == "seq3") return EncoderVariant::seq3;
  throw ConfigError("unknown encoder variant '" + s + "'");
}

inline int pair_count(EncoderVariant v) { return v == EncoderVariant::set2 ? 2 : 3; }

inline constexpr const char* kEncW1 = "enc.W1";
inline constexpr const char* kEncB1 = "enc.b1";
inline constexpr const char* kEncW2 = "enc.W2";
inline constexpr const char* kEncB2 = "enc.b2";
inline constexpr const char* kAnchors = "anchors";

inline void add_encoder_params(ParamStore& ps, int embed_dim) {
  ps.add(kEncW1, 2 * embed_dim, 2 * embed_dim);
  ps.add(kEncB1, 2 * embed_dim, 1);
  ps.add(kEncW2, embed_dim, 2 * embed_dim);
  ps.add(kEncB2, embed_dim, 1);
}

// Anchors are stored one per row (K x d).
inline void add_anchor_params(ParamStore& ps, int n_anchors, int embed_dim) {
  ps.add(kAnchors, n_anchors, embed_dim);
}

inline std::vector<Vec> pair_set(const Vec& ex, const Vec& ey, const Vec& ez,
                                 EncoderVariant variant) {
  auto cat = [](const Vec& a, const Vec& b) {
    Vec p(a.size() + b.size());
    p << a, b;
    return p;
  };
  std::vector<Vec> pairs{cat(ex, ey), cat(ex, ez)};
  if (variant == EncoderVariant::seq3) pairs.push_back(cat(ey, ez));
  return pairs;
}

inline Vec encode(const ParamStore& ps, const std::vector<Vec>& pairs) {
  if (pairs.empty()) throw ConfigError("encode: empty pair list");
  const Mat& W1 = ps.value(kEncW1);
  const Vec b1 = ps.value(kEncB1).col(0);
  Vec m = relu(affine(W1, b1, pairs[0]));
  for (std::size_t p = 1; p < pairs.size(); ++p) m = m.cwiseMax(relu(affine(W1, b1, pairs[p])));
  return affine(ps.value(kEncW2), ps.value(kEncB2).col(0), m);
}

inline Vec condition_weights(const Vec& g, const Mat& anchors, double temperature) {
  if (anchors.cols() != g.size()) throw ConfigError("condition_weights: dimension mismatch");
  Vec s(anchors.rows());
  for (Eigen::Index k = 0; k < anchors.rows(); ++k)
    s(k) = cosine(g, anchors.row(k).transpose());
  return softmax_temp(s, temperature);
}

// ---------------------------------------------------------------------------
// Batched encoder: rows of ex/ey/ez are the triplet members.

struct EncoderTrace {
  std::vector<Mat> pair_inputs;  // each B x 2d, in construction order
  std::vector<Mat> pre;          // FC1 pre-activations, B x 2d
  Eigen::MatrixXi argmax;        // winning pair per element, B x 2d
  Mat pooled;                    // B x 2d
};

inline Mat encode_rows(const ParamStore& ps, const Mat& ex, const Mat& ey, const Mat& ez,
                       EncoderVariant variant, EncoderTrace* trace = nullptr) {
  const Eigen::Index rows = ex.rows();
  const Eigen::Index d = ex.cols();
  auto cat = [&](const Mat& a, const Mat& b) {
    Mat p(rows, 2 * d);
    p << a, b;
    return p;
  };
  std::vector<Mat> pairs{cat(ex, ey), cat(ex, ez)};
  if (variant == EncoderVariant::seq3) pairs.push_back(cat(ey, ez));

  const Mat& W1 = ps.value(kEncW1);
  const Mat& b1 = ps.value(kEncB1);
  std::vector<Mat> pre;
  pre.reserve(pairs.size());
  for (const auto& p : pairs) pre.push_back(affine_rows(W1, b1, p));

  Mat pooled = relu_rows(pre[0]);
  Eigen::MatrixXi arg = Eigen::MatrixXi::Zero(rows, 2 * d);
  for (std::size_t p = 1; p < pre.size(); ++p) {
    for (Eigen::Index j = 0; j < pooled.cols(); ++j)
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double v = std::max(pre[p](i, j), 0.0);
        if (v > pooled(i, j)) {
          pooled(i, j) = v;
          arg(i, j) = static_cast<int>(p);
        }
      }
  }
  Mat g = affine_rows(ps.value(kEncW2), ps.value(kEncB2), pooled);
  if (trace) {
    trace->pair_inputs = std::move(pairs);
    trace->pre = std::move(pre);
    trace->argmax = std::move(arg);
    trace->pooled = std::move(pooled);
  }
  return g;
}

// Pair p's halves map back to (first, second) triplet members.
inline std::pair<int, int> pair_members(int p) {
  switch (p) {
    case 0: return {0, 1};
    case 1: return {0, 2};
    default: return {1, 2};
  }
}

inline void encode_rows_backward(ParamStore& ps, const EncoderTrace& trace, const Mat& dG,
                                 TripletEmbeddingGrads& dE) {
  Param& W2 = ps.at(kEncW2);
  Param& b2 = ps.at(kEncB2);
  const Mat dPooled = affine_rows_backward(W2.value, trace.pooled, dG, W2.grad, b2.grad);
  Param& W1 = ps.at(kEncW1);
  Param& b1 = ps.at(kEncB1);
  const Eigen::Index d = dE.dx.cols();
  for (std::size_t p = 0; p < trace.pre.size(); ++p) {
    Mat dPre = (trace.argmax.array() == static_cast<int>(p) && trace.pre[p].array() > 0.0)
                   .select(dPooled, 0.0);
    if (dPre.isZero(0.0)) continue;
    const Mat dIn = affine_rows_backward(W1.value, trace.pair_inputs[p], dPre, W1.grad, b1.grad);
    auto [a, b] = pair_members(static_cast<int>(p));
    Mat* targets[3] = {&dE.dx, &dE.dy, &dE.dz};
    *targets[a] += dIn.leftCols(d);
    *targets[b] += dIn.rightCols(d);
  }
}

// ---------------------------------------------------------------------------
// Batched condition weights.

struct WeightsTrace {
  Mat G;        // B x d
  Mat weights;  // B x K
};

inline Mat condition_weights_rows(const Mat& G, const Mat& anchors, double temperature,
                                  WeightsTrace* trace = nullptr) {
  if (anchors.cols() != G.cols()) throw ConfigError("condition_weights: dimension mismatch");
  Mat W(G.rows(), anchors.rows());
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    const Vec g = G.row(i).transpose();
    W.row(i) = condition_weights(g, anchors, temperature).transpose();
  }
  if (trace) {
    trace->G = G;
    trace->weights = W;
  }
  return W;
}

// Given dL/dweights (B x K); accumulates into the anchor gradient, returns dG.
inline Mat condition_weights_rows_backward(const Mat& anchors, double temperature,
                                           const WeightsTrace& trace, const Mat& dW,
                                           Mat& dAnchors) {
  Mat dG = Mat::Zero(trace.G.rows(), trace.G.cols());
  for (Eigen::Index i = 0; i < trace.G.rows(); ++i) {
    const Vec dw = dW.row(i).transpose();
    if (dw.isZero(0.0)) continue;
    const Vec p = trace.weights.row(i).transpose();
    const Vec ds = softmax_temp_backward(p, dw, temperature);
    const Vec g = trace.G.row(i).transpose();
    for (Eigen::Index k = 0; k < anchors.rows(); ++k) {
      if (ds(k) == 0.0) continue;
      const CosineGrad cg = cosine_backward(g, anchors.row(k).transpose(), ds(k));
      dG.row(i) += cg.du.transpose();
      dAnchors.row(k) += cg.dv.transpose();
    }
  }
  return dG;
}

}  // namespace condsim
