#pragma once

// Model parameters and the batched forward/backward passes shared by the
// training losses and the evaluation protocol.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "condsim/condspace.hpp"
#include "condsim/datagen.hpp"
#include "condsim/embeddings.hpp"
#include "condsim/numcore.hpp"

namespace condsim {

enum class Variant {
  disc_set,    // expected distance, order-invariant set encoder
  disc_reg,    // expected distance, order-aware encoder + semantic regularizer
  supervised,  // label-indicator selection of Diff^k
  fusion,      // expected distance, order-aware encoder, no regularizer
};

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::disc_set: return "disc_set";
    case Variant::disc_reg: return "disc_reg";
    case Variant::supervised: return "supervised";
    case Variant::fusion: return "fusion";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "disc_set") return Variant::disc_set;
  if (s == "disc_reg") return Variant::disc_reg;
  if (s == "supervised") return Variant::supervised;
  if (s == "fusion") return Variant::fusion;
  throw ConfigError("unknown variant '" + s + "'");
}

inline EncoderVariant default_encoder(Variant v) {
  return v == Variant::disc_set ? EncoderVariant::set2 : EncoderVariant::seq3;
}

struct ModelConfig {
  int input_dim = 16;
  int embed_dim = 64;
  int hidden_layers = 1;
  int n_embeddings = 4;  // K
  EncoderVariant encoder = EncoderVariant::set2;
  double temperature = 1.0;

  BackboneConfig backbone() const { return {input_dim, embed_dim, hidden_layers}; }
};

struct Model {
  ModelConfig config;
  ParamStore params;

  std::vector<const Mat*> projections() const {
    std::vector<const Mat*> out;
    for (int k = 0; k < config.n_embeddings; ++k)
      out.push_back(&params.value(projection_name(k)));
    return out;
  }
  std::vector<Mat*> projection_grads() {
    std::vector<Mat*> out;
    for (int k = 0; k < config.n_embeddings; ++k) out.push_back(&params.grad(projection_name(k)));
    return out;
  }
  const Mat& anchors() const { return params.value(kAnchors); }
};

// FC layers ~ N(0, 1/sqrt(fan_in)), biases 0, projections L_k = 0, anchors
// ~ N(0, 1/sqrt(d)).
inline Model init_model(const ModelConfig& cfg, std::uint64_t seed) {
  if (!(cfg.temperature > 0.0)) throw ConfigError("temperature must be > 0");
  Model m;
  m.config = cfg;
  m.params = ParamStore(seed);
  add_backbone_params(m.params, cfg.backbone());
  add_projection_params(m.params, cfg.n_embeddings, cfg.embed_dim);
  add_encoder_params(m.params, cfg.embed_dim);
  add_anchor_params(m.params, cfg.n_embeddings, cfg.embed_dim);

  Rng rng(seed);
  for (auto& p : m.params.params()) {
    const bool is_weight = p.name.starts_with("backbone.W") || p.name.starts_with("enc.W");
    if (is_weight) fill_gaussian(p.value, 1.0 / std::sqrt(static_cast<double>(p.value.cols())), rng);
  }
  fill_gaussian(m.params.value(kAnchors), 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim)),
                rng);
  return m;
}

// ---------------------------------------------------------------------------
// Batched forward over a span of triplets.

struct ForwardPass {
  BackboneTrace backbone;
  TripletEmbeddings emb;  // without the final backbone bias (cancels in Diff)
  TripletEmbeddings enc;  // full embeddings, the encoder's input
  Mat diffs;  // B x K
  // Filled when condition weights are requested.
  EncoderTrace encoder;
  WeightsTrace weights_trace;
  Mat weights;  // B x K
};

inline Mat gather_rows(const Mat& instances, std::span<const Triplet> ts) {
  const auto b = static_cast<Eigen::Index>(ts.size());
  Mat X(3 * b, instances.cols());
  for (Eigen::Index i = 0; i < b; ++i) {
    const Triplet& t = ts[static_cast<std::size_t>(i)];
    X.row(i) = instances.row(t.x);
    X.row(b + i) = instances.row(t.y);
    X.row(2 * b + i) = instances.row(t.z);
  }
  return X;
}

inline ForwardPass forward(const Model& m, const Mat& instances, std::span<const Triplet> ts,
                           bool with_weights, bool keep_trace = false) {
  if (instances.cols() != m.config.input_dim)
    throw ConfigError("instances have dimension " + std::to_string(instances.cols()) +
                      ", model expects " + std::to_string(m.config.input_dim));
  ForwardPass fp;
  const auto b = static_cast<Eigen::Index>(ts.size());
  const Mat X = gather_rows(instances, ts);
  const Mat E = backbone_forward(m.params, m.config.backbone(), X,
                                 keep_trace ? &fp.backbone : nullptr, false);
  fp.emb.ex = E.topRows(b);
  fp.emb.ey = E.middleRows(b, b);
  fp.emb.ez = E.bottomRows(b);
  fp.diffs = diffs_rows(fp.emb, m.projections());
  if (with_weights) {
    const auto bias = m.params.value(backbone_bias(m.config.hidden_layers)).col(0).transpose();
    fp.enc.ex = fp.emb.ex.rowwise() + bias;
    fp.enc.ey = fp.emb.ey.rowwise() + bias;
    fp.enc.ez = fp.emb.ez.rowwise() + bias;
    const Mat G = encode_rows(m.params, fp.enc.ex, fp.enc.ey, fp.enc.ez, m.config.encoder,
                              keep_trace ? &fp.encoder : nullptr);
    fp.weights = condition_weights_rows(G, m.anchors(), m.config.temperature,
                                        keep_trace ? &fp.weights_trace : nullptr);
  }
  return fp;
}

// Condition weights of the reversed triplets (x, z, y), reusing the
// embeddings of a forward pass.
struct ReversedWeights {
  EncoderTrace encoder;
  WeightsTrace weights_trace;
  Mat weights;
};

inline ReversedWeights reversed_weights(const Model& m, const ForwardPass& fp) {
  ReversedWeights rw;
  const Mat G = encode_rows(m.params, fp.enc.ex, fp.enc.ez, fp.enc.ey, m.config.encoder,
                            &rw.encoder);
  rw.weights = condition_weights_rows(G, m.anchors(), m.config.temperature, &rw.weights_trace);
  return rw;
}

// Gradients flowing into one forward pass (and optionally its reversed
// weights); accumulated into m.params' gradient buffers.
inline void backward(Model& m, const ForwardPass& fp, const Mat& dDiffs, const Mat* dWeights,
                     const ReversedWeights* rev = nullptr, const Mat* dRevWeights = nullptr) {
  const Eigen::Index b = fp.emb.ex.rows();
  const Eigen::Index d = fp.emb.ex.cols();
  TripletEmbeddingGrads dE(b, d);
  diffs_rows_backward(fp.emb, m.projections(), dDiffs, m.projection_grads(), dE);

  Mat& dAnchors = m.params.grad(kAnchors);
  if (dWeights) {
    const Mat dG = condition_weights_rows_backward(m.anchors(), m.config.temperature,
                                                   fp.weights_trace, *dWeights, dAnchors);
    encode_rows_backward(m.params, fp.encoder, dG, dE);
  }
  if (rev && dRevWeights) {
    const Mat dG = condition_weights_rows_backward(m.anchors(), m.config.temperature,
                                                   rev->weights_trace, *dRevWeights, dAnchors);
    // The reversed encoder saw (x, z, y): swap y/z gradients back.
    TripletEmbeddingGrads dR(b, d);
    encode_rows_backward(m.params, rev->encoder, dG, dR);
    dE.dx += dR.dx;
    dE.dy += dR.dz;
    dE.dz += dR.dy;
  }

  Mat dStack(3 * b, d);
  dStack << dE.dx, dE.dy, dE.dz;
  backbone_backward(m.params, m.config.backbone(), fp.backbone, dStack);
}

// Single-triplet conveniences.
inline Vec triplet_diffs(const Model& m, const Mat& instances, const Triplet& t) {
  const Triplet one[1] = {t};
  return forward(m, instances, one, false).diffs.row(0).transpose();
}

inline Vec triplet_weights(const Model& m, const Mat& instances, const Triplet& t) {
  const Triplet one[1] = {t};
  return forward(m, instances, one, true).weights.row(0).transpose();
}

}  // namespace condsim
