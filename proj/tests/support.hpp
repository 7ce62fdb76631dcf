#pragma once

// Shared fixtures and independent reference computations for the test suite.
// The oracles here deliberately avoid the library's batched code paths.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "condsim/aligneval.hpp"
#include "condsim/datagen.hpp"
#include "condsim/model.hpp"
#include "condsim/numcore.hpp"
#include "condsim/training.hpp"

namespace testing_support {

using namespace condsim;

inline Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double sd = 1.0) {
  Mat m(r, c);
  fill_gaussian(m, sd, rng);
  return m;
}

inline Vec random_vec(Eigen::Index n, Rng& rng, double sd = 1.0) {
  Mat m = random_mat(n, 1, rng, sd);
  return m.col(0);
}

inline Vec random_simplex(Eigen::Index n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v / v.sum();
}

// Small model with nonzero projections so every code path carries signal.
inline Model small_model(EncoderVariant enc, int k, std::uint64_t seed, int input_dim = 16,
                         int embed_dim = 6, int hidden = 1) {
  ModelConfig mc;
  mc.input_dim = input_dim;
  mc.embed_dim = embed_dim;
  mc.hidden_layers = hidden;
  mc.n_embeddings = k;
  mc.encoder = enc;
  Model m = init_model(mc, seed);
  Rng rng(seed + 1000);
  for (int j = 0; j < k; ++j) fill_gaussian(m.params.value(projection_name(j)), 0.3, rng);
  fill_gaussian(m.params.value(kEncB1), 0.1, rng);
  fill_gaussian(m.params.value(kEncB2), 0.1, rng);
  for (int l = 0; l <= hidden; ++l) fill_gaussian(m.params.value(backbone_bias(l)), 0.1, rng);
  return m;
}

inline TripletDataset small_dataset(int per_condition, std::uint64_t seed, int n_conditions = 4,
                                    int n_instances = 200) {
  WorldConfig wc;
  wc.n_instances = n_instances;
  wc.n_conditions = n_conditions;
  wc.seed = seed;
  return sample_triplets(gen_world(wc), per_condition, seed + 1, Split::test);
}

// Small model after a few epochs of fusion-style training; past the first
// epochs the regularizer gate opens on a fair share of triplets.
inline Model warm_model(EncoderVariant enc, std::uint64_t seed = 8, int epochs = 6) {
  ModelConfig mc;
  mc.input_dim = 16;
  mc.embed_dim = 6;
  mc.n_embeddings = 4;
  mc.encoder = enc;
  TrainConfig tc;
  tc.variant = enc == EncoderVariant::set2 ? Variant::disc_set : Variant::fusion;
  tc.epochs = epochs;
  tc.seed = seed;
  tc.batch_size = 16;
  return fit(small_dataset(100, seed), nullptr, mc, tc).model;
}

// Reference embedding: plain per-vector loop through the MLP.
inline Vec ref_embed(const Model& m, const Vec& x) {
  Vec h = x;
  const int layers = m.config.hidden_layers;
  for (int l = 0; l <= layers; ++l) {
    const Mat& W = m.params.value(backbone_weight(l));
    const Mat& b = m.params.value(backbone_bias(l));
    Vec z = W * h + b.col(0);
    h = (l < layers) ? Vec(z.cwiseMax(0.0)) : z;
  }
  return h;
}

inline double ref_diff(const Vec& ex, const Vec& ey, const Vec& ez, const Mat& L) {
  const Vec px = ex + L.transpose() * ex;
  const Vec py = ey + L.transpose() * ey;
  const Vec pz = ez + L.transpose() * ez;
  return (px - pz).squaredNorm() - (px - py).squaredNorm();
}

// Brute-force minimum over all permutations of a square cost matrix.
inline double brute_force_assignment(const Mat& C, std::vector<int>* best_perm = nullptr) {
  const int n = static_cast<int>(C.rows());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += C(i, perm[static_cast<std::size_t>(i)]);
    if (s < best) {
      best = s;
      if (best_perm) *best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline bool is_scaled_permutation(const Mat& T, double scale, double tol) {
  if (T.rows() != T.cols()) return false;
  for (Eigen::Index r = 0; r < T.rows(); ++r) {
    int big = 0;
    for (Eigen::Index c = 0; c < T.cols(); ++c) {
      if (std::abs(T(r, c) - scale) <= tol)
        ++big;
      else if (std::abs(T(r, c)) > tol)
        return false;
    }
    if (big != 1) return false;
  }
  for (Eigen::Index c = 0; c < T.cols(); ++c) {
    int big = 0;
    for (Eigen::Index r = 0; r < T.rows(); ++r) big += std::abs(T(r, c) - scale) <= tol;
    if (big != 1) return false;
  }
  return true;
}

inline double total_variation(const Vec& p, const Vec& q) { return 0.5 * (p - q).cwiseAbs().sum(); }

// Loss closure for grad_check over a fixed batch.
inline LossFn batch_loss_fn(Model& m, const Mat& instances, std::vector<Triplet> batch,
                            TrainConfig cfg) {
  return [&m, &instances, batch = std::move(batch), cfg](ParamStore& ps, bool acc) {
    (void)ps;
    return batch_loss(m, instances, batch, cfg, acc).total;
  };
}

}  // namespace testing_support
