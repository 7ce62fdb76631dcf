#pragma once

// Scalar losses over per-condition triplet differences.

#include <cassert>
#include <cmath>

#include "condsim/numcore.hpp"

namespace condsim {

inline double expected_diff(const Vec& weights, const Vec& diffs) {
  if (weights.size() != diffs.size()) throw ConfigError("expected_diff: size mismatch");
  return weights.dot(diffs);
}

// max(0, -t); used with t = expected_diff - margin.
inline double margin_loss(double t) { return t < 0.0 ? -t : 0.0; }
inline double margin_loss_grad(double t) { return t < 0.0 ? -1.0 : 0.0; }

// log(1 + exp(-t))
inline double logistic_loss(double t) { return softplus(-t); }
inline double logistic_loss_grad(double t) { return -sigmoid(-t); }

// Pr(valid | condition k) = sigmoid(Diff^k - margin)
inline double prob_validity(double diff, double margin) { return sigmoid(diff - margin); }

struct ProbLoss {
  double exact;        // sum_k w_k * l(Diff^k - margin)
  double approximate;  // l(sum_k w_k Diff^k - margin)
};

inline ProbLoss prob_loss(const Vec& weights, const Vec& diffs, double margin) {
  if (weights.size() != diffs.size()) throw ConfigError("prob_loss: size mismatch");
  double exact = 0.0;
  for (Eigen::Index k = 0; k < weights.size(); ++k)
    exact += weights(k) * logistic_loss(diffs(k) - margin);
  return {exact, logistic_loss(expected_diff(weights, diffs) - margin)};
}

// Histogram intersection kernel sum_k min(p_k, q_k).
inline double hik(const Vec& p, const Vec& q) {
  assert(p.size() == q.size());
  assert(std::abs(p.sum() - 1.0) < 1e-9 && std::abs(q.sum() - 1.0) < 1e-9);
  assert(p.minCoeff() >= 0.0 && q.minCoeff() >= 0.0);
  return p.cwiseMin(q).sum();
}

// Subgradient of g * hik(p, q): routed to the smaller entry, ties to p.
inline void hik_backward(const Vec& p, const Vec& q, double g, Vec& dp, Vec& dq) {
  dp = Vec::Zero(p.size());
  dq = Vec::Zero(q.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (p(k) <= q(k))
      dp(k) = g;
    else
      dq(k) = g;
  }
}

}  // namespace condsim
