#pragma once

// Minimal differentiable numerics. Every operation comes as a forward
// function plus an explicit backward function; batched variants treat each
// row of a matrix as one sample.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "condsim/errors.hpp"

namespace condsim {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Rng = std::mt19937_64;

inline constexpr double kNormGuard = 1e-12;

inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite values in ") + what);
}

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in ") + what);
}

// ---------------------------------------------------------------------------
// Parameters

struct Param {
  std::string name;
  Mat value;
  Mat grad;
};

// Named parameter tensors, each paired with a gradient buffer of the same
// shape. Insertion order is the canonical order (checkpoints, optimizers).
class ParamStore {
 public:
  ParamStore() = default;
  explicit ParamStore(std::uint64_t seed) : seed_(seed) {}

  Param& add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (index_.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
    index_[name] = params_.size();
    params_.push_back(Param{name, Mat::Zero(rows, cols), Mat::Zero(rows, cols)});
    return params_.back();
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Param& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return params_[it->second];
  }
  const Param& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return params_[it->second];
  }

  Mat& value(const std::string& name) { return at(name).value; }
  const Mat& value(const std::string& name) const { return at(name).value; }
  Mat& grad(const std::string& name) { return at(name).grad; }

  void zero_grads() {
    for (auto& p : params_) p.grad.setZero();
  }

  std::size_t size() const { return params_.size(); }
  Eigen::Index num_scalars() const {
    Eigen::Index n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }

  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t s) { seed_ = s; }

  bool values_equal(const ParamStore& other) const {
    if (params_.size() != other.params_.size()) return false;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const auto& a = params_[i];
      const auto& b = other.params_[i];
      if (a.name != b.name || a.value.rows() != b.value.rows() ||
          a.value.cols() != b.value.cols() || a.value != b.value)
        return false;
    }
    return true;
  }

 private:
  std::vector<Param> params_;
  std::map<std::string, std::size_t> index_;
  std::uint64_t seed_ = 0;
};

inline void fill_gaussian(Mat& m, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

// ---------------------------------------------------------------------------
// Affine: y = W x + b. Batched form: Y = X W^T + 1 b^T.

inline Vec affine(const Mat& W, const Vec& b, const Vec& x) {
  if (W.cols() != x.size() || W.rows() != b.size())
    throw ConfigError("affine: W is " + shape_str(W.rows(), W.cols()) + ", b has " +
                      std::to_string(b.size()) + ", x has " + std::to_string(x.size()));
  return W * x + b;
}

inline Mat affine_rows(const Mat& W, const Mat& b, const Mat& X) {
  if (W.cols() != X.cols() || b.rows() != W.rows() || b.cols() != 1)
    throw ConfigError("affine: W is " + shape_str(W.rows(), W.cols()) + ", b is " +
                      shape_str(b.rows(), b.cols()) + ", X is " + shape_str(X.rows(), X.cols()));
  Mat Y = X * W.transpose();
  Y.rowwise() += b.col(0).transpose();
  return Y;
}

// Accumulates dW, db; returns dX.
inline Mat affine_rows_backward(const Mat& W, const Mat& X, const Mat& dY, Mat& dW, Mat& db) {
  dW.noalias() += dY.transpose() * X;
  db.col(0) += dY.colwise().sum().transpose();
  return dY * W;
}

// ---------------------------------------------------------------------------
// ReLU (subgradient 0 at 0)

inline Vec relu(const Vec& x) { return x.cwiseMax(0.0); }
inline Mat relu_rows(const Mat& x) { return x.cwiseMax(0.0); }

inline Mat relu_backward(const Mat& pre, const Mat& dY) {
  return (pre.array() > 0.0).select(dY, 0.0);
}

// ---------------------------------------------------------------------------
// Cosine similarity, with kNormGuard added to each norm.

inline double cosine(const Vec& u, const Vec& v) {
  if (u.size() != v.size()) throw ConfigError("cosine: dimension mismatch");
  const double nu = u.norm() + kNormGuard;
  const double nv = v.norm() + kNormGuard;
  return u.dot(v) / (nu * nv);
}

struct CosineGrad {
  Vec du;
  Vec dv;
};

// Gradient of g * cosine(u, v).
inline CosineGrad cosine_backward(const Vec& u, const Vec& v, double g) {
  const double ru = u.norm();
  const double rv = v.norm();
  const double nu = ru + kNormGuard;
  const double nv = rv + kNormGuard;
  const double dot = u.dot(v);
  CosineGrad out{v / (nu * nv), u / (nu * nv)};
  // d/du of 1/(|u|+eps) = -u / (|u| (|u|+eps)^2); zero at u = 0.
  if (ru > 0.0) out.du -= u * (dot / (nu * nu * nv * ru));
  if (rv > 0.0) out.dv -= v * (dot / (nv * nv * nu * rv));
  out.du *= g;
  out.dv *= g;
  return out;
}

// ---------------------------------------------------------------------------
// Softmax with temperature.

inline Vec softmax_temp(const Vec& s, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("softmax temperature must be > 0");
  if (s.size() == 0) throw ConfigError("softmax of empty vector");
  const double mx = s.maxCoeff();
  Vec e = ((s.array() - mx) / temperature).exp();
  return e / e.sum();
}

// Given p = softmax_temp(s) and dL/dp, returns dL/ds.
inline Vec softmax_temp_backward(const Vec& p, const Vec& dp, double temperature) {
  const double inner = p.dot(dp);
  return (p.array() * (dp.array() - inner) / temperature).matrix();
}

// ---------------------------------------------------------------------------
// Scalars

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x))
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// ---------------------------------------------------------------------------
// Optimizers. Gradient buffers are read, never cleared.

enum class OptimizerMode { sgd, adam };

class Optimizer {
 public:
  explicit Optimizer(OptimizerMode mode, double beta1 = 0.9, double beta2 = 0.999,
                     double eps = 1e-8)
      : mode_(mode), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& store, double lr) {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
    auto& ps = store.params();
    if (mode_ == OptimizerMode::sgd) {
      for (auto& p : ps) p.value -= lr * p.grad;
      return;
    }
    if (m_.empty()) {
      for (auto& p : ps) {
        m_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
        v_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
      }
    }
    if (m_.size() != ps.size()) throw ConfigError("optimizer bound to a different parameter set");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto& p = ps[i];
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseAbs2();
      p.value.array() -=
          lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
  }

  long steps() const { return t_; }

 private:
  OptimizerMode mode_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Mat> m_, v_;
};

// ---------------------------------------------------------------------------
// Finite-difference gradient verification.

// loss_fn(params, accumulate_grads) returns the loss; when accumulate_grads
// is true it also adds the analytic gradient into the gradient buffers.
using LossFn = std::function<double(ParamStore&, bool)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  Eigen::Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

inline double relative_error(double a, double n) {
  const double denom = std::max({std::abs(a), std::abs(n), 1e-8});
  return std::abs(a - n) / denom;
}

inline GradCheckResult grad_check_detailed(const LossFn& loss_fn, ParamStore& params,
                                           double eps) {
  params.zero_grads();
  const double base = loss_fn(params, true);
  require_finite(base, "grad_check loss");
  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params.params()) analytic.push_back(p.grad);

  GradCheckResult res;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Mat& value = params.params()[pi].value;
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      double& entry = value.data()[i];
      const double saved = entry;
      entry = saved + eps;
      const double plus = loss_fn(params, false);
      entry = saved - eps;
      const double minus = loss_fn(params, false);
      entry = saved;
      require_finite(plus, "grad_check loss");
      require_finite(minus, "grad_check loss");
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[pi].data()[i];
      const double err = relative_error(a, numeric);
      if (err > res.max_rel_error || res.worst_index < 0) {
        res.max_rel_error = err;
        res.worst_param = params.params()[pi].name;
        res.worst_index = i;
        res.analytic = a;
        res.numeric = numeric;
      }
    }
  }
  params.zero_grads();
  return res;
}

inline double grad_check(const LossFn& loss_fn, ParamStore& params, double eps) {
  return grad_check_detailed(loss_fn, params, eps).max_rel_error;
}

}  // namespace condsim
