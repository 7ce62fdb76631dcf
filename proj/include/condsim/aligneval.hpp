#pragma once

// Condition-alignment evaluation. Learned embeddings are scored per
// ground-truth condition into a cost matrix C (rows: conditions, columns:
// embeddings, C = 1 - accuracy), conditions are mapped to embeddings
// greedily or by exact optimal transport, and triplet accuracy is computed
// under the resulting map.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "condsim/datagen.hpp"
#include "condsim/losses.hpp"
#include "condsim/model.hpp"

namespace condsim {

using AlignmentMap = std::vector<int>;  // condition -> embedding

inline constexpr std::size_t kEvalChunk = 512;

// T x K matrix of Diff^k for every triplet in ts.
inline Mat all_diffs(const Model& m, const Mat& instances, std::span<const Triplet> ts) {
  Mat out(static_cast<Eigen::Index>(ts.size()), m.config.n_embeddings);
  for (std::size_t off = 0; off < ts.size(); off += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, ts.size() - off);
    out.middleRows(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(n)) =
        forward(m, instances, ts.subspan(off, n), false).diffs;
  }
  return out;
}

// T x K condition weights of the triplets and of their reversals.
struct WeightPair {
  Mat original;
  Mat reversed;
};

inline WeightPair all_weights(const Model& m, const Mat& instances, std::span<const Triplet> ts) {
  WeightPair out{Mat(static_cast<Eigen::Index>(ts.size()), m.config.n_embeddings),
                 Mat(static_cast<Eigen::Index>(ts.size()), m.config.n_embeddings)};
  for (std::size_t off = 0; off < ts.size(); off += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, ts.size() - off);
    const ForwardPass fp = forward(m, instances, ts.subspan(off, n), true, true);
    const auto rows = static_cast<Eigen::Index>(n);
    const auto start = static_cast<Eigen::Index>(off);
    out.original.middleRows(start, rows) = fp.weights;
    out.reversed.middleRows(start, rows) = reversed_weights(m, fp).weights;
  }
  return out;
}

inline bool predict_valid(double diff) { return diff > 0.0; }

inline bool predict_valid(const Model& m, const Mat& instances, const Triplet& t, int k) {
  if (k < 0 || k >= m.config.n_embeddings) throw ConfigError("embedding index out of range");
  return predict_valid(triplet_diffs(m, instances, t)(k));
}

inline void require_labels(std::span<const Triplet> ts) {
  for (std::size_t i = 0; i < ts.size(); ++i)
    if (!ts[i].cond)
      throw DataError("triplet " + std::to_string(i) + " has no condition label");
}

inline double supervised_accuracy(const Model& m, const Mat& instances,
                                  std::span<const Triplet> ts, const AlignmentMap& map) {
  if (ts.empty()) throw DataError("accuracy of an empty triplet set");
  require_labels(ts);
  const Mat D = all_diffs(m, instances, ts);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const int c = *ts[i].cond;
    if (c >= static_cast<int>(map.size())) throw DataError("condition label outside the map");
    if (D(static_cast<Eigen::Index>(i), map[c]) > 0.0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ts.size());
}

// ---------------------------------------------------------------------------
// Cost matrix

struct CostMatrix {
  Mat cost;                 // K' x K, 1 - accuracy
  Mat accuracy;             // K' x K
  std::vector<long> counts; // triplets per condition
};

inline CostMatrix cost_from_diffs(const Mat& D, std::span<const Triplet> ts, int n_conditions) {
  require_labels(ts);
  const Eigen::Index k = D.cols();
  CostMatrix cm;
  cm.counts.assign(static_cast<std::size_t>(n_conditions), 0);
  Mat hits = Mat::Zero(n_conditions, k);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const int c = *ts[i].cond;
    if (c < 0 || c >= n_conditions) throw DataError("condition label out of range");
    ++cm.counts[c];
    for (Eigen::Index e = 0; e < k; ++e)
      if (D(static_cast<Eigen::Index>(i), e) > 0.0) hits(c, e) += 1.0;
  }
  for (int c = 0; c < n_conditions; ++c)
    if (cm.counts[c] == 0) throw DataError("condition " + std::to_string(c) + " has no triplets");
  cm.accuracy = hits;
  for (int c = 0; c < n_conditions; ++c)
    cm.accuracy.row(c) /= static_cast<double>(cm.counts[c]);
  cm.cost = (1.0 - cm.accuracy.array()).matrix();
  return cm;
}

inline CostMatrix cost_matrix(const Model& m, const TripletDataset& ds) {
  return cost_from_diffs(all_diffs(m, ds.instances, ds.triplets), ds.triplets, ds.n_conditions);
}

// Triplet accuracy (hits / total) under a map.
inline double mapped_accuracy(const CostMatrix& cm, const AlignmentMap& map) {
  double hits = 0.0;
  long total = 0;
  for (std::size_t c = 0; c < cm.counts.size(); ++c) {
    hits += cm.accuracy(static_cast<Eigen::Index>(c), map[c]) * static_cast<double>(cm.counts[c]);
    total += cm.counts[c];
  }
  return hits / static_cast<double>(total);
}

inline Vec per_condition_accuracy(const CostMatrix& cm, const AlignmentMap& map) {
  Vec out(static_cast<Eigen::Index>(map.size()));
  for (std::size_t c = 0; c < map.size(); ++c)
    out(static_cast<Eigen::Index>(c)) = cm.accuracy(static_cast<Eigen::Index>(c), map[c]);
  return out;
}

// ---------------------------------------------------------------------------
// Alignments

// Per condition (row) the cheapest embedding; ties to the lowest index.
inline AlignmentMap greedy_align(const Mat& C) {
  AlignmentMap map(static_cast<std::size_t>(C.rows()), 0);
  for (Eigen::Index r = 0; r < C.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < C.cols(); ++c)
      if (C(r, c) < C(r, best)) best = c;
    map[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return map;
}

struct TransportPlan {
  Mat plan;
  double cost = 0.0;
  long pivots = 0;
};

// Exact transportation simplex: northwest-corner start, MODI potentials,
// Bland's rule for entering and leaving cells. Returns a basic (vertex)
// solution, so uniform marginals on a square C yield (1/K) * permutation.
inline TransportPlan solve_ot(const Mat& C, const Vec& r, const Vec& c) {
  const Eigen::Index m = C.rows();
  const Eigen::Index n = C.cols();
  if (m < 1 || n < 1) throw ConfigError("solve_ot: empty cost matrix");
  if (r.size() != m || c.size() != n) throw ConfigError("solve_ot: marginal sizes do not match C");
  if (!C.allFinite()) throw ConfigError("solve_ot: non-finite costs");
  if (r.minCoeff() < 0.0 || c.minCoeff() < 0.0)
    throw ConfigError("solve_ot: marginals must be nonnegative");
  if (std::abs(r.sum() - c.sum()) > 1e-12)
    throw ConfigError("solve_ot: marginals have different mass");

  Mat flow = Mat::Zero(m, n);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> basic =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(m, n, false);

  {
    Vec supply = r;
    Vec demand = c;
    Eigen::Index i = 0, j = 0;
    while (true) {
      const double x = std::min(supply(i), demand(j));
      flow(i, j) = x;
      basic(i, j) = true;
      supply(i) -= x;
      demand(j) -= x;
      if (i == m - 1 && j == n - 1) break;
      if (i == m - 1)
        ++j;
      else if (j == n - 1)
        ++i;
      else if (supply(i) == 0.0)
        ++i;
      else
        ++j;
    }
  }

  // Tree over m row nodes [0, m) and n column nodes [m, m + n).
  const Eigen::Index nodes = m + n;
  const double tol = 1e-12;
  TransportPlan out;
  const long max_pivots = 100000L * static_cast<long>(nodes);

  std::vector<std::vector<Eigen::Index>> adj(static_cast<std::size_t>(nodes));
  std::vector<Eigen::Index> parent(static_cast<std::size_t>(nodes));
  std::vector<Eigen::Index> order;
  Vec u(m), v(n);

  for (;;) {
    for (auto& a : adj) a.clear();
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (basic(i, j)) {
          adj[static_cast<std::size_t>(i)].push_back(m + j);
          adj[static_cast<std::size_t>(m + j)].push_back(i);
        }

    // Potentials by BFS from row 0: u_i + v_j = C_ij on basic cells.
    std::fill(parent.begin(), parent.end(), -2);
    order.clear();
    parent[0] = -1;
    order.push_back(0);
    u(0) = 0.0;
    for (std::size_t h = 0; h < order.size(); ++h) {
      const Eigen::Index a = order[h];
      for (Eigen::Index b : adj[static_cast<std::size_t>(a)]) {
        if (parent[static_cast<std::size_t>(b)] != -2) continue;
        parent[static_cast<std::size_t>(b)] = a;
        order.push_back(b);
        if (b >= m)
          v(b - m) = C(a, b - m) - u(a);
        else
          u(b) = C(b, a - m) - v(a - m);
      }
    }
    if (static_cast<Eigen::Index>(order.size()) != nodes)
      throw NumericError("solve_ot: basis is not a spanning tree");

    Eigen::Index ei = -1, ej = -1;
    for (Eigen::Index i = 0; i < m && ei < 0; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (!basic(i, j) && C(i, j) - u(i) - v(j) < -tol) {
          ei = i;
          ej = j;
          break;
        }
    if (ei < 0) break;
    if (++out.pivots > max_pivots) throw NumericError("solve_ot: pivot limit exceeded");

    // Tree path column ej -> row ei (both rooted at row 0): walk up from
    // both ends to the common ancestor.
    std::vector<Eigen::Index> up_a{m + ej}, up_b{ei};
    std::vector<char> seen(static_cast<std::size_t>(nodes), 0);
    std::vector<Eigen::Index> depth(static_cast<std::size_t>(nodes), 0);
    for (Eigen::Index node : order) {
      const Eigen::Index p = parent[static_cast<std::size_t>(node)];
      depth[static_cast<std::size_t>(node)] = p < 0 ? 0 : depth[static_cast<std::size_t>(p)] + 1;
    }
    Eigen::Index a = m + ej, b = ei;
    while (depth[static_cast<std::size_t>(a)] > depth[static_cast<std::size_t>(b)]) {
      a = parent[static_cast<std::size_t>(a)];
      up_a.push_back(a);
    }
    while (depth[static_cast<std::size_t>(b)] > depth[static_cast<std::size_t>(a)]) {
      b = parent[static_cast<std::size_t>(b)];
      up_b.push_back(b);
    }
    while (a != b) {
      a = parent[static_cast<std::size_t>(a)];
      up_a.push_back(a);
      b = parent[static_cast<std::size_t>(b)];
      up_b.push_back(b);
    }
    // Node sequence from column ej to row ei.
    std::vector<Eigen::Index> path = up_a;
    for (auto it = up_b.rbegin() + 1; it != up_b.rend(); ++it) path.push_back(*it);

    // Edge t joins path[t] and path[t+1]; the first touches column ej and
    // loses flow, signs alternate from there.
    struct Cell {
      Eigen::Index i, j;
    };
    std::vector<Cell> minus, plus;
    for (std::size_t t = 0; t + 1 < path.size(); ++t) {
      Eigen::Index p = path[t], q = path[t + 1];
      const Cell cell = p < m ? Cell{p, q - m} : Cell{q, p - m};
      (t % 2 == 0 ? minus : plus).push_back(cell);
    }
    double theta = std::numeric_limits<double>::infinity();
    for (const Cell& cl : minus) theta = std::min(theta, flow(cl.i, cl.j));
    Cell leave{-1, -1};
    for (const Cell& cl : minus)
      if (flow(cl.i, cl.j) == theta &&
          (leave.i < 0 || cl.i * n + cl.j < leave.i * n + leave.j))
        leave = cl;
    for (const Cell& cl : minus) flow(cl.i, cl.j) -= theta;
    for (const Cell& cl : plus) flow(cl.i, cl.j) += theta;
    flow(ei, ej) += theta;
    flow(leave.i, leave.j) = 0.0;
    basic(leave.i, leave.j) = false;
    basic(ei, ej) = true;
  }

  out.plan = flow;
  out.cost = (flow.array() * C.array()).sum();
  return out;
}

struct Assignment {
  std::vector<int> perm;  // row -> column
  double cost = 0.0;
};

// Hungarian method with row/column potentials, O(n^3).
inline Assignment hungarian(const Mat& C) {
  const auto n = static_cast<int>(C.rows());
  if (C.cols() != C.rows()) throw ConfigError("hungarian: cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = C(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  Assignment a;
  a.perm.assign(static_cast<std::size_t>(n), 0);
  for (int j = 1; j <= n; ++j) a.perm[p[j] - 1] = j - 1;
  for (int i = 0; i < n; ++i) a.cost += C(i, a.perm[i]);
  return a;
}

struct OtAlignment {
  AlignmentMap map;
  TransportPlan plan;
};

// Uniform marginals per side (rows 1/K', columns 1/K), then per-condition
// argmax of the plan; ties to the lowest index.
inline OtAlignment ot_align(const Mat& C) {
  const Vec r = Vec::Constant(C.rows(), 1.0 / static_cast<double>(C.rows()));
  Vec c = Vec::Constant(C.cols(), 1.0 / static_cast<double>(C.cols()));
  // Absorb rounding so both sides carry identical mass.
  c(c.size() - 1) += r.sum() - c.sum();
  OtAlignment out;
  out.plan = solve_ot(C, r, c);
  out.map.assign(static_cast<std::size_t>(C.rows()), 0);
  for (Eigen::Index i = 0; i < C.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < C.cols(); ++j)
      if (out.plan.plan(i, j) > out.plan.plan(i, best)) best = j;
    out.map[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

struct ReversedRates {
  double orig_rate = 0.0;
  double rev_rate = 0.0;
  long both_valid = 0;
  long total = 0;
};

struct EvalReport {
  std::string alignment_source = "test";
  int n_conditions = 0;
  int n_embeddings = 0;
  double gr_accuracy = 0.0;
  double ot_accuracy = 0.0;
  AlignmentMap gr_map;
  AlignmentMap ot_map;
  Vec gr_per_condition;
  Vec ot_per_condition;
  Mat cost;       // alignment source
  Mat eval_cost;  // evaluation split
  Mat plan;
  std::optional<ReversedRates> reversed_weak;
  std::optional<ReversedRates> reversed_supervised;
};

inline EvalReport report_from_costs(const CostMatrix& align, const CostMatrix& eval,
                                    const std::string& source) {
  EvalReport rep;
  rep.alignment_source = source;
  rep.n_conditions = static_cast<int>(align.cost.rows());
  rep.n_embeddings = static_cast<int>(align.cost.cols());
  rep.cost = align.cost;
  rep.eval_cost = eval.cost;
  rep.gr_map = greedy_align(align.cost);
  const OtAlignment ot = ot_align(align.cost);
  rep.ot_map = ot.map;
  rep.plan = ot.plan.plan;
  rep.gr_accuracy = mapped_accuracy(eval, rep.gr_map);
  rep.ot_accuracy = mapped_accuracy(eval, rep.ot_map);
  rep.gr_per_condition = per_condition_accuracy(eval, rep.gr_map);
  rep.ot_per_condition = per_condition_accuracy(eval, rep.ot_map);
  return rep;
}

// Alignment and accuracy on the same labeled split.
inline EvalReport evaluate(const Model& m, const TripletDataset& ds) {
  if (ds.triplets.empty()) throw DataError("evaluation split is empty");
  const CostMatrix cm = cost_matrix(m, ds);
  return report_from_costs(cm, cm, split_name(ds.split));
}

// Alignment on one labeled split (typically validation), accuracy on another.
inline EvalReport evaluate(const Model& m, const TripletDataset& align_ds,
                           const TripletDataset& eval_ds) {
  if (align_ds.n_conditions != eval_ds.n_conditions)
    throw DataError("alignment and evaluation splits disagree on the number of conditions");
  return report_from_costs(cost_matrix(m, align_ds), cost_matrix(m, eval_ds),
                           split_name(align_ds.split));
}

enum class ReversedMode { weak, supervised };

// Proportion of original and reversed triplets predicted valid. Weak mode
// uses the condition-free fused prediction sum_k w_k Diff^k > 0; supervised
// mode uses Diff^{map[label]} > 0.
inline ReversedRates reversed_experiment(const Model& m, const TripletDataset& ds,
                                         ReversedMode mode, const AlignmentMap& map = {}) {
  ReversedRates out;
  out.total = static_cast<long>(ds.triplets.size());
  if (ds.triplets.empty()) return out;
  const Mat D = all_diffs(m, ds.instances, ds.triplets);
  long orig = 0, rev = 0;
  if (mode == ReversedMode::weak) {
    const WeightPair W = all_weights(m, ds.instances, ds.triplets);
    for (Eigen::Index i = 0; i < D.rows(); ++i) {
      const Vec d = D.row(i).transpose();
      const bool a = expected_diff(W.original.row(i).transpose(), d) > 0.0;
      const bool b = expected_diff(W.reversed.row(i).transpose(), -d) > 0.0;
      orig += a;
      rev += b;
      out.both_valid += (a && b);
    }
  } else {
    require_labels(ds.triplets);
    for (Eigen::Index i = 0; i < D.rows(); ++i) {
      const int c = *ds.triplets[static_cast<std::size_t>(i)].cond;
      const int e = map.empty() ? c : map.at(static_cast<std::size_t>(c));
      if (e >= D.cols()) throw ConfigError("map points outside the embedding set");
      const bool a = D(i, e) > 0.0;
      const bool b = -D(i, e) > 0.0;
      orig += a;
      rev += b;
      out.both_valid += (a && b);
    }
  }
  out.orig_rate = static_cast<double>(orig) / static_cast<double>(out.total);
  out.rev_rate = static_cast<double>(rev) / static_cast<double>(out.total);
  return out;
}

// Text layout:
//   #condsim-report v1
//   key=value lines; vectors space-separated; matrices as
//   <name>=<rows>x<cols> followed by one line per row.
inline void write_report(std::ostream& os, const EvalReport& r) {
  auto vec_line = [&](const char* key, const auto& values) {
    os << key << '=';
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(values.size()); ++i) {
      if (i) os << ' ';
      if constexpr (std::is_same_v<std::decay_t<decltype(values)>, Vec>)
        os << format_double(values(i));
      else
        os << values[static_cast<std::size_t>(i)];
    }
    os << '\n';
  };
  auto mat_block = [&](const char* key, const Mat& M) {
    os << key << '=' << M.rows() << 'x' << M.cols() << '\n';
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      for (Eigen::Index j = 0; j < M.cols(); ++j) {
        if (j) os << ' ';
        os << format_double(M(i, j));
      }
      os << '\n';
    }
  };
  auto rates = [&](const char* prefix, const ReversedRates& rr) {
    os << prefix << "_orig_rate=" << format_double(rr.orig_rate) << '\n';
    os << prefix << "_rev_rate=" << format_double(rr.rev_rate) << '\n';
    os << prefix << "_both_valid=" << rr.both_valid << '\n';
    os << prefix << "_total=" << rr.total << '\n';
  };
  os << "#condsim-report v1\n";
  os << "alignment_source=" << r.alignment_source << '\n';
  os << "n_conditions=" << r.n_conditions << '\n';
  os << "n_embeddings=" << r.n_embeddings << '\n';
  os << "gr_accuracy=" << format_double(r.gr_accuracy) << '\n';
  os << "ot_accuracy=" << format_double(r.ot_accuracy) << '\n';
  vec_line("gr_map", r.gr_map);
  vec_line("ot_map", r.ot_map);
  vec_line("gr_per_condition", r.gr_per_condition);
  vec_line("ot_per_condition", r.ot_per_condition);
  mat_block("cost_matrix", r.cost);
  mat_block("eval_cost_matrix", r.eval_cost);
  mat_block("transport_plan", r.plan);
  if (r.reversed_weak) rates("reversed_weak", *r.reversed_weak);
  if (r.reversed_supervised) rates("reversed_supervised", *r.reversed_supervised);
}

inline void save_report(const EvalReport& r, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_report(os, r);
  if (!os) throw IoError("write failed for '" + path + "'");
}

inline EvalReport read_report(std::istream& is) {
  using namespace detail;
  EvalReport r;
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(is, line) || line != "#condsim-report v1")
    throw ParseError("bad report header", 1);
  auto read_matrix = [&](const std::string& shape) {
    const auto x = shape.find('x');
    if (x == std::string::npos) throw ParseError("bad matrix shape '" + shape + "'", line_no);
    const long long rows = parse_int(shape.substr(0, x), line_no);
    const long long cols = parse_int(shape.substr(x + 1), line_no);
    Mat M(rows, cols);
    for (long long i = 0; i < rows; ++i) {
      if (!std::getline(is, line)) throw ParseError("truncated matrix", line_no + 1);
      ++line_no;
      auto toks = split_ws(line);
      if (static_cast<long long>(toks.size()) != cols) throw ParseError("bad matrix row", line_no);
      for (long long j = 0; j < cols; ++j) M(i, j) = parse_double(toks[j], line_no);
    }
    return M;
  };
  auto ints = [&](const std::string& v) {
    AlignmentMap out;
    for (auto t : split_ws(v)) out.push_back(static_cast<int>(parse_int(t, line_no)));
    return out;
  };
  auto doubles = [&](const std::string& v) {
    auto toks = split_ws(v);
    Vec out(static_cast<Eigen::Index>(toks.size()));
    for (std::size_t i = 0; i < toks.size(); ++i)
      out(static_cast<Eigen::Index>(i)) = parse_double(toks[i], line_no);
    return out;
  };
  auto rates_field = [&](std::optional<ReversedRates>& slot, const std::string& field,
                         const std::string& v) {
    if (!slot) slot = ReversedRates{};
    if (field == "orig_rate")
      slot->orig_rate = parse_double(v, line_no);
    else if (field == "rev_rate")
      slot->rev_rate = parse_double(v, line_no);
    else if (field == "both_valid")
      slot->both_valid = static_cast<long>(parse_int(v, line_no));
    else if (field == "total")
      slot->total = static_cast<long>(parse_int(v, line_no));
    else
      throw ParseError("unknown key", line_no);
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line_no);
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "alignment_source") r.alignment_source = val;
    else if (key == "n_conditions") r.n_conditions = static_cast<int>(parse_int(val, line_no));
    else if (key == "n_embeddings") r.n_embeddings = static_cast<int>(parse_int(val, line_no));
    else if (key == "gr_accuracy") r.gr_accuracy = parse_double(val, line_no);
    else if (key == "ot_accuracy") r.ot_accuracy = parse_double(val, line_no);
    else if (key == "gr_map") r.gr_map = ints(val);
    else if (key == "ot_map") r.ot_map = ints(val);
    else if (key == "gr_per_condition") r.gr_per_condition = doubles(val);
    else if (key == "ot_per_condition") r.ot_per_condition = doubles(val);
    else if (key == "cost_matrix") r.cost = read_matrix(val);
    else if (key == "eval_cost_matrix") r.eval_cost = read_matrix(val);
    else if (key == "transport_plan") r.plan = read_matrix(val);
    else if (key.starts_with("reversed_weak_")) rates_field(r.reversed_weak, key.substr(14), val);
    else if (key.starts_with("reversed_supervised_"))
      rates_field(r.reversed_supervised, key.substr(20), val);
    else throw ParseError("unknown key '" + key + "'", line_no);
  }
  return r;
}

inline EvalReport load_report(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read_report(is);
}

}  // namespace condsim
