#pragma once

// Synthetic multi-condition worlds, condition-consistent triplet sampling,
// triplet reversal, and the line-delimited dataset file format.
//
// Instance, triplet and condition indices are 0-based everywhere, including
// on disk.

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "condsim/numcore.hpp"

namespace condsim {

struct WorldConfig {
  int n_instances = 2000;
  int n_conditions = 4;  // K'
  int n_values = 4;      // V
  int free_dims = 0;     // D_free
  double noise = 0.1;    // sigma_noise
  std::uint64_t seed = 0;

  int dim() const { return n_conditions * n_values + free_dims; }
};

struct World {
  WorldConfig config;
  Mat X;                               // n_instances x dim
  Eigen::MatrixXi codes;               // n_instances x n_conditions
  int block_begin(int condition) const { return condition * config.n_values; }
};

struct Triplet {
  int x = 0;  // anchor
  int y = 0;  // target neighbor
  int z = 0;  // impostor
  std::optional<int> cond;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

enum class Split { train, val, test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(s) + "'");
}

struct TripletDataset {
  Mat instances;  // n_instances x dim
  std::vector<Triplet> triplets;
  Split split = Split::train;
  std::uint64_t seed = 0;
  int n_conditions = 0;

  int dim() const { return static_cast<int>(instances.cols()); }
  int n_instances() const { return static_cast<int>(instances.rows()); }

  bool fully_labeled() const {
    for (const auto& t : triplets)
      if (!t.cond) return false;
    return true;
  }

  friend bool operator==(const TripletDataset& a, const TripletDataset& b) {
    return a.split == b.split && a.seed == b.seed && a.n_conditions == b.n_conditions &&
           a.instances.rows() == b.instances.rows() &&
           a.instances.cols() == b.instances.cols() && a.instances == b.instances &&
           a.triplets == b.triplets;
  }
};

inline World gen_world(const WorldConfig& cfg) {
  if (cfg.n_instances < 1 || cfg.n_conditions < 1 || cfg.n_values < 1 || cfg.free_dims < 0)
    throw ConfigError("world: counts must be >= 1 (free dims >= 0)");
  if (!(cfg.noise >= 0.0)) throw ConfigError("world: noise must be >= 0");

  World w;
  w.config = cfg;
  w.X = Mat::Zero(cfg.n_instances, cfg.dim());
  w.codes = Eigen::MatrixXi::Zero(cfg.n_instances, cfg.n_conditions);

  Rng rng(cfg.seed);
  std::uniform_int_distribution<int> code_dist(0, cfg.n_values - 1);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < cfg.n_instances; ++i) {
    for (int k = 0; k < cfg.n_conditions; ++k) {
      const int code = code_dist(rng);
      w.codes(i, k) = code;
      const int base = k * cfg.n_values;
      for (int v = 0; v < cfg.n_values; ++v) {
        double value = (v == code) ? 1.0 : 0.0;
        if (cfg.noise > 0.0) value += cfg.noise * unit(rng);
        w.X(i, base + v) = value;
      }
    }
    const int free_base = cfg.n_conditions * cfg.n_values;
    for (int f = 0; f < cfg.free_dims; ++f) w.X(i, free_base + f) = unit(rng);
  }
  return w;
}

inline Triplet reverse(const Triplet& t) { return Triplet{t.x, t.z, t.y, t.cond}; }

// True when t is valid by construction under its label (or under cond).
inline bool triplet_valid_under(const World& w, const Triplet& t, int cond) {
  if (t.x == t.y || t.x == t.z || t.y == t.z) return false;
  return w.codes(t.x, cond) == w.codes(t.y, cond) && w.codes(t.x, cond) != w.codes(t.z, cond);
}

inline TripletDataset sample_triplets(const World& w, int n_per_condition, std::uint64_t seed,
                                      Split split = Split::train) {
  if (n_per_condition < 0) throw ConfigError("triplets per condition must be >= 0");
  const int n = w.config.n_instances;
  const int kc = w.config.n_conditions;

  TripletDataset ds;
  ds.instances = w.X;
  ds.split = split;
  ds.seed = seed;
  ds.n_conditions = kc;
  ds.triplets.reserve(static_cast<std::size_t>(n_per_condition) * kc);

  Rng rng(seed);
  for (int k = 0; k < kc; ++k) {
    std::vector<std::vector<int>> buckets(w.config.n_values);
    for (int i = 0; i < n; ++i) buckets[w.codes(i, k)].push_back(i);
    int present = 0;
    bool has_pair = false;
    for (const auto& b : buckets) {
      if (!b.empty()) ++present;
      if (b.size() >= 2) has_pair = true;
    }
    if (n_per_condition == 0) continue;
    if (present < 2 || !has_pair)
      throw DataError("condition " + std::to_string(k) +
                      " cannot yield triplets: needs two attribute values and a shared value");

    std::uniform_int_distribution<int> any(0, n - 1);
    for (int t = 0; t < n_per_condition; ++t) {
      int x;
      do {
        x = any(rng);
      } while (buckets[w.codes(x, k)].size() < 2);
      const auto& same = buckets[w.codes(x, k)];
      std::uniform_int_distribution<std::size_t> pick(0, same.size() - 2);
      std::size_t yi = pick(rng);
      // Skip x's own slot so y is uniform over same-code instances != x.
      if (same[yi] == x) yi = same.size() - 1;
      const int y = same[yi];
      int z;
      do {
        z = any(rng);
      } while (w.codes(z, k) == w.codes(x, k));
      ds.triplets.push_back(Triplet{x, y, z, k});
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// File format
//
//   #condsim-triplets v1 n_instances=<N> dim=<D> conditions=<K'> triplets=<M> split=<s> seed=<n>
//   I <idx> <f_1> ... <f_D>      (N lines, idx = 0..N-1 in order)
//   T <x> <y> <z> <cond|->       (M lines)

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_dataset(std::ostream& os, const TripletDataset& ds) {
  os << "#condsim-triplets v1 n_instances=" << ds.n_instances() << " dim=" << ds.dim()
     << " conditions=" << ds.n_conditions << " triplets=" << ds.triplets.size()
     << " split=" << split_name(ds.split) << " seed=" << ds.seed << "\n";
  for (int i = 0; i < ds.n_instances(); ++i) {
    os << "I " << i;
    for (int j = 0; j < ds.dim(); ++j) os << ' ' << format_double(ds.instances(i, j));
    os << '\n';
  }
  for (const auto& t : ds.triplets) {
    os << "T " << t.x << ' ' << t.y << ' ' << t.z << ' ';
    if (t.cond)
      os << *t.cond;
    else
      os << '-';
    os << '\n';
  }
}

inline void save_dataset(const TripletDataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_dataset(os, ds);
  os.flush();
  if (!os) throw IoError("write failed for '" + path + "'");
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline long long parse_int(std::string_view tok, std::size_t line_no) {
  std::string s(tok);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno != 0)
    throw ParseError("expected integer, got '" + s + "'", line_no);
  return v;
}

inline std::uint64_t parse_u64(std::string_view tok, std::size_t line_no) {
  std::string s(tok);
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || s[0] == '-' || *end != '\0' || errno != 0)
    throw ParseError("expected unsigned integer, got '" + s + "'", line_no);
  return v;
}

inline double parse_double(std::string_view tok, std::size_t line_no) {
  std::string s(tok);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE)
    throw ParseError("expected number, got '" + s + "'", line_no);
  return v;
}

inline std::string_view header_value(const std::vector<std::string_view>& toks,
                                     std::string_view key, std::size_t line_no) {
  for (auto t : toks) {
    auto eq = t.find('=');
    if (eq != std::string_view::npos && t.substr(0, eq) == key) return t.substr(eq + 1);
  }
  throw ParseError("header is missing '" + std::string(key) + "='", line_no);
}

}  // namespace detail

inline TripletDataset read_dataset(std::istream& is) {
  using namespace detail;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(is, line)) throw ParseError("empty file", 1);
  ++line_no;
  auto head = split_ws(line);
  if (head.size() < 2 || head[0] != "#condsim-triplets" || head[1] != "v1")
    throw ParseError("bad header, expected '#condsim-triplets v1 ...'", line_no);

  const long long n = parse_int(header_value(head, "n_instances", line_no), line_no);
  const long long dim = parse_int(header_value(head, "dim", line_no), line_no);
  const long long kc = parse_int(header_value(head, "conditions", line_no), line_no);
  const long long m = parse_int(header_value(head, "triplets", line_no), line_no);
  if (n < 1 || dim < 1 || kc < 0 || m < 0) throw ParseError("bad header counts", line_no);

  TripletDataset ds;
  ds.split = parse_split(header_value(head, "split", line_no));
  ds.seed = parse_u64(header_value(head, "seed", line_no), line_no);
  ds.n_conditions = static_cast<int>(kc);
  ds.instances.resize(n, dim);

  for (long long i = 0; i < n; ++i) {
    if (!std::getline(is, line))
      throw ParseError("truncated: expected " + std::to_string(n) + " instance lines", line_no + 1);
    ++line_no;
    auto toks = split_ws(line);
    if (toks.empty() || toks[0] != "I") throw ParseError("expected instance line", line_no);
    if (static_cast<long long>(toks.size()) != dim + 2)
      throw ParseError("instance line has " + std::to_string(toks.size() - 2) +
                           " values, expected " + std::to_string(dim),
                       line_no);
    if (parse_int(toks[1], line_no) != i)
      throw ParseError("instance index out of order", line_no);
    for (long long j = 0; j < dim; ++j) ds.instances(i, j) = parse_double(toks[j + 2], line_no);
  }

  ds.triplets.reserve(static_cast<std::size_t>(m));
  for (long long t = 0; t < m; ++t) {
    if (!std::getline(is, line))
      throw ParseError("truncated: expected " + std::to_string(m) + " triplet lines", line_no + 1);
    ++line_no;
    auto toks = split_ws(line);
    if (toks.size() != 5 || toks[0] != "T") throw ParseError("expected 'T x y z cond'", line_no);
    Triplet tr;
    const long long x = parse_int(toks[1], line_no);
    const long long y = parse_int(toks[2], line_no);
    const long long z = parse_int(toks[3], line_no);
    for (long long idx : {x, y, z})
      if (idx < 0 || idx >= n)
        throw DataError("line " + std::to_string(line_no) + ": instance index " +
                        std::to_string(idx) + " out of range");
    if (x == y || x == z || y == z)
      throw DataError("line " + std::to_string(line_no) + ": triplet indices must be distinct");
    tr.x = static_cast<int>(x);
    tr.y = static_cast<int>(y);
    tr.z = static_cast<int>(z);
    if (toks[4] != "-") {
      const long long c = parse_int(toks[4], line_no);
      if (c < 0 || c >= kc)
        throw DataError("line " + std::to_string(line_no) + ": condition " + std::to_string(c) +
                        " out of range");
      tr.cond = static_cast<int>(c);
    }
    ds.triplets.push_back(tr);
  }
  while (std::getline(is, line)) {
    ++line_no;
    if (!split_ws(line).empty()) throw ParseError("unexpected trailing content", line_no);
  }
  return ds;
}

inline TripletDataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read_dataset(is);
}

// Drops condition labels (weakly supervised training data).
inline TripletDataset strip_labels(TripletDataset ds) {
  for (auto& t : ds.triplets) t.cond.reset();
  return ds;
}

}  // namespace condsim
