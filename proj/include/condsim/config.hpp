#pragma once

// Flat key=value run configuration shared by every CLI command.
//
// File syntax: one `key = value` per line, `#` starts a comment, blank lines
// ignored. Unknown keys are rejected. Flags override file values; the
// resolved view (every key, sorted) is what gets persisted next to outputs.

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "condsim/datagen.hpp"
#include "condsim/model.hpp"
#include "condsim/training.hpp"

namespace condsim {

inline const std::map<std::string, std::string>& config_defaults() {
  static const std::map<std::string, std::string> d = {
      // world + sampling
      {"n_instances", "2000"},
      {"n_conditions", "4"},
      {"n_values", "4"},
      {"free_dims", "0"},
      {"noise", "0.1"},
      {"train_per_condition", "2000"},
      {"val_per_condition", "400"},
      {"test_per_condition", "400"},
      {"train_labels", "true"},
      // model
      {"embed_dim", "64"},
      {"hidden_layers", "1"},
      {"n_embeddings", "4"},
      {"encoder", "auto"},
      {"temperature", "1"},
      // training
      {"variant", "disc_set"},
      {"loss", "margin"},
      {"margin", "1"},
      {"lambda", "0.001"},
      {"gate", "fused"},
      {"lr", "0.01"},
      {"epochs", "90"},
      {"lr_decay_every", "30"},
      {"lr_decay", "0.1"},
      {"batch_size", "64"},
      {"optimizer", "adam"},
      {"seed", "0"},
      // evaluation / plumbing
      {"data_dir", "data"},
      {"checkpoint", ""},
      {"align_split", "val"},
      {"eval_split", "test"},
      {"checkpoints", ""},
      {"sweep_param", "lambda"},
      {"sweep_grid", ""},
      {"report", ""},
  };
  return d;
}

class RunConfig {
 public:
  RunConfig() : values_(config_defaults()) {}

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  // "key=value"
  void set_assignment(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + kv + "'");
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }

  void read(std::istream& is, const std::string& origin = "config") {
    std::string line;
    std::size_t no = 0;
    while (std::getline(is, line)) {
      ++no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(no) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      if (!values_.count(key))
        throw ConfigError(origin + ":" + std::to_string(no) + ": unknown key '" + key + "'");
      values_[key] = trim(line.substr(eq + 1));
    }
  }

  void load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config '" + path + "'");
    read(is, path);
  }

  void write(std::ostream& os) const {
    for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
  }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write '" + path + "'");
    write(os);
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  long long integer(const std::string& key) const {
    const std::string& s = str(key);
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &used);
    } catch (const std::logic_error&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw ConfigError(key + ": expected an integer, got '" + s + "'");
    return v;
  }

  double real(const std::string& key) const {
    const std::string& s = str(key);
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::logic_error&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw ConfigError(key + ": expected a number, got '" + s + "'");
    return v;
  }

  bool flag(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(key + ": expected true/false, got '" + s + "'");
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  // Typed views ----------------------------------------------------------

  WorldConfig world() const {
    WorldConfig w;
    w.n_instances = static_cast<int>(integer("n_instances"));
    w.n_conditions = static_cast<int>(integer("n_conditions"));
    w.n_values = static_cast<int>(integer("n_values"));
    w.free_dims = static_cast<int>(integer("free_dims"));
    w.noise = real("noise");
    w.seed = seed();
    if (w.n_conditions < 1) throw ConfigError("n_conditions must be >= 1");
    if (w.n_values < 2) throw ConfigError("n_values must be >= 2");
    if (w.n_instances < 2) throw ConfigError("n_instances must be >= 2");
    if (w.free_dims < 0) throw ConfigError("free_dims must be >= 0");
    if (!(w.noise >= 0.0)) throw ConfigError("noise must be >= 0");
    for (const char* k : {"train_per_condition", "val_per_condition", "test_per_condition"})
      if (integer(k) < 0) throw ConfigError(std::string(k) + " must be >= 0");
    return w;
  }

  std::uint64_t seed() const {
    const long long s = integer("seed");
    if (s < 0) throw ConfigError("seed must be >= 0");
    return static_cast<std::uint64_t>(s);
  }

  Variant variant() const { return parse_variant(str("variant")); }

  ModelConfig model(int input_dim) const {
    ModelConfig m;
    m.input_dim = input_dim;
    m.embed_dim = static_cast<int>(integer("embed_dim"));
    m.hidden_layers = static_cast<int>(integer("hidden_layers"));
    m.n_embeddings = static_cast<int>(integer("n_embeddings"));
    m.temperature = real("temperature");
    const std::string& enc = str("encoder");
    m.encoder = enc == "auto" ? default_encoder(variant()) : parse_encoder(enc);
    if (m.embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
    if (m.hidden_layers < 0) throw ConfigError("hidden_layers must be >= 0");
    if (m.n_embeddings < 1) throw ConfigError("n_embeddings must be >= 1");
    if (!(m.temperature > 0.0)) throw ConfigError("temperature must be > 0");
    return m;
  }

  TrainConfig train() const {
    TrainConfig t;
    t.variant = variant();
    t.loss = parse_loss(str("loss"));
    t.margin = real("margin");
    t.lambda = real("lambda");
    t.gate = parse_gate(str("gate"));
    t.lr = real("lr");
    t.epochs = static_cast<int>(integer("epochs"));
    t.lr_decay_every = static_cast<int>(integer("lr_decay_every"));
    t.lr_decay = real("lr_decay");
    t.batch_size = static_cast<int>(integer("batch_size"));
    const std::string& opt = str("optimizer");
    if (opt == "adam")
      t.optimizer = OptimizerMode::adam;
    else if (opt == "sgd")
      t.optimizer = OptimizerMode::sgd;
    else
      throw ConfigError("unknown optimizer '" + opt + "'");
    t.seed = seed();
    t.validate();
    return t;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

// Sampling seeds per split, derived from the run seed so that one seed fixes
// the whole dataset.
inline std::uint64_t split_seed(std::uint64_t seed, Split s) {
  switch (s) {
    case Split::train: return seed + 11;
    case Split::val: return seed + 12;
    case Split::test: return seed + 13;
  }
  return seed;
}

struct GeneratedData {
  TripletDataset train, val, test;
};

inline GeneratedData generate_data(const RunConfig& rc) {
  const WorldConfig wc = rc.world();
  const World w = gen_world(wc);
  GeneratedData g;
  g.train = sample_triplets(w, static_cast<int>(rc.integer("train_per_condition")),
                            split_seed(wc.seed, Split::train), Split::train);
  g.val = sample_triplets(w, static_cast<int>(rc.integer("val_per_condition")),
                          split_seed(wc.seed, Split::val), Split::val);
  g.test = sample_triplets(w, static_cast<int>(rc.integer("test_per_condition")),
                           split_seed(wc.seed, Split::test), Split::test);
  if (!rc.flag("train_labels")) g.train = strip_labels(std::move(g.train));
  return g;
}

}  // namespace condsim
