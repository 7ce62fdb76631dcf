// condsim: dataset generation, training, evaluation and sweeps.
//
//   condsim gen      --config c.txt --out data/
//   condsim train    --config c.txt --data data/ --out run/
//   condsim eval     --config c.txt --data data/ --checkpoint run/model.ckpt --out run/
//   condsim reversed --data data/ --checkpoint a.ckpt --checkpoint b.ckpt --out cmp/
//   condsim sweep    --param lambda --out sweep/
//   condsim report   --in run/report.txt --out run/
//
// Exit codes: 0 ok, 1 unexpected, 2 config, 3 data, 4 I/O, 5 numeric.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "condsim/aligneval.hpp"
#include "condsim/checkpoint.hpp"
#include "condsim/config.hpp"
#include "condsim/datagen.hpp"
#include "condsim/training.hpp"

namespace fs = std::filesystem;
using namespace condsim;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kIo = 4, kNumeric = 5 };

struct Common {
  std::string config_path;
  std::optional<long long> seed;
  std::string variant;
  std::string out = "out";
  std::vector<std::string> sets;
  // command specific
  std::string data_dir;
  std::vector<std::string> checkpoints;
  std::string param;
  std::string in;
};

RunConfig resolve(const Common& c) {
  RunConfig rc;
  if (!c.config_path.empty()) rc.load(c.config_path);
  for (const auto& kv : c.sets) rc.set_assignment(kv);
  if (c.seed) rc.set("seed", std::to_string(*c.seed));
  if (!c.variant.empty()) rc.set("variant", c.variant);
  if (!c.data_dir.empty()) rc.set("data_dir", c.data_dir);
  if (c.checkpoints.size() == 1) rc.set("checkpoint", c.checkpoints.front());
  if (!c.checkpoints.empty()) {
    std::string joined;
    for (const auto& p : c.checkpoints) joined += (joined.empty() ? "" : ",") + p;
    rc.set("checkpoints", joined);
  }
  if (!c.param.empty()) rc.set("sweep_param", c.param);
  if (!c.in.empty()) rc.set("report", c.in);
  return rc;
}

fs::path prepare_out(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw IoError("cannot create output directory '" + out + "'");
  return fs::path(out);
}

std::string dataset_path(const fs::path& dir, Split s) {
  return (dir / (std::string(split_name(s)) + ".triplets")).string();
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::trunc);
  if (!os) throw IoError("cannot write '" + p.string() + "'");
  return os;
}

Split parse_split_key(const RunConfig& rc, const std::string& key) {
  try {
    return parse_split(rc.str(key));
  } catch (const DataError&) {
    throw ConfigError(key + ": expected train, val or test");
  }
}

// ---------------------------------------------------------------------------

int cmd_gen(const RunConfig& rc, const std::string& out) {
  // Everything is built in memory first so that a bad config writes nothing.
  const GeneratedData g = generate_data(rc);
  const fs::path dir = prepare_out(out);
  save_dataset(g.train, dataset_path(dir, Split::train));
  save_dataset(g.val, dataset_path(dir, Split::val));
  save_dataset(g.test, dataset_path(dir, Split::test));
  rc.save((dir / "config.resolved").string());
  std::cout << "wrote " << g.train.triplets.size() << "/" << g.val.triplets.size() << "/"
            << g.test.triplets.size() << " triplets to " << dir.string() << "\n";
  return kOk;
}

int cmd_train(const RunConfig& rc, const std::string& out) {
  const TrainConfig tc = rc.train();
  const fs::path data(rc.str("data_dir"));
  const TripletDataset train = load_dataset(dataset_path(data, Split::train));
  std::optional<TripletDataset> val;
  if (fs::exists(dataset_path(data, Split::val))) val = load_dataset(dataset_path(data, Split::val));
  const ModelConfig mc = rc.model(train.dim());

  const fs::path dir = prepare_out(out);
  rc.save((dir / "config.resolved").string());
  std::ofstream log = open_out(dir / "train.log");
  const FitResult res = fit(train, val ? &*val : nullptr, mc, tc, [&](const EpochLog& e) {
    write_epoch_log(log, e);
    log.flush();
    std::cout << "epoch " << e.epoch << " loss " << fixed6(e.loss);
    if (e.val_ot) std::cout << " val_ot " << fixed6(*e.val_ot);
    std::cout << "\n";
  });

  Checkpoint ck{res.model,
                {{"variant", variant_name(tc.variant)}, {"best_epoch", std::to_string(res.best_epoch)}}};
  save_checkpoint(ck, (dir / "model.ckpt").string());
  std::cout << "best epoch " << res.best_epoch << ", checkpoint " << (dir / "model.ckpt").string()
            << "\n";
  return kOk;
}

EvalReport evaluate_run(const Model& m, const RunConfig& rc) {
  const fs::path data(rc.str("data_dir"));
  const Split align = parse_split_key(rc, "align_split");
  const Split eval = parse_split_key(rc, "eval_split");
  const TripletDataset eval_ds = load_dataset(dataset_path(data, eval));
  if (eval_ds.n_conditions < 1 || !eval_ds.fully_labeled())
    throw DataError("evaluation split must be labeled");
  if (eval_ds.dim() != m.config.input_dim)
    throw ConfigError("checkpoint input dimension does not match the data");
  EvalReport rep;
  if (align == eval) {
    rep = evaluate(m, eval_ds);
  } else {
    const TripletDataset align_ds = load_dataset(dataset_path(data, align));
    rep = evaluate(m, align_ds, eval_ds);
  }
  rep.reversed_weak = reversed_experiment(m, eval_ds, ReversedMode::weak);
  rep.reversed_supervised = reversed_experiment(m, eval_ds, ReversedMode::supervised, rep.ot_map);
  return rep;
}

std::string checkpoint_for(const RunConfig& rc, const std::string& out) {
  const std::string& ck = rc.str("checkpoint");
  return ck.empty() ? (fs::path(out) / "model.ckpt").string() : ck;
}

int cmd_eval(const RunConfig& rc, const std::string& out) {
  const Checkpoint ck = load_checkpoint(checkpoint_for(rc, out));
  const long long k = rc.integer("n_embeddings");
  if (k != ck.model.config.n_embeddings)
    throw ConfigError("config asks for " + std::to_string(k) + " embeddings, checkpoint has " +
                      std::to_string(ck.model.config.n_embeddings));
  const EvalReport rep = evaluate_run(ck.model, rc);
  const fs::path dir = prepare_out(out);
  rc.save((dir / "config.resolved").string());
  save_report(rep, (dir / "report.txt").string());
  std::cout << "GR " << fixed6(rep.gr_accuracy) << " OT " << fixed6(rep.ot_accuracy)
            << " (aligned on " << rep.alignment_source << ")\n";
  return kOk;
}

int cmd_reversed(const RunConfig& rc, const std::string& out) {
  std::vector<std::string> paths = rc.list("checkpoints");
  if (paths.empty() && !rc.str("checkpoint").empty()) paths.push_back(rc.str("checkpoint"));
  if (paths.empty()) throw ConfigError("reversed: no checkpoints given");

  std::vector<std::string> rows;
  for (const auto& p : paths) {
    const Checkpoint ck = load_checkpoint(p);
    const EvalReport rep = evaluate_run(ck.model, rc);
    const auto it = ck.meta.find("variant");
    const std::string var = it == ck.meta.end() ? "unknown" : it->second;
    for (const auto& [mode, r] : {std::pair<const char*, ReversedRates>{"weak", *rep.reversed_weak},
                                  {"supervised", *rep.reversed_supervised}}) {
      rows.push_back(var + "," + p + "," + mode + "," + fixed6(r.orig_rate) + "," +
                     fixed6(r.rev_rate) + "," + std::to_string(r.both_valid) + "," +
                     std::to_string(r.total));
      std::cout << var << " " << mode << " orig " << fixed6(r.orig_rate) << " rev "
                << fixed6(r.rev_rate) << "\n";
    }
  }
  const fs::path dir = prepare_out(out);
  rc.save((dir / "config.resolved").string());
  std::ofstream os = open_out(dir / "reversed.csv");
  os << "variant,checkpoint,mode,orig_rate,rev_rate,both_valid,total\n";
  for (const auto& r : rows) os << r << "\n";
  return kOk;
}

int cmd_sweep(const RunConfig& base, const std::string& out) {
  const std::string param = base.str("sweep_param");
  std::vector<std::string> grid = base.list("sweep_grid");
  if (param == "lambda") {
    if (grid.empty()) grid = {"0", "0.0001", "0.001", "0.01", "0.1"};
  } else if (param == "K") {
    if (grid.empty()) grid = {"2", "4", "6", "8", "10"};
  } else {
    throw ConfigError("sweep_param must be lambda or K");
  }
  const std::string key = param == "lambda" ? "lambda" : "n_embeddings";

  // Validate every grid point before any training starts.
  std::vector<RunConfig> points;
  for (const auto& v : grid) {
    RunConfig rc = base;
    rc.set(key, v);
    rc.train();
    rc.model(rc.world().dim());
    points.push_back(rc);
  }

  const GeneratedData g = generate_data(base);
  const fs::path dir = prepare_out(out);
  base.save((dir / "config.resolved").string());
  std::ofstream os = open_out(dir / "sweep.csv");
  os << "param,value,gr_accuracy,ot_accuracy,best_epoch\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const RunConfig& rc = points[i];
    const FitResult res = fit(g.train, &g.val, rc.model(g.train.dim()), rc.train());
    const Split align = parse_split_key(rc, "align_split");
    const EvalReport rep = align == Split::test ? evaluate(res.model, g.test)
                                                : evaluate(res.model, g.val, g.test);
    os << param << "," << grid[i] << "," << fixed6(rep.gr_accuracy) << ","
       << fixed6(rep.ot_accuracy) << "," << res.best_epoch << "\n";
    os.flush();
    std::cout << param << "=" << grid[i] << " GR " << fixed6(rep.gr_accuracy) << " OT "
              << fixed6(rep.ot_accuracy) << "\n";
  }
  return kOk;
}

void write_matrix_csv(const fs::path& p, const Mat& m, const char* row_label) {
  std::ofstream os = open_out(p);
  os << row_label;
  for (Eigen::Index c = 0; c < m.cols(); ++c) os << ",embedding_" << c;
  os << "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    os << r;
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << "," << fixed6(m(r, c));
    os << "\n";
  }
}

int cmd_report(const RunConfig& rc, const std::string& out) {
  const std::string& in = rc.str("report");
  if (in.empty()) throw ConfigError("report: --in is required");
  const EvalReport rep = load_report(in);
  const fs::path dir = prepare_out(out);

  {
    std::ofstream os = open_out(dir / "summary.csv");
    os << "metric,value\n";
    os << "gr_accuracy," << fixed6(rep.gr_accuracy) << "\n";
    os << "ot_accuracy," << fixed6(rep.ot_accuracy) << "\n";
    if (rep.reversed_weak) {
      os << "weak_orig_rate," << fixed6(rep.reversed_weak->orig_rate) << "\n";
      os << "weak_rev_rate," << fixed6(rep.reversed_weak->rev_rate) << "\n";
    }
    if (rep.reversed_supervised) {
      os << "supervised_orig_rate," << fixed6(rep.reversed_supervised->orig_rate) << "\n";
      os << "supervised_rev_rate," << fixed6(rep.reversed_supervised->rev_rate) << "\n";
    }
  }
  {
    std::ofstream os = open_out(dir / "per_condition.csv");
    os << "condition,gr_embedding,gr_accuracy,ot_embedding,ot_accuracy\n";
    for (int k = 0; k < rep.n_conditions; ++k)
      os << k << "," << rep.gr_map[static_cast<std::size_t>(k)] << ","
         << fixed6(rep.gr_per_condition(k)) << "," << rep.ot_map[static_cast<std::size_t>(k)]
         << "," << fixed6(rep.ot_per_condition(k)) << "\n";
  }
  write_matrix_csv(dir / "cost.csv", rep.eval_cost, "condition");
  write_matrix_csv(dir / "plan.csv", rep.plan, "condition");
  std::cout << "GR " << fixed6(rep.gr_accuracy) << " OT " << fixed6(rep.ot_accuracy) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised conditional similarity learning experiments"};
  app.require_subcommand(1);
  Common c;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", c.config_path, "key=value config file");
    sub->add_option("--seed", c.seed, "run seed");
    sub->add_option("--variant", c.variant, "disc_set | disc_reg | supervised | fusion");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--set", c.sets, "override a config key (key=value)");
  };

  auto* gen = app.add_subcommand("gen", "generate train/val/test triplet files");
  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  auto* eval = app.add_subcommand("eval", "align embeddings and write a report");
  auto* rev = app.add_subcommand("reversed", "original vs reversed valid proportions");
  auto* sweep = app.add_subcommand("sweep", "train+eval over a lambda or K grid");
  auto* report = app.add_subcommand("report", "turn a report into CSV tables");
  for (auto* s : {gen, train, eval, rev, sweep, report}) common(s);
  for (auto* s : {train, eval, rev}) s->add_option("--data", c.data_dir, "dataset directory");
  for (auto* s : {eval, rev}) s->add_option("--checkpoint", c.checkpoints, "checkpoint file");
  sweep->add_option("--param", c.param, "lambda | K");
  report->add_option("--in", c.in, "report file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    const RunConfig rc = resolve(c);
    if (gen->parsed()) {
      // gen writes where it is told, defaulting to the configured data directory.
      return cmd_gen(rc, gen->count("--out") ? c.out : rc.str("data_dir"));
    }
    if (train->parsed()) return cmd_train(rc, c.out);
    if (eval->parsed()) return cmd_eval(rc, c.out);
    if (rev->parsed()) return cmd_reversed(rc, c.out);
    if (sweep->parsed()) return cmd_sweep(rc, c.out);
    if (report->parsed()) return cmd_report(rc, c.out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
  return kOther;
}
