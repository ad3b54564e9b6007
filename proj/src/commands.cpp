#include "vtree/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "vtree/errors.hpp"
#include "vtree/eval.hpp"
#include "vtree/infer.hpp"
#include "vtree/pipeline.hpp"

namespace vtree {

namespace {

struct CliConfig {
  std::string data;
  std::string format = "bin";
  std::string model;
  std::string out;
  int branching = 32;
  int depth = 2;
  int beam = kDefaultBeam;
  int trees = 1;
  int tree_index = 0;
  std::string mode = "beam";
  double lambda = 1e-4;
  int epochs = 30;
  int root_subsample = 600;
  int tuning_k = 7;
  std::uint64_t seed = 0;
  int threads = 1;
  bool normalize = false;
  bool no_bias = false;
  bool balance = false;
  bool renormalize = false;
  int top = 5;
  // synth
  SynthConfig synth;
  // bench
  std::vector<std::string> sweep;
  int train_per_class = 0;
  int test_per_class = 0;
  int reps = 3;
  bool no_timing = false;
  bool no_flat = false;
  // export-dot
  std::string names;
};

/// Writes to --out when given, else to the fallback stream.
void emit(const CliConfig& cfg, std::ostream& fallback, const std::string& text) {
  if (cfg.out.empty()) {
    fallback << text;
    return;
  }
  std::ofstream f(cfg.out, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + cfg.out);
  f << text;
  if (!f) throw IoError("write failed for " + cfg.out);
}

TrainConfig train_config(const CliConfig& cfg) {
  TrainConfig tc;
  tc.lambda = cfg.lambda;
  tc.epochs = cfg.epochs;
  tc.root_subsample = cfg.root_subsample;
  tc.seed = cfg.seed;
  tc.use_bias = !cfg.no_bias;
  tc.balance_classes = cfg.balance;
  tc.threads = cfg.threads;
  return tc;
}

int cmd_synth(const CliConfig& cfg, std::ostream& out) {
  if (cfg.out.empty()) throw std::invalid_argument("synth requires --out");
  SynthConfig sc = cfg.synth;
  sc.seed = cfg.seed;
  auto ds = generate_synthetic(sc);
  save_dataset(ds, cfg.out, parse_format(cfg.format));
  out << "wrote " << ds.size() << " records (" << ds.n_categories() << " categories, D=" << ds.dim() << ") to "
      << cfg.out << '\n';
  return kExitOk;
}

int cmd_train(const CliConfig& cfg, std::ostream& out) {
  if (cfg.model.empty()) throw std::invalid_argument("train requires --model");
  auto ds = load_dataset(cfg.data, parse_format(cfg.format));
  PipelineConfig pc;
  pc.branching = cfg.branching;
  pc.depth = cfg.depth;
  pc.tuning_k = cfg.tuning_k;
  pc.n_trees = cfg.trees;
  pc.l2_normalize = cfg.normalize;
  pc.seed = cfg.seed;
  pc.train = train_config(cfg);
  Model model;
  try {
    model = train_model(ds, pc);
  } catch (const std::invalid_argument& e) {
    throw TrainingError(std::string("training: ") + e.what());
  }
  save_model(model, cfg.model);
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const auto& tm = model.trees[t];
    out << "tree " << t << ": " << tm.tree.nodes.size() << " nodes, " << tm.tree.leaf_count() << " leaves, height "
        << tm.tree.height() << ", " << tm.classifier_count() << " classifiers, " << tm.fold_rows.size()
        << " training rows\n";
  }
  out << "saved model to " << cfg.model << '\n';
  return kExitOk;
}

std::string format_prediction(const Model& model, std::size_t index, const Prediction& p, int top) {
  std::ostringstream line;
  line << index;
  char buf[64];
  int shown = 0;
  for (const auto& r : p.ranked) {
    if (top > 0 && shown++ >= top) break;
    std::snprintf(buf, sizeof buf, "%.9g", r.probability);
    line << '\t' << model.category_ids[static_cast<std::size_t>(r.category)] << ':' << buf;
  }
  line << '\n';
  return line.str();
}

int cmd_predict(const CliConfig& cfg, std::ostream& out) {
  auto model = load_model(cfg.model);
  auto queries = load_dataset(cfg.data, parse_format(cfg.format));
  if (queries.dim() != model.dim)
    throw FormatError("query dimension " + std::to_string(queries.dim()) + " does not match model dimension " +
                      std::to_string(model.dim));
  if (cfg.tree_index < 0 || static_cast<std::size_t>(cfg.tree_index) >= model.trees.size())
    throw std::invalid_argument("--tree out of range");
  if (cfg.mode != "greedy" && cfg.mode != "beam" && cfg.mode != "exhaustive" && cfg.mode != "ensemble")
    throw std::invalid_argument("unknown --mode " + cfg.mode);
  InferOptions opts;
  opts.renormalize_siblings = cfg.renormalize;
  const auto& tree = model.trees[static_cast<std::size_t>(cfg.tree_index)];

  std::vector<std::string> lines(queries.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t q = begin; q < queries.size(); q += stride) {
      Vec x = prepare_query(model, queries.row(q));
      Prediction p;
      if (cfg.mode == "greedy") p = predict_greedy(tree, x, opts);
      else if (cfg.mode == "beam") p = predict_nbest(tree, x, cfg.beam, opts);
      else if (cfg.mode == "exhaustive") p = predict_exhaustive(tree, x, opts);
      else p = predict_ensemble(model.trees, x, cfg.beam, opts);
      lines[q] = format_prediction(model, q, p, cfg.top);
    }
  };
  const auto workers = static_cast<std::size_t>(std::max(cfg.threads, 1));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          work(w, workers);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  std::string text;
  for (auto& l : lines) text += l;
  emit(cfg, out, text);
  return kExitOk;
}

std::string mode_line(const char* name, const ModeStats& s) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-10s top1=%.4f top5=%.4f evals/q=%.1f mults/q=%.1f\n", name, s.top1, s.top5,
                s.mean_evals, s.mean_multiplications);
  return buf;
}

int cmd_eval(const CliConfig& cfg, std::ostream& out) {
  auto model = load_model(cfg.model);
  auto queries = load_dataset(cfg.data, parse_format(cfg.format));
  auto ev = evaluate_model(model, queries, cfg.beam);
  std::string text = "queries " + std::to_string(ev.queries) + "\n";
  text += mode_line("greedy", ev.greedy);
  text += mode_line("beam", ev.beam);
  if (ev.has_exhaustive) text += mode_line("exhaustive", ev.exhaustive);
  if (ev.has_ensemble) text += mode_line("ensemble", ev.ensemble);
  emit(cfg, out, text);
  return kExitOk;
}

SweepPoint parse_sweep(const std::string& spec, int default_beam) {
  // K:L[:Q[:trees]]
  SweepPoint p;
  p.beam = default_beam;
  std::vector<int> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad --sweep entry '" + spec + "' (expected K:L[:Q[:trees]])");
    }
  }
  if (parts.size() < 2 || parts.size() > 4) throw std::invalid_argument("bad --sweep entry '" + spec + "'");
  p.branching = parts[0];
  p.depth = parts[1];
  if (parts.size() > 2) p.beam = parts[2];
  if (parts.size() > 3) p.n_trees = parts[3];
  return p;
}

int cmd_bench(const CliConfig& cfg, std::ostream& out) {
  auto ds = load_dataset(cfg.data, parse_format(cfg.format));
  BenchOptions opts;
  for (const auto& s : cfg.sweep) opts.sweep.push_back(parse_sweep(s, cfg.beam));
  if (opts.sweep.empty()) opts.sweep.push_back({cfg.branching, cfg.depth, cfg.beam, cfg.trees});
  opts.seed = cfg.seed;
  opts.train_per_class = cfg.train_per_class;
  opts.test_per_class = cfg.test_per_class;
  opts.repetitions = cfg.reps;
  opts.tuning_k = cfg.tuning_k;
  opts.l2_normalize = cfg.normalize;
  opts.include_flat = !cfg.no_flat;
  opts.train = train_config(cfg);
  auto report = run_benchmark(ds, opts);
  emit(cfg, out, report.to_jsonl(!cfg.no_timing));
  if (!cfg.out.empty()) out << report.to_table();
  return kExitOk;
}

int cmd_export_dot(const CliConfig& cfg, std::ostream& out) {
  auto model = load_model(cfg.model);
  if (cfg.tree_index < 0 || static_cast<std::size_t>(cfg.tree_index) >= model.trees.size())
    throw std::invalid_argument("--tree out of range");
  std::map<int, std::string> labels;
  if (!cfg.names.empty()) {
    // "original_id,name" per line.
    std::ifstream in(cfg.names);
    if (!in) throw IoError("cannot open " + cfg.names);
    std::map<std::uint32_t, int> dense;
    for (std::size_t c = 0; c < model.category_ids.size(); ++c) dense[model.category_ids[c]] = static_cast<int>(c);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto comma = line.find(',');
      if (comma == std::string::npos) throw FormatError("expected id,name", lineno);
      std::uint32_t id = 0;
      try {
        id = static_cast<std::uint32_t>(std::stoul(line.substr(0, comma)));
      } catch (const std::exception&) {
        throw FormatError("bad category id", lineno);
      }
      if (auto it = dense.find(id); it != dense.end()) labels[it->second] = line.substr(comma + 1);
    }
  } else {
    for (std::size_t c = 0; c < model.category_ids.size(); ++c)
      labels[static_cast<int>(c)] = std::to_string(model.category_ids[c]);
  }
  emit(cfg, out, export_dot(model.trees[static_cast<std::size_t>(cfg.tree_index)].tree, &labels));
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CliConfig cfg;
  CLI::App app{"Visual-tree hierarchical classification"};
  app.require_subcommand(1);

  auto add_data = [&](CLI::App* sub, bool required) {
    auto* o = sub->add_option("--data", cfg.data, "Dataset file");
    if (required) o->required();
    sub->add_option("--format", cfg.format, "Dataset format: csv or bin")->check(CLI::IsMember({"csv", "bin", "binary"}));
  };
  auto add_training = [&](CLI::App* sub) {
    sub->add_option("--branching,-K", cfg.branching, "Branching factor K")->check(CLI::Range(2, 1 << 20));
    sub->add_option("--depth,-L", cfg.depth, "Maximum depth L")->check(CLI::Range(1, 64));
    sub->add_option("--trees", cfg.trees, "Trees in the ensemble (one data fold each)")->check(CLI::Range(1, 1024));
    sub->add_option("--lambda", cfg.lambda, "SVM L2 regularization")->check(CLI::PositiveNumber);
    sub->add_option("--epochs", cfg.epochs, "SVM epochs")->check(CLI::Range(1, 1 << 20));
    sub->add_option("--root-subsample", cfg.root_subsample, "Per-category sample cap at the root (0 = none)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--tuning-k", cfg.tuning_k, "Neighbour rank for the self-tuned bandwidth")->check(CLI::Range(1, 1 << 20));
    sub->add_flag("--normalize", cfg.normalize, "L2-normalize features");
    sub->add_flag("--no-bias", cfg.no_bias, "Train bias-free edge classifiers");
    sub->add_flag("--balance", cfg.balance, "Weight SVM samples inversely to side size");
  };
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seed, "Random seed");
    sub->add_option("--out", cfg.out, "Output path");
    sub->add_option("--threads", cfg.threads, "Worker threads")->check(CLI::Range(1, 256));
  };

  auto* synth = app.add_subcommand("synth", "Write a synthetic planted-hierarchy dataset");
  synth->add_option("--categories", cfg.synth.n_categories)->check(CLI::Range(1, 1 << 20));
  synth->add_option("--per-class", cfg.synth.samples_per_category)->check(CLI::Range(1, 1 << 20));
  synth->add_option("--dim", cfg.synth.dim)->check(CLI::Range(1, 1 << 20));
  synth->add_option("--hierarchy-branching", cfg.synth.hierarchy_branching)->check(CLI::Range(1, 1 << 20));
  synth->add_option("--noise", cfg.synth.noise_scale)->check(CLI::PositiveNumber);
  synth->add_option("--level-decay", cfg.synth.level_decay, "Scale of each planted level relative to the one above")
      ->check(CLI::PositiveNumber);
  synth->add_option("--format", cfg.format)->check(CLI::IsMember({"csv", "bin", "binary"}));
  add_common(synth);

  auto* train = app.add_subcommand("train", "Build visual tree(s) and train edge classifiers");
  add_data(train, true);
  train->add_option("--model", cfg.model, "Model output path")->required();
  add_training(train);
  add_common(train);

  auto* predict = app.add_subcommand("predict", "Rank labels for each query");
  add_data(predict, true);
  predict->add_option("--model", cfg.model)->required();
  predict->add_option("--mode", cfg.mode)->check(CLI::IsMember({"greedy", "beam", "exhaustive", "ensemble"}));
  predict->add_option("--beam,-Q", cfg.beam, "Beam width Q")->check(CLI::Range(1, 1 << 20));
  predict->add_option("--tree", cfg.tree_index, "Tree index for single-tree modes");
  predict->add_option("--top", cfg.top, "Labels printed per query (0 = all)")->check(CLI::NonNegativeNumber);
  predict->add_flag("--renormalize", cfg.renormalize, "Renormalize sibling edge probabilities");
  add_common(predict);

  auto* eval = app.add_subcommand("eval", "Top-1/top-5 accuracy of a model on labeled queries");
  add_data(eval, true);
  eval->add_option("--model", cfg.model)->required();
  eval->add_option("--beam,-Q", cfg.beam)->check(CLI::Range(1, 1 << 20));
  add_common(eval);

  auto* bench = app.add_subcommand("bench", "Sweep tree shapes and compare greedy, beam, exhaustive and flat");
  add_data(bench, true);
  add_training(bench);
  bench->add_option("--beam,-Q", cfg.beam)->check(CLI::Range(1, 1 << 20));
  bench->add_option("--sweep", cfg.sweep, "Configurations K:L[:Q[:trees]]")->delimiter(',');
  bench->add_option("--train-per-class", cfg.train_per_class)->check(CLI::NonNegativeNumber);
  bench->add_option("--test-per-class", cfg.test_per_class)->check(CLI::NonNegativeNumber);
  bench->add_option("--reps", cfg.reps, "Seeded repetitions averaged")->check(CLI::Range(1, 1000));
  bench->add_flag("--no-timing", cfg.no_timing, "Omit timing fields from the report");
  bench->add_flag("--no-flat", cfg.no_flat, "Skip the one-vs-rest baseline");
  add_common(bench);

  auto* dot = app.add_subcommand("export-dot", "Write a tree as Graphviz DOT");
  dot->add_option("--model", cfg.model)->required();
  dot->add_option("--tree", cfg.tree_index);
  dot->add_option("--names", cfg.names, "CSV of original_id,name");
  add_common(dot);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(cfg, out);
    if (train->parsed()) return cmd_train(cfg, out);
    if (predict->parsed()) return cmd_predict(cfg, out);
    if (eval->parsed()) return cmd_eval(cfg, out);
    if (bench->parsed()) return cmd_bench(cfg, out);
    if (dot->parsed()) return cmd_export_dot(cfg, out);
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const TrainingError& e) {
    err << "training error: " << e.what() << '\n';
    return kExitTraining;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace vtree
