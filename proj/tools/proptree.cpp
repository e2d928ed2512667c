// Command-line front end: corpus conversion, splitting, training, evaluation,
// prediction and the oracle self-test.
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "proptree/harness.hpp"
#include "proptree/selftest.hpp"

namespace fs = std::filesystem;
using namespace proptree;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void write_corpus(const fs::path& path, const std::vector<AnnotatedDocument>& docs) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_corpus_jsonl(out, docs);
}

std::vector<AnnotatedDocument> read_with_format(const fs::path& path, const std::string& format) {
  if (format == "jsonl") return load_corpus(path);
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return corpus_reader(format)(in);
}

struct TrainArgs {
  std::string train_path, validation_path, model = "joint", attention, embeddings, config_path, out = "run";
  std::size_t steps = 0;
  std::uint64_t seed = 1;
  std::vector<std::string> set;
};

int run_train(const TrainArgs& a) {
  TrainConfig cfg;
  if (!a.config_path.empty()) cfg.load_overrides(fs::path(a.config_path));
  for (const auto& kv : a.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.model = parse_model_kind(a.model);
  if (!a.attention.empty()) {
    cfg.attention = parse_attention(a.attention);
    if (cfg.model == ModelKind::Joint) cfg.model = ModelKind::JointAttention;
  }
  if (a.steps > 0) cfg.steps = a.steps;
  cfg.seed = a.seed;
  if (!a.embeddings.empty()) cfg.embeddings = a.embeddings;

  const auto train_docs = load_corpus(a.train_path);
  const auto validation = a.validation_path.empty() ? std::vector<AnnotatedDocument>{} : load_corpus(a.validation_path);
  const fs::path out(a.out);
  fs::create_directories(out);
  std::ofstream log(out / "train_log.csv");
  log << "epoch,loss,val_f1,seconds\n";
  auto result = train(cfg, train_docs, validation, [&](const EpochRecord& e) {
    log << e.epoch << ',' << e.loss << ',' << e.val_f1 << ',' << e.seconds << '\n' << std::flush;
    std::cerr << "epoch " << e.epoch << "  loss " << e.loss << "  val_f1 " << e.val_f1 << "  " << e.seconds << "s\n";
    return true;
  });
  log.close();
  write_text(out / "train_log.csv", result.log.csv());
  save_checkpoint(result.model, out / "model.ptck");
  write_text(out / "config.json", cfg.to_json() + "\n");
  nlohmann::json summary = {{"checkpoint", (out / "model.ptck").string()},
                            {"best_epoch", result.log.best_epoch},
                            {"best_val_f1", result.log.best_f1()},
                            {"epochs", result.log.epochs.size()}};
  std::cout << summary.dump() << "\n";
  return 0;
}

int run_evaluate(const std::string& checkpoint, const std::string& input, const std::string& out_dir, bool gold) {
  const auto docs = load_corpus(input);
  // A single document may legitimately have no entities; a corpus without any has no gold to score against.
  if (std::all_of(docs.begin(), docs.end(), [](const AnnotatedDocument& d) { return d.tree.entities.empty(); })) {
    throw Error("unlabeled input: " + input + " carries no annotations");
  }
  MetricsReport report;
  std::string row = "gold";
  if (gold) {
    report = evaluate_gold(docs);
  } else {
    if (checkpoint.empty()) throw Error("--checkpoint is required unless --gold is given");
    Model model = load_checkpoint(fs::path(checkpoint));
    row = std::string(model_kind_name(model.config.model));
    report = evaluate(model, docs);
  }
  const std::string table = metrics_table(report, row);
  std::cout << table;
  std::cout << "equivalent F1 (diagnostic): " << report.equivalent.f1 << "\n";
  if (!out_dir.empty()) {
    write_text(fs::path(out_dir) / "metrics.json", metrics_json(report) + "\n");
    write_text(fs::path(out_dir) / "metrics.txt", table);
  }
  return 0;
}

int run_predict(const std::string& checkpoint, const std::string& input, const std::string& out_path) {
  Model model = load_checkpoint(fs::path(checkpoint));
  const auto docs = load_corpus(input);
  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty()) {
    if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
    file.open(out_path);
    if (!file) throw Error("cannot write " + out_path);
    out = &file;
  }
  for (const auto& d : docs) *out << prediction_json(d.doc, predict(model, d.doc)) << "\n";
  return 0;
}

int run_selftest(bool full) {
  auto results = selftest::run_oracle_suite();
  if (full) {
    results.push_back(selftest::check_overfit());
    results.push_back(selftest::check_ordering());
  }
  bool ok = true;
  for (const auto& r : results) {
    std::cout << selftest::format_result(r) << "\n";
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint mention segmentation and property-tree parsing"};
  app.require_subcommand(1);
  std::string command;

  auto* gen = app.add_subcommand("generate", "Write a synthetic annotated corpus");
  std::size_t gen_docs = 100;
  std::uint64_t gen_seed = 1;
  double gen_ambiguity = 0.0;
  std::string gen_out;
  gen->add_option("--documents", gen_docs, "Number of documents");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--ambiguity", gen_ambiguity, "Probability of lexically ambiguous sentences");
  gen->add_option("--out", gen_out, "Output JSONL file")->required();

  auto* conv = app.add_subcommand("convert", "Import a corpus into canonical JSONL");
  std::string conv_in, conv_out, conv_format = "conll";
  conv->add_option("input", conv_in, "Input file")->required();
  conv->add_option("--format", conv_format, "Input format");
  conv->add_option("--out", conv_out, "Output JSONL file")->required();

  auto* split = app.add_subcommand("split", "Shuffle and split a corpus 70/15/15");
  std::string split_in, split_out = ".";
  std::uint64_t split_seed = 1;
  split->add_option("input", split_in, "Canonical JSONL corpus")->required();
  split->add_option("--seed", split_seed, "Shuffle seed");
  split->add_option("--out", split_out, "Output directory");

  auto* tr = app.add_subcommand("train", "Train a joint model or a pipeline");
  TrainArgs targs;
  tr->add_option("train", targs.train_path, "Training JSONL")->required();
  tr->add_option("--validation", targs.validation_path, "Validation JSONL for early stopping");
  tr->add_option("--model", targs.model, "joint | joint+attention | joint-2layer | crf+ltm | crf+mtt");
  tr->add_option("--attention", targs.attention, "additive | bilinear | multiplicative | biaffine | tensor | edge");
  tr->add_option("--steps", targs.steps, "Message-passing steps for edge attention");
  tr->add_option("--seed", targs.seed, "Random seed");
  tr->add_option("--embeddings", targs.embeddings, "Word vectors in text format");
  tr->add_option("--config", targs.config_path, "File of key=value overrides");
  tr->add_option("--set", targs.set, "Inline key=value override");
  tr->add_option("--out", targs.out, "Output directory");

  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on a labeled split");
  std::string ev_ckpt, ev_in, ev_out;
  bool ev_gold = false;
  ev->add_option("input", ev_in, "Labeled JSONL")->required();
  ev->add_option("--checkpoint", ev_ckpt, "Model checkpoint");
  ev->add_flag("--gold", ev_gold, "Score gold annotations against themselves");
  ev->add_option("--out", ev_out, "Directory for metrics.json and metrics.txt");

  auto* pr = app.add_subcommand("predict", "Predict trees for documents");
  std::string pr_ckpt, pr_in, pr_out;
  pr->add_option("input", pr_in, "JSONL documents")->required();
  pr->add_option("--checkpoint", pr_ckpt, "Model checkpoint")->required();
  pr->add_option("--out", pr_out, "Output JSONL (stdout when omitted)");

  auto* st = app.add_subcommand("selftest", "Run the oracle checks");
  bool st_full = false;
  st->add_flag("--full", st_full, "Also run the overfit and ordering checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << nlohmann::json{{"error", e.what()}, {"kind", "usage"}}.dump() << "\n";
    return 2;
  }

  try {
    if (*gen) {
      SyntheticOptions o;
      o.documents = gen_docs;
      o.seed = gen_seed;
      o.lexical_ambiguity = gen_ambiguity;
      write_corpus(gen_out, generate_synthetic_corpus(o));
      return 0;
    }
    if (*conv) {
      write_corpus(conv_out, read_with_format(conv_in, conv_format));
      return 0;
    }
    if (*split) {
      const auto parts = split_corpus(load_corpus(split_in), split_seed);
      const fs::path dir(split_out);
      write_corpus(dir / "train.jsonl", parts.train);
      write_corpus(dir / "validation.jsonl", parts.validation);
      write_corpus(dir / "test.jsonl", parts.test);
      std::cout << nlohmann::json{{"train", parts.train.size()},
                                  {"validation", parts.validation.size()},
                                  {"test", parts.test.size()}}
                       .dump()
                << "\n";
      return 0;
    }
    if (*tr) return run_train(targs);
    if (*ev) return run_evaluate(ev_ckpt, ev_in, ev_out, ev_gold);
    if (*pr) return run_predict(pr_ckpt, pr_in, pr_out);
    if (*st) return run_selftest(st_full);
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", e.what()}, {"command", app.get_subcommands().front()->get_name()}}.dump()
              << "\n";
    return 1;
  }
  return 0;
}
