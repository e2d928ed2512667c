#include "proptree/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "proptree/attention.hpp"
#include "proptree/harness.hpp"
#include "proptree/oracles.hpp"

namespace proptree::selftest {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Tensor random_tensor(Shape shape, Rng& rng, double bound = 1.0) {
  Tensor t(std::move(shape));
  for (auto& x : t.values()) x = uniform(rng, -bound, bound);
  return t;
}

void randomize(Tensor& t, Rng& rng, double bound) {
  for (auto& x : t.values()) x = uniform(rng, -bound, bound);
}

TokenHeadAssignment random_assignment(std::size_t tokens, Rng& rng) {
  TokenHeadAssignment a(tokens);
  for (std::size_t i = 1; i <= tokens; ++i) {
    const auto label = kAllLabels[pick(rng, 0, kNumLabels - 1)];
    if (label == RelationLabel::Skip || tokens == 0) continue;
    std::size_t head = pick(rng, 0, tokens - 1);
    if (head >= i) ++head;
    a.set(i, head, label);
  }
  return a;
}

AdDocument random_document(std::size_t tokens, Rng& rng) {
  static const char* words[] = {"a", "bb", "Ccc", "d1", "ee", "with", "3"};
  AdDocument d;
  d.id = "rand";
  for (std::size_t i = 0; i < tokens; ++i) d.tokens.emplace_back(words[pick(rng, 0, 6)]);
  return d;
}

// Worst relative error over every named tensor of a freshly built loss.
struct GradientProbe {
  double worst = 0.0;
  std::size_t checked = 0;

  void run(const NamedParameters& params, const std::function<Var(Tape&)>& build) {
    for (auto& [_, p] : params) p->zero_grad();
    {
      Tape tape;
      tape.backward(build(tape));
    }
    for (auto& [_, p] : params) {
      auto g = p->grad();
      const std::vector<double> analytic(g.begin(), g.end());
      const auto r = oracle::check_gradient(*p, analytic, [&] {
        Tape tape;
        return build(tape).scalar();
      });
      worst = std::max(worst, r.max_relative_error);
      checked += r.checked;
    }
  }
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

}  // namespace

std::string format_result(const CheckResult& r) {
  const char* status = r.skipped ? "SKIP" : (r.passed ? "PASS" : "FAIL");
  char buf[64];
  std::snprintf(buf, sizeof buf, " (%.2fs)", r.seconds);
  return std::string(status) + "  " + r.name + ": " + r.detail + buf;
}

CheckResult check_gradients(std::size_t seeds) {
  const auto start = Clock::now();
  CheckResult r{"gradient correctness"};
  GradientProbe probe;
  const AttentionKind variants[] = {AttentionKind::Additive, AttentionKind::Bilinear, AttentionKind::Multiplicative,
                                    AttentionKind::Biaffine, AttentionKind::TensorNet, AttentionKind::Edge};
  for (std::size_t seed = 1; seed <= seeds; ++seed) {
    Rng rng(seed);
    const std::size_t tokens = pick(rng, 1, 4);
    const std::size_t d = pick(rng, 2, 4);
    const std::size_t n = tokens + 1;

    // Encoder alone, one and two layers, with a random linear readout.
    for (std::size_t layers : {1u, 2u}) {
      BiLstmParams lstm = make_bilstm(d, d, layers, rng);
      for (auto* dir : {&lstm.forward, &lstm.backward}) {
        for (auto& p : *dir) {
          randomize(p.input_weights, rng, 0.5);
          randomize(p.hidden_weights, rng, 0.5);
          randomize(p.bias, rng, 0.5);
        }
      }
      Tensor inputs = random_tensor({n, d}, rng);
      for (std::size_t j = 0; j < d; ++j) inputs.at(0, j) = 0.0;
      const Tensor readout = random_tensor({n, 2 * d}, rng);
      NamedParameters params;
      lstm.collect(params, "");
      probe.run(params, [&](Tape& t) {
        Var h = bilstm_forward(t.constant(inputs), lstm);
        return sum(mul(h, t.constant(readout)));
      });
    }

    const TokenHeadAssignment gold = random_assignment(tokens, rng);
    const Tensor encoded = random_tensor({n, 2 * d}, rng);

    // Scorer over fixed encodings.
    {
      ScorerParams scorer = make_scorer(2 * d, d, rng);
      randomize(scorer.bias, rng, 0.5);
      NamedParameters params;
      scorer.collect(params, "");
      probe.run(params, [&](Tape& t) { return head_selection_loss(joint_log_probs(t.constant(encoded), scorer), gold); });
    }

    // Full joint model from embeddings to loss.
    {
      const AdDocument doc = random_document(tokens, rng);
      EmbeddingTable table = random_embeddings({{doc, {}}}, d, rng);
      randomize(table.matrix, rng, 1.0);
      JointShape shape;
      shape.hidden = d;
      shape.scorer_width = d;
      JointModel model = make_joint_model(shape, std::move(table), rng);
      probe.run(model.parameters(), [&](Tape& t) {
        return head_selection_loss(joint_forward(t, model, doc, 0.0, 0.0, nullptr), gold);
      });
    }

    // Every attention variant feeding the scorer.
    for (auto kind : variants) {
      AttentionParams att = make_attention({kind, pick(rng, 1, 3)}, 2 * d, d, pick(rng, 2, 3), rng);
      NamedParameters params;
      att.collect(params, "attention.");
      for (auto& [_, p] : params) randomize(*p, rng, 0.5);
      ScorerParams scorer = make_scorer(att.output_width(), d, rng);
      scorer.collect(params, "scorer.");
      probe.run(params, [&](Tape& t) {
        return head_selection_loss(joint_log_probs(augment(t.constant(encoded), att), scorer), gold);
      });
    }

    // CRF training objective on a two-document toy corpus.
    {
      std::vector<AnnotatedDocument> docs = {{random_document(pick(rng, 1, 4), rng), {}},
                                             {random_document(pick(rng, 1, 4), rng), {}}};
      CrfModel crf = make_crf(docs);
      for (auto* p : crf.parameters()) randomize(*p, rng, 0.5);
      std::vector<CrfExample> examples;
      for (const auto& d2 : docs) {
        BioSequence tags;
        for (std::size_t i = 0; i < d2.doc.length(); ++i) tags.push_back(static_cast<BioTag>(pick(rng, 0, kNumBioTags - 1)));
        examples.push_back({&d2.doc, tags});
      }
      for (auto* p : crf.parameters()) p->zero_grad();
      crf_objective(examples, crf, 10.0, 1.0, true);
      for (auto* p : crf.parameters()) {
        auto g = p->grad();
        const std::vector<double> analytic(g.begin(), g.end());
        const auto rep = oracle::check_gradient(*p, analytic, [&] { return -crf_objective(examples, crf, 10.0); });
        probe.worst = std::max(probe.worst, rep.max_relative_error);
        probe.checked += rep.checked;
      }
    }
  }
  r.seconds = seconds_since(start);
  r.passed = probe.worst < 1e-4 && r.seconds < 60.0;
  r.detail = fmt("max relative error %.3g over %.0f entries (limit 1e-4, 60 s)", probe.worst,
                 static_cast<double>(probe.checked));
  return r;
}

CheckResult check_edmonds(std::size_t graphs_per_size) {
  const auto start = Clock::now();
  CheckResult r{"Edmonds oracle"};
  double worst = 0.0;
  bool valid = true;
  for (std::size_t n = 2; n <= 5; ++n) {
    for (std::size_t g = 0; g < graphs_per_size; ++g) {
      Rng rng(1000 * n + g);
      std::vector<std::size_t> ids(n);
      for (std::size_t k = 0; k < n; ++k) ids[k] = k;
      WeightedDigraph graph(ids);
      for (std::size_t h = 0; h < n; ++h) {
        for (std::size_t d = 1; d < n; ++d) {
          if (h != d) graph.set_edge(h, d, uniform(rng, -5.0, 5.0));
        }
      }
      const auto tree = chu_liu_edmonds(graph);
      std::vector<std::size_t> parent = tree.parent;
      parent[0] = 0;
      bool found = false;
      oracle::for_each_arborescence(n, [&](const std::vector<std::size_t>& p) {
        std::vector<std::size_t> q = p;
        q[0] = 0;
        if (q == parent) found = true;
      });
      valid = valid && found;
      worst = std::max(worst, std::abs(tree.weight - oracle::max_arborescence_weight(graph)));
    }
  }
  // Symmetric two-cycle: either orientation scores 6; the smaller head wins.
  WeightedDigraph tie({0, 1, 2});
  tie.set_edge(0, 1, 1.0);
  tie.set_edge(0, 2, 1.0);
  tie.set_edge(1, 2, 5.0);
  tie.set_edge(2, 1, 5.0);
  const auto t = chu_liu_edmonds(tie);
  const bool tie_ok = t.weight == 6.0 && t.parent[1] == 0 && t.parent[2] == 1;
  r.seconds = seconds_since(start);
  r.passed = worst <= 1e-9 && valid && tie_ok && r.seconds < 30.0;
  r.detail = fmt("max |weight - exhaustive| %.3g, all outputs valid: ", worst) + (valid ? "yes" : "no") +
             ", tie case: " + (tie_ok ? "ok" : "wrong");
  return r;
}

CheckResult check_mtt(std::size_t draws) {
  const auto start = Clock::now();
  CheckResult r{"MTT oracle"};
  double worst = 0.0, worst_marginal = 0.0;
  for (std::size_t t = 1; t <= 5; ++t) {
    const std::size_t n = t + 1;
    for (std::size_t k = 0; k < draws; ++k) {
      Rng rng(100 * t + k);
      std::vector<double> theta(n * n, 0.0);
      for (auto& x : theta) x = uniform(rng, -3.0, 3.0);
      const double a = mtt_log_partition(theta, n);
      const double b = oracle::mtt_log_partition(theta, n);
      worst = std::max(worst, std::abs(std::expm1(a - b)));
      const auto mu = mtt_marginals(theta, n);
      for (std::size_t m = 1; m < n; ++m) {
        double s = 0.0;
        for (std::size_t h = 0; h < n; ++h) s += h == m ? 0.0 : mu[h * n + m];
        worst_marginal = std::max(worst_marginal, std::abs(s - 1.0));
      }
    }
  }
  const double z = std::exp(mtt_log_partition(std::vector<double>(9, 0.0), 3));
  r.seconds = seconds_since(start);
  r.passed = worst < 1e-8 && worst_marginal < 1e-8 && std::abs(z - 3.0) < 1e-12;
  r.detail = fmt("max relative error of Z %.3g, marginal mass error %.3g, Z(t=2, zero scores) = %.15g", worst,
                 worst_marginal, z);
  return r;
}

CheckResult check_crf(std::size_t seeds) {
  const auto start = Clock::now();
  CheckResult r{"CRF oracle"};
  double worst = 0.0;
  std::size_t mismatched = 0;
  for (std::size_t seed = 1; seed <= seeds; ++seed) {
    Rng rng(seed);
    CrfLattice l;
    l.length = pick(rng, 1, 6);
    l.tags = pick(rng, 2, 5);
    l.unary.resize(l.length * l.tags);
    l.transition.resize(l.tags * l.tags);
    l.start.resize(l.tags);
    for (auto* v : {&l.unary, &l.transition, &l.start}) {
      for (auto& x : *v) x = uniform(rng, -2.0, 2.0);
    }
    worst = std::max(worst, std::abs(std::expm1(lattice_log_partition(l) - oracle::crf_log_partition(l))));
    if (lattice_viterbi(l) != oracle::crf_viterbi(l)) ++mismatched;
  }
  r.seconds = seconds_since(start);
  r.passed = worst < 1e-8 && mismatched == 0;
  r.detail = fmt("max relative error of Z %.3g, Viterbi mismatches %.0f", worst, static_cast<double>(mismatched));
  return r;
}

CheckResult check_normalization(std::size_t draws) {
  const auto start = Clock::now();
  CheckResult r{"normalization"};
  double worst = 0.0, worst_attention = 0.0;
  for (std::size_t k = 0; k < draws; ++k) {
    Rng rng(500 + k);
    const std::size_t n = pick(rng, 2, 9), m = pick(rng, 2, 8);
    ScorerParams scorer = make_scorer(m, pick(rng, 2, 8), rng);
    randomize(scorer.head_weights, rng, 2.0);
    randomize(scorer.dependent_weights, rng, 2.0);
    randomize(scorer.output, rng, 2.0);
    const auto dist = joint_distribution(random_tensor({n, m}, rng, 2.0), scorer);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t l = 0; l < kNumLabels; ++l) s += dist.at(i, j, l);
      }
      worst = std::max(worst, std::abs(s - 1.0));
    }
    for (auto kind : {AttentionKind::Additive, AttentionKind::Bilinear, AttentionKind::Multiplicative,
                      AttentionKind::Biaffine, AttentionKind::TensorNet}) {
      const std::size_t width = 2 * pick(rng, 1, 3);
      AttentionParams att = make_attention({kind, 1}, width, 4, 3, rng);
      NamedParameters params;
      att.collect(params, "");
      for (auto& [_, p] : params) randomize(*p, rng, 1.0);
      Tape tape;
      const Tensor& w = softmax(attention_scores(tape.constant(random_tensor({n, width}, rng, 2.0)), att), 1).value();
      for (std::size_t row = 0; row < n; ++row) {
        double s = 0.0;
        for (std::size_t c = 0; c < n; ++c) s += w.at(row, c);
        worst_attention = std::max(worst_attention, std::abs(s - 1.0));
      }
    }
  }
  r.seconds = seconds_since(start);
  r.passed = worst < 1e-6 && worst_attention < 1e-6;
  r.detail = fmt("max |mass - 1|: head selection %.3g, attention rows %.3g", worst, worst_attention);
  return r;
}

CheckResult check_roundtrip(std::size_t documents) {
  const auto start = Clock::now();
  CheckResult r{"roundtrip"};
  SyntheticOptions opts;
  opts.documents = documents;
  opts.seed = 2024;
  const auto corpus = generate_synthetic_corpus(opts);
  std::size_t failures = 0, crossing = 0;
  for (const auto& d : corpus) {
    const auto heads = encode_tree_to_heads(d.doc, d.tree);
    if (skeleton(decode_heads_to_tree(d.doc, heads)) != skeleton(d.tree)) ++failures;
    if (projectivity(heads).has_non_projective_part_of) ++crossing;
  }
  const double share = 100.0 * static_cast<double>(crossing) / static_cast<double>(corpus.size());
  r.seconds = seconds_since(start);
  r.passed = failures == 0 && share >= 25.0 && corpus.size() == documents;
  r.detail = fmt("%.0f documents, %.0f mismatches, %.1f%% with crossing part-of arcs (need >= 25%%)",
                 static_cast<double>(corpus.size()), static_cast<double>(failures), share);
  return r;
}

CheckResult check_overfit(const OverfitOptions& o) {
  const auto start = Clock::now();
  CheckResult r{"overfit"};
  SyntheticOptions opts;
  opts.documents = o.documents;
  opts.seed = o.seed;
  const auto corpus = generate_synthetic_corpus(opts);
  TrainConfig cfg;
  cfg.model = ModelKind::Joint;
  cfg.hidden = o.hidden;
  cfg.scorer_width = o.hidden;
  cfg.learning_rate = o.learning_rate;
  cfg.dropout = 0.0;
  cfg.max_epochs = o.max_epochs;
  cfg.patience = o.max_epochs;
  cfg.seed = o.seed;
  std::size_t epochs = 0;
  auto result = train(cfg, corpus, corpus, [&](const EpochRecord& e) {
    epochs = e.epoch;
    return e.val_f1 < 99.9 && seconds_since(start) < o.time_limit_seconds;
  });
  const auto report = evaluate(result.model, corpus);
  r.seconds = seconds_since(start);
  r.passed = report.overall.f1 >= 99.0 && report.tree_rate >= 95.0 && epochs <= o.max_epochs &&
             r.seconds <= o.time_limit_seconds;
  r.detail = fmt("training F1 %.2f, greedy tree-rate %.2f after %.0f epochs (need >= 99, >= 95, <= 200 epochs)",
                 report.overall.f1, report.tree_rate, static_cast<double>(epochs));
  return r;
}

CheckResult check_ordering(const OrderingOptions& o) {
  const auto start = Clock::now();
  CheckResult r{"ordering"};
  SyntheticOptions opts;
  opts.documents = o.documents;
  opts.seed = o.seed;
  opts.lexical_ambiguity = o.lexical_ambiguity;
  const auto split = split_corpus(generate_synthetic_corpus(opts), o.seed);

  TrainConfig joint;
  joint.model = ModelKind::Joint;
  joint.hidden = o.hidden;
  joint.max_epochs = o.epochs;
  joint.patience = o.epochs;
  joint.seed = o.seed;
  joint.learning_rate = o.learning_rate;
  auto joint_run = train(joint, split.train, split.validation);
  const auto joint_report = evaluate(joint_run.model, split.test);

  TrainConfig pipe = joint;
  pipe.model = ModelKind::CrfMtt;
  pipe.pipeline_epochs = o.epochs;
  auto pipe_run = train(pipe, split.train, split.validation);
  const auto pipe_report = evaluate(pipe_run.model, split.test);

  r.seconds = seconds_since(start);
  r.passed = joint_report.overall.f1 > pipe_report.overall.f1;
  r.detail = fmt("test overall F1: joint %.2f vs CRF+MTT %.2f, %.0f passes each", joint_report.overall.f1,
                 pipe_report.overall.f1, static_cast<double>(o.epochs));
  return r;
}

CheckResult check_dataset(const std::filesystem::path& corpus_path) {
  const auto start = Clock::now();
  CheckResult r{"dataset reproduction"};
  if (!std::filesystem::exists(corpus_path)) {
    r.skipped = true;
    r.passed = true;
    r.detail = "no corpus at " + corpus_path.string();
    return r;
  }
  const auto split = split_corpus(load_corpus(corpus_path), 1);
  TrainConfig edge;
  edge.model = ModelKind::JointAttention;
  edge.attention = AttentionKind::Edge;
  edge.steps = 3;
  auto edge_run = train(edge, split.train, split.validation);
  const double edge_f1 = evaluate(edge_run.model, split.test).overall.f1;
  TrainConfig mtt;
  mtt.model = ModelKind::CrfMtt;
  auto mtt_run = train(mtt, split.train, split.validation);
  const double mtt_f1 = evaluate(mtt_run.model, split.test).overall.f1;
  r.seconds = seconds_since(start);
  r.passed = std::abs(edge_f1 - 68.57) <= 3.0 && std::abs(mtt_f1 - 65.15) <= 3.0;
  r.detail = fmt("edge attention (T=3) F1 %.2f (target 68.57 +/- 3), CRF+MTT F1 %.2f (target 65.15 +/- 3)", edge_f1,
                 mtt_f1);
  return r;
}

std::vector<CheckResult> run_oracle_suite() {
  return {check_gradients(), check_edmonds(), check_mtt(), check_crf(), check_normalization(), check_roundtrip()};
}

}  // namespace proptree::selftest
