#include "proptree/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <Eigen/Dense>

namespace proptree {

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string distance_bucket(std::size_t k) {
  if (k <= 2) return std::to_string(k);
  if (k <= 4) return "3-4";
  if (k <= 8) return "5-8";
  return "9+";
}

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

std::string root_or_type(const Candidate* c) { return c ? std::string(type_name(c->type)) : std::string("ROOT"); }

}  // namespace

EdgeFeatureVector extract_edge_features(const Candidate* parent, const Candidate& child, const AdDocument& doc) {
  EdgeFeatureVector f;
  const std::string ctok = lower(doc.token(child.span.main_token()));
  const std::string ptype = root_or_type(parent);
  const std::string ctype(type_name(child.type));
  f.push_back("bias");
  f.push_back("ptype=" + ptype);
  f.push_back("ctype=" + ctype);
  f.push_back("pair=" + ptype + "->" + ctype);
  f.push_back("ctok=" + ctok);
  if (parent == nullptr) {
    f.push_back("ptok=<root>");
    f.push_back("root_cpos=" + distance_bucket(child.span.start - 1));
    return f;
  }
  const std::string ptok = lower(doc.token(parent->span.main_token()));
  f.push_back("ptok=" + ptok);
  f.push_back("tokpair=" + ptok + "->" + ctok);
  const bool parent_first = parent->span.start < child.span.start;
  f.push_back(parent_first ? "order=parent-first" : "order=child-first");
  const std::size_t from = parent_first ? parent->span.end : child.span.end;
  const std::size_t to = parent_first ? child.span.start : parent->span.start;
  const std::size_t between = to > from ? to - from : 0;
  f.push_back("dist=" + distance_bucket(between));
  f.push_back("nbtw=" + std::to_string(std::min<std::size_t>(between, 10)));
  for (std::size_t i = from; i < to; ++i) f.push_back("btw=" + lower(doc.token(i)));
  return f;
}

CandidateSet gold_candidates(const AnnotatedDocument& doc) {
  struct Item {
    EntityMention span;
    EntityType type;
    const Entity* entity;
  };
  std::vector<Item> items;
  for (const auto& e : doc.tree.entities) {
    for (const auto& m : e.mentions) items.push_back({m, e.type, &e});
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.span.start < b.span.start; });
  std::map<std::string, std::size_t> main_index;
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (items[k].entity->mentions.front() == items[k].span) main_index[items[k].entity->id] = k;
  }
  CandidateSet out;
  for (const auto& it : items) {
    out.candidates.push_back({it.span, it.type});
    const std::string& parent = it.entity->parent;
    out.gold_parent.push_back(parent == kRootId ? CandidateSet::kRootParent : main_index.at(parent));
  }
  return out;
}

std::vector<Candidate> candidates_from_tags(const BioSequence& tags) {
  std::vector<Candidate> out;
  for (const auto& [span, type] : bio_mentions(tags)) out.push_back({span, type});
  return out;
}

double EdgeWeights::score(const EdgeFeatureVector& f) const {
  double s = 0.0;
  for (const auto& name : f) {
    const auto id = features.find(name);
    if (id != FeatureIndex::kMissing) s += weights[id];
  }
  return s;
}

void EdgeWeights::add_gradient(const EdgeFeatureVector& f, double scale) {
  auto g = weights.grad();
  for (const auto& name : f) {
    const auto id = features.find(name);
    if (id != FeatureIndex::kMissing) g[id] += scale;
  }
}

namespace {

// Every ordered (parent-or-root, child) pair of a document's gold candidates.
struct PairTable {
  std::size_t t = 0;
  std::vector<EdgeFeatureVector> features;  // [h * (t+1) + m], node 0 the root
  std::vector<std::size_t> gold_head;       // per node m ≥ 1
};

PairTable pair_table(const AnnotatedDocument& doc) {
  const CandidateSet cs = gold_candidates(doc);
  PairTable p;
  p.t = cs.candidates.size();
  const std::size_t n = p.t + 1;
  p.features.resize(n * n);
  p.gold_head.assign(n, 0);
  for (std::size_t m = 1; m < n; ++m) {
    const Candidate& child = cs.candidates[m - 1];
    for (std::size_t h = 0; h < n; ++h) {
      if (h == m) continue;
      p.features[h * n + m] = extract_edge_features(h == 0 ? nullptr : &cs.candidates[h - 1], child, doc.doc);
    }
    const auto g = cs.gold_parent[m - 1];
    p.gold_head[m] = g == CandidateSet::kRootParent ? 0 : g + 1;
  }
  return p;
}

EdgeWeights make_edge_weights(const std::vector<PairTable>& tables) {
  EdgeWeights w;
  for (const auto& t : tables) {
    for (const auto& f : t.features) {
      for (const auto& name : f) w.features.add(name);
    }
  }
  w.weights = Tensor({1, std::max<std::size_t>(w.features.size(), 1)}, true);
  return w;
}

void add_l2(Tensor& w, double reg) {
  auto g = w.grad();
  for (std::size_t k = 0; k < w.size(); ++k) g[k] += reg * w[k];
}

template <class StepFn>
void run_epochs(std::size_t docs, const EdgeTrainConfig& config, Tensor& weights, StepFn step) {
  AdamState adam(AdamConfig{config.learning_rate});
  Rng rng(config.seed);
  std::vector<std::size_t> order(docs);
  std::iota(order.begin(), order.end(), 0);
  Tensor* params[] = {&weights};
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto k : order) {
      weights.zero_grad();
      step(k);
      adam_step(params, adam);
    }
  }
}

}  // namespace

double LtmModel::probability(const EdgeFeatureVector& f) const {
  if (constant_probability) return *constant_probability;
  return sigmoid(linear.score(f));
}

LtmModel ltm_train(const std::vector<AnnotatedDocument>& corpus, const EdgeTrainConfig& config) {
  if (corpus.empty()) throw Error("ltm_train: empty training set");
  if (config.c <= 0.0) throw Error("ltm_train: C must be positive");
  std::vector<PairTable> tables;
  std::size_t positives = 0, total = 0;
  for (const auto& d : corpus) {
    auto t = pair_table(d);
    if (t.t == 0) continue;
    positives += t.t;
    total += t.t * t.t;
    tables.push_back(std::move(t));
  }
  LtmModel model;
  model.linear = make_edge_weights(tables);
  if (positives == 0 || positives == total) {
    model.constant_probability = total == 0 ? 0.0 : static_cast<double>(positives) / static_cast<double>(total);
    return model;
  }
  const double reg = (1.0 / config.c) / static_cast<double>(tables.size());
  run_epochs(tables.size(), config, model.linear.weights, [&](std::size_t k) {
    const PairTable& t = tables[k];
    const std::size_t n = t.t + 1;
    for (std::size_t m = 1; m < n; ++m) {
      for (std::size_t h = 0; h < n; ++h) {
        if (h == m) continue;
        const auto& f = t.features[h * n + m];
        const double y = t.gold_head[m] == h ? 1.0 : 0.0;
        model.linear.add_gradient(f, sigmoid(model.linear.score(f)) - y);
      }
    }
    add_l2(model.linear.weights, reg);
  });
  return model;
}

namespace {

struct Laplacian {
  Eigen::MatrixXd minor;  // root row and column removed
  double shift = 0.0;
  std::size_t t = 0;
};

Laplacian build_laplacian(const std::vector<double>& theta, std::size_t nodes) {
  if (nodes == 0 || theta.size() != nodes * nodes) throw ShapeError("mtt: θ must be square over root plus entities");
  Laplacian L;
  L.t = nodes - 1;
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 1; m < nodes; ++m) {
    bool any = false;
    for (std::size_t h = 0; h < nodes; ++h) {
      if (h == m) continue;
      const double x = theta[h * nodes + m];
      if (std::isnan(x) || x == std::numeric_limits<double>::infinity()) throw Error("mtt: invalid θ");
      if (std::isfinite(x)) {
        any = true;
        shift = std::max(shift, x);
      }
    }
    if (!any) throw Error("mtt: entity " + std::to_string(m) + " has no candidate head");
  }
  L.shift = L.t == 0 ? 0.0 : shift;
  L.minor = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(L.t), static_cast<Eigen::Index>(L.t));
  for (std::size_t m = 1; m < nodes; ++m) {
    const auto mi = static_cast<Eigen::Index>(m - 1);
    for (std::size_t h = 0; h < nodes; ++h) {
      if (h == m) continue;
      const double x = theta[h * nodes + m];
      if (!std::isfinite(x)) continue;
      const double e = std::exp(x - L.shift);
      L.minor(mi, mi) += e;
      if (h > 0) L.minor(static_cast<Eigen::Index>(h - 1), mi) -= e;
    }
  }
  return L;
}

double log_det_positive(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu, std::size_t t) {
  const auto& u = lu.matrixLU();
  double log_abs = 0.0;
  double sign = lu.permutationP().determinant();
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(t); ++i) {
    const double d = u(i, i);
    if (d == 0.0 || !std::isfinite(d)) throw Error("mtt: singular Laplacian at entity " + std::to_string(i + 1));
    if (d < 0) sign = -sign;
    log_abs += std::log(std::abs(d));
  }
  if (sign <= 0) throw Error("mtt: Laplacian determinant is not positive");
  return log_abs;
}

}  // namespace

double mtt_log_partition(const std::vector<double>& theta, std::size_t nodes) {
  const Laplacian L = build_laplacian(theta, nodes);
  if (L.t == 0) return 0.0;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(L.minor);
  return static_cast<double>(L.t) * L.shift + log_det_positive(lu, L.t);
}

std::vector<double> mtt_marginals(const std::vector<double>& theta, std::size_t nodes) {
  const Laplacian L = build_laplacian(theta, nodes);
  std::vector<double> mu(nodes * nodes, 0.0);
  if (L.t == 0) return mu;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(L.minor);
  log_det_positive(lu, L.t);
  const Eigen::MatrixXd inv = lu.inverse();
  for (std::size_t m = 1; m < nodes; ++m) {
    const auto mi = static_cast<Eigen::Index>(m - 1);
    for (std::size_t h = 0; h < nodes; ++h) {
      if (h == m) continue;
      const double x = theta[h * nodes + m];
      if (!std::isfinite(x)) continue;
      const double e = std::exp(x - L.shift);
      const double d = h == 0 ? inv(mi, mi) : inv(mi, mi) - inv(mi, static_cast<Eigen::Index>(h - 1));
      mu[h * nodes + m] = e * d;
    }
  }
  return mu;
}

double mtt_objective(const std::vector<const AnnotatedDocument*>& docs, MttModel& model, double lambda,
                     double weight_share, bool accumulate) {
  double objective = 0.0;
  for (const auto* d : docs) {
    const PairTable t = pair_table(*d);
    if (t.t == 0) continue;
    const std::size_t n = t.t + 1;
    std::vector<double> theta(n * n, 0.0);
    for (std::size_t m = 1; m < n; ++m) {
      for (std::size_t h = 0; h < n; ++h) {
        if (h != m) theta[h * n + m] = model.linear.score(t.features[h * n + m]);
      }
    }
    double gold = 0.0;
    for (std::size_t m = 1; m < n; ++m) gold += theta[t.gold_head[m] * n + m];
    objective += gold - mtt_log_partition(theta, n);
    if (!accumulate) continue;
    const auto mu = mtt_marginals(theta, n);
    for (std::size_t m = 1; m < n; ++m) {
      for (std::size_t h = 0; h < n; ++h) {
        if (h != m) model.linear.add_gradient(t.features[h * n + m], mu[h * n + m]);
      }
      model.linear.add_gradient(t.features[t.gold_head[m] * n + m], -1.0);
    }
  }
  const double reg = lambda * weight_share;
  double sq = 0.0;
  for (double w : model.linear.weights.values()) sq += w * w;
  objective -= 0.5 * reg * sq;
  if (accumulate) add_l2(model.linear.weights, reg);
  return objective;
}

MttModel mtt_train(const std::vector<AnnotatedDocument>& corpus, const EdgeTrainConfig& config) {
  if (corpus.empty()) throw Error("mtt_train: empty training set");
  if (config.c <= 0.0) throw Error("mtt_train: C must be positive");
  std::vector<PairTable> tables;
  std::vector<const AnnotatedDocument*> docs;
  for (const auto& d : corpus) {
    auto t = pair_table(d);
    if (t.t == 0) continue;
    tables.push_back(std::move(t));
    docs.push_back(&d);
  }
  MttModel model;
  model.linear = make_edge_weights(tables);
  if (docs.empty()) return model;
  const double share = 1.0 / static_cast<double>(docs.size());
  run_epochs(docs.size(), config, model.linear.weights,
             [&](std::size_t k) { mtt_objective({docs[k]}, model, 1.0 / config.c, share, true); });
  return model;
}

EdgeScoreFn ltm_scorer(const LtmModel& model, const AdDocument& doc) {
  return [&model, &doc](const Candidate* parent, const Candidate& child) {
    const double p = model.probability(extract_edge_features(parent, child, doc));
    return std::log(std::max(p, std::numeric_limits<double>::min()));
  };
}

EdgeScoreFn mtt_scorer(const MttModel& model, const AdDocument& doc) {
  return [&model, &doc](const Candidate* parent, const Candidate& child) {
    return model.linear.score(extract_edge_features(parent, child, doc));
  };
}

PipelineOutput pipeline_from_tags(const AdDocument& doc, const BioSequence& tags, const EdgeScoreFn& score) {
  if (tags.size() != doc.length()) throw Error("pipeline: tag sequence length mismatch in " + doc.id);
  PipelineOutput out;
  out.tags = tags;
  const auto cands = candidates_from_tags(tags);
  if (cands.empty()) return out;
  const std::size_t n = cands.size() + 1;
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  WeightedDigraph graph(ids);
  std::vector<std::size_t> greedy(n, 0);
  for (std::size_t m = 1; m < n; ++m) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t h = 0; h < n; ++h) {
      if (h == m) continue;
      const double w = score(h == 0 ? nullptr : &cands[h - 1], cands[m - 1]);
      graph.set_edge(h, m, w);
      if (w > best) {
        best = w;
        greedy[m] = h;
      }
    }
  }
  TokenHeadAssignment entity_heads(n - 1);
  for (std::size_t m = 1; m < n; ++m) entity_heads.set(m, greedy[m], RelationLabel::PartOf);
  out.greedy_tree = is_tree(entity_heads);

  const Arborescence tree = chu_liu_edmonds(graph);
  for (std::size_t m = 1; m < n; ++m) {
    Entity e;
    e.id = "e" + std::to_string(m);
    e.type = cands[m - 1].type;
    e.mentions = {cands[m - 1].span};
    e.parent = tree.parent[m] == 0 ? std::string(kRootId) : "e" + std::to_string(tree.parent[m]);
    out.tree.entities.push_back(std::move(e));
  }
  return out;
}

PipelineOutput pipeline_predict(const AdDocument& doc, const PipelineModel& model) {
  if (doc.length() == 0) return {};
  const BioSequence tags = crf_viterbi(doc, model.crf);
  const EdgeScoreFn scorer = model.kind == EdgeModelKind::Ltm ? ltm_scorer(model.ltm, doc) : mtt_scorer(model.mtt, doc);
  return pipeline_from_tags(doc, tags, scorer);
}

}  // namespace proptree
