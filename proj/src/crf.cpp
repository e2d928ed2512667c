#include "proptree/crf.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

namespace proptree {

std::size_t FeatureIndex::add(const std::string& name) {
  auto [it, inserted] = ids_.emplace(name, names_.size());
  if (inserted) names_.push_back(name);
  return it->second;
}

std::size_t FeatureIndex::find(const std::string& name) const {
  auto it = ids_.find(name);
  return it == ids_.end() ? kMissing : it->second;
}

namespace {

double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

void check_lattice(const CrfLattice& l) {
  if (l.length == 0) throw Error("crf: empty sequence");
  if (l.tags == 0 || l.unary.size() != l.length * l.tags || l.transition.size() != l.tags * l.tags ||
      l.start.size() != l.tags) {
    throw ShapeError("crf: inconsistent lattice dimensions");
  }
}

std::vector<double> forward_scores(const CrfLattice& l) {
  const std::size_t n = l.length, t = l.tags;
  std::vector<double> alpha(n * t);
  for (std::size_t b = 0; b < t; ++b) alpha[b] = l.start[b] + l.unary[b];
  std::vector<double> terms(t);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t b = 0; b < t; ++b) {
      for (std::size_t a = 0; a < t; ++a) terms[a] = alpha[(i - 1) * t + a] + l.transition[a * t + b];
      alpha[i * t + b] = log_sum_exp(terms) + l.unary[i * t + b];
    }
  }
  return alpha;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

double CrfLattice::path_score(const std::vector<std::size_t>& path) const {
  if (path.size() != length) throw Error("crf: path length mismatch");
  double s = start[path[0]];
  for (std::size_t i = 0; i < length; ++i) {
    s += unary[i * tags + path[i]];
    if (i > 0) s += transition[path[i - 1] * tags + path[i]];
  }
  return s;
}

double lattice_log_partition(const CrfLattice& l) {
  check_lattice(l);
  const auto alpha = forward_scores(l);
  return log_sum_exp(std::span<const double>(alpha).subspan((l.length - 1) * l.tags, l.tags));
}

std::vector<std::size_t> lattice_viterbi(const CrfLattice& l) {
  check_lattice(l);
  const std::size_t n = l.length, t = l.tags;
  std::vector<double> best(n * t);
  std::vector<std::size_t> back(n * t, 0);
  for (std::size_t b = 0; b < t; ++b) best[b] = l.start[b] + l.unary[b];
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t b = 0; b < t; ++b) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < t; ++a) {
        const double s = best[(i - 1) * t + a] + l.transition[a * t + b];
        if (s > m) {
          m = s;
          back[i * t + b] = a;
        }
      }
      best[i * t + b] = m + l.unary[i * t + b];
    }
  }
  std::vector<std::size_t> path(n);
  const auto last = best.begin() + static_cast<std::ptrdiff_t>((n - 1) * t);
  path[n - 1] = static_cast<std::size_t>(std::max_element(last, best.end()) - last);
  for (std::size_t i = n - 1; i > 0; --i) path[i - 1] = back[i * t + path[i]];
  return path;
}

CrfMarginals lattice_marginals(const CrfLattice& l) {
  check_lattice(l);
  const std::size_t n = l.length, t = l.tags;
  const auto alpha = forward_scores(l);
  std::vector<double> beta(n * t, 0.0);
  std::vector<double> terms(t);
  for (std::size_t i = n - 1; i > 0; --i) {
    for (std::size_t a = 0; a < t; ++a) {
      for (std::size_t b = 0; b < t; ++b) {
        terms[b] = l.transition[a * t + b] + l.unary[i * t + b] + beta[i * t + b];
      }
      beta[(i - 1) * t + a] = log_sum_exp(terms);
    }
  }
  CrfMarginals m;
  m.log_partition = log_sum_exp(std::span<const double>(alpha).subspan((n - 1) * t, t));
  m.unary.resize(n * t);
  for (std::size_t k = 0; k < n * t; ++k) m.unary[k] = std::exp(alpha[k] + beta[k] - m.log_partition);
  m.transition.assign(t * t, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t a = 0; a < t; ++a) {
      for (std::size_t b = 0; b < t; ++b) {
        m.transition[a * t + b] += std::exp(alpha[(i - 1) * t + a] + l.transition[a * t + b] +
                                            l.unary[i * t + b] + beta[i * t + b] - m.log_partition);
      }
    }
  }
  return m;
}

std::vector<std::vector<std::string>> crf_token_features(const AdDocument& doc) {
  const std::size_t n = doc.length();
  std::vector<std::vector<std::string>> out(n);
  for (std::size_t i = 1; i <= n; ++i) {
    const std::string& w = doc.token(i);
    const std::string lw = lower(w);
    auto& f = out[i - 1];
    f.push_back("bias");
    f.push_back("w=" + w);
    f.push_back("lw=" + lw);
    for (std::size_t k : {2u, 3u}) {
      if (lw.size() >= k) {
        f.push_back("p" + std::to_string(k) + "=" + lw.substr(0, k));
        f.push_back("s" + std::to_string(k) + "=" + lw.substr(lw.size() - k));
      }
    }
    const bool digit = std::any_of(w.begin(), w.end(), [](unsigned char c) { return std::isdigit(c); });
    f.push_back(digit ? "digit=1" : "digit=0");
    f.push_back("prev=" + (i > 1 ? lower(doc.token(i - 1)) : std::string("<s>")));
    f.push_back("next=" + (i < n ? lower(doc.token(i + 1)) : std::string("</s>")));
  }
  return out;
}

CrfModel make_crf(const std::vector<AnnotatedDocument>& corpus, std::size_t tags) {
  CrfModel m;
  for (const auto& d : corpus) {
    for (const auto& fs : crf_token_features(d.doc)) {
      for (const auto& f : fs) m.features.add(f);
    }
  }
  m.emission = Tensor({std::max<std::size_t>(m.features.size(), 1), tags}, true);
  m.transition = Tensor({tags, tags}, true);
  m.start = Tensor({1, tags}, true);
  return m;
}

namespace {

std::vector<std::vector<std::size_t>> feature_ids(const AdDocument& doc, const CrfModel& model) {
  std::vector<std::vector<std::size_t>> ids;
  for (const auto& fs : crf_token_features(doc)) {
    auto& row = ids.emplace_back();
    for (const auto& f : fs) {
      const auto id = model.features.find(f);
      if (id != FeatureIndex::kMissing) row.push_back(id);
    }
  }
  return ids;
}

CrfLattice lattice_from_ids(const std::vector<std::vector<std::size_t>>& ids, const CrfModel& model) {
  CrfLattice l;
  l.length = ids.size();
  l.tags = model.tags();
  l.unary.assign(l.length * l.tags, 0.0);
  for (std::size_t i = 0; i < l.length; ++i) {
    for (auto f : ids[i]) {
      for (std::size_t t = 0; t < l.tags; ++t) l.unary[i * l.tags + t] += model.emission.at(f, t);
    }
  }
  auto tv = model.transition.values();
  l.transition.assign(tv.begin(), tv.end());
  auto sv = model.start.values();
  l.start.assign(sv.begin(), sv.end());
  return l;
}

}  // namespace

CrfLattice crf_lattice(const AdDocument& doc, const CrfModel& model) {
  return lattice_from_ids(feature_ids(doc, model), model);
}

double crf_log_partition(const AdDocument& doc, const CrfModel& model) {
  return lattice_log_partition(crf_lattice(doc, model));
}

BioSequence crf_viterbi(const AdDocument& doc, const CrfModel& model) {
  if (doc.length() == 0) throw Error("crf: empty sequence in document " + doc.id);
  const auto path = lattice_viterbi(crf_lattice(doc, model));
  return BioSequence(path.begin(), path.end());
}

double crf_objective(const std::vector<CrfExample>& examples, CrfModel& model, double lambda,
                     double weight_share, bool accumulate) {
  const std::size_t t = model.tags();
  double objective = 0.0;
  for (const auto& ex : examples) {
    if (ex.tags.size() != ex.doc->length()) throw Error("crf: tag sequence length mismatch in " + ex.doc->id);
    const auto ids = feature_ids(*ex.doc, model);
    const CrfLattice l = lattice_from_ids(ids, model);
    std::vector<std::size_t> gold(ex.tags.begin(), ex.tags.end());
    for (auto g : gold) {
      if (g >= t) throw Error("crf: tag out of range in " + ex.doc->id);
    }
    if (!accumulate) {
      objective += l.path_score(gold) - lattice_log_partition(l);
      continue;
    }
    const CrfMarginals m = lattice_marginals(l);
    objective += l.path_score(gold) - m.log_partition;
    auto ge = model.emission.grad();
    for (std::size_t i = 0; i < l.length; ++i) {
      for (auto f : ids[i]) {
        for (std::size_t y = 0; y < t; ++y) ge[f * t + y] += m.unary[i * t + y];
        ge[f * t + gold[i]] -= 1.0;
      }
    }
    auto gt = model.transition.grad();
    for (std::size_t k = 0; k < t * t; ++k) gt[k] += m.transition[k];
    for (std::size_t i = 1; i < l.length; ++i) gt[gold[i - 1] * t + gold[i]] -= 1.0;
    auto gs = model.start.grad();
    for (std::size_t y = 0; y < t; ++y) gs[y] += m.unary[y];
    gs[gold[0]] -= 1.0;
  }
  const double reg = lambda * weight_share;
  for (Tensor* p : model.parameters()) {
    double sq = 0.0;
    for (double w : p->values()) sq += w * w;
    objective -= 0.5 * reg * sq;
    if (accumulate) {
      auto g = p->grad();
      for (std::size_t k = 0; k < p->size(); ++k) g[k] += reg * (*p)[k];
    }
  }
  return objective;
}

CrfModel crf_train(const std::vector<AnnotatedDocument>& corpus, const CrfTrainConfig& config) {
  if (corpus.empty()) throw Error("crf_train: empty training set");
  CrfModel model = make_crf(corpus);
  std::vector<CrfExample> examples;
  for (const auto& d : corpus) {
    if (d.doc.length() > 0) examples.push_back({&d.doc, bio_encode(d.doc, d.tree)});
  }
  if (examples.empty()) throw Error("crf_train: no non-empty documents");
  AdamState adam(AdamConfig{config.learning_rate});
  Rng rng(config.seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  const double share = 1.0 / static_cast<double>(examples.size());
  auto params = model.parameters();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto k : order) {
      for (Tensor* p : params) p->zero_grad();
      crf_objective({examples[k]}, model, config.lambda, share, true);
      adam_step(params, adam);
    }
  }
  return model;
}

}  // namespace proptree
