#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "proptree/crf.hpp"
#include "proptree/oracles.hpp"

using namespace proptree;

namespace {

CrfLattice random_lattice(std::size_t length, std::size_t tags, Rng& rng) {
  std::uniform_real_distribution<double> u(-2, 2);
  CrfLattice l;
  l.length = length;
  l.tags = tags;
  l.unary.resize(length * tags);
  l.transition.resize(tags * tags);
  l.start.resize(tags);
  for (double& v : l.unary) v = u(rng);
  for (double& v : l.transition) v = u(rng);
  for (double& v : l.start) v = u(rng);
  return l;
}

}  // namespace

TEST_CASE("one token, three tags, no weights") {
  CrfLattice l;
  l.length = 1;
  l.tags = 3;
  l.unary.assign(3, 0.0);
  l.transition.assign(9, 0.0);
  l.start.assign(3, 0.0);
  CHECK(lattice_log_partition(l) == doctest::Approx(std::log(3.0)));
  const auto m = lattice_marginals(l);
  for (double p : m.unary) CHECK(p == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("forward algorithm, Viterbi and marginals against enumeration") {
  Rng rng(11);
  for (int seed = 0; seed < 100; ++seed) {
    const auto l = random_lattice(1 + seed % 6, 1 + seed % 5, rng);
    const double z = lattice_log_partition(l), zo = oracle::crf_log_partition(l);
    CHECK(std::abs(z - zo) <= 1e-8 * std::max(1.0, std::abs(zo)));
    CHECK(lattice_viterbi(l) == oracle::crf_viterbi(l));
    const auto m = lattice_marginals(l);
    const auto mo = oracle::crf_unary_marginals(l);
    for (std::size_t k = 0; k < mo.size(); ++k) CHECK(std::abs(m.unary[k] - mo[k]) < 1e-9);
    CHECK(m.log_partition == doctest::Approx(z));
  }
}

TEST_CASE("empty sequences are rejected") {
  const auto corpus = fixtures::synthetic(2, 1);
  const auto model = make_crf(corpus);
  AdDocument empty;
  CHECK_THROWS_AS(crf_log_partition(empty, model), Error);
  CHECK_THROWS_AS(crf_viterbi(empty, model), Error);
}

TEST_CASE("token feature template") {
  AdDocument doc;
  doc.tokens = {"3", "Bedrooms"};
  const auto f = crf_token_features(doc);
  auto has = [&](std::size_t i, const std::string& name) {
    return std::find(f[i].begin(), f[i].end(), name) != f[i].end();
  };
  CHECK(has(0, "digit=1"));
  CHECK(has(0, "prev=<s>"));
  CHECK(has(0, "next=bedrooms"));
  CHECK(has(1, "w=Bedrooms"));
  CHECK(has(1, "lw=bedrooms"));
  CHECK(has(1, "p3=bed"));
  CHECK(has(1, "s2=ms"));
  CHECK(has(1, "next=</s>"));
  CHECK(crf_token_features(doc) == f);
}

TEST_CASE("objective gradient against finite differences") {
  const auto corpus = fixtures::synthetic(2, 6);
  auto model = make_crf(corpus);
  Rng rng(2);
  for (Tensor* p : model.parameters()) {
    for (double& v : p->values()) v = std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
  }
  std::vector<CrfExample> examples;
  for (const auto& d : corpus) examples.push_back({&d.doc, bio_encode(d.doc, d.tree)});
  for (Tensor* p : model.parameters()) p->zero_grad();
  crf_objective(examples, model, 10.0, 1.0, true);
  for (Tensor* p : model.parameters()) {
    const std::vector<double> analytic(p->grad().begin(), p->grad().end());
    const auto r = oracle::check_gradient(*p, analytic, [&] { return -crf_objective(examples, model, 10.0); });
    CHECK(r.max_relative_error < 1e-4);
  }
}

TEST_CASE("training fits the synthetic tags") {
  const auto corpus = fixtures::synthetic(30, 8);
  CrfTrainConfig cfg;
  cfg.epochs = 10;
  const auto model = crf_train(corpus, cfg);
  std::size_t right = 0, total = 0;
  for (const auto& d : corpus) {
    const auto gold = bio_encode(d.doc, d.tree);
    const auto pred = crf_viterbi(d.doc, model);
    for (std::size_t i = 0; i < gold.size(); ++i) right += gold[i] == pred[i];
    total += gold.size();
  }
  CHECK(static_cast<double>(right) / total > 0.95);
}
