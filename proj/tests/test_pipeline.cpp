#include <cmath>
#include <limits>
#include <map>

#include "doctest.h"
#include "fixtures.hpp"
#include "proptree/oracles.hpp"
#include "proptree/pipeline.hpp"

using namespace proptree;

namespace {

bool contains(const EdgeFeatureVector& f, const std::string& name) {
  return std::find(f.begin(), f.end(), name) != f.end();
}

std::vector<double> random_theta(std::size_t nodes, Rng& rng) {
  std::vector<double> theta(nodes * nodes, 0.0);
  for (double& v : theta) v = std::uniform_real_distribution<double>(-3, 3)(rng);
  return theta;
}

// The apartment ad with one mention per entity.
AnnotatedDocument single_mention_ad() {
  auto ad = fixtures::apartment_ad();
  for (auto& e : ad.tree.entities) e.mentions.resize(1);
  return ad;
}

}  // namespace

TEST_CASE("edge features") {
  AdDocument doc;
  doc.tokens = fixtures::split_words("large apartment with two bedrooms");
  const Candidate parent{{1, 3}, EntityType::Property}, child{{5, 6}, EntityType::Space};
  const auto f = extract_edge_features(&parent, child, doc);
  for (const char* name : {"ptype=property", "ctype=space", "pair=property->space", "dist=2", "order=parent-first",
                           "ptok=apartment", "ctok=bedrooms", "btw=with", "btw=two", "nbtw=2"}) {
    CHECK_MESSAGE(contains(f, name), name);
  }
  CHECK(extract_edge_features(&parent, child, doc) == f);

  const Candidate next{{3, 4}, EntityType::Space};
  const auto adj = extract_edge_features(&parent, next, doc);
  CHECK(contains(adj, "dist=0"));
  CHECK(std::none_of(adj.begin(), adj.end(), [](const std::string& s) { return s.rfind("btw=", 0) == 0; }));

  const auto reversed = extract_edge_features(&child, parent, doc);
  CHECK(contains(reversed, "order=child-first"));
  CHECK(contains(extract_edge_features(nullptr, parent, doc), "ptok=<root>"));
}

TEST_CASE("gold candidates") {
  const auto ad = fixtures::apartment_ad();
  const auto cs = gold_candidates(ad);
  REQUIRE(cs.candidates.size() == 10);
  CHECK(cs.gold_parent[0] == CandidateSet::kRootParent);
  // "home" is a second mention of the apartment, whose parent is the property.
  CHECK(cs.candidates[3].span == EntityMention{12, 13});
  CHECK(cs.gold_parent[3] == 0);
  // "living room" hangs off the first apartment mention.
  CHECK(cs.gold_parent[4] == 1);
}

TEST_CASE("matrix-tree partition") {
  SUBCASE("one entity") {
    const std::vector<double> theta = {0.0, 1.7, 0.0, 0.0};
    CHECK(mtt_log_partition(theta, 2) == doctest::Approx(1.7));
  }
  SUBCASE("two entities with zero scores have three trees") {
    CHECK(std::abs(std::exp(mtt_log_partition(std::vector<double>(9, 0.0), 3)) - 3.0) < 1e-12);
  }
  SUBCASE("against enumeration") {
    Rng rng(13);
    for (int seed = 0; seed < 100; ++seed) {
      const std::size_t nodes = 2 + seed % 5;
      const auto theta = random_theta(nodes, rng);
      const double a = mtt_log_partition(theta, nodes), b = oracle::mtt_log_partition(theta, nodes);
      CHECK(std::abs(std::expm1(a - b)) < 1e-8);
      const auto mu = mtt_marginals(theta, nodes);
      for (std::size_t m = 1; m < nodes; ++m) {
        double total = 0.0;
        for (std::size_t h = 0; h < nodes; ++h) total += h == m ? 0.0 : mu[h * nodes + m];
        CHECK(std::abs(total - 1.0) < 1e-8);
      }
    }
  }
  SUBCASE("an entity without candidate heads is rejected") {
    const double ninf = -std::numeric_limits<double>::infinity();
    std::vector<double> theta(9, 0.0);
    theta[0 * 3 + 2] = ninf;
    theta[1 * 3 + 2] = ninf;
    try {
      mtt_log_partition(theta, 3);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
  }
}

TEST_CASE("marginals are the derivative of the log partition") {
  Rng rng(17);
  const std::size_t nodes = 4;
  auto theta = random_theta(nodes, rng);
  const auto mu = mtt_marginals(theta, nodes);
  for (std::size_t h = 0; h < nodes; ++h) {
    for (std::size_t m = 1; m < nodes; ++m) {
      if (h == m) continue;
      auto up = theta, down = theta;
      up[h * nodes + m] += 1e-6;
      down[h * nodes + m] -= 1e-6;
      const double fd = (mtt_log_partition(up, nodes) - mtt_log_partition(down, nodes)) / 2e-6;
      CHECK(mu[h * nodes + m] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("MTT objective gradient") {
  const auto corpus = fixtures::synthetic(2, 3);
  EdgeTrainConfig cfg;
  cfg.epochs = 1;
  auto model = mtt_train(corpus, cfg);
  std::vector<const AnnotatedDocument*> docs = {&corpus[0], &corpus[1]};
  model.linear.weights.zero_grad();
  mtt_objective(docs, model, 1.0, 1.0, true);
  const std::vector<double> analytic(model.linear.weights.grad().begin(), model.linear.weights.grad().end());
  const auto r = oracle::check_gradient(model.linear.weights, analytic,
                                        [&] { return -mtt_objective(docs, model, 1.0); });
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("logistic edge model") {
  LtmModel zero;
  zero.linear.weights = Tensor({1, 1});
  CHECK(zero.probability({"anything"}) == 0.5);

  const auto ad = single_mention_ad();
  EdgeTrainConfig cfg;
  cfg.c = 100.0;
  cfg.epochs = 300;
  const auto model = ltm_train({ad}, cfg);
  const auto cs = gold_candidates(ad);
  std::size_t pairs = 0, right = 0;
  for (std::size_t m = 0; m < cs.candidates.size(); ++m) {
    for (std::size_t h = 0; h <= cs.candidates.size(); ++h) {
      if (h == m + 1) continue;
      const Candidate* parent = h == 0 ? nullptr : &cs.candidates[h - 1];
      const bool gold = h == 0 ? cs.gold_parent[m] == CandidateSet::kRootParent : cs.gold_parent[m] == h - 1;
      const double p = model.probability(extract_edge_features(parent, cs.candidates[m], ad.doc));
      right += (p > 0.5) == gold;
      ++pairs;
    }
  }
  CHECK(pairs >= 10);
  CHECK(right == pairs);
}

TEST_CASE("single-class training falls back to a constant") {
  AnnotatedDocument d;
  d.doc.tokens = {"house"};
  d.tree.entities.push_back({"e1", EntityType::Property, {{1, 2}}, std::string(kRootId)});
  const auto model = ltm_train({d}, {});
  REQUIRE(model.constant_probability.has_value());
  CHECK(*model.constant_probability == 1.0);
}

TEST_CASE("pipeline with oracle tags and oracle edge scores recovers the tree") {
  const auto ad = single_mention_ad();
  const auto cs = gold_candidates(ad);
  std::map<std::size_t, std::size_t> parent_start;  // child start -> parent start (0 for root)
  for (std::size_t k = 0; k < cs.candidates.size(); ++k) {
    const auto g = cs.gold_parent[k];
    parent_start[cs.candidates[k].span.start] = g == CandidateSet::kRootParent ? 0 : cs.candidates[g].span.start;
  }
  const EdgeScoreFn perfect = [&](const Candidate* parent, const Candidate& child) {
    return parent_start.at(child.span.start) == (parent ? parent->span.start : 0) ? 0.0 : -10.0;
  };
  const auto out = pipeline_from_tags(ad.doc, bio_encode(ad.doc, ad.tree), perfect);
  CHECK(out.greedy_tree);
  CHECK(skeleton(out.tree) == skeleton(ad.tree));
  CHECK(encode_tree_to_heads(ad.doc, out.tree) == encode_tree_to_heads(ad.doc, ad.tree));
}

TEST_CASE("a document without entities gives a root-only tree") {
  AdDocument doc;
  doc.tokens = {"Available", "immediately", "."};
  const auto out = pipeline_from_tags(doc, BioSequence(3, 0), [](const Candidate*, const Candidate&) { return 0.0; });
  CHECK(out.tree.entities.empty());
}
