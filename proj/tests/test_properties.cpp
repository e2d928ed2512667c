// Randomized checks over hand-rolled generators of documents and trees.
#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "proptree/evaluation.hpp"
#include "proptree/mst.hpp"
#include "proptree/pipeline.hpp"

using namespace proptree;

namespace {

// Random non-overlapping mentions grouped into entities with random parents.
AnnotatedDocument random_document(Rng& rng) {
  auto below = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  AnnotatedDocument d;
  const std::size_t n = 1 + below(30);
  for (std::size_t i = 0; i < n; ++i) d.doc.tokens.push_back("w" + std::to_string(below(12)));

  std::vector<EntityMention> spans;
  for (std::size_t i = 1; i <= n;) {
    if (below(3) == 0) {
      const std::size_t len = 1 + below(3);
      const std::size_t end = std::min(n + 1, i + len);
      spans.push_back({i, end});
      i = end;
    } else {
      ++i;
    }
  }
  if (spans.empty()) return d;
  const std::size_t entities = 1 + below(spans.size());
  std::vector<std::vector<EntityMention>> groups(entities);
  std::vector<std::size_t> order(spans.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t k = 0; k < spans.size(); ++k) groups[k < entities ? k : below(entities)].push_back(spans[order[k]]);
  for (std::size_t e = 0; e < entities; ++e) {
    auto& m = groups[e];
    std::sort(m.begin(), m.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    const std::string parent = e == 0 || below(4) == 0 ? std::string(kRootId) : "x" + std::to_string(below(e));
    d.tree.entities.push_back({"x" + std::to_string(e), static_cast<EntityType>(below(kNumEntityTypes)), m, parent});
  }
  return d;
}

std::size_t structured_arcs(const TokenHeadAssignment& a) {
  std::size_t k = 0;
  for (std::size_t i = 1; i <= a.length(); ++i) {
    k += a[i].label == RelationLabel::PartOf || a[i].label == RelationLabel::Segment;
  }
  return k;
}

}  // namespace

TEST_CASE("encode then decode preserves the skeleton of random trees") {
  Rng rng(101);
  for (int rep = 0; rep < 500; ++rep) {
    const auto d = random_document(rng);
    CAPTURE(document_to_json_line(d));
    const auto heads = encode_tree_to_heads(d.doc, d.tree);
    CHECK_NOTHROW(heads.validate());
    CHECK(is_tree(heads));
    CHECK(skeleton(decode_heads_to_tree(d.doc, heads)) == skeleton(d.tree));
  }
}

TEST_CASE("encode then decode on generated ads") {
  for (const auto& d : fixtures::synthetic(300, 102, 0.3)) {
    const auto heads = encode_tree_to_heads(d.doc, d.tree);
    CHECK(skeleton(decode_heads_to_tree(d.doc, heads)) == skeleton(d.tree));
    CHECK(bio_valid(bio_encode(d.doc, d.tree)));
  }
}

TEST_CASE("BIO spans round-trip") {
  Rng rng(103);
  for (int rep = 0; rep < 300; ++rep) {
    const auto d = random_document(rng);
    std::vector<std::pair<EntityMention, EntityType>> expect;
    for (const auto& e : d.tree.entities) {
      for (const auto& m : e.mentions) expect.push_back({m, e.type});
    }
    std::sort(expect.begin(), expect.end(), [](const auto& a, const auto& b) { return a.first.start < b.first.start; });
    CHECK(bio_mentions(bio_encode(d.doc, d.tree)) == expect);
  }
}

TEST_CASE("edge counts are consistent and scores stay in range") {
  Rng rng(104);
  for (int rep = 0; rep < 300; ++rep) {
    const auto a = random_document(rng);
    auto b = a;
    b.tree.entities.resize(b.tree.entities.empty() ? 0 : 1 + rng() % b.tree.entities.size());
    for (auto& e : b.tree.entities) {
      if (std::none_of(b.tree.entities.begin(), b.tree.entities.end(), [&](const Entity& x) { return x.id == e.parent; })) {
        e.parent = std::string(kRootId);
      }
    }
    const auto gold = encode_tree_to_heads(a.doc, a.tree), pred = encode_tree_to_heads(b.doc, b.tree);
    const auto c = score_edges(pred, gold);
    CHECK(c.part_of.tp + c.segment.tp + c.part_of.fn + c.segment.fn == structured_arcs(gold));
    CHECK(c.part_of.tp + c.segment.tp + c.part_of.fp + c.segment.fp == structured_arcs(pred));
    const DocumentScore docs[] = {{c, is_tree(pred)}};
    const auto r = aggregate(docs);
    for (double v : {r.overall.precision, r.overall.recall, r.overall.f1, r.part_of.f1, r.segment.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 100.0);
    }
  }
}

TEST_CASE("edge features are deterministic") {
  Rng rng(105);
  for (int rep = 0; rep < 100; ++rep) {
    const auto d = random_document(rng);
    const auto cs = gold_candidates(d);
    for (std::size_t m = 0; m < cs.candidates.size(); ++m) {
      const Candidate* parent = m == 0 ? nullptr : &cs.candidates[m - 1];
      CHECK(extract_edge_features(parent, cs.candidates[m], d.doc) ==
            extract_edge_features(parent, cs.candidates[m], d.doc));
    }
  }
}
