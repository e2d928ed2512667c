#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "proptree/head_selector.hpp"

using namespace proptree;

namespace {

void zero(ScorerParams& p) {
  NamedParameters named;
  p.collect(named, "");
  for (auto& [n, t] : named) std::fill(t->values().begin(), t->values().end(), 0.0);
}

JointDistribution random_distribution(std::size_t tokens, Rng& rng, double spread = 3.0) {
  const std::size_t n = tokens + 1;
  Tensor logits = Tensor::uniform({n, 4 * n}, spread, rng, false);
  Tape t;
  return JointDistribution::from_log_probs(log_softmax_rows(t.constant(logits)).value());
}

}  // namespace

TEST_CASE("single triple scores") {
  Rng rng(1);
  auto p = make_scorer(4, 3, rng);
  const std::vector<double> a = {0.1, -0.2, 0.3, 0.4}, b = {0.5, 0.1, -0.7, 0.2}, z(4, 0.0);
  std::fill(p.output.values().begin(), p.output.values().end(), 0.0);
  CHECK(score_triple(a, b, RelationLabel::Segment, p) == 0.0);

  auto q = make_scorer(4, 3, rng);
  std::fill(q.bias.values().begin(), q.bias.values().end(), 0.0);
  CHECK(score_triple(z, z, RelationLabel::PartOf, q) == 0.0);
  CHECK_THROWS_AS(score_triple(std::vector<double>(3), z, RelationLabel::PartOf, q), ShapeError);
}

TEST_CASE("tape scores agree with the scalar formula") {
  Rng rng(2);
  auto p = make_scorer(4, 3, rng);
  const Tensor h = Tensor::uniform({5, 4}, 1.0, rng, false);
  Tape t;
  const Tensor& logits = joint_scores(t.constant(h), p).value();
  REQUIRE(logits.rows() == 5);
  REQUIRE(logits.cols() == 20);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      for (std::size_t k = 0; k < 4; ++k) {
        const double expect = score_triple(std::span(h.values().subspan(j * 4, 4)),
                                           std::span(h.values().subspan(i * 4, 4)), kAllLabels[k], p);
        CHECK(logits.at(i, j * 4 + k) == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("all-zero scorer is uniform and the loss is N log 4(N+1)") {
  Rng rng(3);
  auto p = make_scorer(4, 3, rng);
  zero(p);
  const std::size_t n = 6;
  const Tensor h = Tensor::uniform({n + 1, 4}, 1.0, rng, false);
  const auto dist = joint_distribution(h, p);
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = 0; j <= n; ++j) {
      for (std::size_t k = 0; k < 4; ++k) CHECK(dist.at(i, j, k) == doctest::Approx(1.0 / (4.0 * (n + 1))));
    }
  }
  TokenHeadAssignment gold(n);
  gold.set(2, 0, RelationLabel::PartOf);
  CHECK(head_selection_loss(dist, gold) == doctest::Approx(n * std::log(4.0 * (n + 1))));
}

TEST_CASE("loss of a certain model is zero and bad heads are rejected") {
  const std::size_t n = 2;
  std::vector<double> probs((n + 1) * (n + 1) * 4, 0.0);
  TokenHeadAssignment gold(n);
  gold.set(1, 0, RelationLabel::PartOf);
  for (std::size_t i = 0; i <= n; ++i) {
    const Arc a = gold[i];
    probs[(i * (n + 1) + a.head) * 4 + label_index(a.label)] = 1.0;
  }
  const JointDistribution dist(n + 1, probs);
  CHECK(head_selection_loss(dist, gold) == 0.0);
  CHECK(greedy_decode(dist) == gold);

  TokenHeadAssignment wrong(3);
  CHECK_THROWS_AS(head_selection_loss(dist, wrong), Error);
}

TEST_CASE("greedy decoding") {
  SUBCASE("ties go to the smaller head") {
    std::vector<double> probs(3 * 3 * 4, 0.0);
    probs[(1 * 3 + 2) * 4 + 0] = 0.5;
    probs[(1 * 3 + 1) * 4 + 0] = 0.5;
    probs[(2 * 3 + 2) * 4 + 3] = 1.0;
    const auto g = greedy_decode(JointDistribution(3, probs));
    CHECK(g[1] == Arc{1, RelationLabel::PartOf});
  }
  SUBCASE("matches an exhaustive scan") {
    Rng rng(4);
    for (int rep = 0; rep < 50; ++rep) {
      const auto dist = random_distribution(1 + rep % 7, rng);
      const auto g = greedy_decode(dist);
      for (std::size_t i = 1; i < dist.positions(); ++i) {
        double best = -1.0;
        Arc arc;
        for (std::size_t j = 0; j < dist.positions(); ++j) {
          for (std::size_t k = 0; k < 4; ++k) {
            if (dist.at(i, j, k) > best) {
              best = dist.at(i, j, k);
              arc = {j, kAllLabels[k]};
            }
          }
        }
        CHECK(g[i] == arc);
      }
    }
  }
}

TEST_CASE("properties of the distribution") {
  Rng rng(6);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = 1 + rep % 6, m = 2 + rep % 3;
    auto p = make_scorer(m, 3, rng);
    NamedParameters named;
    p.collect(named, "");
    for (auto& [name, t] : named) {
      for (double& v : t->values()) v = std::uniform_real_distribution<double>(-4, 4)(rng);
    }
    const Tensor h = Tensor::uniform({n + 1, m}, 2.0, rng, false);
    const auto dist = joint_distribution(h, p);
    for (std::size_t i = 0; i <= n; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j <= n; ++j) {
        for (std::size_t k = 0; k < 4; ++k) total += dist.at(i, j, k);
      }
      CHECK(std::abs(total - 1.0) < 1e-6);
    }

    // Shifting one dependent's logits does not change its argmax.
    Tape t;
    Tensor logits = joint_scores(t.constant(h), p).value();
    const auto base = greedy_decode(JointDistribution::from_log_probs(log_softmax_rows(t.constant(logits)).value()));
    const std::size_t row = 1 + rep % n;
    for (std::size_t c = 0; c < logits.cols(); ++c) logits.at(row, c) += 17.5;
    const auto shifted =
        greedy_decode(JointDistribution::from_log_probs(log_softmax_rows(t.constant(logits)).value()));
    CHECK(shifted == base);

    TokenHeadAssignment gold(n);
    CHECK(head_selection_loss(dist, gold) >= 0.0);
  }
}

TEST_CASE("repeated Adam steps fit one example") {
  Rng rng(8);
  const std::size_t n = 5, m = 6;
  auto p = make_scorer(m, 6, rng);
  const Tensor h = Tensor::uniform({n + 1, m}, 1.0, rng, false);
  TokenHeadAssignment gold(n);
  gold.set(1, 2, RelationLabel::Segment);
  gold.set(2, 0, RelationLabel::PartOf);
  gold.set(4, 2, RelationLabel::PartOf);
  gold.set(5, 2, RelationLabel::Equivalent);
  NamedParameters named;
  p.collect(named, "");
  std::vector<Tensor*> params;
  for (auto& [name, t] : named) params.push_back(t);
  AdamState adam(AdamConfig{0.05});
  double last = 1e300;
  bool monotone = true;
  std::size_t steps = 0;
  while (steps < 500) {
    for (auto* t : params) t->zero_grad();
    Tape tape;
    Var loss = head_selection_loss(joint_log_probs(tape.constant(h), p), gold);
    const double value = loss.scalar();
    monotone = monotone && value <= last + 1e-12;
    last = value;
    if (value < 1e-2) break;
    tape.backward(loss);
    adam_step(params, adam);
    ++steps;
  }
  CHECK(last < 1e-2);
  CHECK(monotone);
}
