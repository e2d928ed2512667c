#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "proptree/encoder.hpp"
#include "proptree/oracles.hpp"

using namespace proptree;

TEST_CASE("embedding lookup") {
  const auto corpus = fixtures::synthetic(3, 1);
  Rng rng(1);
  const auto table = random_embeddings(corpus, 6, rng);
  CHECK(table.dim() == 6);
  CHECK(table.vocab.index("zzz-unseen") == Vocabulary::kUnk);

  AdDocument doc;
  doc.tokens = {corpus[0].doc.tokens[0], "zzz-unseen"};
  Tape t;
  const Tensor& rows = embed(t, doc, table, 0.0, nullptr).value();
  REQUIRE(rows.rows() == 3);
  const std::size_t first = table.vocab.index(doc.tokens[0]);
  for (std::size_t c = 0; c < 6; ++c) {
    CHECK(rows.at(0, c) == 0.0);
    CHECK(rows.at(1, c) == table.matrix.at(first, c));
    CHECK(rows.at(2, c) == table.matrix.at(Vocabulary::kUnk, c));
  }
}

TEST_CASE("embedding dropout leaves the root row alone") {
  const auto corpus = fixtures::synthetic(2, 1);
  Rng rng(1);
  const auto table = random_embeddings(corpus, 8, rng);
  Rng drop(3);
  Tape t;
  const Tensor& rows = embed(t, corpus[0].doc, table, 0.5, &drop).value();
  for (std::size_t c = 0; c < 8; ++c) CHECK(rows.at(0, c) == 0.0);
  std::size_t zeros = 0;
  for (std::size_t k = 8; k < rows.size(); ++k) zeros += rows[k] == 0.0;
  CHECK(zeros > 0);
}

TEST_CASE("word vector files") {
  const auto corpus = fixtures::synthetic(2, 1);
  const std::string word = corpus[0].doc.tokens[1];
  Rng rng(1);
  std::istringstream ok("2 3\n" + word + " 0.5 -1 2\nunused 1 1 1\n");
  const auto table = load_embeddings(ok, corpus, 3, rng);
  const std::size_t row = table.vocab.index(word);
  CHECK(table.matrix.at(row, 0) == 0.5);
  CHECK(table.matrix.at(row, 2) == 2.0);

  std::istringstream bad(word + " 1 2\n");
  try {
    load_embeddings(bad, corpus, 3, rng);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("BiLSTM shapes and the all-zero network") {
  Rng rng(2);
  auto p = make_bilstm(4, 3, 2, rng);
  CHECK(p.layers() == 2);
  CHECK(p.output_width() == 6);
  NamedParameters named;
  p.collect(named, "enc.");
  CHECK(named.size() == 12);
  for (auto& [name, t] : named) std::fill(t->values().begin(), t->values().end(), 0.0);
  Tape tape;
  Tensor x = Tensor::uniform({5, 4}, 1.0, rng, false);
  const Tensor& out = bilstm_forward(tape.constant(x), p).value();
  CHECK(out.rows() == 5);
  CHECK(out.cols() == 6);
  for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("forget gate bias starts at one") {
  Rng rng(2);
  auto p = make_bilstm(4, 3, 1, rng);
  const auto& bias = p.forward[0].bias;
  for (std::size_t k = 0; k < 12; ++k) CHECK(bias[k] == (k >= 3 && k < 6 ? 1.0 : 0.0));
}

TEST_CASE("LSTM recurrence against a hand-rolled loop") {
  Rng rng(5);
  const std::size_t in = 3, d = 2, n = 4;
  auto p = make_bilstm(in, d, 1, rng);
  for (auto* t : {&p.forward[0].input_weights, &p.forward[0].hidden_weights, &p.forward[0].bias}) {
    for (double& v : t->values()) v = std::uniform_real_distribution<double>(-0.8, 0.8)(rng);
  }
  const Tensor x = Tensor::uniform({n, in}, 1.0, rng, false);
  Tape tape;
  const Tensor& got = lstm_direction(tape.constant(x), p.forward[0], d, false).value();

  const auto& W = p.forward[0].input_weights;
  const auto& U = p.forward[0].hidden_weights;
  const auto& b = p.forward[0].bias;
  std::vector<double> h(d, 0.0), c(d, 0.0);
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<double> z(4 * d);
    for (std::size_t g = 0; g < 4 * d; ++g) {
      z[g] = b[g];
      for (std::size_t k = 0; k < in; ++k) z[g] += W.at(g, k) * x.at(t, k);
      for (std::size_t k = 0; k < d; ++k) z[g] += U.at(g, k) * h[k];
    }
    for (std::size_t k = 0; k < d; ++k) {
      c[k] = sig(z[d + k]) * c[k] + sig(z[k]) * std::tanh(z[3 * d + k]);
      h[k] = sig(z[2 * d + k]) * std::tanh(c[k]);
      CHECK(got.at(t, k) == doctest::Approx(h[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("BiLSTM gradients") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    Rng rng(seed);
    auto p = make_bilstm(3, 2, 1 + seed % 2, rng);
    const Tensor x = Tensor::uniform({1 + seed, 3}, 1.0, rng, false);
    const Tensor readout = Tensor::uniform({1 + seed, 4}, 1.0, rng, false);
    auto loss = [&](Tape& t) { return sum(mul(bilstm_forward(t.constant(x), p), t.constant(readout))); };
    NamedParameters named;
    p.collect(named, "");
    for (auto& [n, t] : named) t->zero_grad();
    {
      Tape t;
      t.backward(loss(t));
    }
    for (auto& [name, t] : named) {
      const std::vector<double> analytic(t->grad().begin(), t->grad().end());
      const auto r = oracle::check_gradient(*t, analytic, [&] {
        Tape tape;
        return loss(tape).scalar();
      });
      CHECK_MESSAGE(r.max_relative_error < 1e-4, name);
    }
  }
}

TEST_CASE("width mismatch is rejected") {
  Rng rng(1);
  auto p = make_bilstm(4, 3, 1, rng);
  Tape t;
  CHECK_THROWS_AS(bilstm_forward(t.constant(Tensor({2, 5})), p), ShapeError);
}
