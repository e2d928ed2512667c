#include <cmath>
#include <numeric>

#include "doctest.h"
#include "proptree/attention.hpp"

using namespace proptree;

namespace {

using Vec = std::vector<double>;

Vec row(const Tensor& t, std::size_t r) {
  return Vec(t.values().begin() + r * t.cols(), t.values().begin() + (r + 1) * t.cols());
}

// y = M x (+ bias row), M stored rows × cols.
Vec mat_vec(const Tensor& m, const Vec& x, const Tensor* bias = nullptr) {
  Vec y(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    y[r] = bias ? (*bias)[r] : 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) y[r] += m.at(r, c) * x[c];
  }
  return y;
}

double dot(const Vec& a, const Vec& b) { return std::inner_product(a.begin(), a.end(), b.begin(), 0.0); }

Vec tanh_sum(Vec a, const Vec& b) {
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = std::tanh(a[k] + b[k]);
  return a;
}

Vec flat(const Tensor& t) { return Vec(t.values().begin(), t.values().end()); }

void randomize(AttentionParams& p, Rng& rng) {
  NamedParameters named;
  p.collect(named, "");
  for (auto& [n, t] : named) {
    for (double& v : t->values()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  }
}

Tensor scores_of(const Tensor& h, AttentionParams& p) {
  Tape t;
  return attention_scores(t.constant(h), p).value();
}

Tensor augmented(const Tensor& h, AttentionParams& p) {
  Tape t;
  return augment(t.constant(h), p).value();
}

}  // namespace

TEST_CASE("variant names") {
  for (auto k : {AttentionKind::None, AttentionKind::Additive, AttentionKind::Bilinear, AttentionKind::Multiplicative,
                 AttentionKind::Biaffine, AttentionKind::TensorNet, AttentionKind::Edge}) {
    CHECK(parse_attention(attention_name(k)) == k);
  }
  CHECK_THROWS_AS(parse_attention("cosine"), Error);
}

TEST_CASE("multiplicative and bilinear") {
  Rng rng(1);
  Tensor same({4, 3});
  for (std::size_t r = 0; r < 4; ++r) {
    same.at(r, 0) = 0.3;
    same.at(r, 1) = -1.2;
    same.at(r, 2) = 0.7;
  }
  auto mult = make_attention({AttentionKind::Multiplicative}, 3, 5, 2, rng);
  const Tensor s = scores_of(same, mult);
  for (double v : s.values()) CHECK(v == doctest::Approx(s[0]));

  auto bil = make_attention({AttentionKind::Bilinear}, 3, 5, 2, rng);
  std::fill(bil.bilinear.values().begin(), bil.bilinear.values().end(), 0.0);
  for (std::size_t k = 0; k < 3; ++k) bil.bilinear.at(k, k) = 1.0;
  const Tensor h = Tensor::uniform({5, 3}, 1.0, rng, false);
  const Tensor a = scores_of(h, bil), b = scores_of(h, mult);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == doctest::Approx(b[k]));
}

TEST_CASE("score variants against explicit loops") {
  Rng rng(2);
  const std::size_t n = 4, m = 3, l = 5, p = 2;
  const Tensor h = Tensor::uniform({n, m}, 1.0, rng, false);

  SUBCASE("additive") {
    auto a = make_attention({AttentionKind::Additive}, m, l, p, rng);
    randomize(a, rng);
    const Tensor s = scores_of(h, a);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        const Vec pre = tanh_sum(mat_vec(a.add_head, row(h, j), &a.add_bias), mat_vec(a.add_dep, row(h, i)));
        CHECK(s.at(j, i) == doctest::Approx(dot(flat(a.add_out), pre)));
      }
    }
  }
  SUBCASE("biaffine") {
    auto a = make_attention({AttentionKind::Biaffine}, m, l, p, rng);
    randomize(a, rng);
    const Tensor s = scores_of(h, a);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        const Vec head = mat_vec(a.head_reduce, tanh_sum(mat_vec(a.head_proj, row(h, j)), flat(a.head_bias)));
        const Vec dep = mat_vec(a.dep_reduce, tanh_sum(mat_vec(a.dep_proj, row(h, i)), flat(a.dep_bias)));
        const double expect = dot(head, mat_vec(a.biaffine_weights, dep)) + dot(flat(a.head_prior), head);
        CHECK(s.at(j, i) == doctest::Approx(expect));
      }
    }
  }
  SUBCASE("tensor network") {
    auto a = make_attention({AttentionKind::TensorNet}, m, l, p, rng);
    randomize(a, rng);
    const Tensor s = scores_of(h, a);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        const Vec lin = mat_vec(a.tensor_linear, row(h, j)), lin2 = mat_vec(a.tensor_linear, row(h, i));
        double total = 0.0;
        for (std::size_t r = 0; r < l; ++r) {
          double bil = 0.0;
          for (std::size_t x = 0; x < m; ++x) {
            for (std::size_t y = 0; y < m; ++y) bil += h.at(j, x) * a.tensor_weights[(x * l + r) * m + y] * h.at(i, y);
          }
          total += a.tensor_out[r] * std::tanh(bil + lin[r] + lin2[r] + a.tensor_bias[r]);
        }
        CHECK(s.at(j, i) == doctest::Approx(total));
      }
    }
  }
}

TEST_CASE("context vectors") {
  Rng rng(3);
  const Tensor h = Tensor::uniform({4, 3}, 1.0, rng, false);
  Tape t;
  const Tensor& uniform = context_vectors(t.constant(Tensor({4, 4})), t.constant(h)).value();
  for (std::size_t j = 0; j < 4; ++j) {
    for (std::size_t c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (std::size_t i = 0; i < 4; ++i) mean += h.at(i, c) / 4.0;
      CHECK(uniform.at(j, c) == doctest::Approx(mean));
    }
  }
  Tensor peaked({4, 4});
  for (std::size_t j = 0; j < 4; ++j) peaked.at(j, 2) = 1e3;
  const Tensor& picked = context_vectors(t.constant(peaked), t.constant(h)).value();
  for (std::size_t j = 0; j < 4; ++j) {
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(picked.at(j, c) - h.at(2, c)) < 1e-6);
  }
  CHECK_THROWS_AS(context_vectors(t.constant(Tensor({3, 4})), t.constant(h)), ShapeError);
}

TEST_CASE("edge message passing") {
  Rng rng(4);
  const std::size_t n = 4, m = 3, l = 5;
  const Tensor h = Tensor::uniform({n, m}, 1.0, rng, false);

  SUBCASE("zero parameters give zero vectors") {
    auto e = make_attention({AttentionKind::Edge, 2}, m, l, 2, rng);
    NamedParameters named;
    e.collect(named, "");
    for (auto& [name, t] : named) std::fill(t->values().begin(), t->values().end(), 0.0);
    const Tensor out = augmented(h, e);
    for (double v : out.values()) CHECK(v == 0.0);
  }
  SUBCASE("one step by hand") {
    auto e = make_attention({AttentionKind::Edge, 1}, m, l, 2, rng);
    randomize(e, rng);
    const Tensor got = augmented(h, e);
    for (std::size_t j = 0; j < n; ++j) {
      Vec out(l, 0.0), in(l, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const Vec a = tanh_sum(mat_vec(e.edge_head, row(h, j), &e.edge_bias), mat_vec(e.edge_dep, row(h, i)));
        const Vec b = tanh_sum(mat_vec(e.edge_head, row(h, i), &e.edge_bias), mat_vec(e.edge_dep, row(h, j)));
        for (std::size_t r = 0; r < l; ++r) {
          out[r] += a[r];
          in[r] += b[r];
        }
      }
      const Vec src = mat_vec(e.edge_src, out), dst = mat_vec(e.edge_dst, in);
      for (std::size_t c = 0; c < m; ++c) CHECK(got.at(j, c) == doctest::Approx((src[c] + dst[c]) / (n - 1)));
    }
  }
  SUBCASE("two steps are one step applied twice") {
    auto e = make_attention({AttentionKind::Edge, 2}, m, l, 2, rng);
    randomize(e, rng);
    const Tensor twice = augmented(h, e);
    Tape t;
    const Tensor& once_once = edge_message_pass(edge_message_pass(t.constant(h), e, 1), e, 1).value();
    for (std::size_t k = 0; k < twice.size(); ++k) CHECK(twice[k] == doctest::Approx(once_once[k]));
  }
  CHECK_THROWS_AS(make_attention({AttentionKind::Edge, 0}, m, l, 2, rng), Error);
}

TEST_CASE("augmentation widths") {
  Rng rng(5);
  const Tensor h = Tensor::uniform({4, 6}, 1.0, rng, false);
  auto none = make_attention({AttentionKind::None}, 6, 4, 2, rng);
  const Tensor pass = augmented(h, none);
  for (std::size_t k = 0; k < h.size(); ++k) CHECK(pass[k] == h[k]);
  auto add = make_attention({AttentionKind::Additive}, 6, 4, 2, rng);
  CHECK(augmented(h, add).cols() == 12);
  CHECK(add.output_width() == 12);
  auto edge = make_attention({AttentionKind::Edge, 3}, 6, 4, 2, rng);
  CHECK(augmented(h, edge).cols() == 6);
  Tape t;
  CHECK_THROWS_AS(augment(t.constant(Tensor({4, 5})), add), ShapeError);
}

TEST_CASE("every variant is equivariant under token permutation") {
  Rng rng(6);
  const std::size_t n = 5, m = 4;
  const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
  const Tensor h = Tensor::uniform({n, m}, 1.0, rng, false);
  Tensor hp({n, m});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) hp.at(r, c) = h.at(perm[r], c);
  }
  for (auto k : {AttentionKind::Additive, AttentionKind::Bilinear, AttentionKind::Multiplicative,
                 AttentionKind::Biaffine, AttentionKind::TensorNet, AttentionKind::Edge}) {
    auto a = make_attention({k, 2}, m, 3, 2, rng);
    randomize(a, rng);
    const Tensor out = augmented(h, a), outp = augmented(hp, a);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < out.cols(); ++c) CHECK(outp.at(r, c) == doctest::Approx(out.at(perm[r], c)));
    }
  }
}
