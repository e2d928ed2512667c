#include <random>
#include <vector>

#include "doctest.h"
#include "proptree/kernels.hpp"

using namespace proptree;

namespace {

std::vector<double> noise(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

void close(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
}

}  // namespace

TEST_CASE("gemm: serial against a naive triple loop, parallel against serial") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 24; ++rep) {
    const std::size_t m = 1 + rep % 5 * 13, k = 1 + rep % 3 * 29, n = 1 + rep % 7 * 11;
    const bool ta = rep & 1, tb = rep & 2, acc = rep & 4;
    const auto a = noise(m * k, rng), b = noise(k * n, rng), c0 = noise(m * n, rng);
    std::vector<double> expect(c0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t p = 0; p < k; ++p) s += (ta ? a[p * m + i] : a[i * k + p]) * (tb ? b[j * k + p] : b[p * n + j]);
        expect[i * n + j] = (acc ? c0[i * n + j] : 0.0) + s;
      }
    }
    std::vector<double> cs(c0), cp(c0), cd(c0);
    kernels::GemmArgs args{a, b, cs, m, k, n, ta, tb, acc};
    kernels::serial::gemm(args);
    args.c = cp;
    kernels::parallel::gemm(args);
    args.c = cd;
    kernels::gemm(args);
    close(cs, expect);
    close(cp, cs);
    close(cd, cs);
  }
}

TEST_CASE("pairwise kernels: parallel matches serial") {
  std::mt19937_64 rng(2);
  for (std::size_t n : {1u, 3u, 17u, 40u}) {
    const std::size_t c = 5, d = 4, k = 3;
    const auto a = noise(n * c, rng), b = noise((n + 2) * c, rng);
    std::vector<double> s(n * (n + 2) * c), p(s.size());
    kernels::serial::pair_add(a, b, s, n, n + 2, c);
    kernels::parallel::pair_add(a, b, p, n, n + 2, c);
    close(p, s);
    CHECK(s[((n - 1) * (n + 2) + 1) * c + 2] == doctest::Approx(a[(n - 1) * c + 2] + b[c + 2]));

    const auto proj = noise(n * k * d, rng), h = noise(n * d, rng);
    std::vector<double> cs(n * n * k), cp(cs.size());
    kernels::serial::pair_contract(proj, h, cs, n, d, k);
    kernels::parallel::pair_contract(proj, h, cp, n, d, k);
    close(cp, cs);
  }
}
