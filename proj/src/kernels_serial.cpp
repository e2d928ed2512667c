#include "proptree/kernels.hpp"

namespace proptree::kernels::serial {

void gemm(const GemmArgs& g) {
  const std::size_t lda = g.trans_a ? g.m : g.k;
  const std::size_t ldb = g.trans_b ? g.k : g.n;
  for (std::size_t i = 0; i < g.m; ++i) {
    double* crow = g.c.data() + i * g.n;
    if (!g.accumulate) {
      for (std::size_t j = 0; j < g.n; ++j) crow[j] = 0.0;
    }
    for (std::size_t p = 0; p < g.k; ++p) {
      const double av = g.trans_a ? g.a[p * lda + i] : g.a[i * lda + p];
      if (av == 0.0) continue;
      if (g.trans_b) {
        for (std::size_t j = 0; j < g.n; ++j) crow[j] += av * g.b[j * ldb + p];
      } else {
        const double* brow = g.b.data() + p * ldb;
        for (std::size_t j = 0; j < g.n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

void pair_add(std::span<const double> a, std::span<const double> b, std::span<double> out,
              std::size_t n, std::size_t m, std::size_t c) {
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < m; ++q) {
      double* o = out.data() + (p * m + q) * c;
      const double* ap = a.data() + p * c;
      const double* bq = b.data() + q * c;
      for (std::size_t r = 0; r < c; ++r) o[r] = ap[r] + bq[r];
    }
  }
}

void pair_contract(std::span<const double> proj, std::span<const double> h, std::span<double> out,
                   std::size_t n, std::size_t d, std::size_t k) {
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      const double* hq = h.data() + q * d;
      for (std::size_t r = 0; r < k; ++r) {
        const double* pr = proj.data() + p * k * d + r * d;
        double acc = 0.0;
        for (std::size_t y = 0; y < d; ++y) acc += pr[y] * hq[y];
        out[(p * n + q) * k + r] = acc;
      }
    }
  }
}

}  // namespace proptree::kernels::serial
