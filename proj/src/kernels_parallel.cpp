#include "proptree/kernels.hpp"

#include <omp.h>

#include <cstdint>

namespace proptree::kernels {

namespace parallel {

void gemm(const GemmArgs& g) {
  const std::size_t lda = g.trans_a ? g.m : g.k;
  const std::size_t ldb = g.trans_b ? g.k : g.n;
  const auto rows = static_cast<std::int64_t>(g.m);
#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
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
  const auto total = static_cast<std::int64_t>(n * m);
#pragma omp parallel for schedule(static)
  for (std::int64_t t = 0; t < total; ++t) {
    const auto pq = static_cast<std::size_t>(t);
    const std::size_t p = pq / m;
    const std::size_t q = pq % m;
    double* o = out.data() + pq * c;
    const double* ap = a.data() + p * c;
    const double* bq = b.data() + q * c;
    for (std::size_t r = 0; r < c; ++r) o[r] = ap[r] + bq[r];
  }
}

void pair_contract(std::span<const double> proj, std::span<const double> h, std::span<double> out,
                   std::size_t n, std::size_t d, std::size_t k) {
  const auto total = static_cast<std::int64_t>(n * n);
#pragma omp parallel for schedule(static)
  for (std::int64_t t = 0; t < total; ++t) {
    const auto pq = static_cast<std::size_t>(t);
    const std::size_t p = pq / n;
    const std::size_t q = pq % n;
    const double* hq = h.data() + q * d;
    for (std::size_t r = 0; r < k; ++r) {
      const double* pr = proj.data() + p * k * d + r * d;
      double acc = 0.0;
      for (std::size_t y = 0; y < d; ++y) acc += pr[y] * hq[y];
      out[pq * k + r] = acc;
    }
  }
}

}  // namespace parallel

int max_threads() { return omp_get_max_threads(); }

namespace {
bool go_parallel(std::size_t work) { return work >= kParallelThreshold && max_threads() > 1; }
}  // namespace

void gemm(const GemmArgs& args) {
  if (go_parallel(args.m * args.k * args.n)) {
    parallel::gemm(args);
  } else {
    serial::gemm(args);
  }
}

void pair_add(std::span<const double> a, std::span<const double> b, std::span<double> out,
              std::size_t n, std::size_t m, std::size_t c) {
  if (go_parallel(n * m * c)) {
    parallel::pair_add(a, b, out, n, m, c);
  } else {
    serial::pair_add(a, b, out, n, m, c);
  }
}

void pair_contract(std::span<const double> proj, std::span<const double> h, std::span<double> out,
                   std::size_t n, std::size_t d, std::size_t k) {
  if (go_parallel(n * n * d * k)) {
    parallel::pair_contract(proj, h, out, n, d, k);
  } else {
    serial::pair_contract(proj, h, out, n, d, k);
  }
}

}  // namespace proptree::kernels
