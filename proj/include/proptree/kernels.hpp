// Inner loops shared by the tape primitives and the batch decoders.
//
// Each kernel has a serial reference in `serial` and an OpenMP version in
// `parallel` with identical semantics. The unqualified entry points dispatch
// on problem size; tests compare the two implementations directly and the
// benchmark target times them against each other.
#pragma once

#include <cstddef>
#include <span>

namespace proptree::kernels {

/// C (m×n) = op(A)·op(B), or C += op(A)·op(B) when accumulate is set.
/// op(A) is m×k: A is stored m×k, or k×m when trans_a. op(B) is k×n: B is
/// stored k×n, or n×k when trans_b.
struct GemmArgs {
  std::span<const double> a;
  std::span<const double> b;
  std::span<double> c;
  std::size_t m = 0;
  std::size_t k = 0;
  std::size_t n = 0;
  bool trans_a = false;
  bool trans_b = false;
  bool accumulate = false;
};

namespace serial {
void gemm(const GemmArgs& args);
/// out[(p*m+q)*c + r] = a[p*c + r] + b[q*c + r] for a n×c, b m×c.
void pair_add(std::span<const double> a, std::span<const double> b, std::span<double> out,
              std::size_t n, std::size_t m, std::size_t c);
/// out[(p*n+q)*k + r] = Σ_y proj[p*(k*d) + r*d + y] · h[q*d + y]
/// where proj = h · w has already been formed (n × k·d).
void pair_contract(std::span<const double> proj, std::span<const double> h, std::span<double> out,
                   std::size_t n, std::size_t d, std::size_t k);
}  // namespace serial

namespace parallel {
void gemm(const GemmArgs& args);
void pair_add(std::span<const double> a, std::span<const double> b, std::span<double> out,
              std::size_t n, std::size_t m, std::size_t c);
void pair_contract(std::span<const double> proj, std::span<const double> h, std::span<double> out,
                   std::size_t n, std::size_t d, std::size_t k);
}  // namespace parallel

/// Work (multiply-adds) at or above which the dispatchers use OpenMP.
inline constexpr std::size_t kParallelThreshold = 1u << 16;

int max_threads();

void gemm(const GemmArgs& args);
void pair_add(std::span<const double> a, std::span<const double> b, std::span<double> out,
              std::size_t n, std::size_t m, std::size_t c);
void pair_contract(std::span<const double> proj, std::span<const double> h, std::span<double> out,
                   std::size_t n, std::size_t d, std::size_t k);

}  // namespace proptree::kernels
