// Independent reference computations: exhaustive enumeration and finite
// differences. Deliberately naive; used by the test suites and `selftest`.
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "proptree/crf.hpp"
#include "proptree/mst.hpp"
#include "proptree/tensor.hpp"

namespace proptree::oracle {

/// Calls `visit` with every parent vector over nodes 0..n-1 (parent[0] unused)
/// that forms an arborescence rooted at 0.
void for_each_arborescence(std::size_t n, const std::function<void(const std::vector<std::size_t>&)>& visit);

/// Best total weight over all arborescences that use existing edges only;
/// -infinity when none exists.
double max_arborescence_weight(const WeightedDigraph& graph, std::vector<std::size_t>* best = nullptr);

/// log Σ_trees exp(Σ θ[h][m]) over (nodes) × (nodes) scores, root 0.
double mtt_log_partition(const std::vector<double>& theta, std::size_t nodes);

/// Every tag sequence of the lattice.
double crf_log_partition(const CrfLattice& lattice);
std::vector<std::size_t> crf_viterbi(const CrfLattice& lattice);

/// Unary marginals by enumeration.
std::vector<double> crf_unary_marginals(const CrfLattice& lattice);

struct GradientReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

/// Compares analytic[k] against a central difference of `loss` in param[k] for
/// up to `max_entries` entries (spread evenly). Relative error is
/// |a - n| / max(|a|, |n|, floor).
GradientReport check_gradient(Tensor& param, std::span<const double> analytic, const std::function<double()>& loss,
                              std::size_t max_entries = 64, double step = 1e-5, double floor = 1e-5);

}  // namespace proptree::oracle
