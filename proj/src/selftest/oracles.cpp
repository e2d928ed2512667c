#include "proptree/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace proptree::oracle {

namespace {

bool reaches_root(const std::vector<std::size_t>& parent) {
  const std::size_t n = parent.size();
  for (std::size_t v = 1; v < n; ++v) {
    std::size_t cur = v;
    for (std::size_t steps = 0; cur != 0; ++steps) {
      if (steps > n) return false;
      cur = parent[cur];
    }
  }
  return true;
}

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

void for_each_arborescence(std::size_t n, const std::function<void(const std::vector<std::size_t>&)>& visit) {
  if (n == 0) return;
  std::vector<std::size_t> parent(n, 0);
  // Odometer over parent[1..n-1] ∈ [0, n).
  while (true) {
    bool valid = true;
    for (std::size_t v = 1; v < n && valid; ++v) valid = parent[v] != v;
    if (valid && reaches_root(parent)) visit(parent);
    std::size_t pos = 1;
    while (pos < n && ++parent[pos] == n) parent[pos++] = 0;
    if (pos >= n) break;
  }
}

double max_arborescence_weight(const WeightedDigraph& graph, std::vector<std::size_t>* best) {
  double top = -std::numeric_limits<double>::infinity();
  for_each_arborescence(graph.size(), [&](const std::vector<std::size_t>& parent) {
    double w = 0.0;
    for (std::size_t v = 1; v < parent.size(); ++v) {
      if (!graph.has_edge(parent[v], v)) return;
      w += graph.weight(parent[v], v);
    }
    if (w > top) {
      top = w;
      if (best) *best = parent;
    }
  });
  return top;
}

double mtt_log_partition(const std::vector<double>& theta, std::size_t nodes) {
  double log_z = -std::numeric_limits<double>::infinity();
  if (nodes == 1) return 0.0;
  for_each_arborescence(nodes, [&](const std::vector<std::size_t>& parent) {
    double s = 0.0;
    for (std::size_t v = 1; v < nodes; ++v) s += theta[parent[v] * nodes + v];
    log_z = log_add(log_z, s);
  });
  return log_z;
}

namespace {

template <class Fn>
void for_each_path(const CrfLattice& l, Fn fn) {
  std::vector<std::size_t> path(l.length, 0);
  while (true) {
    fn(path);
    std::size_t pos = 0;
    while (pos < l.length && ++path[pos] == l.tags) path[pos++] = 0;
    if (pos == l.length) break;
  }
}

}  // namespace

double crf_log_partition(const CrfLattice& l) {
  double log_z = -std::numeric_limits<double>::infinity();
  for_each_path(l, [&](const std::vector<std::size_t>& p) { log_z = log_add(log_z, l.path_score(p)); });
  return log_z;
}

std::vector<std::size_t> crf_viterbi(const CrfLattice& l) {
  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> arg;
  for_each_path(l, [&](const std::vector<std::size_t>& p) {
    const double s = l.path_score(p);
    if (s > best) {
      best = s;
      arg = p;
    }
  });
  return arg;
}

std::vector<double> crf_unary_marginals(const CrfLattice& l) {
  const double log_z = crf_log_partition(l);
  std::vector<double> out(l.length * l.tags, 0.0);
  for_each_path(l, [&](const std::vector<std::size_t>& p) {
    const double w = std::exp(l.path_score(p) - log_z);
    for (std::size_t i = 0; i < l.length; ++i) out[i * l.tags + p[i]] += w;
  });
  return out;
}

GradientReport check_gradient(Tensor& param, std::span<const double> analytic, const std::function<double()>& loss,
                              std::size_t max_entries, double step, double floor) {
  GradientReport r;
  const std::size_t size = param.size();
  if (analytic.size() != size) throw ShapeError("check_gradient: analytic gradient size mismatch");
  const std::size_t stride = std::max<std::size_t>(1, size / std::max<std::size_t>(max_entries, 1));
  for (std::size_t k = 0; k < size; k += stride) {
    const double saved = param[k];
    param[k] = saved + step;
    const double up = loss();
    param[k] = saved - step;
    const double down = loss();
    param[k] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), floor});
    r.max_relative_error = std::max(r.max_relative_error, std::abs(analytic[k] - numeric) / denom);
    ++r.checked;
  }
  return r;
}

}  // namespace proptree::oracle
