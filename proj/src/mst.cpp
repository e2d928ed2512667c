#include "proptree/mst.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace proptree {

namespace {

constexpr double kAbsent = -std::numeric_limits<double>::infinity();
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

// Dense Edmonds on w[h * n + d]; every node is assumed reachable from 0.
std::vector<std::size_t> solve(std::size_t n, const std::vector<double>& w) {
  std::vector<std::size_t> parent(n, kNone);
  for (std::size_t d = 1; d < n; ++d) {
    double best = kAbsent;
    for (std::size_t h = 0; h < n; ++h) {
      if (h == d) continue;
      if (w[h * n + d] > best) {
        best = w[h * n + d];
        parent[d] = h;
      }
    }
  }

  // Find a cycle, scanning start nodes in increasing order.
  std::vector<int> state(n, 0);  // 0 unvisited, 1 on current walk, 2 done
  std::vector<std::size_t> cycle;
  state[0] = 2;
  for (std::size_t s = 1; s < n && cycle.empty(); ++s) {
    std::size_t v = s;
    while (state[v] == 0) {
      state[v] = 1;
      v = parent[v];
    }
    if (state[v] == 1) {
      std::size_t u = v;
      do {
        cycle.push_back(u);
        u = parent[u];
      } while (u != v);
    }
    for (v = s; state[v] == 1; v = parent[v]) state[v] = 2;
  }
  if (cycle.empty()) return parent;

  std::vector<bool> in_cycle(n, false);
  for (auto v : cycle) in_cycle[v] = true;
  std::vector<std::size_t> to_new(n, kNone), to_old;
  for (std::size_t v = 0; v < n; ++v) {
    if (!in_cycle[v]) {
      to_new[v] = to_old.size();
      to_old.push_back(v);
    }
  }
  const std::size_t c = to_old.size();
  const std::size_t m = c + 1;
  std::vector<double> w2(m * m, kAbsent);
  std::vector<std::size_t> enter(n, kNone);  // outside head u → cycle node it enters
  std::vector<std::size_t> leave(n, kNone);  // outside dependent v → cycle node it leaves from
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      if (u == v || v == 0) continue;
      const double x = w[u * n + v];
      if (x == kAbsent) continue;
      if (!in_cycle[u] && !in_cycle[v]) {
        w2[to_new[u] * m + to_new[v]] = x;
      } else if (!in_cycle[u] && in_cycle[v]) {
        const double adjusted = x - w[parent[v] * n + v];
        if (adjusted > w2[to_new[u] * m + c]) {
          w2[to_new[u] * m + c] = adjusted;
          enter[u] = v;
        }
      } else if (in_cycle[u] && !in_cycle[v]) {
        if (x > w2[c * m + to_new[v]]) {
          w2[c * m + to_new[v]] = x;
          leave[v] = u;
        }
      }
    }
  }

  const auto contracted = solve(m, w2);
  std::vector<std::size_t> result(parent);
  for (std::size_t v2 = 1; v2 < c; ++v2) {
    const std::size_t v = to_old[v2];
    result[v] = contracted[v2] == c ? leave[v] : to_old[contracted[v2]];
  }
  const std::size_t entering = to_old[contracted[c]];
  result[enter[entering]] = entering;
  return result;
}

}  // namespace

WeightedDigraph::WeightedDigraph(std::vector<std::size_t> node_ids)
    : nodes(std::move(node_ids)),
      weights(nodes.size() * nodes.size(), kAbsent),
      labels(nodes.size() * nodes.size(), RelationLabel::Skip) {
  if (nodes.empty()) throw Error("graph needs a root node");
}

bool WeightedDigraph::has_edge(std::size_t head, std::size_t dep) const { return weight(head, dep) != kAbsent; }

void WeightedDigraph::set_edge(std::size_t head, std::size_t dep, double weight, RelationLabel label) {
  if (head >= size() || dep >= size()) throw Error("edge endpoint out of range");
  if (dep == 0) throw Error("no edges may enter the root");
  if (head == dep) throw Error("self-edge on node " + std::to_string(nodes[dep]));
  if (!std::isfinite(weight)) throw Error("non-finite edge weight");
  weights[head * size() + dep] = weight;
  labels[head * size() + dep] = label;
}

std::size_t WeightedDigraph::edge_count() const {
  return static_cast<std::size_t>(std::count_if(weights.begin(), weights.end(), [](double x) { return x != kAbsent; }));
}

WeightedDigraph build_graph(const JointDistribution& dist, const TokenHeadAssignment& greedy) {
  if (greedy.length() != dist.tokens()) throw Error("build_graph: greedy assignment and distribution lengths differ");
  std::vector<std::size_t> ids{0};
  for (std::size_t i = 1; i <= greedy.length(); ++i) {
    if (greedy[i].label != RelationLabel::Skip) ids.push_back(i);
  }
  WeightedDigraph g(ids);
  constexpr double floor = std::numeric_limits<double>::min();
  for (std::size_t a = 0; a < ids.size(); ++a) {
    for (std::size_t b = 1; b < ids.size(); ++b) {
      if (a == b) continue;
      const std::size_t j = ids[a], i = ids[b];
      RelationLabel best = RelationLabel::PartOf;
      double p = -1.0;
      for (auto k : {RelationLabel::PartOf, RelationLabel::Segment, RelationLabel::Equivalent}) {
        if (dist(i, j, k) > p) {
          p = dist(i, j, k);
          best = k;
        }
      }
      g.set_edge(a, b, std::log(std::max(p, floor)), best);
    }
  }
  return g;
}

double arborescence_weight(const WeightedDigraph& graph, const std::vector<std::size_t>& parent) {
  double total = 0.0;
  for (std::size_t v = 1; v < graph.size(); ++v) total += graph.weight(parent[v], v);
  return total;
}

Arborescence chu_liu_edmonds(const WeightedDigraph& graph) {
  const std::size_t n = graph.size();
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v = 1; v < n; ++v) {
      if (!seen[v] && graph.has_edge(u, v)) {
        seen[v] = true;
        stack.push_back(v);
      }
    }
  }
  for (std::size_t v = 1; v < n; ++v) {
    if (!seen[v]) throw Error("node " + std::to_string(graph.nodes[v]) + " is unreachable from the root");
  }

  Arborescence out;
  out.parent = solve(n, graph.weights);
  out.parent[0] = 0;
  out.labels.assign(n, RelationLabel::Skip);
  for (std::size_t v = 1; v < n; ++v) out.labels[v] = graph.label(out.parent[v], v);
  out.weight = arborescence_weight(graph, out.parent);
  return out;
}

bool is_tree(const TokenHeadAssignment& assignment) {
  const std::size_t n = assignment.length();
  auto in_tree = [&](std::size_t i) { return assignment[i].label != RelationLabel::Skip; };
  // 0 unvisited, 1 on the current walk, 2 known to reach the root.
  std::vector<int> state(n + 1, 0);
  state[0] = 2;
  for (std::size_t s = 1; s <= n; ++s) {
    if (!in_tree(s)) continue;
    std::vector<std::size_t> walk;
    std::size_t v = s;
    while (state[v] == 0) {
      const std::size_t h = assignment[v].head;
      if (h > n || h == v || (h != 0 && !in_tree(h))) return false;
      state[v] = 1;
      walk.push_back(v);
      v = h;
    }
    if (state[v] == 1) return false;
    for (auto u : walk) state[u] = 2;
  }
  return true;
}

TokenHeadAssignment canonical_skips(TokenHeadAssignment assignment) {
  for (std::size_t i = 1; i <= assignment.length(); ++i) {
    if (assignment[i].label == RelationLabel::Skip) assignment[i].head = i;
  }
  return assignment;
}

TokenHeadAssignment decode_with_edmonds(const JointDistribution& dist, const TokenHeadAssignment& greedy) {
  const WeightedDigraph graph = build_graph(dist, greedy);
  const Arborescence tree = chu_liu_edmonds(graph);
  TokenHeadAssignment out(greedy.length());
  for (std::size_t v = 1; v < graph.size(); ++v) {
    out.set(graph.nodes[v], graph.nodes[tree.parent[v]], tree.labels[v]);
  }
  return out;
}

}  // namespace proptree
