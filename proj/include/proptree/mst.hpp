// Tree enforcement over head-selection output: the decoding graph and
// maximum spanning arborescences.
#pragma once

#include <cstddef>
#include <vector>

#include "proptree/data_model.hpp"
#include "proptree/head_selector.hpp"

namespace proptree {

/// Dense digraph over local node indices 0..n-1, local 0 being the root.
/// `nodes` maps local indices to caller ids (token positions, entity slots).
/// Absent edges carry -infinity.
struct WeightedDigraph {
  std::vector<std::size_t> nodes;
  std::vector<double> weights;        // [head * n + dependent]
  std::vector<RelationLabel> labels;  // best label per edge

  explicit WeightedDigraph(std::vector<std::size_t> node_ids = {0});

  std::size_t size() const { return nodes.size(); }
  double weight(std::size_t head, std::size_t dep) const { return weights[head * size() + dep]; }
  RelationLabel label(std::size_t head, std::size_t dep) const { return labels[head * size() + dep]; }
  bool has_edge(std::size_t head, std::size_t dep) const;
  void set_edge(std::size_t head, std::size_t dep, double weight, RelationLabel label = RelationLabel::PartOf);
  std::size_t edge_count() const;
};

/// parent[0] is unused (the root); all indices are local to the graph.
struct Arborescence {
  std::vector<std::size_t> parent;
  std::vector<RelationLabel> labels;
  double weight = 0.0;
};

/// Nodes are the root plus tokens whose greedy label is not skip; the edge j→i
/// carries the best of log P over part-of, segment and equivalent.
WeightedDigraph build_graph(const JointDistribution& dist, const TokenHeadAssignment& greedy);

/// Maximum spanning arborescence rooted at local node 0. Ties prefer the
/// smaller head, and when breaking a cycle the smaller dependent.
/// Throws when some node cannot be reached from the root.
Arborescence chu_liu_edmonds(const WeightedDigraph& graph);

/// Sum of edge weights of `parent` in `graph`.
double arborescence_weight(const WeightedDigraph& graph, const std::vector<std::size_t>& parent);

/// True when the non-skip tokens, with the root, form one arborescence.
bool is_tree(const TokenHeadAssignment& assignment);

/// Skip predictions kept from greedy decoding, every other token re-attached by Edmonds.
TokenHeadAssignment decode_with_edmonds(const JointDistribution& dist, const TokenHeadAssignment& greedy);

/// A greedy skip label always means a self-loop, whatever head was chosen with it.
TokenHeadAssignment canonical_skips(TokenHeadAssignment assignment);

}  // namespace proptree
