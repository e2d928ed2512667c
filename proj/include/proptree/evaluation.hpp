// Edge-level precision, recall and F1 on the structured labels, plus tree-rate.
#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "proptree/data_model.hpp"

namespace proptree {

struct LabelCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  LabelCounts& operator+=(const LabelCounts& o);
};

struct EdgeCounts {
  LabelCounts part_of;
  LabelCounts segment;
  LabelCounts equivalent;
  EdgeCounts& operator+=(const EdgeCounts& o);
};

/// A predicted (token, head, label) triple counts when gold holds the same triple.
/// Skip edges are never counted.
EdgeCounts score_edges(const TokenHeadAssignment& predicted, const TokenHeadAssignment& gold);

double f1_score(double precision, double recall);

struct LabelMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  LabelCounts counts;
};
LabelMetrics label_metrics(const LabelCounts& counts);

/// All values are percentages.
struct MetricsReport {
  LabelMetrics segment;
  LabelMetrics part_of;
  LabelMetrics overall;     // union of segment and part-of
  LabelMetrics equivalent;  // diagnostic only
  double tree_rate = 0.0;
  std::size_t documents = 0;
};

struct DocumentScore {
  EdgeCounts counts;
  bool greedy_tree = false;
};

/// Micro-averaged over documents.
MetricsReport aggregate(std::span<const DocumentScore> docs);

std::string metrics_json(const MetricsReport& report);
/// Column order: segment P/R/F1, part-of P/R/F1, overall F1, trees %.
std::string metrics_table(const MetricsReport& report, const std::string& row_name);

}  // namespace proptree
