#include "proptree/evaluation.hpp"

#include <cstdio>

#include "json.hpp"

namespace proptree {

LabelCounts& LabelCounts::operator+=(const LabelCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  return *this;
}

EdgeCounts& EdgeCounts::operator+=(const EdgeCounts& o) {
  part_of += o.part_of;
  segment += o.segment;
  equivalent += o.equivalent;
  return *this;
}

namespace {

LabelCounts* slot(EdgeCounts& c, RelationLabel label) {
  switch (label) {
    case RelationLabel::PartOf:
      return &c.part_of;
    case RelationLabel::Segment:
      return &c.segment;
    case RelationLabel::Equivalent:
      return &c.equivalent;
    case RelationLabel::Skip:
      break;
  }
  return nullptr;
}

}  // namespace

EdgeCounts score_edges(const TokenHeadAssignment& predicted, const TokenHeadAssignment& gold) {
  if (predicted.length() != gold.length()) {
    throw Error("score_edges: prediction covers " + std::to_string(predicted.length()) + " tokens, gold " +
                std::to_string(gold.length()));
  }
  EdgeCounts c;
  for (std::size_t i = 1; i <= gold.length(); ++i) {
    const Arc& p = predicted[i];
    const Arc& g = gold[i];
    const bool match = p == g;
    if (auto* s = slot(c, p.label)) (match ? s->tp : s->fp) += 1;
    if (auto* s = slot(c, g.label); s && !match) s->fn += 1;
  }
  return c;
}

double f1_score(double precision, double recall) {
  return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

LabelMetrics label_metrics(const LabelCounts& counts) {
  LabelMetrics m;
  m.counts = counts;
  const auto tp = static_cast<double>(counts.tp);
  if (counts.tp + counts.fp > 0) m.precision = 100.0 * tp / static_cast<double>(counts.tp + counts.fp);
  if (counts.tp + counts.fn > 0) m.recall = 100.0 * tp / static_cast<double>(counts.tp + counts.fn);
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

MetricsReport aggregate(std::span<const DocumentScore> docs) {
  if (docs.empty()) throw Error("aggregate: no documents");
  EdgeCounts total;
  std::size_t trees = 0;
  for (const auto& d : docs) {
    total += d.counts;
    trees += d.greedy_tree ? 1 : 0;
  }
  MetricsReport r;
  r.documents = docs.size();
  r.segment = label_metrics(total.segment);
  r.part_of = label_metrics(total.part_of);
  LabelCounts both = total.segment;
  both += total.part_of;
  r.overall = label_metrics(both);
  r.equivalent = label_metrics(total.equivalent);
  r.tree_rate = 100.0 * static_cast<double>(trees) / static_cast<double>(docs.size());
  return r;
}

namespace {

nlohmann::json label_json(const LabelMetrics& m) {
  return {{"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"tp", m.counts.tp},
          {"fp", m.counts.fp},
          {"fn", m.counts.fn}};
}

}  // namespace

std::string metrics_json(const MetricsReport& r) {
  nlohmann::json j = {{"segment", label_json(r.segment)},
                      {"part-of", label_json(r.part_of)},
                      {"overall", label_json(r.overall)},
                      {"equivalent", label_json(r.equivalent)},
                      {"tree_rate", r.tree_rate},
                      {"documents", r.documents}};
  return j.dump(2);
}

std::string metrics_table(const MetricsReport& r, const std::string& row_name) {
  char line[256];
  std::string out;
  std::snprintf(line, sizeof line, "%-16s | %-23s | %-23s | %8s | %7s\n", "", "segment", "part-of", "overall",
                "trees");
  out += line;
  std::snprintf(line, sizeof line, "%-16s | %7s %7s %7s | %7s %7s %7s | %8s | %7s\n", "model", "P", "R", "F1", "P",
                "R", "F1", "F1", "%");
  out += line;
  std::snprintf(line, sizeof line, "%-16s | %7.2f %7.2f %7.2f | %7.2f %7.2f %7.2f | %8.2f | %7.2f\n",
                row_name.c_str(), r.segment.precision, r.segment.recall, r.segment.f1, r.part_of.precision,
                r.part_of.recall, r.part_of.f1, r.overall.f1, r.tree_rate);
  out += line;
  return out;
}

}  // namespace proptree
