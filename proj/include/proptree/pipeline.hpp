// Two-step pipeline: CRF mention tagging, then entity attachment scored by a
// local classifier (LTM) or a globally normalized tree model (MTT), and
// Edmonds over the entity graph.
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "proptree/crf.hpp"
#include "proptree/data_model.hpp"
#include "proptree/mst.hpp"

namespace proptree {

/// A typed mention acting as an entity of its own.
struct Candidate {
  EntityMention span;
  EntityType type = EntityType::Untyped;
};

using EdgeFeatureVector = std::vector<std::string>;

/// Features of attaching `child` under `parent` (nullptr for the root).
EdgeFeatureVector extract_edge_features(const Candidate* parent, const Candidate& child, const AdDocument& doc);

/// Candidates of a document, one per gold mention, with the gold parent of
/// each as a candidate index (kRootParent for the root). Later mentions of an
/// entity take the entity's parent, as main mentions do.
struct CandidateSet {
  static constexpr std::size_t kRootParent = static_cast<std::size_t>(-1);
  std::vector<Candidate> candidates;
  std::vector<std::size_t> gold_parent;
};
CandidateSet gold_candidates(const AnnotatedDocument& doc);
std::vector<Candidate> candidates_from_tags(const BioSequence& tags);

/// Dense binary-feature linear scorer shared by LTM and MTT.
struct EdgeWeights {
  FeatureIndex features;
  Tensor weights;  // 1 × features

  double score(const EdgeFeatureVector& f) const;
  void add_gradient(const EdgeFeatureVector& f, double scale);
};

struct LtmModel {
  EdgeWeights linear;
  /// Set when training saw one class only: every pair gets this probability.
  std::optional<double> constant_probability;

  double probability(const EdgeFeatureVector& f) const;
};

struct EdgeTrainConfig {
  double c = 1.0;  // inverse regularization strength
  double learning_rate = 0.05;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
};

LtmModel ltm_train(const std::vector<AnnotatedDocument>& corpus, const EdgeTrainConfig& config);

/// θ over (t+1) × (t+1) nodes, entry [h][m] for head h and dependent m, node 0
/// the root. -infinity marks a missing edge; the diagonal and column 0 are ignored.
double mtt_log_partition(const std::vector<double>& theta, std::size_t nodes);
/// Edge marginals in the same layout; each dependent's column sums to 1.
std::vector<double> mtt_marginals(const std::vector<double>& theta, std::size_t nodes);

struct MttModel {
  EdgeWeights linear;
};

MttModel mtt_train(const std::vector<AnnotatedDocument>& corpus, const EdgeTrainConfig& config);

/// Σ_docs log P(gold tree) − (λ/2)‖w‖² with λ = 1/C scaled by weight_share;
/// with `accumulate` the negated gradient is added to linear.weights.grad().
double mtt_objective(const std::vector<const AnnotatedDocument*>& docs, MttModel& model, double lambda,
                     double weight_share = 1.0, bool accumulate = false);

/// Edge weight between candidates, parent nullptr meaning the root. Higher is better.
using EdgeScoreFn = std::function<double(const Candidate* parent, const Candidate& child)>;
EdgeScoreFn ltm_scorer(const LtmModel& model, const AdDocument& doc);
EdgeScoreFn mtt_scorer(const MttModel& model, const AdDocument& doc);

struct PipelineOutput {
  PropertyTree tree;
  BioSequence tags;
  /// Whether each candidate's best-scoring parent, taken independently, already forms a tree.
  bool greedy_tree = true;
};

PipelineOutput pipeline_from_tags(const AdDocument& doc, const BioSequence& tags, const EdgeScoreFn& score);

enum class EdgeModelKind { Ltm, Mtt };

struct PipelineModel {
  EdgeModelKind kind = EdgeModelKind::Mtt;
  CrfModel crf;
  LtmModel ltm;
  MttModel mtt;
};

PipelineOutput pipeline_predict(const AdDocument& doc, const PipelineModel& model);

}  // namespace proptree
