// Embeddings, BiLSTM, optional attention and the joint head scorer as one model.
#pragma once

#include <cstddef>
#include <string>

#include "proptree/attention.hpp"
#include "proptree/data_model.hpp"
#include "proptree/encoder.hpp"
#include "proptree/head_selector.hpp"
#include "proptree/mst.hpp"

namespace proptree {

struct JointShape {
  std::size_t hidden = 128;
  std::size_t layers = 1;
  std::size_t scorer_width = 32;
  std::size_t biaffine_width = 32;
  AttentionConfig attention;
};

struct JointModel {
  JointShape shape;
  EmbeddingTable embeddings;
  BiLstmParams encoder;
  AttentionParams attention;
  ScorerParams scorer;

  /// Trainable tensors with stable names (embeddings excluded: they stay frozen).
  NamedParameters parameters();
};

/// Parameters drawn from `rng` after the embeddings were built.
JointModel make_joint_model(const JointShape& shape, EmbeddingTable embeddings, Rng& rng);

/// (N+1) × 4(N+1) log-probabilities. Dropout is active only when rng is given.
Var joint_forward(Tape& tape, JointModel& model, const AdDocument& doc, double input_dropout,
                  double layer_dropout, Rng* rng);

JointDistribution joint_predict_distribution(JointModel& model, const AdDocument& doc);

struct Prediction {
  TokenHeadAssignment greedy;  // skip labels canonicalized to self-loops
  TokenHeadAssignment final;   // after tree enforcement
  bool greedy_tree = false;
  PropertyTree tree;
};

Prediction joint_predict(JointModel& model, const AdDocument& doc);

/// Tree view of a token assignment that may not follow annotation conventions:
/// root-attached segment or equivalent edges are read as part-of, and an
/// assignment that still cannot be read yields an empty tree.
PropertyTree read_tree(const AdDocument& doc, const TokenHeadAssignment& assignment);

}  // namespace proptree
