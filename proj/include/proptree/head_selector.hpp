// Joint head-and-label selection over encoded token sequences.
//
// For dependent i and candidate head j the scorer produces one logit per
// label, score(h_j, h_i, c_k) = V_kᵀ tanh(U_k h_j + W_k h_i + b_k), and the
// (head, label) pairs of each dependent share a single softmax.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "proptree/data_model.hpp"
#include "proptree/encoder.hpp"
#include "proptree/tensor.hpp"

namespace proptree {

/// Per-label parameters stacked along the first dimension: rows k*l..(k+1)*l-1
/// of head_weights hold U_k, likewise W_k in dependent_weights and b_k in bias;
/// row k of output holds V_k.
struct ScorerParams {
  std::size_t width = 0;  // l
  std::size_t input = 0;  // m
  Tensor head_weights;       // 4l × m
  Tensor dependent_weights;  // 4l × m
  Tensor bias;               // 1 × 4l
  Tensor output;             // 4 × l

  void collect(NamedParameters& out, const std::string& prefix);
};

ScorerParams make_scorer(std::size_t input, std::size_t width, Rng& rng);

double score_triple(std::span<const double> head, std::span<const double> dependent, RelationLabel label,
                    const ScorerParams& params);

/// Logits laid out n × 4n: row i is the dependent, column j*4+k the (head, label) pair.
Var joint_scores(Var encoded, ScorerParams& params);
/// Row-wise log-softmax of joint_scores.
Var joint_log_probs(Var encoded, ScorerParams& params);

/// P[i][j][k] for positions 0..N. Row 0 (the root as dependent) is computed
/// like every other row but never used.
class JointDistribution {
 public:
  JointDistribution() = default;
  JointDistribution(std::size_t positions, std::vector<double> probs);
  /// From an n × 4n matrix of log-probabilities.
  static JointDistribution from_log_probs(const Tensor& log_probs);

  std::size_t positions() const { return n_; }
  std::size_t tokens() const { return n_ - 1; }
  double operator()(std::size_t i, std::size_t j, RelationLabel k) const {
    return p_[(i * n_ + j) * kNumLabels + label_index(k)];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return p_[(i * n_ + j) * kNumLabels + k]; }

 private:
  std::size_t n_ = 0;
  std::vector<double> p_;
};

/// Evaluates the scorer without recording gradients.
JointDistribution joint_distribution(const Tensor& encoded, ScorerParams& params);

/// Σ_{i=1..N} −log P[i][y_i][c_i] on the tape.
Var head_selection_loss(Var log_probs, const TokenHeadAssignment& gold);
double head_selection_loss(const JointDistribution& dist, const TokenHeadAssignment& gold);

/// Per-token argmax over (head, label); ties go to the smaller head, then the smaller label.
TokenHeadAssignment greedy_decode(const JointDistribution& dist);

}  // namespace proptree
