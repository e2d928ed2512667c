#include "proptree/head_selector.hpp"

#include <cmath>

namespace proptree {

void ScorerParams::collect(NamedParameters& out, const std::string& prefix) {
  out.emplace_back(prefix + "head_weights", &head_weights);
  out.emplace_back(prefix + "dependent_weights", &dependent_weights);
  out.emplace_back(prefix + "bias", &bias);
  out.emplace_back(prefix + "output", &output);
}

ScorerParams make_scorer(std::size_t input, std::size_t width, Rng& rng) {
  ScorerParams p;
  p.width = width;
  p.input = input;
  p.head_weights = Tensor::uniform({kNumLabels * width, input}, 0.05, rng);
  p.dependent_weights = Tensor::uniform({kNumLabels * width, input}, 0.05, rng);
  p.bias = Tensor({1, kNumLabels * width}, true);
  p.output = Tensor::uniform({kNumLabels, width}, 0.05, rng);
  return p;
}

double score_triple(std::span<const double> head, std::span<const double> dependent, RelationLabel label,
                    const ScorerParams& params) {
  if (head.size() != params.input || dependent.size() != params.input) {
    throw ShapeError("score_triple: vector widths " + std::to_string(head.size()) + "/" +
                     std::to_string(dependent.size()) + " vs scorer input " + std::to_string(params.input));
  }
  const std::size_t k = label_index(label), l = params.width, m = params.input;
  double score = 0.0;
  for (std::size_t r = 0; r < l; ++r) {
    const std::size_t row = k * l + r;
    double pre = params.bias[row];
    for (std::size_t x = 0; x < m; ++x) {
      pre += params.head_weights[row * m + x] * head[x] + params.dependent_weights[row * m + x] * dependent[x];
    }
    score += params.output[k * l + r] * std::tanh(pre);
  }
  return score;
}

Var joint_scores(Var encoded, ScorerParams& params) {
  Tape& tape = encoded.tape();
  if (encoded.cols() != params.input) {
    throw ShapeError("scorer: encoded width " + std::to_string(encoded.cols()) + " vs scorer input " +
                     std::to_string(params.input));
  }
  const std::size_t n = encoded.rows();
  Var as_head = matmul_bt(encoded, tape.parameter(params.head_weights));      // n × 4l
  Var as_dep = matmul_bt(encoded, tape.parameter(params.dependent_weights));  // n × 4l
  // Row i*n+j pairs dependent i with head j.
  Var hidden = tanh(add(pair_add(as_dep, as_head), tape.parameter(params.bias)));
  Var logits = block_dot(hidden, tape.parameter(params.output));  // n² × 4
  return reshape(logits, n, n * kNumLabels);
}

Var joint_log_probs(Var encoded, ScorerParams& params) { return log_softmax_rows(joint_scores(encoded, params)); }

JointDistribution::JointDistribution(std::size_t positions, std::vector<double> probs)
    : n_(positions), p_(std::move(probs)) {
  if (p_.size() != n_ * n_ * kNumLabels) throw ShapeError("joint distribution size mismatch");
}

JointDistribution JointDistribution::from_log_probs(const Tensor& log_probs) {
  const std::size_t n = log_probs.rows();
  if (log_probs.cols() != n * kNumLabels) {
    throw ShapeError("joint log-probs must be n × 4n, got " + shape_string(log_probs.shape()));
  }
  std::vector<double> p(log_probs.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(log_probs[i]);
  return JointDistribution(n, std::move(p));
}

JointDistribution joint_distribution(const Tensor& encoded, ScorerParams& params) {
  Tape tape;
  Var h = tape.constant(encoded);
  return JointDistribution::from_log_probs(joint_log_probs(h, params).value());
}

Var head_selection_loss(Var log_probs, const TokenHeadAssignment& gold) {
  const std::size_t n = log_probs.rows();
  if (gold.length() + 1 != n) {
    throw Error("gold covers " + std::to_string(gold.length()) + " tokens, distribution has " +
                std::to_string(n - 1));
  }
  std::vector<std::pair<std::size_t, std::size_t>> entries;
  for (std::size_t i = 1; i < n; ++i) {
    const Arc& arc = gold[i];
    if (arc.head >= n) throw Error("gold head " + std::to_string(arc.head) + " out of range");
    entries.emplace_back(i, arc.head * kNumLabels + label_index(arc.label));
  }
  return scale(sum(pick(log_probs, entries)), -1.0);
}

double head_selection_loss(const JointDistribution& dist, const TokenHeadAssignment& gold) {
  if (gold.length() != dist.tokens()) throw Error("gold and distribution lengths differ");
  double loss = 0.0;
  for (std::size_t i = 1; i <= gold.length(); ++i) {
    if (gold[i].head >= dist.positions()) throw Error("gold head out of range");
    loss -= std::log(dist(i, gold[i].head, gold[i].label));
  }
  return loss;
}

TokenHeadAssignment greedy_decode(const JointDistribution& dist) {
  const std::size_t n = dist.positions();
  TokenHeadAssignment out(dist.tokens());
  for (std::size_t i = 1; i < n; ++i) {
    double best = -1.0;
    Arc arc;
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < kNumLabels; ++k) {
        const double p = dist.at(i, j, k);
        if (p > best) {
          best = p;
          arc = {j, static_cast<RelationLabel>(k)};
        }
      }
    }
    out[i] = arc;
  }
  return out;
}

}  // namespace proptree
