// Linear-chain CRF over BIO tags.
#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "proptree/data_model.hpp"
#include "proptree/tensor.hpp"

namespace proptree {

/// String feature names mapped to dense ids, in insertion order.
class FeatureIndex {
 public:
  static constexpr std::size_t kMissing = static_cast<std::size_t>(-1);
  std::size_t add(const std::string& name);
  std::size_t find(const std::string& name) const;
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// Scores of one sentence: unary[i][t] for position i (0-based) and tag t,
/// transition[a][b] for a followed by b, start[t] for the first position.
struct CrfLattice {
  std::size_t length = 0;
  std::size_t tags = 0;
  std::vector<double> unary;
  std::vector<double> transition;
  std::vector<double> start;

  double path_score(const std::vector<std::size_t>& path) const;
};

double lattice_log_partition(const CrfLattice& lattice);
std::vector<std::size_t> lattice_viterbi(const CrfLattice& lattice);

struct CrfMarginals {
  std::vector<double> unary;       // length × tags
  std::vector<double> transition;  // tags × tags, expected counts summed over positions
  double log_partition = 0.0;
};
CrfMarginals lattice_marginals(const CrfLattice& lattice);

/// Emission feature names for every token of a document.
std::vector<std::vector<std::string>> crf_token_features(const AdDocument& doc);

struct CrfModel {
  FeatureIndex features;
  Tensor emission;    // features × tags
  Tensor transition;  // tags × tags
  Tensor start;       // 1 × tags

  std::size_t tags() const { return transition.rows(); }
  std::vector<Tensor*> parameters() { return {&emission, &transition, &start}; }
};

/// Zero-weight model whose feature index covers the given documents.
CrfModel make_crf(const std::vector<AnnotatedDocument>& corpus, std::size_t tags = kNumBioTags);

CrfLattice crf_lattice(const AdDocument& doc, const CrfModel& model);
double crf_log_partition(const AdDocument& doc, const CrfModel& model);
BioSequence crf_viterbi(const AdDocument& doc, const CrfModel& model);

struct CrfExample {
  const AdDocument* doc = nullptr;
  BioSequence tags;
};

/// Σ log P(y|x) − (λ/2)‖w‖², with λ scaled by `weight_share`. When `accumulate`
/// is set, the gradient of the negated objective is added to each parameter's grad.
double crf_objective(const std::vector<CrfExample>& examples, CrfModel& model, double lambda,
                     double weight_share = 1.0, bool accumulate = false);

struct CrfTrainConfig {
  double lambda = 10.0;
  double learning_rate = 0.05;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
};

/// Per-document Adam steps on the regularized conditional log-likelihood,
/// with the regularizer spread evenly over the documents of an epoch.
CrfModel crf_train(const std::vector<AnnotatedDocument>& corpus, const CrfTrainConfig& config);

}  // namespace proptree
