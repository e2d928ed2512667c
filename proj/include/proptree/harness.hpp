// Experiment configuration, training with early stopping, prediction,
// evaluation and checkpoints for both the joint model and the pipelines.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "proptree/evaluation.hpp"
#include "proptree/joint_model.hpp"
#include "proptree/pipeline.hpp"

namespace proptree {

enum class ModelKind { Joint, JointAttention, JointTwoLayer, CrfLtm, CrfMtt };

std::string_view model_kind_name(ModelKind kind);  // joint, joint+attention, joint-2layer, crf+ltm, crf+mtt
ModelKind parse_model_kind(std::string_view name);
bool is_joint(ModelKind kind);

struct TrainConfig {
  ModelKind model = ModelKind::Joint;
  AttentionKind attention = AttentionKind::Edge;
  std::size_t steps = 3;
  std::size_t hidden = 128;
  std::size_t scorer_width = 32;
  std::size_t biaffine_width = 32;
  double learning_rate = 1e-3;
  /// Unset: 0.5 on the input of a single-layer encoder, 0.3 per layer input for two layers.
  std::optional<double> dropout;
  std::size_t max_epochs = 150;
  std::size_t patience = 10;
  std::uint64_t seed = 1;
  std::size_t batch_size = 1;
  std::string embeddings;  // word vectors file; empty means random

  double crf_lambda = 10.0;
  double edge_c = 1.0;
  double pipeline_learning_rate = 0.05;
  /// Passes over the training data for the pipeline; unset means max_epochs.
  std::optional<std::size_t> pipeline_epochs;

  double input_dropout() const;
  double layer_dropout() const;
  JointShape joint_shape() const;

  /// key=value override; unknown keys and malformed values throw.
  void set(const std::string& key, const std::string& value);
  /// Lines of key=value; '#' starts a comment.
  void load_overrides(std::istream& in);
  void load_overrides(const std::filesystem::path& path);
  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double val_f1 = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 before any epoch

  double best_f1() const;
  /// Columns: epoch, loss, val_f1, seconds; the best epoch row is marked.
  std::string csv() const;
};

/// Stops once `patience` epochs pass without a strictly better score.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}
  /// Records an epoch score; returns true when it is a new best.
  bool observe(double score);
  bool should_stop() const { return epochs_ - best_epoch_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_score() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t epochs_ = 0;
  std::size_t best_epoch_ = 0;
  double best_ = -1.0;
};

struct Model {
  TrainConfig config;
  JointModel joint;
  PipelineModel pipeline;
};

struct DocumentPrediction {
  TokenHeadAssignment greedy;
  TokenHeadAssignment final;
  bool greedy_tree = false;
  PropertyTree tree;
};

DocumentPrediction predict(Model& model, const AdDocument& doc);

/// Gold comparisons use the post-Edmonds assignment; tree-rate uses greedy output.
MetricsReport evaluate(Model& model, const std::vector<AnnotatedDocument>& docs);
/// Scores gold against itself.
MetricsReport evaluate_gold(const std::vector<AnnotatedDocument>& docs);

/// Returning false ends training after the current epoch.
using EpochCallback = std::function<bool(const EpochRecord&)>;

struct TrainResult {
  Model model;
  TrainLog log;
};

/// Validation falls back to the training documents when the validation split is empty.
TrainResult train(const TrainConfig& config, const std::vector<AnnotatedDocument>& train_docs,
                  const std::vector<AnnotatedDocument>& validation_docs, const EpochCallback& on_epoch = {});

/// Binary container: "PTCK", u32 version, JSON manifest, then named float64 tensors.
void save_checkpoint(const Model& model, std::ostream& out);
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(std::istream& in);
Model load_checkpoint(const std::filesystem::path& path);

/// JSON object for one prediction: id, tokens, assignment pairs and the tree.
std::string prediction_json(const AdDocument& doc, const DocumentPrediction& p);

}  // namespace proptree
