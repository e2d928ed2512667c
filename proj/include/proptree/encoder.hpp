// Token embeddings and the bidirectional LSTM encoder.
#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "proptree/data_model.hpp"
#include "proptree/tensor.hpp"

namespace proptree {

using NamedParameters = std::vector<std::pair<std::string, Tensor*>>;

class Vocabulary {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();
  std::size_t add(const std::string& token);
  /// Index of `token`, or kUnk when unseen.
  std::size_t index(const std::string& token) const;
  bool contains(const std::string& token) const { return ids_.contains(token); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// Frozen embedding rows, one per vocabulary entry; row 0 is UNK.
struct EmbeddingTable {
  Vocabulary vocab;
  Tensor matrix;  // |V| × dim
  std::size_t dim() const { return matrix.cols(); }
};

/// Vocabulary from the training tokens, rows drawn uniform(±0.05).
EmbeddingTable random_embeddings(const std::vector<AnnotatedDocument>& corpus, std::size_t dim, Rng& rng);

/// Reads "token v1 ... vd" lines (an optional "count dim" header line is
/// skipped). Training tokens missing from the file get random rows. Rows of
/// the wrong width are rejected with their line number.
EmbeddingTable load_embeddings(std::istream& in, const std::vector<AnnotatedDocument>& corpus,
                               std::size_t dim, Rng& rng);
EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const std::vector<AnnotatedDocument>& corpus, std::size_t dim, Rng& rng);

/// Rows 0..N: the zero root vector, then each token's row (UNK when unseen).
/// With a generator and rate > 0, inverted dropout is applied to rows 1..N.
Var embed(Tape& tape, const AdDocument& doc, const EmbeddingTable& table, double dropout_rate,
          Rng* rng);

/// Gate weights for one direction of one layer, gates stacked as
/// [input; forget; output; candidate] along the first dimension.
struct LstmDirection {
  Tensor input_weights;   // 4d × in
  Tensor hidden_weights;  // 4d × d
  Tensor bias;            // 1 × 4d
};

struct BiLstmParams {
  std::size_t hidden = 0;
  std::size_t input = 0;
  std::vector<LstmDirection> forward;   // one per layer
  std::vector<LstmDirection> backward;

  std::size_t layers() const { return forward.size(); }
  std::size_t output_width() const { return 2 * hidden; }
  void collect(NamedParameters& out, const std::string& prefix);
};

/// Weights uniform(±0.05), biases zero except the forget gate at +1.
BiLstmParams make_bilstm(std::size_t input, std::size_t hidden, std::size_t layers, Rng& rng);

/// One direction over the rows of `inputs` (n × in), from zero initial states.
/// Output row t is the hidden state after consuming input row t.
Var lstm_direction(Var inputs, LstmDirection& params, std::size_t hidden, bool reverse);

/// n × 2d, row i = [forward h_i ; backward h_i]. Between stacked layers,
/// inverted dropout at `layer_dropout` is applied when a generator is given.
Var bilstm_forward(Var inputs, BiLstmParams& params, double layer_dropout = 0.0, Rng* rng = nullptr);

}  // namespace proptree
