#include "proptree/encoder.hpp"

#include <fstream>
#include <sstream>

namespace proptree {

Vocabulary::Vocabulary() { add(std::string(kUnkToken)); }

std::size_t Vocabulary::add(const std::string& token) {
  auto [it, inserted] = ids_.emplace(token, tokens_.size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::size_t Vocabulary::index(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

namespace {

Vocabulary corpus_vocabulary(const std::vector<AnnotatedDocument>& corpus) {
  Vocabulary v;
  for (const auto& d : corpus) {
    for (const auto& t : d.doc.tokens) v.add(t);
  }
  return v;
}

}  // namespace

EmbeddingTable random_embeddings(const std::vector<AnnotatedDocument>& corpus, std::size_t dim, Rng& rng) {
  EmbeddingTable table;
  table.vocab = corpus_vocabulary(corpus);
  table.matrix = Tensor::uniform({table.vocab.size(), dim}, 0.05, rng, false);
  return table;
}

EmbeddingTable load_embeddings(std::istream& in, const std::vector<AnnotatedDocument>& corpus,
                               std::size_t dim, Rng& rng) {
  std::unordered_map<std::string, std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string token;
    if (!(ss >> token)) continue;
    std::vector<double> values;
    for (double v; ss >> v;) values.push_back(v);
    if (line_no == 1 && values.size() == 1) continue;  // "count dim" header
    if (values.size() != dim) {
      throw Error("embeddings line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                  " values, got " + std::to_string(values.size()));
    }
    rows.emplace(std::move(token), std::move(values));
  }
  EmbeddingTable table = random_embeddings(corpus, dim, rng);
  for (const auto& [token, values] : rows) {
    const std::size_t id = table.vocab.contains(token) ? table.vocab.index(token) : table.vocab.add(token);
    if (id >= table.matrix.rows()) continue;  // appended below
    for (std::size_t j = 0; j < dim; ++j) table.matrix.at(id, j) = values[j];
  }
  if (table.vocab.size() > table.matrix.rows()) {
    Tensor grown({table.vocab.size(), dim});
    auto old = table.matrix.values();
    std::copy(old.begin(), old.end(), grown.values().begin());
    for (std::size_t id = table.matrix.rows(); id < table.vocab.size(); ++id) {
      const auto& values = rows.at(table.vocab.tokens()[id]);
      for (std::size_t j = 0; j < dim; ++j) grown.at(id, j) = values[j];
    }
    table.matrix = std::move(grown);
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const std::vector<AnnotatedDocument>& corpus, std::size_t dim, Rng& rng) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embeddings " + path.string());
  return load_embeddings(in, corpus, dim, rng);
}

Var embed(Tape& tape, const AdDocument& doc, const EmbeddingTable& table, double dropout_rate, Rng* rng) {
  const std::size_t n = doc.length() + 1;
  const std::size_t d = table.dim();
  Tensor rows({n, d});
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t id = table.vocab.index(doc.token(i));
    for (std::size_t j = 0; j < d; ++j) rows.at(i, j) = table.matrix.at(id, j);
  }
  Var x = tape.constant(std::move(rows));
  if (rng != nullptr && dropout_rate > 0.0) {
    const std::size_t keep[] = {0};
    x = apply_mask(x, dropout_mask(n, d, dropout_rate, *rng, keep));
  }
  return x;
}

void BiLstmParams::collect(NamedParameters& out, const std::string& prefix) {
  for (std::size_t l = 0; l < layers(); ++l) {
    for (int dir = 0; dir < 2; ++dir) {
      auto& p = dir == 0 ? forward[l] : backward[l];
      const std::string base = prefix + "l" + std::to_string(l) + (dir == 0 ? ".fwd." : ".bwd.");
      out.emplace_back(base + "input_weights", &p.input_weights);
      out.emplace_back(base + "hidden_weights", &p.hidden_weights);
      out.emplace_back(base + "bias", &p.bias);
    }
  }
}

BiLstmParams make_bilstm(std::size_t input, std::size_t hidden, std::size_t layers, Rng& rng) {
  BiLstmParams p;
  p.hidden = hidden;
  p.input = input;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = l == 0 ? input : 2 * hidden;
    for (int dir = 0; dir < 2; ++dir) {
      LstmDirection d;
      d.input_weights = Tensor::uniform({4 * hidden, in}, 0.05, rng);
      d.hidden_weights = Tensor::uniform({4 * hidden, hidden}, 0.05, rng);
      d.bias = Tensor({1, 4 * hidden}, true);
      for (std::size_t j = hidden; j < 2 * hidden; ++j) d.bias[j] = 1.0;
      (dir == 0 ? p.forward : p.backward).push_back(std::move(d));
    }
  }
  return p;
}

Var lstm_direction(Var inputs, LstmDirection& params, std::size_t hidden, bool reverse) {
  Tape& tape = inputs.tape();
  const std::size_t n = inputs.rows();
  if (params.input_weights.cols() != inputs.cols() || params.input_weights.rows() != 4 * hidden) {
    throw ShapeError("lstm: input width " + std::to_string(inputs.cols()) + " vs weights " +
                     shape_string(params.input_weights.shape()));
  }
  Var w_in = tape.parameter(params.input_weights);
  Var w_h = tape.parameter(params.hidden_weights);
  Var bias = tape.parameter(params.bias);
  Var projected = add(matmul_bt(inputs, w_in), bias);  // n × 4d

  Var h = tape.constant(Tensor({1, hidden}));
  Var c = tape.constant(Tensor({1, hidden}));
  std::vector<Var> outputs(n);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t t = reverse ? n - 1 - s : s;
    Var gates = add(slice_rows(projected, t, t + 1), matmul_bt(h, w_h));
    Var in_gate = sigmoid(slice_cols(gates, 0, hidden));
    Var forget_gate = sigmoid(slice_cols(gates, hidden, 2 * hidden));
    Var out_gate = sigmoid(slice_cols(gates, 2 * hidden, 3 * hidden));
    Var candidate = tanh(slice_cols(gates, 3 * hidden, 4 * hidden));
    c = add(mul(forget_gate, c), mul(in_gate, candidate));
    h = mul(out_gate, tanh(c));
    outputs[t] = h;
  }
  return concat(outputs, 0);
}

Var bilstm_forward(Var inputs, BiLstmParams& params, double layer_dropout, Rng* rng) {
  if (inputs.cols() != params.input) {
    throw ShapeError("bilstm: input width " + std::to_string(inputs.cols()) + " vs expected " +
                     std::to_string(params.input));
  }
  Var x = inputs;
  for (std::size_t l = 0; l < params.layers(); ++l) {
    if (l > 0 && rng != nullptr && layer_dropout > 0.0) {
      x = apply_mask(x, dropout_mask(x.rows(), x.cols(), layer_dropout, *rng));
    }
    Var fwd = lstm_direction(x, params.forward[l], params.hidden, false);
    Var bwd = lstm_direction(x, params.backward[l], params.hidden, true);
    const Var both[] = {fwd, bwd};
    x = concat(both, 1);
  }
  return x;
}

}  // namespace proptree
