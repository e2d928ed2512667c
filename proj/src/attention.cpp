#include "proptree/attention.hpp"

#include <array>

namespace proptree {

namespace {
constexpr std::array<std::string_view, 7> kNames = {"none",     "additive", "bilinear", "multiplicative",
                                                    "biaffine", "tensor",   "edge"};
}  // namespace

std::string_view attention_name(AttentionKind kind) { return kNames[static_cast<std::size_t>(kind)]; }

AttentionKind parse_attention(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (name == kNames[i]) return static_cast<AttentionKind>(i);
  }
  throw Error("unknown attention variant '" + std::string(name) + "'");
}

void AttentionParams::collect(NamedParameters& out, const std::string& prefix) {
  auto put = [&](const char* name, Tensor& t) { out.emplace_back(prefix + name, &t); };
  switch (config.kind) {
    case AttentionKind::None:
    case AttentionKind::Multiplicative:
      break;
    case AttentionKind::Additive:
      put("add_out", add_out);
      put("add_head", add_head);
      put("add_dep", add_dep);
      put("add_bias", add_bias);
      break;
    case AttentionKind::Bilinear:
      put("bilinear", bilinear);
      break;
    case AttentionKind::Biaffine:
      put("dep_proj", dep_proj);
      put("head_proj", head_proj);
      put("dep_reduce", dep_reduce);
      put("head_reduce", head_reduce);
      put("biaffine_weights", biaffine_weights);
      put("head_prior", head_prior);
      put("dep_bias", dep_bias);
      put("head_bias", head_bias);
      break;
    case AttentionKind::TensorNet:
      put("tensor_weights", tensor_weights);
      put("tensor_linear", tensor_linear);
      put("tensor_out", tensor_out);
      put("tensor_bias", tensor_bias);
      break;
    case AttentionKind::Edge:
      put("edge_head", edge_head);
      put("edge_dep", edge_dep);
      put("edge_bias", edge_bias);
      put("edge_src", edge_src);
      put("edge_dst", edge_dst);
      break;
  }
}

std::size_t AttentionParams::output_width() const {
  switch (config.kind) {
    case AttentionKind::None:
    case AttentionKind::Edge:
      return input;
    default:
      return 2 * input;
  }
}

AttentionParams make_attention(AttentionConfig config, std::size_t input, std::size_t width,
                               std::size_t reduced, Rng& rng) {
  if (config.kind == AttentionKind::Edge && config.steps == 0) throw Error("edge attention needs steps >= 1");
  AttentionParams p;
  p.config = config;
  p.input = input;
  p.width = width;
  p.reduced = reduced;
  const double b = 0.05;
  switch (config.kind) {
    case AttentionKind::None:
    case AttentionKind::Multiplicative:
      break;
    case AttentionKind::Additive:
      p.add_out = Tensor::uniform({1, width}, b, rng);
      p.add_head = Tensor::uniform({width, input}, b, rng);
      p.add_dep = Tensor::uniform({width, input}, b, rng);
      p.add_bias = Tensor({1, width}, true);
      break;
    case AttentionKind::Bilinear:
      p.bilinear = Tensor::uniform({input, input}, b, rng);
      break;
    case AttentionKind::Biaffine:
      p.dep_proj = Tensor::uniform({width, input}, b, rng);
      p.head_proj = Tensor::uniform({width, input}, b, rng);
      p.dep_reduce = Tensor::uniform({reduced, width}, b, rng);
      p.head_reduce = Tensor::uniform({reduced, width}, b, rng);
      p.biaffine_weights = Tensor::uniform({reduced, reduced}, b, rng);
      p.head_prior = Tensor::uniform({1, reduced}, b, rng);
      p.dep_bias = Tensor({1, width}, true);
      p.head_bias = Tensor({1, width}, true);
      break;
    case AttentionKind::TensorNet:
      p.tensor_weights = Tensor::uniform({input, width, input}, b, rng);
      p.tensor_linear = Tensor::uniform({width, input}, b, rng);
      p.tensor_out = Tensor::uniform({1, width}, b, rng);
      p.tensor_bias = Tensor({1, width}, true);
      break;
    case AttentionKind::Edge:
      p.edge_head = Tensor::uniform({width, input}, b, rng);
      p.edge_dep = Tensor::uniform({width, input}, b, rng);
      p.edge_bias = Tensor({1, width}, true);
      p.edge_src = Tensor::uniform({input, width}, b, rng);
      p.edge_dst = Tensor::uniform({input, width}, b, rng);
      break;
  }
  return p;
}

namespace {

void check_width(Var encoded, const AttentionParams& p) {
  if (encoded.cols() != p.input) {
    throw ShapeError("attention: encoded width " + std::to_string(encoded.cols()) + " vs expected " +
                     std::to_string(p.input));
  }
}

}  // namespace

Var attention_scores(Var h, AttentionParams& p) {
  check_width(h, p);
  Tape& tape = h.tape();
  const std::size_t n = h.rows();
  switch (p.config.kind) {
    case AttentionKind::Additive: {
      // Row j*n+i of the pairwise block holds U_a h_j + W_a h_i.
      Var pre = pair_add(matmul_bt(h, tape.parameter(p.add_head)), matmul_bt(h, tape.parameter(p.add_dep)));
      Var hidden = tanh(add(pre, tape.parameter(p.add_bias)));
      return reshape(matmul_bt(hidden, tape.parameter(p.add_out)), n, n);
    }
    case AttentionKind::Bilinear:
      return matmul_bt(matmul(h, tape.parameter(p.bilinear)), h);
    case AttentionKind::Multiplicative:
      return matmul_bt(h, h);
    case AttentionKind::Biaffine: {
      Var dep = matmul_bt(tanh(add(matmul_bt(h, tape.parameter(p.dep_proj)), tape.parameter(p.dep_bias))),
                          tape.parameter(p.dep_reduce));  // n × p
      Var head = matmul_bt(tanh(add(matmul_bt(h, tape.parameter(p.head_proj)), tape.parameter(p.head_bias))),
                           tape.parameter(p.head_reduce));  // n × p
      Var bilinear = matmul_bt(matmul(head, tape.parameter(p.biaffine_weights)), dep);
      return add(bilinear, matmul_bt(head, tape.parameter(p.head_prior)));  // + B·h_j^head per row j
    }
    case AttentionKind::TensorNet: {
      const std::size_t d = p.input, l = p.width;
      Var flat_w = reshape(tape.parameter(p.tensor_weights), d, l * d);
      Var bilinear = pair_bilinear(h, flat_w, l);  // row j*n+i: h_jᵀ W h_i
      Var lin = matmul_bt(h, tape.parameter(p.tensor_linear));
      Var pre = add(add(bilinear, pair_add(lin, lin)), tape.parameter(p.tensor_bias));
      return reshape(matmul_bt(tanh(pre), tape.parameter(p.tensor_out)), n, n);
    }
    case AttentionKind::None:
    case AttentionKind::Edge:
      break;
  }
  throw Error("attention_scores: variant '" + std::string(attention_name(p.config.kind)) +
              "' has no score matrix");
}

Var context_vectors(Var scores, Var encoded) {
  if (scores.rows() != encoded.rows() || scores.cols() != encoded.rows()) {
    throw ShapeError("context_vectors: scores " + shape_string(scores.value().shape()) + " vs " +
                     std::to_string(encoded.rows()) + " positions");
  }
  return matmul(softmax(scores, 1), encoded);
}

Var edge_message_pass(Var h, AttentionParams& p, std::size_t steps) {
  check_width(h, p);
  if (steps == 0) throw Error("edge_message_pass: steps must be >= 1");
  Tape& tape = h.tape();
  const std::size_t n = h.rows();
  const double inv_tokens = 1.0 / static_cast<double>(n > 1 ? n - 1 : 1);
  Var u = tape.parameter(p.edge_head);
  Var w = tape.parameter(p.edge_dep);
  Var b = tape.parameter(p.edge_bias);
  Var src = tape.parameter(p.edge_src);
  Var dst = tape.parameter(p.edge_dst);
  for (std::size_t s = 0; s < steps; ++s) {
    // Row j*n+i: edge(h_j, h_i).
    Var edges = tanh(add(pair_add(matmul_bt(h, u), matmul_bt(h, w)), b));
    Var outgoing = pair_sum(edges, n, true);   // Σ_i edge(h_j, h_i)
    Var incoming = pair_sum(edges, n, false);  // Σ_i edge(h_i, h_j)
    h = scale(add(matmul_bt(outgoing, src), matmul_bt(incoming, dst)), inv_tokens);
  }
  return h;
}

Var augment(Var encoded, AttentionParams& p) {
  switch (p.config.kind) {
    case AttentionKind::None:
      return encoded;
    case AttentionKind::Edge:
      return edge_message_pass(encoded, p, p.config.steps);
    default: {
      Var ctx = context_vectors(attention_scores(encoded, p), encoded);
      const Var parts[] = {encoded, ctx};
      return concat(parts, 1);
    }
  }
}

}  // namespace proptree
