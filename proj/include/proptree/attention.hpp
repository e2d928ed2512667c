// Attention layers placed between the encoder and the head scorer.
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "proptree/encoder.hpp"
#include "proptree/tensor.hpp"

namespace proptree {

enum class AttentionKind { None, Additive, Bilinear, Multiplicative, Biaffine, TensorNet, Edge };

std::string_view attention_name(AttentionKind kind);
AttentionKind parse_attention(std::string_view name);

struct AttentionConfig {
  AttentionKind kind = AttentionKind::None;
  std::size_t steps = 1;  // message-passing steps for Edge
};

/// Only the tensors of the configured variant are allocated.
struct AttentionParams {
  AttentionConfig config;
  std::size_t width = 0;   // l
  std::size_t reduced = 0; // p (biaffine)
  std::size_t input = 0;   // 2d

  // additive
  Tensor add_out, add_head, add_dep, add_bias;  // V_a (1×l), U_a, W_a (l×2d), b_a (1×l)
  // bilinear
  Tensor bilinear;  // 2d × 2d
  // biaffine
  Tensor dep_proj, head_proj;      // U_dep, U_head (l×2d)
  Tensor dep_reduce, head_reduce;  // V_dep, V_head (p×l)
  Tensor biaffine_weights;         // p × p
  Tensor head_prior;               // B (1×p)
  Tensor dep_bias, head_bias;      // 1×l
  // tensor network
  Tensor tensor_weights;  // 2d × l × 2d
  Tensor tensor_linear;   // V_t (l×2d)
  Tensor tensor_out;      // U_t (1×l)
  Tensor tensor_bias;     // b_t (1×l)
  // edge
  Tensor edge_head, edge_dep;  // U_e, W_e (l×2d)
  Tensor edge_bias;            // 1×l
  Tensor edge_src, edge_dst;   // A_src, A_dst (2d×l)

  void collect(NamedParameters& out, const std::string& prefix);
  /// Scorer input width after augmentation.
  std::size_t output_width() const;
};

AttentionParams make_attention(AttentionConfig config, std::size_t input, std::size_t width,
                               std::size_t reduced, Rng& rng);

/// n × n matrix with entry [j][i] = att(h_j, h_i), for the score-based variants.
Var attention_scores(Var encoded, AttentionParams& params);

/// Row j: Σ_i softmax_i(att(h_j, h_i)) · h_i.
Var context_vectors(Var scores, Var encoded);

/// T rounds of h_j ← (1/N)(A_src Σ_i edge(h_j,h_i) + A_dst Σ_i edge(h_i,h_j)),
/// edge(a,b) = tanh(U_e a + W_e b + b_e), with parameters shared across rounds.
/// `tokens` is N, the number of positions excluding the root.
Var edge_message_pass(Var encoded, AttentionParams& params, std::size_t steps);

/// Scorer input: encoded unchanged (None), [h_i ; h*_i] for score-based
/// variants, or the message-passed vectors for Edge.
Var augment(Var encoded, AttentionParams& params);

}  // namespace proptree
