#include "proptree/joint_model.hpp"

namespace proptree {

NamedParameters JointModel::parameters() {
  NamedParameters out;
  encoder.collect(out, "encoder.");
  attention.collect(out, "attention.");
  scorer.collect(out, "scorer.");
  return out;
}

JointModel make_joint_model(const JointShape& shape, EmbeddingTable embeddings, Rng& rng) {
  if (shape.hidden == 0 || shape.scorer_width == 0 || shape.layers == 0) throw Error("model sizes must be positive");
  JointModel m;
  m.shape = shape;
  m.embeddings = std::move(embeddings);
  m.encoder = make_bilstm(m.embeddings.dim(), shape.hidden, shape.layers, rng);
  m.attention = make_attention(shape.attention, 2 * shape.hidden, shape.scorer_width, shape.biaffine_width, rng);
  m.scorer = make_scorer(m.attention.output_width(), shape.scorer_width, rng);
  return m;
}

Var joint_forward(Tape& tape, JointModel& model, const AdDocument& doc, double input_dropout, double layer_dropout,
                  Rng* rng) {
  Var x = embed(tape, doc, model.embeddings, input_dropout, rng);
  Var h = bilstm_forward(x, model.encoder, layer_dropout, rng);
  return joint_log_probs(augment(h, model.attention), model.scorer);
}

JointDistribution joint_predict_distribution(JointModel& model, const AdDocument& doc) {
  Tape tape;
  return JointDistribution::from_log_probs(joint_forward(tape, model, doc, 0.0, 0.0, nullptr).value());
}

PropertyTree read_tree(const AdDocument& doc, const TokenHeadAssignment& assignment) {
  TokenHeadAssignment a = assignment;
  for (std::size_t i = 1; i <= a.length(); ++i) {
    if (a[i].head == 0 && a[i].label != RelationLabel::Skip) a[i].label = RelationLabel::PartOf;
  }
  try {
    return decode_heads_to_tree(doc, a);
  } catch (const Error&) {
    return {};
  }
}

Prediction joint_predict(JointModel& model, const AdDocument& doc) {
  Prediction p;
  if (doc.length() == 0) return p;
  const JointDistribution dist = joint_predict_distribution(model, doc);
  p.greedy = canonical_skips(greedy_decode(dist));
  p.greedy_tree = is_tree(p.greedy);
  p.final = decode_with_edmonds(dist, p.greedy);
  p.tree = read_tree(doc, p.final);
  return p;
}

}  // namespace proptree
