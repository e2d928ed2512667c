#include "proptree/harness.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace proptree {

namespace {

constexpr std::array<std::string_view, 5> kKindNames = {"joint", "joint+attention", "joint-2layer", "crf+ltm",
                                                         "crf+mtt"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw Error("config: bad value '" + value + "' for " + key);
  return out;
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

ModelKind parse_model_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (name == kKindNames[i]) return static_cast<ModelKind>(i);
  }
  throw Error("unknown model kind '" + std::string(name) + "'");
}

bool is_joint(ModelKind kind) {
  return kind == ModelKind::Joint || kind == ModelKind::JointAttention || kind == ModelKind::JointTwoLayer;
}

double TrainConfig::input_dropout() const {
  if (dropout) return *dropout;
  return model == ModelKind::JointTwoLayer ? 0.3 : 0.5;
}

double TrainConfig::layer_dropout() const { return model == ModelKind::JointTwoLayer ? input_dropout() : 0.0; }

JointShape TrainConfig::joint_shape() const {
  JointShape s;
  s.hidden = hidden;
  s.layers = model == ModelKind::JointTwoLayer ? 2 : 1;
  s.scorer_width = scorer_width;
  s.biaffine_width = biaffine_width;
  if (model == ModelKind::JointAttention) s.attention = AttentionConfig{attention, steps};
  return s;
}

void TrainConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  auto size = [&] { return parse_number<std::size_t>(key, value); };
  auto real = [&] { return parse_number<double>(key, value); };
  if (key == "model") model = parse_model_kind(value);
  else if (key == "attention") attention = parse_attention(value);
  else if (key == "steps") steps = size();
  else if (key == "hidden") hidden = size();
  else if (key == "scorer_width") scorer_width = size();
  else if (key == "biaffine_width") biaffine_width = size();
  else if (key == "learning_rate") learning_rate = real();
  else if (key == "dropout") dropout = value.empty() ? std::nullopt : std::optional<double>(real());
  else if (key == "max_epochs") max_epochs = size();
  else if (key == "patience") patience = size();
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "batch_size") batch_size = size();
  else if (key == "embeddings") embeddings = value;
  else if (key == "crf_lambda") crf_lambda = real();
  else if (key == "edge_c") edge_c = real();
  else if (key == "pipeline_learning_rate") pipeline_learning_rate = real();
  else if (key == "pipeline_epochs") pipeline_epochs = value.empty() ? std::nullopt : std::optional<std::size_t>(size());
  else throw Error("config: unknown key '" + key + "'");
}

void TrainConfig::load_overrides(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(line_no) + ": expected key=value");
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void TrainConfig::load_overrides(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  load_overrides(in);
}

void TrainConfig::validate() const {
  if (hidden == 0 || scorer_width == 0 || biaffine_width == 0 || batch_size == 0 || steps == 0 || max_epochs == 0) {
    throw Error("config: sizes, steps, batch_size and max_epochs must be positive");
  }
  if (scorer_width >= 2 * hidden) throw Error("config: scorer_width must be below twice the hidden size");
  if (!(learning_rate > 0) || !(pipeline_learning_rate > 0)) throw Error("config: learning rates must be positive");
  if (input_dropout() < 0 || input_dropout() >= 1) throw Error("config: dropout must be in [0, 1)");
  if (!(crf_lambda >= 0) || !(edge_c > 0)) throw Error("config: crf_lambda >= 0 and edge_c > 0 required");
}

std::string TrainConfig::to_json() const {
  nlohmann::json j = {{"model", std::string(model_kind_name(model))},
                      {"attention", std::string(attention_name(attention))},
                      {"steps", steps},
                      {"hidden", hidden},
                      {"scorer_width", scorer_width},
                      {"biaffine_width", biaffine_width},
                      {"learning_rate", learning_rate},
                      {"max_epochs", max_epochs},
                      {"patience", patience},
                      {"seed", seed},
                      {"batch_size", batch_size},
                      {"embeddings", embeddings},
                      {"crf_lambda", crf_lambda},
                      {"edge_c", edge_c},
                      {"pipeline_learning_rate", pipeline_learning_rate}};
  if (dropout) j["dropout"] = *dropout;
  if (pipeline_epochs) j["pipeline_epochs"] = *pipeline_epochs;
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  TrainConfig c;
  const auto j = nlohmann::json::parse(text);
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const auto& value = it.value();
    if (value.is_string()) {
      c.set(key, value.get<std::string>());
    } else if (value.is_number_float()) {
      std::ostringstream ss;
      ss.precision(17);
      ss << value.get<double>();
      c.set(key, ss.str());
    } else {
      c.set(key, value.dump());
    }
  }
  return c;
}

double TrainLog::best_f1() const { return best_epoch == 0 ? 0.0 : epochs.at(best_epoch - 1).val_f1; }

std::string TrainLog::csv() const {
  std::ostringstream out;
  out << "epoch,loss,val_f1,seconds,best\n";
  out.precision(6);
  out << std::fixed;
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.loss << ',' << e.val_f1 << ',' << e.seconds << ',' << (e.epoch == best_epoch ? 1 : 0)
        << '\n';
  }
  return out.str();
}

bool EarlyStopping::observe(double score) {
  ++epochs_;
  if (score > best_) {
    best_ = score;
    best_epoch_ = epochs_;
    return true;
  }
  return false;
}

DocumentPrediction predict(Model& model, const AdDocument& doc) {
  DocumentPrediction out;
  if (is_joint(model.config.model)) {
    Prediction p = joint_predict(model.joint, doc);
    out.greedy = std::move(p.greedy);
    out.final = std::move(p.final);
    out.greedy_tree = p.greedy_tree;
    out.tree = std::move(p.tree);
    if (doc.length() == 0) out.greedy = out.final = TokenHeadAssignment(0);
    return out;
  }
  PipelineOutput p = pipeline_predict(doc, model.pipeline);
  out.tree = std::move(p.tree);
  out.final = encode_tree_to_heads(doc, out.tree);
  out.greedy = out.final;
  out.greedy_tree = p.greedy_tree;
  return out;
}

MetricsReport evaluate(Model& model, const std::vector<AnnotatedDocument>& docs) {
  std::vector<DocumentScore> scores(docs.size());
  for (std::size_t k = 0; k < docs.size(); ++k) {
    const auto gold = encode_tree_to_heads(docs[k].doc, docs[k].tree);
    const auto p = predict(model, docs[k].doc);
    scores[k] = {score_edges(p.final, gold), p.greedy_tree};
  }
  return aggregate(scores);
}

MetricsReport evaluate_gold(const std::vector<AnnotatedDocument>& docs) {
  std::vector<DocumentScore> scores;
  for (const auto& d : docs) {
    const auto gold = encode_tree_to_heads(d.doc, d.tree);
    scores.push_back({score_edges(gold, gold), is_tree(gold)});
  }
  return aggregate(scores);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

TrainResult train_joint(const TrainConfig& config, const std::vector<AnnotatedDocument>& train_docs,
                        const std::vector<AnnotatedDocument>& validation, const EpochCallback& on_epoch) {
  Rng rng(config.seed);
  EmbeddingTable table = config.embeddings.empty()
                             ? random_embeddings(train_docs, config.hidden, rng)
                             : load_embeddings(config.embeddings, train_docs, config.hidden, rng);
  TrainResult result;
  result.model.config = config;
  result.model.joint = make_joint_model(config.joint_shape(), std::move(table), rng);
  JointModel& model = result.model.joint;

  NamedParameters named = model.parameters();
  std::vector<Tensor*> params;
  for (auto& [_, t] : named) params.push_back(t);
  std::vector<std::vector<double>> best(params.size());
  auto snapshot = [&] {
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto v = params[k]->values();
      best[k].assign(v.begin(), v.end());
    }
  };
  snapshot();

  AdamState adam(AdamConfig{config.learning_rate});
  EarlyStopping stopper(config.patience);
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < train_docs.size(); ++k) {
    if (train_docs[k].doc.length() > 0) order.push_back(k);
  }
  if (order.empty()) throw Error("train: no non-empty training documents");
  std::vector<TokenHeadAssignment> gold(train_docs.size());
  for (auto k : order) gold[k] = encode_tree_to_heads(train_docs[k].doc, train_docs[k].tree);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = Clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t pending = 0;
    for (auto* p : params) p->zero_grad();
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const auto k = order[pos];
      Tape tape;
      Var log_probs =
          joint_forward(tape, model, train_docs[k].doc, config.input_dropout(), config.layer_dropout(), &rng);
      Var loss = head_selection_loss(log_probs, gold[k]);
      total += loss.scalar();
      tape.backward(loss);
      if (++pending == config.batch_size || pos + 1 == order.size()) {
        adam_step(params, adam);
        for (auto* p : params) p->zero_grad();
        pending = 0;
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = total / static_cast<double>(order.size());
    rec.val_f1 = evaluate(result.model, validation).overall.f1;
    rec.seconds = seconds_since(start);
    result.log.epochs.push_back(rec);
    if (stopper.observe(rec.val_f1)) snapshot();
    result.log.best_epoch = stopper.best_epoch();
    const bool go_on = !on_epoch || on_epoch(rec);
    if (!go_on || stopper.should_stop()) break;
  }
  for (std::size_t k = 0; k < params.size(); ++k) std::copy(best[k].begin(), best[k].end(), params[k]->values().begin());
  return result;
}

TrainResult train_pipeline(const TrainConfig& config, const std::vector<AnnotatedDocument>& train_docs,
                           const std::vector<AnnotatedDocument>& validation, const EpochCallback& on_epoch) {
  const auto start = Clock::now();
  TrainResult result;
  result.model.config = config;
  PipelineModel& pm = result.model.pipeline;
  pm.kind = config.model == ModelKind::CrfLtm ? EdgeModelKind::Ltm : EdgeModelKind::Mtt;
  const std::size_t passes = config.pipeline_epochs.value_or(config.max_epochs);
  pm.crf = crf_train(train_docs, {config.crf_lambda, config.pipeline_learning_rate, passes, config.seed});
  const EdgeTrainConfig edge{config.edge_c, config.pipeline_learning_rate, passes, config.seed};
  if (pm.kind == EdgeModelKind::Ltm) {
    pm.ltm = ltm_train(train_docs, edge);
  } else {
    pm.mtt = mtt_train(train_docs, edge);
  }
  std::vector<CrfExample> examples;
  for (const auto& d : train_docs) {
    if (d.doc.length() > 0) examples.push_back({&d.doc, bio_encode(d.doc, d.tree)});
  }
  EpochRecord rec;
  rec.epoch = passes;
  rec.loss = examples.empty() ? 0.0
                              : -crf_objective(examples, pm.crf, 0.0) / static_cast<double>(examples.size());
  rec.val_f1 = evaluate(result.model, validation).overall.f1;
  rec.seconds = seconds_since(start);
  result.log.epochs.push_back(rec);
  result.log.best_epoch = 1;
  if (on_epoch) on_epoch(rec);
  return result;
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<AnnotatedDocument>& train_docs,
                  const std::vector<AnnotatedDocument>& validation_docs, const EpochCallback& on_epoch) {
  config.validate();
  if (train_docs.empty()) throw Error("train: empty training split");
  const auto& validation = validation_docs.empty() ? train_docs : validation_docs;
  return is_joint(config.model) ? train_joint(config, train_docs, validation, on_epoch)
                                : train_pipeline(config, train_docs, validation, on_epoch);
}

std::string prediction_json(const AdDocument& doc, const DocumentPrediction& p) {
  nlohmann::json j = nlohmann::json::parse(document_to_json_line({doc, p.tree}));
  nlohmann::json arcs = nlohmann::json::array();
  for (std::size_t i = 1; i <= p.final.length(); ++i) {
    arcs.push_back({{"head", p.final[i].head}, {"label", std::string(label_name(p.final[i].label))}});
  }
  j["assignment"] = std::move(arcs);
  j["greedy_tree"] = p.greedy_tree;
  return j.dump();
}

}  // namespace proptree
