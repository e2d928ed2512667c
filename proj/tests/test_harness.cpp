#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "json.hpp"
#include "proptree/harness.hpp"

using namespace proptree;

namespace {

TrainConfig small_joint(ModelKind kind = ModelKind::Joint) {
  TrainConfig c;
  c.model = kind;
  c.hidden = 6;
  c.scorer_width = 5;
  c.biaffine_width = 3;
  c.steps = 2;
  c.max_epochs = 2;
  c.learning_rate = 1e-2;
  return c;
}

void same_predictions(Model& a, Model& b, const std::vector<AnnotatedDocument>& docs) {
  for (const auto& d : docs) {
    const auto pa = predict(a, d.doc), pb = predict(b, d.doc);
    CHECK(pa.greedy == pb.greedy);
    CHECK(pa.final == pb.final);
    CHECK(skeleton(pa.tree) == skeleton(pb.tree));
  }
}

}  // namespace

TEST_CASE("early stopping") {
  EarlyStopping stop(2);
  const double scores[] = {50, 60, 59, 58};
  std::size_t seen = 0;
  for (double s : scores) {
    stop.observe(s);
    ++seen;
    if (stop.should_stop()) break;
  }
  CHECK(seen == 4);
  CHECK(stop.best_epoch() == 2);
  CHECK(stop.best_score() == 60.0);

  EarlyStopping tie(1);
  CHECK(tie.observe(10));
  CHECK_FALSE(tie.observe(10));
  CHECK(tie.should_stop());
  CHECK(tie.best_epoch() == 1);
}

TEST_CASE("model names") {
  for (auto k : {ModelKind::Joint, ModelKind::JointAttention, ModelKind::JointTwoLayer, ModelKind::CrfLtm,
                 ModelKind::CrfMtt}) {
    CHECK(parse_model_kind(model_kind_name(k)) == k);
  }
  CHECK(is_joint(ModelKind::JointTwoLayer));
  CHECK_FALSE(is_joint(ModelKind::CrfLtm));
  CHECK_THROWS_AS(parse_model_kind("svm"), Error);
}

TEST_CASE("configuration") {
  TrainConfig c;
  CHECK(c.input_dropout() == 0.5);
  c.model = ModelKind::JointTwoLayer;
  CHECK(c.input_dropout() == doctest::Approx(0.3));
  CHECK(c.layer_dropout() == doctest::Approx(0.3));
  CHECK(c.joint_shape().layers == 2);

  std::istringstream text("# tuned\nhidden = 64\nattention=biaffine\ndropout=0.1\nmodel = joint+attention\n\n");
  c.load_overrides(text);
  CHECK(c.hidden == 64);
  CHECK(c.attention == AttentionKind::Biaffine);
  CHECK(c.input_dropout() == doctest::Approx(0.1));
  CHECK_NOTHROW(c.validate());

  const auto back = TrainConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());

  CHECK_THROWS_AS(c.set("colour", "blue"), Error);
  CHECK_THROWS_AS(c.set("hidden", "many"), Error);
  std::istringstream bad("hidden 3\n");
  CHECK_THROWS_AS(c.load_overrides(bad), Error);
  c.scorer_width = 128;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("training log") {
  TrainLog log;
  log.epochs.push_back({1, 3.5, 40.0, 0.1});
  log.epochs.push_back({2, 2.5, 55.0, 0.1});
  log.best_epoch = 2;
  CHECK(log.best_f1() == 55.0);
  const auto csv = log.csv();
  CHECK(csv.rfind("epoch,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("training is deterministic for a seed") {
  const auto docs = fixtures::synthetic(6, 21);
  for (auto kind : {ModelKind::Joint, ModelKind::JointAttention, ModelKind::CrfMtt}) {
    auto cfg = small_joint(kind);
    auto a = train(cfg, docs, docs);
    auto b = train(cfg, docs, docs);
    REQUIRE(a.log.epochs.size() == b.log.epochs.size());
    for (std::size_t k = 0; k < a.log.epochs.size(); ++k) {
      CHECK(a.log.epochs[k].loss == b.log.epochs[k].loss);
      CHECK(a.log.epochs[k].val_f1 == b.log.epochs[k].val_f1);
    }
    same_predictions(a.model, b.model, docs);
  }
}

TEST_CASE("the epoch callback can stop training") {
  const auto docs = fixtures::synthetic(3, 22);
  auto cfg = small_joint();
  cfg.max_epochs = 10;
  std::size_t calls = 0;
  const auto r = train(cfg, docs, {}, [&](const EpochRecord&) { return ++calls < 3; });
  CHECK(calls == 3);
  CHECK(r.log.epochs.size() == 3);
  CHECK_THROWS_AS(train(cfg, {}, docs), Error);
}

TEST_CASE("checkpoints round-trip") {
  const auto docs = fixtures::synthetic(5, 23);
  for (auto kind : {ModelKind::Joint, ModelKind::JointAttention, ModelKind::JointTwoLayer, ModelKind::CrfLtm,
                    ModelKind::CrfMtt}) {
    CAPTURE(model_kind_name(kind));
    auto cfg = small_joint(kind);
    cfg.attention = AttentionKind::TensorNet;
    auto trained = train(cfg, docs, docs);
    std::stringstream buf;
    save_checkpoint(trained.model, buf);
    auto loaded = load_checkpoint(buf);
    CHECK(loaded.config.to_json() == trained.model.config.to_json());
    same_predictions(trained.model, loaded, docs);

    std::string bytes = buf.str();
    std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(truncated), Error);
  }
  std::stringstream junk("not a checkpoint");
  CHECK_THROWS_AS(load_checkpoint(junk), Error);
}

TEST_CASE("gold predictions score perfectly") {
  const auto docs = fixtures::synthetic(10, 24);
  const auto r = evaluate_gold(docs);
  CHECK(r.overall.f1 == 100.0);
  CHECK(r.tree_rate == 100.0);
}

TEST_CASE("prediction JSON") {
  const auto docs = fixtures::synthetic(2, 25);
  auto trained = train(small_joint(), docs, docs);
  const auto p = predict(trained.model, docs[0].doc);
  const auto j = nlohmann::json::parse(prediction_json(docs[0].doc, p));
  CHECK(j.at("id").get<std::string>() == docs[0].doc.id);
}
