#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "json.hpp"
#include "proptree/harness.hpp"

namespace proptree {

namespace {

constexpr char kMagic[4] = {'P', 'T', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoints are written little-endian");

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error(std::string("checkpoint truncated reading ") + what);
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, std::uint64_t limit, const char* what) {
  const auto n = get<std::uint64_t>(in, what);
  if (n > limit) throw Error(std::string("checkpoint: implausible length for ") + what);
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw Error(std::string("checkpoint truncated reading ") + what);
  return s;
}

using TensorList = std::vector<std::pair<std::string, const Tensor*>>;

TensorList tensors_of(const Model& m) {
  TensorList out;
  if (is_joint(m.config.model)) {
    auto& joint = const_cast<JointModel&>(m.joint);
    out.emplace_back("embeddings", &joint.embeddings.matrix);
    for (auto& [name, t] : joint.parameters()) out.emplace_back(name, t);
  } else {
    out.emplace_back("crf.emission", &m.pipeline.crf.emission);
    out.emplace_back("crf.transition", &m.pipeline.crf.transition);
    out.emplace_back("crf.start", &m.pipeline.crf.start);
    const EdgeWeights& w = m.pipeline.kind == EdgeModelKind::Ltm ? m.pipeline.ltm.linear : m.pipeline.mtt.linear;
    out.emplace_back("edge.weights", &w.weights);
  }
  return out;
}

FeatureIndex index_from(const nlohmann::json& names) {
  FeatureIndex f;
  for (const auto& n : names) f.add(n.get<std::string>());
  return f;
}

}  // namespace

void save_checkpoint(const Model& model, std::ostream& out) {
  nlohmann::json manifest = {{"format_version", kVersion},
                             {"model", std::string(model_kind_name(model.config.model))},
                             {"config", nlohmann::json::parse(model.config.to_json())}};
  if (is_joint(model.config.model)) {
    manifest["vocabulary"] = model.joint.embeddings.vocab.tokens();
  } else {
    manifest["crf_features"] = model.pipeline.crf.features.names();
    const bool ltm = model.pipeline.kind == EdgeModelKind::Ltm;
    manifest["edge_features"] = (ltm ? model.pipeline.ltm.linear : model.pipeline.mtt.linear).features.names();
    if (ltm && model.pipeline.ltm.constant_probability) {
      manifest["ltm_constant_probability"] = *model.pipeline.ltm.constant_probability;
    }
  }
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put_string(out, manifest.dump());
  const auto tensors = tensors_of(model);
  put<std::uint64_t>(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t->shape().size()));
    for (auto d : t->shape()) put<std::uint64_t>(out, d);
    auto v = t->values();
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!out) throw Error("checkpoint: write failed");
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  save_checkpoint(model, out);
}

Model load_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw Error("not a checkpoint (bad magic)");
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  const auto manifest = nlohmann::json::parse(get_string(in, 1u << 30, "manifest"));

  std::map<std::string, Tensor> stored;
  const auto count = get<std::uint64_t>(in, "tensor count");
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = get<std::uint32_t>(in, "tensor name");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw Error("checkpoint truncated reading tensor name");
    const auto rank = get<std::uint32_t>(in, "tensor rank");
    Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>(in, "tensor dims");
    Tensor t(shape, true);
    auto v = t.values();
    if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)))) {
      throw Error("checkpoint truncated in tensor " + name);
    }
    stored.emplace(std::move(name), std::move(t));
  }

  Model m;
  m.config = TrainConfig::from_json(manifest.at("config").dump());
  if (is_joint(m.config.model)) {
    EmbeddingTable table;
    const auto& vocab = manifest.at("vocabulary");
    if (vocab.empty() || vocab[0].get<std::string>() != Vocabulary::kUnkToken) {
      throw Error("checkpoint: vocabulary must start with the unknown-token entry");
    }
    for (std::size_t i = 1; i < vocab.size(); ++i) table.vocab.add(vocab[i].get<std::string>());
    table.matrix = Tensor({table.vocab.size(), m.config.hidden});
    Rng rng(0);
    m.joint = make_joint_model(m.config.joint_shape(), std::move(table), rng);
    m.joint.embeddings.matrix.set_requires_grad(false);
  } else {
    PipelineModel& pm = m.pipeline;
    pm.kind = m.config.model == ModelKind::CrfLtm ? EdgeModelKind::Ltm : EdgeModelKind::Mtt;
    pm.crf.features = index_from(manifest.at("crf_features"));
    EdgeWeights& w = pm.kind == EdgeModelKind::Ltm ? pm.ltm.linear : pm.mtt.linear;
    w.features = index_from(manifest.at("edge_features"));
    if (manifest.contains("ltm_constant_probability")) {
      pm.ltm.constant_probability = manifest["ltm_constant_probability"].get<double>();
    }
    pm.crf.emission = Tensor(stored.at("crf.emission").shape());
    pm.crf.transition = Tensor(stored.at("crf.transition").shape());
    pm.crf.start = Tensor(stored.at("crf.start").shape());
    w.weights = Tensor(stored.at("edge.weights").shape());
    if (pm.crf.emission.rows() < pm.crf.features.size() || w.weights.cols() < w.features.size()) {
      throw Error("checkpoint: feature lists and weight tensors disagree");
    }
  }
  const auto expected = tensors_of(m);
  if (expected.size() != stored.size()) {
    throw Error("checkpoint holds " + std::to_string(stored.size()) + " tensors, model expects " +
                std::to_string(expected.size()));
  }
  for (const auto& [name, target] : expected) {
    auto it = stored.find(name);
    if (it == stored.end()) throw Error("checkpoint is missing tensor " + name);
    if (it->second.shape() != target->shape()) {
      throw ShapeError("checkpoint tensor " + name + " has shape " + shape_string(it->second.shape()) +
                       ", model expects " + shape_string(target->shape()));
    }
    auto src = it->second.values();
    auto* dst = const_cast<Tensor*>(target);
    std::copy(src.begin(), src.end(), dst->values().begin());
  }
  return m;
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace proptree
