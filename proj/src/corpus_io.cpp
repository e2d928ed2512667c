#include <algorithm>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "proptree/data_model.hpp"

namespace proptree {

using nlohmann::json;

namespace {

AnnotatedDocument parse_record(const json& j) {
  AnnotatedDocument out;
  out.doc.id = j.at("id").get<std::string>();
  out.doc.tokens = j.at("tokens").get<std::vector<std::string>>();
  for (const auto& je : j.value("entities", json::array())) {
    Entity e;
    e.id = je.at("id").get<std::string>();
    e.type = parse_type(je.value("type", std::string("untyped")));
    for (const auto& jm : je.at("mentions")) {
      e.mentions.push_back({jm.at("start").get<std::size_t>(), jm.at("end").get<std::size_t>()});
    }
    e.parent = je.value("parent", std::string(kRootId));
    out.tree.entities.push_back(std::move(e));
  }
  validate_tree(out.doc, out.tree);
  return out;
}

json record_json(const AnnotatedDocument& d) {
  json entities = json::array();
  for (const auto& e : d.tree.entities) {
    json mentions = json::array();
    for (const auto& m : e.mentions) mentions.push_back({{"start", m.start}, {"end", m.end}});
    entities.push_back({{"id", e.id},
                        {"type", std::string(type_name(e.type))},
                        {"mentions", mentions},
                        {"parent", e.parent}});
  }
  return {{"id", d.doc.id}, {"tokens", d.doc.tokens}, {"entities", entities}};
}

struct Registry {
  std::mutex mutex;
  std::map<std::string, CorpusReader> readers;
};

Registry& registry() {
  static Registry r;
  static const bool seeded = [] {
    r.readers["jsonl"] = [](std::istream& in) { return read_corpus_jsonl(in); };
    r.readers["conll"] = [](std::istream& in) { return read_corpus_conll(in); };
    return true;
  }();
  (void)seeded;
  return r;
}

}  // namespace

std::vector<AnnotatedDocument> read_corpus_jsonl(std::istream& in) {
  std::vector<AnnotatedDocument> corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    try {
      corpus.push_back(parse_record(json::parse(line)));
    } catch (const std::exception& e) {
      throw Error("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

std::vector<AnnotatedDocument> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus " + path.string());
  return read_corpus_jsonl(in);
}

std::string document_to_json_line(const AnnotatedDocument& doc) { return record_json(doc).dump(); }

void write_corpus_jsonl(std::ostream& out, const std::vector<AnnotatedDocument>& corpus) {
  for (const auto& d : corpus) out << document_to_json_line(d) << '\n';
}

void register_corpus_reader(const std::string& format, CorpusReader reader) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  r.readers[format] = std::move(reader);
}

const CorpusReader& corpus_reader(const std::string& format) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  auto it = r.readers.find(format);
  if (it == r.readers.end()) throw Error("no corpus reader registered for format '" + format + "'");
  return it->second;
}

std::vector<std::string> corpus_formats() {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::vector<std::string> out;
  for (const auto& [name, _] : r.readers) out.push_back(name);
  return out;
}

std::vector<AnnotatedDocument> read_corpus_conll(std::istream& in) {
  std::vector<AnnotatedDocument> corpus;
  std::string line;
  std::size_t line_no = 0;
  std::string pending_id;
  struct Row {
    std::string token;
    std::size_t head;
    RelationLabel label;
    BioTag tag;
  };
  std::vector<Row> rows;
  std::size_t doc_start_line = 1;

  auto flush = [&] {
    if (rows.empty()) return;
    AnnotatedDocument d;
    d.doc.id = pending_id.empty() ? "doc" + std::to_string(corpus.size() + 1) : pending_id;
    TokenHeadAssignment a(rows.size());
    BioSequence tags;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      d.doc.tokens.push_back(rows[i].token);
      a.set(i + 1, rows[i].head, rows[i].label);
      tags.push_back(rows[i].tag);
    }
    try {
      d.tree = decode_heads_to_tree(d.doc, a);
    } catch (const std::exception& e) {
      throw Error("line " + std::to_string(doc_start_line) + ": " + e.what());
    }
    for (auto& e : d.tree.entities) {
      const BioTag t = tags[e.mentions.front().start - 1];
      e.type = t == 0 ? EntityType::Untyped : tag_type(t);
    }
    corpus.push_back(std::move(d));
    rows.clear();
    pending_id.clear();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      doc_start_line = line_no + 1;
      continue;
    }
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (line.find("id") != std::string::npos && eq != std::string::npos) {
        pending_id = line.substr(eq + 1);
        pending_id.erase(0, pending_id.find_first_not_of(' '));
      }
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, '\t');) cols.push_back(c);
    try {
      if (cols.size() < 4) throw Error("expected at least 4 tab-separated columns");
      const std::size_t idx = std::stoul(cols[0]);
      if (idx != rows.size() + 1) throw Error("token index " + cols[0] + " out of sequence");
      Row r{cols[1], std::stoul(cols[2]), parse_label(cols[3]),
            cols.size() > 4 ? parse_bio_tag(cols[4]) : BioTag{0}};
      rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw Error("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  flush();
  return corpus;
}

CorpusSplit split_corpus(const std::vector<AnnotatedDocument>& corpus, std::uint64_t seed) {
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  // Fisher-Yates with an explicit index draw keeps the split identical across
  // standard library implementations.
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(order[i - 1], order[j]);
  }
  const std::size_t n = corpus.size();
  const std::size_t n_val = n * 15 / 100;
  const std::size_t n_test = n * 15 / 100;
  const std::size_t n_train = n - n_val - n_test;
  CorpusSplit s;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& d = corpus[order[k]];
    if (k < n_train) {
      s.train.push_back(d);
    } else if (k < n_train + n_val) {
      s.validation.push_back(d);
    } else {
      s.test.push_back(d);
    }
  }
  return s;
}

}  // namespace proptree
