#include <algorithm>
#include <string>
#include <vector>

#include "proptree/data_model.hpp"

namespace proptree {

namespace {

using Phrase = std::vector<std::string>;

struct Lexicon {
  std::vector<Phrase> heads;
  std::vector<std::string> modifiers;
  std::vector<EntityType> child_types;
};

const Lexicon& lexicon(EntityType type) {
  static const std::vector<Lexicon> table = [] {
    std::vector<Lexicon> t(kNumEntityTypes);
    t[static_cast<int>(EntityType::Property)] = {
        {{"house"}, {"apartment"}, {"villa"}, {"bungalow"}, {"cottage"}, {"residence"}, {"mansion"},
         {"duplex"}, {"penthouse"}, {"farmhouse"}},
        {"large", "spacious", "charming", "modern", "detached", "renovated", "cosy", "beautiful"},
        {EntityType::Floor, EntityType::Space, EntityType::Field, EntityType::ExtraBuilding}};
    t[static_cast<int>(EntityType::Floor)] = {
        {{"ground", "floor"}, {"first", "floor"}, {"second", "floor"}, {"top", "floor"}, {"attic"},
         {"basement"}, {"cellar"}, {"mezzanine"}},
        {"renovated", "finished", "insulated"},
        {EntityType::Space}};
    t[static_cast<int>(EntityType::Space)] = {
        {{"kitchen"}, {"bathroom"}, {"bedroom"}, {"living", "room"}, {"dining", "room"}, {"hall"},
         {"office"}, {"laundry", "room"}, {"storage", "room"}, {"guest", "room"}, {"study"},
         {"playroom"}, {"veranda"}, {"toilet", "room"}},
        {"spacious", "bright", "large", "small", "open", "modern", "cosy", "fitted"},
        {EntityType::Subspace}};
    t[static_cast<int>(EntityType::Subspace)] = {
        {{"shower"}, {"toilet"}, {"bathtub"}, {"sink"}, {"closet"}, {"fireplace"},
         {"walk-in", "closet"}, {"washbasin"}, {"built-in", "wardrobe"}, {"dishwasher"},
         {"bike", "wall", "bracket"}, {"gate"}, {"workbench"}, {"sauna"}, {"oven"}, {"jacuzzi"}},
        {"separate", "double", "new", "italian", "electric"},
        {}};
    t[static_cast<int>(EntityType::Field)] = {
        {{"garden"}, {"terrace"}, {"patio"}, {"driveway"}, {"lawn"}, {"balcony"},
         {"roof", "terrace"}, {"orchard"}, {"courtyard"}},
        {"sunny", "private", "south-facing", "landscaped"},
        {EntityType::Subspace}};
    t[static_cast<int>(EntityType::ExtraBuilding)] = {
        {{"garage"}, {"garden", "house"}, {"shed"}, {"carport"}, {"stable"}, {"workshop"},
         {"pool", "house"}},
        {"double", "detached", "wooden"},
        {EntityType::Subspace, EntityType::Space}};
    return t;
  }();
  return table[static_cast<int>(type)];
}

const std::vector<Phrase>& distractors() {
  static const std::vector<Phrase> d = {
      {"Close", "to", "the", "city", "center", "."},
      {"Available", "immediately", "."},
      {"Contact", "us", "for", "a", "visit", "."},
      {"Quiet", "neighbourhood", "with", "good", "access", "to", "public", "transport", "."},
      {"Energy", "label", "B", "."},
      {"Recently", "painted", "and", "ready", "to", "move", "in", "."},
  };
  return d;
}

// Sentences in which an entity word does not denote part of the property.
const std::vector<Phrase>& ambiguity_templates() {
  static const std::vector<Phrase> t = {
      {"Parking", "in", "the", "*", "of", "the", "neighbours", "is", "possible", "."},
      {"The", "previous", "owner", "removed", "the", "*", "."},
      {"A", "*", "can", "be", "added", "on", "request", "."},
      {"No", "*", "included", "."},
  };
  return t;
}

struct Node {
  EntityType type = EntityType::Untyped;
  Phrase first;
  Phrase again;
  std::size_t parent = 0;  // index into nodes; 0 is the property itself for depth-1 nodes
  std::vector<std::size_t> children;
  std::vector<EntityMention> mentions;
};

class Generator {
 public:
  Generator(const SyntheticOptions& opt, Rng& rng) : opt_(opt), rng_(rng) {}

  AnnotatedDocument build(std::string id) {
    make_node(EntityType::Property, kNone, 0);
    grow(0, 0);

    emit({"The"});
    mention(0, false);
    emit({pick(verbs(EntityType::Property))});
    list(0);
    emit({"."});
    maybe_extra_sentences();
    for (std::size_t q = 0; q < deferred_.size(); ++q) {
      const std::size_t d = deferred_[q];
      emit({"The"});
      mention(d, true);
      emit({pick(verbs(nodes_[d].type))});
      list(d);
      emit({"."});
      maybe_extra_sentences();
    }

    AnnotatedDocument out;
    out.doc.id = std::move(id);
    out.doc.tokens = tokens_;
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      Entity e;
      e.id = "e" + std::to_string(k + 1);
      e.type = nodes_[k].type;
      e.mentions = nodes_[k].mentions;
      e.parent = k == 0 ? std::string(kRootId) : "e" + std::to_string(nodes_[k].parent + 1);
      out.tree.entities.push_back(std::move(e));
    }
    return out;
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  const std::string& pick(const std::vector<std::string>& v) { return v[rng_() % v.size()]; }
  bool coin(double p) { return std::uniform_real_distribution<double>(0, 1)(rng_) < p; }

  static const std::vector<std::string>& verbs(EntityType type) {
    static const std::vector<std::string> property = {"includes", "offers", "has", "comprises"};
    static const std::vector<std::string> other = {"has", "contains", "features", "offers"};
    return type == EntityType::Property ? property : other;
  }

  std::size_t make_node(EntityType type, std::size_t parent, std::size_t depth) {
    const Lexicon& lex = lexicon(type);
    Phrase head;
    for (int attempt = 0; attempt < 20; ++attempt) {
      head = lex.heads[rng_() % lex.heads.size()];
      if (std::find(used_heads_.begin(), used_heads_.end(), head) == used_heads_.end()) break;
    }
    used_heads_.push_back(head);
    Node node;
    node.type = type;
    node.parent = parent == kNone ? 0 : parent;
    node.again = head;
    if (type == EntityType::Property) {
      static const std::vector<std::string> synonyms = {"home", "property", "dwelling"};
      if (coin(0.5)) node.again = {pick(synonyms)};
    }
    if (!lex.modifiers.empty() && coin(depth == 0 ? 0.7 : 0.4)) node.first.push_back(pick(lex.modifiers));
    if (type == EntityType::Space && head.size() == 1 && (head[0] == "bedroom" || head[0] == "bathroom") &&
        coin(0.5)) {
      static const std::vector<std::string> counts = {"2", "3", "4"};
      node.first.insert(node.first.begin(), pick(counts));
      head[0] += "s";
      node.again = head;
    }
    node.first.insert(node.first.end(), head.begin(), head.end());
    nodes_.push_back(std::move(node));
    const std::size_t idx = nodes_.size() - 1;
    if (parent != kNone) nodes_[parent].children.push_back(idx);
    return idx;
  }

  void grow(std::size_t idx, std::size_t depth) {
    const auto& types = lexicon(nodes_[idx].type).child_types;
    if (types.empty() || depth >= 3) return;
    std::size_t count;
    if (depth == 0) {
      count = 2 + rng_() % std::max<std::size_t>(1, opt_.max_children);
    } else {
      count = coin(0.4) ? 0 : 1 + rng_() % std::max<std::size_t>(1, opt_.max_children);
    }
    for (std::size_t c = 0; c < count; ++c) {
      const EntityType t = types[rng_() % types.size()];
      const std::size_t child = make_node(t, idx, depth + 1);
      grow(child, depth + 1);
    }
  }

  void emit(std::initializer_list<std::string> words) {
    for (const auto& w : words) tokens_.push_back(w);
  }

  void mention(std::size_t idx, bool again) {
    const Phrase& p = again ? nodes_[idx].again : nodes_[idx].first;
    const std::size_t start = tokens_.size() + 1;
    for (const auto& w : p) tokens_.push_back(w);
    nodes_[idx].mentions.push_back({start, tokens_.size() + 1});
  }

  // Lists the children of `idx`. A child with descendants is either described
  // inline ("a kitchen with a sink", or in parentheses when more siblings
  // follow) or in a later sentence; a later description of any child but the
  // last makes part-of arcs cross.
  void list(std::size_t idx) {
    const auto kids = nodes_[idx].children;
    for (std::size_t k = 0; k < kids.size(); ++k) {
      if (k > 0) emit({k + 1 == kids.size() ? "and" : ","});
      const Node& kid = nodes_[kids[k]];
      const bool counted = !kid.first.empty() && std::isdigit(static_cast<unsigned char>(kid.first[0][0]));
      if (!counted) emit({"a"});
      mention(kids[k], false);
      if (nodes_[kids[k]].children.empty()) continue;
      if (coin(opt_.deferred_description)) {
        deferred_.push_back(kids[k]);
      } else if (k + 1 == kids.size()) {
        emit({"with"});
        list(kids[k]);
      } else {
        emit({"(", "with"});
        list(kids[k]);
        emit({")"});
      }
    }
  }

  void maybe_extra_sentences() {
    if (coin(0.25)) {
      const auto& d = distractors()[rng_() % distractors().size()];
      tokens_.insert(tokens_.end(), d.begin(), d.end());
    }
    if (opt_.lexical_ambiguity > 0 && coin(opt_.lexical_ambiguity)) {
      const auto& tpl = ambiguity_templates()[rng_() % ambiguity_templates().size()];
      static const std::vector<EntityType> kinds = {EntityType::Space, EntityType::Field,
                                                    EntityType::ExtraBuilding, EntityType::Subspace};
      const Lexicon& lex = lexicon(kinds[rng_() % kinds.size()]);
      std::string word;
      do {
        const auto& h = lex.heads[rng_() % lex.heads.size()];
        word = h.size() == 1 ? h[0] : "";
      } while (word.empty());
      for (const auto& w : tpl) tokens_.push_back(w == "*" ? word : w);
    }
  }

  const SyntheticOptions& opt_;
  Rng& rng_;
  std::vector<Node> nodes_;
  std::vector<Phrase> used_heads_;
  std::vector<std::size_t> deferred_;
  std::vector<std::string> tokens_;
};

}  // namespace

std::vector<AnnotatedDocument> generate_synthetic_corpus(const SyntheticOptions& options) {
  Rng rng(options.seed);
  std::vector<AnnotatedDocument> corpus;
  corpus.reserve(options.documents);
  for (std::size_t k = 0; k < options.documents; ++k) {
    Generator g(options, rng);
    corpus.push_back(g.build("syn-" + std::to_string(options.seed) + "-" + std::to_string(k + 1)));
  }
  return corpus;
}

}  // namespace proptree
