#include "proptree/data_model.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace proptree {

namespace {

constexpr std::array<std::string_view, kNumLabels> kLabelNames = {"part-of", "segment", "equivalent",
                                                                  "skip"};
constexpr std::array<std::string_view, kNumEntityTypes + 1> kTypeNames = {
    "property", "floor", "space", "subspace", "field", "extra building", "untyped"};
constexpr std::array<std::string_view, kNumEntityTypes + 1> kTypeTags = {
    "PROPERTY", "FLOOR", "SPACE", "SUBSPACE", "FIELD", "EXTRA_BUILDING", "UNTYPED"};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view label_name(RelationLabel label) { return kLabelNames[label_index(label)]; }

RelationLabel parse_label(std::string_view name) {
  const std::string l = lower(name);
  for (auto label : kAllLabels) {
    if (l == label_name(label)) return label;
  }
  if (l == "part_of" || l == "partof") return RelationLabel::PartOf;
  throw Error("unknown relation label '" + std::string(name) + "'");
}

std::string_view type_name(EntityType type) { return kTypeNames[static_cast<std::size_t>(type)]; }
std::string_view type_tag(EntityType type) { return kTypeTags[static_cast<std::size_t>(type)]; }

EntityType parse_type(std::string_view name) {
  std::string l = lower(name);
  std::replace(l.begin(), l.end(), '_', ' ');
  std::replace(l.begin(), l.end(), '-', ' ');
  for (std::size_t t = 0; t < kTypeNames.size(); ++t) {
    if (l == kTypeNames[t]) return static_cast<EntityType>(t);
  }
  if (l == "extrabuilding") return EntityType::ExtraBuilding;
  throw Error("unknown entity type '" + std::string(name) + "'");
}

const Entity* PropertyTree::find(std::string_view id) const {
  for (const auto& e : entities) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

TokenHeadAssignment::TokenHeadAssignment(std::size_t num_tokens) : arcs_(num_tokens + 1) {
  for (std::size_t i = 0; i <= num_tokens; ++i) arcs_[i] = {i, RelationLabel::Skip};
}

void TokenHeadAssignment::validate() const {
  const std::size_t n = length();
  for (std::size_t i = 1; i <= n; ++i) {
    const Arc& a = arcs_[i];
    if (a.head > n) {
      throw Error("token " + std::to_string(i) + " has head " + std::to_string(a.head) +
                  " outside 0.." + std::to_string(n));
    }
    const bool self = a.head == i;
    if ((a.label == RelationLabel::Skip) != self) {
      throw Error("token " + std::to_string(i) + ": skip label and self head must coincide");
    }
  }
}

// ---------------------------------------------------------------------------
// Validation

namespace {

void validate_spans(const AdDocument& doc, const PropertyTree& tree) {
  const std::size_t n = doc.length();
  std::vector<const Entity*> owner(n + 2, nullptr);
  for (const auto& e : tree.entities) {
    if (e.mentions.empty()) throw Error("entity '" + e.id + "' has no mentions");
    for (const auto& m : e.mentions) {
      if (m.start < 1 || m.start >= m.end || m.end > n + 1) {
        throw Error("entity '" + e.id + "' mention [" + std::to_string(m.start) + "," +
                    std::to_string(m.end) + ") outside document of " + std::to_string(n) +
                    " tokens");
      }
      for (std::size_t t = m.start; t < m.end; ++t) {
        if (owner[t] != nullptr) {
          throw Error("overlapping mentions at token " + std::to_string(t) + " (entities '" +
                      owner[t]->id + "' and '" + e.id + "')");
        }
        owner[t] = &e;
      }
    }
  }
}

std::vector<EntityMention> sorted_mentions(const Entity& e) {
  auto ms = e.mentions;
  std::sort(ms.begin(), ms.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  return ms;
}

}  // namespace

void validate_tree(const AdDocument& doc, const PropertyTree& tree) {
  if (doc.length() == 0) throw Error("document '" + doc.id + "' has no tokens");
  for (const auto& tok : doc.tokens) {
    if (tok.empty() || tok.find_first_of(" \t\r\n") != std::string::npos) {
      throw Error("document '" + doc.id + "' has an empty or whitespace-bearing token");
    }
  }
  std::map<std::string_view, const Entity*> by_id;
  for (const auto& e : tree.entities) {
    if (e.id.empty() || e.id == kRootId) throw Error("invalid entity id '" + e.id + "'");
    if (!by_id.emplace(e.id, &e).second) throw Error("duplicate entity id '" + e.id + "'");
  }
  validate_spans(doc, tree);
  for (const auto& e : tree.entities) {
    if (e.parent != kRootId && !by_id.contains(e.parent)) {
      throw Error("entity '" + e.id + "' has unknown parent '" + e.parent + "'");
    }
    // Walk up; more steps than entities means a cycle.
    std::string_view cur = e.id;
    for (std::size_t steps = 0; cur != kRootId; ++steps) {
      if (steps > tree.entities.size()) {
        throw Error("parent links of entity '" + e.id + "' do not reach ROOT (cycle)");
      }
      cur = by_id.at(cur)->parent;
    }
  }
}

TreeSkeleton skeleton(const PropertyTree& tree) {
  TreeSkeleton sk;
  for (const auto& e : tree.entities) {
    EntityMention parent_main{0, 0};
    if (const Entity* p = tree.find(e.parent)) parent_main = sorted_mentions(*p).front();
    sk.entities.emplace_back(sorted_mentions(e), parent_main);
  }
  std::sort(sk.entities.begin(), sk.entities.end(), [](const auto& a, const auto& b) {
    return a.first.front().start < b.first.front().start;
  });
  return sk;
}

// ---------------------------------------------------------------------------
// Head encoding

TokenHeadAssignment encode_tree_to_heads(const AdDocument& doc, const PropertyTree& tree) {
  validate_tree(doc, tree);
  TokenHeadAssignment out(doc.length());
  for (const auto& e : tree.entities) {
    const auto mentions = sorted_mentions(e);
    for (const auto& m : mentions) {
      for (std::size_t t = m.start; t < m.end; ++t) {
        if (t != m.main_token()) out.set(t, m.main_token(), RelationLabel::Segment);
      }
    }
    const std::size_t main = mentions.front().main_token();
    std::size_t parent_main = 0;
    if (const Entity* p = tree.find(e.parent)) parent_main = sorted_mentions(*p).front().main_token();
    out.set(main, parent_main, RelationLabel::PartOf);
    for (std::size_t k = 1; k < mentions.size(); ++k) {
      out.set(mentions[k].main_token(), main, RelationLabel::Equivalent);
    }
  }
  return out;
}

namespace {

std::string cycle_report(const std::vector<std::size_t>& path) {
  std::ostringstream s;
  s << "cycle through tokens ";
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) s << " -> ";
    s << path[i];
  }
  return s.str();
}

}  // namespace

PropertyTree decode_heads_to_tree(const AdDocument& doc, const TokenHeadAssignment& a) {
  const std::size_t n = doc.length();
  if (a.length() != n) {
    throw Error("assignment covers " + std::to_string(a.length()) + " tokens, document has " +
                std::to_string(n));
  }
  a.validate();
  auto label = [&](std::size_t i) { return a[i].label; };

  // Follows a chain of edges with the given label until it leaves the label;
  // returns the token it lands on.
  auto follow = [&](std::size_t start, RelationLabel via) {
    std::vector<std::size_t> path{start};
    std::size_t cur = start;
    while (cur != 0 && label(cur) == via) {
      cur = a[cur].head;
      if (std::find(path.begin(), path.end(), cur) != path.end()) {
        path.push_back(cur);
        throw Error(cycle_report(path));
      }
      path.push_back(cur);
    }
    return cur;
  };

  // Mention main tokens and their members.
  std::map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t i = 1; i <= n; ++i) {
    if (label(i) == RelationLabel::PartOf || label(i) == RelationLabel::Equivalent) {
      members[i].push_back(i);
    }
  }
  for (std::size_t i = 1; i <= n; ++i) {
    if (label(i) != RelationLabel::Segment) continue;
    const std::size_t main = follow(i, RelationLabel::Segment);
    if (main == 0 || label(main) == RelationLabel::Skip) {
      throw Error("segment token " + std::to_string(i) + " does not attach to a mention");
    }
    members[main].push_back(i);
  }
  // Resolves any token that belongs to a mention to that mention's main token.
  auto mention_of = [&](std::size_t tok) -> std::size_t {
    if (tok == 0) return 0;
    if (label(tok) == RelationLabel::Skip) {
      throw Error("edge points at skip token " + std::to_string(tok));
    }
    return label(tok) == RelationLabel::Segment ? follow(tok, RelationLabel::Segment) : tok;
  };

  // Each mention's entity representative: the part-of mention reached through
  // equivalent links.
  std::map<std::size_t, std::size_t> representative;
  for (const auto& [main, _] : members) {
    std::vector<std::size_t> path{main};
    std::size_t cur = main;
    while (label(cur) == RelationLabel::Equivalent) {
      const std::size_t next = mention_of(a[cur].head);
      if (next == 0) throw Error("equivalent edge from token " + std::to_string(cur) + " to root");
      if (std::find(path.begin(), path.end(), next) != path.end()) {
        path.push_back(next);
        throw Error(cycle_report(path));
      }
      path.push_back(next);
      cur = next;
    }
    representative[main] = cur;
  }

  // Entities ordered by the position of their main mention.
  std::vector<std::size_t> reps;
  for (const auto& [main, rep] : representative) {
    if (main == rep) reps.push_back(main);
  }
  std::map<std::size_t, std::string> entity_id;
  for (std::size_t k = 0; k < reps.size(); ++k) entity_id[reps[k]] = "e" + std::to_string(k + 1);

  auto span_of = [&](std::size_t main) {
    const auto& mem = members.at(main);
    const auto [lo, hi] = std::minmax_element(mem.begin(), mem.end());
    return EntityMention{*lo, *hi + 1};
  };

  PropertyTree tree;
  std::map<std::size_t, std::size_t> parent_rep;
  for (std::size_t rep : reps) {
    Entity e;
    e.id = entity_id[rep];
    e.type = EntityType::Untyped;
    e.mentions.push_back(span_of(rep));
    for (const auto& [main, r] : representative) {
      if (r == rep && main != rep) e.mentions.push_back(span_of(main));
    }
    std::sort(e.mentions.begin() + 1, e.mentions.end(),
              [](const auto& x, const auto& y) { return x.start < y.start; });
    const std::size_t head_mention = mention_of(a[rep].head);
    const std::size_t prep = head_mention == 0 ? 0 : representative.at(head_mention);
    parent_rep[rep] = prep;
    e.parent = prep == 0 ? std::string(kRootId) : entity_id.at(prep);
    tree.entities.push_back(std::move(e));
  }
  for (std::size_t rep : reps) {
    std::vector<std::size_t> path{rep};
    for (std::size_t cur = parent_rep[rep]; cur != 0; cur = parent_rep[cur]) {
      if (std::find(path.begin(), path.end(), cur) != path.end()) {
        path.push_back(cur);
        throw Error(cycle_report(path));
      }
      path.push_back(cur);
    }
  }
  return tree;
}

// ---------------------------------------------------------------------------
// BIO

BioTag begin_tag(EntityType type) { return static_cast<BioTag>(1 + 2 * static_cast<int>(type)); }
BioTag inside_tag(EntityType type) { return static_cast<BioTag>(2 + 2 * static_cast<int>(type)); }
bool is_begin(BioTag tag) { return tag != 0 && tag % 2 == 1; }
bool is_inside(BioTag tag) { return tag != 0 && tag % 2 == 0; }
EntityType tag_type(BioTag tag) {
  if (tag == 0) return EntityType::Untyped;
  return static_cast<EntityType>((tag - 1) / 2);
}

std::string bio_tag_name(BioTag tag) {
  if (tag == 0) return "O";
  if (tag >= kNumBioTags) throw Error("invalid BIO tag index " + std::to_string(tag));
  return std::string(is_begin(tag) ? "B-" : "I-") + std::string(type_tag(tag_type(tag)));
}

BioTag parse_bio_tag(std::string_view name) {
  if (name == "O") return 0;
  if (name.size() > 2 && (name[0] == 'B' || name[0] == 'I') && name[1] == '-') {
    const EntityType t = parse_type(name.substr(2));
    if (t == EntityType::Untyped) throw Error("untyped BIO tag '" + std::string(name) + "'");
    return name[0] == 'B' ? begin_tag(t) : inside_tag(t);
  }
  throw Error("invalid BIO tag '" + std::string(name) + "'");
}

BioSequence bio_encode(const AdDocument& doc, const PropertyTree& tree) {
  validate_spans(doc, tree);
  BioSequence tags(doc.length(), 0);
  for (const auto& e : tree.entities) {
    if (e.type == EntityType::Untyped) {
      throw Error("entity '" + e.id + "' is untyped; BIO encoding needs types");
    }
    for (const auto& m : e.mentions) {
      tags[m.start - 1] = begin_tag(e.type);
      for (std::size_t t = m.start + 1; t < m.end; ++t) tags[t - 1] = inside_tag(e.type);
    }
  }
  return tags;
}

std::vector<std::pair<EntityMention, EntityType>> bio_mentions(const BioSequence& tags) {
  std::vector<std::pair<EntityMention, EntityType>> out;
  bool open = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const BioTag tag = tags[i];
    const std::size_t pos = i + 1;
    if (tag == 0) {
      open = false;
      continue;
    }
    const EntityType type = tag_type(tag);
    if (is_inside(tag) && open && out.back().second == type) {
      out.back().first.end = pos + 1;
      continue;
    }
    out.push_back({EntityMention{pos, pos + 1}, type});
    open = true;
  }
  return out;
}

bool bio_valid(const BioSequence& tags) {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (!is_inside(tags[i])) continue;
    if (i == 0 || tags[i - 1] == 0 || tag_type(tags[i - 1]) != tag_type(tags[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Projectivity

ProjectivityStats projectivity(const TokenHeadAssignment& a) {
  ProjectivityStats stats;
  const std::size_t n = a.length();
  auto descends = [&](std::size_t tok, std::size_t ancestor) {
    std::size_t cur = tok;
    for (std::size_t steps = 0; steps <= n + 1; ++steps) {
      if (cur == ancestor) return true;
      if (cur == 0) return false;
      const Arc& arc = a[cur];
      if (arc.head == cur) return false;
      cur = arc.head;
    }
    return false;
  };
  for (std::size_t d = 1; d <= n; ++d) {
    const Arc& arc = a[d];
    if (arc.label != RelationLabel::PartOf && arc.label != RelationLabel::Equivalent) continue;
    ++stats.arcs;
    const std::size_t lo = std::min(arc.head, d), hi = std::max(arc.head, d);
    bool projective = true;
    for (std::size_t k = lo + 1; k < hi && projective; ++k) {
      if (a[k].label == RelationLabel::Skip) continue;
      projective = descends(k, arc.head);
    }
    if (!projective) {
      ++stats.non_projective;
      if (arc.label == RelationLabel::PartOf) stats.has_non_projective_part_of = true;
    }
  }
  return stats;
}

}  // namespace proptree
