// Hand-built documents shared by the unit tests.
#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "proptree/data_model.hpp"

namespace fixtures {

using namespace proptree;

inline std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

// The apartment ad used throughout: eight entities, the garage and the
// apartment each mentioned twice.
inline AnnotatedDocument apartment_ad() {
  AnnotatedDocument d;
  d.doc.id = "ad-1";
  d.doc.tokens = split_words(
      "The property includes a large apartment with a garage . The home has a living room , 3 spacious "
      "bedrooms and a bathroom . The garage is equipped with a gate and a bike wall bracket .");
  auto entity = [&](std::string id, EntityType type, std::vector<EntityMention> mentions, std::string parent) {
    d.tree.entities.push_back({std::move(id), type, std::move(mentions), std::move(parent)});
  };
  entity("property", EntityType::Property, {{2, 3}}, std::string(kRootId));
  entity("apartment", EntityType::Property, {{5, 7}, {12, 13}}, "property");
  entity("garage", EntityType::ExtraBuilding, {{9, 10}, {26, 27}}, "property");
  entity("living", EntityType::Space, {{15, 17}}, "apartment");
  entity("bedrooms", EntityType::Space, {{18, 21}}, "apartment");
  entity("bathroom", EntityType::Space, {{23, 24}}, "apartment");
  entity("gate", EntityType::Subspace, {{31, 32}}, "garage");
  entity("bracket", EntityType::Subspace, {{34, 37}}, "garage");
  return d;
}

// The token-level encoding of apartment_ad(), written out by hand.
inline TokenHeadAssignment apartment_heads() {
  TokenHeadAssignment a(37);
  const auto P = RelationLabel::PartOf, S = RelationLabel::Segment, E = RelationLabel::Equivalent;
  a.set(2, 0, P);
  a.set(5, 6, S);
  a.set(6, 2, P);
  a.set(9, 2, P);
  a.set(12, 6, E);
  a.set(15, 16, S);
  a.set(16, 6, P);
  a.set(18, 20, S);
  a.set(19, 20, S);
  a.set(20, 6, P);
  a.set(23, 6, P);
  a.set(26, 9, E);
  a.set(31, 9, P);
  a.set(34, 36, S);
  a.set(35, 36, S);
  a.set(36, 9, P);
  return a;
}

inline std::vector<AnnotatedDocument> synthetic(std::size_t documents, std::uint64_t seed,
                                                double ambiguity = 0.0) {
  SyntheticOptions o;
  o.documents = documents;
  o.seed = seed;
  o.lexical_ambiguity = ambiguity;
  return generate_synthetic_corpus(o);
}

}  // namespace fixtures
