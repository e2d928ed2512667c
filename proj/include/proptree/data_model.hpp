// Property-tree annotations and their token-level encodings.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "proptree/tensor.hpp"

namespace proptree {

enum class RelationLabel : std::uint8_t { PartOf = 0, Segment = 1, Equivalent = 2, Skip = 3 };
inline constexpr std::size_t kNumLabels = 4;
inline constexpr std::array<RelationLabel, kNumLabels> kAllLabels = {
    RelationLabel::PartOf, RelationLabel::Segment, RelationLabel::Equivalent, RelationLabel::Skip};

std::string_view label_name(RelationLabel label);
RelationLabel parse_label(std::string_view name);
constexpr std::size_t label_index(RelationLabel label) { return static_cast<std::size_t>(label); }

enum class EntityType : std::uint8_t {
  Property,
  Floor,
  Space,
  Subspace,
  Field,
  ExtraBuilding,
  Untyped,
};
inline constexpr std::size_t kNumEntityTypes = 6;  // excluding Untyped

std::string_view type_name(EntityType type);  // "property", ..., "extra building"
std::string_view type_tag(EntityType type);   // "PROPERTY", ..., "EXTRA_BUILDING"
EntityType parse_type(std::string_view name);

inline constexpr std::string_view kRootId = "ROOT";

struct AdDocument {
  std::string id;
  std::vector<std::string> tokens;  // x_1..x_N; x_0 is the implicit root
  std::size_t length() const { return tokens.size(); }
  /// 1-based access, matching head indices.
  const std::string& token(std::size_t i) const { return tokens.at(i - 1); }
};

/// Half-open 1-based span [start, end). The main token carries the mention's
/// external edges; by convention it is the last token of the span.
struct EntityMention {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t main_token() const { return end - 1; }
  bool operator==(const EntityMention&) const = default;
};

struct Entity {
  std::string id;
  EntityType type = EntityType::Untyped;
  std::vector<EntityMention> mentions;  // order of appearance; first is the main mention
  std::string parent{kRootId};
};

struct PropertyTree {
  std::vector<Entity> entities;
  const Entity* find(std::string_view id) const;
};

struct AnnotatedDocument {
  AdDocument doc;
  PropertyTree tree;
};

struct Arc {
  std::size_t head = 0;
  RelationLabel label = RelationLabel::Skip;
  bool operator==(const Arc&) const = default;
};

/// One (head, label) per token. Entry 0 stands for the root and is ignored.
class TokenHeadAssignment {
 public:
  TokenHeadAssignment() = default;
  /// All tokens skip (self-headed).
  explicit TokenHeadAssignment(std::size_t num_tokens);

  std::size_t length() const { return arcs_.empty() ? 0 : arcs_.size() - 1; }
  const Arc& operator[](std::size_t i) const { return arcs_.at(i); }
  Arc& operator[](std::size_t i) { return arcs_.at(i); }
  void set(std::size_t i, std::size_t head, RelationLabel label) { arcs_.at(i) = {head, label}; }
  bool operator==(const TokenHeadAssignment&) const = default;

  /// skip ⟺ self-head, heads in range, root never a dependent.
  void validate() const;

 private:
  std::vector<Arc> arcs_;
};

/// A structural skeleton comparable across encode/decode: spans, mention
/// grouping and part-of topology, with entity ids and types abstracted away.
struct TreeSkeleton {
  // Each entity: (sorted mention spans, parent's main-mention span or (0,0) for root).
  std::vector<std::pair<std::vector<EntityMention>, EntityMention>> entities;
  bool operator==(const TreeSkeleton&) const = default;
};
TreeSkeleton skeleton(const PropertyTree& tree);

/// Checks spans, overlaps, ids and that parent links form a tree under ROOT.
void validate_tree(const AdDocument& doc, const PropertyTree& tree);

TokenHeadAssignment encode_tree_to_heads(const AdDocument& doc, const PropertyTree& tree);
PropertyTree decode_heads_to_tree(const AdDocument& doc, const TokenHeadAssignment& assignment);

// BIO -----------------------------------------------------------------------

/// Tag index: 0 = O, 1 + 2t = B-type t, 2 + 2t = I-type t.
using BioTag = std::uint8_t;
inline constexpr std::size_t kNumBioTags = 1 + 2 * kNumEntityTypes;
using BioSequence = std::vector<BioTag>;

std::string bio_tag_name(BioTag tag);
BioTag parse_bio_tag(std::string_view name);
BioTag begin_tag(EntityType type);
BioTag inside_tag(EntityType type);
bool is_begin(BioTag tag);
bool is_inside(BioTag tag);
EntityType tag_type(BioTag tag);

BioSequence bio_encode(const AdDocument& doc, const PropertyTree& tree);
/// Typed mention spans from a tag sequence: maximal B-T (I-T)* runs, with a
/// stray I-T opening a new mention.
std::vector<std::pair<EntityMention, EntityType>> bio_mentions(const BioSequence& tags);
bool bio_valid(const BioSequence& tags);

// Corpus I/O ----------------------------------------------------------------

/// Canonical JSON Lines corpus. Malformed records raise Error with line number.
std::vector<AnnotatedDocument> read_corpus_jsonl(std::istream& in);
std::vector<AnnotatedDocument> load_corpus(const std::filesystem::path& path);
void write_corpus_jsonl(std::ostream& out, const std::vector<AnnotatedDocument>& corpus);
std::string document_to_json_line(const AnnotatedDocument& doc);

/// Pluggable importer for foreign corpus formats, keyed by format name.
using CorpusReader = std::function<std::vector<AnnotatedDocument>(std::istream&)>;
void register_corpus_reader(const std::string& format, CorpusReader reader);
const CorpusReader& corpus_reader(const std::string& format);
std::vector<std::string> corpus_formats();

/// Token-per-line format: "index<TAB>token<TAB>head<TAB>label<TAB>bio", blank
/// line between documents, optional "# id = ..." comment lines. Registered as "conll".
std::vector<AnnotatedDocument> read_corpus_conll(std::istream& in);

struct CorpusSplit {
  std::vector<AnnotatedDocument> train;
  std::vector<AnnotatedDocument> validation;
  std::vector<AnnotatedDocument> test;
};
/// Seeded shuffle then 70/15/15 with validation and test sizes floored, so
/// training takes the remainder.
CorpusSplit split_corpus(const std::vector<AnnotatedDocument>& corpus, std::uint64_t seed);

// Statistics ----------------------------------------------------------------

struct ProjectivityStats {
  std::size_t arcs = 0;              // part-of and equivalent arcs
  std::size_t non_projective = 0;
  bool has_non_projective_part_of = false;
};
/// An arc h→d is projective when every token strictly between them that takes
/// part in the tree (non-skip) descends from h.
ProjectivityStats projectivity(const TokenHeadAssignment& assignment);

// Synthetic corpus ----------------------------------------------------------

struct SyntheticOptions {
  std::size_t documents = 100;
  std::uint64_t seed = 1;
  /// Probability that an entity with children is introduced in a list and
  /// described in a later sentence, which produces crossing part-of arcs.
  double deferred_description = 0.45;
  /// Probability per sentence of words reused in a role other than their usual one.
  double lexical_ambiguity = 0.0;
  std::size_t max_children = 3;
};

/// Real-estate style ads generated from a grammar over the six entity types.
/// Gold annotations are noise-free: identical contexts always get identical labels.
std::vector<AnnotatedDocument> generate_synthetic_corpus(const SyntheticOptions& options);

}  // namespace proptree
