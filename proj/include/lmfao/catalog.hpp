#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lmfao {

/// Raised for every user-visible failure (bad schema, bad CSV, bad query, ...).
struct Error : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

using AttrId = std::uint32_t;
using RelId = std::uint32_t;
using UdfId = std::uint32_t;

enum class AttrKind { continuous, categorical };
enum class PhysicalType { int64, float64, string };

const char *to_string(AttrKind kind);
const char *to_string(PhysicalType type);

struct AttributeDef
{
    std::string name;
    AttrKind kind = AttrKind::continuous;
    PhysicalType physical = PhysicalType::int64;
};

struct RelationDef
{
    std::string name;
    std::vector<AttributeDef> attributes;
    std::filesystem::path source;

    /// Position of attribute `name` in the declaration, or nullopt.
    std::optional<std::size_t> position(const std::string &name) const;
};

struct DomainStats
{
    std::size_t distinct_count = 0;
    std::size_t tuple_count = 0;
    std::optional<double> min;
    std::optional<double> max;
};

struct UdfDef
{
    std::string name;
    std::function<double(double)> evaluator;
    std::string description;
};

/// Comparison operators usable in indicator UDFs and CART conditions.
enum class CmpOp { le, ge, eq, ne };

const char *to_string(CmpOp op);
bool apply(CmpOp op, double lhs, double rhs);

/// Dense dictionary coding of categorical values, codes in order of first appearance.
class Dictionary
{
    std::vector<std::string> values_;
    std::unordered_map<std::string, std::size_t> codes_;

    public:
    std::size_t encode(const std::string &value);
    std::optional<std::size_t> find(const std::string &value) const;
    const std::string &decode(std::size_t code) const;
    std::size_t size() const { return values_.size(); }
};

/** A relation stored column-wise and sorted lexicographically by `sort_order()`.
 *
 * The logical trie over the sort order is given by run boundaries: level l (1-based) partitions the rows into maximal
 * runs on which the first l attributes of the order are constant.  `level_bounds(l)` returns the run starts followed
 * by the row count, so runs are `[b[i], b[i+1])`.  Level 0 is the single run over all rows. */
class SortedRelation
{
    RelationDef def_;
    std::vector<std::vector<double>> columns_; ///< indexed by declaration position
    std::vector<std::size_t> order_;           ///< declaration positions, full permutation
    std::vector<std::vector<std::size_t>> levels_;

    public:
    SortedRelation() = default;
    /// Sorts `columns` by `order` (declaration positions); missing positions are appended in declaration order.
    SortedRelation(RelationDef def, std::vector<std::vector<double>> columns, std::vector<std::size_t> order = {});

    const RelationDef &def() const { return def_; }
    const std::string &name() const { return def_.name; }
    std::size_t size() const { return columns_.empty() ? 0 : columns_.front().size(); }
    std::size_t arity() const { return columns_.size(); }

    std::span<const double> column(std::size_t position) const { return columns_[position]; }
    std::span<const double> column(const std::string &attribute) const;
    double at(std::size_t row, std::size_t position) const { return columns_[position][row]; }

    std::span<const std::size_t> sort_order() const { return order_; }
    std::vector<std::string> sort_order_names() const;
    std::span<const std::size_t> level_bounds(std::size_t level) const { return levels_.at(level); }
    std::size_t levels() const { return levels_.size() - 1; }

    private:
    void sort_and_index();
};

/// Re-sorts `relation` by the named attributes; omitted attributes follow in declaration order.
SortedRelation resort(const SortedRelation &relation, std::span<const std::string> order);

struct AttributeInfo
{
    std::string name;
    AttrKind kind;
    PhysicalType physical;
    std::vector<RelId> relations; ///< relations declaring this attribute, in schema order
};

/** Schema, data, statistics and scalar UDFs of one database.
 *
 * Attributes are global: equally named attributes of different relations are the same join attribute, and categorical
 * attributes share one dictionary across relations. */
class Catalog
{
    std::vector<RelationDef> relations_;
    std::map<std::string, RelId> relation_ids_;
    std::vector<AttributeInfo> attributes_;
    std::map<std::string, AttrId> attribute_ids_;
    std::map<AttrId, Dictionary> dictionaries_;
    std::vector<std::shared_ptr<const SortedRelation>> data_;
    std::map<std::pair<RelId, AttrId>, DomainStats> stats_;
    std::vector<UdfDef> udfs_;
    std::map<std::string, UdfId> udf_ids_;
    std::vector<std::pair<std::string, std::string>> edges_;

    public:
    Catalog();

    /// Parses a JSON schema file. Relations are registered but not loaded.
    static Catalog load_schema(const std::filesystem::path &path);
    /// Parses schema JSON text; relative CSV paths resolve against `base_dir`.
    static Catalog parse_schema(const std::string &text, const std::filesystem::path &base_dir = {});

    /// Registers a relation definition without data.
    RelId add_relation(RelationDef def);
    /// Registers a relation together with its (unsorted) column data, as produced in memory.
    RelId add_relation(RelationDef def, std::vector<std::vector<double>> columns);
    /// Replaces the data of a registered relation with (unsorted) columns in declaration order.
    const SortedRelation &set_data(RelId id, std::vector<std::vector<double>> columns);
    void add_edge(std::string a, std::string b) { edges_.emplace_back(std::move(a), std::move(b)); }

    const SortedRelation &load_relation(const std::string &name);
    void load_all();

    std::size_t num_relations() const { return relations_.size(); }
    const RelationDef &relation(RelId id) const { return relations_.at(id); }
    RelId relation_id(const std::string &name) const;
    std::optional<RelId> find_relation(const std::string &name) const;
    bool loaded(RelId id) const { return id < data_.size() and data_[id] != nullptr; }
    const SortedRelation &data(RelId id) const;
    std::shared_ptr<const SortedRelation> data_ptr(RelId id) const { return data_.at(id); }

    std::size_t num_attributes() const { return attributes_.size(); }
    const AttributeInfo &attribute(AttrId id) const { return attributes_.at(id); }
    AttrId attribute_id(const std::string &name) const;
    std::optional<AttrId> find_attribute(const std::string &name) const;
    const Dictionary *dictionary(AttrId id) const;
    /// Code of a categorical value, assigned on first use. For data built in memory.
    double encode(AttrId id, const std::string &value);

    const DomainStats &stats(RelId rel, AttrId attr) const;
    /// Largest distinct count of `attr` over all loaded relations declaring it.
    std::size_t domain_size(AttrId attr) const;

    UdfId register_udf(UdfDef def);
    const UdfDef &udf(UdfId id) const { return udfs_.at(id); }
    std::optional<UdfId> find_udf(const std::string &name) const;
    UdfId udf_id(const std::string &name) const;
    std::size_t num_udfs() const { return udfs_.size(); }
    /// Returns the indicator UDF `[x op t]`, registering it on first use.
    UdfId indicator(CmpOp op, double threshold);
    /// Returns the conjunction of indicators over one attribute, registering it on first use.
    UdfId indicator_conjunction(const std::vector<std::pair<CmpOp, double>> &conditions);

    const std::vector<std::pair<std::string, std::string>> &schema_edges() const { return edges_; }

    /// Renders a stored value: decoded string for dictionary-coded attributes, number otherwise.
    std::string format_value(AttrId attr, double value) const;

    private:
    const SortedRelation &store(RelId id, SortedRelation relation);
};

std::string format_number(double value);

} // namespace lmfao
