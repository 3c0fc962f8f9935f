#pragma once

#include "lmfao/catalog.hpp"

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lmfao {

/// Tree of relations; node identifiers are the catalog's relation ids and every relation is a node.
class JoinTree
{
    public:
    struct Edge
    {
        RelId a;
        RelId b;
        std::vector<AttrId> attributes; ///< sorted
    };
    struct Neighbor
    {
        RelId node;
        std::size_t edge;
    };

    private:
    std::vector<std::string> names_;
    std::vector<std::vector<AttrId>> node_attributes_; ///< sorted
    std::vector<Edge> edges_;
    std::vector<std::vector<Neighbor>> adjacency_;

    public:
    /// Validates connectivity, acyclicity, non-empty edge intersections and the running-intersection property.
    static JoinTree build(const Catalog &catalog, const std::vector<std::pair<std::string, std::string>> &edges);
    static JoinTree build(const Catalog &catalog) { return build(catalog, catalog.schema_edges()); }

    std::size_t size() const { return names_.size(); }
    const std::string &name(RelId node) const { return names_.at(node); }
    const std::vector<Edge> &edges() const { return edges_; }
    const std::vector<Neighbor> &neighbors(RelId node) const { return adjacency_.at(node); }
    std::size_t degree(RelId node) const { return adjacency_.at(node).size(); }
    const std::vector<AttrId> &attributes(RelId node) const { return node_attributes_.at(node); }
    bool contains(RelId node, AttrId attr) const;
    /// Join attributes of the edge between adjacent nodes `a` and `b`.
    const std::vector<AttrId> &join_attributes(RelId a, RelId b) const;
    /// Nodes of the subtree containing `from` after removing the edge `from`-`to` (all nodes if `to` is nullopt).
    std::vector<RelId> subtree(RelId from, std::optional<RelId> to) const;
    /// Union of the attributes over `subtree(from, to)`, sorted.
    std::vector<AttrId> subtree_attributes(RelId from, std::optional<RelId> to) const;
};

struct Factor
{
    AttrId attr;
    UdfId udf;
    auto operator<=>(const Factor &) const = default;
};

/// SUM over a product of per-attribute factors, times a constant. No factors and constant 1 is SUM(1).
struct AggregateSpec
{
    std::vector<Factor> factors; ///< sorted by attribute, at most one per attribute
    double constant = 1.0;

    bool operator==(const AggregateSpec &) const = default;
    std::weak_ordering operator<=>(const AggregateSpec &other) const
    {
        if (auto c = factors <=> other.factors; c != 0) return c;
        return std::compare_weak_order_fallback(constant, other.constant);
    }
};

struct Query
{
    std::string id;
    std::vector<AttrId> group_by; ///< sorted, unique
    std::vector<AggregateSpec> aggregates;

    bool operator==(const Query &) const = default;
};

struct QueryBatch
{
    std::vector<Query> queries;

    const Query &query(const std::string &id) const;
    std::optional<std::size_t> index_of(const std::string &id) const;
};

/// A factor given by names, as accepted by `define_query`.
struct FactorSpec
{
    std::string attribute;
    std::string udf = "identity";
};

struct AggregateInput
{
    std::vector<FactorSpec> factors;
    double constant = 1.0;
};

/// Validates and canonicalizes a query: group-by attributes and factors sorted by attribute id.
Query define_query(const Catalog &catalog, std::string id, const std::vector<std::string> &group_by,
                   const std::vector<AggregateInput> &aggregates);
/// Re-canonicalizes an id-based query; idempotent.
Query canonicalize(const Catalog &catalog, Query query);

/// Appends `query`, rejecting duplicate ids.
void add_query(QueryBatch &batch, Query query);

/// Parses the JSON batch format: `[{id, group_by: [...], aggregates: [[[attr, udf], ...], ...]}]`.
QueryBatch parse_batch(const Catalog &catalog, const std::string &json_text);
QueryBatch load_batch(const Catalog &catalog, const std::filesystem::path &path);
/// The batch in the format `parse_batch` reads, constants included.
std::string format_batch(const Catalog &catalog, const QueryBatch &batch);
/// Registers every indicator UDF named like "[x <= 3 & x != 5]" in a batch text, so `parse_batch` can resolve it.
void register_batch_indicators(Catalog &catalog, const std::string &json_text);

std::string describe(const Catalog &catalog, const AggregateSpec &spec);
std::string describe(const Catalog &catalog, const Query &query);

/// Result of one query: rows sorted by key, one value per aggregate.
struct ResultTable
{
    std::vector<AttrId> keys;
    std::size_t arity = 0;
    std::vector<std::pair<std::vector<double>, std::vector<double>>> rows;
};

using QueryResults = std::map<std::string, ResultTable>;

/** Compares two result sets. Keys must match exactly; values must satisfy `|a-b| <= rel_tol * max(1, |a|, |b|)`.
 * Returns a description of the first difference, or nullopt when equal. */
std::optional<std::string> compare_results(const QueryResults &expected, const QueryResults &actual,
                                           double rel_tol = 0.0);

} // namespace lmfao
