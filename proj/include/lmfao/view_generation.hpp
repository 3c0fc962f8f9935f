#pragma once

#include "lmfao/catalog.hpp"
#include "lmfao/query.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lmfao {

using ViewId = std::size_t;

/// Query id -> node of the join tree at which the query result is assembled.
using RootAssignment = std::map<std::string, RelId>;

/** How one aggregate slot of an output is computed at its node: the product of the local factors, the looked-up
 * slots of the incoming views, and the constant. */
struct SlotRecipe
{
    std::vector<Factor> local;
    std::vector<std::pair<ViewId, std::size_t>> lookups; ///< (incoming view, slot), sorted
    double constant = 1.0;

    bool operator==(const SlotRecipe &) const = default;
};

struct Consumer
{
    enum Kind { view, query };
    Kind kind;
    std::size_t id;                                    ///< view id or query index in the batch
    std::vector<std::pair<std::size_t, std::size_t>> slots; ///< (consumer aggregate, slot of this view)

    bool operator==(const Consumer &) const = default;
};

/// An aggregate subquery along the directed edge from -> to, summarizing the subtree behind `from`.
struct DirectionalView
{
    ViewId id = 0;
    std::string name;
    RelId from = 0;
    RelId to = 0;
    std::vector<AttrId> group_by; ///< sorted
    std::vector<AggregateSpec> aggregates;
    std::vector<SlotRecipe> recipes; ///< parallel to `aggregates`
    std::vector<ViewId> incoming;    ///< views consumed at `from`, sorted
    std::vector<Consumer> consumers;

    bool operator==(const DirectionalView &) const = default;
};

/// Where a query's result is assembled.
struct QueryOutput
{
    std::size_t query = 0; ///< index in the batch
    RelId node = 0;
    std::vector<SlotRecipe> recipes; ///< one per query aggregate
    std::vector<ViewId> incoming;    ///< sorted

    bool operator==(const QueryOutput &) const = default;
};

struct ViewSet
{
    RootAssignment roots;
    std::vector<DirectionalView> views;
    std::vector<QueryOutput> outputs; ///< parallel to the batch

    bool operator==(const ViewSet &) const = default;

    /// Views along the directed edge from -> to.
    std::vector<ViewId> views_on(RelId from, RelId to) const;
};

/** One root per query: the node holding the query's largest-domain group-by attribute, or the highest-degree node
 * for queries without group-by. Ties go to the lexicographically smallest node name. */
RootAssignment assign_roots(const QueryBatch &batch, const JoinTree &tree, const Catalog &catalog);

/// Views of a single query before merging; recipes and view ids refer to positions in `views`.
struct Decomposition
{
    std::vector<DirectionalView> views; ///< children before parents
    QueryOutput output;
};

/** Decomposes a query into one view per edge, directed toward `root`.
 *
 * Each factor is applied at the node nearest the root that holds its attribute; a view carries the edge's join
 * attributes plus the query's group-by attributes that live in its subtree. */
Decomposition decompose_query(const Query &query, std::size_t query_index, RelId root, const JoinTree &tree);

/// Merges views with equal direction and group-by attributes; identical aggregates share one slot.
ViewSet merge_views(const std::vector<Decomposition> &decompositions, const JoinTree &tree, RootAssignment roots);

/// Root assignment, decomposition and merging in one step; `roots` may pin some queries.
ViewSet generate_views(const QueryBatch &batch, const JoinTree &tree, const Catalog &catalog,
                       const RootAssignment &pinned = {});

/// Regenerates the view set with query `query_id` rooted at `node`.
ViewSet reassign_root(const ViewSet &views, const QueryBatch &batch, const JoinTree &tree, const std::string &query_id,
                      RelId node);

} // namespace lmfao
