#pragma once

#include "lmfao/catalog.hpp"
#include "lmfao/query.hpp"
#include "lmfao/view_generation.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lmfao {

using GroupId = std::size_t;

/// A view or a query result produced by a group.
struct OutputRef
{
    enum Kind { view, query };
    Kind kind;
    std::size_t id; ///< view id or query index

    auto operator<=>(const OutputRef &) const = default;
};

/** Views and query results computed together in one pass over the relation at `node`.
 *
 * `incoming` is the set of views joined in the pass.  An output that does not consume one of them (a view toward the
 * neighbour that produced it) still sees it as a semi-join filter, which never removes a tuple of the final join. */
struct ViewGroup
{
    GroupId id = 0;
    RelId node = 0;
    std::vector<OutputRef> outputs;
    std::vector<ViewId> incoming; ///< sorted
};

struct GroupDag
{
    std::vector<ViewGroup> groups;                  ///< indexed by group id, in topological order
    std::vector<std::pair<GroupId, GroupId>> edges; ///< producer -> consumer, sorted
    std::vector<GroupId> producer;                  ///< view id -> producing group

    /// Groups partitioned into dependency waves: every group's producers lie in earlier waves.
    std::vector<std::vector<GroupId>> waves() const;
};

/// Groups outputs at the same node computed over the same join; see `ViewGroup`.
std::vector<ViewGroup> group_views(const ViewSet &views, const JoinTree &tree, const Catalog &catalog);

/// Producer -> consumer edges between groups; groups renumbered in a deterministic topological order.
GroupDag build_dependency_dag(std::vector<ViewGroup> groups, const ViewSet &views);

/// Attributes a group iterates, outermost first.
using AttributeOrder = std::vector<AttrId>;

/** Orders the node relation's attributes by descending number of incoming views and outputs keyed on them, then by
 * descending distinct count, then by name.  Attributes that only incoming views carry are placed right after the
 * last node attribute of that view's key. */
AttributeOrder choose_attribute_order(const ViewGroup &group, const ViewSet &views, const QueryBatch &batch,
                                      const JoinTree &tree, const Catalog &catalog);

/*======================================================================================================================
 * Plan IR
 *====================================================================================================================*/

enum class RegKind { alpha, beta };

struct RegRef
{
    RegKind kind;
    std::size_t index; ///< 0-based within its kind

    auto operator<=>(const RegRef &) const = default;
};

/// A multiplicand: a register, a UDF applied to a bound attribute, or the node tuple count below a level.
struct Operand
{
    enum Kind { from_register, from_udf, tuple_count };
    Kind kind = from_register;
    RegRef reg{RegKind::alpha, 0};
    AttrId attr = 0;
    UdfId udf = 0;
    std::size_t level = 0; ///< level at which the operand is available

    auto operator<=>(const Operand &) const = default;
};

struct Statement
{
    enum Kind {
        lookup,     ///< dst = view(keys)[slot]
        product,    ///< dst = prod(operands)
        reset,      ///< dst = 0
        accumulate, ///< dst += prod(operands)
        write,      ///< output(keys)[slot] (+)= constant * prod(operands)
    };
    Kind kind = product;
    RegRef dst{RegKind::alpha, 0};
    ViewId view = 0;
    std::size_t slot = 0;
    std::vector<Operand> operands;
    OutputRef output{OutputRef::view, 0};
    std::size_t output_slot = 0;
    bool upsert = false; ///< several bindings may hit the same key
    double constant = 1.0;
    std::optional<std::size_t> guard; ///< write only if a join tuple was seen below this level
};

struct LevelBlock
{
    std::size_t level = 0;              ///< 0 is the block around the outermost loop
    std::optional<AttrId> attr;         ///< nullopt for level 0
    bool relation = false;              ///< node relation has this attribute
    std::vector<ViewId> views;          ///< incoming views keyed on this attribute
    std::vector<ViewId> bound_views;    ///< incoming views whose key is complete at this level
    std::vector<Statement> on_enter;
    std::vector<Statement> on_exit;
};

struct RegisterInfo
{
    RegRef ref;
    std::size_t level; ///< level where it is assigned (alpha) or reset (beta)
};

struct PlanIR
{
    GroupId group = 0;
    RelId node = 0;
    AttributeOrder order;
    std::vector<LevelBlock> levels; ///< levels[0] wraps the loops; levels[l] iterates order[l-1]
    std::vector<RegisterInfo> alphas;
    std::vector<RegisterInfo> betas;
    std::vector<OutputRef> outputs;
    std::vector<ViewId> incoming;
    std::size_t depth = 0;         ///< deepest level that must be iterated
    std::size_t witness_level = 0; ///< deepest level holding an incoming view key

    std::size_t level_of(AttrId attr) const;
};

/** Factorizes a group's outputs into a loop nest over `order`.
 *
 * Every output aggregate is a product of atoms (UDF factors and incoming-view lookups), each bound at the level of
 * its deepest attribute.  Atoms above an output's key level fold into alpha prefix products evaluated where they are
 * bound; atoms below fold into beta running sums, one per suffix, reset at the level that owns the sum and accumulated
 * on exit of the next level carrying atoms.  Equal lookups, prefixes and suffixes share one register. */
PlanIR decompose_aggregates(const ViewGroup &group, const AttributeOrder &order, const ViewSet &views,
                            const QueryBatch &batch, const JoinTree &tree);

/// (alpha count, beta count)
std::pair<std::size_t, std::size_t> register_count(const PlanIR &plan);

/// Structured text dump: one statement per line, indented by level.
std::string dump_plan(const PlanIR &plan, const ViewSet &views, const QueryBatch &batch, const Catalog &catalog);

/// Everything the optimizer produces for a batch.
struct BatchPlan
{
    ViewSet views;
    GroupDag dag;
    std::vector<PlanIR> plans; ///< indexed by group id
};

BatchPlan plan_batch(const QueryBatch &batch, const JoinTree &tree, const Catalog &catalog,
                     const RootAssignment &pinned = {});
/// Re-plans from an already generated view set (e.g. after a root reassignment).
BatchPlan plan_views(ViewSet views, const QueryBatch &batch, const JoinTree &tree, const Catalog &catalog);

/// Key attributes of an output.
const std::vector<AttrId> &output_keys(const OutputRef &out, const ViewSet &views, const QueryBatch &batch);
std::string output_name(const OutputRef &out, const ViewSet &views, const QueryBatch &batch);

} // namespace lmfao
