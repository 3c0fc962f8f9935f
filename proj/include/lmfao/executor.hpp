#pragma once

#include "lmfao/catalog.hpp"
#include "lmfao/planner.hpp"
#include "lmfao/query.hpp"
#include "lmfao/view_generation.hpp"

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace lmfao {

enum class Storage { sorted, hash };
const char *to_string(Storage storage);

struct KeyHash
{
    std::size_t operator()(const std::vector<double> &key) const;
};

/** Key tuples and aggregate vectors of a computed view.
 *
 * Rows are sorted lexicographically by `columns`; a hash index over the same key layout is built for hash storage.
 * Keys are unique, and a missing key is reported as absent, never as zero. */
class MaterializedView
{
    ViewId id_ = 0;
    std::vector<AttrId> columns_;
    std::size_t arity_ = 0;
    Storage storage_ = Storage::sorted;
    std::vector<double> keys_;   ///< row-major, columns_.size() per row
    std::vector<double> values_; ///< row-major, arity_ per row
    std::unordered_map<std::vector<double>, std::size_t, KeyHash> index_;

    public:
    MaterializedView() = default;
    /// Takes unsorted unique rows; sorts them and indexes them when `storage` is hash.
    MaterializedView(ViewId id, std::vector<AttrId> columns, std::size_t arity, Storage storage,
                     std::vector<double> keys, std::vector<double> values);

    ViewId id() const { return id_; }
    const std::vector<AttrId> &columns() const { return columns_; }
    std::size_t arity() const { return arity_; }
    Storage storage() const { return storage_; }
    std::size_t size() const { return arity_ == 0 ? 0 : values_.size() / arity_; }

    double key(std::size_t row, std::size_t column) const { return keys_[row * columns_.size() + column]; }
    std::span<const double> values(std::size_t row) const { return {values_.data() + row * arity_, arity_}; }
    const double *key_data() const { return keys_.data(); }

    /// Aggregate vector for `key` given in `columns()` order.
    std::optional<std::span<const double>> find(const std::vector<double> &key) const;

    /// Same content laid out by another column order (a permutation of `columns()`).
    MaterializedView reordered(const std::vector<AttrId> &columns, Storage storage) const;
};

enum class StorageOverride { automatic, all_hash, all_sorted };

/** Sorted storage when the view's keys are the leading attributes of every consumer's order, when nothing consumes
 * the view, or when some key is absent from a consumer's relation (the consumer must then iterate the view). Hash
 * storage otherwise. */
Storage choose_view_storage(const DirectionalView &view, const std::vector<const PlanIR *> &consumers,
                            const JoinTree &tree);

struct ViewLayout
{
    Storage storage = Storage::sorted;
    std::vector<AttrId> columns;
    bool forced = false; ///< a consumer iterates a key its relation lacks
};

/// Storage and column order of every view of the plan.
std::vector<ViewLayout> choose_layouts(const BatchPlan &plan, const JoinTree &tree,
                                       StorageOverride override_mode = StorageOverride::automatic);

struct GroupReport
{
    GroupId group = 0;
    std::string node;
    double wall_ms = 0;
    std::size_t rows_scanned = 0;
    std::size_t relation_rows = 0;
    std::size_t lookups = 0;
    std::size_t chunks = 0;
    std::vector<std::pair<std::string, std::size_t>> outputs; ///< name -> cardinality
};

struct ExecutionReport
{
    std::vector<GroupReport> groups; ///< indexed by group id
    std::vector<std::vector<GroupId>> schedule;
    std::vector<Storage> storage; ///< per view
    std::size_t threads = 1;
    double total_ms = 0;
};

/// Outputs of one group.
struct GroupResult
{
    std::vector<std::pair<ViewId, MaterializedView>> views;
    QueryResults queries;
    GroupReport report;
};

struct PlanContext
{
    const ViewSet &views;
    const QueryBatch &batch;
    const Catalog &catalog;
    const JoinTree &tree;
    const std::vector<ViewLayout> &layouts;
};

/** Runs one group's loop nest over `relation` (any sort order) and the incoming views.
 *
 * The outermost attribute's runs are split into `chunks` contiguous parts, each evaluated with private registers and
 * output buffers; buffers are merged in chunk order. */
GroupResult execute_plan(const PlanIR &plan, const SortedRelation &relation,
                         const std::map<ViewId, std::shared_ptr<const MaterializedView>> &incoming,
                         const PlanContext &ctx, std::size_t chunks = 1);

struct ExecOptions
{
    std::size_t threads = 0; ///< 0: hardware concurrency
    StorageOverride storage = StorageOverride::automatic;
};

struct BatchResult
{
    QueryResults results;
    ExecutionReport report;
    std::vector<std::shared_ptr<const MaterializedView>> views; ///< indexed by view id
};

/// Executes all groups wave by wave; groups of a wave and their chunks run concurrently.
BatchResult execute_batch(const BatchPlan &plan, const QueryBatch &batch, const Catalog &catalog,
                          const JoinTree &tree, const ExecOptions &options = {});

/// Plans and executes a batch in one call.
BatchResult evaluate_batch(const QueryBatch &batch, const Catalog &catalog, const JoinTree &tree,
                           const ExecOptions &options = {}, const RootAssignment &pinned = {});

std::size_t default_threads();

} // namespace lmfao
