#pragma once

#include "lmfao/catalog.hpp"
#include "lmfao/ml/features.hpp"
#include "lmfao/query.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace lmfao::ml {

struct Condition
{
    AttrId attr = 0;
    CmpOp op = CmpOp::le;
    double threshold = 0;

    bool operator==(const Condition &) const = default;
};

std::string describe(const Catalog &catalog, const Condition &c);

/// Σ1, Σy, Σy² of a fragment.
struct Moments
{
    double count = 0, sum = 0, sum_sq = 0;

    /// Σy² − (Σy)²/|T|, zero for an empty fragment.
    double variance() const { return count > 0 ? sum_sq - sum * sum / count : 0.0; }
    Moments operator-(const Moments &o) const { return {count - o.count, sum - o.sum, sum_sq - o.sum_sq}; }
    Moments &operator+=(const Moments &o)
    {
        count += o.count;
        sum += o.sum;
        sum_sq += o.sum_sq;
        return *this;
    }
};

struct TreeNode
{
    std::vector<Condition> path;
    Moments moments;
    std::size_t depth = 0;
    std::optional<Condition> split; ///< left child satisfies it, right child does not
    int left = -1, right = -1;
    double prediction = 0;
    double score = 0; ///< children variance sum of the chosen split
};

struct DecisionTree
{
    std::vector<TreeNode> nodes; ///< root first

    double predict(const std::function<double(AttrId)> &value_of) const;
};

struct CartOptions
{
    std::size_t max_depth = 4;
    double min_leaf = 2;
};

/// Path conditions folded into indicator factors, one conjunction per attribute.
std::vector<Factor> path_factors(Catalog &catalog, const std::vector<Condition> &path);

/// Per candidate attribute: GROUP BY X, SUM(1), SUM(Y), SUM(Y²) under the path conditions.
QueryBatch cart_node_batch(Catalog &catalog, const TreeNode &node, const std::vector<AttrId> &features, AttrId label);

struct SplitChoice
{
    Condition left;
    Condition right; ///< complement of `left` on the node's values
    Moments left_moments, right_moments;
    double score = 0;
};

/** Best split from the per-value results of `cart_node_batch`: `X ≤ t` at observed values for continuous X, `X = c`
 * for categorical X. Lowest children variance wins; ties go to the smaller attribute name, then the smaller t. */
std::optional<SplitChoice> cart_best_split(const QueryResults &results, const Catalog &catalog,
                                           const std::vector<AttrId> &features, const TreeNode &node);

/// Node statistics query (no group-by) for the root.
Query cart_stats_query(Catalog &catalog, const std::vector<Condition> &path, AttrId label);

/// Breadth-first greedy growth; each node's batch goes through `run`.
DecisionTree cart_train(Catalog &catalog, const std::vector<AttrId> &features, AttrId label,
                        const CartOptions &options, const BatchRunner &run);

std::string query_id_for(const Catalog &catalog, AttrId feature);

} // namespace lmfao::ml
