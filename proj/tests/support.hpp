#pragma once

// Reference computations for the tests, written against the raw relation data only.

#include "lmfao/catalog.hpp"
#include "lmfao/ml/cart.hpp"
#include "lmfao/ml/features.hpp"
#include "lmfao/query.hpp"

#include <Eigen/Dense>

#include <vector>

namespace testing {

using Row = std::vector<double>; // indexed by AttrId

/// Natural join by hash lookups along the schema edges, breadth-first from the first relation.
std::vector<Row> hash_join(const lmfao::Catalog &catalog);

/// Scans the joined rows once per query; scalar queries always yield one row.
lmfao::QueryResults scan_queries(const lmfao::QueryBatch &batch, const lmfao::Catalog &catalog,
                                 const std::vector<Row> &rows);

/// Ridge solution of (1/2N)‖Xθ − y‖² + λ/2‖θ‖² from the explicit design matrix, in FeatureIndex slot order with the
/// label slot set to -1.
Eigen::VectorXd dense_ridge(const lmfao::Catalog &catalog, const std::vector<Row> &rows,
                            const lmfao::ml::FeatureIndex &features, double lambda);

/// Two-pass Σ(y − ȳ)² over `ys`.
double centered_variance(const std::vector<double> &ys);

struct BruteSplit
{
    double score = 0;
    bool found = false;
};

/// Lowest children variance over all single-attribute splits of `rows`, enumerated one threshold at a time.
BruteSplit brute_force_split(const lmfao::Catalog &catalog, const std::vector<Row> &rows,
                             const std::vector<lmfao::AttrId> &features, lmfao::AttrId label);

bool satisfies(const Row &row, const std::vector<lmfao::ml::Condition> &path);

} // namespace testing
