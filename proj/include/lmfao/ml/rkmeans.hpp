#pragma once

#include "lmfao/catalog.hpp"
#include "lmfao/ml/features.hpp"
#include "lmfao/ml/lloyd.hpp"
#include "lmfao/query.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace lmfao::ml {

/// Step 1: GROUP BY X_j, SUM(1) for every dimension.
QueryBatch rkmeans_step1_batch(const Catalog &catalog, const std::vector<AttrId> &dimensions);

/// Weighted projection of the join onto one dimension and its 1-d clustering (Steps 1 and 2).
struct Projection
{
    AttrId attr = 0;
    Eigen::MatrixXd values; ///< one column
    Eigen::VectorXd weights;
    LloydResult clusters;
    double aggregate_ms = 0;
};

Projection project(const QueryResults &step1, const Catalog &catalog, AttrId attr, std::size_t k, std::uint64_t seed);

/// The catalog extended by one relation A_j(X_j, C_j) per dimension, each attached to a node holding X_j, and the
/// grid query GROUP BY C_1..C_n, SUM(1).
struct GridSetup
{
    Catalog catalog;
    QueryBatch batch;
    std::vector<AttrId> cluster_attributes;
};

GridSetup rkmeans_grid_query(const Catalog &catalog, const std::vector<Projection> &projections);

struct CoresetGrid
{
    Eigen::MatrixXd points; ///< one row per non-empty grid cell, coordinates are the 1-d centroids
    Eigen::VectorXd weights;
    double total_weight = 0;
};

CoresetGrid assemble_grid(const QueryResults &results, const GridSetup &setup,
                          const std::vector<Projection> &projections);

struct RkMeansOptions
{
    std::size_t k = 4;
    std::size_t k_per_dim = 0; ///< 0: same as k
    std::uint64_t seed = 0;
    std::size_t lloyd_runs = 0; ///< full-data Lloyd runs to compare against
};

struct RkMeansResult
{
    std::vector<AttrId> dimensions;
    Eigen::MatrixXd centroids;
    std::vector<Projection> projections;
    CoresetGrid grid;
    double relative_size = 0; ///< |G| / |D|
    std::size_t queries = 0;
    double step_ms[4] = {0, 0, 0, 0};
    std::optional<double> objective; ///< on the full data, when compared
    std::optional<double> gap;       ///< mean relative objective difference to full-data Lloyd runs
    std::vector<double> lloyd_objectives;
};

/// Steps 1-4; `run` evaluates a batch over a catalog using the catalog's join tree edges.
RkMeansResult rkmeans(const Catalog &catalog, const std::vector<AttrId> &dimensions, const RkMeansOptions &options,
                      const BatchRunner &run);

/// Rows of the materialized join projected onto `dimensions`; for comparisons only.
Eigen::MatrixXd materialize_points(const Catalog &catalog, const std::vector<AttrId> &dimensions);

} // namespace lmfao::ml
