#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace lmfao::ml {

struct LloydResult
{
    Eigen::MatrixXd centroids;           ///< one row per centroid
    std::vector<std::size_t> assignment; ///< per point; centroids are the weighted means of their points
    double objective = 0;                ///< Σ w · squared distance to the assigned centroid
    std::vector<double> trace;           ///< objective after every iteration
    std::size_t iterations = 0;
    std::string warning;
};

/** Weighted k-means: k-means++ seeding from `seed`, then Lloyd iterations until no centroid moves by 1e-9 or more,
 * at most `max_iterations` times. k above the number of distinct points is reduced to it. */
LloydResult weighted_lloyd(const Eigen::MatrixXd &points, const Eigen::VectorXd &weights, std::size_t k,
                           std::uint64_t seed, std::size_t max_iterations = 300);

/// Euclidean nearest centroid; ties go to the smaller index.
std::size_t nearest_centroid(const Eigen::VectorXd &point, const Eigen::MatrixXd &centroids);

/// Σ w · squared distance to the nearest centroid.
double kmeans_objective(const Eigen::MatrixXd &points, const Eigen::VectorXd &weights, const Eigen::MatrixXd &centroids);

} // namespace lmfao::ml
