#pragma once

#include "lmfao/ml/features.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace lmfao::ml {

/// J(θ) = θᵀΣθ / (2|D|) + λ/2 ‖θ‖²
double objective(const SigmaMatrix &sigma, const Eigen::VectorXd &theta, double lambda);
/// ∇J(θ) = Σθ / |D| + λθ
Eigen::VectorXd gradient(const SigmaMatrix &sigma, const Eigen::VectorXd &theta, double lambda);

struct BgdOptions
{
    double tolerance = 1e-6; ///< stop when ‖∇J‖ < tolerance · max(1, ‖θ‖) over the free parameters
    std::size_t max_iterations = 10000;
    double armijo = 1e-4;
    std::size_t memory = 10; ///< sufficient decrease is measured against the largest of the last `memory` values
};

struct Theta
{
    Eigen::VectorXd values; ///< label slot pinned at -1
    double lambda = 0;
    std::vector<double> trace; ///< J after every iteration, starting with J(θ0)
    std::size_t iterations = 0;
    bool converged = false;
};

/** Batch gradient descent on Σ alone, scaled by the diagonal of Σ. Steps start from the Barzilai-Borwein estimate and
 * are halved until J drops below the recent maximum by the Armijo margin; J can rise between iterations but the
 * recent maximum never does. */
Theta bgd_train(const SigmaMatrix &sigma, const FeatureIndex &features, double lambda, const BgdOptions &options = {});

/// Minimizer of J by a direct solve of the free block; reference for tests.
Eigen::VectorXd ridge_solve(const SigmaMatrix &sigma, const FeatureIndex &features, double lambda);

} // namespace lmfao::ml
