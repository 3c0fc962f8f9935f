#include "lmfao/ml/linreg.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

using namespace lmfao;
using namespace lmfao::ml;

double lmfao::ml::objective(const SigmaMatrix &sigma, const Eigen::VectorXd &theta, double lambda)
{
    return theta.dot(sigma.entries * theta) / (2.0 * sigma.count) + 0.5 * lambda * theta.squaredNorm();
}

Eigen::VectorXd lmfao::ml::gradient(const SigmaMatrix &sigma, const Eigen::VectorXd &theta, double lambda)
{
    return sigma.entries * theta / sigma.count + lambda * theta;
}

namespace {

void check(const SigmaMatrix &sigma, const FeatureIndex &features, double lambda)
{
    if (not(sigma.count > 0)) throw Error("empty dataset");
    if (not(lambda >= 0)) throw Error("lambda must be non-negative");
    if (sigma.entries.rows() != static_cast<Eigen::Index>(features.size()))
        throw Error("sigma does not match the feature layout");
}

} // namespace

Theta lmfao::ml::bgd_train(const SigmaMatrix &sigma, const FeatureIndex &features, double lambda,
                           const BgdOptions &options)
{
    check(sigma, features, lambda);
    const auto n = static_cast<Eigen::Index>(features.size());
    const auto label = static_cast<Eigen::Index>(features.label_slot);

    Theta th;
    th.lambda = lambda;
    th.values = Eigen::VectorXd::Zero(n);
    th.values(label) = -1.0;

    auto free_gradient = [&](const Eigen::VectorXd &t) {
        Eigen::VectorXd g = gradient(sigma, t, lambda);
        g(label) = 0.0;
        return g;
    };

    // Jacobi scaling: features of very different magnitude otherwise stall the descent
    const Eigen::VectorXd scale = ((sigma.entries.diagonal() / sigma.count).array() + lambda).cwiseMax(1e-12);
    Eigen::VectorXd precond = scale.cwiseInverse();
    precond(label) = 0.0;

    th.trace.push_back(objective(sigma, th.values, lambda));
    std::deque<double> recent{0.0}; // recent J values minus the current J
    Eigen::VectorXd g = free_gradient(th.values);
    double step = 1.0;

    for (th.iterations = 0; th.iterations < options.max_iterations; ++th.iterations) {
        Eigen::VectorXd free = th.values;
        free(label) = 0.0;
        if (g.norm() < options.tolerance * std::max(1.0, free.norm())) {
            th.converged = true;
            break;
        }
        const Eigen::VectorXd dir = precond.cwiseProduct(g);
        const double gd = g.dot(dir);
        // J is quadratic, so its change along dir is exact; evaluating J itself loses the last digits to cancellation
        const double curvature = dir.dot(sigma.entries * dir) / sigma.count + lambda * dir.squaredNorm();
        const double reference = *std::max_element(recent.begin(), recent.end());
        double change = 0;
        for (int halvings = 0;; ++halvings) {
            change = -step * gd + 0.5 * step * step * curvature;
            if (not std::isfinite(change)) throw Error("objective diverged at iteration " + std::to_string(th.iterations));
            if (change <= reference - options.armijo * step * gd) break;
            if (halvings > 200) {
                // no representable decrease left
                th.converged = true;
                return th;
            }
            step *= 0.5;
        }
        Eigen::VectorXd next = th.values - step * dir;
        Eigen::VectorXd gn = free_gradient(next);
        const Eigen::VectorXd s = next - th.values, y = gn - g;
        const double sy = s.dot(y);
        th.values = std::move(next);
        g = std::move(gn);
        th.trace.push_back(objective(sigma, th.values, lambda));
        for (double &r : recent) r -= change;
        recent.push_back(0.0);
        if (recent.size() > options.memory) recent.pop_front();
        // Barzilai-Borwein step in the scaled metric
        if (sy > 0) step = s.cwiseProduct(scale).dot(s) / sy;
    }
    return th;
}

Eigen::VectorXd lmfao::ml::ridge_solve(const SigmaMatrix &sigma, const FeatureIndex &features, double lambda)
{
    check(sigma, features, lambda);
    const auto n = static_cast<Eigen::Index>(features.size());
    const auto label = static_cast<Eigen::Index>(features.label_slot);
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i)
        if (i != label) free.push_back(i);
    const auto m = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd A(m, m);
    Eigen::VectorXd b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) A(i, j) = sigma.entries(free[i], free[j]) / sigma.count;
        A(i, i) += lambda;
        b(i) = sigma.entries(free[i], label) / sigma.count;
    }
    Eigen::VectorXd x = A.ldlt().solve(b);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < m; ++i) theta(free[i]) = x(i);
    theta(label) = -1.0;
    return theta;
}
