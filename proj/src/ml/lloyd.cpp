#include "lmfao/ml/lloyd.hpp"

#include "lmfao/catalog.hpp"

#include <algorithm>
#include <random>

using namespace lmfao;
using namespace lmfao::ml;

std::size_t lmfao::ml::nearest_centroid(const Eigen::VectorXd &point, const Eigen::MatrixXd &centroids)
{
    if (centroids.rows() == 0) throw Error("no centroids");
    if (point.size() != centroids.cols())
        throw Error("point has " + std::to_string(point.size()) + " dimensions, centroids have " +
                    std::to_string(centroids.cols()));
    Eigen::Index best = 0;
    (centroids.rowwise() - point.transpose()).rowwise().squaredNorm().minCoeff(&best);
    return static_cast<std::size_t>(best);
}

double lmfao::ml::kmeans_objective(const Eigen::MatrixXd &points, const Eigen::VectorXd &weights,
                                   const Eigen::MatrixXd &centroids)
{
    double total = 0;
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        total += weights(i) * (centroids.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff();
    return total;
}

namespace {

std::size_t distinct_rows(const Eigen::MatrixXd &points, const Eigen::VectorXd &weights)
{
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        if (weights(i) > 0) {
            const Eigen::RowVectorXd r = points.row(i);
            rows.emplace_back(r.data(), r.data() + r.size());
        }
    std::sort(rows.begin(), rows.end());
    return static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin());
}

} // namespace

LloydResult lmfao::ml::weighted_lloyd(const Eigen::MatrixXd &points, const Eigen::VectorXd &weights, std::size_t k,
                                      std::uint64_t seed, std::size_t max_iterations)
{
    if (k == 0) throw Error("k must be positive");
    if (points.rows() != weights.size()) throw Error("one weight per point required");
    if ((weights.array() < 0).any()) throw Error("weights must be non-negative");
    if (not(weights.sum() > 0)) throw Error("all weights are zero");

    LloydResult res;
    const std::size_t distinct = distinct_rows(points, weights);
    if (k > distinct) {
        res.warning = "k reduced from " + std::to_string(k) + " to " + std::to_string(distinct) + " distinct points";
        k = distinct;
    }
    const Eigen::Index n = points.rows(), d = points.cols(), kk = static_cast<Eigen::Index>(k);

    // k-means++ seeding with weighted D² sampling
    std::mt19937_64 gen(seed);
    auto unit = [&] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
    auto draw = [&](const Eigen::VectorXd &mass) {
        const double r = unit() * mass.sum();
        double acc = 0;
        Eigen::Index last = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (mass(i) <= 0) continue;
            last = i;
            acc += mass(i);
            if (acc > r) return i;
        }
        return last;
    };
    res.centroids.resize(kk, d);
    res.centroids.row(0) = points.row(draw(weights));
    Eigen::VectorXd closest = (points.rowwise() - res.centroids.row(0)).rowwise().squaredNorm();
    for (Eigen::Index c = 1; c < kk; ++c) {
        const Eigen::VectorXd mass = weights.cwiseProduct(closest);
        res.centroids.row(c) = points.row(draw(mass));
        closest = closest.cwiseMin((points.rowwise() - res.centroids.row(c)).rowwise().squaredNorm());
    }

    res.assignment.assign(static_cast<std::size_t>(n), 0);
    for (res.iterations = 0; res.iterations < max_iterations;) {
        double obj = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index best = 0;
            obj += weights(i) * (res.centroids.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff(&best);
            res.assignment[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
        }
        res.trace.push_back(obj);

        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(kk, d);
        Eigen::VectorXd mass = Eigen::VectorXd::Zero(kk);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto c = static_cast<Eigen::Index>(res.assignment[static_cast<std::size_t>(i)]);
            sums.row(c) += weights(i) * points.row(i);
            mass(c) += weights(i);
        }
        double moved = 0;
        for (Eigen::Index c = 0; c < kk; ++c) {
            if (mass(c) <= 0) continue; // empty cluster keeps its centroid
            const Eigen::RowVectorXd next = sums.row(c) / mass(c);
            moved = std::max(moved, (next - res.centroids.row(c)).norm());
            res.centroids.row(c) = next;
        }
        ++res.iterations;
        if (moved < 1e-9) break;
    }

    res.objective = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        res.objective += weights(i) * (points.row(i) - res.centroids.row(static_cast<Eigen::Index>(
                                                           res.assignment[static_cast<std::size_t>(i)])))
                                          .squaredNorm();
    res.trace.push_back(res.objective);
    return res;
}
