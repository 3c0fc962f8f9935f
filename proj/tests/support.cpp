#include "support.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <set>

using namespace lmfao;

namespace testing {

std::vector<Row> hash_join(const Catalog &catalog)
{
    const std::size_t n = catalog.num_relations();
    const std::size_t width = catalog.num_attributes();
    std::vector<std::vector<std::size_t>> adj(n);
    for (auto &[a, b] : catalog.schema_edges()) {
        adj[catalog.relation_id(a)].push_back(catalog.relation_id(b));
        adj[catalog.relation_id(b)].push_back(catalog.relation_id(a));
    }
    auto attrs_of = [&](RelId r) {
        std::vector<AttrId> out;
        for (auto &a : catalog.relation(r).attributes) out.push_back(catalog.attribute_id(a.name));
        return out;
    };

    std::vector<Row> rows;
    if (n == 0) return rows;
    const auto &first = catalog.data(0);
    const auto first_attrs = attrs_of(0);
    for (std::size_t i = 0; i < first.size(); ++i) {
        Row row(width, std::numeric_limits<double>::quiet_NaN());
        for (std::size_t p = 0; p < first_attrs.size(); ++p) row[first_attrs[p]] = first.at(i, p);
        rows.push_back(std::move(row));
    }

    std::set<AttrId> bound(first_attrs.begin(), first_attrs.end());
    std::vector<bool> seen(n, false);
    seen[0] = true;
    std::deque<RelId> queue{0};
    while (not queue.empty()) {
        const RelId cur = queue.front();
        queue.pop_front();
        for (RelId next : adj[cur]) {
            if (seen[next]) continue;
            seen[next] = true;
            queue.push_back(next);
            const auto attrs = attrs_of(next);
            std::vector<std::size_t> shared, fresh;
            for (std::size_t p = 0; p < attrs.size(); ++p) (bound.contains(attrs[p]) ? shared : fresh).push_back(p);

            const auto &rel = catalog.data(next);
            std::map<std::vector<double>, std::vector<std::size_t>> index;
            for (std::size_t i = 0; i < rel.size(); ++i) {
                std::vector<double> key;
                for (auto p : shared) key.push_back(rel.at(i, p));
                index[key].push_back(i);
            }
            std::vector<Row> out;
            for (auto &row : rows) {
                std::vector<double> key;
                for (auto p : shared) key.push_back(row[attrs[p]]);
                auto it = index.find(key);
                if (it == index.end()) continue;
                for (auto i : it->second) {
                    Row r = row;
                    for (auto p : fresh) r[attrs[p]] = rel.at(i, p);
                    out.push_back(std::move(r));
                }
            }
            rows = std::move(out);
            for (auto a : attrs) bound.insert(a);
        }
    }
    return rows;
}

QueryResults scan_queries(const QueryBatch &batch, const Catalog &catalog, const std::vector<Row> &rows)
{
    QueryResults out;
    for (auto &q : batch.queries) {
        std::map<std::vector<double>, std::vector<double>> groups;
        if (q.group_by.empty()) groups[{}] = std::vector<double>(q.aggregates.size(), 0.0);
        for (auto &row : rows) {
            std::vector<double> key;
            for (AttrId a : q.group_by) key.push_back(row[a]);
            auto &acc = groups.try_emplace(key, std::vector<double>(q.aggregates.size(), 0.0)).first->second;
            for (std::size_t j = 0; j < q.aggregates.size(); ++j) {
                double v = q.aggregates[j].constant;
                for (auto &f : q.aggregates[j].factors) v *= catalog.udf(f.udf).evaluator(row[f.attr]);
                acc[j] += v;
            }
        }
        ResultTable t;
        t.keys = q.group_by;
        t.arity = q.aggregates.size();
        for (auto &[k, v] : groups) t.rows.emplace_back(k, v);
        out[q.id] = std::move(t);
    }
    return out;
}

Eigen::VectorXd dense_ridge(const Catalog &, const std::vector<Row> &rows, const ml::FeatureIndex &features,
                            double lambda)
{
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(features.size());
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto &row = rows[static_cast<std::size_t>(i)];
        for (Eigen::Index s = 0; s < p; ++s) {
            const auto &slot = features.slots[static_cast<std::size_t>(s)];
            switch (slot.kind) {
            case ml::FeatureSlot::intercept: X(i, s) = 1; break;
            case ml::FeatureSlot::continuous: X(i, s) = row[slot.attr]; break;
            case ml::FeatureSlot::category: X(i, s) = row[slot.attr] == slot.code ? 1 : 0; break;
            }
        }
        y(i) = row[features.label];
    }
    const auto ls = static_cast<Eigen::Index>(features.label_slot);
    std::vector<Eigen::Index> free;
    for (Eigen::Index s = 0; s < p; ++s)
        if (s != ls) free.push_back(s);
    Eigen::MatrixXd Xf(n, static_cast<Eigen::Index>(free.size()));
    for (std::size_t j = 0; j < free.size(); ++j) Xf.col(static_cast<Eigen::Index>(j)) = X.col(free[j]);
    const double N = static_cast<double>(n);
    Eigen::MatrixXd A = Xf.transpose() * Xf / N;
    A.diagonal().array() += lambda;
    const Eigen::VectorXd b = Xf.transpose() * y / N;
    const Eigen::VectorXd sol = A.colPivHouseholderQr().solve(b);
    Eigen::VectorXd theta(p);
    for (std::size_t j = 0; j < free.size(); ++j) theta(free[j]) = sol(static_cast<Eigen::Index>(j));
    theta(ls) = -1;
    return theta;
}

double centered_variance(const std::vector<double> &ys)
{
    if (ys.empty()) return 0;
    double mean = 0;
    for (double y : ys) mean += y;
    mean /= static_cast<double>(ys.size());
    double s = 0;
    for (double y : ys) s += (y - mean) * (y - mean);
    return s;
}

BruteSplit brute_force_split(const Catalog &catalog, const std::vector<Row> &rows, const std::vector<AttrId> &features,
                             AttrId label)
{
    BruteSplit best;
    for (AttrId x : features) {
        std::set<double> values;
        for (auto &r : rows) values.insert(r[x]);
        const bool categorical = catalog.attribute(x).kind == AttrKind::categorical;
        if (values.size() < 2) continue;
        for (double t : values) {
            if (not categorical and t == *values.rbegin()) continue;
            std::vector<double> left, right;
            for (auto &r : rows) ((categorical ? r[x] == t : r[x] <= t) ? left : right).push_back(r[label]);
            const double score = centered_variance(left) + centered_variance(right);
            if (not best.found or score < best.score) best = {score, true};
        }
    }
    return best;
}

bool satisfies(const Row &row, const std::vector<ml::Condition> &path)
{
    for (auto &c : path)
        if (not apply(c.op, row[c.attr], c.threshold)) return false;
    return true;
}

} // namespace testing
