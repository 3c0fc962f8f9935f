#include "lmfao/oracle.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

using namespace lmfao;

namespace {

struct VecHash
{
    std::size_t operator()(const std::vector<double> &v) const
    {
        std::size_t h = 0x9e3779b97f4a7c15ull;
        for (double d : v) h = (h ^ std::hash<double>{}(d)) * 0x100000001b3ull;
        return h;
    }
};

} // namespace

MaterializedJoin lmfao::materialize_join(const Catalog &catalog, const JoinTree &tree)
{
    const std::size_t width = catalog.num_attributes();
    const double unset = std::numeric_limits<double>::quiet_NaN();

    /* Breadth-first from node 0; each node joins with the already materialized part through its parent edge. */
    std::vector<std::pair<RelId, std::optional<RelId>>> order{{0, std::nullopt}};
    for (std::size_t i = 0; i < order.size(); ++i)
        for (auto nb : tree.neighbors(order[i].first))
            if (not order[i].second or nb.node != *order[i].second) order.emplace_back(nb.node, order[i].first);

    MaterializedJoin result;
    result.width = width;
    std::vector<double> rows{};
    bool first = true;
    std::vector<bool> bound(width, false);

    for (auto [node, parent] : order) {
        const auto &rel = catalog.data(node);
        const auto &def = rel.def();
        std::vector<AttrId> attr_of(def.attributes.size());
        for (std::size_t p = 0; p < def.attributes.size(); ++p) attr_of[p] = catalog.attribute_id(def.attributes[p].name);

        if (first) {
            for (std::size_t r = 0; r < rel.size(); ++r) {
                std::vector<double> row(width, unset);
                for (std::size_t p = 0; p < attr_of.size(); ++p) row[attr_of[p]] = rel.at(r, p);
                rows.insert(rows.end(), row.begin(), row.end());
            }
            first = false;
        } else {
            std::vector<std::size_t> key_pos;
            for (std::size_t p = 0; p < attr_of.size(); ++p)
                if (bound[attr_of[p]]) key_pos.push_back(p);
            std::unordered_map<std::vector<double>, std::vector<std::size_t>, VecHash> index;
            for (std::size_t r = 0; r < rel.size(); ++r) {
                std::vector<double> key;
                for (auto p : key_pos) key.push_back(rel.at(r, p));
                index[key].push_back(r);
            }
            std::vector<double> next;
            const std::size_t n = rows.size() / width;
            std::vector<double> key;
            for (std::size_t i = 0; i < n; ++i) {
                const double *row = rows.data() + i * width;
                key.clear();
                for (auto p : key_pos) key.push_back(row[attr_of[p]]);
                auto it = index.find(key);
                if (it == index.end()) continue;
                for (auto r : it->second) {
                    std::size_t base = next.size();
                    next.insert(next.end(), row, row + width);
                    for (std::size_t p = 0; p < attr_of.size(); ++p) next[base + attr_of[p]] = rel.at(r, p);
                }
            }
            rows = std::move(next);
        }
        for (auto a : attr_of) bound[a] = true;
    }
    result.cells = std::move(rows);
    return result;
}

QueryResults lmfao::oracle_evaluate(const QueryBatch &batch, const Catalog &catalog, const JoinTree &tree)
{
    return oracle_evaluate(batch, catalog, materialize_join(catalog, tree));
}

QueryResults lmfao::oracle_evaluate(const QueryBatch &batch, const Catalog &catalog, const MaterializedJoin &join)
{
    QueryResults results;
    for (auto &q : batch.queries) {
        std::map<std::vector<double>, std::vector<double>> groups;
        if (q.group_by.empty()) groups[{}] = std::vector<double>(q.aggregates.size(), 0.0);
        for (std::size_t i = 0; i < join.size(); ++i) {
            auto row = join.row(i);
            std::vector<double> key;
            for (AttrId a : q.group_by) key.push_back(row[a]);
            auto &values = groups[key];
            values.resize(q.aggregates.size(), 0.0);
            for (std::size_t j = 0; j < q.aggregates.size(); ++j) {
                const auto &agg = q.aggregates[j];
                double prod = agg.constant;
                for (auto &f : agg.factors) prod *= catalog.udf(f.udf).evaluator(row[f.attr]);
                values[j] += prod;
            }
        }
        ResultTable table;
        table.keys = q.group_by;
        table.arity = q.aggregates.size();
        for (auto &[k, v] : groups) table.rows.emplace_back(k, v);
        results.emplace(q.id, std::move(table));
    }
    return results;
}
