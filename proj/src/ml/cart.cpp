#include "lmfao/ml/cart.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>

using namespace lmfao;
using namespace lmfao::ml;

std::string lmfao::ml::describe(const Catalog &catalog, const Condition &c)
{
    return catalog.attribute(c.attr).name + " " + to_string(c.op) + " " + catalog.format_value(c.attr, c.threshold);
}

double DecisionTree::predict(const std::function<double(AttrId)> &value_of) const
{
    if (nodes.empty()) throw Error("empty decision tree");
    const TreeNode *n = &nodes.front();
    while (n->split) n = &nodes.at(static_cast<std::size_t>(apply(n->split->op, value_of(n->split->attr), n->split->threshold) ? n->left : n->right));
    return n->prediction;
}

std::vector<Factor> lmfao::ml::path_factors(Catalog &catalog, const std::vector<Condition> &path)
{
    std::map<AttrId, std::vector<std::pair<CmpOp, double>>> by_attr;
    for (auto &c : path) by_attr[c.attr].emplace_back(c.op, c.threshold);
    std::vector<Factor> out;
    for (auto &[attr, conds] : by_attr) out.push_back({attr, catalog.indicator_conjunction(conds)});
    return out;
}

std::string lmfao::ml::query_id_for(const Catalog &catalog, AttrId feature)
{
    return "cart(" + catalog.attribute(feature).name + ")";
}

namespace {

std::vector<AggregateSpec> moment_aggregates(const Catalog &catalog, const std::vector<Factor> &filters, AttrId label)
{
    for (auto &f : filters)
        if (f.attr == label) throw Error("conditions on the label are not supported");
    std::vector<AggregateSpec> aggs(3, AggregateSpec{filters, 1.0});
    aggs[1].factors.push_back({label, catalog.udf_id("identity")});
    aggs[2].factors.push_back({label, catalog.udf_id("square")});
    return aggs;
}

} // namespace

Query lmfao::ml::cart_stats_query(Catalog &catalog, const std::vector<Condition> &path, AttrId label)
{
    Query q;
    q.id = "cart_stats";
    q.aggregates = moment_aggregates(catalog, path_factors(catalog, path), label);
    return canonicalize(catalog, std::move(q));
}

QueryBatch lmfao::ml::cart_node_batch(Catalog &catalog, const TreeNode &node, const std::vector<AttrId> &features,
                                      AttrId label)
{
    const auto filters = path_factors(catalog, node.path);
    QueryBatch batch;
    for (AttrId x : features) {
        if (x == label) throw Error("label " + catalog.attribute(label).name + " cannot be a feature");
        Query q;
        q.id = query_id_for(catalog, x);
        q.group_by = {x};
        q.aggregates = moment_aggregates(catalog, filters, label);
        add_query(batch, canonicalize(catalog, std::move(q)));
    }
    return batch;
}

std::optional<SplitChoice> lmfao::ml::cart_best_split(const QueryResults &results, const Catalog &catalog,
                                                      const std::vector<AttrId> &features, const TreeNode &node)
{
    std::vector<AttrId> order = features;
    std::sort(order.begin(), order.end(),
              [&](AttrId a, AttrId b) { return catalog.attribute(a).name < catalog.attribute(b).name; });

    std::optional<SplitChoice> best;
    for (AttrId x : order) {
        auto it = results.find(query_id_for(catalog, x));
        if (it == results.end()) throw Error("missing result " + query_id_for(catalog, x));
        std::vector<std::pair<double, Moments>> values;
        Moments total;
        for (auto &[key, v] : it->second.rows) {
            if (v.at(0) == 0) continue; // filtered out by the path conditions
            values.push_back({key.at(0), {v[0], v[1], v[2]}});
            total += values.back().second;
        }
        if (std::fabs(total.count - node.moments.count) > 1e-9 * std::max(1.0, node.moments.count))
            throw Error("inconsistent counts for " + catalog.attribute(x).name + ": " + format_number(total.count) +
                        " vs node " + format_number(node.moments.count));
        const bool categorical = catalog.attribute(x).kind == AttrKind::categorical;
        auto consider = [&](const Moments &left, double t, double next) {
            const Moments right = total - left;
            const double score = left.variance() + right.variance();
            if (best and not(score < best->score)) return;
            SplitChoice s;
            s.left = {x, categorical ? CmpOp::eq : CmpOp::le, t};
            s.right = {x, categorical ? CmpOp::ne : CmpOp::ge, categorical ? t : next};
            s.left_moments = left;
            s.right_moments = right;
            s.score = score;
            best = s;
        };
        if (categorical) {
            if (values.size() < 2) continue;
            for (auto &[t, m] : values) consider(m, t, t);
        } else {
            Moments prefix;
            for (std::size_t i = 0; i + 1 < values.size(); ++i) {
                prefix += values[i].second;
                consider(prefix, values[i].first, values[i + 1].first);
            }
        }
    }
    return best;
}

DecisionTree lmfao::ml::cart_train(Catalog &catalog, const std::vector<AttrId> &features, AttrId label,
                                   const CartOptions &options, const BatchRunner &run)
{
    if (catalog.attribute(label).kind != AttrKind::continuous) throw Error("label must be continuous");
    DecisionTree tree;
    {
        QueryBatch stats;
        add_query(stats, cart_stats_query(catalog, {}, label));
        const auto res = run(catalog, stats);
        const auto &rows = res.at("cart_stats").rows;
        TreeNode root;
        if (not rows.empty()) root.moments = {rows[0].second[0], rows[0].second[1], rows[0].second[2]};
        tree.nodes.push_back(root);
    }
    std::deque<std::size_t> queue{0};
    while (not queue.empty()) {
        const std::size_t id = queue.front();
        queue.pop_front();
        TreeNode node = tree.nodes[id];
        node.prediction = node.moments.count > 0 ? node.moments.sum / node.moments.count : 0.0;
        tree.nodes[id].prediction = node.prediction;
        if (node.depth >= options.max_depth or node.moments.count < options.min_leaf or features.empty()) continue;

        const auto results = run(catalog, cart_node_batch(catalog, node, features, label));
        const auto split = cart_best_split(results, catalog, features, node);
        // no split unless it lowers the variance beyond rounding noise
        if (not split or node.moments.variance() - split->score <= 1e-9 * std::max(1.0, node.moments.variance())) continue;

        TreeNode l, r;
        l.path = r.path = node.path;
        l.path.push_back(split->left);
        r.path.push_back(split->right);
        l.moments = split->left_moments;
        r.moments = split->right_moments;
        l.depth = r.depth = node.depth + 1;
        tree.nodes[id].split = split->left;
        tree.nodes[id].score = split->score;
        tree.nodes[id].left = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(std::move(l));
        tree.nodes[id].right = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(std::move(r));
        queue.push_back(tree.nodes.size() - 2);
        queue.push_back(tree.nodes.size() - 1);
    }
    return tree;
}
