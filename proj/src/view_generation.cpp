#include "lmfao/view_generation.hpp"

#include <algorithm>
#include <map>
#include <tuple>

using namespace lmfao;

std::vector<ViewId> ViewSet::views_on(RelId from, RelId to) const
{
    std::vector<ViewId> ids;
    for (auto &v : views)
        if (v.from == from and v.to == to) ids.push_back(v.id);
    return ids;
}

RootAssignment lmfao::assign_roots(const QueryBatch &batch, const JoinTree &tree, const Catalog &catalog)
{
    auto better_name = [&](RelId a, RelId b) { return tree.name(a) < tree.name(b); };

    RootAssignment roots;
    for (auto &q : batch.queries) {
        std::optional<RelId> best;
        if (q.group_by.empty()) {
            for (RelId n = 0; n < tree.size(); ++n)
                if (not best or tree.degree(n) > tree.degree(*best) or
                    (tree.degree(n) == tree.degree(*best) and better_name(n, *best)))
                    best = n;
        } else {
            std::size_t best_domain = 0;
            for (AttrId a : q.group_by) {
                bool found = false;
                for (RelId n = 0; n < tree.size(); ++n) {
                    if (not tree.contains(n, a)) continue;
                    found = true;
                    const std::size_t domain = catalog.loaded(n) ? catalog.stats(n, a).distinct_count : 0;
                    if (not best or domain > best_domain or (domain == best_domain and better_name(n, *best))) {
                        best = n;
                        best_domain = domain;
                    }
                }
                if (not found)
                    throw Error("query " + q.id + ": group-by attribute " + catalog.attribute(a).name +
                                " occurs in no relation");
            }
        }
        roots[q.id] = *best;
    }
    return roots;
}

namespace {

struct Decomposer
{
    const Query &query;
    const JoinTree &tree;
    Decomposition out;

    /// Builds the views below `node` and returns the recipes of `specs` at `node`.
    std::pair<std::vector<SlotRecipe>, std::vector<ViewId>> visit(RelId node, std::optional<RelId> parent,
                                                                   const std::vector<AggregateSpec> &specs)
    {
        std::vector<ViewId> children;
        for (auto nb : tree.neighbors(node)) {
            if (parent and nb.node == *parent) continue;
            const RelId child = nb.node;
            const auto sub_attrs = tree.subtree_attributes(child, node);
            auto in_subtree = [&](AttrId a) { return std::binary_search(sub_attrs.begin(), sub_attrs.end(), a); };

            std::vector<AggregateSpec> child_specs;
            for (auto &spec : specs) {
                AggregateSpec restricted;
                for (auto &f : spec.factors)
                    if (not tree.contains(node, f.attr) and in_subtree(f.attr)) restricted.factors.push_back(f);
                child_specs.push_back(std::move(restricted));
            }

            DirectionalView view;
            view.from = child;
            view.to = node;
            view.group_by = tree.join_attributes(child, node);
            for (AttrId g : query.group_by)
                if (in_subtree(g)) view.group_by.push_back(g);
            std::sort(view.group_by.begin(), view.group_by.end());
            view.group_by.erase(std::unique(view.group_by.begin(), view.group_by.end()), view.group_by.end());

            auto [recipes, incoming] = visit(child, node, child_specs);
            view.aggregates = std::move(child_specs);
            view.recipes = std::move(recipes);
            view.incoming = std::move(incoming);
            view.id = out.views.size();
            children.push_back(view.id);
            out.views.push_back(std::move(view));
        }
        std::sort(children.begin(), children.end());

        std::vector<SlotRecipe> recipes;
        for (std::size_t j = 0; j < specs.size(); ++j) {
            SlotRecipe r;
            r.constant = specs[j].constant;
            for (auto &f : specs[j].factors)
                if (tree.contains(node, f.attr)) r.local.push_back(f);
            for (ViewId c : children) r.lookups.emplace_back(c, j);
            recipes.push_back(std::move(r));
        }
        return {std::move(recipes), children};
    }
};

} // namespace

Decomposition lmfao::decompose_query(const Query &query, std::size_t query_index, RelId root, const JoinTree &tree)
{
    if (root >= tree.size()) throw Error("decompose: root is not a node of the join tree");
    Decomposer d{query, tree, {}};
    auto [recipes, incoming] = d.visit(root, std::nullopt, query.aggregates);
    d.out.output.query = query_index;
    d.out.output.node = root;
    d.out.output.recipes = std::move(recipes);
    d.out.output.incoming = std::move(incoming);
    return std::move(d.out);
}

ViewSet lmfao::merge_views(const std::vector<Decomposition> &decompositions, const JoinTree &tree, RootAssignment roots)
{
    ViewSet set;
    set.roots = std::move(roots);
    std::map<std::tuple<RelId, RelId, std::vector<AttrId>>, ViewId> by_key;

    /* First pass: merged view id and slot of every unmerged view aggregate. */
    std::vector<std::vector<ViewId>> merged_id(decompositions.size());
    std::vector<std::vector<std::vector<std::size_t>>> merged_slot(decompositions.size());
    for (std::size_t d = 0; d < decompositions.size(); ++d) {
        for (auto &v : decompositions[d].views) {
            auto key = std::make_tuple(v.from, v.to, v.group_by);
            auto [it, inserted] = by_key.try_emplace(key, set.views.size());
            if (inserted) {
                DirectionalView mv;
                mv.id = set.views.size();
                mv.from = v.from;
                mv.to = v.to;
                mv.group_by = v.group_by;
                set.views.push_back(std::move(mv));
            }
            auto &mv = set.views[it->second];
            std::vector<std::size_t> slots;
            for (auto &spec : v.aggregates) {
                auto pos = std::find(mv.aggregates.begin(), mv.aggregates.end(), spec);
                if (pos == mv.aggregates.end()) {
                    mv.aggregates.push_back(spec);
                    mv.recipes.emplace_back();
                    pos = mv.aggregates.end() - 1;
                }
                slots.push_back(static_cast<std::size_t>(pos - mv.aggregates.begin()));
            }
            merged_id[d].push_back(it->second);
            merged_slot[d].push_back(std::move(slots));
        }
    }

    auto translate = [&](std::size_t d, const SlotRecipe &r) {
        SlotRecipe t;
        t.local = r.local;
        t.constant = r.constant;
        for (auto [v, j] : r.lookups) t.lookups.emplace_back(merged_id[d][v], merged_slot[d][v][j]);
        std::sort(t.lookups.begin(), t.lookups.end());
        return t;
    };
    auto translate_ids = [&](std::size_t d, const std::vector<ViewId> &ids) {
        std::vector<ViewId> t;
        for (auto v : ids) t.push_back(merged_id[d][v]);
        std::sort(t.begin(), t.end());
        return t;
    };
    auto add_consumer = [](DirectionalView &view, Consumer::Kind kind, std::size_t id, std::size_t consumer_slot,
                           std::size_t slot) {
        auto it = std::find_if(view.consumers.begin(), view.consumers.end(),
                               [&](const Consumer &c) { return c.kind == kind and c.id == id; });
        if (it == view.consumers.end()) {
            view.consumers.push_back({kind, id, {}});
            it = view.consumers.end() - 1;
        }
        std::pair<std::size_t, std::size_t> entry{consumer_slot, slot};
        if (std::find(it->slots.begin(), it->slots.end(), entry) == it->slots.end()) it->slots.push_back(entry);
    };

    /* Second pass: recipes, incoming sets and consumers in merged terms. */
    for (std::size_t d = 0; d < decompositions.size(); ++d) {
        const auto &dec = decompositions[d];
        for (std::size_t v = 0; v < dec.views.size(); ++v) {
            auto &mv = set.views[merged_id[d][v]];
            auto incoming = translate_ids(d, dec.views[v].incoming);
            if (mv.incoming.empty()) mv.incoming = incoming;
            if (mv.incoming != incoming) throw Error("internal: merged view " + std::to_string(mv.id) + " has inconsistent inputs");
            for (std::size_t j = 0; j < dec.views[v].aggregates.size(); ++j) {
                auto recipe = translate(d, dec.views[v].recipes[j]);
                auto &slot_recipe = mv.recipes[merged_slot[d][v][j]];
                if (slot_recipe == SlotRecipe{}) slot_recipe = recipe;
                if (slot_recipe != recipe) throw Error("internal: merged view slot has inconsistent recipes");
                for (auto [child, cj] : dec.views[v].recipes[j].lookups)
                    add_consumer(set.views[merged_id[d][child]], Consumer::view, mv.id, merged_slot[d][v][j],
                                 merged_slot[d][child][cj]);
            }
        }
        QueryOutput out = dec.output;
        out.incoming = translate_ids(d, dec.output.incoming);
        out.recipes.clear();
        for (std::size_t j = 0; j < dec.output.recipes.size(); ++j) {
            out.recipes.push_back(translate(d, dec.output.recipes[j]));
            for (auto [child, cj] : dec.output.recipes[j].lookups)
                add_consumer(set.views[merged_id[d][child]], Consumer::query, dec.output.query, j,
                             merged_slot[d][child][cj]);
        }
        set.outputs.push_back(std::move(out));
    }

    /* Names: V_{From->To}, with a #k suffix for further views on the same direction. */
    std::map<std::pair<RelId, RelId>, int> counts;
    for (auto &v : set.views) {
        int k = ++counts[{v.from, v.to}];
        v.name = "V_{" + tree.name(v.from) + "->" + tree.name(v.to) + "}";
        if (k > 1) v.name += "#" + std::to_string(k);
        for (auto &c : v.consumers) std::sort(c.slots.begin(), c.slots.end());
    }
    return set;
}

ViewSet lmfao::generate_views(const QueryBatch &batch, const JoinTree &tree, const Catalog &catalog,
                              const RootAssignment &pinned)
{
    RootAssignment roots = assign_roots(batch, tree, catalog);
    for (auto &[id, node] : pinned) {
        if (not batch.index_of(id)) throw Error("unknown query " + id);
        if (node >= tree.size()) throw Error("root of query " + id + " is not a join tree node");
        roots[id] = node;
    }
    std::vector<Decomposition> decs;
    for (std::size_t i = 0; i < batch.queries.size(); ++i)
        decs.push_back(decompose_query(batch.queries[i], i, roots.at(batch.queries[i].id), tree));
    return merge_views(decs, tree, std::move(roots));
}

ViewSet lmfao::reassign_root(const ViewSet &views, const QueryBatch &batch, const JoinTree &tree,
                             const std::string &query_id, RelId node)
{
    if (not batch.index_of(query_id)) throw Error("unknown query " + query_id);
    if (node >= tree.size()) throw Error("unknown node for query " + query_id);
    RootAssignment roots = views.roots;
    roots[query_id] = node;
    std::vector<Decomposition> decs;
    for (std::size_t i = 0; i < batch.queries.size(); ++i)
        decs.push_back(decompose_query(batch.queries[i], i, roots.at(batch.queries[i].id), tree));
    return merge_views(decs, tree, std::move(roots));
}
