#include "lmfao/planner.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <tuple>

using namespace lmfao;

const std::vector<AttrId> &lmfao::output_keys(const OutputRef &out, const ViewSet &views, const QueryBatch &batch)
{
    if (out.kind == OutputRef::view) return views.views.at(out.id).group_by;
    return batch.queries.at(out.id).group_by;
}

std::string lmfao::output_name(const OutputRef &out, const ViewSet &views, const QueryBatch &batch)
{
    if (out.kind == OutputRef::view) return views.views.at(out.id).name;
    return batch.queries.at(out.id).id;
}

namespace {

const std::vector<SlotRecipe> &recipes_of(const OutputRef &out, const ViewSet &views)
{
    if (out.kind == OutputRef::view) return views.views.at(out.id).recipes;
    return views.outputs.at(out.id).recipes;
}

const std::vector<ViewId> &incoming_of(const OutputRef &out, const ViewSet &views)
{
    if (out.kind == OutputRef::view) return views.views.at(out.id).incoming;
    return views.outputs.at(out.id).incoming;
}

RelId node_of(const OutputRef &out, const ViewSet &views)
{
    if (out.kind == OutputRef::view) return views.views.at(out.id).from;
    return views.outputs.at(out.id).node;
}

std::size_t output_rank(const OutputRef &out, const ViewSet &views)
{
    return out.kind == OutputRef::view ? out.id : views.views.size() + out.id;
}

std::size_t tuple_count(const Catalog &catalog, RelId node)
{
    return catalog.loaded(node) ? catalog.data(node).size() : 0;
}

/// Producer group of each view, given a grouping.
std::vector<std::size_t> producers(const std::vector<ViewGroup> &groups, const ViewSet &views)
{
    std::vector<std::size_t> producer(views.views.size(), SIZE_MAX);
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (auto &o : groups[g].outputs)
            if (o.kind == OutputRef::view) producer[o.id] = g;
    return producer;
}

bool has_cycle(const std::vector<ViewGroup> &groups, const ViewSet &views)
{
    auto producer = producers(groups, views);
    std::vector<std::vector<std::size_t>> succ(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (ViewId v : groups[g].incoming) succ.at(producer.at(v)).push_back(g);

    std::vector<int> state(groups.size(), 0);
    std::function<bool(std::size_t)> visit = [&](std::size_t g) {
        state[g] = 1;
        for (auto s : succ[g]) {
            if (state[s] == 1) return true;
            if (state[s] == 0 and visit(s)) return true;
        }
        state[g] = 2;
        return false;
    };
    for (std::size_t g = 0; g < groups.size(); ++g)
        if (state[g] == 0 and visit(g)) return true;
    return false;
}

} // namespace

std::vector<ViewGroup> lmfao::group_views(const ViewSet &views, const JoinTree &tree, const Catalog &catalog)
{
    std::vector<OutputRef> all;
    for (auto &v : views.views) all.push_back({OutputRef::view, v.id});
    for (std::size_t q = 0; q < views.outputs.size(); ++q) all.push_back({OutputRef::query, q});

    std::vector<ViewGroup> groups;
    std::map<std::pair<RelId, std::vector<ViewId>>, std::size_t> by_key;
    for (auto &o : all) {
        auto key = std::make_pair(node_of(o, views), incoming_of(o, views));
        auto [it, inserted] = by_key.try_emplace(key, groups.size());
        if (inserted) {
            ViewGroup g;
            g.node = key.first;
            g.incoming = key.second;
            groups.push_back(std::move(g));
        }
        groups[it->second].outputs.push_back(o);
    }

    /* A group whose incoming set is strictly contained in another's at the same node joins that group when the extra
     * views are keyed on node attributes only (they act as semi-join filters) and no dependency cycle arises.  Larger
     * relations are merged first since they benefit most from a shared scan. */
    std::vector<std::size_t> candidates(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i) candidates[i] = i;
    std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
        const auto ta = tuple_count(catalog, groups[a].node), tb = tuple_count(catalog, groups[b].node);
        if (ta != tb) return ta > tb;
        return tree.name(groups[a].node) < tree.name(groups[b].node);
    });

    std::vector<bool> removed(groups.size(), false);
    auto live = [&] {
        std::vector<ViewGroup> out;
        for (std::size_t i = 0; i < groups.size(); ++i)
            if (not removed[i]) out.push_back(groups[i]);
        return out;
    };
    for (std::size_t a : candidates) {
        std::vector<std::size_t> targets;
        for (std::size_t b = 0; b < groups.size(); ++b) {
            if (b == a or removed[b] or groups[b].node != groups[a].node) continue;
            const auto &in_a = groups[a].incoming, &in_b = groups[b].incoming;
            if (in_a.size() >= in_b.size() or not std::includes(in_b.begin(), in_b.end(), in_a.begin(), in_a.end()))
                continue;
            bool filters_only = true;
            for (ViewId v : in_b)
                if (not std::binary_search(in_a.begin(), in_a.end(), v))
                    for (AttrId k : views.views[v].group_by)
                        if (not tree.contains(groups[a].node, k)) filters_only = false;
            if (filters_only) targets.push_back(b);
        }
        std::stable_sort(targets.begin(), targets.end(), [&](std::size_t x, std::size_t y) {
            return groups[x].incoming.size() < groups[y].incoming.size();
        });
        for (std::size_t b : targets) {
            auto saved = groups[b];
            groups[b].outputs.insert(groups[b].outputs.end(), groups[a].outputs.begin(), groups[a].outputs.end());
            removed[a] = true;
            if (not has_cycle(live(), views)) break;
            groups[b] = std::move(saved);
            removed[a] = false;
        }
    }

    auto result = live();
    for (auto &g : result)
        std::sort(g.outputs.begin(), g.outputs.end(),
                  [&](const OutputRef &x, const OutputRef &y) { return output_rank(x, views) < output_rank(y, views); });
    return result;
}

std::vector<std::vector<GroupId>> GroupDag::waves() const
{
    std::vector<std::size_t> depth(groups.size(), 0);
    for (GroupId g = 0; g < groups.size(); ++g)
        for (auto [p, c] : edges)
            if (c == g) depth[g] = std::max(depth[g], depth[p] + 1);
    std::vector<std::vector<GroupId>> out;
    for (GroupId g = 0; g < groups.size(); ++g) {
        if (out.size() <= depth[g]) out.resize(depth[g] + 1);
        out[depth[g]].push_back(g);
    }
    return out;
}

GroupDag lmfao::build_dependency_dag(std::vector<ViewGroup> groups, const ViewSet &views)
{
    auto producer = producers(groups, views);
    for (auto &g : groups)
        for (ViewId v : g.incoming)
            if (v >= producer.size() or producer[v] == SIZE_MAX)
                throw Error("internal: view " + std::to_string(v) + " is consumed but produced by no group");
    if (has_cycle(groups, views)) throw Error("internal: cycle detected in the group dependency graph");

    /* Longest-path depth, then the rank of the first output: a deterministic topological numbering. */
    const std::size_t n = groups.size();
    std::vector<std::size_t> depth(n, 0);
    for (std::size_t round = 0; round < n; ++round)
        for (std::size_t g = 0; g < n; ++g)
            for (ViewId v : groups[g].incoming) depth[g] = std::max(depth[g], depth[producer[v]] + 1);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    auto first_rank = [&](std::size_t g) {
        std::size_t r = SIZE_MAX;
        for (auto &o : groups[g].outputs) r = std::min(r, output_rank(o, views));
        return r;
    };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::make_pair(depth[a], first_rank(a)) < std::make_pair(depth[b], first_rank(b));
    });

    GroupDag dag;
    std::vector<GroupId> new_id(n);
    for (std::size_t i = 0; i < n; ++i) {
        new_id[order[i]] = i;
        dag.groups.push_back(std::move(groups[order[i]]));
        dag.groups.back().id = i;
    }
    dag.producer.resize(views.views.size());
    for (ViewId v = 0; v < views.views.size(); ++v) dag.producer[v] = new_id[producer[v]];
    std::set<std::pair<GroupId, GroupId>> edges;
    for (auto &g : dag.groups)
        for (ViewId v : g.incoming) edges.emplace(dag.producer[v], g.id);
    dag.edges.assign(edges.begin(), edges.end());
    return dag;
}

AttributeOrder lmfao::choose_attribute_order(const ViewGroup &group, const ViewSet &views, const QueryBatch &batch,
                                             const JoinTree &tree, const Catalog &catalog)
{
    const RelId node = group.node;
    std::map<AttrId, std::size_t> refs;
    for (ViewId v : group.incoming)
        for (AttrId a : views.views[v].group_by) ++refs[a];
    // Output keys and factors must be reachable from the node relation or an incoming view.
    for (auto &o : group.outputs) {
        auto check = [&](AttrId a) {
            if (tree.contains(node, a)) return;
            for (ViewId v : group.incoming)
                if (std::binary_search(views.views[v].group_by.begin(), views.views[v].group_by.end(), a)) return;
            throw Error("attribute " + catalog.attribute(a).name + " of " + tree.name(node) +
                        " output is neither in the relation nor in an incoming view");
        };
        for (auto &r : recipes_of(o, views))
            for (auto &f : r.local) check(f.attr);
        for (AttrId a : output_keys(o, views, batch)) check(a);
    }
    for (auto &o : group.outputs)
        for (AttrId a : output_keys(o, views, batch)) ++refs[a];

    auto distinct = [&](AttrId a) {
        return catalog.loaded(node) and tree.contains(node, a) ? catalog.stats(node, a).distinct_count
                                                                : catalog.domain_size(a);
    };
    AttributeOrder order(tree.attributes(node).begin(), tree.attributes(node).end());
    std::sort(order.begin(), order.end(), [&](AttrId x, AttrId y) {
        const auto rx = refs.count(x) ? refs.at(x) : 0, ry = refs.count(y) ? refs.at(y) : 0;
        if (rx != ry) return rx > ry;
        const auto dx = distinct(x), dy = distinct(y);
        if (dx != dy) return dx > dy;
        return catalog.attribute(x).name < catalog.attribute(y).name;
    });

    /* View-only attributes follow the last node attribute of their view's key. */
    std::map<AttrId, std::size_t> anchor;
    for (ViewId v : group.incoming) {
        std::size_t last = 0;
        for (AttrId a : views.views[v].group_by) {
            auto it = std::find(order.begin(), order.end(), a);
            if (it != order.end()) last = std::max(last, static_cast<std::size_t>(it - order.begin()));
        }
        for (AttrId a : views.views[v].group_by)
            if (not tree.contains(node, a)) anchor[a] = std::max(anchor[a], last);
    }
    std::vector<std::pair<std::size_t, AttrId>> extras;
    for (auto [a, pos] : anchor) extras.emplace_back(pos, a);
    std::sort(extras.begin(), extras.end(), [&](auto &x, auto &y) {
        if (x.first != y.first) return x.first > y.first;
        return catalog.attribute(x.second).name > catalog.attribute(y.second).name;
    });
    // Inserting from the back keeps earlier anchors valid; equal anchors end up sorted by name.
    for (auto [pos, a] : extras) order.insert(order.begin() + static_cast<std::ptrdiff_t>(pos) + 1, a);
    return order;
}

std::size_t PlanIR::level_of(AttrId attr) const
{
    auto it = std::find(order.begin(), order.end(), attr);
    if (it == order.end()) throw Error("internal: attribute not in the plan's order");
    return static_cast<std::size_t>(it - order.begin()) + 1;
}

namespace {

/// A multiplicand before register allocation; `node` refers to an interned expression.
struct Sym
{
    enum Kind { count, udf, node };
    Kind kind;
    std::size_t level = 0;
    AttrId attr = 0;
    UdfId fn = 0;
    std::size_t id = 0;

    auto operator<=>(const Sym &) const = default;
};

struct Expr
{
    enum Kind { lookup, prefix, suffix };
    Kind kind;
    std::size_t level;             ///< lookup/prefix: evaluation level; suffix: scope (reset) level
    ViewId view = 0;
    std::size_t slot = 0;
    std::vector<Sym> operands;     ///< prefix: factors; suffix: accumulated product
    std::size_t acc_level = 0;     ///< suffix: level whose exit accumulates
};

struct Atom
{
    std::size_t level;
    Sym sym;
};

struct PendingWrite
{
    OutputRef output;
    std::size_t slot;
    std::size_t level;
    bool at_exit;
    std::vector<Sym> operands;
    double constant;
    bool upsert;
    std::optional<std::size_t> guard;
};

class Builder
{
    public:
    std::vector<Expr> exprs;
    std::map<std::tuple<int, std::size_t, ViewId, std::size_t, std::vector<Sym>, std::size_t>, std::size_t> index;

    std::size_t intern(Expr e)
    {
        auto k = std::make_tuple(static_cast<int>(e.kind), e.level, e.view, e.slot, e.operands, e.acc_level);
        auto [it, inserted] = index.try_emplace(k, exprs.size());
        if (inserted) exprs.push_back(std::move(e));
        return it->second;
    }

    Sym lookup(ViewId view, std::size_t slot, std::size_t level)
    {
        return {Sym::node, level, 0, 0, intern({Expr::lookup, level, view, slot, {}, 0})};
    }

    /// Running sum over the atoms below `scope` (chain sorted by level); the count when the chain is empty.
    Sym suffix(std::size_t scope, const std::vector<Atom> &chain, std::size_t from)
    {
        if (from == chain.size()) return {Sym::count, scope, 0, 0, 0};
        const std::size_t first = chain[from].level;
        std::size_t next = from;
        std::vector<Sym> here;
        while (next < chain.size() and chain[next].level == first) here.push_back(chain[next++].sym);
        Sym inner = suffix(first, chain, next);
        std::sort(here.begin(), here.end());
        std::vector<Sym> operands{inner};
        operands.insert(operands.end(), here.begin(), here.end());
        return {Sym::node, scope, 0, 0, intern({Expr::suffix, scope, 0, 0, std::move(operands), first})};
    }
};

} // namespace

PlanIR lmfao::decompose_aggregates(const ViewGroup &group, const AttributeOrder &order, const ViewSet &views,
                                   const QueryBatch &batch, const JoinTree &tree)
{
    PlanIR plan;
    plan.group = group.id;
    plan.node = group.node;
    plan.order = order;
    plan.outputs = group.outputs;
    plan.incoming = group.incoming;

    auto key_level = [&](const std::vector<AttrId> &keys) {
        std::size_t l = 0;
        for (AttrId a : keys) l = std::max(l, plan.level_of(a));
        return l;
    };
    for (ViewId v : group.incoming) plan.witness_level = std::max(plan.witness_level, key_level(views.views[v].group_by));

    Builder b;
    std::vector<PendingWrite> writes;

    for (auto &out : group.outputs) {
        const auto &keys = output_keys(out, views, batch);
        const std::size_t K = key_level(keys);
        bool dense = keys.size() == K;
        const bool scalar = out.kind == OutputRef::query and keys.empty();
        const auto &recipes = recipes_of(out, views);

        for (std::size_t s = 0; s < recipes.size(); ++s) {
            const auto &r = recipes[s];
            std::vector<Atom> atoms;
            for (auto &f : r.local) {
                const auto l = plan.level_of(f.attr);
                atoms.push_back({l, {Sym::udf, l, f.attr, f.udf, 0}});
            }
            for (auto [v, slot] : r.lookups) {
                const auto l = key_level(views.views[v].group_by);
                atoms.push_back({l, b.lookup(v, slot, l)});
            }
            std::sort(atoms.begin(), atoms.end(),
                      [](const Atom &x, const Atom &y) { return std::tie(x.level, x.sym) < std::tie(y.level, y.sym); });

            std::vector<Atom> below;
            std::map<std::size_t, std::vector<Sym>> above;
            for (auto &a : atoms) (a.level > K ? below.push_back(a) : above[a.level].push_back(a.sym));
            const bool counted = below.empty();
            if (counted and K > 0) above[K];

            std::optional<Sym> prev;
            for (auto &[level, syms] : above) {
                std::vector<Sym> operands = syms;
                if (prev) operands.push_back(*prev);
                if (counted and level == K) operands.push_back({Sym::count, K, 0, 0, 0});
                std::sort(operands.begin(), operands.end());
                if (operands.size() == 1)
                    prev = operands.front();
                else if (operands.size() > 1)
                    prev = Sym{Sym::node, level, 0, 0, b.intern({Expr::prefix, level, 0, 0, operands, 0})};
            }

            PendingWrite w{out, s, K, false, {}, r.constant, not dense and not scalar, std::nullopt};
            if (K == 0) {
                w.operands.push_back(b.suffix(0, below, 0));
                w.at_exit = true;
            } else if (counted) {
                if (prev) w.operands.push_back(*prev);
                w.at_exit = plan.witness_level > K;
            } else {
                w.operands.push_back(b.suffix(K, below, 0));
                if (prev) w.operands.push_back(*prev);
                w.at_exit = true;
            }
            if (w.at_exit and K > 0 and plan.witness_level > K) w.guard = K;
            writes.push_back(std::move(w));
        }
    }

    /* Register allocation: alphas level by level with lookups first, betas by scope level. */
    std::vector<std::size_t> alpha_ids, beta_ids;
    for (std::size_t e = 0; e < b.exprs.size(); ++e) (b.exprs[e].kind == Expr::suffix ? beta_ids : alpha_ids).push_back(e);
    std::stable_sort(alpha_ids.begin(), alpha_ids.end(), [&](std::size_t x, std::size_t y) {
        const auto &ex = b.exprs[x], &ey = b.exprs[y];
        return std::make_pair(ex.level, ex.kind != Expr::lookup) < std::make_pair(ey.level, ey.kind != Expr::lookup);
    });
    std::stable_sort(beta_ids.begin(), beta_ids.end(),
                     [&](std::size_t x, std::size_t y) { return b.exprs[x].level < b.exprs[y].level; });
    std::vector<RegRef> reg(b.exprs.size());
    for (std::size_t i = 0; i < alpha_ids.size(); ++i) {
        reg[alpha_ids[i]] = {RegKind::alpha, i};
        plan.alphas.push_back({{RegKind::alpha, i}, b.exprs[alpha_ids[i]].level});
    }
    for (std::size_t i = 0; i < beta_ids.size(); ++i) {
        reg[beta_ids[i]] = {RegKind::beta, i};
        plan.betas.push_back({{RegKind::beta, i}, b.exprs[beta_ids[i]].level});
    }

    auto lower = [&](const std::vector<Sym> &syms) {
        std::vector<Operand> ops;
        for (auto &s : syms) {
            Operand o;
            o.kind = Operand::tuple_count;
            o.level = s.level;
            if (s.kind == Sym::udf) {
                o.kind = Operand::from_udf;
                o.attr = s.attr;
                o.udf = s.fn;
            } else if (s.kind == Sym::node) {
                o.kind = Operand::from_register;
                o.reg = reg[s.id];
            }
            ops.push_back(o);
        }
        // Display order: count, UDFs, registers in allocation order.
        std::stable_sort(ops.begin(), ops.end(), [](const Operand &x, const Operand &y) {
            if (x.kind != y.kind) {
                auto rank = [](Operand::Kind k) { return k == Operand::tuple_count ? 0 : k == Operand::from_udf ? 1 : 2; };
                return rank(x.kind) < rank(y.kind);
            }
            if (x.kind == Operand::from_register) return x.reg < y.reg;
            return false;
        });
        return ops;
    };

    std::size_t depth = plan.witness_level;
    auto note = [&](std::size_t l) { depth = std::max(depth, l); };
    for (auto &e : b.exprs) {
        note(e.kind == Expr::suffix ? e.acc_level : e.level);
        for (auto &s : e.operands) note(s.level);
    }
    for (auto &w : writes) {
        note(w.level);
        for (auto &s : w.operands) note(s.level);
    }
    plan.depth = depth;

    plan.levels.resize(order.size() + 1);
    for (std::size_t l = 0; l <= order.size(); ++l) {
        auto &lb = plan.levels[l];
        lb.level = l;
        if (l == 0) continue;
        const AttrId a = order[l - 1];
        lb.attr = a;
        lb.relation = tree.contains(group.node, a);
        for (ViewId v : group.incoming) {
            const auto &g = views.views[v].group_by;
            if (std::binary_search(g.begin(), g.end(), a)) lb.views.push_back(v);
            if (key_level(g) == l) lb.bound_views.push_back(v);
        }
    }

    for (auto e : alpha_ids) {
        const auto &ex = b.exprs[e];
        Statement st;
        st.kind = ex.kind == Expr::lookup ? Statement::lookup : Statement::product;
        st.dst = reg[e];
        st.view = ex.view;
        st.slot = ex.slot;
        if (ex.kind == Expr::prefix) {
            st.operands = lower(ex.operands);
        }
        plan.levels[ex.level].on_enter.push_back(std::move(st));
    }
    for (auto e : beta_ids) {
        const auto &ex = b.exprs[e];
        Statement reset;
        reset.kind = Statement::reset;
        reset.dst = reg[e];
        plan.levels[ex.level].on_enter.push_back(reset);
        Statement acc;
        acc.kind = Statement::accumulate;
        acc.dst = reg[e];
        // Running sums read "inner · atoms"; keep that order.
        std::vector<Operand> ops = lower({ex.operands.front()});
        auto rest = lower(std::vector<Sym>(ex.operands.begin() + 1, ex.operands.end()));
        ops.insert(ops.end(), rest.begin(), rest.end());
        acc.operands = std::move(ops);
        plan.levels[ex.acc_level].on_exit.push_back(std::move(acc));
    }
    for (auto &w : writes) {
        Statement st;
        st.kind = Statement::write;
        st.output = w.output;
        st.output_slot = w.slot;
        st.upsert = w.upsert;
        st.constant = w.constant;
        st.guard = w.guard;
        std::vector<Operand> ops;
        for (auto &s : w.operands) {
            auto one = lower({s});
            ops.insert(ops.end(), one.begin(), one.end());
        }
        st.operands = std::move(ops);
        (w.at_exit ? plan.levels[w.level].on_exit : plan.levels[w.level].on_enter).push_back(std::move(st));
    }
    return plan;
}

std::pair<std::size_t, std::size_t> lmfao::register_count(const PlanIR &plan)
{
    return {plan.alphas.size(), plan.betas.size()};
}

BatchPlan lmfao::plan_views(ViewSet views, const QueryBatch &batch, const JoinTree &tree, const Catalog &catalog)
{
    BatchPlan bp;
    bp.dag = build_dependency_dag(group_views(views, tree, catalog), views);
    for (auto &g : bp.dag.groups)
        bp.plans.push_back(decompose_aggregates(g, choose_attribute_order(g, views, batch, tree, catalog), views, batch, tree));
    bp.views = std::move(views);
    return bp;
}

BatchPlan lmfao::plan_batch(const QueryBatch &batch, const JoinTree &tree, const Catalog &catalog,
                            const RootAssignment &pinned)
{
    return plan_views(generate_views(batch, tree, catalog, pinned), batch, tree, catalog);
}
