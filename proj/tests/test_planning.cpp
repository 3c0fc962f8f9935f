#include <doctest.h>

#include "lmfao/datagen.hpp"
#include "lmfao/executor.hpp"
#include "lmfao/planner.hpp"
#include "lmfao/render.hpp"
#include "lmfao/view_generation.hpp"

#include <algorithm>
#include <set>

using namespace lmfao;

namespace {

std::set<std::string> view_names(const ViewSet &vs)
{
    std::set<std::string> out;
    for (auto &v : vs.views) out.insert(v.name);
    return out;
}

const DirectionalView *find_view(const ViewSet &vs, const std::string &name)
{
    for (auto &v : vs.views)
        if (v.name == name) return &v;
    return nullptr;
}

std::set<std::string> group_outputs(const BatchPlan &plan, const ViewGroup &g, const QueryBatch &batch)
{
    std::set<std::string> out;
    for (auto &o : g.outputs) out.insert(output_name(o, plan.views, batch));
    return out;
}

QueryBatch tiny_qb(const Catalog &c)
{
    QueryBatch b;
    add_query(b, define_query(c, "QB", {"a"}, {{{{"c"}}}}));
    return b;
}

struct Favorita
{
    Catalog catalog = favorita_database();
    JoinTree tree = JoinTree::build(catalog);
    QueryBatch batch;
    BatchPlan plan;
    explicit Favorita(bool single_factor_q3 = false)
        : batch(favorita_batch(catalog, single_factor_q3)),
          plan(plan_batch(batch, tree, catalog, favorita_roots(catalog)))
    {
    }
    GroupId group_with(const std::string &output) const
    {
        for (auto &g : plan.dag.groups)
            if (group_outputs(plan, g, batch).contains(output)) return g.id;
        FAIL("no group computes " << output);
        return 0;
    }
};

} // namespace

TEST_CASE("root assignment")
{
    Catalog fav = favorita_database();
    const auto tree = JoinTree::build(fav);
    const auto roots = assign_roots(favorita_batch(fav), tree, fav);
    CHECK(roots.at("Q1") == fav.relation_id("Sales"));
    CHECK(roots.at("Q3") == fav.relation_id("Items"));

    Catalog tiny = tiny_database();
    CHECK(assign_roots(tiny_qb(tiny), JoinTree::build(tiny), tiny).at("QB") == tiny.relation_id("R"));
}

TEST_CASE("query decomposition")
{
    Catalog tiny = tiny_database();
    const auto ttree = JoinTree::build(tiny);
    const auto qb = tiny_qb(tiny);
    const auto d = decompose_query(qb.queries[0], 0, tiny.relation_id("R"), ttree);
    REQUIRE(d.views.size() == 1);
    CHECK(d.views[0].from == tiny.relation_id("S"));
    CHECK(d.views[0].to == tiny.relation_id("R"));
    CHECK(d.views[0].group_by == std::vector<AttrId>{tiny.attribute_id("a")});
    REQUIRE(d.views[0].aggregates.size() == 1);
    CHECK(describe(tiny, d.views[0].aggregates[0]) == "SUM(c)");
    CHECK(d.output.node == tiny.relation_id("R"));

    Catalog fav = favorita_database();
    const auto ftree = JoinTree::build(fav);
    const auto fb = favorita_batch(fav);
    const RelId sales = fav.relation_id("Sales");
    const auto q1 = decompose_query(fb.query("Q1"), 0, sales, ftree);
    CHECK(q1.views.size() == 5);
    for (auto &v : q1.views) {
        // every view points toward Sales and carries exactly the edge's join attributes
        const auto above = ftree.subtree(v.to, v.from);
        CHECK(std::find(above.begin(), above.end(), sales) != above.end());
        CHECK(v.group_by == ftree.join_attributes(v.from, v.to));
        const auto below = ftree.subtree(v.from, v.to);
        CHECK(std::find(below.begin(), below.end(), sales) == below.end());
    }

    const auto q3 = decompose_query(fb.query("Q3"), 2, fav.relation_id("Items"), ftree);
    bool found = false;
    for (auto &v : q3.views)
        if (v.from == sales and v.to == fav.relation_id("Items")) {
            found = true;
            CHECK(v.group_by == std::vector<AttrId>{fav.attribute_id("item")});
        }
    CHECK(found);
}

TEST_CASE("one view per edge for every query")
{
    for (std::uint64_t seed = 0; seed < 80; ++seed) {
        auto inst = random_instance(seed);
        const auto tree = JoinTree::build(inst.catalog);
        const auto roots = assign_roots(inst.batch, tree, inst.catalog);
        for (std::size_t i = 0; i < inst.batch.queries.size(); ++i) {
            const auto &q = inst.batch.queries[i];
            CHECK(decompose_query(q, i, roots.at(q.id), tree).views.size() == tree.edges().size());
        }
    }
}

TEST_CASE("view merging on the retail schema")
{
    Favorita f;
    CHECK(view_names(f.plan.views) ==
          std::set<std::string>{"V_{Transactions->Sales}", "V_{Stores->Transactions}", "V_{Oil->Transactions}",
                                "V_{Holidays->Sales}", "V_{Items->Sales}", "V_{Sales->Items}"});
    // Q1 and Q2 need different aggregates from Transactions, merged into one view
    const auto *ts = find_view(f.plan.views, "V_{Transactions->Sales}");
    REQUIRE(ts);
    std::set<std::size_t> consumer_queries;
    for (auto &c : ts->consumers)
        if (c.kind == Consumer::query) consumer_queries.insert(c.id);
    CHECK(consumer_queries.size() == 2);
}

TEST_CASE("identical aggregates share a slot")
{
    Catalog c = tiny_database();
    const auto tree = JoinTree::build(c);
    QueryBatch b;
    add_query(b, define_query(c, "q1", {}, {{{{"b"}}}}));
    add_query(b, define_query(c, "q2", {"b"}, {{}}));
    const RelId r = c.relation_id("R");
    const auto views = generate_views(b, tree, c, {{"q1", r}, {"q2", r}});
    REQUIRE(views.views.size() == 1);
    CHECK(views.views[0].aggregates.size() == 1);
    CHECK(views.views[0].consumers.size() == 2);
}

TEST_CASE("root reassignment")
{
    Favorita f;
    const auto moved = reassign_root(f.plan.views, f.batch, f.tree, "Q3", f.catalog.relation_id("Sales"));
    CHECK(not find_view(moved, "V_{Sales->Items}"));
    // Q3 now needs class from Items, so it gets its own view next to the one Q1/Q2 use
    const auto *plain = find_view(moved, "V_{Items->Sales}");
    const auto *with_class = find_view(moved, "V_{Items->Sales}#2");
    REQUIRE(plain);
    REQUIRE(with_class);
    CHECK(plain->group_by == std::vector<AttrId>{f.catalog.attribute_id("item")});
    CHECK(with_class->group_by == std::vector<AttrId>{f.catalog.attribute_id("item"), f.catalog.attribute_id("class")});
    CHECK(moved.roots.at("Q3") == f.catalog.relation_id("Sales"));

    CHECK(reassign_root(f.plan.views, f.batch, f.tree, "Q3", f.catalog.relation_id("Items")) == f.plan.views);
    CHECK_THROWS_AS(reassign_root(f.plan.views, f.batch, f.tree, "nope", 0), Error);

    Catalog tiny = tiny_database();
    const auto ttree = JoinTree::build(tiny);
    const auto qb = tiny_qb(tiny);
    const auto at_s = reassign_root(generate_views(qb, ttree, tiny), qb, ttree, "QB", tiny.relation_id("S"));
    REQUIRE(at_s.views.size() == 1);
    CHECK(at_s.views[0].name == "V_{R->S}");
    CHECK(at_s.views[0].group_by == std::vector<AttrId>{tiny.attribute_id("a")});
    CHECK(describe(tiny, at_s.views[0].aggregates[0]) == "SUM(1)");
    CHECK(at_s.outputs[0].node == tiny.relation_id("S"));
}

TEST_CASE("groups and their dependencies on the retail schema")
{
    Favorita f;
    const auto &dag = f.plan.dag;
    REQUIRE(dag.groups.size() == 7);

    const GroupId sales = f.group_with("Q1");
    CHECK(group_outputs(f.plan, dag.groups[sales], f.batch) ==
          std::set<std::string>{"Q1", "Q2", "V_{Sales->Items}"});
    const GroupId q3 = f.group_with("Q3");
    const GroupId items = f.group_with("V_{Items->Sales}");
    CHECK(q3 != items);
    CHECK(dag.groups[q3].node == dag.groups[items].node);

    const GroupId stores = f.group_with("V_{Stores->Transactions}"), oil = f.group_with("V_{Oil->Transactions}"),
                  txn = f.group_with("V_{Transactions->Sales}"), hol = f.group_with("V_{Holidays->Sales}");
    std::set<std::pair<GroupId, GroupId>> expected{{stores, txn}, {oil, txn}, {txn, sales},
                                                   {hol, sales},  {items, sales}, {sales, q3}};
    CHECK(std::set<std::pair<GroupId, GroupId>>(dag.edges.begin(), dag.edges.end()) == expected);

    const auto waves = dag.waves();
    REQUIRE(waves.size() == 4);
    CHECK(std::set<GroupId>(waves[0].begin(), waves[0].end()) == std::set<GroupId>{stores, oil, hol, items});
}

TEST_CASE("groups on DB-TINY and a single relation")
{
    Catalog tiny = tiny_database();
    const auto tree = JoinTree::build(tiny);
    const auto qb = tiny_qb(tiny);
    const auto plan = plan_batch(qb, tree, tiny);
    REQUIRE(plan.dag.groups.size() == 2);
    CHECK(plan.dag.groups[0].node == tiny.relation_id("S"));
    CHECK(plan.dag.groups[1].node == tiny.relation_id("R"));
    CHECK(plan.dag.edges == std::vector<std::pair<GroupId, GroupId>>{{0, 1}});
    CHECK(plan.plans[1].order == AttributeOrder{tiny.attribute_id("a"), tiny.attribute_id("b")});

    Catalog one;
    one.add_relation(RelationDef{"T", {{"x"}}, {}}, {{1, 2, 2}});
    QueryBatch b;
    add_query(b, define_query(one, "n", {}, {{}}));
    const auto p1 = plan_batch(b, JoinTree::build(one), one);
    REQUIRE(p1.dag.groups.size() == 1);
    CHECK(p1.dag.groups[0].incoming.empty());
    CHECK(p1.dag.edges.empty());
    CHECK(p1.plans[0].order == AttributeOrder{one.attribute_id("x")});
    // a bare count reads the relation size
    CHECK(register_count(p1.plans[0]) == std::pair<std::size_t, std::size_t>{0, 0});
    CHECK(render_code(p1.plans[0], p1.views, b, one) == "output-write\tn = |T|;\n");
    CHECK(execute_batch(p1, b, one, JoinTree::build(one)).results.at("n").rows.at(0).second.at(0) == 3);

    QueryBatch sum;
    add_query(sum, define_query(one, "s", {}, {{{{"x"}}}}));
    const auto p2 = plan_batch(sum, JoinTree::build(one), one);
    CHECK(register_count(p2.plans[0]).first == 0);
    CHECK(execute_batch(p2, sum, one, JoinTree::build(one)).results.at("s").rows.at(0).second.at(0) == 5);
}

TEST_CASE("multi-output plan of the Sales group")
{
    Favorita f(true);
    const GroupId g = f.group_with("Q1");
    const PlanIR &ir = f.plan.plans[g];
    CHECK(ir.order.size() >= 3);
    CHECK(std::vector<AttrId>(ir.order.begin(), ir.order.begin() + 3) ==
          std::vector<AttrId>{f.catalog.attribute_id("item"), f.catalog.attribute_id("date"),
                              f.catalog.attribute_id("store")});
    CHECK(register_count(ir) == std::pair<std::size_t, std::size_t>{6, 4});

    const auto lines = render_lines(ir, f.plan.views, f.batch, f.catalog);
    auto depth_of = [](const CodeLine &l) { return l.text.find_first_not_of(' ') / 2; };
    std::size_t item_lookups = 0, running_sums = 0;
    bool chain = false, upsert = false, shared = false;
    for (auto &l : lines) {
        if (l.kind == Fragment::view_lookup and l.text.find("V_{Items->Sales}(item)") != std::string::npos) {
            ++item_lookups;
            CHECK(depth_of(l) == 1); // directly inside the item loop
        }
        if (l.kind == Fragment::running_sum) ++running_sums;
        chain |= l.text.find("β1 += β2 · α3") != std::string::npos;
        if (l.kind == Fragment::output_write and l.text.find("if Q2(store) then Q2(store) +=") != std::string::npos) {
            upsert = true;
            CHECK(depth_of(l) == 3); // at the store level
        }
        shared |= l.kind == Fragment::output_write and l.text.find("V_{Sales->Items}(item) = β1") != std::string::npos;
    }
    CHECK(item_lookups == 1);
    CHECK(chain);
    CHECK(upsert);
    CHECK(shared);
    CHECK(running_sums > 0);
    bool q1_from_beta1 = false;
    for (auto &l : lines) q1_from_beta1 |= l.text.find("β0 += β1 · α1") != std::string::npos;
    CHECK(q1_from_beta1);

    // the full Q3 = SUM(units*price) needs a second running sum along the same loops
    Favorita full;
    const auto counts = register_count(full.plan.plans[full.group_with("Q1")]);
    CHECK(counts.second > 4);
}

TEST_CASE("rendered code of DB-TINY")
{
    Catalog tiny = tiny_database();
    const auto tree = JoinTree::build(tiny);
    const auto qb = tiny_qb(tiny);
    const auto plan = plan_batch(qb, tree, tiny);
    const auto at_r = render_lines(plan.plans[1], plan.views, qb, tiny);
    std::size_t loops = 0, sums = 0;
    for (auto &l : at_r) {
        loops += l.kind == Fragment::join_iteration;
        sums += l.kind == Fragment::running_sum;
    }
    CHECK(loops == 1); // the b run is folded into the tuple count
    CHECK(sums == 0);
    CHECK(register_count(plan.plans[1]) == std::pair<std::size_t, std::size_t>{2, 0});
    CHECK(at_r.back().kind == Fragment::output_write);

    const std::string text = render_code(plan.plans[0], plan.views, qb, tiny);
    CHECK(text.find("running-sum\t") != std::string::npos);
    CHECK(text.find("join-iteration\tforeach a") == 0);
}

TEST_CASE("view storage")
{
    Catalog tiny = tiny_database();
    const auto tree = JoinTree::build(tiny);
    const auto qb = tiny_qb(tiny);
    const auto plan = plan_batch(qb, tree, tiny);
    CHECK(choose_view_storage(plan.views.views[0], {&plan.plans[1]}, tree) == Storage::sorted);
    CHECK(choose_view_storage(plan.views.views[0], {}, tree) == Storage::sorted);

    Favorita f;
    const auto *hol = find_view(f.plan.views, "V_{Holidays->Sales}");
    REQUIRE(hol);
    const PlanIR &sales = f.plan.plans[f.group_with("Q1")];
    CHECK(choose_view_storage(*hol, {&sales}, f.tree) == Storage::hash);
    const auto *items = find_view(f.plan.views, "V_{Items->Sales}");
    CHECK(choose_view_storage(*items, {&sales}, f.tree) == Storage::sorted);
}
