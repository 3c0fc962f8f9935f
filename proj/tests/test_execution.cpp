#include <doctest.h>

#include "lmfao/datagen.hpp"
#include "lmfao/executor.hpp"
#include "lmfao/oracle.hpp"
#include "lmfao/planner.hpp"
#include "support.hpp"

#include <set>

using namespace lmfao;

TEST_CASE("DB-TINY groups")
{
    Catalog c = tiny_database();
    const auto tree = JoinTree::build(c);
    QueryBatch b;
    add_query(b, define_query(c, "QB", {"a"}, {{{{"c"}}}}));
    const auto plan = plan_batch(b, tree, c);
    const auto res = execute_batch(plan, b, c, tree, {1});

    const auto &view = *res.views.at(0);
    REQUIRE(view.size() == 2);
    CHECK(view.find({1}).value()[0] == 100);
    CHECK(view.find({2}).value()[0] == 500);
    CHECK(not view.find({3}));

    const auto &qb = res.results.at("QB").rows;
    REQUIRE(qb.size() == 2);
    CHECK(qb[0].second[0] == 200);
    CHECK(qb[1].second[0] == 500);
    CHECK(res.report.schedule.size() == 2);
}

TEST_CASE("empty node relation")
{
    Catalog c;
    c.add_relation(RelationDef{"R", {{"a"}, {"b"}}, {}}, {{1, 2}, {5, 6}});
    c.add_relation(RelationDef{"S", {{"a"}, {"c"}}, {}}, {{}, {}});
    c.add_edge("R", "S");
    const auto tree = JoinTree::build(c);
    QueryBatch b;
    add_query(b, define_query(c, "total", {}, {{{{"b"}}}}));
    add_query(b, define_query(c, "by_c", {"c"}, {{}}));
    const auto res = evaluate_batch(b, c, tree);
    REQUIRE(res.results.at("total").rows.size() == 1);
    CHECK(res.results.at("total").rows[0].second[0] == 0);
    CHECK(res.results.at("by_c").rows.empty());
    CHECK(not compare_results(oracle_evaluate(b, c, tree), res.results));
}

TEST_CASE("retail batch equals the oracle")
{
    Catalog c = favorita_database();
    const auto tree = JoinTree::build(c);
    const auto b = favorita_batch(c);
    const auto plan = plan_batch(b, tree, c, favorita_roots(c));
    const auto res = execute_batch(plan, b, c, tree, {4});
    const auto want = testing::scan_queries(b, c, testing::hash_join(c));
    const auto diff = compare_results(want, res.results, 1e-9);
    CHECK_MESSAGE(not diff, diff.value_or(""));

    // the four leaf groups run in the first wave, Transactions next, then Sales, then Q3
    REQUIRE(res.report.schedule.size() == 4);
    CHECK(res.report.schedule[0].size() == 4);
    for (auto &g : res.report.groups) CHECK(g.rows_scanned == g.relation_rows);
}

TEST_CASE("random batches equal the oracle under every storage and thread setting")
{
    const ExecOptions variants[] = {{1, StorageOverride::automatic},
                                    {4, StorageOverride::automatic},
                                    {2, StorageOverride::all_hash},
                                    {2, StorageOverride::all_sorted}};
    for (std::uint64_t seed = 0; seed < 120; ++seed) {
        RandomOptions o;
        o.integer = seed % 2 == 0;
        auto inst = random_instance(seed, o);
        const auto tree = JoinTree::build(inst.catalog);
        const auto want = oracle_evaluate(inst.batch, inst.catalog, tree);
        const auto plan = plan_batch(inst.batch, tree, inst.catalog);
        std::optional<QueryResults> first;
        for (auto &opt : variants) {
            const auto res = execute_batch(plan, inst.batch, inst.catalog, tree, opt);
            const auto diff = compare_results(want, res.results, o.integer ? 0.0 : 1e-9);
            CHECK_MESSAGE(not diff, "seed " << seed << " threads " << opt.threads << ": " << diff.value_or(""));
            for (auto &g : res.report.groups)
                CHECK_MESSAGE(g.rows_scanned == g.relation_rows, "seed " << seed << " group " << g.group);
            if (o.integer) {
                if (first)
                    CHECK(not compare_results(*first, res.results, 0.0));
                else
                    first = res.results;
            }
        }
    }
}

TEST_CASE("pinned roots do not change results")
{
    for (std::uint64_t seed = 200; seed < 240; ++seed) {
        auto inst = random_instance(seed);
        const auto tree = JoinTree::build(inst.catalog);
        RootAssignment pinned;
        for (std::size_t i = 0; i < inst.batch.queries.size(); ++i)
            pinned[inst.batch.queries[i].id] = static_cast<RelId>((seed + i) % inst.catalog.num_relations());
        const auto res = evaluate_batch(inst.batch, inst.catalog, tree, {2}, pinned);
        const auto diff = compare_results(oracle_evaluate(inst.batch, inst.catalog, tree), res.results, 0.0);
        CHECK_MESSAGE(not diff, "seed " << seed << ": " << diff.value_or(""));
    }
}

TEST_CASE("planning is deterministic")
{
    auto a = random_instance(99), b = random_instance(99);
    const auto pa = plan_batch(a.batch, JoinTree::build(a.catalog), a.catalog);
    const auto pb = plan_batch(b.batch, JoinTree::build(b.catalog), b.catalog);
    CHECK(pa.views == pb.views);
    CHECK(pa.dag.edges == pb.dag.edges);
    for (std::size_t g = 0; g < pa.plans.size(); ++g)
        CHECK(dump_plan(pa.plans[g], pa.views, a.batch, a.catalog) == dump_plan(pb.plans[g], pb.views, b.batch, b.catalog));
}
