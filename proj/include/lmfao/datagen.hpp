#pragma once

#include "lmfao/catalog.hpp"
#include "lmfao/query.hpp"
#include "lmfao/view_generation.hpp"

#include <cstdint>
#include <filesystem>

namespace lmfao {

/// Registers g(x) = x mod 7, h(x) = 1 + x mod 5 and mod7 unless present.
void register_example_udfs(Catalog &catalog);

/// R(a,b) = {(1,10),(1,20),(2,30)}, S(a,c) = {(1,100),(2,200),(2,300)}, joined on a.
Catalog tiny_database();

struct FavoritaOptions
{
    std::size_t items = 200;
    std::size_t dates = 120;
    std::size_t stores = 20;
    std::size_t sales = 6000;
    std::uint64_t seed = 1;
};

/** Synthetic data over the six-relation retail schema Sales, Holidays, Stores, Items, Transactions, Oil.
 * Registers the example UDFs. */
Catalog favorita_database(const FavoritaOptions &options = {});

/** Q1 = SUM(units); Q2 = store, SUM(g(item)·h(date)); Q3 = class, SUM(units·price).
 * With `single_factor_q3`, Q3 sums units only. */
QueryBatch favorita_batch(const Catalog &catalog, bool single_factor_q3 = false);

/// Q1 and Q2 at Sales, Q3 at Items.
RootAssignment favorita_roots(const Catalog &catalog);

struct RandomOptions
{
    std::size_t max_relations = 5;
    std::size_t max_rows = 1000;
    std::size_t max_queries = 20;
    bool integer = true; ///< integer-valued data; otherwise non-join attributes are floats
};

struct RandomInstance
{
    Catalog catalog;
    QueryBatch batch;
};

/// A random acyclic schema with data and a batch of mixed queries, reproducible from `seed`.
RandomInstance random_instance(std::uint64_t seed, const RandomOptions &options = {});

/// Writes schema.json and one CSV per loaded relation into `dir`.
void write_database(const Catalog &catalog, const std::filesystem::path &dir);

} // namespace lmfao
