#pragma once

#include "lmfao/catalog.hpp"
#include "lmfao/query.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace lmfao {

/// The natural join of all relations, one row per join tuple, one column per catalog attribute.
struct MaterializedJoin
{
    std::size_t width = 0; ///< number of catalog attributes
    std::vector<double> cells;

    std::size_t size() const { return width == 0 ? 0 : cells.size() / width; }
    std::span<const double> row(std::size_t i) const { return {cells.data() + i * width, width}; }
};

/// Brute-force natural join along the tree edges; desk-scale inputs only.
MaterializedJoin materialize_join(const Catalog &catalog, const JoinTree &tree);

/** Reference evaluation: materializes the join and scans it once per query.
 *
 * Only groups witnessed by a join tuple are reported; a query without group-by attributes always yields exactly one
 * row (zero over an empty join). */
QueryResults oracle_evaluate(const QueryBatch &batch, const Catalog &catalog, const JoinTree &tree);
QueryResults oracle_evaluate(const QueryBatch &batch, const Catalog &catalog, const MaterializedJoin &join);

} // namespace lmfao
