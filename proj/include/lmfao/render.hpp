#pragma once

#include "lmfao/catalog.hpp"
#include "lmfao/planner.hpp"

#include <string>
#include <vector>

namespace lmfao {

/// Fragment kinds used to tag rendered code lines.
enum class Fragment { join_iteration, view_lookup, local_assign, running_sum, output_write };
const char *to_string(Fragment kind);

struct CodeLine
{
    Fragment kind;
    std::string text; ///< indented by loop depth
};

/// The group's loop nest as specialized pseudo-code, one tagged statement per line.
std::vector<CodeLine> render_lines(const PlanIR &plan, const ViewSet &views, const QueryBatch &batch,
                                   const Catalog &catalog);

/// `render_lines` as "kind<TAB>text" lines.
std::string render_code(const PlanIR &plan, const ViewSet &views, const QueryBatch &batch, const Catalog &catalog);

} // namespace lmfao
