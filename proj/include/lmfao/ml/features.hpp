#pragma once

#include "lmfao/catalog.hpp"
#include "lmfao/query.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace lmfao::ml {

/// Evaluates a batch over a catalog, joined along the catalog's tree edges.
using BatchRunner = std::function<QueryResults(const Catalog &, const QueryBatch &)>;

struct FeatureSlot
{
    enum Kind { intercept, continuous, category };
    Kind kind = intercept;
    AttrId attr = 0;
    double code = 0; ///< category code, for category slots
};

/** Parameter layout: slot 0 is the intercept, then one slot per continuous attribute and one per (categorical
 * attribute, code), in the order the attributes were given. The label is a continuous attribute with its own slot. */
struct FeatureIndex
{
    std::vector<FeatureSlot> slots;
    std::vector<AttrId> attributes; ///< features then label
    AttrId label = 0;
    std::size_t label_slot = 0;

    /// Categories are the codes occurring in any loaded relation holding the attribute.
    static FeatureIndex build(const Catalog &catalog, const std::vector<std::string> &features, const std::string &label);

    std::size_t size() const { return slots.size(); }
    std::optional<std::size_t> slot(AttrId attr, double code = 0) const;
    std::string slot_name(const Catalog &catalog, std::size_t slot) const;
};

/// One query per unordered pair over {intercept} ∪ attributes.
QueryBatch gen_sigma_batch(const Catalog &catalog, const FeatureIndex &features);

struct SigmaMatrix
{
    Eigen::MatrixXd entries; ///< symmetric, slot by slot
    double count = 0;        ///< |D| = entries(0, 0)
};

SigmaMatrix assemble_sigma(const QueryResults &results, const Catalog &catalog, const FeatureIndex &features);

} // namespace lmfao::ml
