#include "lmfao/ml/features.hpp"

#include <algorithm>
#include <set>

using namespace lmfao;
using namespace lmfao::ml;

FeatureIndex FeatureIndex::build(const Catalog &catalog, const std::vector<std::string> &features,
                                 const std::string &label)
{
    FeatureIndex fx;
    fx.slots.push_back({FeatureSlot::intercept, 0, 0});
    std::set<AttrId> seen;
    auto add = [&](const std::string &name) {
        const AttrId a = catalog.attribute_id(name);
        if (not seen.insert(a).second) throw Error("attribute " + name + " listed twice");
        fx.attributes.push_back(a);
        if (catalog.attribute(a).kind == AttrKind::continuous) {
            fx.slots.push_back({FeatureSlot::continuous, a, 0});
            return;
        }
        std::set<double> codes;
        for (RelId r : catalog.attribute(a).relations)
            if (catalog.loaded(r))
                for (double v : catalog.data(r).column(name)) codes.insert(v);
        for (double code : codes) fx.slots.push_back({FeatureSlot::category, a, code});
    };
    for (auto &f : features) add(f);
    add(label);
    fx.label = fx.attributes.back();
    if (catalog.attribute(fx.label).kind != AttrKind::continuous) throw Error("label " + label + " must be continuous");
    fx.label_slot = fx.slots.size() - 1;
    return fx;
}

std::optional<std::size_t> FeatureIndex::slot(AttrId attr, double code) const
{
    for (std::size_t s = 1; s < slots.size(); ++s)
        if (slots[s].attr == attr and (slots[s].kind == FeatureSlot::continuous or slots[s].code == code)) return s;
    return std::nullopt;
}

std::string FeatureIndex::slot_name(const Catalog &catalog, std::size_t s) const
{
    const auto &sl = slots.at(s);
    if (sl.kind == FeatureSlot::intercept) return "intercept";
    const auto &name = catalog.attribute(sl.attr).name;
    if (sl.kind == FeatureSlot::continuous) return name;
    return name + "=" + catalog.format_value(sl.attr, sl.code);
}

namespace {

std::string pair_id(const Catalog &catalog, std::optional<AttrId> a, std::optional<AttrId> b)
{
    auto name = [&](std::optional<AttrId> x) { return x ? catalog.attribute(*x).name : std::string("1"); };
    return "sigma(" + name(a) + "," + name(b) + ")";
}

} // namespace

QueryBatch lmfao::ml::gen_sigma_batch(const Catalog &catalog, const FeatureIndex &features)
{
    std::vector<std::optional<AttrId>> items{std::nullopt};
    for (AttrId a : features.attributes) items.push_back(a);

    auto categorical = [&](std::optional<AttrId> x) {
        return x and catalog.attribute(*x).kind == AttrKind::categorical;
    };
    QueryBatch batch;
    for (std::size_t i = 0; i < items.size(); ++i)
        for (std::size_t j = i; j < items.size(); ++j) {
            const auto a = items[i], b = items[j];
            Query q;
            q.id = pair_id(catalog, a, b);
            AggregateSpec agg;
            if (a and b and *a == *b) {
                if (categorical(a))
                    q.group_by.push_back(*a);
                else
                    agg.factors.push_back({*a, catalog.udf_id("square")});
            } else {
                for (auto x : {a, b}) {
                    if (not x) continue;
                    if (categorical(x))
                        q.group_by.push_back(*x);
                    else
                        agg.factors.push_back({*x, catalog.udf_id("identity")});
                }
            }
            q.aggregates.push_back(std::move(agg));
            add_query(batch, canonicalize(catalog, std::move(q)));
        }
    return batch;
}

SigmaMatrix lmfao::ml::assemble_sigma(const QueryResults &results, const Catalog &catalog,
                                      const FeatureIndex &features)
{
    const auto n = static_cast<Eigen::Index>(features.size());
    SigmaMatrix sigma;
    sigma.entries = Eigen::MatrixXd::Zero(n, n);

    std::vector<std::optional<AttrId>> items{std::nullopt};
    for (AttrId a : features.attributes) items.push_back(a);

    for (std::size_t i = 0; i < items.size(); ++i)
        for (std::size_t j = i; j < items.size(); ++j) {
            const auto id = pair_id(catalog, items[i], items[j]);
            auto it = results.find(id);
            if (it == results.end()) throw Error("missing result " + id);
            const ResultTable &table = it->second;
            for (auto &[key, values] : table.rows) {
                auto slot_of = [&](std::optional<AttrId> x) -> std::optional<std::size_t> {
                    if (not x) return 0;
                    if (catalog.attribute(*x).kind == AttrKind::continuous) return features.slot(*x);
                    auto pos = std::find(table.keys.begin(), table.keys.end(), *x) - table.keys.begin();
                    return features.slot(*x, key.at(static_cast<std::size_t>(pos)));
                };
                const auto s = slot_of(items[i]), t = slot_of(items[j]);
                if (not s or not t) throw Error("result " + id + " has a category without a slot");
                const auto si = static_cast<Eigen::Index>(*s), ti = static_cast<Eigen::Index>(*t);
                sigma.entries(si, ti) += values.at(0);
                if (si != ti) sigma.entries(ti, si) += values.at(0);
            }
        }
    sigma.count = sigma.entries(0, 0);
    return sigma;
}
