#include "lmfao/datagen.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <tuple>

using namespace lmfao;
using json = nlohmann::json;

namespace {

// Plain modulo draws keep the sequences identical across standard libraries.
struct Rng
{
    std::mt19937_64 gen;
    explicit Rng(std::uint64_t seed) : gen(seed) {}
    std::size_t below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(gen() % n); }
    double unit() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
    bool chance(double p) { return unit() < p; }
};

AttributeDef cont(std::string name, PhysicalType physical = PhysicalType::int64)
{
    return {std::move(name), AttrKind::continuous, physical};
}

AttributeDef cat(std::string name) { return {std::move(name), AttrKind::categorical, PhysicalType::string}; }

RelationDef relation(std::string name, std::vector<AttributeDef> attrs) { return {std::move(name), std::move(attrs), {}}; }

} // namespace

void lmfao::register_example_udfs(Catalog &catalog)
{
    auto mod7 = [](double x) { return std::fmod(x, 7.0); };
    if (not catalog.find_udf("g")) catalog.register_udf({"g", mod7, "x mod 7"});
    if (not catalog.find_udf("h")) catalog.register_udf({"h", [](double x) { return 1.0 + std::fmod(x, 5.0); }, "1 + x mod 5"});
    if (not catalog.find_udf("mod7")) catalog.register_udf({"mod7", mod7, "x mod 7"});
}

Catalog lmfao::tiny_database()
{
    Catalog c;
    c.add_relation(relation("R", {cont("a"), cont("b")}), {{1, 1, 2}, {10, 20, 30}});
    c.add_relation(relation("S", {cont("a"), cont("c")}), {{1, 2, 2}, {100, 200, 300}});
    c.add_edge("R", "S");
    return c;
}

Catalog lmfao::favorita_database(const FavoritaOptions &o)
{
    if (o.items == 0 or o.dates == 0 or o.stores == 0) throw Error("favorita generator needs non-empty domains");
    Rng rng(o.seed);
    Catalog c;
    register_example_udfs(c);

    const RelId sales = c.add_relation(relation(
        "Sales", {cont("date"), cont("store"), cont("item"), cont("units"), cont("promo")}));
    const RelId holidays =
        c.add_relation(relation("Holidays", {cont("date"), cat("htype"), cat("locale"), cont("transferred")}));
    const RelId stores =
        c.add_relation(relation("Stores", {cont("store"), cat("city"), cat("state"), cat("stype"), cont("cluster")}));
    const RelId items = c.add_relation(relation("Items", {cont("item"), cat("family"), cont("class"), cont("perishable")}));
    const RelId txns = c.add_relation(relation("Transactions", {cont("date"), cont("store"), cont("txns")}));
    const RelId oil = c.add_relation(relation("Oil", {cont("date"), cont("price", PhysicalType::float64)}));

    // every item, date and store occurs in some sale
    std::set<std::tuple<std::size_t, std::size_t, std::size_t>> triples;
    const std::size_t target = std::max({o.sales, o.items, o.dates, o.stores});
    for (std::size_t i = 0; triples.size() < target and i < 20 * target; ++i) {
        const std::size_t item = i < o.items ? i : rng.below(o.items);
        const std::size_t date = i < o.dates ? i : rng.below(o.dates);
        const std::size_t store = i < o.stores ? i : rng.below(o.stores);
        triples.emplace(date, store, item);
    }
    std::vector<std::vector<double>> s(5);
    for (auto [date, store, item] : triples) {
        s[0].push_back(static_cast<double>(date));
        s[1].push_back(static_cast<double>(store));
        s[2].push_back(static_cast<double>(item));
        s[3].push_back(static_cast<double>(1 + rng.below(20)));
        s[4].push_back(rng.chance(0.2) ? 1 : 0);
    }
    c.set_data(sales, std::move(s));

    const std::vector<std::string> htypes{"Holiday", "Event", "Additional", "Transfer", "WorkDay"};
    const std::vector<std::string> locales{"National", "Regional", "Local"};
    std::vector<std::vector<double>> h(4);
    for (std::size_t d = 0; d < o.dates; ++d) {
        const std::size_t n = rng.chance(0.15) ? 2 : 1;
        const std::size_t first = rng.below(htypes.size());
        for (std::size_t k = 0; k < n; ++k) {
            h[0].push_back(static_cast<double>(d));
            h[1].push_back(c.encode(c.attribute_id("htype"), htypes[(first + k) % htypes.size()]));
            h[2].push_back(c.encode(c.attribute_id("locale"), locales[rng.below(locales.size())]));
            h[3].push_back(rng.chance(0.1) ? 1 : 0);
        }
    }
    c.set_data(holidays, std::move(h));

    const std::vector<std::string> cities{"Quito", "Guayaquil", "Cuenca", "Ambato", "Loja", "Manta", "Machala"};
    const std::vector<std::string> states{"Pichincha", "Guayas", "Azuay", "Tungurahua", "Loja", "Manabi", "El Oro"};
    const std::vector<std::string> stypes{"A", "B", "C", "D", "E"};
    std::vector<std::vector<double>> r(5);
    for (std::size_t st = 0; st < o.stores; ++st) {
        const std::size_t city = rng.below(cities.size());
        r[0].push_back(static_cast<double>(st));
        r[1].push_back(c.encode(c.attribute_id("city"), cities[city]));
        r[2].push_back(c.encode(c.attribute_id("state"), states[city]));
        r[3].push_back(c.encode(c.attribute_id("stype"), stypes[rng.below(stypes.size())]));
        r[4].push_back(static_cast<double>(1 + rng.below(17)));
    }
    c.set_data(stores, std::move(r));

    const std::vector<std::string> families{"GROCERY I", "BEVERAGES", "CLEANING", "PRODUCE", "DAIRY", "BREAD/BAKERY",
                                            "POULTRY", "MEATS"};
    std::vector<std::vector<double>> it(4);
    for (std::size_t i = 0; i < o.items; ++i) {
        const std::size_t fam = rng.below(families.size());
        it[0].push_back(static_cast<double>(i));
        it[1].push_back(c.encode(c.attribute_id("family"), families[fam]));
        it[2].push_back(static_cast<double>(1000 + 10 * fam + rng.below(4)));
        it[3].push_back(fam >= 3 ? 1 : 0);
    }
    c.set_data(items, std::move(it));

    std::vector<std::vector<double>> t(3);
    for (std::size_t d = 0; d < o.dates; ++d)
        for (std::size_t st = 0; st < o.stores; ++st)
            if (rng.chance(0.9)) {
                t[0].push_back(static_cast<double>(d));
                t[1].push_back(static_cast<double>(st));
                t[2].push_back(static_cast<double>(500 + rng.below(2000)));
            }
    c.set_data(txns, std::move(t));

    std::vector<std::vector<double>> ol(2);
    double price = 50.0;
    for (std::size_t d = 0; d < o.dates; ++d) {
        price = std::max(20.0, price + (rng.unit() - 0.5) * 2.0);
        if (rng.chance(0.05)) continue;
        ol[0].push_back(static_cast<double>(d));
        ol[1].push_back(std::round(price * 100.0) / 100.0);
    }
    c.set_data(oil, std::move(ol));

    c.add_edge("Sales", "Transactions");
    c.add_edge("Transactions", "Stores");
    c.add_edge("Transactions", "Oil");
    c.add_edge("Sales", "Holidays");
    c.add_edge("Sales", "Items");
    return c;
}

QueryBatch lmfao::favorita_batch(const Catalog &catalog, bool single_factor_q3)
{
    QueryBatch batch;
    add_query(batch, define_query(catalog, "Q1", {}, {{{{"units"}}}}));
    add_query(batch, define_query(catalog, "Q2", {"store"}, {{{{"item", "g"}, {"date", "h"}}}}));
    if (single_factor_q3)
        add_query(batch, define_query(catalog, "Q3", {"class"}, {{{{"units"}}}}));
    else
        add_query(batch, define_query(catalog, "Q3", {"class"}, {{{{"units"}, {"price"}}}}));
    return batch;
}

RootAssignment lmfao::favorita_roots(const Catalog &catalog)
{
    const RelId sales = catalog.relation_id("Sales");
    return {{"Q1", sales}, {"Q2", sales}, {"Q3", catalog.relation_id("Items")}};
}

RandomInstance lmfao::random_instance(std::uint64_t seed, const RandomOptions &o)
{
    Rng rng(seed);
    RandomInstance inst;
    Catalog &c = inst.catalog;
    register_example_udfs(c);

    const std::size_t nrel = 1 + rng.below(std::max<std::size_t>(1, o.max_relations));
    const std::size_t scale = std::max<std::size_t>(1, std::vector<std::size_t>{5, 40, 200, o.max_rows}[rng.below(4)]);
    const std::size_t scale_capped = std::min(scale, o.max_rows);
    const std::size_t domain = std::max<std::size_t>(2, scale_capped / (rng.chance(0.5) ? 2 : 4));

    std::vector<std::vector<std::string>> attrs(nrel);
    std::vector<std::vector<std::string>> up(nrel); // join attributes shared with the parent
    std::vector<std::size_t> parent(nrel, 0);
    std::set<std::string> join_attrs;
    for (std::size_t k = 1; k < nrel; ++k) {
        parent[k] = rng.below(k);
        const std::size_t p = parent[k];
        std::vector<std::string> shared{"j" + std::to_string(k)};
        if (rng.chance(0.2)) shared.push_back("j" + std::to_string(k) + "b");
        // extend an attribute of the parent's own edge along the path
        if (not up[p].empty() and rng.chance(0.3)) shared.push_back(up[p][rng.below(up[p].size())]);
        for (auto &a : shared) {
            join_attrs.insert(a);
            if (std::find(attrs[p].begin(), attrs[p].end(), a) == attrs[p].end()) attrs[p].push_back(a);
            attrs[k].push_back(a);
        }
        up[k] = shared;
    }
    std::vector<std::string> all;
    for (std::size_t k = 0; k < nrel; ++k) {
        const std::size_t priv = 1 + rng.below(2);
        for (std::size_t m = 0; m < priv; ++m) attrs[k].push_back("p" + std::to_string(k) + "_" + std::to_string(m));
    }
    for (std::size_t k = 0; k < nrel; ++k) {
        RelationDef def;
        def.name = "R" + std::to_string(k);
        std::vector<std::vector<double>> cols(attrs[k].size());
        for (auto &a : attrs[k]) {
            const bool join = join_attrs.contains(a);
            def.attributes.push_back(cont(a, join or o.integer ? PhysicalType::int64 : PhysicalType::float64));
        }
        const std::size_t rows = rng.chance(0.04) ? 0 : 1 + rng.below(scale_capped);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t a = 0; a < attrs[k].size(); ++a) {
                if (join_attrs.contains(attrs[k][a]))
                    cols[a].push_back(static_cast<double>(rng.below(domain)));
                else
                    cols[a].push_back(o.integer ? static_cast<double>(rng.below(101))
                                                : std::round(rng.unit() * 100.0 * 1024.0) / 1024.0 - 3.0);
            }
        c.add_relation(std::move(def), std::move(cols));
        if (k > 0) c.add_edge("R" + std::to_string(parent[k]), "R" + std::to_string(k));
    }
    for (AttrId a = 0; a < c.num_attributes(); ++a) all.push_back(c.attribute(a).name);

    auto bound = [&](const std::string &attr) {
        return join_attrs.contains(attr) ? static_cast<double>(domain) : 103.0;
    };
    const std::size_t nq = 1 + rng.below(std::max<std::size_t>(1, o.max_queries));
    for (std::size_t q = 0; q < nq; ++q) {
        std::vector<std::string> pool = all;
        std::vector<std::string> group_by;
        const std::size_t ng = rng.below(3);
        for (std::size_t g = 0; g < ng and not pool.empty(); ++g) {
            const std::size_t i = rng.below(pool.size());
            group_by.push_back(pool[i]);
            pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
        }
        std::vector<AggregateInput> aggs;
        const std::size_t na = 1 + rng.below(3);
        for (std::size_t j = 0; j < na; ++j) {
            AggregateInput in;
            std::vector<std::string> fpool = all;
            double magnitude = 1;
            const std::size_t nf = rng.below(4);
            for (std::size_t f = 0; f < nf and not fpool.empty(); ++f) {
                const std::size_t i = rng.below(fpool.size());
                const std::string attr = fpool[i];
                fpool.erase(fpool.begin() + static_cast<std::ptrdiff_t>(i));
                std::string udf;
                double m = bound(attr);
                switch (rng.below(5)) {
                case 0: udf = "identity"; break;
                case 1: udf = "square"; m *= m; break;
                case 2: udf = "one"; m = 1; break;
                case 3: udf = "mod7"; m = 7; break;
                default: {
                    const CmpOp op = static_cast<CmpOp>(rng.below(4));
                    udf = c.udf(c.indicator(op, static_cast<double>(rng.below(static_cast<std::size_t>(bound(attr))))))
                              .name;
                    m = 1;
                }
                }
                // keep integer sums far inside the exact double range
                if (magnitude * m > 1e8) continue;
                magnitude *= m;
                in.factors.push_back({attr, udf});
            }
            if (rng.chance(0.15)) in.constant = 3;
            aggs.push_back(std::move(in));
        }
        add_query(inst.batch, define_query(c, "q" + std::to_string(q), group_by, aggs));
    }
    return inst;
}

void lmfao::write_database(const Catalog &catalog, const std::filesystem::path &dir)
{
    std::filesystem::create_directories(dir);
    json schema;
    schema["relations"] = json::array();
    for (RelId r = 0; r < catalog.num_relations(); ++r) {
        const auto &def = catalog.relation(r);
        json rel{{"name", def.name}, {"file", def.name + ".csv"}, {"attributes", json::array()}};
        for (auto &a : def.attributes)
            rel["attributes"].push_back({{"name", a.name}, {"kind", to_string(a.kind)}, {"physical", to_string(a.physical)}});
        schema["relations"].push_back(rel);

        std::ofstream out(dir / (def.name + ".csv"));
        if (not out) throw Error("cannot write " + (dir / (def.name + ".csv")).string());
        for (std::size_t p = 0; p < def.attributes.size(); ++p) out << (p ? "," : "") << def.attributes[p].name;
        out << "\n";
        if (not catalog.loaded(r)) continue;
        const auto &data = catalog.data(r);
        for (std::size_t row = 0; row < data.size(); ++row) {
            for (std::size_t p = 0; p < def.attributes.size(); ++p)
                out << (p ? "," : "") << catalog.format_value(catalog.attribute_id(def.attributes[p].name), data.at(row, p));
            out << "\n";
        }
    }
    json edges = json::array();
    for (auto &[a, b] : catalog.schema_edges()) edges.push_back({a, b});
    schema["jointree"] = {{"edges", edges}};
    std::ofstream out(dir / "schema.json");
    if (not out) throw Error("cannot write " + (dir / "schema.json").string());
    out << schema.dump(2) << "\n";
}
