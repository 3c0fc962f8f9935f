#include "lmfao/ml/rkmeans.hpp"

#include "lmfao/oracle.hpp"

#include <chrono>

using namespace lmfao;
using namespace lmfao::ml;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

std::string step1_id(const Catalog &catalog, AttrId a) { return "step1(" + catalog.attribute(a).name + ")"; }

void check_dimensions(const Catalog &catalog, const std::vector<AttrId> &dims)
{
    if (dims.empty()) throw Error("at least one dimension required");
    for (AttrId a : dims)
        if (catalog.attribute(a).kind != AttrKind::continuous)
            throw Error("dimension " + catalog.attribute(a).name + " is categorical; k-means needs numeric values");
}

} // namespace

QueryBatch lmfao::ml::rkmeans_step1_batch(const Catalog &catalog, const std::vector<AttrId> &dimensions)
{
    check_dimensions(catalog, dimensions);
    QueryBatch batch;
    for (AttrId a : dimensions) {
        Query q;
        q.id = step1_id(catalog, a);
        q.group_by = {a};
        q.aggregates = {AggregateSpec{}};
        add_query(batch, canonicalize(catalog, std::move(q)));
    }
    return batch;
}

Projection lmfao::ml::project(const QueryResults &step1, const Catalog &catalog, AttrId attr, std::size_t k,
                              std::uint64_t seed)
{
    auto it = step1.find(step1_id(catalog, attr));
    if (it == step1.end()) throw Error("missing result " + step1_id(catalog, attr));
    const auto &rows = it->second.rows;
    Projection p;
    p.attr = attr;
    p.values.resize(static_cast<Eigen::Index>(rows.size()), 1);
    p.weights.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        p.values(static_cast<Eigen::Index>(i), 0) = rows[i].first.at(0);
        p.weights(static_cast<Eigen::Index>(i)) = rows[i].second.at(0);
    }
    if (rows.empty()) throw Error("empty dataset");
    p.clusters = weighted_lloyd(p.values, p.weights, k, seed);
    return p;
}

GridSetup lmfao::ml::rkmeans_grid_query(const Catalog &catalog, const std::vector<Projection> &projections)
{
    GridSetup g{catalog, {}, {}};
    Query q;
    q.id = "grid";
    for (auto &p : projections) {
        const auto &info = catalog.attribute(p.attr);
        std::string cname = "C_" + info.name;
        while (g.catalog.find_attribute(cname)) cname += "_";
        std::string rname = "A_" + info.name;
        while (g.catalog.find_relation(rname)) rname += "_";

        RelationDef def{rname, {{info.name, info.kind, info.physical}, {cname, AttrKind::continuous, PhysicalType::int64}}, {}};
        std::vector<std::vector<double>> cols(2);
        for (Eigen::Index i = 0; i < p.values.rows(); ++i) {
            cols[0].push_back(p.values(i, 0));
            cols[1].push_back(static_cast<double>(p.clusters.assignment[static_cast<std::size_t>(i)]));
        }
        g.catalog.add_relation(std::move(def), std::move(cols));
        g.catalog.add_edge(catalog.relation(info.relations.front()).name, rname);
        const AttrId c = g.catalog.attribute_id(cname);
        g.cluster_attributes.push_back(c);
        q.group_by.push_back(c);
    }
    q.aggregates = {AggregateSpec{}};
    add_query(g.batch, canonicalize(g.catalog, std::move(q)));
    return g;
}

CoresetGrid lmfao::ml::assemble_grid(const QueryResults &results, const GridSetup &setup,
                                     const std::vector<Projection> &projections)
{
    auto it = results.find("grid");
    if (it == results.end()) throw Error("missing result grid");
    const ResultTable &table = it->second;
    CoresetGrid grid;
    const auto d = static_cast<Eigen::Index>(projections.size());
    std::vector<std::size_t> column(projections.size());
    for (std::size_t j = 0; j < projections.size(); ++j)
        column[j] = static_cast<std::size_t>(
            std::find(table.keys.begin(), table.keys.end(), setup.cluster_attributes[j]) - table.keys.begin());

    std::vector<std::size_t> kept;
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        if (table.rows[r].second.at(0) > 0) kept.push_back(r);
    grid.points.resize(static_cast<Eigen::Index>(kept.size()), d);
    grid.weights.resize(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const auto &[key, values] = table.rows[kept[i]];
        for (std::size_t j = 0; j < projections.size(); ++j)
            grid.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                projections[j].clusters.centroids(static_cast<Eigen::Index>(key.at(column[j])), 0);
        grid.weights(static_cast<Eigen::Index>(i)) = values[0];
    }
    grid.total_weight = grid.weights.sum();
    return grid;
}

Eigen::MatrixXd lmfao::ml::materialize_points(const Catalog &catalog, const std::vector<AttrId> &dimensions)
{
    const auto join = materialize_join(catalog, JoinTree::build(catalog));
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(join.size()), static_cast<Eigen::Index>(dimensions.size()));
    for (std::size_t i = 0; i < join.size(); ++i)
        for (std::size_t j = 0; j < dimensions.size(); ++j)
            pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = join.row(i)[dimensions[j]];
    return pts;
}

RkMeansResult lmfao::ml::rkmeans(const Catalog &catalog, const std::vector<AttrId> &dimensions,
                                 const RkMeansOptions &options, const BatchRunner &run)
{
    check_dimensions(catalog, dimensions);
    if (options.k == 0) throw Error("k must be positive");
    const std::size_t kj = options.k_per_dim ? options.k_per_dim : options.k;
    RkMeansResult res;
    res.dimensions = dimensions;

    // Steps 1 and 2, one aggregate query and one 1-d clustering per dimension
    auto t0 = Clock::now();
    for (std::size_t j = 0; j < dimensions.size(); ++j) {
        auto ta = Clock::now();
        const auto step1 = run(catalog, rkmeans_step1_batch(catalog, {dimensions[j]}));
        const double agg_ms = ms_since(ta);
        ++res.queries;
        res.step_ms[0] += agg_ms;
        ta = Clock::now();
        res.projections.push_back(project(step1, catalog, dimensions[j], kj, options.seed + j));
        res.projections.back().aggregate_ms = agg_ms;
        res.step_ms[1] += ms_since(ta);
    }

    t0 = Clock::now();
    const GridSetup setup = rkmeans_grid_query(catalog, res.projections);
    const auto grid_results = run(setup.catalog, setup.batch);
    res.queries += setup.batch.queries.size();
    res.grid = assemble_grid(grid_results, setup, res.projections);
    res.step_ms[2] = ms_since(t0);

    t0 = Clock::now();
    const auto final_clusters = weighted_lloyd(res.grid.points, res.grid.weights, options.k, options.seed);
    res.centroids = final_clusters.centroids;
    res.step_ms[3] = ms_since(t0);
    res.relative_size = res.grid.total_weight > 0 ? static_cast<double>(res.grid.points.rows()) / res.grid.total_weight : 0;

    if (options.lloyd_runs > 0) {
        const Eigen::MatrixXd pts = materialize_points(catalog, dimensions);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(pts.rows());
        res.objective = kmeans_objective(pts, ones, res.centroids);
        double gap = 0;
        for (std::size_t r = 0; r < options.lloyd_runs; ++r) {
            const auto full = weighted_lloyd(pts, ones, options.k, options.seed + 1000 + r);
            res.lloyd_objectives.push_back(full.objective);
            gap += full.objective > 0 ? (*res.objective - full.objective) / full.objective : 0.0;
        }
        res.gap = gap / static_cast<double>(options.lloyd_runs);
    }
    return res;
}
