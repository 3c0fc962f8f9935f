#include "lmfao/engine.hpp"

#include "lmfao/ml/cart.hpp"
#include "lmfao/ml/rkmeans.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

using namespace lmfao;
using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

std::vector<AttrId> attribute_ids(const Catalog &catalog, const std::vector<std::string> &names)
{
    std::vector<AttrId> out;
    for (auto &n : names) out.push_back(catalog.attribute_id(n));
    return out;
}

json key_json(const Catalog &catalog, AttrId attr, double value)
{
    if (catalog.attribute(attr).kind == AttrKind::categorical) return catalog.format_value(attr, value);
    return value;
}

} // namespace

const char *lmfao::to_string(AppKind kind)
{
    switch (kind) {
    case AppKind::linreg: return "linreg";
    case AppKind::cart: return "cart";
    case AppKind::rkmeans: return "rkmeans";
    case AppKind::batch: return "batch";
    }
    return "?";
}

AppConfig lmfao::parse_app_config(const std::string &text, const std::filesystem::path &base_dir)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error &e) {
        throw Error(std::string("config parse error: ") + e.what());
    }
    AppConfig c;
    try {
        const auto app = doc.value("app", std::string("batch"));
        if (app == "linreg")
            c.app = AppKind::linreg;
        else if (app == "cart")
            c.app = AppKind::cart;
        else if (app == "rkmeans")
            c.app = AppKind::rkmeans;
        else if (app == "batch")
            c.app = AppKind::batch;
        else
            throw Error("unknown application '" + app + "'");

        c.features = doc.value("features", c.features);
        c.label = doc.value("label", c.label);
        c.lambda = doc.value("lambda", c.lambda);
        c.bgd.tolerance = doc.value("tolerance", c.bgd.tolerance);
        c.bgd.max_iterations = doc.value("max_iterations", c.bgd.max_iterations);
        c.max_depth = doc.value("max_depth", c.max_depth);
        c.min_leaf = doc.value("min_leaf", c.min_leaf);
        c.dimensions = doc.value("dimensions", c.dimensions);
        c.k = doc.value("k", c.k);
        c.k_per_dim = doc.value("k_per_dim", c.k_per_dim);
        c.seed = doc.value("seed", c.seed);
        c.lloyd_runs = doc.value("lloyd_runs", c.lloyd_runs);
        c.roots = doc.value("roots", c.roots);
        if (doc.contains("schema")) {
            c.schema = doc.at("schema").get<std::string>();
            if (c.schema.is_relative() and not base_dir.empty()) c.schema = base_dir / c.schema;
        }
        if (doc.contains("queries")) {
            c.queries = doc.at("queries");
        } else if (doc.contains("batch")) {
            std::filesystem::path file = doc.at("batch").get<std::string>();
            if (file.is_relative() and not base_dir.empty()) file = base_dir / file;
            std::ifstream in(file);
            if (not in) throw Error("cannot read batch file " + file.string());
            std::stringstream buf;
            buf << in.rdbuf();
            c.queries = json::parse(buf.str());
            if (c.queries.is_object()) c.queries = c.queries.at("queries");
        }
    } catch (const json::exception &e) {
        throw Error(std::string("config error: ") + e.what());
    }
    if ((c.app == AppKind::linreg or c.app == AppKind::cart) and c.label.empty())
        throw Error(std::string(to_string(c.app)) + " config needs a label");
    if (c.app == AppKind::rkmeans and c.dimensions.empty()) throw Error("rkmeans config needs dimensions");
    if (c.app == AppKind::batch and not c.queries.is_array()) throw Error("batch config needs queries");
    return c;
}

AppConfig lmfao::load_app_config(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (not in) throw Error("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_app_config(buf.str(), path.parent_path());
}

QueryBatch lmfao::initial_batch(const AppConfig &config, Catalog &catalog)
{
    switch (config.app) {
    case AppKind::linreg:
        return ml::gen_sigma_batch(catalog, ml::FeatureIndex::build(catalog, config.features, config.label));
    case AppKind::cart: {
        QueryBatch b = ml::cart_node_batch(catalog, ml::TreeNode{}, attribute_ids(catalog, config.features),
                                           catalog.attribute_id(config.label));
        if (b.queries.empty()) add_query(b, ml::cart_stats_query(catalog, {}, catalog.attribute_id(config.label)));
        return b;
    }
    case AppKind::rkmeans: return ml::rkmeans_step1_batch(catalog, attribute_ids(catalog, config.dimensions));
    case AppKind::batch: {
        const std::string text = config.queries.dump();
        register_batch_indicators(catalog, text);
        return parse_batch(catalog, text);
    }
    }
    throw Error("unknown application");
}

RootAssignment lmfao::pinned_roots(const AppConfig &config, const QueryBatch &batch, const Catalog &catalog)
{
    RootAssignment out;
    for (auto &[q, node] : config.roots)
        if (batch.index_of(q)) out[q] = catalog.relation_id(node);
    return out;
}

QueryResults BatchEvaluator::operator()(const Catalog &catalog, const QueryBatch &batch)
{
    auto t0 = Clock::now();
    const JoinTree tree = JoinTree::build(catalog);
    RootAssignment pinned;
    for (auto &[q, node] : roots_)
        if (batch.index_of(q)) pinned[q] = catalog.relation_id(node);
    ViewSet views = generate_views(batch, tree, catalog, pinned);
    times.view_generation_ms += ms_since(t0);

    t0 = Clock::now();
    const BatchPlan plan = plan_views(std::move(views), batch, tree, catalog);
    times.planning_ms += ms_since(t0);

    t0 = Clock::now();
    BatchResult res = execute_batch(plan, batch, catalog, tree, options_);
    times.execution_ms += ms_since(t0);
    ++times.batches;
    times.queries += batch.queries.size();
    last_report = std::move(res.report);
    return std::move(res.results);
}

ml::BatchRunner BatchEvaluator::runner()
{
    return [this](const Catalog &c, const QueryBatch &b) { return (*this)(c, b); };
}

AppOutcome lmfao::run_app(const AppConfig &config, Catalog &catalog, const ExecOptions &options)
{
    BatchEvaluator eval(options, config.roots);
    AppOutcome out;
    const auto t0 = Clock::now();
    switch (config.app) {
    case AppKind::linreg: {
        const auto fx = ml::FeatureIndex::build(catalog, config.features, config.label);
        const auto sigma = ml::assemble_sigma(eval(catalog, ml::gen_sigma_batch(catalog, fx)), catalog, fx);
        const auto t1 = Clock::now();
        const auto theta = ml::bgd_train(sigma, fx, config.lambda, config.bgd);
        eval.times.application_ms += ms_since(t1);
        json params = json::array();
        for (std::size_t s = 0; s < fx.size(); ++s)
            params.push_back({{"slot", fx.slot_name(catalog, s)}, {"value", theta.values(static_cast<Eigen::Index>(s))}});
        out.model = {{"app", "linreg"},
                     {"label", config.label},
                     {"lambda", config.lambda},
                     {"count", sigma.count},
                     {"parameters", params},
                     {"objective", theta.trace.back()},
                     {"iterations", theta.iterations},
                     {"converged", theta.converged}};
        break;
    }
    case AppKind::cart: {
        ml::CartOptions opts;
        opts.max_depth = config.max_depth;
        opts.min_leaf = config.min_leaf;
        const auto tree = ml::cart_train(catalog, attribute_ids(catalog, config.features),
                                         catalog.attribute_id(config.label), opts, eval.runner());
        json nodes = json::array();
        for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
            const auto &n = tree.nodes[i];
            json node{{"id", i},
                      {"depth", n.depth},
                      {"count", n.moments.count},
                      {"prediction", n.prediction},
                      {"variance", n.moments.variance()}};
            if (n.split) {
                node["split"] = ml::describe(catalog, *n.split);
                node["left"] = n.left;
                node["right"] = n.right;
            }
            nodes.push_back(node);
        }
        out.model = {{"app", "cart"}, {"label", config.label}, {"nodes", nodes}};
        break;
    }
    case AppKind::rkmeans: {
        ml::RkMeansOptions opts;
        opts.k = config.k;
        opts.k_per_dim = config.k_per_dim;
        opts.seed = config.seed;
        opts.lloyd_runs = config.lloyd_runs;
        const auto res = ml::rkmeans(catalog, attribute_ids(catalog, config.dimensions), opts, eval.runner());
        json centroids = json::array();
        for (Eigen::Index c = 0; c < res.centroids.rows(); ++c) {
            json row = json::array();
            for (Eigen::Index j = 0; j < res.centroids.cols(); ++j) row.push_back(res.centroids(c, j));
            centroids.push_back(row);
        }
        json dims = json::array();
        for (auto &p : res.projections)
            dims.push_back({{"dimension", catalog.attribute(p.attr).name},
                            {"distinct_values", p.values.rows()},
                            {"aggregate_ms", p.aggregate_ms},
                            {"clusters", p.clusters.centroids.rows()}});
        out.model = {{"app", "rkmeans"},
                     {"dimensions", config.dimensions},
                     {"k", config.k},
                     {"centroids", centroids},
                     {"grid_size", res.grid.points.rows()},
                     {"data_size", res.grid.total_weight},
                     {"relative_size", res.relative_size},
                     {"queries", res.queries},
                     {"per_dimension", dims},
                     {"step_ms", {res.step_ms[0], res.step_ms[1], res.step_ms[2], res.step_ms[3]}}};
        if (res.gap) {
            out.model["objective"] = *res.objective;
            out.model["gap"] = *res.gap;
            out.model["lloyd_objectives"] = res.lloyd_objectives;
        }
        break;
    }
    case AppKind::batch: {
        const QueryBatch batch = initial_batch(config, catalog);
        out.model = {{"app", "batch"}, {"results", results_json(eval(catalog, batch), catalog)}};
        break;
    }
    }
    const double total = ms_since(t0);
    out.report = {{"app", to_string(config.app)},
                  {"total_ms", total},
                  {"view_generation_ms", eval.times.view_generation_ms},
                  {"planning_ms", eval.times.planning_ms},
                  {"execution_ms", eval.times.execution_ms},
                  {"application_ms", total - eval.times.view_generation_ms - eval.times.planning_ms -
                                         eval.times.execution_ms},
                  {"batches", eval.times.batches},
                  {"queries", eval.times.queries},
                  {"last_execution", report_json(eval.last_report)}};
    return out;
}

json lmfao::results_json(const QueryResults &results, const Catalog &catalog)
{
    json out = json::object();
    for (auto &[id, table] : results) {
        json keys = json::array(), rows = json::array();
        for (AttrId a : table.keys) keys.push_back(catalog.attribute(a).name);
        for (auto &[key, values] : table.rows) {
            json row = json::array();
            for (std::size_t i = 0; i < key.size(); ++i) row.push_back(key_json(catalog, table.keys[i], key[i]));
            for (double v : values) row.push_back(v);
            rows.push_back(row);
        }
        out[id] = {{"keys", keys}, {"arity", table.arity}, {"rows", rows}};
    }
    return out;
}

json lmfao::report_json(const ExecutionReport &report)
{
    json groups = json::array();
    for (auto &g : report.groups) {
        json outs = json::array();
        for (auto &[name, n] : g.outputs) outs.push_back({{"name", name}, {"rows", n}});
        groups.push_back({{"group", g.group},
                          {"node", g.node},
                          {"wall_ms", g.wall_ms},
                          {"rows_scanned", g.rows_scanned},
                          {"relation_rows", g.relation_rows},
                          {"lookups", g.lookups},
                          {"chunks", g.chunks},
                          {"outputs", outs}});
    }
    json storage = json::array();
    for (auto s : report.storage) storage.push_back(to_string(s));
    return {{"groups", groups},
            {"schedule", report.schedule},
            {"storage", storage},
            {"threads", report.threads},
            {"total_ms", report.total_ms}};
}

json lmfao::views_json(const ViewSet &views, const QueryBatch &batch, const Catalog &catalog)
{
    auto names = [&](const std::vector<AttrId> &attrs) {
        json a = json::array();
        for (AttrId x : attrs) a.push_back(catalog.attribute(x).name);
        return a;
    };
    json vs = json::array();
    for (auto &v : views.views) {
        json aggs = json::array();
        for (auto &a : v.aggregates) aggs.push_back(describe(catalog, a));
        json incoming = json::array();
        for (ViewId i : v.incoming) incoming.push_back(views.views[i].name);
        vs.push_back({{"id", v.id},
                      {"name", v.name},
                      {"from", catalog.relation(v.from).name},
                      {"to", catalog.relation(v.to).name},
                      {"group_by", names(v.group_by)},
                      {"aggregates", aggs},
                      {"incoming", incoming}});
    }
    json qs = json::array();
    for (std::size_t i = 0; i < batch.queries.size(); ++i) {
        const auto &q = batch.queries[i];
        json incoming = json::array();
        for (ViewId v : views.outputs[i].incoming) incoming.push_back(views.views[v].name);
        qs.push_back({{"id", q.id},
                      {"root", catalog.relation(views.outputs[i].node).name},
                      {"group_by", names(q.group_by)},
                      {"text", describe(catalog, q)},
                      {"incoming", incoming}});
    }
    return {{"views", vs}, {"queries", qs}};
}

json lmfao::groups_json(const BatchPlan &plan, const QueryBatch &batch, const Catalog &catalog)
{
    json groups = json::array();
    for (std::size_t g = 0; g < plan.dag.groups.size(); ++g) {
        const auto &grp = plan.dag.groups[g];
        const auto &ir = plan.plans[g];
        json outputs = json::array(), incoming = json::array(), order = json::array();
        for (auto &o : grp.outputs) outputs.push_back(output_name(o, plan.views, batch));
        for (ViewId v : grp.incoming) incoming.push_back(plan.views.views[v].name);
        for (AttrId a : ir.order) order.push_back(catalog.attribute(a).name);
        auto [na, nb] = register_count(ir);
        groups.push_back({{"id", grp.id},
                          {"node", catalog.relation(grp.node).name},
                          {"outputs", outputs},
                          {"incoming", incoming},
                          {"order", order},
                          {"alpha", na},
                          {"beta", nb}});
    }
    return {{"groups", groups}, {"edges", plan.dag.edges}, {"waves", plan.dag.waves()}};
}
