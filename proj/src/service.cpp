#include "lmfao/service.hpp"

#include "lmfao/datagen.hpp"
#include "lmfao/ml/lloyd.hpp"
#include "lmfao/render.hpp"

#include <httplib.h>

#include <mutex>
#include <regex>

using namespace lmfao;
using json = nlohmann::json;

namespace {

struct HttpError : Error
{
    int status;
    HttpError(int status, const std::string &what) : Error(what), status(status) {}
};

[[noreturn]] void fail(int status, const std::string &what) { throw HttpError(status, what); }

std::map<std::string, std::string> parse_params(const std::string &query)
{
    std::map<std::string, std::string> out;
    httplib::Params params;
    httplib::detail::parse_query_text(query, params);
    for (auto &[k, v] : params) out[k] = v;
    return out;
}

RelId node_param(const Catalog &catalog, const std::string &name)
{
    auto id = catalog.find_relation(name);
    if (not id) fail(404, "unknown node " + name);
    return *id;
}

} // namespace

struct Service::Session
{
    Catalog catalog;
    AppConfig config;
    JoinTree tree;
    QueryBatch batch;
    std::optional<BatchPlan> plan; ///< views, groups and plans of `batch`
    std::optional<AppOutcome> outcome;
    bool invalidated = false; ///< a mutation cleared `outcome`

    void replan()
    {
        RootAssignment pinned = pinned_roots(config, batch, catalog);
        plan = plan_batch(batch, tree, catalog, pinned);
    }
};

Service::Service(ExecOptions options) : options_(options) {}
Service::~Service() = default;

Response Service::handle(const std::string &method, const std::string &target, const std::string &body)
{
    const auto qpos = target.find('?');
    const std::string path = target.substr(0, qpos);
    const auto params = qpos == std::string::npos ? std::map<std::string, std::string>{}
                                                  : parse_params(target.substr(qpos + 1));
    const bool mutating = method == "POST";
    Response r;
    try {
        json doc = json::object();
        if (mutating and not body.empty()) {
            try {
                doc = json::parse(body);
            } catch (const json::parse_error &e) {
                fail(400, std::string("malformed body: ") + e.what());
            }
            if (not doc.is_object()) fail(400, "body must be a JSON object");
        }

        std::unique_lock<std::shared_mutex> write(mutex_, std::defer_lock);
        std::shared_lock<std::shared_mutex> read(mutex_, std::defer_lock);
        if (mutating)
            write.lock();
        else
            read.lock();

        if (auto g = params.find("generation"); g != params.end()) {
            std::uint64_t want = 0;
            try {
                want = std::stoull(g->second);
            } catch (const std::exception &) {
                fail(400, "bad generation " + g->second);
            }
            if (want != generation_) fail(409, "stale: session generation is " + std::to_string(generation_));
        }

        static const std::regex root_re("/queries/([^/]+)/root"), code_re("/groups/([^/]+)/code");
        std::smatch m;
        static const std::regex known(R"(/(session|jointree|views|groups|run|metrics|rkmeans/assign|queries/[^/]+/root|groups/[^/]+/code))");
        if (not std::regex_match(path, known)) fail(404, "no endpoint " + method + " " + path);
        if (method == "POST" and path == "/session") {
            r = create_session(doc);
        } else if (not session_) {
            fail(409, "no active session; POST /session first");
        } else if (method == "GET" and path == "/jointree") {
            r = jointree();
        } else if (method == "GET" and path == "/views") {
            r = views(params);
        } else if (method == "POST" and std::regex_match(path, m, root_re)) {
            r = reassign(httplib::detail::decode_url(m[1].str(), false), doc);
        } else if (method == "GET" and path == "/groups") {
            r = groups();
        } else if (method == "GET" and std::regex_match(path, m, code_re)) {
            r = group_code(m[1].str());
        } else if (method == "POST" and path == "/run") {
            r = run(doc);
        } else if (method == "POST" and path == "/rkmeans/assign") {
            r = assign(doc);
        } else if (method == "GET" and path == "/metrics") {
            r = metrics();
        } else {
            fail(404, "no endpoint " + method + " " + path);
        }
    } catch (const HttpError &e) {
        r = {e.status, {{"error", e.what()}}};
    } catch (const Error &e) {
        r = {400, {{"error", e.what()}}};
    } catch (const json::exception &e) {
        r = {400, {{"error", std::string("malformed body: ") + e.what()}}};
    }
    r.body["generation"] = generation_;
    return r;
}

Response Service::create_session(const json &body)
{
    auto s = std::make_unique<Session>();
    const json *cfg = body.contains("app-config") ? &body.at("app-config")
                      : body.contains("app_config") ? &body.at("app_config")
                                                    : nullptr;
    if (not cfg) fail(400, "session needs an app-config");
    s->config = cfg->is_string() ? load_app_config(cfg->get<std::string>())
                                 : parse_app_config(cfg->dump(), body.value("base_dir", std::string()));
    // The metrics panel compares against ten full-data Lloyd runs unless told otherwise.
    if (s->config.app == AppKind::rkmeans and s->config.lloyd_runs == 0) s->config.lloyd_runs = 10;

    if (body.contains("database")) {
        const auto name = body.at("database").get<std::string>();
        if (name == "tiny")
            s->catalog = tiny_database();
        else if (name == "favorita")
            s->catalog = favorita_database();
        else
            fail(404, "unknown built-in database " + name);
    } else if (body.contains("schema")) {
        const auto &schema = body.at("schema");
        s->catalog = schema.is_string() ? Catalog::load_schema(schema.get<std::string>())
                                        : Catalog::parse_schema(schema.dump(), body.value("base_dir", std::string()));
    } else if (not s->config.schema.empty()) {
        s->catalog = Catalog::load_schema(s->config.schema);
    } else {
        fail(400, "session needs a schema or a database");
    }
    register_example_udfs(s->catalog);
    s->catalog.load_all();

    s->tree = JoinTree::build(s->catalog);
    s->batch = initial_batch(s->config, s->catalog);
    s->replan();
    session_ = std::move(s);
    ++generation_;
    json rels = json::array();
    for (RelId r = 0; r < session_->catalog.num_relations(); ++r) rels.push_back(session_->catalog.relation(r).name);
    return {200, {{"app", to_string(session_->config.app)}, {"relations", rels}, {"queries", session_->batch.queries.size()}}};
}

Response Service::jointree() const
{
    const auto &s = *session_;
    const auto &views = s.plan->views;
    json nodes = json::array(), edges = json::array();
    for (RelId r = 0; r < s.tree.size(); ++r) {
        json attrs = json::array();
        for (AttrId a : s.tree.attributes(r)) attrs.push_back(s.catalog.attribute(a).name);
        nodes.push_back({{"name", s.tree.name(r)}, {"attributes", attrs}, {"rows", s.catalog.data(r).size()}});
    }
    for (RelId a = 0; a < s.tree.size(); ++a)
        for (auto &nb : s.tree.neighbors(a)) {
            if (nb.node < a) continue;
            edges.push_back({{"a", s.tree.name(a)},
                             {"b", s.tree.name(nb.node)},
                             {"views_ab", views.views_on(a, nb.node).size()},
                             {"views_ba", views.views_on(nb.node, a).size()}});
        }
    return {200, {{"nodes", nodes}, {"edges", edges}}};
}

Response Service::views(const std::map<std::string, std::string> &params) const
{
    const auto &s = *session_;
    json all = views_json(s.plan->views, s.batch, s.catalog);
    auto node = params.find("node");
    auto dir = params.find("direction");
    if (node == params.end()) {
        if (dir != params.end()) fail(400, "direction needs a node");
        return {200, all};
    }
    const std::string from = s.catalog.relation(node_param(s.catalog, node->second)).name;
    json vs = json::array(), qs = json::array();
    if (dir != params.end()) {
        const RelId to = node_param(s.catalog, dir->second);
        const RelId f = node_param(s.catalog, from);
        bool adjacent = false;
        for (auto &nb : s.tree.neighbors(f)) adjacent |= nb.node == to;
        if (not adjacent) fail(404, "no edge " + from + " -> " + dir->second);
        for (auto &v : all["views"])
            if (v["from"] == from and v["to"] == dir->second) vs.push_back(v);
    } else {
        for (auto &v : all["views"])
            if (v["from"] == from) vs.push_back(v);
        for (auto &q : all["queries"])
            if (q["root"] == from) qs.push_back(q);
    }
    return {200, {{"views", vs}, {"queries", qs}}};
}

Response Service::reassign(const std::string &query, const json &body)
{
    auto &s = *session_;
    if (not s.batch.index_of(query)) fail(404, "unknown query " + query);
    if (not body.contains("node") or not body.at("node").is_string()) fail(400, "body needs {\"node\": name}");
    const auto name = body.at("node").get<std::string>();
    const RelId node = node_param(s.catalog, name);
    ViewSet views = reassign_root(s.plan->views, s.batch, s.tree, query, node);
    s.config.roots[query] = name;
    s.plan = plan_views(std::move(views), s.batch, s.tree, s.catalog);
    s.outcome.reset();
    s.invalidated = true;
    ++generation_;
    return {200, views_json(s.plan->views, s.batch, s.catalog)};
}

Response Service::groups() const
{
    const auto &s = *session_;
    return {200, groups_json(*s.plan, s.batch, s.catalog)};
}

Response Service::group_code(const std::string &id) const
{
    const auto &s = *session_;
    std::size_t g = 0;
    try {
        std::size_t used = 0;
        g = std::stoul(id, &used);
        if (used != id.size()) throw std::invalid_argument(id);
    } catch (const std::exception &) {
        fail(404, "unknown group " + id);
    }
    if (g >= s.plan->plans.size()) fail(404, "unknown group " + id);
    json lines = json::array();
    for (auto &l : render_lines(s.plan->plans[g], s.plan->views, s.batch, s.catalog))
        lines.push_back({{"kind", to_string(l.kind)}, {"text", l.text}});
    return {200, {{"group", g}, {"node", s.catalog.relation(s.plan->dag.groups[g].node).name}, {"lines", lines}}};
}

Response Service::run(const json &body)
{
    auto &s = *session_;
    AppConfig config = s.config;
    if (body.contains("k")) config.k = body.at("k").get<std::size_t>();
    if (body.contains("k_per_dim")) config.k_per_dim = body.at("k_per_dim").get<std::size_t>();
    if (body.contains("lambda")) config.lambda = body.at("lambda").get<double>();
    if (body.contains("max_depth")) config.max_depth = body.at("max_depth").get<std::size_t>();
    s.outcome = run_app(config, s.catalog, options_);
    s.config = config;
    s.invalidated = false;
    ++generation_;
    return {200, {{"model", s.outcome->model}, {"report", s.outcome->report}}};
}

Response Service::assign(const json &body) const
{
    const auto &s = *session_;
    if (s.config.app != AppKind::rkmeans) fail(409, "session application is not rkmeans");
    if (not s.outcome) fail(409, s.invalidated ? "stale: results were invalidated, run again" : "no results yet; POST /run");
    if (not body.contains("point") or not body.at("point").is_array()) fail(400, "body needs {\"point\": [...]}");
    const auto &cj = s.outcome->model.at("centroids");
    const auto &pj = body.at("point");
    const auto d = static_cast<Eigen::Index>(s.config.dimensions.size());
    if (static_cast<Eigen::Index>(pj.size()) != d)
        fail(400, "point has " + std::to_string(pj.size()) + " values, expected " + std::to_string(d));
    Eigen::VectorXd point(d);
    for (Eigen::Index j = 0; j < d; ++j) point(j) = pj.at(static_cast<std::size_t>(j)).get<double>();
    Eigen::MatrixXd centroids(static_cast<Eigen::Index>(cj.size()), d);
    for (std::size_t c = 0; c < cj.size(); ++c)
        for (Eigen::Index j = 0; j < d; ++j)
            centroids(static_cast<Eigen::Index>(c), j) = cj[c][static_cast<std::size_t>(j)].get<double>();
    const std::size_t idx = ml::nearest_centroid(point, centroids);
    return {200, {{"index", idx}, {"centroid", cj[idx]}}};
}

Response Service::metrics() const
{
    const auto &s = *session_;
    if (not s.outcome) fail(409, s.invalidated ? "stale: results were invalidated, run again" : "no results yet; POST /run");
    const auto &m = s.outcome->model;
    json out{{"app", to_string(s.config.app)}};
    if (s.config.app == AppKind::rkmeans) {
        out["relative_size"] = m.at("relative_size");
        out["grid_size"] = m.at("grid_size");
        out["data_size"] = m.at("data_size");
        if (m.contains("gap")) {
            out["gap"] = m.at("gap");
            out["objective"] = m.at("objective");
            out["lloyd_objectives"] = m.at("lloyd_objectives");
            out["lloyd_runs"] = m.at("lloyd_objectives").size();
        }
    } else if (s.config.app == AppKind::linreg) {
        out["objective"] = m.at("objective");
        out["iterations"] = m.at("iterations");
    } else if (s.config.app == AppKind::cart) {
        out["nodes"] = m.at("nodes").size();
    }
    out["queries"] = s.outcome->report.at("queries");
    out["batches"] = s.outcome->report.at("batches");
    return {200, out};
}

void lmfao::serve(Service &service, int port, const std::filesystem::path &static_dir)
{
    httplib::Server server;
    if (not static_dir.empty() and not server.set_mount_point("/ui", static_dir.string()))
        throw Error("cannot serve static files from " + static_dir.string());
    auto forward = [&service](const httplib::Request &req, httplib::Response &res) {
        std::string target = req.path;
        if (not req.params.empty()) {
            std::string q;
            for (auto &[k, v] : req.params) q += (q.empty() ? "" : "&") + k + "=" + httplib::detail::encode_query_param(v);
            target += "?" + q;
        }
        const Response r = service.handle(req.method, target, req.body);
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Get(R"(/(jointree|views|groups|metrics|groups/[^/]+/code))", forward);
    server.Post(R"(/(session|run|rkmeans/assign|queries/[^/]+/root))", forward);
    server.Options(R"(/.*)", [](const httplib::Request &, httplib::Response &res) { res.status = 204; });
    if (not server.listen("0.0.0.0", port)) throw Error("cannot listen on port " + std::to_string(port));
}
