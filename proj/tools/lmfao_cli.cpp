// lmfao command line: load, plan, run, oracle, serve, generate.

#include "lmfao/datagen.hpp"
#include "lmfao/engine.hpp"
#include "lmfao/oracle.hpp"
#include "lmfao/render.hpp"
#include "lmfao/service.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

using namespace lmfao;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_file(const fs::path &path, const std::string &text)
{
    std::ofstream out(path);
    if (not out) throw Error("cannot write " + path.string());
    out << text;
}

Catalog open_catalog(const fs::path &schema)
{
    if (schema.empty()) throw Error("no schema: pass --schema or set \"schema\" in the config");
    Catalog c = Catalog::load_schema(schema);
    register_example_udfs(c);
    c.load_all();
    return c;
}

void print_plan(const BatchPlan &plan, const QueryBatch &batch, const Catalog &catalog)
{
    const auto v = views_json(plan.views, batch, catalog);
    std::cout << "views: " << v["views"].size() << "\n";
    for (auto &view : v["views"]) {
        std::cout << "  " << view["name"].get<std::string>() << "  group by " << view["group_by"].dump() << "  ";
        for (auto &a : view["aggregates"]) std::cout << a.get<std::string>() << " ";
        std::cout << "\n";
    }
    std::cout << "queries: " << v["queries"].size() << "\n";
    for (auto &q : v["queries"])
        std::cout << "  " << q["id"].get<std::string>() << " @ " << q["root"].get<std::string>() << "  "
                  << q["text"].get<std::string>() << "\n";
    std::cout << "groups: " << plan.dag.groups.size() << "\n";
    for (auto &g : plan.dag.groups) {
        auto [na, nb] = register_count(plan.plans[g.id]);
        std::cout << "  group " << g.id << " @ " << catalog.relation(g.node).name << ":";
        for (auto &o : g.outputs) std::cout << " " << output_name(o, plan.views, batch);
        std::cout << "  (" << na << " alpha, " << nb << " beta)\n";
    }
    std::cout << "dependencies:";
    for (auto &[a, b] : plan.dag.edges) std::cout << " " << a << "->" << b;
    std::cout << "\n";
    for (auto &g : plan.dag.groups) {
        std::cout << "\ncode of group " << g.id << " @ " << catalog.relation(g.node).name << "\n";
        std::cout << render_code(plan.plans[g.id], plan.views, batch, catalog);
    }
}

void dump_ir(const fs::path &dir, const BatchPlan &plan, const QueryBatch &batch, const Catalog &catalog)
{
    fs::create_directories(dir);
    for (auto &g : plan.dag.groups) {
        const std::string stem = "group_" + std::to_string(g.id);
        write_file(dir / (stem + ".ir"), dump_plan(plan.plans[g.id], plan.views, batch, catalog));
        write_file(dir / (stem + ".code"), render_code(plan.plans[g.id], plan.views, batch, catalog));
    }
    json doc = views_json(plan.views, batch, catalog);
    doc["dag"] = groups_json(plan, batch, catalog);
    write_file(dir / "plan.json", doc.dump(2));
}

json config_file(const fs::path &schema, json body) { return (body["schema"] = schema.string(), body); }

void write_sample(const std::string &kind, const fs::path &dir, std::uint64_t seed)
{
    fs::create_directories(dir);
    if (kind == "tiny") {
        write_database(tiny_database(), dir);
        write_file(dir / "linreg.json",
                   config_file("schema.json", {{"app", "linreg"}, {"features", {"b"}}, {"label", "c"}, {"lambda", 0.01}})
                       .dump(2));
        write_file(dir / "cart.json", config_file("schema.json", {{"app", "cart"},
                                                                  {"features", {"b"}},
                                                                  {"label", "c"},
                                                                  {"max_depth", 2},
                                                                  {"min_leaf", 1}})
                                          .dump(2));
        write_file(dir / "rkmeans.json",
                   config_file("schema.json", {{"app", "rkmeans"}, {"dimensions", {"b", "c"}}, {"k", 2}, {"seed", seed}})
                       .dump(2));
    } else if (kind == "favorita") {
        FavoritaOptions o;
        o.seed = seed;
        const Catalog c = favorita_database(o);
        write_database(c, dir);
        write_file(dir / "batch.json", format_batch(c, favorita_batch(c)));
        json roots = json::object();
        for (auto &[q, node] : favorita_roots(c)) roots[q] = c.relation(node).name;
        write_file(dir / "favorita.json",
                   config_file("schema.json", {{"app", "batch"}, {"batch", "batch.json"}, {"roots", roots}}).dump(2));
    } else if (kind == "random") {
        const auto inst = random_instance(seed);
        write_database(inst.catalog, dir);
        write_file(dir / "batch.json", format_batch(inst.catalog, inst.batch));
        write_file(dir / "random.json", config_file("schema.json", {{"app", "batch"}, {"batch", "batch.json"}}).dump(2));
    } else {
        throw Error("unknown generator " + kind + " (tiny, favorita, random)");
    }
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"LMFAO: in-database learning over batches of aggregates"};
    app.require_subcommand(1);
    app.fallthrough();
    std::size_t threads = 0;
    std::optional<std::uint64_t> seed;
    std::string dump_dir;
    app.add_option("--threads", threads, "worker threads (0: all cores)");
    app.add_option("--seed", seed, "random seed for Rk-means and generators");
    app.add_option("--dump-ir", dump_dir, "write each group's plan and rendered code to this directory");

    std::string schema_path, config_path, batch_path, out_dir = ".", static_dir, gen_kind, gen_dir;
    int port = 8080;

    auto *load = app.add_subcommand("load", "load a database and print its catalog");
    load->add_option("schema", schema_path, "schema.json")->required();

    auto *plan = app.add_subcommand("plan", "print views, groups and rendered code of an application's first batch");
    plan->add_option("config", config_path, "application config")->required();
    plan->add_option("--schema", schema_path, "overrides the config's schema");

    auto *run = app.add_subcommand("run", "run an application; writes model.json and report.json");
    run->add_option("config", config_path, "application config")->required();
    run->add_option("--schema", schema_path, "overrides the config's schema");
    run->add_option("-o,--out", out_dir, "output directory");

    auto *oracle = app.add_subcommand("oracle", "evaluate a batch over the materialized join");
    oracle->add_option("batch", batch_path, "batch file or batch application config")->required();
    oracle->add_option("--schema", schema_path, "schema.json");

    auto *serve_cmd = app.add_subcommand("serve", "start the HTTP service");
    serve_cmd->add_option("--port", port, "port")->capture_default_str();
    serve_cmd->add_option("--static", static_dir, "directory served under /ui");

    auto *gen = app.add_subcommand("generate", "write a sample database with application configs");
    gen->add_option("kind", gen_kind, "tiny, favorita or random")->required();
    gen->add_option("dir", gen_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    ExecOptions options;
    options.threads = threads;
    try {
        if (*load) {
            const Catalog c = open_catalog(schema_path);
            for (RelId r = 0; r < c.num_relations(); ++r) {
                const auto &def = c.relation(r);
                std::cout << def.name << " (" << c.data(r).size() << " rows):";
                for (auto &a : def.attributes) std::cout << " " << a.name << ":" << to_string(a.kind);
                std::cout << "\n";
            }
            const JoinTree tree = JoinTree::build(c);
            std::cout << "join tree:";
            for (auto &[a, b] : c.schema_edges()) std::cout << " " << a << "-" << b;
            std::cout << "\n";
        } else if (*plan or *run) {
            AppConfig config = load_app_config(config_path);
            if (seed) config.seed = *seed;
            Catalog c = open_catalog(schema_path.empty() ? config.schema : fs::path(schema_path));
            if (*plan or not dump_dir.empty()) {
                const QueryBatch batch = initial_batch(config, c);
                const BatchPlan bp = plan_batch(batch, JoinTree::build(c), c, pinned_roots(config, batch, c));
                if (*plan) print_plan(bp, batch, c);
                if (not dump_dir.empty()) dump_ir(dump_dir, bp, batch, c);
            }
            if (*run) {
                const AppOutcome out = run_app(config, c, options);
                fs::create_directories(out_dir);
                write_file(fs::path(out_dir) / "model.json", out.model.dump(2));
                write_file(fs::path(out_dir) / "report.json", out.report.dump(2));
                std::cout << to_string(config.app) << ": " << out.report["queries"] << " queries in "
                          << out.report["batches"] << " batches, " << out.report["total_ms"].get<double>() << " ms\n";
                std::cout << "wrote " << (fs::path(out_dir) / "model.json").string() << " and report.json\n";
            }
        } else if (*oracle) {
            std::ifstream in(batch_path);
            if (not in) throw Error("cannot read " + batch_path);
            std::stringstream buf;
            buf << in.rdbuf();
            const json doc = json::parse(buf.str(), nullptr, false);
            fs::path schema = schema_path;
            AppConfig config;
            if (doc.is_object() and doc.contains("app")) {
                config = load_app_config(batch_path);
                if (schema.empty()) schema = config.schema;
            } else {
                config = parse_app_config(json{{"app", "batch"}, {"queries", doc.is_object() ? doc.at("queries") : doc}}.dump());
            }
            Catalog c = open_catalog(schema);
            const QueryBatch batch = initial_batch(config, c);
            std::cout << results_json(oracle_evaluate(batch, c, JoinTree::build(c)), c).dump(2) << "\n";
        } else if (*serve_cmd) {
            Service service(options);
            std::cout << "listening on port " << port << std::endl;
            serve(service, port, static_dir);
        } else if (*gen) {
            write_sample(gen_kind, gen_dir, seed.value_or(1));
            std::cout << "wrote " << gen_kind << " database to " << gen_dir << "\n";
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
