#include "lmfao/query.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <regex>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

using namespace lmfao;
using json = nlohmann::json;

/*======================================================================================================================
 * JoinTree
 *====================================================================================================================*/

JoinTree JoinTree::build(const Catalog &catalog, const std::vector<std::pair<std::string, std::string>> &edges)
{
    JoinTree tree;
    const std::size_t n = catalog.num_relations();
    if (n == 0) throw Error("join tree: catalog has no relations");
    tree.adjacency_.resize(n);
    for (RelId r = 0; r < n; ++r) {
        const auto &def = catalog.relation(r);
        tree.names_.push_back(def.name);
        std::vector<AttrId> attrs;
        for (auto &a : def.attributes) attrs.push_back(catalog.attribute_id(a.name));
        std::sort(attrs.begin(), attrs.end());
        tree.node_attributes_.push_back(std::move(attrs));
    }

    std::set<std::pair<RelId, RelId>> seen;
    for (auto &[na, nb] : edges) {
        RelId a = catalog.relation_id(na), b = catalog.relation_id(nb);
        if (a == b) throw Error("join tree: self-loop on " + na);
        if (not seen.insert(std::minmax(a, b)).second)
            throw Error("join tree: cycle detected (duplicate edge " + na + "-" + nb + ")");
        Edge e{a, b, {}};
        std::set_intersection(tree.node_attributes_[a].begin(), tree.node_attributes_[a].end(),
                              tree.node_attributes_[b].begin(), tree.node_attributes_[b].end(),
                              std::back_inserter(e.attributes));
        if (e.attributes.empty()) throw Error("join tree: relations " + na + " and " + nb + " share no attribute");
        tree.adjacency_[a].push_back({b, tree.edges_.size()});
        tree.adjacency_[b].push_back({a, tree.edges_.size()});
        tree.edges_.push_back(std::move(e));
    }

    /* Union-find over the edges detects cycles; a forest with n-1 edges is connected. */
    std::vector<RelId> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](RelId x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (auto &e : tree.edges_) {
        RelId ra = find(e.a), rb = find(e.b);
        if (ra == rb) throw Error("join tree: cycle detected through " + tree.names_[e.a] + "-" + tree.names_[e.b]);
        parent[ra] = rb;
    }
    if (tree.edges_.size() != n - 1) throw Error("join tree: relations are disconnected");

    /* Running intersection: the nodes holding an attribute induce a connected subtree. */
    for (AttrId attr = 0; attr < catalog.num_attributes(); ++attr) {
        std::vector<RelId> holders;
        for (RelId r = 0; r < n; ++r)
            if (tree.contains(r, attr)) holders.push_back(r);
        if (holders.size() < 2) continue;
        std::set<RelId> reached{holders.front()};
        std::vector<RelId> stack{holders.front()};
        while (not stack.empty()) {
            RelId u = stack.back();
            stack.pop_back();
            for (auto nb : tree.adjacency_[u])
                if (tree.contains(nb.node, attr) and reached.insert(nb.node).second) stack.push_back(nb.node);
        }
        if (reached.size() != holders.size())
            throw Error("join tree: attribute " + catalog.attribute(attr).name +
                        " violates the running-intersection property");
    }
    return tree;
}

bool JoinTree::contains(RelId node, AttrId attr) const
{
    const auto &attrs = node_attributes_.at(node);
    return std::binary_search(attrs.begin(), attrs.end(), attr);
}

const std::vector<AttrId> &JoinTree::join_attributes(RelId a, RelId b) const
{
    for (auto nb : adjacency_.at(a))
        if (nb.node == b) return edges_[nb.edge].attributes;
    throw Error("join tree: " + names_.at(a) + " and " + names_.at(b) + " are not adjacent");
}

std::vector<RelId> JoinTree::subtree(RelId from, std::optional<RelId> to) const
{
    std::vector<RelId> nodes{from};
    std::vector<std::pair<RelId, std::optional<RelId>>> stack{{from, to}};
    while (not stack.empty()) {
        auto [u, p] = stack.back();
        stack.pop_back();
        for (auto nb : adjacency_[u])
            if (not p or nb.node != *p) {
                nodes.push_back(nb.node);
                stack.emplace_back(nb.node, u);
            }
    }
    std::sort(nodes.begin(), nodes.end());
    return nodes;
}

std::vector<AttrId> JoinTree::subtree_attributes(RelId from, std::optional<RelId> to) const
{
    std::set<AttrId> attrs;
    for (RelId r : subtree(from, to)) attrs.insert(node_attributes_[r].begin(), node_attributes_[r].end());
    return {attrs.begin(), attrs.end()};
}

/*======================================================================================================================
 * Queries
 *====================================================================================================================*/

const Query &QueryBatch::query(const std::string &id) const
{
    if (auto i = index_of(id)) return queries[*i];
    throw Error("unknown query " + id);
}

std::optional<std::size_t> QueryBatch::index_of(const std::string &id) const
{
    for (std::size_t i = 0; i < queries.size(); ++i)
        if (queries[i].id == id) return i;
    return std::nullopt;
}

Query lmfao::canonicalize(const Catalog &catalog, Query query)
{
    if (query.aggregates.empty()) throw Error("query " + query.id + " has no aggregates");
    for (AttrId a : query.group_by)
        if (a >= catalog.num_attributes()) throw Error("query " + query.id + ": unknown group-by attribute");
    std::sort(query.group_by.begin(), query.group_by.end());
    query.group_by.erase(std::unique(query.group_by.begin(), query.group_by.end()), query.group_by.end());
    for (auto &agg : query.aggregates) {
        std::sort(agg.factors.begin(), agg.factors.end());
        for (std::size_t i = 0; i < agg.factors.size(); ++i) {
            if (agg.factors[i].attr >= catalog.num_attributes())
                throw Error("query " + query.id + ": unknown factor attribute");
            if (agg.factors[i].udf >= catalog.num_udfs()) throw Error("query " + query.id + ": unknown UDF");
            if (i > 0 and agg.factors[i].attr == agg.factors[i - 1].attr)
                throw Error("query " + query.id + ": two factors on the same attribute " +
                            catalog.attribute(agg.factors[i].attr).name);
        }
    }
    return query;
}

Query lmfao::define_query(const Catalog &catalog, std::string id, const std::vector<std::string> &group_by,
                          const std::vector<AggregateInput> &aggregates)
{
    Query q;
    q.id = std::move(id);
    if (q.id.empty()) throw Error("query id must not be empty");
    for (auto &name : group_by) {
        auto attr = catalog.find_attribute(name);
        if (not attr) throw Error("query " + q.id + ": unknown attribute " + name);
        q.group_by.push_back(*attr);
    }
    for (auto &input : aggregates) {
        AggregateSpec spec;
        spec.constant = input.constant;
        for (auto &f : input.factors) {
            auto attr = catalog.find_attribute(f.attribute);
            if (not attr) throw Error("query " + q.id + ": unknown attribute " + f.attribute);
            auto udf = catalog.find_udf(f.udf);
            if (not udf) throw Error("query " + q.id + ": unknown UDF " + f.udf);
            spec.factors.push_back({*attr, *udf});
        }
        q.aggregates.push_back(std::move(spec));
    }
    return canonicalize(catalog, std::move(q));
}

void lmfao::add_query(QueryBatch &batch, Query query)
{
    if (batch.index_of(query.id)) throw Error("duplicate query id " + query.id);
    batch.queries.push_back(std::move(query));
}

QueryBatch lmfao::parse_batch(const Catalog &catalog, const std::string &json_text)
{
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error &e) {
        throw Error(std::string("batch parse error: ") + e.what());
    }
    if (doc.is_object() and doc.contains("queries")) doc = doc["queries"];
    if (not doc.is_array()) throw Error("batch must be a JSON list of queries");
    QueryBatch batch;
    try {
        for (auto &q : doc) {
            std::vector<std::string> group_by = q.value("group_by", std::vector<std::string>{});
            std::vector<AggregateInput> aggs;
            for (auto &agg : q.at("aggregates")) {
                AggregateInput input;
                const json *factors = &agg;
                if (agg.is_object()) {
                    input.constant = agg.value("constant", 1.0);
                    factors = &agg.at("factors");
                }
                for (auto &f : *factors) {
                    if (f.is_string())
                        input.factors.push_back({f.get<std::string>(), "identity"});
                    else if (f.size() == 1)
                        input.factors.push_back({f[0].get<std::string>(), "identity"});
                    else
                        input.factors.push_back({f[0].get<std::string>(), f[1].get<std::string>()});
                }
                aggs.push_back(std::move(input));
            }
            add_query(batch, define_query(catalog, q.at("id").get<std::string>(), group_by, aggs));
        }
    } catch (const json::exception &e) {
        throw Error(std::string("batch error: ") + e.what());
    }
    return batch;
}

QueryBatch lmfao::load_batch(const Catalog &catalog, const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (not in) throw Error("cannot read batch file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_batch(catalog, buf.str());
}

std::string lmfao::format_batch(const Catalog &catalog, const QueryBatch &batch)
{
    json out = json::array();
    for (auto &q : batch.queries) {
        json group_by = json::array(), aggs = json::array();
        for (AttrId a : q.group_by) group_by.push_back(catalog.attribute(a).name);
        for (auto &agg : q.aggregates) {
            json factors = json::array();
            for (auto &f : agg.factors) factors.push_back({catalog.attribute(f.attr).name, catalog.udf(f.udf).name});
            if (agg.constant == 1.0)
                aggs.push_back(factors);
            else
                aggs.push_back({{"constant", agg.constant}, {"factors", factors}});
        }
        out.push_back({{"id", q.id}, {"group_by", group_by}, {"aggregates", aggs}});
    }
    return out.dump(1);
}

void lmfao::register_batch_indicators(Catalog &catalog, const std::string &json_text)
{
    static const std::regex cond(R"(\s*x\s*(<=|>=|!=|=)\s*(\S+)\s*)");
    std::function<void(const json &)> walk = [&](const json &j) {
        if (j.is_structured()) {
            for (auto &e : j) walk(e);
            return;
        }
        if (not j.is_string()) return;
        const auto &s = j.get_ref<const std::string &>();
        if (s.size() < 2 or s.front() != '[' or s.back() != ']' or catalog.find_udf(s)) return;
        std::vector<std::pair<CmpOp, double>> conditions;
        const std::string body = s.substr(1, s.size() - 2);
        std::size_t start = 0;
        while (start <= body.size()) {
            auto end = body.find('&', start);
            if (end == std::string::npos) end = body.size();
            std::smatch m;
            const std::string part = body.substr(start, end - start);
            if (not std::regex_match(part, m, cond)) throw Error("bad indicator UDF " + s);
            const std::string op = m[1];
            const CmpOp cmp = op == "<=" ? CmpOp::le : op == ">=" ? CmpOp::ge : op == "=" ? CmpOp::eq : CmpOp::ne;
            try {
                conditions.emplace_back(cmp, std::stod(m[2].str()));
            } catch (const std::exception &) {
                throw Error("bad indicator threshold in " + s);
            }
            start = end + 1;
        }
        if (catalog.udf(catalog.indicator_conjunction(conditions)).name != s)
            throw Error("indicator UDF " + s + " is not in canonical form");
    };
    try {
        walk(json::parse(json_text));
    } catch (const json::parse_error &e) {
        throw Error(std::string("batch parse error: ") + e.what());
    }
}

std::string lmfao::describe(const Catalog &catalog, const AggregateSpec &spec)
{
    std::string s = "SUM(";
    if (spec.constant != 1.0 or spec.factors.empty()) s += format_number(spec.constant);
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        if (i > 0 or spec.constant != 1.0) s += "*";
        const auto &f = spec.factors[i];
        const auto &udf = catalog.udf(f.udf).name;
        const auto &attr = catalog.attribute(f.attr).name;
        s += udf == "identity" ? attr : udf + "(" + attr + ")";
    }
    return s + ")";
}

std::string lmfao::describe(const Catalog &catalog, const Query &query)
{
    std::string s = query.id + " = SELECT ";
    for (AttrId a : query.group_by) s += catalog.attribute(a).name + ", ";
    for (std::size_t i = 0; i < query.aggregates.size(); ++i) s += (i ? ", " : "") + describe(catalog, query.aggregates[i]);
    s += " FROM D";
    if (not query.group_by.empty()) {
        s += " GROUP BY ";
        for (std::size_t i = 0; i < query.group_by.size(); ++i)
            s += (i ? ", " : "") + catalog.attribute(query.group_by[i]).name;
    }
    return s;
}

std::optional<std::string> lmfao::compare_results(const QueryResults &expected, const QueryResults &actual,
                                                  double rel_tol)
{
    auto key_str = [](const std::vector<double> &k) {
        std::string s = "(";
        for (std::size_t i = 0; i < k.size(); ++i) s += (i ? "," : "") + format_number(k[i]);
        return s + ")";
    };
    for (auto &[id, exp] : expected) {
        auto it = actual.find(id);
        if (it == actual.end()) return "missing result for query " + id;
        const auto &act = it->second;
        if (exp.rows.size() != act.rows.size())
            return "query " + id + ": " + std::to_string(exp.rows.size()) + " expected rows, got " +
                   std::to_string(act.rows.size());
        for (std::size_t r = 0; r < exp.rows.size(); ++r) {
            const auto &[ek, ev] = exp.rows[r];
            const auto &[ak, av] = act.rows[r];
            if (ek != ak) return "query " + id + ": key mismatch " + key_str(ek) + " vs " + key_str(ak);
            if (ev.size() != av.size()) return "query " + id + ": arity mismatch";
            for (std::size_t j = 0; j < ev.size(); ++j) {
                double scale = std::max({1.0, std::fabs(ev[j]), std::fabs(av[j])});
                if (std::fabs(ev[j] - av[j]) > rel_tol * scale or std::isnan(av[j]))
                    return "query " + id + " key " + key_str(ek) + " aggregate " + std::to_string(j) + ": expected " +
                           format_number(ev[j]) + ", got " + format_number(av[j]);
            }
        }
    }
    if (expected.size() != actual.size()) return "result sets differ in size";
    return std::nullopt;
}
