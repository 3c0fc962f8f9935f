#include "lmfao/catalog.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

using namespace lmfao;
using json = nlohmann::json;

const char *lmfao::to_string(AttrKind kind) { return kind == AttrKind::continuous ? "continuous" : "categorical"; }

const char *lmfao::to_string(PhysicalType type)
{
    switch (type) {
        case PhysicalType::int64: return "int64";
        case PhysicalType::float64: return "float64";
        case PhysicalType::string: return "string";
    }
    return "?";
}

const char *lmfao::to_string(CmpOp op)
{
    switch (op) {
        case CmpOp::le: return "<=";
        case CmpOp::ge: return ">=";
        case CmpOp::eq: return "=";
        case CmpOp::ne: return "!=";
    }
    return "?";
}

bool lmfao::apply(CmpOp op, double lhs, double rhs)
{
    switch (op) {
        case CmpOp::le: return lhs <= rhs;
        case CmpOp::ge: return lhs >= rhs;
        case CmpOp::eq: return lhs == rhs;
        case CmpOp::ne: return lhs != rhs;
    }
    return false;
}

std::string lmfao::format_number(double value)
{
    if (std::isfinite(value) and value == std::floor(value) and std::fabs(value) < 1e15) {
        std::ostringstream os;
        os << static_cast<long long>(value);
        return os.str();
    }
    std::ostringstream os;
    os.precision(17);
    os << value;
    return os.str();
}

std::optional<std::size_t> RelationDef::position(const std::string &name) const
{
    for (std::size_t i = 0; i < attributes.size(); ++i)
        if (attributes[i].name == name) return i;
    return std::nullopt;
}

/*======================================================================================================================
 * Dictionary
 *====================================================================================================================*/

std::size_t Dictionary::encode(const std::string &value)
{
    auto [it, inserted] = codes_.try_emplace(value, values_.size());
    if (inserted) values_.push_back(value);
    return it->second;
}

std::optional<std::size_t> Dictionary::find(const std::string &value) const
{
    if (auto it = codes_.find(value); it != codes_.end()) return it->second;
    return std::nullopt;
}

const std::string &Dictionary::decode(std::size_t code) const
{
    if (code >= values_.size()) throw Error("dictionary code " + std::to_string(code) + " out of range");
    return values_[code];
}

/*======================================================================================================================
 * SortedRelation
 *====================================================================================================================*/

SortedRelation::SortedRelation(RelationDef def, std::vector<std::vector<double>> columns, std::vector<std::size_t> order)
    : def_(std::move(def))
    , columns_(std::move(columns))
{
    if (columns_.size() != def_.attributes.size())
        throw Error("relation " + def_.name + ": column count does not match attribute count");
    for (auto &c : columns_)
        if (c.size() != columns_.front().size()) throw Error("relation " + def_.name + ": ragged columns");

    std::vector<bool> seen(def_.attributes.size(), false);
    for (auto p : order) {
        if (p >= seen.size() or seen[p]) throw Error("relation " + def_.name + ": invalid sort order");
        seen[p] = true;
        order_.push_back(p);
    }
    for (std::size_t p = 0; p < seen.size(); ++p)
        if (not seen[p]) order_.push_back(p);
    sort_and_index();
}

void SortedRelation::sort_and_index()
{
    const std::size_t n = size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [this](std::size_t a, std::size_t b) {
        for (auto p : order_) {
            double x = columns_[p][a], y = columns_[p][b];
            if (x < y) return true;
            if (y < x) return false;
        }
        return false;
    });
    for (auto &c : columns_) {
        std::vector<double> sorted(n);
        for (std::size_t i = 0; i < n; ++i) sorted[i] = c[perm[i]];
        c = std::move(sorted);
    }

    /* Runs at level l refine runs at level l-1: a new run starts where the l-th key changes. */
    levels_.clear();
    levels_.push_back(n == 0 ? std::vector<std::size_t>{0} : std::vector<std::size_t>{0, n});
    std::vector<bool> boundary(n, false);
    if (n > 0) boundary[0] = true;
    for (auto p : order_) {
        const auto &col = columns_[p];
        for (std::size_t i = 1; i < n; ++i)
            if (col[i] != col[i - 1]) boundary[i] = true;
        std::vector<std::size_t> bounds;
        for (std::size_t i = 0; i < n; ++i)
            if (boundary[i]) bounds.push_back(i);
        bounds.push_back(n);
        levels_.push_back(std::move(bounds));
    }
}

std::span<const double> SortedRelation::column(const std::string &attribute) const
{
    auto pos = def_.position(attribute);
    if (not pos) throw Error("relation " + def_.name + " has no attribute " + attribute);
    return columns_[*pos];
}

std::vector<std::string> SortedRelation::sort_order_names() const
{
    std::vector<std::string> names;
    for (auto p : order_) names.push_back(def_.attributes[p].name);
    return names;
}

SortedRelation lmfao::resort(const SortedRelation &relation, std::span<const std::string> order)
{
    std::vector<std::size_t> positions;
    for (auto &name : order) {
        auto pos = relation.def().position(name);
        if (not pos) throw Error("resort: relation " + relation.name() + " has no attribute " + name);
        positions.push_back(*pos);
    }
    std::vector<std::vector<double>> columns;
    for (std::size_t p = 0; p < relation.arity(); ++p) {
        auto c = relation.column(p);
        columns.emplace_back(c.begin(), c.end());
    }
    return SortedRelation(relation.def(), std::move(columns), std::move(positions));
}

/*======================================================================================================================
 * Catalog
 *====================================================================================================================*/

Catalog::Catalog()
{
    register_udf({"identity", [](double x) { return x; }, "x"});
    register_udf({"one", [](double) { return 1.0; }, "1"});
    register_udf({"square", [](double x) { return x * x; }, "x^2"});
    register_udf({"indicator", [](double x) { return x != 0.0 ? 1.0 : 0.0; }, "[x != 0]"});
}

namespace {

std::size_t line_of_offset(const std::string &text, std::size_t offset)
{
    offset = std::min(offset, text.size());
    return 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n');
}

AttrKind parse_kind(const std::string &s)
{
    if (s == "continuous") return AttrKind::continuous;
    if (s == "categorical") return AttrKind::categorical;
    throw Error("unknown attribute kind '" + s + "'");
}

PhysicalType parse_physical(const std::string &s)
{
    if (s == "int64" or s == "int") return PhysicalType::int64;
    if (s == "float64" or s == "double" or s == "float") return PhysicalType::float64;
    if (s == "string") return PhysicalType::string;
    throw Error("unknown physical type '" + s + "'");
}

} // namespace

Catalog Catalog::load_schema(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (not in) throw Error("cannot read schema file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_schema(buf.str(), path.parent_path());
}

Catalog Catalog::parse_schema(const std::string &text, const std::filesystem::path &base_dir)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error &e) {
        throw Error("schema parse error at line " + std::to_string(line_of_offset(text, e.byte)) + ": " + e.what());
    }

    Catalog catalog;
    try {
        for (auto &rel : doc.at("relations")) {
            RelationDef def;
            def.name = rel.at("name").get<std::string>();
            for (auto &attr : rel.at("attributes")) {
                AttributeDef a;
                a.name = attr.at("name").get<std::string>();
                a.kind = parse_kind(attr.value("kind", "continuous"));
                a.physical = parse_physical(attr.value("physical", "int64"));
                def.attributes.push_back(std::move(a));
            }
            if (rel.contains("file")) {
                std::filesystem::path file = rel.at("file").get<std::string>();
                def.source = file.is_absolute() or base_dir.empty() ? file : base_dir / file;
            }
            catalog.add_relation(std::move(def));
        }
        if (doc.contains("jointree"))
            for (auto &edge : doc.at("jointree").at("edges")) {
                if (edge.size() != 2) throw Error("join tree edge must name exactly two relations");
                catalog.add_edge(edge[0].get<std::string>(), edge[1].get<std::string>());
            }
    } catch (const json::exception &e) {
        throw Error(std::string("schema error: ") + e.what());
    }
    return catalog;
}

RelId Catalog::add_relation(RelationDef def)
{
    if (def.attributes.empty()) throw Error("relation " + def.name + " has no attributes");
    if (relation_ids_.contains(def.name)) throw Error("duplicate relation " + def.name);
    std::set<std::string> names;
    for (auto &a : def.attributes)
        if (not names.insert(a.name).second) throw Error("duplicate attribute " + a.name + " in relation " + def.name);

    const RelId id = static_cast<RelId>(relations_.size());
    for (auto &a : def.attributes) {
        auto [it, inserted] = attribute_ids_.try_emplace(a.name, static_cast<AttrId>(attributes_.size()));
        if (inserted) {
            attributes_.push_back({a.name, a.kind, a.physical, {}});
            if (a.kind == AttrKind::categorical) dictionaries_[it->second];
        } else {
            auto &info = attributes_[it->second];
            if (info.kind != a.kind or info.physical != a.physical)
                throw Error("attribute " + a.name + " declared with conflicting types");
        }
        attributes_[it->second].relations.push_back(id);
    }
    relation_ids_.emplace(def.name, id);
    relations_.push_back(std::move(def));
    data_.resize(relations_.size());
    return id;
}

const SortedRelation &Catalog::set_data(RelId id, std::vector<std::vector<double>> columns)
{
    return store(id, SortedRelation(relation(id), std::move(columns)));
}

RelId Catalog::add_relation(RelationDef def, std::vector<std::vector<double>> columns)
{
    const RelId id = add_relation(def);
    store(id, SortedRelation(std::move(def), std::move(columns)));
    return id;
}

namespace {

std::vector<std::string> split_csv_line(const std::string &line)
{
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' and i + 1 < line.size() and line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else {
            cell += c;
        }
    }
    cells.push_back(std::move(cell));
    return cells;
}

std::optional<double> parse_double(const std::string &s)
{
    if (s.empty()) return std::nullopt;
    char *end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() or not std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<double> parse_int(const std::string &s)
{
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() or ptr != s.data() + s.size()) return std::nullopt;
    return static_cast<double>(v);
}

} // namespace

const SortedRelation &Catalog::load_relation(const std::string &name)
{
    const RelId id = relation_id(name);
    const RelationDef &def = relations_[id];
    std::ifstream in(def.source);
    if (def.source.empty() or not in) throw Error("cannot read data file for relation " + name + ": " + def.source.string());

    std::string line;
    if (not std::getline(in, line)) throw Error("relation " + name + ": missing CSV header");
    if (not line.empty() and line.back() == '\r') line.pop_back();
    auto header = split_csv_line(line);
    if (header.size() != def.attributes.size())
        throw Error("relation " + name + ": header has " + std::to_string(header.size()) + " columns, expected " +
                    std::to_string(def.attributes.size()));
    std::vector<std::size_t> column_to_attr(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        auto pos = def.position(header[c]);
        if (not pos) throw Error("relation " + name + ": unknown CSV column '" + header[c] + "'");
        column_to_attr[c] = *pos;
    }

    std::vector<std::vector<double>> columns(def.attributes.size());
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (not line.empty() and line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw Error("relation " + name + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                        " cells, expected " + std::to_string(header.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto &attr = def.attributes[column_to_attr[c]];
            const AttrId aid = attribute_ids_.at(attr.name);
            const std::string &cell = cells[c];
            auto fail = [&] {
                return Error("relation " + name + ": cannot parse row " + std::to_string(row) + ", column " +
                             std::to_string(c + 1) + " ('" + attr.name + "'): '" + cell + "'");
            };
            if (cell.empty()) throw fail();
            double value;
            if (attr.kind == AttrKind::categorical) {
                if (attr.physical == PhysicalType::int64 and not parse_int(cell)) throw fail();
                if (attr.physical == PhysicalType::float64 and not parse_double(cell)) throw fail();
                value = static_cast<double>(dictionaries_.at(aid).encode(cell));
            } else {
                auto parsed = attr.physical == PhysicalType::int64 ? parse_int(cell) : parse_double(cell);
                if (not parsed) throw fail();
                value = *parsed;
            }
            columns[column_to_attr[c]].push_back(value);
        }
    }
    return store(id, SortedRelation(def, std::move(columns)));
}

const SortedRelation &Catalog::store(RelId id, SortedRelation relation)
{
    const auto &def = relations_[id];
    for (std::size_t p = 0; p < def.attributes.size(); ++p) {
        DomainStats st;
        auto col = relation.column(p);
        st.tuple_count = col.size();
        std::vector<double> values(col.begin(), col.end());
        std::sort(values.begin(), values.end());
        st.distinct_count = static_cast<std::size_t>(std::unique(values.begin(), values.end()) - values.begin());
        if (def.attributes[p].kind == AttrKind::continuous and not values.empty()) {
            st.min = values.front();
            st.max = values.back();
        }
        stats_[{id, attribute_ids_.at(def.attributes[p].name)}] = st;
    }
    data_[id] = std::make_shared<const SortedRelation>(std::move(relation));
    return *data_[id];
}

void Catalog::load_all()
{
    for (auto &def : relations_)
        if (not loaded(relation_id(def.name))) load_relation(def.name);
}

RelId Catalog::relation_id(const std::string &name) const
{
    if (auto id = find_relation(name)) return *id;
    throw Error("unknown relation " + name);
}

std::optional<RelId> Catalog::find_relation(const std::string &name) const
{
    if (auto it = relation_ids_.find(name); it != relation_ids_.end()) return it->second;
    return std::nullopt;
}

const SortedRelation &Catalog::data(RelId id) const
{
    if (not loaded(id)) throw Error("relation " + relations_.at(id).name + " is not loaded");
    return *data_[id];
}

AttrId Catalog::attribute_id(const std::string &name) const
{
    if (auto id = find_attribute(name)) return *id;
    throw Error("unknown attribute " + name);
}

std::optional<AttrId> Catalog::find_attribute(const std::string &name) const
{
    if (auto it = attribute_ids_.find(name); it != attribute_ids_.end()) return it->second;
    return std::nullopt;
}

const Dictionary *Catalog::dictionary(AttrId id) const
{
    auto it = dictionaries_.find(id);
    return it == dictionaries_.end() ? nullptr : &it->second;
}

double Catalog::encode(AttrId id, const std::string &value)
{
    auto it = dictionaries_.find(id);
    if (it == dictionaries_.end()) throw Error("attribute " + attribute(id).name + " is not categorical");
    return static_cast<double>(it->second.encode(value));
}

const DomainStats &Catalog::stats(RelId rel, AttrId attr) const
{
    auto it = stats_.find({rel, attr});
    if (it == stats_.end())
        throw Error("no statistics for " + relations_.at(rel).name + "." + attributes_.at(attr).name);
    return it->second;
}

std::size_t Catalog::domain_size(AttrId attr) const
{
    std::size_t best = 0;
    for (RelId r : attributes_.at(attr).relations)
        if (auto it = stats_.find({r, attr}); it != stats_.end()) best = std::max(best, it->second.distinct_count);
    return best;
}

UdfId Catalog::register_udf(UdfDef def)
{
    if (def.name.empty()) throw Error("UDF name must not be empty");
    if (not def.evaluator) throw Error("UDF " + def.name + " has no evaluator");
    if (udf_ids_.contains(def.name)) throw Error("duplicate UDF " + def.name);
    const UdfId id = static_cast<UdfId>(udfs_.size());
    udf_ids_.emplace(def.name, id);
    udfs_.push_back(std::move(def));
    return id;
}

std::optional<UdfId> Catalog::find_udf(const std::string &name) const
{
    if (auto it = udf_ids_.find(name); it != udf_ids_.end()) return it->second;
    return std::nullopt;
}

UdfId Catalog::udf_id(const std::string &name) const
{
    if (auto id = find_udf(name)) return *id;
    throw Error("unknown UDF " + name);
}

UdfId Catalog::indicator(CmpOp op, double threshold) { return indicator_conjunction({{op, threshold}}); }

UdfId Catalog::indicator_conjunction(const std::vector<std::pair<CmpOp, double>> &conditions)
{
    std::string name = "[";
    for (std::size_t i = 0; i < conditions.size(); ++i) {
        if (i) name += " & ";
        name += std::string("x ") + to_string(conditions[i].first) + " " + format_number(conditions[i].second);
    }
    name += "]";
    if (auto id = find_udf(name)) return *id;
    return register_udf({name,
                         [conditions](double x) {
                             for (auto &[op, t] : conditions)
                                 if (not apply(op, x, t)) return 0.0;
                             return 1.0;
                         },
                         "indicator " + name});
}

std::string Catalog::format_value(AttrId attr, double value) const
{
    if (auto *dict = dictionary(attr); dict and value >= 0 and static_cast<std::size_t>(value) < dict->size())
        return dict->decode(static_cast<std::size_t>(value));
    return format_number(value);
}
