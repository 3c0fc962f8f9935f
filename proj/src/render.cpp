#include "lmfao/render.hpp"

#include <sstream>

using namespace lmfao;

const char *lmfao::to_string(Fragment kind)
{
    switch (kind) {
    case Fragment::join_iteration: return "join-iteration";
    case Fragment::view_lookup: return "view-lookup";
    case Fragment::local_assign: return "local-assign";
    case Fragment::running_sum: return "running-sum";
    case Fragment::output_write: return "output-write";
    }
    return "?";
}

namespace {

struct Printer
{
    const PlanIR &plan;
    const ViewSet &views;
    const QueryBatch &batch;
    const Catalog &catalog;
    std::vector<CodeLine> lines;

    std::string attr(std::size_t level) const { return catalog.attribute(plan.order.at(level - 1)).name; }

    std::string reg(const RegRef &r) const
    {
        return r.kind == RegKind::alpha ? "α" + std::to_string(r.index + 1) : "β" + std::to_string(r.index);
    }

    std::string count(std::size_t level) const
    {
        std::string bound;
        for (std::size_t l = 1; l <= level; ++l) {
            if (not plan.levels[l].relation) continue;
            if (not bound.empty()) bound += ",";
            bound += attr(l);
        }
        const auto &rel = catalog.relation(plan.node).name;
        return bound.empty() ? "|" + rel + "|" : "|σ_{" + bound + "} " + rel + "|";
    }

    std::string operand(const Operand &o) const
    {
        switch (o.kind) {
        case Operand::from_register: return reg(o.reg);
        case Operand::tuple_count: return count(o.level);
        case Operand::from_udf: {
            const auto &name = catalog.udf(o.udf).name;
            const auto &a = catalog.attribute(o.attr).name;
            if (name == "identity") return a;
            if (name.starts_with("[x ")) {
                std::string out;
                for (std::size_t i = 0; i < name.size(); ++i)
                    out += name[i] == 'x' and (i == 1 or name.compare(i - 2, 2, "& ") == 0) ? a : std::string(1, name[i]);
                return out;
            }
            return name + "(" + a + ")";
        }
        }
        return "?";
    }

    std::string product(const std::vector<Operand> &ops, double constant = 1.0) const
    {
        std::string s;
        if (constant != 1.0 or ops.empty()) s = format_number(constant);
        for (auto &o : ops) s += (s.empty() ? "" : " · ") + operand(o);
        return s;
    }

    std::string target(const Statement &s) const
    {
        const auto &keys = output_keys(s.output, views, batch);
        std::string t = output_name(s.output, views, batch);
        if (not keys.empty()) {
            t += "(";
            for (std::size_t i = 0; i < keys.size(); ++i) t += (i ? "," : "") + catalog.attribute(keys[i]).name;
            t += ")";
        }
        const std::size_t arity = s.output.kind == OutputRef::view ? views.views[s.output.id].aggregates.size()
                                                                   : batch.queries[s.output.id].aggregates.size();
        if (arity > 1) t += "[" + std::to_string(s.output_slot) + "]";
        return t;
    }

    void emit(Fragment kind, std::size_t indent, std::string text)
    {
        lines.push_back({kind, std::string(2 * indent, ' ') + std::move(text)});
    }

    void statement(const Statement &s, std::size_t indent)
    {
        switch (s.kind) {
        case Statement::lookup: {
            const auto &v = views.views[s.view];
            std::string keys;
            for (AttrId a : v.group_by) keys += (keys.empty() ? "" : ",") + catalog.attribute(a).name;
            std::string text = reg(s.dst) + " = " + v.name + "(" + keys + ")";
            if (v.aggregates.size() > 1) text += "[" + std::to_string(s.slot) + "]";
            emit(Fragment::view_lookup, indent, text + ";");
            break;
        }
        case Statement::product: emit(Fragment::local_assign, indent, reg(s.dst) + " = " + product(s.operands) + ";"); break;
        case Statement::reset: emit(Fragment::running_sum, indent, reg(s.dst) + " = 0;"); break;
        case Statement::accumulate:
            emit(Fragment::running_sum, indent, reg(s.dst) + " += " + product(s.operands) + ";");
            break;
        case Statement::write: {
            const auto t = target(s);
            const auto x = product(s.operands, s.constant);
            std::string text = s.upsert ? "if " + t + " then " + t + " += " + x + " else " + t + " = " + x + ";"
                                        : t + " = " + x + ";";
            if (s.guard) text = "if joined(" + attr(*s.guard) + ") then " + text;
            emit(Fragment::output_write, indent, text);
            break;
        }
        }
    }

    void level(std::size_t l)
    {
        const auto &lb = plan.levels[l];
        std::size_t indent = l;
        if (l > 0) {
            std::string sources;
            if (lb.relation) {
                std::string sel;
                for (std::size_t k = 1; k < l; ++k)
                    if (plan.levels[k].relation) sel += (sel.empty() ? "" : ",") + attr(k);
                const auto &rel = catalog.relation(plan.node).name;
                sources = sel.empty() ? rel : "σ_{" + sel + "} " + rel;
            }
            for (ViewId v : lb.views) sources += (sources.empty() ? "" : " ⋈ ") + views.views[v].name;
            emit(Fragment::join_iteration, l - 1, "foreach " + attr(l) + " ∈ π_" + attr(l) + "(" + sources + ")");
        }
        for (auto &s : lb.on_enter) statement(s, indent);
        if (l < plan.depth) level(l + 1);
        for (auto &s : lb.on_exit) statement(s, indent);
    }
};

} // namespace

std::vector<CodeLine> lmfao::render_lines(const PlanIR &plan, const ViewSet &views, const QueryBatch &batch,
                                          const Catalog &catalog)
{
    Printer p{plan, views, batch, catalog, {}};
    p.level(0);
    return std::move(p.lines);
}

std::string lmfao::render_code(const PlanIR &plan, const ViewSet &views, const QueryBatch &batch,
                               const Catalog &catalog)
{
    std::string out;
    for (auto &line : render_lines(plan, views, batch, catalog))
        out += std::string(to_string(line.kind)) + "\t" + line.text + "\n";
    return out;
}

std::string lmfao::dump_plan(const PlanIR &plan, const ViewSet &views, const QueryBatch &batch,
                             const Catalog &catalog)
{
    std::ostringstream os;
    os << "group " << plan.group << " at " << catalog.relation(plan.node).name << "\n";
    os << "order";
    for (AttrId a : plan.order) os << " " << catalog.attribute(a).name;
    os << "\noutputs";
    for (auto &o : plan.outputs) os << " " << output_name(o, views, batch);
    os << "\nincoming";
    for (ViewId v : plan.incoming) os << " " << views.views[v].name;
    auto [na, nb] = register_count(plan);
    os << "\nregisters alpha " << na << " beta " << nb << "\ndepth " << plan.depth << " witness " << plan.witness_level
       << "\n";
    for (auto &line : render_lines(plan, views, batch, catalog)) os << line.text << "\n";
    return os.str();
}
