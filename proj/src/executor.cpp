#include "lmfao/executor.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <thread>

using namespace lmfao;

const char *lmfao::to_string(Storage storage)
{
    return storage == Storage::sorted ? "sorted-array" : "hash-map";
}

std::size_t KeyHash::operator()(const std::vector<double> &key) const
{
    std::size_t h = 0xcbf29ce484222325ull;
    for (double d : key) h = (h ^ std::hash<double>{}(d)) * 0x100000001b3ull;
    return h;
}

std::size_t lmfao::default_threads()
{
    return std::max(1u, std::thread::hardware_concurrency());
}

/*======================================================================================================================
 * MaterializedView
 *====================================================================================================================*/

MaterializedView::MaterializedView(ViewId id, std::vector<AttrId> columns, std::size_t arity, Storage storage,
                                   std::vector<double> keys, std::vector<double> values)
    : id_(id), columns_(std::move(columns)), arity_(arity), storage_(storage)
{
    const std::size_t nk = columns_.size();
    const std::size_t n = arity_ == 0 ? 0 : values.size() / arity_;
    if (keys.size() != n * nk) throw Error("internal: view key/value arity mismatch");

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(keys.begin() + a * nk, keys.begin() + (a + 1) * nk, keys.begin() + b * nk,
                                            keys.begin() + (b + 1) * nk);
    });
    keys_.reserve(keys.size());
    values_.reserve(values.size());
    for (auto r : perm) {
        keys_.insert(keys_.end(), keys.begin() + r * nk, keys.begin() + (r + 1) * nk);
        values_.insert(values_.end(), values.begin() + r * arity_, values.begin() + (r + 1) * arity_);
    }
    for (std::size_t r = 1; r < n; ++r)
        if (std::equal(keys_.begin() + (r - 1) * nk, keys_.begin() + r * nk, keys_.begin() + r * nk))
            throw Error("internal: duplicate key in view " + std::to_string(id_));
    if (storage_ == Storage::hash) {
        index_.reserve(n);
        for (std::size_t r = 0; r < n; ++r)
            index_.emplace(std::vector<double>(keys_.begin() + r * nk, keys_.begin() + (r + 1) * nk), r);
    }
}

std::optional<std::span<const double>> MaterializedView::find(const std::vector<double> &key) const
{
    if (storage_ == Storage::hash) {
        auto it = index_.find(key);
        if (it == index_.end()) return std::nullopt;
        return values(it->second);
    }
    const std::size_t nk = columns_.size();
    std::size_t lo = 0, hi = size();
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (std::lexicographical_compare(keys_.begin() + mid * nk, keys_.begin() + (mid + 1) * nk, key.begin(), key.end()))
            lo = mid + 1;
        else
            hi = mid;
    }
    if (lo < size() and std::equal(key.begin(), key.end(), keys_.begin() + lo * nk)) return values(lo);
    return std::nullopt;
}

MaterializedView MaterializedView::reordered(const std::vector<AttrId> &columns, Storage storage) const
{
    const std::size_t nk = columns_.size();
    std::vector<std::size_t> src(columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
        auto it = std::find(columns_.begin(), columns_.end(), columns[j]);
        if (it == columns_.end() or columns.size() != nk) throw Error("internal: view reordering is not a permutation");
        src[j] = static_cast<std::size_t>(it - columns_.begin());
    }
    std::vector<double> keys;
    keys.reserve(keys_.size());
    for (std::size_t r = 0; r < size(); ++r)
        for (auto j : src) keys.push_back(keys_[r * nk + j]);
    return MaterializedView(id_, columns, arity_, storage, std::move(keys), values_);
}

/*======================================================================================================================
 * Storage choice
 *====================================================================================================================*/

namespace {

/// Keys of `view` in the level order of `plan`.
std::vector<AttrId> level_ordered(const std::vector<AttrId> &keys, const PlanIR &plan)
{
    std::vector<AttrId> out = keys;
    std::sort(out.begin(), out.end(), [&](AttrId a, AttrId b) { return plan.level_of(a) < plan.level_of(b); });
    return out;
}

bool forced_sorted(const DirectionalView &view, const std::vector<const PlanIR *> &consumers, const JoinTree &tree)
{
    for (auto *p : consumers)
        for (AttrId a : view.group_by)
            if (not tree.contains(p->node, a)) return true;
    return false;
}

} // namespace

Storage lmfao::choose_view_storage(const DirectionalView &view, const std::vector<const PlanIR *> &consumers,
                                   const JoinTree &tree)
{
    if (consumers.empty() or forced_sorted(view, consumers, tree)) return Storage::sorted;
    for (auto *p : consumers)
        for (AttrId a : view.group_by)
            if (p->level_of(a) > view.group_by.size()) return Storage::hash;
    return Storage::sorted;
}

std::vector<ViewLayout> lmfao::choose_layouts(const BatchPlan &plan, const JoinTree &tree,
                                              StorageOverride override_mode)
{
    std::vector<ViewLayout> layouts(plan.views.views.size());
    for (auto &view : plan.views.views) {
        std::vector<const PlanIR *> consumers;
        for (auto &p : plan.plans)
            if (std::binary_search(p.incoming.begin(), p.incoming.end(), view.id)) consumers.push_back(&p);
        auto &l = layouts[view.id];
        l.forced = forced_sorted(view, consumers, tree);
        l.storage = choose_view_storage(view, consumers, tree);
        if (override_mode == StorageOverride::all_sorted) l.storage = Storage::sorted;
        if (override_mode == StorageOverride::all_hash and not l.forced) l.storage = Storage::hash;
        l.columns = consumers.empty() ? view.group_by : level_ordered(view.group_by, *consumers.front());
    }
    return layouts;
}

/*======================================================================================================================
 * Loop-nest interpreter
 *====================================================================================================================*/

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

/// First index in [lo, hi) whose value is >= v (> v when `strict`), by exponential then binary search.
std::size_t gallop(const double *base, std::size_t stride, std::size_t lo, std::size_t hi, double v, bool strict)
{
    auto before = [&](std::size_t i) { return strict ? base[i * stride] <= v : base[i * stride] < v; };
    if (lo >= hi or not before(lo)) return lo;
    std::size_t step = 1, cur = lo; // before(cur) holds
    while (cur + step < hi and before(cur + step)) {
        cur += step;
        step *= 2;
    }
    std::size_t a = cur + 1, b = std::min(cur + step, hi);
    while (a < b) {
        const std::size_t mid = a + (b - a) / 2;
        if (before(mid))
            a = mid + 1;
        else
            b = mid;
    }
    return a;
}

struct COperand
{
    Operand::Kind kind;
    bool beta = false;
    std::size_t index = 0;
    std::size_t level = 0;
    const std::function<double(double)> *fn = nullptr;
};

struct CStatement
{
    Statement::Kind kind = Statement::product;
    std::size_t dst = 0;
    std::size_t view = 0; ///< local view index
    std::size_t slot = 0;
    std::vector<COperand> ops;
    std::size_t out = 0;
    std::size_t out_slot = 0;
    double constant = 1.0;
    std::optional<std::size_t> guard;
};

struct SortedSource
{
    std::size_t view; ///< local index
    std::size_t column;
};

struct Probe
{
    std::size_t view;
    std::vector<std::size_t> key_levels; ///< per view column
};

struct CLevel
{
    bool has_relation = false;
    const double *relation = nullptr; // null for an empty relation
    std::vector<SortedSource> sorted;
    std::vector<Probe> probes;
    std::vector<std::size_t> bound_sorted;
    std::vector<CStatement> enter, exit;
};

struct OutDesc
{
    OutputRef ref;
    std::vector<std::size_t> key_levels; ///< in output key order
    std::size_t arity;
};

struct OutBuf
{
    std::size_t nk = 0, arity = 0;
    std::vector<double> keys, values;
    std::unordered_map<std::vector<double>, std::size_t, KeyHash> index;

    double *row(const std::vector<double> &key)
    {
        auto [it, inserted] = index.try_emplace(key, index.size());
        if (inserted) {
            keys.insert(keys.end(), key.begin(), key.end());
            values.resize(values.size() + arity, 0.0);
        }
        return values.data() + it->second * arity;
    }
};

struct Compiled
{
    std::size_t depth = 0;
    std::size_t witness = 0;
    std::vector<CLevel> levels;
    std::vector<const MaterializedView *> views;
    std::vector<OutDesc> outputs;
    std::size_t alphas = 0, betas = 0;
};

class Runner
{
    const Compiled &c_;
    std::vector<double> alpha_, beta_, bind_;
    std::vector<char> witness_;
    std::vector<std::size_t> rlo_, rhi_;
    std::vector<std::vector<std::size_t>> vlo_, vhi_; ///< [view][level]
    std::vector<const double *> row_;
    std::vector<double> key_;

    public:
    std::vector<OutBuf> outs;
    std::size_t lookups = 0;

    explicit Runner(const Compiled &c) : c_(c)
    {
        alpha_.assign(c.alphas, 0.0);
        beta_.assign(c.betas, 0.0);
        const std::size_t nl = c.levels.size();
        bind_.assign(nl, 0.0);
        witness_.assign(nl, 0);
        rlo_.assign(nl, 0);
        rhi_.assign(nl, 0);
        vlo_.assign(c.views.size(), std::vector<std::size_t>(nl, 0));
        vhi_.assign(c.views.size(), std::vector<std::size_t>(nl, 0));
        row_.assign(c.views.size(), nullptr);
        for (auto &o : c.outputs) {
            OutBuf b;
            b.nk = o.key_levels.size();
            b.arity = o.arity;
            outs.push_back(std::move(b));
        }
    }

    void run(std::size_t lo, std::size_t hi)
    {
        rlo_[0] = lo;
        rhi_[0] = hi;
        for (std::size_t v = 0; v < c_.views.size(); ++v) {
            vlo_[v][0] = 0;
            vhi_[v][0] = c_.views[v]->size();
        }
        witness_[0] = c_.witness == 0;
        exec(c_.levels[0].enter);
        if (c_.depth >= 1) level(1);
        exec(c_.levels[0].exit);
    }

    private:
    double value(const COperand &o) const
    {
        switch (o.kind) {
        case Operand::from_register: return o.beta ? beta_[o.index] : alpha_[o.index];
        case Operand::from_udf: return (*o.fn)(bind_[o.level]);
        case Operand::tuple_count: return static_cast<double>(rhi_[o.level] - rlo_[o.level]);
        }
        return 0.0;
    }

    double product(const std::vector<COperand> &ops) const
    {
        double p = 1.0;
        for (auto &o : ops) p *= value(o);
        return p;
    }

    void exec(const std::vector<CStatement> &stmts)
    {
        for (auto &s : stmts) {
            switch (s.kind) {
            case Statement::lookup:
                alpha_[s.dst] = row_[s.view][s.slot];
                ++lookups;
                break;
            case Statement::product: alpha_[s.dst] = product(s.ops); break;
            case Statement::reset: beta_[s.dst] = 0.0; break;
            case Statement::accumulate: beta_[s.dst] += product(s.ops); break;
            case Statement::write: {
                if (s.guard and not witness_[*s.guard]) break;
                const auto &desc = c_.outputs[s.out];
                key_.resize(desc.key_levels.size());
                for (std::size_t j = 0; j < key_.size(); ++j) key_[j] = bind_[desc.key_levels[j]];
                outs[s.out].row(key_)[s.out_slot] += s.constant * product(s.ops);
                break;
            }
            }
        }
    }

    struct Cursor
    {
        const double *base;
        std::size_t stride;
        std::size_t pos, hi;
        double value() const { return base[pos * stride]; }
    };

    void level(std::size_t l)
    {
        const CLevel &L = c_.levels[l];
        Cursor cur[16];
        std::vector<Cursor> spill;
        const std::size_t n = (L.has_relation ? 1 : 0) + L.sorted.size();
        Cursor *src = n <= 16 ? cur : (spill.resize(n), spill.data());
        std::size_t k = 0;
        if (L.has_relation) src[k++] = {L.relation, 1, rlo_[l - 1], rhi_[l - 1]};
        for (auto &s : L.sorted) {
            const auto *v = c_.views[s.view];
            src[k++] = {v->key_data() + s.column, v->columns().size(), vlo_[s.view][l - 1], vhi_[s.view][l - 1]};
        }
        for (std::size_t i = 0; i < n; ++i)
            if (src[i].pos >= src[i].hi) return;

        while (true) {
            double target = src[0].value();
            for (std::size_t i = 1; i < n; ++i) target = std::max(target, src[i].value());
            bool aligned;
            do {
                aligned = true;
                for (std::size_t i = 0; i < n; ++i) {
                    auto &s = src[i];
                    if (s.value() < target) {
                        s.pos = gallop(s.base, s.stride, s.pos, s.hi, target, false);
                        if (s.pos >= s.hi) return;
                    }
                    if (s.value() > target) {
                        target = s.value();
                        aligned = false;
                    }
                }
            } while (not aligned);

            std::size_t ends[16];
            std::vector<std::size_t> ends_spill;
            std::size_t *end = n <= 16 ? ends : (ends_spill.resize(n), ends_spill.data());
            for (std::size_t i = 0; i < n; ++i) end[i] = gallop(src[i].base, src[i].stride, src[i].pos, src[i].hi, target, true);

            body(l, target, src, end);

            for (std::size_t i = 0; i < n; ++i) {
                src[i].pos = end[i];
                if (src[i].pos >= src[i].hi) return;
            }
        }
    }

    void body(std::size_t l, double v, const Cursor *src, const std::size_t *end)
    {
        const CLevel &L = c_.levels[l];
        bind_[l] = v;
        std::size_t k = 0;
        if (L.has_relation) {
            rlo_[l] = src[0].pos;
            rhi_[l] = end[0];
            ++k;
        } else {
            rlo_[l] = rlo_[l - 1];
            rhi_[l] = rhi_[l - 1];
        }
        for (std::size_t view = 0; view < c_.views.size(); ++view) {
            vlo_[view][l] = vlo_[view][l - 1];
            vhi_[view][l] = vhi_[view][l - 1];
        }
        for (auto &s : L.sorted) {
            vlo_[s.view][l] = src[k].pos;
            vhi_[s.view][l] = end[k];
            ++k;
        }
        for (auto &p : L.probes) {
            key_.resize(p.key_levels.size());
            for (std::size_t j = 0; j < key_.size(); ++j) key_[j] = bind_[p.key_levels[j]];
            auto hit = c_.views[p.view]->find(key_);
            if (not hit) return;
            row_[p.view] = hit->data();
        }
        for (auto view : L.bound_sorted) row_[view] = c_.views[view]->values(vlo_[view][l]).data();

        if (l <= c_.witness) witness_[l] = l == c_.witness;
        exec(L.enter);
        if (l < c_.depth) level(l + 1);
        exec(L.exit);
        if (l <= c_.witness and witness_[l]) witness_[l - 1] = 1;
    }
};

/// Execution state of one group: compiled once, run per chunk, merged at the end.
class GroupExecution
{
    const PlanIR &plan_;
    const PlanContext &ctx_;
    SortedRelation relation_;
    std::vector<std::shared_ptr<const MaterializedView>> local_views_;
    Compiled compiled_;
    std::vector<std::pair<std::size_t, std::size_t>> chunks_;
    std::vector<std::unique_ptr<Runner>> runners_;
    std::vector<double> chunk_ms_;
    Clock::time_point start_;
    double prepare_ms_ = 0;

    public:
    GroupExecution(const PlanIR &plan, const SortedRelation &relation,
                   const std::map<ViewId, std::shared_ptr<const MaterializedView>> &incoming, const PlanContext &ctx,
                   std::size_t chunks)
        : plan_(plan), ctx_(ctx)
    {
        start_ = Clock::now();
        std::vector<std::string> names;
        for (AttrId a : plan.order)
            if (ctx.tree.contains(plan.node, a)) names.push_back(ctx.catalog.attribute(a).name);
        auto current = relation.sort_order_names();
        current.resize(std::min(current.size(), names.size()));
        relation_ = current == names ? relation : resort(relation, names);
        compile(incoming);
        split(chunks);
        runners_.resize(chunks_.size());
        chunk_ms_.assign(chunks_.size(), 0.0);
        prepare_ms_ = ms_since(start_);
    }

    std::size_t chunks() const { return chunks_.size(); }

    void run_chunk(std::size_t i)
    {
        auto t0 = Clock::now();
        runners_[i] = std::make_unique<Runner>(compiled_);
        runners_[i]->run(chunks_[i].first, chunks_[i].second);
        chunk_ms_[i] = ms_since(t0);
    }

    GroupResult finish()
    {
        auto t0 = Clock::now();
        GroupResult result;
        auto &rep = result.report;
        rep.group = plan_.group;
        rep.node = ctx_.tree.name(plan_.node);
        rep.relation_rows = relation_.size();
        rep.chunks = chunks_.size();
        for (auto &[lo, hi] : chunks_) rep.rows_scanned += hi - lo;

        for (std::size_t o = 0; o < compiled_.outputs.size(); ++o) {
            const auto &desc = compiled_.outputs[o];
            OutBuf merged;
            merged.nk = desc.key_levels.size();
            merged.arity = desc.arity;
            std::vector<double> key(merged.nk);
            for (auto &r : runners_) {
                const auto &b = r->outs[o];
                for (std::size_t row = 0; row < b.index.size(); ++row) {
                    std::copy(b.keys.begin() + row * b.nk, b.keys.begin() + (row + 1) * b.nk, key.begin());
                    double *dst = merged.row(key);
                    for (std::size_t j = 0; j < b.arity; ++j) dst[j] += b.values[row * b.arity + j];
                }
            }
            const std::size_t n = merged.index.size();
            rep.outputs.emplace_back(output_name(desc.ref, ctx_.views, ctx_.batch), n);
            if (desc.ref.kind == OutputRef::view) {
                const auto &view = ctx_.views.views[desc.ref.id];
                const auto &layout = ctx_.layouts.at(view.id);
                std::vector<std::size_t> src;
                for (AttrId a : layout.columns)
                    src.push_back(static_cast<std::size_t>(
                        std::find(view.group_by.begin(), view.group_by.end(), a) - view.group_by.begin()));
                std::vector<double> keys;
                keys.reserve(n * src.size());
                for (std::size_t row = 0; row < n; ++row)
                    for (auto j : src) keys.push_back(merged.keys[row * merged.nk + j]);
                result.views.emplace_back(view.id, MaterializedView(view.id, layout.columns, desc.arity, layout.storage,
                                                                    std::move(keys), std::move(merged.values)));
            } else {
                const auto &q = ctx_.batch.queries[desc.ref.id];
                ResultTable t;
                t.keys = q.group_by;
                t.arity = desc.arity;
                for (std::size_t row = 0; row < n; ++row)
                    t.rows.emplace_back(
                        std::vector<double>(merged.keys.begin() + row * merged.nk,
                                            merged.keys.begin() + (row + 1) * merged.nk),
                        std::vector<double>(merged.values.begin() + row * desc.arity,
                                            merged.values.begin() + (row + 1) * desc.arity));
                std::sort(t.rows.begin(), t.rows.end());
                result.queries.emplace(q.id, std::move(t));
            }
        }
        for (auto &r : runners_) rep.lookups += r->lookups;
        double chunk_total = 0;
        for (double m : chunk_ms_) chunk_total += m;
        rep.wall_ms = prepare_ms_ + chunk_total + ms_since(t0);
        return result;
    }

    private:
    void compile(const std::map<ViewId, std::shared_ptr<const MaterializedView>> &incoming)
    {
        auto &c = compiled_;
        c.depth = plan_.depth;
        c.witness = plan_.witness_level;
        c.alphas = plan_.alphas.size();
        c.betas = plan_.betas.size();

        std::map<ViewId, std::size_t> local;
        for (ViewId v : plan_.incoming) {
            auto it = incoming.find(v);
            if (it == incoming.end() or not it->second)
                throw Error("internal: missing incoming view " + ctx_.views.views.at(v).name);
            std::shared_ptr<const MaterializedView> mv = it->second;
            if (mv->arity() != ctx_.views.views[v].aggregates.size())
                throw Error("internal: arity mismatch for view " + ctx_.views.views[v].name);
            if (mv->storage() == Storage::sorted) {
                auto want = level_ordered(ctx_.views.views[v].group_by, plan_);
                if (want != mv->columns())
                    mv = std::make_shared<const MaterializedView>(mv->reordered(want, Storage::sorted));
            }
            local[v] = c.views.size();
            local_views_.push_back(mv);
            c.views.push_back(mv.get());
        }

        for (auto &o : plan_.outputs) {
            OutDesc d{o, {}, 0};
            for (AttrId a : output_keys(o, ctx_.views, ctx_.batch)) d.key_levels.push_back(plan_.level_of(a));
            d.arity = o.kind == OutputRef::view ? ctx_.views.views[o.id].aggregates.size()
                                                : ctx_.batch.queries[o.id].aggregates.size();
            c.outputs.push_back(std::move(d));
        }
        auto out_index = [&](const OutputRef &r) {
            return static_cast<std::size_t>(
                std::find_if(c.outputs.begin(), c.outputs.end(), [&](const OutDesc &d) { return d.ref == r; }) -
                c.outputs.begin());
        };

        auto lower = [&](const std::vector<Statement> &stmts) {
            std::vector<CStatement> out;
            for (auto &s : stmts) {
                CStatement cs;
                cs.kind = s.kind;
                cs.dst = s.dst.index;
                if (s.kind == Statement::lookup) cs.view = local.at(s.view);
                cs.slot = s.slot;
                for (auto &o : s.operands) {
                    COperand co{o.kind};
                    co.beta = o.reg.kind == RegKind::beta;
                    co.index = o.reg.index;
                    co.level = o.level;
                    if (o.kind == Operand::from_udf) co.fn = &ctx_.catalog.udf(o.udf).evaluator;
                    cs.ops.push_back(co);
                }
                if (s.kind == Statement::write) cs.out = out_index(s.output);
                cs.out_slot = s.output_slot;
                cs.constant = s.constant;
                cs.guard = s.guard;
                out.push_back(std::move(cs));
            }
            return out;
        };

        for (auto &lb : plan_.levels) {
            CLevel cl;
            if (lb.attr and lb.relation) {
                auto pos = relation_.def().position(ctx_.catalog.attribute(*lb.attr).name);
                cl.has_relation = true;
                cl.relation = relation_.column(*pos).data();
            }
            if (lb.attr) {
                for (ViewId v : lb.views) {
                    const auto *mv = c.views[local.at(v)];
                    if (mv->storage() != Storage::sorted) continue;
                    auto col = std::find(mv->columns().begin(), mv->columns().end(), *lb.attr) - mv->columns().begin();
                    cl.sorted.push_back({local.at(v), static_cast<std::size_t>(col)});
                }
                for (ViewId v : lb.bound_views) {
                    const auto *mv = c.views[local.at(v)];
                    if (mv->storage() == Storage::sorted) {
                        cl.bound_sorted.push_back(local.at(v));
                    } else {
                        Probe p{local.at(v), {}};
                        for (AttrId a : mv->columns()) p.key_levels.push_back(plan_.level_of(a));
                        cl.probes.push_back(std::move(p));
                    }
                }
            }
            cl.enter = lower(lb.on_enter);
            cl.exit = lower(lb.on_exit);
            if (lb.attr and not cl.has_relation and cl.sorted.empty())
                throw Error("group " + std::to_string(plan_.group) + ": nothing iterates level " +
                            std::to_string(c.levels.size()));
            c.levels.push_back(std::move(cl));
        }
    }

    void split(std::size_t chunks)
    {
        const std::size_t n = relation_.size();
        if (chunks <= 1 or plan_.order.empty() or n == 0) {
            chunks_.emplace_back(0, n);
            return;
        }
        auto runs = relation_.level_bounds(1);
        const std::size_t r = runs.size() - 1;
        const std::size_t p = std::min(chunks, r);
        for (std::size_t i = 0; i < p; ++i) chunks_.emplace_back(runs[i * r / p], runs[(i + 1) * r / p]);
    }
};

/// Runs `count` tasks on up to `threads` threads; the first exception is rethrown.
void run_parallel(std::size_t count, std::size_t threads, const std::function<void(std::size_t)> &task)
{
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) {
            try {
                task(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (not error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t extra = std::min(threads, count) > 0 ? std::min(threads, count) - 1 : 0;
    for (std::size_t t = 0; t < extra; ++t) pool.emplace_back(worker);
    worker();
    for (auto &t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace

GroupResult lmfao::execute_plan(const PlanIR &plan, const SortedRelation &relation,
                                const std::map<ViewId, std::shared_ptr<const MaterializedView>> &incoming,
                                const PlanContext &ctx, std::size_t chunks)
{
    GroupExecution exec(plan, relation, incoming, ctx, chunks);
    for (std::size_t i = 0; i < exec.chunks(); ++i) exec.run_chunk(i);
    return exec.finish();
}

BatchResult lmfao::execute_batch(const BatchPlan &plan, const QueryBatch &batch, const Catalog &catalog,
                                 const JoinTree &tree, const ExecOptions &options)
{
    const auto t0 = Clock::now();
    const std::size_t threads = options.threads == 0 ? default_threads() : options.threads;
    const auto layouts = choose_layouts(plan, tree, options.storage);
    PlanContext ctx{plan.views, batch, catalog, tree, layouts};

    BatchResult out;
    out.views.resize(plan.views.views.size());
    out.report.groups.resize(plan.plans.size());
    out.report.threads = threads;
    out.report.schedule = plan.dag.waves();
    for (auto &l : layouts) out.report.storage.push_back(l.storage);

    for (auto &wave : out.report.schedule) {
        std::vector<std::unique_ptr<GroupExecution>> execs(wave.size());
        run_parallel(wave.size(), threads, [&](std::size_t i) {
            const auto &p = plan.plans[wave[i]];
            std::map<ViewId, std::shared_ptr<const MaterializedView>> incoming;
            for (ViewId v : p.incoming) incoming[v] = out.views[v];
            execs[i] = std::make_unique<GroupExecution>(p, catalog.data(p.node), incoming, ctx, threads);
        });
        std::vector<std::pair<std::size_t, std::size_t>> tasks;
        for (std::size_t i = 0; i < execs.size(); ++i)
            for (std::size_t c = 0; c < execs[i]->chunks(); ++c) tasks.emplace_back(i, c);
        run_parallel(tasks.size(), threads, [&](std::size_t t) { execs[tasks[t].first]->run_chunk(tasks[t].second); });
        std::vector<GroupResult> results(execs.size());
        run_parallel(execs.size(), threads, [&](std::size_t i) { results[i] = execs[i]->finish(); });

        for (std::size_t i = 0; i < results.size(); ++i) {
            for (auto &[id, view] : results[i].views) out.views[id] = std::make_shared<const MaterializedView>(std::move(view));
            for (auto &[id, table] : results[i].queries) out.results[id] = std::move(table);
            out.report.groups[wave[i]] = std::move(results[i].report);
        }
    }
    out.report.total_ms = ms_since(t0);
    return out;
}

BatchResult lmfao::evaluate_batch(const QueryBatch &batch, const Catalog &catalog, const JoinTree &tree,
                                  const ExecOptions &options, const RootAssignment &pinned)
{
    return execute_batch(plan_batch(batch, tree, catalog, pinned), batch, catalog, tree, options);
}
