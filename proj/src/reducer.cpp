#include "walt/reducer.hpp"

namespace walt {

const char* redex_kind_name(RedexKind k) {
    switch (k) {
        case RedexKind::Erase: return "erase";
        case RedexKind::LinearValue: return "linear-value";
        case RedexKind::SharedValue: return "shared-value";
    }
    return "?";
}

const char* strategy_name(Strategy s) {
    return s == Strategy::LeftmostOutermost ? "leftmost-outermost" : "rightmost-innermost";
}

std::optional<Strategy> parse_strategy(const std::string& s) {
    if (s == "leftmost-outermost" || s == "lo") return Strategy::LeftmostOutermost;
    if (s == "rightmost-innermost" || s == "ri") return Strategy::RightmostInnermost;
    return std::nullopt;
}

std::optional<RedexKind> classify_redex(const Term& t) {
    if (!t->is_app() || !t->left->is_abs()) return std::nullopt;
    unsigned k = t->left->left->uses_of(0);
    if (k == 0) return RedexKind::Erase;
    if (!t->right->is_value()) return std::nullopt;
    if (k == 1) return RedexKind::LinearValue;
    if (t->right->fv_count() <= 1) return RedexKind::SharedValue;
    return std::nullopt;
}

namespace {

void collect(const Term& t, std::vector<std::uint8_t>& path, std::vector<Redex>& out) {
    if (!t->has_redex) return;
    if (auto k = classify_redex(t)) out.push_back({path, *k});
    if (t->is_abs()) {
        path.push_back(0);
        collect(t->left, path, out);
        path.pop_back();
    } else if (t->is_app()) {
        path.push_back(0);
        collect(t->left, path, out);
        path.back() = 1;
        collect(t->right, path, out);
        path.pop_back();
    }
}

Term fire(const Term& t) { return instantiate(t->left->left, t->right); }

Term rebuild_at(const Term& t, const std::vector<std::uint8_t>& path, std::size_t i, RedexKind kind) {
    if (i == path.size()) {
        auto k = classify_redex(t);
        if (!k || *k != kind) throw InvalidRedex("reduce_once: no eligible redex of that kind at the given path");
        return fire(t);
    }
    std::uint8_t dir = path[i];
    if (t->is_abs() && dir == 0) return mk_abs_raw(t->name, rebuild_at(t->left, path, i + 1, kind));
    if (t->is_app() && dir == 0) return mk_app(rebuild_at(t->left, path, i + 1, kind), t->right);
    if (t->is_app() && dir == 1) return mk_app(t->left, rebuild_at(t->right, path, i + 1, kind));
    throw InvalidRedex("reduce_once: path does not address a subterm");
}

Term step_lo(const Term& t, std::vector<std::uint8_t>* path, RedexKind* kind) {
    if (auto k = classify_redex(t)) {
        if (kind) *kind = *k;
        return fire(t);
    }
    if (t->is_abs()) {
        if (path) path->push_back(0);
        return mk_abs_raw(t->name, step_lo(t->left, path, kind));
    }
    if (t->left->has_redex) {
        if (path) path->push_back(0);
        return mk_app(step_lo(t->left, path, kind), t->right);
    }
    if (path) path->push_back(1);
    return mk_app(t->left, step_lo(t->right, path, kind));
}

Term step_ri(const Term& t, std::vector<std::uint8_t>* path, RedexKind* kind) {
    if (t->is_abs()) {
        if (path) path->push_back(0);
        return mk_abs_raw(t->name, step_ri(t->left, path, kind));
    }
    if (t->right->has_redex) {
        if (path) path->push_back(1);
        return mk_app(t->left, step_ri(t->right, path, kind));
    }
    if (t->left->has_redex) {
        if (path) path->push_back(0);
        return mk_app(step_ri(t->left, path, kind), t->right);
    }
    auto k = classify_redex(t);
    if (kind) *kind = *k;
    return fire(t);
}

Term do_step(const Term& t, Strategy s, std::vector<std::uint8_t>* path, RedexKind* kind) {
    return s == Strategy::LeftmostOutermost ? step_lo(t, path, kind) : step_ri(t, path, kind);
}

}  // namespace

std::vector<Redex> eligible_redexes(const Term& m) {
    std::vector<Redex> out;
    std::vector<std::uint8_t> path;
    collect(m, path, out);
    return out;
}

Term reduce_once(const Term& m, const Redex& r) { return rebuild_at(m, r.path, 0, r.kind); }

std::optional<Term> step(const Term& m, Strategy strategy) {
    if (!m->has_redex) return std::nullopt;
    return do_step(m, strategy, nullptr, nullptr);
}

NormalizeResult normalize(const Term& m, std::uint64_t max_steps, Strategy strategy) {
    NormalizeResult r{m, 0, false};
    while (r.term->has_redex) {
        if (r.steps >= max_steps) return r;
        r.term = do_step(r.term, strategy, nullptr, nullptr);
        ++r.steps;
    }
    r.reached_nf = true;
    return r;
}

Trace trace(const Term& m, std::uint64_t max_steps, Strategy strategy) {
    Trace tr{m, {}, false};
    Term cur = m;
    while (cur->has_redex) {
        if (tr.steps.size() >= max_steps) return tr;
        TraceStep st{{{}, RedexKind::Erase}, nullptr};
        cur = do_step(cur, strategy, &st.redex.path, &st.redex.kind);
        st.term = cur;
        tr.steps.push_back(std::move(st));
    }
    tr.reached_normal_form = true;
    return tr;
}

void write_trace_jsonl(const Trace& t, std::ostream& out) {
    out << nlohmann::json{{"schema", 1}, {"step", 0}, {"term", print_term(t.initial)}}.dump() << '\n';
    std::size_t i = 0;
    for (const auto& s : t.steps) {
        ++i;
        out << nlohmann::json{{"schema", 1},
                              {"step", i},
                              {"path", s.redex.path},
                              {"kind", redex_kind_name(s.redex.kind)},
                              {"term", print_term(s.term)}}
                   .dump()
            << '\n';
    }
    out << nlohmann::json{{"schema", 1}, {"reached_normal_form", t.reached_normal_form}}.dump() << '\n';
}

}  // namespace walt
