#include "walt/elaborate.hpp"

#include <cctype>
#include <deque>
#include <unordered_map>
#include <unordered_set>

namespace walt {

namespace {

// ------------------------------------------------------------------ syntax

enum class EK : std::uint8_t { Var, Lam, App, PBox, BBox, Embed, TLam, TApp, Annot };

struct Expr;
using ExprP = std::shared_ptr<const Expr>;

struct Expr {
    EK k;
    std::string name;   // variable, binder, embed or type binder
    bool eager = false;  // \@x
    Formula type;        // binder annotation, type argument, annotation
    ExprP a, b;
};

ExprP mk(EK k, std::string name = {}, ExprP a = nullptr, ExprP b = nullptr) {
    auto e = std::make_shared<Expr>();
    e->k = k;
    e->name = std::move(name);
    e->a = std::move(a);
    e->b = std::move(b);
    return e;
}

class DslParser {
public:
    DslParser(const std::string& s, const std::map<std::string, Formula>& macros) : s_(s), macros_(macros) {}

    ExprP parse_all() {
        ExprP e = term();
        skip();
        if (pos_ != s_.size()) throw ParseError("unexpected input in term", pos_);
        return e;
    }

private:
    const std::string& s_;
    const std::map<std::string, Formula>& macros_;
    std::size_t pos_ = 0;

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool at(const char* t) {
        skip();
        return s_.compare(pos_, std::char_traits<char>::length(t), t) == 0;
    }
    void expect(const char* t) {
        if (!at(t)) throw ParseError(std::string("expected '") + t + "'", pos_);
        pos_ += std::char_traits<char>::length(t);
    }
    static bool idc(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\''; }
    bool at_ident() {
        skip();
        return pos_ < s_.size() && idc(s_[pos_]);
    }
    std::string ident() {
        skip();
        std::size_t st = pos_;
        while (pos_ < s_.size() && idc(s_[pos_])) ++pos_;
        if (st == pos_) throw ParseError("expected identifier", pos_);
        return s_.substr(st, pos_ - st);
    }
    Formula type() {
        skip();
        return parse_formula_at(s_, pos_, macros_);
    }
    bool at_lambda() { return at("\\") || at("\xCE\xBB"); }

    ExprP term() {
        if (at("/\\")) {
            pos_ += 2;
            std::vector<std::string> vs;
            while (!at(".")) vs.push_back(ident());
            if (vs.empty()) throw ParseError("type abstraction without variables", pos_);
            ++pos_;
            ExprP body = term();
            for (auto it = vs.rbegin(); it != vs.rend(); ++it) body = mk(EK::TLam, *it, body);
            return body;
        }
        if (at_lambda()) return lambda();
        return application();
    }

    ExprP lambda() {
        pos_ += at("\\") ? 1 : 2;
        struct B {
            std::string name;
            bool eager;
            Formula type;
        };
        std::vector<B> bs;
        while (!at(".")) {
            if (at("(")) {
                ++pos_;
                bool eager = false;
                if (at("@")) {
                    ++pos_;
                    eager = true;
                }
                std::string n = ident();
                expect(":");
                Formula t = type();
                expect(")");
                bs.push_back({n, eager, t});
            } else if (at("@")) {
                ++pos_;
                bs.push_back({ident(), true, nullptr});
            } else {
                bs.push_back({ident(), false, nullptr});
            }
        }
        if (bs.empty()) throw ParseError("abstraction without binders", pos_);
        ++pos_;
        ExprP body = term();
        for (auto it = bs.rbegin(); it != bs.rend(); ++it) {
            auto e = std::make_shared<Expr>();
            e->k = EK::Lam;
            e->name = it->name;
            e->eager = it->eager;
            e->type = it->type;
            e->a = body;
            body = e;
        }
        return body;
    }

    bool at_atom() {
        skip();
        if (pos_ >= s_.size()) return false;
        char c = s_[pos_];
        return idc(c) || c == '(' || c == '{' || at("$[") || at("![");
    }

    ExprP application() {
        ExprP f = atom();
        while (true) {
            if (at_lambda() || at("/\\")) return mk(EK::App, "", f, term());
            if (!at_atom()) return f;
            f = mk(EK::App, "", f, atom());
        }
    }

    ExprP atom() {
        ExprP e;
        if (at("$[") || at("![")) {
            bool bang = s_[pos_] == '!';
            pos_ += 2;
            ExprP inner = term();
            expect("]");
            e = mk(bang ? EK::BBox : EK::PBox, "", inner);
        } else if (at("{")) {
            ++pos_;
            skip();
            std::size_t st = pos_;
            while (pos_ < s_.size() && s_[pos_] != '}') ++pos_;
            if (pos_ >= s_.size()) throw ParseError("unterminated embed", st);
            std::string n = s_.substr(st, pos_ - st);
            while (!n.empty() && std::isspace(static_cast<unsigned char>(n.back()))) n.pop_back();
            ++pos_;
            e = mk(EK::Embed, n);
        } else if (at("(")) {
            ++pos_;
            ExprP inner = term();
            if (at(":")) {
                ++pos_;
                auto an = std::make_shared<Expr>();
                an->k = EK::Annot;
                an->a = inner;
                an->type = type();
                inner = an;
            }
            expect(")");
            e = inner;
        } else {
            e = mk(EK::Var, ident());
        }
        while (at("[")) {
            ++pos_;
            auto ta = std::make_shared<Expr>();
            ta->k = EK::TApp;
            ta->a = e;
            ta->type = type();
            expect("]");
            e = ta;
        }
        return e;
    }
};

// ------------------------------------------------------------- elaborator

struct VarInfo {
    std::string src;
    Symbol sym;
    ZoneKind zone;
    Formula stored;     // the type kept in the zone
    std::size_t level;  // box depth of the binder
    std::vector<Symbol> occs;  // one name per occurrence of a polynomial variable
};

struct Zn {
    ZoneKind zone;
    Formula stored;
};

const char* zone_word(ZoneKind z) {
    switch (z) {
        case ZoneKind::Gamma: return "linear";
        case ZoneKind::Delta: return "partially discharged";
        case ZoneKind::Theta: return "elementary";
        case ZoneKind::Phi: return "polynomial";
    }
    return "?";
}

class Elaborator {
public:
    explicit Elaborator(const ElabEnv& env) : env_(env) {}

    Deriv run(const ExprP& e, const Formula& expected) { return expected ? check(e, expected) : synth(e); }

private:
    const ElabEnv& env_;
    std::deque<VarInfo> infos_;
    std::vector<VarInfo*> scope_;
    std::unordered_map<Symbol, VarInfo*> by_sym_;
    std::vector<char> boxes_;
    std::size_t counter_ = 0;

    [[noreturn]] void err(const std::string& m) { throw ElabError(m); }

    Symbol fresh(const std::string& base) { return intern(base + "_" + std::to_string(counter_++)); }

    VarInfo* push(const std::string& src, ZoneKind z, Formula stored) {
        infos_.push_back({src, fresh(src), z, std::move(stored), boxes_.size(), {}});
        VarInfo* v = &infos_.back();
        by_sym_[v->sym] = v;
        scope_.push_back(v);
        return v;
    }
    void pop() { scope_.pop_back(); }

    VarInfo* lookup(const std::string& src) {
        for (auto it = scope_.rbegin(); it != scope_.rend(); ++it)
            if ((*it)->src == src) return *it;
        err("unbound variable " + src);
    }

    std::string src_of(Symbol s) {
        auto it = by_sym_.find(s);
        return it == by_sym_.end() ? *s : it->second->src;
    }

    Zn zone_at(const VarInfo& v, std::size_t level) {
        Zn cur{v.zone, v.stored};
        for (std::size_t i = v.level; i < level; ++i) {
            char box = boxes_[i];
            if (cur.zone == ZoneKind::Gamma) err("linear variable " + v.src + " cannot enter a box");
            if (cur.zone == ZoneKind::Delta && box == '!')
                err("partially discharged variable " + v.src + " cannot enter a ! box");
            Formula inner = cur.stored;
            if (is_linear(inner))
                cur = {ZoneKind::Gamma, inner};
            else if (inner->kind == FKind::Par && (cur.zone == ZoneKind::Delta || cur.zone == ZoneKind::Theta))
                cur = {cur.zone, inner->a};
            else
                err(std::string(zone_word(cur.zone)) + " variable " + v.src + " : " + print_formula(inner) +
                    " is not usable inside this box");
        }
        return cur;
    }

    // ------------------------------------------------------------ rules

    Deriv var(const std::string& name) {
        VarInfo* v = lookup(name);
        Zn z = zone_at(*v, boxes_.size());
        if (z.zone != ZoneKind::Gamma) {
            if (z.zone == ZoneKind::Phi) err("polynomial variable " + name + " can only be used inside a box");
            err(std::string(zone_word(z.zone)) + " variable " + name + " : $" + print_formula(z.stored) +
                " needs one more box around this occurrence");
        }
        Symbol s = v->sym;
        if (v->zone == ZoneKind::Phi) {
            s = fresh(v->src);
            v->occs.push_back(s);
            by_sym_[s] = v;
        }
        Judgment j;
        j.gamma = {{s, z.stored}};
        j.subject = mk_free(s);
        j.type = z.stored;
        return make_deriv(Rule::Ax, std::move(j));
    }

    Deriv app_node(const Deriv& f, const Deriv& a) {
        const Judgment& fm = f->judgment;
        const Judgment& an = a->judgment;
        const Formula& ft = fm.type;
        Rule r = Rule::LinIBang;
        if (ft->kind == FKind::Lin)
            r = ft->a->kind == FKind::Bang ? Rule::LinEBang : Rule::LinE;
        else if (ft->kind == FKind::Eager)
            r = Rule::EagerE;
        else
            err("applying a term of non-arrow type " + print_formula(ft) + ": " + print_term(fm.subject));
        if (!alpha_eq(ft->a, an.type))
            err("argument type mismatch: expected " + print_formula(ft->a) + ", got " + print_formula(an.type) +
                " for " + print_term(an.subject));
        if (r == Rule::LinEBang)
            for (const auto& q : fm.epsilon)
                if (!q.theta.empty())
                    err("the function of a !-application uses elementary variable " + src_of(q.theta[0].var));
        if (r == Rule::EagerE) {
            if (!an.gamma.empty()) err("eager argument uses linear variable " + src_of(an.gamma[0].var));
            if (!an.delta.empty()) err("eager argument uses partially discharged variable " + src_of(an.delta[0].var));
            for (const auto& q : an.epsilon)
                if (q.phi) err("eager argument uses polynomial variable " + src_of(q.phi->var));
        }
        std::unordered_set<Symbol> seen;
        auto note = [&](Symbol s) { seen.insert(s); };
        auto clash = [&](Symbol s) {
            if (seen.count(s)) err("variable " + src_of(s) + " is used twice");
        };
        for (const auto& x : fm.gamma) note(x.var);
        for (const auto& x : fm.delta) note(x.var);
        for (const auto& q : fm.epsilon) {
            for (const auto& x : q.theta) note(x.var);
            if (q.phi) note(q.phi->var);
        }
        for (const auto& x : an.gamma) clash(x.var);
        for (const auto& x : an.delta) clash(x.var);
        for (const auto& q : an.epsilon) {
            for (const auto& x : q.theta) clash(x.var);
            if (q.phi) clash(q.phi->var);
        }
        Judgment j;
        j.gamma = fm.gamma;
        for (const auto& x : an.gamma) zone_insert(j.gamma, x);
        j.delta = fm.delta;
        for (const auto& x : an.delta) zone_insert(j.delta, x);
        try {
            j.epsilon = merge_contexts(fm.epsilon, an.epsilon);
        } catch (const StructureViolation& e) {
            err(e.what());
        }
        j.subject = mk_app(fm.subject, an.subject);
        j.type = ft->b;
        return make_deriv(r, std::move(j), {f, a});
    }

    Deriv fuse(const Deriv& d, Symbol x, Symbol z) {
        const Judgment& j = d->judgment;
        const PdPair* px = phi_pair(j.epsilon, x);
        const PdPair* pz = phi_pair(j.epsilon, z);
        PdPair fused{px->theta, Assign{z, pz->phi->type}};
        for (const auto& a : pz->theta) zone_insert(fused.theta, a);
        PdContext rest;
        for (const auto& q : j.epsilon)
            if (&q != px && &q != pz) rest.push_back(q);
        Judgment nj = j;
        nj.epsilon = merge_contexts(rest, {fused});
        nj.subject = substitute(j.subject, {{*x, mk_free(z)}});
        return make_deriv(Rule::Contr, std::move(nj), {d});
    }

    Deriv safe_weaken(const Deriv& d, ZoneKind z, const Assign& a) {
        try {
            return weaken(d, z, a);
        } catch (const WeakenError& e) {
            err("cannot discard " + src_of(a.var) + ": " + e.what());
        }
    }

    // Discharges v from the body derivation, producing the introduction node.
    Deriv close_binder(VarInfo* v, Deriv body, const Formula& ctype) {
        const Judgment& bj = body->judgment;
        Symbol x = v->sym;
        Judgment j;
        Rule r = Rule::LinIBang;
        switch (v->zone) {
            case ZoneKind::Gamma: {
                if (!zone_find(bj.gamma, x)) body = safe_weaken(body, ZoneKind::Gamma, {x, v->stored});
                j = body->judgment;
                zone_erase(j.gamma, x);
                r = Rule::LinI;
                break;
            }
            case ZoneKind::Delta: {
                if (!zone_find(bj.delta, x)) body = safe_weaken(body, ZoneKind::Delta, {x, v->stored});
                j = body->judgment;
                zone_erase(j.delta, x);
                r = Rule::LinIPar;
                break;
            }
            case ZoneKind::Theta: {
                const PdPair* e0 = empty_phi_pair(bj.epsilon);
                if (!e0 || !zone_find(e0->theta, x)) {
                    for (const auto& q : bj.epsilon)
                        if (q.phi && zone_find(q.theta, x))
                            err("elementary variable " + v->src + " is used in a ! box together with " +
                                src_of(q.phi->var) + "; bind " + v->src + " outside " + src_of(q.phi->var));
                    body = safe_weaken(body, ZoneKind::Theta, {x, v->stored});
                }
                j = body->judgment;
                for (auto& q : j.epsilon)
                    if (!q.phi) zone_erase(q.theta, x);
                canonicalize(j.epsilon);
                r = Rule::EagerI;
                break;
            }
            case ZoneKind::Phi: {
                std::vector<Symbol> used;
                for (Symbol s : v->occs)
                    if (phi_pair(bj.epsilon, s)) used.push_back(s);
                if (used.empty()) {
                    body = safe_weaken(body, ZoneKind::Phi, {x, v->stored});
                    used.push_back(x);
                }
                x = used.back();
                for (std::size_t i = 0; i + 1 < used.size(); ++i) body = fuse(body, used[i], x);
                j = body->judgment;
                const PdPair* p = phi_pair(j.epsilon, x);
                PdContext rest;
                for (const auto& q : j.epsilon)
                    if (&q != p) rest.push_back(q);
                j.epsilon = merge_contexts(rest, {PdPair{p->theta, std::nullopt}});
                r = Rule::LinIBang;
                break;
            }
        }
        j.subject = mk_abs_raw(intern(v->src), close_var(body->judgment.subject, x));
        j.type = ctype;
        return make_deriv(r, std::move(j), {body});
    }

    static ZoneKind binder_zone(const Formula& dom, bool eager) {
        if (dom->kind == FKind::Bang) return ZoneKind::Phi;
        if (dom->kind == FKind::Par) return eager ? ZoneKind::Theta : ZoneKind::Delta;
        return ZoneKind::Gamma;
    }

    static Formula stored_of(const Formula& dom) { return is_linear(dom) ? dom : dom->a; }

    Deriv lam_with_types(const ExprP& e, const std::vector<Formula>& types, std::size_t idx, const Formula& expected) {
        const Formula& t = types[idx];
        if (e->type && !alpha_eq(e->type, t))
            err("binder " + e->name + " annotated " + print_formula(e->type) + " but receives " + print_formula(t));
        ZoneKind z = binder_zone(t, e->eager);
        if (e->eager && z != ZoneKind::Theta) err("eager binder " + e->name + " needs a $-modal type");
        VarInfo* v = push(e->name, z, stored_of(t));
        Deriv body;
        if (idx + 1 < types.size()) {
            if (e->a->k != EK::Lam) err("too many arguments for the abstraction binding " + e->name);
            body = lam_with_types(e->a, types, idx + 1, expected);
        } else {
            body = expected ? check(e->a, expected) : synth(e->a);
        }
        pop();
        Formula ct = z == ZoneKind::Theta ? eager(t, body->judgment.type) : lin(t, body->judgment.type);
        return close_binder(v, body, ct);
    }

    Deriv lam_checked(const ExprP& e, const Formula& t) {
        if (t->kind != FKind::Lin && t->kind != FKind::Eager)
            err("abstraction over " + e->name + " checked against non-arrow type " + print_formula(t));
        const Formula& dom = t->a;
        if (e->type && !alpha_eq(e->type, dom))
            err("binder " + e->name + " annotated " + print_formula(e->type) + " but expected " + print_formula(dom));
        ZoneKind z = binder_zone(dom, t->kind == FKind::Eager);
        if (e->eager && z != ZoneKind::Theta) err("eager binder " + e->name + " checked against " + print_formula(t));
        VarInfo* v = push(e->name, z, stored_of(dom));
        Deriv body = check(e->a, t->b);
        pop();
        return close_binder(v, body, t);
    }

    Deriv box(char kind, const ExprP& inner, const Formula& expected) {
        boxes_.push_back(kind);
        Deriv d = expected ? check(inner, expected) : synth(inner);
        boxes_.pop_back();
        const Judgment& p = d->judgment;
        std::size_t level = boxes_.size();
        Judgment j;
        Zone e0;
        std::vector<PdPair> phis;
        Zone attached;
        std::optional<Assign> bphi;
        for (const auto& q : p.epsilon) {
            if (q.phi) err("polynomial variable " + src_of(q.phi->var) + " escapes its box");
            for (const auto& a : q.theta) zone_insert(e0, {a.var, par(a.type)});
        }
        for (const auto& a : p.delta) {
            if (kind == '!') err("partially discharged variable " + src_of(a.var) + " inside a ! box");
            zone_insert(j.delta, {a.var, par(a.type)});
        }
        for (const auto& a : p.gamma) {
            VarInfo* v = by_sym_.at(a.var);
            Zn outer = zone_at(*v, level);
            if (v->zone == ZoneKind::Phi && v->level == level) outer.zone = ZoneKind::Phi;
            switch (outer.zone) {
                case ZoneKind::Gamma:
                    err("linear variable " + v->src + " cannot enter a box");
                case ZoneKind::Delta:
                    if (kind == '!') err("partially discharged variable " + v->src + " inside a ! box");
                    zone_insert(j.delta, a);
                    break;
                case ZoneKind::Theta:
                    if (kind == '$')
                        zone_insert(e0, a);
                    else
                        zone_insert(attached, a);
                    break;
                case ZoneKind::Phi:
                    if (kind == '$') {
                        phis.push_back(PdPair{{}, a});
                    } else {
                        if (bphi)
                            err("a ! box can use a single polynomial variable, found " + src_of(bphi->var) + " and " +
                                v->src);
                        bphi = a;
                    }
                    break;
            }
        }
        if (kind == '!') {
            if (!attached.empty() && !bphi)
                err("elementary variable " + src_of(attached[0].var) +
                    " enters a ! box that uses no polynomial variable");
            if (bphi) phis.push_back(PdPair{attached, bphi});
        }
        j.epsilon = phis;
        if (!e0.empty()) j.epsilon.push_back(PdPair{e0, std::nullopt});
        canonicalize(j.epsilon);
        j.subject = p.subject;
        j.type = kind == '$' ? par(p.type) : bang(p.type);
        return make_deriv(kind == '$' ? Rule::Par : Rule::Bang, std::move(j), {d});
    }

    std::set<Symbol> scope_ftv() {
        std::set<Symbol> s;
        for (VarInfo* v : scope_) s.insert(v->stored->ftv.begin(), v->stored->ftv.end());
        return s;
    }

    Deriv forall_intro(const Deriv& d, Symbol a) {
        const Judgment& p = d->judgment;
        auto bad = [&](const Zone& z) {
            for (const auto& x : z)
                if (has_ftv(x.type, a)) err("type variable " + *a + " is free in the type of " + src_of(x.var));
        };
        bad(p.gamma);
        bad(p.delta);
        for (const auto& q : p.epsilon) {
            bad(q.theta);
            if (q.phi) bad({*q.phi});
        }
        Judgment j = p;
        j.type = forall(a, p.type);
        return make_deriv(Rule::ForallI, std::move(j), {d});
    }

    Deriv forall_elim(const Deriv& d, const Formula& inst) {
        const Formula& t = d->judgment.type;
        if (t->kind != FKind::Forall) err("type application to a term of type " + print_formula(t));
        if (!is_linear(inst)) err("type application with modal type " + print_formula(inst));
        Judgment j = d->judgment;
        j.type = subst_type(t->a, t->name, inst);
        return make_deriv(Rule::ForallE, std::move(j), {d}, inst);
    }

    Deriv subsume(const Deriv& d, const Formula& t) {
        const Formula& s = d->judgment.type;
        if (alpha_eq(s, t)) return d;
        if (s->kind == FKind::Forall) {
            if (auto inst = match_instance(s->a, s->name, t)) return forall_elim(d, *inst);
        }
        if (t->kind == FKind::Forall && alpha_eq(s, t->a)) return forall_intro(d, t->name);
        err("type mismatch for " + print_term(d->judgment.subject) + ": expected " + print_formula(t) + ", got " +
            print_formula(s));
    }

    Deriv check(const ExprP& e, const Formula& t) {
        if (t->kind == FKind::Forall && (e->k == EK::Lam || e->k == EK::PBox || e->k == EK::BBox)) {
            Symbol a = t->name;
            Formula body = t->a;
            std::set<Symbol> avoid = scope_ftv();
            if (avoid.count(a)) {
                avoid.insert(body->ftv.begin(), body->ftv.end());
                Symbol na = intern(fresh_tvar(*a, avoid));
                body = subst_type(body, a, tvar(na));
                a = na;
            }
            return forall_intro(check(e, body), a);
        }
        switch (e->k) {
            case EK::Var:
                if (t->kind == FKind::Bang) {
                    VarInfo* v = lookup(e->name);
                    if (v->zone == ZoneKind::Phi && v->level == boxes_.size()) return box('!', e, t->a);
                }
                if (t->kind == FKind::Par) {
                    VarInfo* v = lookup(e->name);
                    Zn z = zone_at(*v, boxes_.size());
                    if (z.zone != ZoneKind::Gamma) return box('$', e, t->a);
                }
                return subsume(synth(e), t);
            case EK::Lam:
                return lam_checked(e, t);
            case EK::PBox:
                if (t->kind != FKind::Par) err("$ box checked against " + print_formula(t));
                return box('$', e->a, t->a);
            case EK::BBox:
                if (t->kind != FKind::Bang) err("! box checked against " + print_formula(t));
                return box('!', e->a, t->a);
            case EK::App:
                return subsume(app(e, t), t);
            case EK::TLam: {
                if (t->kind != FKind::Forall) err("type abstraction checked against " + print_formula(t));
                Symbol a = intern(e->name);
                Formula body = t->name == a ? t->a : subst_type(t->a, t->name, tvar(a));
                return forall_intro(check(e->a, body), a);
            }
            default:
                return subsume(synth(e), t);
        }
    }

    Deriv app(const ExprP& e, const Formula& expected) {
        std::vector<ExprP> args;
        ExprP h = e;
        while (h->k == EK::App) {
            args.push_back(h->b);
            h = h->a;
        }
        std::reverse(args.begin(), args.end());
        std::size_t used = 0;
        Deriv f;
        if (h->k == EK::Lam) {
            std::size_t k = 0;
            for (ExprP l = h; l->k == EK::Lam && k < args.size(); l = l->a) ++k;
            std::vector<Deriv> ds;
            std::vector<Formula> ts;
            for (std::size_t i = 0; i < k; ++i) {
                ds.push_back(synth(args[i]));
                ts.push_back(ds.back()->judgment.type);
            }
            f = lam_with_types(h, ts, 0, k == args.size() ? expected : nullptr);
            for (auto& d : ds) f = app_node(f, d);
            used = k;
        } else {
            f = synth(h);
        }
        for (std::size_t i = used; i < args.size(); ++i) {
            const Formula& ft = f->judgment.type;
            if (ft->kind != FKind::Lin && ft->kind != FKind::Eager)
                err("applying " + print_term(f->judgment.subject) + " of type " + print_formula(ft) +
                    " (instantiate quantifiers explicitly)");
            f = app_node(f, check(args[i], ft->a));
        }
        return f;
    }

    Deriv synth(const ExprP& e) {
        switch (e->k) {
            case EK::Var:
                return var(e->name);
            case EK::Lam:
                if (!e->type) err("cannot infer the type of binder " + e->name + "; annotate it");
                return lam_with_types(e, {e->type}, 0, nullptr);
            case EK::App:
                return app(e, nullptr);
            case EK::PBox:
                return box('$', e->a, nullptr);
            case EK::BBox:
                return box('!', e->a, nullptr);
            case EK::Embed: {
                auto it = env_.embeds.find(e->name);
                if (it == env_.embeds.end()) err("unknown embedded term {" + e->name + "}");
                return it->second.derivation;
            }
            case EK::TLam:
                return forall_intro(synth(e->a), intern(e->name));
            case EK::TApp:
                return forall_elim(synth(e->a), e->type);
            case EK::Annot:
                return check(e->a, e->type);
        }
        err("unknown expression");
    }
};

}  // namespace

TypedTerm elaborate(const std::string& source, const Formula& expected, const ElabEnv& env) {
    ExprP e;
    try {
        e = DslParser(source, env.macros).parse_all();
    } catch (const ParseError& ex) {
        throw ElabError(std::string("syntax: ") + ex.what());
    }
    Elaborator el(env);
    Deriv d;
    try {
        d = el.run(e, expected);
    } catch (const FormulaError& ex) {
        throw ElabError(std::string("formula: ") + ex.what());
    } catch (const StructureViolation& ex) {
        throw ElabError(ex.what());
    }
    const Judgment& j = d->judgment;
    if (!j.gamma.empty() || !j.delta.empty() || !j.epsilon.empty())
        throw ElabError("elaborated term is open: " + print_judgment(j));
    return TypedTerm{j.subject, d, j.type};
}

TypedTerm elaborate(const std::string& source, const std::string& expected, const ElabEnv& env) {
    Formula t = expected.empty() ? nullptr : parse_formula(expected, env.macros);
    return elaborate(source, t, env);
}

const TypedTerm& verify(const TypedTerm& t) {
    CheckResult r = check_derivation(t.derivation);
    if (!r.ok) throw ElabError("derivation rejected: " + describe(*r.violation));
    const Judgment& j = t.derivation->judgment;
    if (!j.gamma.empty() || !j.delta.empty() || !j.epsilon.empty()) throw ElabError("derivation is not closed");
    if (!alpha_eq(j.subject, t.term) || !alpha_eq(j.type, t.formula)) throw ElabError("typed term out of sync");
    return t;
}

}  // namespace walt
