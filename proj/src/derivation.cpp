#include "walt/derivation.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace walt {

const char* rule_name(Rule r) {
    switch (r) {
        case Rule::Ax: return "A";
        case Rule::Contr: return "C";
        case Rule::LinI: return "-oI";
        case Rule::LinIPar: return "-oI$";
        case Rule::LinE: return "-oE";
        case Rule::LinIBang: return "-oI!";
        case Rule::LinEBang: return "-oE!";
        case Rule::EagerI: return "=oI";
        case Rule::EagerE: return "=oE";
        case Rule::Par: return "$";
        case Rule::Bang: return "!";
        case Rule::ForallI: return "forallI";
        case Rule::ForallE: return "forallE";
    }
    return "?";
}

std::optional<Rule> parse_rule(const std::string& s) {
    static const std::vector<Rule> all = {Rule::Ax,      Rule::Contr,  Rule::LinI,   Rule::LinIPar, Rule::LinE,
                                          Rule::LinIBang, Rule::LinEBang, Rule::EagerI, Rule::EagerE, Rule::Par,
                                          Rule::Bang,    Rule::ForallI, Rule::ForallE};
    for (Rule r : all)
        if (s == rule_name(r)) return r;
    return std::nullopt;
}

Deriv make_deriv(Rule rule, Judgment j, std::vector<Deriv> premises, Formula instance) {
    auto n = std::make_shared<DerivNode>();
    n->rule = rule;
    n->judgment = std::move(j);
    n->premises = std::move(premises);
    n->instance = std::move(instance);
    return n;
}

std::string describe(const Violation& v) {
    std::string s = "rule " + v.rule + ": condition \"" + v.condition + "\" fails in zone " + v.zone;
    if (!v.detail.empty()) s += " (" + v.detail + ")";
    return s;
}

// ------------------------------------------------------------------ zones

namespace {

bool by_var(const Assign& a, const Assign& b) { return a.var < b.var; }

}  // namespace

const Assign* zone_find(const Zone& z, Symbol x) {
    auto it = std::lower_bound(z.begin(), z.end(), Assign{x, nullptr}, by_var);
    return (it != z.end() && it->var == x) ? &*it : nullptr;
}

void zone_insert(Zone& z, Assign a) {
    auto it = std::lower_bound(z.begin(), z.end(), a, by_var);
    if (it != z.end() && it->var == a.var)
        *it = std::move(a);
    else
        z.insert(it, std::move(a));
}

bool zone_erase(Zone& z, Symbol x) {
    auto it = std::lower_bound(z.begin(), z.end(), Assign{x, nullptr}, by_var);
    if (it == z.end() || it->var != x) return false;
    z.erase(it);
    return true;
}

bool zone_eq(const Zone& a, const Zone& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].var != b[i].var || !alpha_eq(a[i].type, b[i].type)) return false;
    return true;
}

const PdPair* empty_phi_pair(const PdContext& e) {
    for (const auto& p : e)
        if (!p.phi) return &p;
    return nullptr;
}

const PdPair* phi_pair(const PdContext& e, Symbol x) {
    for (const auto& p : e)
        if (p.phi && p.phi->var == x) return &p;
    return nullptr;
}

void canonicalize(PdContext& e) {
    e.erase(std::remove_if(e.begin(), e.end(), [](const PdPair& p) { return !p.phi && p.theta.empty(); }),
            e.end());
    std::stable_sort(e.begin(), e.end(), [](const PdPair& a, const PdPair& b) {
        if (!a.phi || !b.phi) return !a.phi && b.phi;
        return a.phi->var < b.phi->var;
    });
}

bool pd_eq(const PdContext& a, const PdContext& b) {
    PdContext x = a, y = b;
    canonicalize(x);
    canonicalize(y);
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i].phi.has_value() != y[i].phi.has_value()) return false;
        if (x[i].phi && (x[i].phi->var != y[i].phi->var || !alpha_eq(x[i].phi->type, y[i].phi->type)))
            return false;
        if (!zone_eq(x[i].theta, y[i].theta)) return false;
    }
    return true;
}

PdContext merge_contexts(const PdContext& e1, const PdContext& e2) {
    PdContext out = e1;
    for (const auto& q : e2) {
        PdPair* target = nullptr;
        for (auto& p : out) {
            if (!p.phi && !q.phi) target = &p;
            if (p.phi && q.phi && p.phi->var == q.phi->var) {
                if (!alpha_eq(p.phi->type, q.phi->type))
                    throw StructureViolation("structure-violation: polynomial variable " + *q.phi->var +
                                             " carries two different types");
                target = &p;
            }
        }
        if (!target) {
            out.push_back(q);
            continue;
        }
        for (const auto& a : q.theta) {
            if (zone_find(target->theta, a.var))
                throw StructureViolation("structure-violation: elementary variable " + *a.var +
                                         " occurs in both contexts");
            zone_insert(target->theta, a);
        }
    }
    canonicalize(out);
    return out;
}

// -------------------------------------------------------------- checking

namespace {

enum ZoneTag : char { ZG = 'G', ZD = 'D', ZT = 'T', ZP = 'P' };

const char* zone_label(char z) {
    switch (z) {
        case ZG: return "Γ";
        case ZD: return "Δ";
        case ZT: return "Θ";
        case ZP: return "Φ";
    }
    return "?";
}

std::vector<std::pair<Symbol, char>> domain(const Judgment& j) {
    std::vector<std::pair<Symbol, char>> d;
    for (const auto& a : j.gamma) d.emplace_back(a.var, ZG);
    for (const auto& a : j.delta) d.emplace_back(a.var, ZD);
    for (const auto& p : j.epsilon) {
        for (const auto& a : p.theta) d.emplace_back(a.var, ZT);
        if (p.phi) d.emplace_back(p.phi->var, ZP);
    }
    return d;
}

bool occurs_free(const Term& t, Symbol x) {
    if (t->name_count == 0) return false;
    if (t->name_count == 1) return t->one_name == x;
    switch (t->kind) {
        case TermKind::Var: return !t->bound && t->name == x;
        case TermKind::Abs: return occurs_free(t->left, x);
        case TermKind::App: return occurs_free(t->left, x) || occurs_free(t->right, x);
    }
    return false;
}

bool same_contexts(const Judgment& a, const Judgment& b) {
    return zone_eq(a.gamma, b.gamma) && zone_eq(a.delta, b.delta) && pd_eq(a.epsilon, b.epsilon);
}

// The single variable bound by an introduction rule: in the premise, not in the conclusion.
std::optional<Symbol> binder_of(const Judgment& p, const Judgment& c) {
    auto dc = domain(c);
    std::unordered_set<Symbol> in_c;
    for (auto& [x, z] : dc) in_c.insert(x);
    std::optional<Symbol> found;
    for (auto& [x, z] : domain(p)) {
        if (in_c.count(x)) continue;
        if (found) return std::nullopt;
        found = x;
    }
    return found;
}

struct ContrParams {
    Symbol x, y, z;
};

std::vector<ContrParams> contraction_candidates(const Judgment& p, const Judgment& c) {
    std::vector<Symbol> pv, qv;
    for (const auto& q : p.epsilon)
        if (q.phi) pv.push_back(q.phi->var);
    for (const auto& q : c.epsilon)
        if (q.phi) qv.push_back(q.phi->var);
    auto in = [](const std::vector<Symbol>& v, Symbol s) { return std::find(v.begin(), v.end(), s) != v.end(); };
    std::vector<Symbol> gone, fresh, both;
    for (Symbol s : pv) (in(qv, s) ? both : gone).push_back(s);
    for (Symbol s : qv)
        if (!in(pv, s)) fresh.push_back(s);
    std::vector<ContrParams> out;
    if (gone.size() == 2 && fresh.size() == 1) out.push_back({gone[0], gone[1], fresh[0]});
    if (gone.size() == 1 && fresh.empty())
        for (Symbol s : both) out.push_back({gone[0], s, s});
    return out;
}

class RuleChecker {
public:
    explicit RuleChecker(const DerivNode& n) : n_(n), c_(n.judgment), name_(rule_name(n.rule)) {}

    std::optional<Violation> run() {
        if (auto v = check_judgment(c_)) {
            v->rule = name_;
            return v;
        }
        if (n_.premises.size() != arity()) return fail("premise count", "rule", std::to_string(n_.premises.size()));
        switch (n_.rule) {
            case Rule::Ax: return ax();
            case Rule::Contr: return contr();
            case Rule::LinI:
            case Rule::LinIPar:
            case Rule::LinIBang:
            case Rule::EagerI: return intro();
            case Rule::LinE:
            case Rule::LinEBang:
            case Rule::EagerE: return elim();
            case Rule::Par: return par_box();
            case Rule::Bang: return bang_box();
            case Rule::ForallI: return forall_i();
            case Rule::ForallE: return forall_e();
        }
        return fail("known rule", "rule");
    }

private:
    const DerivNode& n_;
    const Judgment& c_;
    std::string name_;

    std::size_t arity() const {
        switch (n_.rule) {
            case Rule::Ax: return 0;
            case Rule::LinE:
            case Rule::LinEBang:
            case Rule::EagerE: return 2;
            default: return 1;
        }
    }

    std::optional<Violation> fail(const std::string& cond, const std::string& zone, const std::string& detail = "") {
        return Violation{name_, cond, zone, detail};
    }

    const Judgment& prem(std::size_t i) const { return n_.premises[i]->judgment; }

    std::optional<Violation> ax() {
        const Term& s = c_.subject;
        if (!s->is_var() || s->bound) return fail("subject is a variable x", "subject");
        const Assign* a = zone_find(c_.gamma, s->name);
        if (!a) return fail("Γ,x:L;Δ;E ⊢ x:L", "Γ", "variable " + *s->name + " is not linear here");
        if (!alpha_eq(a->type, c_.type)) return fail("Γ,x:L;Δ;E ⊢ x:L", "type", *s->name);
        return std::nullopt;
    }

    std::optional<Violation> contr() {
        const Judgment& p = prem(0);
        if (!alpha_eq(p.type, c_.type)) return fail("same type B", "type");
        if (!zone_eq(p.gamma, c_.gamma)) return fail("same Γ", "Γ");
        if (!zone_eq(p.delta, c_.delta)) return fail("same Δ", "Δ");
        auto cands = contraction_candidates(p, c_);
        if (cands.empty()) return fail("E,(Θx;{x:A}),(Θy;{y:A})", "Φ", "no pair of fused polynomial variables");
        std::optional<Violation> last;
        for (const auto& k : cands) {
            last = contr_with(p, k);
            if (!last) return std::nullopt;
        }
        return last;
    }

    std::optional<Violation> contr_with(const Judgment& p, const ContrParams& k) {
        const PdPair* px = phi_pair(p.epsilon, k.x);
        const PdPair* py = phi_pair(p.epsilon, k.y);
        if (!px || !py || k.x == k.y) return fail("E,(Θx;{x:A}),(Θy;{y:A})", "Φ");
        if (!alpha_eq(px->phi->type, py->phi->type)) return fail("x:A and y:A share A", "Φ");
        if (k.z != k.x && k.z != k.y) {
            for (auto& [v, zt] : domain(p))
                if (v == k.z) return fail("z fresh", zone_label(zt), *k.z);
        }
        PdContext rest;
        for (const auto& q : p.epsilon)
            if (!(q.phi && (q.phi->var == k.x || q.phi->var == k.y))) rest.push_back(q);
        PdPair fused;
        fused.theta = px->theta;
        for (const auto& a : py->theta) zone_insert(fused.theta, a);
        fused.phi = Assign{k.z, px->phi->type};
        PdContext expect;
        try {
            expect = merge_contexts(rest, {fused});
        } catch (const StructureViolation& e) {
            return fail("E ⊔ {(Θx,Θy;{z:A})}", "E", e.what());
        }
        if (!pd_eq(expect, c_.epsilon)) return fail("E ⊔ {(Θx,Θy;{z:A})}", "E");
        Term zt = mk_free(k.z);
        Term renamed = substitute(p.subject, {{*k.x, zt}, {*k.y, zt}});
        if (!alpha_eq(renamed, c_.subject)) return fail("M{z/x, z/y}", "subject");
        return std::nullopt;
    }

    std::optional<Violation> intro() {
        const Judgment& p = prem(0);
        const Formula& t = c_.type;
        bool eager = n_.rule == Rule::EagerI;
        if (t->kind != (eager ? FKind::Eager : FKind::Lin)) return fail("arrow conclusion", "type");
        FKind dk = t->a->kind;
        if (n_.rule == Rule::LinI && (dk == FKind::Bang || dk == FKind::Par)) return fail("L ⊸ B with L linear", "type");
        if (n_.rule == Rule::LinIPar && dk != FKind::Par) return fail("$A ⊸ B", "type");
        if (n_.rule == Rule::LinIBang && dk != FKind::Bang) return fail("!A ⊸ B", "type");
        if (!alpha_eq(p.type, t->b)) return fail("body has type B", "type");
        if (!c_.subject->is_abs()) return fail("subject is an abstraction", "subject");
        auto xo = binder_of(p, c_);
        if (!xo) return fail("exactly one discharged assumption", "context");
        Symbol x = *xo;
        if (!alpha_eq(open_var(c_.subject->left, x), p.subject)) return fail("subject \\x.M", "subject", *x);
        Judgment expect = p;
        Formula want = n_.rule == Rule::LinI ? t->a : t->a->a;
        switch (n_.rule) {
            case Rule::LinI: {
                const Assign* a = zone_find(p.gamma, x);
                if (!a) return fail("Γ,x:L", "Γ", *x);
                if (!alpha_eq(a->type, want)) return fail("Γ,x:L", "type", *x);
                zone_erase(expect.gamma, x);
                break;
            }
            case Rule::LinIPar: {
                const Assign* a = zone_find(p.delta, x);
                if (!a) return fail("Δ,x:A", "Δ", *x);
                if (!alpha_eq(a->type, want)) return fail("Δ,x:A", "type", *x);
                zone_erase(expect.delta, x);
                break;
            }
            case Rule::LinIBang: {
                const PdPair* px = phi_pair(p.epsilon, x);
                if (!px) return fail("E,(Θ;{x:A})", "Φ", *x);
                if (!alpha_eq(px->phi->type, want)) return fail("E,(Θ;{x:A})", "type", *x);
                PdContext rest;
                for (const auto& q : p.epsilon)
                    if (&q != px) rest.push_back(q);
                try {
                    expect.epsilon = merge_contexts(rest, {PdPair{px->theta, std::nullopt}});
                } catch (const StructureViolation& e) {
                    return fail("E ⊔ {(Θ;∅)}", "E", e.what());
                }
                break;
            }
            default: {
                const PdPair* pe = empty_phi_pair(p.epsilon);
                const Assign* a = pe ? zone_find(pe->theta, x) : nullptr;
                if (!a) return fail("E,(Θ,x:A;∅)", "Θ", *x);
                if (!alpha_eq(a->type, want)) return fail("E,(Θ,x:A;∅)", "type", *x);
                for (auto& q : expect.epsilon)
                    if (!q.phi) zone_erase(q.theta, x);
                canonicalize(expect.epsilon);
                break;
            }
        }
        if (!zone_eq(expect.gamma, c_.gamma)) return fail("conclusion context", "Γ");
        if (!zone_eq(expect.delta, c_.delta)) return fail("conclusion context", "Δ");
        if (!pd_eq(expect.epsilon, c_.epsilon)) return fail("conclusion context", "E");
        return std::nullopt;
    }

    std::optional<Violation> elim() {
        const Judgment& m = prem(0);
        const Judgment& nn = prem(1);
        const Formula& ft = m.type;
        if (!c_.subject->is_app()) return fail("subject is an application MN", "subject");
        if (!alpha_eq(c_.subject->left, m.subject) || !alpha_eq(c_.subject->right, nn.subject))
            return fail("subject MN", "subject");
        switch (n_.rule) {
            case Rule::LinE:
                if (ft->kind != FKind::Lin) return fail("M : A ⊸ B", "type");
                if (ft->a->kind == FKind::Bang) return fail("A ≢ !C, for any C", "type", print_formula(ft->a));
                break;
            case Rule::LinEBang:
                if (ft->kind != FKind::Lin || ft->a->kind != FKind::Bang) return fail("M : !A ⊸ B", "type");
                for (const auto& q : m.epsilon)
                    if (!q.theta.empty()) return fail("E_M ⊆ {(∅;Φ1),…,(∅;Φn)}", "Θ");
                break;
            default:
                if (ft->kind != FKind::Eager) return fail("M : $A ⊸• B", "type");
                if (!nn.gamma.empty()) return fail("∅;∅;E_N ⊢ N:$A", "Γ");
                if (!nn.delta.empty()) return fail("∅;∅;E_N ⊢ N:$A", "Δ");
                for (const auto& q : nn.epsilon)
                    if (q.phi) return fail("E_N ⊆ {(Θ;∅)}", "Φ");
                break;
        }
        if (!alpha_eq(ft->a, nn.type)) return fail("argument type matches", "type");
        if (!alpha_eq(ft->b, c_.type)) return fail("result type", "type");

        std::unordered_map<Symbol, char> dm;
        for (auto& [x, z] : domain(m)) dm[x] = z;
        for (auto& [x, z] : domain(nn)) {
            auto it = dm.find(x);
            if (it != dm.end() && !(it->second == ZP && z == ZP))
                return fail("disjoint domains across premises", zone_label(z), *x);
        }
        Zone g = m.gamma, d = m.delta;
        for (const auto& a : nn.gamma) zone_insert(g, a);
        for (const auto& a : nn.delta) zone_insert(d, a);
        if (!zone_eq(g, c_.gamma)) return fail("Γ_M, Γ_N", "Γ");
        if (!zone_eq(d, c_.delta)) return fail("Δ_M, Δ_N", "Δ");
        PdContext e;
        try {
            e = merge_contexts(m.epsilon, nn.epsilon);
        } catch (const StructureViolation& ex) {
            return fail("E_M ⊔ E_N", "E", ex.what());
        }
        if (!pd_eq(e, c_.epsilon)) return fail("E_M ⊔ E_N", "E");
        return std::nullopt;
    }

    std::optional<Violation> par_box() {
        const Judgment& p = prem(0);
        if (c_.type->kind != FKind::Par || !alpha_eq(c_.type->a, p.type)) return fail("M : $B", "type");
        if (!alpha_eq(c_.subject, p.subject)) return fail("same subject", "subject");
        for (const auto& q : p.epsilon)
            if (q.phi) return fail("Γ;Δ';{(Θ';∅)} ⊢ M:B", "Φ", *q.phi->var);
        const PdPair* pe = empty_phi_pair(p.epsilon);
        const PdPair* ce = empty_phi_pair(c_.epsilon);
        for (const auto& q : c_.epsilon)
            if (q.phi && !q.theta.empty()) return fail("Θi ≠ ∅ iff Φi = ∅", "E", *q.phi->var);
        if (pe) {
            for (const auto& a : pe->theta) {
                const Assign* b = ce ? zone_find(ce->theta, a.var) : nullptr;
                if (!b || !alpha_eq(b->type, par(a.type))) return fail("{($Θ';∅)}", "Θ", *a.var);
            }
        }
        for (const auto& a : p.delta) {
            const Assign* b = zone_find(c_.delta, a.var);
            if (!b || !alpha_eq(b->type, par(a.type))) return fail("$Δ'", "Δ", *a.var);
        }
        for (const auto& a : p.gamma) {
            const Assign* b = zone_find(c_.delta, a.var);
            if (!b && ce) b = zone_find(ce->theta, a.var);
            if (!b) {
                const PdPair* q = phi_pair(c_.epsilon, a.var);
                if (q) b = &*q->phi;
            }
            if (!b) return fail("Γ ⊆ Δ ∪ ⋃Θi ∪ ⋃Φi", "Γ", *a.var);
            if (!alpha_eq(b->type, a.type)) return fail("Γ ⊆ Δ ∪ ⋃Θi ∪ ⋃Φi", "type", *a.var);
        }
        return std::nullopt;
    }

    std::optional<Violation> bang_box() {
        const Judgment& p = prem(0);
        if (c_.type->kind != FKind::Bang || !alpha_eq(c_.type->a, p.type)) return fail("M : !B", "type");
        if (!alpha_eq(c_.subject, p.subject)) return fail("same subject", "subject");
        if (!p.delta.empty()) return fail("Γ;∅;{(Θ';∅)} ⊢ M:B", "Δ");
        for (const auto& q : p.epsilon)
            if (q.phi) return fail("Γ;∅;{(Θ';∅)} ⊢ M:B", "Φ", *q.phi->var);
        const PdPair* pe = empty_phi_pair(p.epsilon);
        const PdPair* ce = empty_phi_pair(c_.epsilon);
        const PdPair* cphi = nullptr;
        for (const auto& q : c_.epsilon) {
            if (!q.phi) continue;
            if (cphi) return fail("{($Θ';∅)} ⊔ {(Θ;Φ)}", "Φ", "more than one polynomial variable");
            cphi = &q;
        }
        std::size_t inner = pe ? pe->theta.size() : 0;
        std::size_t outer = ce ? ce->theta.size() : 0;
        if (inner != outer) return fail("{($Θ';∅)} ⊔ {(Θ;Φ)}", "Θ");
        if (pe) {
            for (const auto& a : pe->theta) {
                const Assign* b = ce ? zone_find(ce->theta, a.var) : nullptr;
                if (!b || !alpha_eq(b->type, par(a.type))) return fail("{($Θ';∅)}", "Θ", *a.var);
            }
        }
        for (const auto& a : p.gamma) {
            const Assign* b = nullptr;
            if (cphi) b = cphi->phi->var == a.var ? &*cphi->phi : zone_find(cphi->theta, a.var);
            if (!b) return fail("Γ ⊆ Θ ∪ Φ", "Γ", *a.var);
            if (!alpha_eq(b->type, a.type)) return fail("Γ ⊆ Θ ∪ Φ", "type", *a.var);
        }
        if (cphi && !cphi->theta.empty() && !occurs_free(c_.subject, cphi->phi->var))
            return fail("Θ ≠ ∅ ⇒ dom(Φ)∩FV(M) ≠ ∅", "Φ", *cphi->phi->var);
        return std::nullopt;
    }

    std::optional<Violation> forall_i() {
        const Judgment& p = prem(0);
        if (c_.type->kind != FKind::Forall) return fail("M : ∀α.L", "type");
        if (!alpha_eq(c_.type->a, p.type)) return fail("M : L", "type");
        if (!alpha_eq(c_.subject, p.subject)) return fail("same subject", "subject");
        if (!same_contexts(p, c_)) return fail("same context", "context");
        Symbol al = c_.type->name;
        auto bad = [&](const Zone& z) {
            for (const auto& a : z)
                if (has_ftv(a.type, al)) return a.var;
            return Symbol(nullptr);
        };
        if (Symbol s = bad(c_.gamma)) return fail("α not free in Γ, Δ and E", "Γ", *s);
        if (Symbol s = bad(c_.delta)) return fail("α not free in Γ, Δ and E", "Δ", *s);
        for (const auto& q : c_.epsilon) {
            if (Symbol s = bad(q.theta)) return fail("α not free in Γ, Δ and E", "Θ", *s);
            if (q.phi && has_ftv(q.phi->type, al)) return fail("α not free in Γ, Δ and E", "Φ", *q.phi->var);
        }
        return std::nullopt;
    }

    std::optional<Violation> forall_e() {
        const Judgment& p = prem(0);
        if (p.type->kind != FKind::Forall) return fail("M : ∀α.L", "type");
        if (!alpha_eq(c_.subject, p.subject)) return fail("same subject", "subject");
        if (!same_contexts(p, c_)) return fail("same context", "context");
        if (n_.instance) {
            if (!is_linear(n_.instance)) return fail("L' linear", "type", print_formula(n_.instance));
            if (!alpha_eq(subst_type(p.type->a, p.type->name, n_.instance), c_.type))
                return fail("L{L'/α}", "type");
            return std::nullopt;
        }
        if (!match_instance(p.type->a, p.type->name, c_.type)) return fail("L{L'/α} with L' linear", "type");
        return std::nullopt;
    }
};

}  // namespace

std::optional<Violation> check_judgment(const Judgment& j) {
    for (const auto& a : j.gamma)
        if (!is_linear(a.type)) return Violation{"judgment", "Γ contains linear assignments x:L", "Γ", *a.var};
    int empties = 0;
    for (const auto& p : j.epsilon)
        if (!p.phi) ++empties;
    if (empties > 1) return Violation{"judgment", "only one Φi can be ∅", "E", ""};
    std::unordered_set<Symbol> seen;
    for (auto& [x, z] : domain(j))
        if (!seen.insert(x).second) return Violation{"judgment", "disjoint domains", zone_label(z), *x};
    return std::nullopt;
}

std::optional<Violation> check_rule(const DerivNode& node) { return RuleChecker(node).run(); }

CheckResult check_derivation(const Deriv& d) { return check_derivation(d, {}); }

void collect_nodes(const Deriv& d, std::unordered_set<const DerivNode*>& out) {
    std::vector<const DerivNode*> stack{d.get()};
    while (!stack.empty()) {
        const DerivNode* n = stack.back();
        stack.pop_back();
        if (!out.insert(n).second) continue;
        for (const auto& p : n->premises) stack.push_back(p.get());
    }
}

CheckResult check_derivation(const Deriv& d, const std::unordered_set<const DerivNode*>& trusted) {
    std::unordered_set<const DerivNode*> done;
    std::optional<Violation> bad;
    std::function<bool(const Deriv&)> go = [&](const Deriv& n) -> bool {
        if (done.count(n.get()) || trusted.count(n.get())) return true;
        for (const auto& p : n->premises)
            if (!go(p)) return false;
        if (auto v = check_rule(*n)) {
            bad = v;
            if (bad->detail.empty()) bad->detail = print_judgment(n->judgment);
            return false;
        }
        done.insert(n.get());
        return true;
    };
    CheckResult r;
    r.ok = go(d);
    if (r.ok)
        r.judgment = d->judgment;
    else
        r.violation = bad;
    return r;
}

std::uint64_t depth(const Deriv& d) {
    std::unordered_map<const DerivNode*, std::uint64_t> memo;
    std::function<std::uint64_t(const Deriv&)> go = [&](const Deriv& n) -> std::uint64_t {
        auto it = memo.find(n.get());
        if (it != memo.end()) return it->second;
        std::uint64_t best = 0;
        for (const auto& p : n->premises) best = std::max(best, go(p));
        if (n->rule == Rule::Par || n->rule == Rule::Bang) ++best;
        memo[n.get()] = best;
        return best;
    };
    return go(d);
}

std::uint64_t deriv_size(const Deriv& d) {
    std::unordered_map<const DerivNode*, std::uint64_t> memo;
    constexpr std::uint64_t cap = UINT64_MAX / 4;
    std::function<std::uint64_t(const Deriv&)> go = [&](const Deriv& n) -> std::uint64_t {
        auto it = memo.find(n.get());
        if (it != memo.end()) return it->second;
        std::uint64_t s = 1;
        for (const auto& p : n->premises) s = std::min(cap, s + go(p));
        memo[n.get()] = s;
        return s;
    };
    return go(d);
}

std::uint64_t deriv_dag_size(const Deriv& d) {
    std::unordered_set<const DerivNode*> seen;
    std::function<void(const Deriv&)> go = [&](const Deriv& n) {
        if (!seen.insert(n.get()).second) return;
        for (const auto& p : n->premises) go(p);
    };
    go(d);
    return seen.size();
}

// ------------------------------------------------------------ printing

namespace {

Zone sorted_by_name(const Zone& z) {
    Zone s = z;
    std::sort(s.begin(), s.end(), [](const Assign& a, const Assign& b) { return *a.var < *b.var; });
    return s;
}

std::string print_zone(const Zone& z) {
    std::string out;
    for (const auto& a : sorted_by_name(z)) {
        if (!out.empty()) out += ", ";
        out += *a.var + ":" + print_formula(a.type);
    }
    return out;
}

}  // namespace

std::string print_judgment(const Judgment& j) {
    std::string e;
    for (const auto& p : j.epsilon) {
        if (!e.empty()) e += ", ";
        e += "(" + print_zone(p.theta) + "; " + (p.phi ? *p.phi->var + ":" + print_formula(p.phi->type) : "") + ")";
    }
    return print_zone(j.gamma) + " ; " + print_zone(j.delta) + " ; {" + e + "} |- " + print_term(j.subject) + " : " +
           print_formula(j.type);
}

// ---------------------------------------------------------------- JSON

namespace {

using nlohmann::json;

json zone_json(const Zone& z) {
    json a = json::array();
    for (const auto& x : sorted_by_name(z)) a.push_back({{"var", *x.var}, {"type", print_formula(x.type)}});
    return a;
}

Zone zone_from(const json& a) {
    Zone z;
    for (const auto& x : a) zone_insert(z, {intern(x.at("var").get<std::string>()), parse_formula(x.at("type"))});
    return z;
}

json node_tree(const Deriv& d) {
    json prem = json::array();
    for (const auto& p : d->premises) prem.push_back(node_tree(p));
    json n = {{"rule", rule_name(d->rule)}, {"judgment", judgment_to_json(d->judgment)}, {"premises", prem}};
    if (d->instance) n["instance"] = print_formula(d->instance);
    return n;
}

Deriv node_from_tree(const json& j) {
    auto r = parse_rule(j.at("rule").get<std::string>());
    if (!r) throw std::runtime_error("unknown rule " + j.at("rule").dump());
    std::vector<Deriv> prem;
    for (const auto& p : j.at("premises")) prem.push_back(node_from_tree(p));
    Formula inst = j.contains("instance") ? parse_formula(j["instance"]) : nullptr;
    return make_deriv(*r, judgment_from_json(j.at("judgment")), std::move(prem), inst);
}

class DagWriter {
public:
    json terms = json::array(), formulas = json::array(), nodes = json::array();

    std::size_t term(const Term& t) {
        auto it = tid_.find(t.get());
        if (it != tid_.end()) return it->second;
        json e;
        switch (t->kind) {
            case TermKind::Var:
                e = t->bound ? json{{"bv", t->index}} : json{{"fv", *t->name}};
                break;
            case TermKind::Abs: {
                std::size_t b = term(t->left);
                e = {{"abs", {t->name ? *t->name : std::string("x"), b}}};
                break;
            }
            case TermKind::App: {
                std::size_t f = term(t->left);
                std::size_t a = term(t->right);
                e = {{"app", {f, a}}};
                break;
            }
        }
        terms.push_back(std::move(e));
        return tid_[t.get()] = terms.size() - 1;
    }

    std::size_t formula(const Formula& f) {
        auto it = fid_.find(f.get());
        if (it != fid_.end()) return it->second;
        json e;
        switch (f->kind) {
            case FKind::TVar: e = {{"tv", *f->name}}; break;
            case FKind::Lin: e = {{"lin", {formula(f->a), formula(f->b)}}}; break;
            case FKind::Eager: e = {{"eager", {formula(f->a), formula(f->b)}}}; break;
            case FKind::Forall: e = {{"forall", {*f->name, formula(f->a)}}}; break;
            case FKind::Bang: e = {{"bang", formula(f->a)}}; break;
            case FKind::Par: e = {{"par", formula(f->a)}}; break;
        }
        formulas.push_back(std::move(e));
        return fid_[f.get()] = formulas.size() - 1;
    }

    json zone(const Zone& z) {
        json a = json::array();
        for (const auto& x : sorted_by_name(z)) a.push_back({*x.var, formula(x.type)});
        return a;
    }

    std::size_t node(const Deriv& d) {
        auto it = nid_.find(d.get());
        if (it != nid_.end()) return it->second;
        json prem = json::array();
        for (const auto& p : d->premises) prem.push_back(node(p));
        const Judgment& j = d->judgment;
        json eps = json::array();
        for (const auto& p : j.epsilon)
            eps.push_back({{"theta", zone(p.theta)}, {"phi", p.phi ? json{*p.phi->var, formula(p.phi->type)} : json()}});
        json n = {{"rule", rule_name(d->rule)}, {"gamma", zone(j.gamma)}, {"delta", zone(j.delta)},
                  {"epsilon", eps},             {"subject", term(j.subject)}, {"type", formula(j.type)},
                  {"premises", prem}};
        if (d->instance) n["instance"] = formula(d->instance);
        nodes.push_back(std::move(n));
        return nid_[d.get()] = nodes.size() - 1;
    }

private:
    std::unordered_map<const TermNode*, std::size_t> tid_;
    std::unordered_map<const FormulaNode*, std::size_t> fid_;
    std::unordered_map<const DerivNode*, std::size_t> nid_;
};

Deriv dag_read(const json& j) {
    std::vector<Term> terms;
    for (const auto& e : j.at("terms")) {
        if (e.contains("bv"))
            terms.push_back(mk_bound(e["bv"].get<std::uint32_t>()));
        else if (e.contains("fv"))
            terms.push_back(mk_free(e["fv"].get<std::string>()));
        else if (e.contains("abs"))
            terms.push_back(mk_abs_raw(intern(e["abs"][0].get<std::string>()), terms.at(e["abs"][1].get<std::size_t>())));
        else
            terms.push_back(mk_app(terms.at(e["app"][0].get<std::size_t>()), terms.at(e["app"][1].get<std::size_t>())));
    }
    std::vector<Formula> fs;
    auto F = [&](const json& i) { return fs.at(i.get<std::size_t>()); };
    for (const auto& e : j.at("formulas")) {
        if (e.contains("tv"))
            fs.push_back(tvar(e["tv"].get<std::string>()));
        else if (e.contains("lin"))
            fs.push_back(lin(F(e["lin"][0]), F(e["lin"][1])));
        else if (e.contains("eager"))
            fs.push_back(eager(F(e["eager"][0]), F(e["eager"][1])));
        else if (e.contains("forall"))
            fs.push_back(forall(e["forall"][0].get<std::string>(), F(e["forall"][1])));
        else if (e.contains("bang"))
            fs.push_back(bang(F(e["bang"])));
        else
            fs.push_back(par(F(e["par"])));
    }
    auto Z = [&](const json& a) {
        Zone z;
        for (const auto& x : a) zone_insert(z, {intern(x[0].get<std::string>()), F(x[1])});
        return z;
    };
    std::vector<Deriv> nodes;
    for (const auto& n : j.at("nodes")) {
        Judgment jg;
        jg.gamma = Z(n.at("gamma"));
        jg.delta = Z(n.at("delta"));
        for (const auto& p : n.at("epsilon")) {
            PdPair q{Z(p.at("theta")), std::nullopt};
            if (!p.at("phi").is_null()) q.phi = Assign{intern(p["phi"][0].get<std::string>()), F(p["phi"][1])};
            jg.epsilon.push_back(std::move(q));
        }
        canonicalize(jg.epsilon);
        jg.subject = terms.at(n.at("subject").get<std::size_t>());
        jg.type = F(n.at("type"));
        std::vector<Deriv> prem;
        for (const auto& i : n.at("premises")) prem.push_back(nodes.at(i.get<std::size_t>()));
        auto r = parse_rule(n.at("rule").get<std::string>());
        if (!r) throw std::runtime_error("unknown rule " + n.at("rule").dump());
        nodes.push_back(make_deriv(*r, std::move(jg), std::move(prem), n.contains("instance") ? F(n["instance"]) : nullptr));
    }
    return nodes.at(j.at("root").get<std::size_t>());
}

}  // namespace

json judgment_to_json(const Judgment& j) {
    json eps = json::array();
    for (const auto& p : j.epsilon) {
        json phi = p.phi ? json{{"var", *p.phi->var}, {"type", print_formula(p.phi->type)}} : json();
        eps.push_back({{"theta", zone_json(p.theta)}, {"phi", phi}});
    }
    return {{"gamma", zone_json(j.gamma)},
            {"delta", zone_json(j.delta)},
            {"epsilon", eps},
            {"subject", print_term(j.subject)},
            {"type", print_formula(j.type)}};
}

Judgment judgment_from_json(const json& j) {
    Judgment r;
    r.gamma = zone_from(j.at("gamma"));
    r.delta = zone_from(j.at("delta"));
    for (const auto& p : j.at("epsilon")) {
        PdPair q{zone_from(p.at("theta")), std::nullopt};
        if (!p.at("phi").is_null())
            q.phi = Assign{intern(p["phi"].at("var").get<std::string>()), parse_formula(p["phi"].at("type"))};
        r.epsilon.push_back(std::move(q));
    }
    canonicalize(r.epsilon);
    r.subject = parse_term(j.at("subject").get<std::string>());
    r.type = parse_formula(j.at("type").get<std::string>());
    return r;
}

json derivation_to_json(const Deriv& d, std::uint64_t dag_threshold) {
    if (deriv_size(d) <= dag_threshold) {
        json n = node_tree(d);
        n["schema"] = 1;
        return n;
    }
    DagWriter w;
    std::size_t root = w.node(d);
    return {{"schema", 1},          {"format", "dag"},      {"terms", std::move(w.terms)},
            {"formulas", std::move(w.formulas)}, {"nodes", std::move(w.nodes)}, {"root", root}};
}

Deriv derivation_from_json(const json& j) {
    if (j.contains("format") && j["format"] == "dag") return dag_read(j);
    return node_from_tree(j);
}

// ------------------------------------------------------------- weakening

namespace {

Judgment add_to(Judgment j, ZoneKind zone, const Assign& a, Symbol owner) {
    switch (zone) {
        case ZoneKind::Gamma:
            if (!is_linear(a.type)) throw WeakenError("weakening Γ with a modal type");
            zone_insert(j.gamma, a);
            break;
        case ZoneKind::Delta:
            zone_insert(j.delta, a);
            break;
        case ZoneKind::Theta: {
            PdPair* target = nullptr;
            for (auto& p : j.epsilon)
                if ((!owner && !p.phi) || (owner && p.phi && p.phi->var == owner)) target = &p;
            if (!target) {
                if (owner) throw WeakenError("no pair owned by " + *owner);
                j.epsilon.push_back(PdPair{{}, std::nullopt});
                target = &j.epsilon.back();
            }
            zone_insert(target->theta, a);
            canonicalize(j.epsilon);
            break;
        }
        case ZoneKind::Phi:
            if (phi_pair(j.epsilon, a.var)) throw WeakenError("polynomial variable already present");
            j.epsilon.push_back(PdPair{{}, a});
            canonicalize(j.epsilon);
            break;
    }
    return j;
}

bool has_phi(const Judgment& j, Symbol y) { return phi_pair(j.epsilon, y) != nullptr; }

Deriv rebuild(const Deriv& d, ZoneKind zone, const Assign& a, Symbol owner, std::vector<Deriv> prem) {
    return make_deriv(d->rule, add_to(d->judgment, zone, a, owner), std::move(prem), d->instance);
}

}  // namespace

Deriv weaken(const Deriv& d, ZoneKind zone, const Assign& a, Symbol owner) {
    const Judgment& j = d->judgment;
    switch (d->rule) {
        case Rule::Ax:
            return rebuild(d, zone, a, owner, {});
        case Rule::Par:
            if (zone == ZoneKind::Theta && owner) throw WeakenError("$ conclusion pairs with Φ have empty Θ");
            return rebuild(d, zone, a, owner, d->premises);
        case Rule::Bang: {
            if (zone == ZoneKind::Gamma || zone == ZoneKind::Delta) return rebuild(d, zone, a, owner, d->premises);
            if (zone == ZoneKind::Theta && owner && occurs_free(j.subject, owner))
                return rebuild(d, zone, a, owner, d->premises);
            if (zone == ZoneKind::Phi) {
                for (const auto& q : j.epsilon)
                    if (q.phi) throw WeakenError("! conclusion already has a polynomial variable");
                return rebuild(d, zone, a, owner, d->premises);
            }
            throw WeakenError("! box cannot absorb an elementary assumption here");
        }
        case Rule::ForallI:
            if (has_ftv(a.type, d->judgment.type->name)) throw WeakenError("type variable capture at ∀I");
            [[fallthrough]];
        case Rule::ForallE:
        case Rule::LinI:
        case Rule::LinIPar:
        case Rule::LinIBang:
        case Rule::EagerI:
            return rebuild(d, zone, a, owner, {weaken(d->premises[0], zone, a, owner)});
        case Rule::Contr: {
            Symbol inner = owner;
            if (zone == ZoneKind::Theta && owner) {
                auto cands = contraction_candidates(d->premises[0]->judgment, j);
                for (const auto& k : cands)
                    if (k.z == owner) inner = k.x;
            }
            return rebuild(d, zone, a, owner, {weaken(d->premises[0], zone, a, inner)});
        }
        case Rule::LinE:
        case Rule::LinEBang:
        case Rule::EagerE: {
            const Deriv& m = d->premises[0];
            const Deriv& n = d->premises[1];
            std::vector<int> order;
            if (d->rule == Rule::EagerE) {
                if (zone == ZoneKind::Theta && !owner) order = {1, 0};
                else order = {0};
            } else if (d->rule == Rule::LinEBang) {
                order = zone == ZoneKind::Theta ? std::vector<int>{1} : std::vector<int>{1, 0};
            } else {
                order = {1, 0};
            }
            std::string why = "no premise admits the assumption";
            for (int side : order) {
                const Deriv& p = side == 0 ? m : n;
                if (zone == ZoneKind::Theta && owner && !has_phi(p->judgment, owner)) continue;
                try {
                    Deriv w = weaken(p, zone, a, owner);
                    std::vector<Deriv> prem = side == 0 ? std::vector<Deriv>{w, n} : std::vector<Deriv>{m, w};
                    return rebuild(d, zone, a, owner, std::move(prem));
                } catch (const WeakenError& e) {
                    why = e.what();
                }
            }
            throw WeakenError(why);
        }
    }
    throw WeakenError("unknown rule");
}

// ------------------------------------------------------------- System F

namespace {

FTerm fnode(FKindTerm k, Symbol name, Formula type, FTerm a = nullptr, FTerm b = nullptr) {
    auto n = std::make_shared<FTermNode>();
    n->kind = k;
    n->name = name;
    n->type = std::move(type);
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

bool f_occurs(const FTerm& t, Symbol x) {
    switch (t->kind) {
        case FKindTerm::Var: return t->name == x;
        case FKindTerm::Lam: return t->name != x && f_occurs(t->a, x);
        case FKindTerm::App: return f_occurs(t->a, x) || f_occurs(t->b, x);
        case FKindTerm::TLam:
        case FKindTerm::TApp: return f_occurs(t->a, x);
    }
    return false;
}

FTerm f_rename(const FTerm& t, Symbol x, Symbol z) {
    switch (t->kind) {
        case FKindTerm::Var: return t->name == x ? fnode(FKindTerm::Var, z, nullptr) : t;
        case FKindTerm::Lam:
            if (t->name == x || !f_occurs(t->a, x)) return t;
            if (t->name == z) throw std::runtime_error("erase_derivation: binder capture while fusing " + *x);
            return fnode(FKindTerm::Lam, t->name, t->type, f_rename(t->a, x, z));
        case FKindTerm::App: return fnode(FKindTerm::App, nullptr, nullptr, f_rename(t->a, x, z), f_rename(t->b, x, z));
        case FKindTerm::TLam:
        case FKindTerm::TApp: return fnode(t->kind, t->name, t->type, f_rename(t->a, x, z));
    }
    return t;
}

}  // namespace

std::vector<Assign> erase_judgment_context(const Judgment& j) {
    std::vector<Assign> out;
    for (const auto& a : j.gamma) out.push_back({a.var, erase_to_F(a.type)});
    for (const auto& a : j.delta) out.push_back({a.var, erase_to_F(a.type)});
    for (const auto& p : j.epsilon) {
        for (const auto& a : p.theta) out.push_back({a.var, erase_to_F(a.type)});
        if (p.phi) out.push_back({p.phi->var, erase_to_F(p.phi->type)});
    }
    return out;
}

FTyping erase_derivation(const Deriv& d) {
    std::unordered_map<const DerivNode*, FTerm> memo;
    std::function<FTerm(const Deriv&)> go = [&](const Deriv& n) -> FTerm {
        auto it = memo.find(n.get());
        if (it != memo.end()) return it->second;
        const Judgment& c = n->judgment;
        FTerm r;
        switch (n->rule) {
            case Rule::Ax:
                r = fnode(FKindTerm::Var, c.subject->name, nullptr);
                break;
            case Rule::Contr: {
                auto cands = contraction_candidates(n->premises[0]->judgment, c);
                if (cands.empty()) throw std::runtime_error("erase_derivation: malformed contraction");
                r = go(n->premises[0]);
                const Term& ps = n->premises[0]->judgment.subject;
                for (const auto& k : cands) {
                    if (!phi_pair(c.epsilon, k.z)) continue;
                    Term zt = mk_free(k.z);
                    if (!alpha_eq(substitute(ps, {{*k.x, zt}, {*k.y, zt}}), c.subject)) continue;
                    r = f_rename(f_rename(r, k.x, k.z), k.y, k.z);
                    break;
                }
                break;
            }
            case Rule::LinI:
            case Rule::LinIPar:
            case Rule::LinIBang:
            case Rule::EagerI: {
                auto x = binder_of(n->premises[0]->judgment, c);
                if (!x) throw std::runtime_error("erase_derivation: malformed introduction");
                r = fnode(FKindTerm::Lam, *x, erase_to_F(c.type->a), go(n->premises[0]));
                break;
            }
            case Rule::LinE:
            case Rule::LinEBang:
            case Rule::EagerE:
                r = fnode(FKindTerm::App, nullptr, nullptr, go(n->premises[0]), go(n->premises[1]));
                break;
            case Rule::Par:
            case Rule::Bang:
                r = go(n->premises[0]);
                break;
            case Rule::ForallI:
                r = fnode(FKindTerm::TLam, c.type->name, nullptr, go(n->premises[0]));
                break;
            case Rule::ForallE: {
                const Formula& pt = n->premises[0]->judgment.type;
                Formula inst = n->instance;
                if (!inst) {
                    auto m = match_instance(pt->a, pt->name, c.type);
                    if (!m) throw std::runtime_error("erase_derivation: no ∀E instance");
                    inst = *m;
                }
                r = fnode(FKindTerm::TApp, nullptr, erase_to_F(inst), go(n->premises[0]));
                break;
            }
        }
        memo[n.get()] = r;
        return r;
    };
    return FTyping{erase_judgment_context(d->judgment), go(d), erase_to_F(d->judgment.type)};
}

Term strip_types(const FTerm& t) {
    switch (t->kind) {
        case FKindTerm::Var: return mk_free(t->name);
        case FKindTerm::Lam: return mk_abs_raw(t->name, close_var(strip_types(t->a), t->name));
        case FKindTerm::App: return mk_app(strip_types(t->a), strip_types(t->b));
        case FKindTerm::TLam:
        case FKindTerm::TApp: return strip_types(t->a);
    }
    return nullptr;
}

std::string print_fterm(const FTerm& t) {
    switch (t->kind) {
        case FKindTerm::Var: return *t->name;
        case FKindTerm::Lam: return "(\\" + *t->name + ":" + print_ftype(t->type) + ". " + print_fterm(t->a) + ")";
        case FKindTerm::App: return "(" + print_fterm(t->a) + " " + print_fterm(t->b) + ")";
        case FKindTerm::TLam: return "(/\\" + *t->name + ". " + print_fterm(t->a) + ")";
        case FKindTerm::TApp: return "(" + print_fterm(t->a) + " [" + print_ftype(t->type) + "])";
    }
    return "?";
}

}  // namespace walt
