#include "walt/formula.hpp"

#include <algorithm>
#include <cctype>

namespace walt {

namespace {

std::vector<Symbol> merge_ftv(const std::vector<Symbol>& x, const std::vector<Symbol>& y) {
    std::vector<Symbol> out;
    out.reserve(x.size() + y.size());
    std::set_union(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(out));
    return out;
}

std::shared_ptr<FormulaNode> node(FKind k) {
    auto n = std::make_shared<FormulaNode>();
    n->kind = k;
    return n;
}

}  // namespace

Formula tvar(Symbol a) {
    auto n = node(FKind::TVar);
    n->name = a;
    n->ftv = {a};
    return n;
}

Formula tvar(const std::string& a) { return tvar(intern(a)); }

Formula lin(Formula a, Formula b) {
    auto n = node(FKind::Lin);
    n->ftv = merge_ftv(a->ftv, b->ftv);
    n->size = a->size + b->size + 1;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

Formula eager(Formula a, Formula b) {
    if (a->kind != FKind::Par) throw FormulaError("the domain of an eager arrow must be $-modal");
    auto n = node(FKind::Eager);
    n->ftv = merge_ftv(a->ftv, b->ftv);
    n->size = a->size + b->size + 1;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

Formula forall(Symbol a, Formula body) {
    if (!is_linear(body)) throw FormulaError("a universal quantification cannot hide a modal type");
    auto n = node(FKind::Forall);
    n->name = a;
    n->ftv = body->ftv;
    n->ftv.erase(std::remove(n->ftv.begin(), n->ftv.end(), a), n->ftv.end());
    n->size = body->size + 1;
    n->a = std::move(body);
    return n;
}

Formula forall(const std::string& a, Formula body) { return forall(intern(a), std::move(body)); }

Formula bang(Formula a) {
    auto n = node(FKind::Bang);
    n->ftv = a->ftv;
    n->size = a->size + 1;
    n->a = std::move(a);
    return n;
}

Formula par(Formula a) {
    auto n = node(FKind::Par);
    n->ftv = a->ftv;
    n->size = a->size + 1;
    n->a = std::move(a);
    return n;
}

Formula pars(Formula a, unsigned n) {
    for (unsigned i = 0; i < n; ++i) a = par(a);
    return a;
}

Formula word_type() {
    static const Formula w = [] {
        Formula al = tvar("a");
        Formula step = lin(al, al);
        return forall("a", lin(bang(step), lin(bang(step), par(step))));
    }();
    return w;
}

bool is_linear(const Formula& a) { return a->kind != FKind::Bang && a->kind != FKind::Par; }

bool has_ftv(const Formula& a, Symbol v) { return std::binary_search(a->ftv.begin(), a->ftv.end(), v); }

namespace {

using Env = std::vector<std::pair<Symbol, Symbol>>;

bool aeq(const Formula& x, const Formula& y, Env& env, bool identity) {
    if (x == y && identity) return true;
    if (x->kind != y->kind || x->size != y->size) return false;
    switch (x->kind) {
        case FKind::TVar: {
            for (std::size_t i = env.size(); i-- > 0;) {
                bool l = env[i].first == x->name;
                bool r = env[i].second == y->name;
                if (l || r) return l && r;
            }
            return x->name == y->name;
        }
        case FKind::Lin:
        case FKind::Eager:
            return aeq(x->a, y->a, env, identity) && aeq(x->b, y->b, env, identity);
        case FKind::Bang:
        case FKind::Par:
            return aeq(x->a, y->a, env, identity);
        case FKind::Forall: {
            env.emplace_back(x->name, y->name);
            bool ok = aeq(x->a, y->a, env, identity && x->name == y->name);
            env.pop_back();
            return ok;
        }
    }
    return false;
}

}  // namespace

bool alpha_eq(const Formula& a, const Formula& b) {
    Env env;
    return aeq(a, b, env, true);
}

std::string fresh_tvar(const std::string& base, const std::set<Symbol>& avoid) {
    if (!avoid.count(intern(base))) return base;
    for (std::size_t i = 1;; ++i) {
        std::string c = base + std::to_string(i);
        if (!avoid.count(intern(c))) return c;
    }
}

namespace {

Formula subst_rec(const Formula& l, Symbol alpha, const Formula& l2) {
    if (!has_ftv(l, alpha)) return l;
    switch (l->kind) {
        case FKind::TVar:
            return l2;
        case FKind::Lin:
            return lin(subst_rec(l->a, alpha, l2), subst_rec(l->b, alpha, l2));
        case FKind::Eager:
            return eager(subst_rec(l->a, alpha, l2), subst_rec(l->b, alpha, l2));
        case FKind::Bang:
            return bang(subst_rec(l->a, alpha, l2));
        case FKind::Par:
            return par(subst_rec(l->a, alpha, l2));
        case FKind::Forall: {
            if (has_ftv(l2, l->name)) {
                std::set<Symbol> avoid(l2->ftv.begin(), l2->ftv.end());
                avoid.insert(l->a->ftv.begin(), l->a->ftv.end());
                avoid.insert(alpha);
                Symbol fresh = intern(fresh_tvar(*l->name, avoid));
                Formula body = subst_rec(l->a, l->name, tvar(fresh));
                return forall(fresh, subst_rec(body, alpha, l2));
            }
            return forall(l->name, subst_rec(l->a, alpha, l2));
        }
    }
    return l;
}

}  // namespace

Formula subst_type(const Formula& l, Symbol alpha, const Formula& l2) {
    if (!is_linear(l2)) throw FormulaError("non-linear-substituent");
    return subst_rec(l, alpha, l2);
}

Formula subst_type(const Formula& l, const std::string& alpha, const Formula& l2) {
    return subst_type(l, intern(alpha), l2);
}

namespace {

struct Matcher {
    Symbol alpha;
    Formula found;
    Env env;

    bool bound_on_right(const Formula& t) const {
        for (const auto& [l, r] : env)
            if (has_ftv(t, r)) return true;
        return false;
    }

    bool go(const Formula& l, const Formula& t, bool shadowed) {
        if (l->kind == FKind::TVar && l->name == alpha && !shadowed) {
            bool rebound = false;
            for (const auto& e : env)
                if (e.first == alpha) rebound = true;
            if (!rebound) {
                if (bound_on_right(t)) return false;
                if (found) return alpha_eq(found, t);
                found = t;
                return true;
            }
        }
        if (l->kind != t->kind) return false;
        switch (l->kind) {
            case FKind::TVar: {
                for (std::size_t i = env.size(); i-- > 0;) {
                    bool a = env[i].first == l->name;
                    bool b = env[i].second == t->name;
                    if (a || b) return a && b;
                }
                return l->name == t->name;
            }
            case FKind::Lin:
            case FKind::Eager:
                return go(l->a, t->a, shadowed) && go(l->b, t->b, shadowed);
            case FKind::Bang:
            case FKind::Par:
                return go(l->a, t->a, shadowed);
            case FKind::Forall: {
                env.emplace_back(l->name, t->name);
                bool ok = go(l->a, t->a, shadowed || l->name == alpha);
                env.pop_back();
                return ok;
            }
        }
        return false;
    }
};

}  // namespace

std::optional<Formula> match_instance(const Formula& l, Symbol alpha, const Formula& target) {
    Matcher m{alpha, nullptr, {}};
    if (!m.go(l, target, false)) return std::nullopt;
    if (!m.found) return tvar(alpha);
    if (!is_linear(m.found)) return std::nullopt;
    return m.found;
}

unsigned par_depth(const Formula& a) {
    unsigned n = 0;
    const FormulaNode* p = a.get();
    while (p->kind == FKind::Par) {
        ++n;
        p = p->a.get();
    }
    return n;
}

Formula strip_pars(const Formula& a) {
    Formula p = a;
    while (p->kind == FKind::Par) p = p->a;
    return p;
}

Formula erase_to_F(const Formula& a) {
    switch (a->kind) {
        case FKind::TVar:
            return a;
        case FKind::Lin:
        case FKind::Eager:
            return lin(erase_to_F(a->a), erase_to_F(a->b));
        case FKind::Forall:
            return forall(a->name, erase_to_F(a->a));
        case FKind::Bang:
        case FKind::Par:
            return erase_to_F(a->a);
    }
    return a;
}

// --------------------------------------------------------------- printing

namespace {

void print_rec(const Formula& a, int ctx, bool abbrev, bool ftype, std::string& out) {
    if (abbrev && a->kind == FKind::Forall && alpha_eq(a, word_type())) {
        out += 'W';
        return;
    }
    switch (a->kind) {
        case FKind::TVar:
            out += *a->name;
            return;
        case FKind::Lin:
        case FKind::Eager: {
            if (ctx >= 1) out += '(';
            print_rec(a->a, 1, abbrev, ftype, out);
            if (ftype)
                out += " -> ";
            else
                out += a->kind == FKind::Lin ? " -o " : " =o ";
            print_rec(a->b, 0, abbrev, ftype, out);
            if (ctx >= 1) out += ')';
            return;
        }
        case FKind::Forall: {
            if (ctx >= 1) out += '(';
            out += "forall";
            Formula cur = a;
            while (cur->kind == FKind::Forall && !(abbrev && alpha_eq(cur, word_type()))) {
                out += ' ';
                out += *cur->name;
                cur = cur->a;
            }
            out += ". ";
            print_rec(cur, 0, abbrev, ftype, out);
            if (ctx >= 1) out += ')';
            return;
        }
        case FKind::Bang:
        case FKind::Par:
            out += a->kind == FKind::Bang ? '!' : '$';
            print_rec(a->a, 2, abbrev, ftype, out);
            return;
    }
}

}  // namespace

std::string print_formula(const Formula& a, bool abbreviate_words) {
    std::string out;
    print_rec(a, 0, abbreviate_words, false, out);
    return out;
}

std::string print_ftype(const Formula& a) {
    std::string out;
    print_rec(a, 0, false, true, out);
    return out;
}

// ---------------------------------------------------------------- parsing

namespace {

class FParser {
public:
    FParser(const std::string& s, std::size_t& pos, const std::map<std::string, Formula>& macros)
        : s_(s), pos_(pos), macros_(macros) {}

    Formula type() {
        skip();
        if (keyword("forall")) {
            std::vector<std::string> vars;
            while (true) {
                skip();
                if (peek('.')) break;
                vars.push_back(ident());
            }
            if (vars.empty()) throw ParseError("forall without variables", pos_);
            ++pos_;
            Formula body = type();
            for (auto it = vars.rbegin(); it != vars.rend(); ++it) body = forall(*it, body);
            return body;
        }
        Formula lhs = prefix();
        skip();
        if (s_.compare(pos_, 2, "-o") == 0) {
            pos_ += 2;
            return lin(lhs, type());
        }
        if (s_.compare(pos_, 2, "=o") == 0) {
            pos_ += 2;
            std::size_t at = pos_;
            Formula rhs = type();
            try {
                return eager(lhs, rhs);
            } catch (const FormulaError& e) {
                throw ParseError(e.what(), at);
            }
        }
        return lhs;
    }

private:
    const std::string& s_;
    std::size_t& pos_;
    const std::map<std::string, Formula>& macros_;

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool peek(char c) {
        skip();
        return pos_ < s_.size() && s_[pos_] == c;
    }
    static bool idc(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\''; }
    bool keyword(const char* kw) {
        std::size_t n = std::char_traits<char>::length(kw);
        if (s_.compare(pos_, n, kw) != 0) return false;
        if (pos_ + n < s_.size() && idc(s_[pos_ + n])) return false;
        pos_ += n;
        return true;
    }
    std::string ident() {
        skip();
        std::size_t st = pos_;
        while (pos_ < s_.size() && idc(s_[pos_])) ++pos_;
        if (st == pos_) throw ParseError("expected type identifier", pos_);
        return s_.substr(st, pos_ - st);
    }
    Formula prefix() {
        skip();
        if (pos_ >= s_.size()) throw ParseError("unexpected end of formula", pos_);
        char c = s_[pos_];
        if (c == '!') {
            ++pos_;
            return bang(prefix());
        }
        if (c == '$') {
            ++pos_;
            return par(prefix());
        }
        if (c == '(') {
            ++pos_;
            Formula t = type();
            if (!peek(')')) throw ParseError("expected ')' in formula", pos_);
            ++pos_;
            return t;
        }
        if (c == '%') {
            ++pos_;
            std::string m = ident();
            auto it = macros_.find(m);
            if (it == macros_.end()) throw ParseError("unknown formula macro %" + m, pos_);
            return it->second;
        }
        std::string id = ident();
        if (id == "W") return word_type();
        if (id == "forall") throw ParseError("quantifier must be parenthesized here", pos_);
        return tvar(id);
    }
};

}  // namespace

Formula parse_formula_at(const std::string& text, std::size_t& pos, const std::map<std::string, Formula>& macros) {
    FParser p(text, pos, macros);
    try {
        return p.type();
    } catch (const FormulaError& e) {
        throw ParseError(e.what(), pos);
    }
}

Formula parse_formula(const std::string& text, const std::map<std::string, Formula>& macros) {
    std::size_t pos = 0;
    Formula f = parse_formula_at(text, pos, macros);
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos != text.size()) throw ParseError("trailing input in formula", pos);
    return f;
}

}  // namespace walt
