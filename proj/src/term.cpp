#include "walt/term.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <mutex>
#include <unordered_set>

namespace walt {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a * 0x9E3779B97F4A7C15ULL ^ (b + 0x7F4A7C159E3779B9ULL + (a << 6) + (a >> 2));
    x ^= x >> 31;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 29;
    return x;
}

constexpr std::uint64_t kVarTag = 0x1234567ULL;
constexpr std::uint64_t kBoundTag = 0x7654321ULL;
constexpr std::uint64_t kAbsTag = 0xABCDEFULL;
constexpr std::uint64_t kAppTag = 0xFEDCBAULL;

bool eligible_here(const TermNode& n) {
    if (n.kind != TermKind::App || !n.left->is_abs()) return false;
    unsigned k = n.left->left->uses_of(0);
    if (k == 0) return true;
    if (!n.right->is_value()) return false;
    if (k == 1) return true;
    return n.right->fv_count() <= 1;
}

}  // namespace

Symbol intern(const std::string& name) {
    static std::mutex mu;
    static std::unordered_set<std::string> table;
    std::lock_guard<std::mutex> lock(mu);
    return &*table.insert(name).first;
}

unsigned TermNode::fv_count() const {
    unsigned c = name_count;
    for (auto u : uses)
        if (u) ++c;
    return std::min(c, 2u);
}

Term mk_free(Symbol name) {
    auto n = std::make_shared<TermNode>();
    n->kind = TermKind::Var;
    n->name = name;
    n->hash = mix(kVarTag, std::hash<std::string>{}(*name));
    n->name_count = 1;
    n->one_name = name;
    return n;
}

Term mk_free(const std::string& name) { return mk_free(intern(name)); }

Term mk_bound(std::uint32_t index) {
    auto n = std::make_shared<TermNode>();
    n->kind = TermKind::Var;
    n->bound = true;
    n->index = index;
    n->hash = mix(kBoundTag, index);
    n->loose = index + 1;
    n->uses.assign(index + 1, 0);
    n->uses[index] = 1;
    return n;
}

Term mk_abs_raw(Symbol hint, Term body) {
    auto n = std::make_shared<TermNode>();
    n->kind = TermKind::Abs;
    n->name = hint;
    n->size = body->size + 1;
    n->hash = mix(kAbsTag, body->hash);
    n->loose = body->loose > 0 ? body->loose - 1 : 0;
    if (body->uses.size() > 1) n->uses.assign(body->uses.begin() + 1, body->uses.end());
    n->name_count = body->name_count;
    n->one_name = body->one_name;
    n->has_redex = body->has_redex;
    n->left = std::move(body);
    return n;
}

Term mk_app(Term f, Term a) {
    auto n = std::make_shared<TermNode>();
    n->kind = TermKind::App;
    n->size = f->size + a->size + 1;
    n->hash = mix(mix(kAppTag, f->hash), a->hash);
    n->loose = std::max(f->loose, a->loose);
    if (n->loose) {
        n->uses.assign(n->loose, 0);
        for (std::size_t i = 0; i < f->uses.size(); ++i) n->uses[i] = f->uses[i];
        for (std::size_t i = 0; i < a->uses.size(); ++i)
            n->uses[i] = static_cast<std::uint8_t>(std::min(2, n->uses[i] + a->uses[i]));
    }
    if (f->name_count == 0) {
        n->name_count = a->name_count;
        n->one_name = a->one_name;
    } else if (a->name_count == 0) {
        n->name_count = f->name_count;
        n->one_name = f->one_name;
    } else if (f->name_count == 1 && a->name_count == 1 && f->one_name == a->one_name) {
        n->name_count = 1;
        n->one_name = f->one_name;
    } else {
        n->name_count = 2;
    }
    n->left = std::move(f);
    n->right = std::move(a);
    n->has_redex = n->left->has_redex || n->right->has_redex || eligible_here(*n);
    return n;
}

Term close_var(const Term& t, Symbol x, std::uint32_t depth) {
    if (t->name_count == 0) return t;
    if (t->name_count == 1 && t->one_name != x) return t;
    switch (t->kind) {
        case TermKind::Var:
            return (!t->bound && t->name == x) ? mk_bound(depth) : t;
        case TermKind::Abs: {
            Term b = close_var(t->left, x, depth + 1);
            return b == t->left ? t : mk_abs_raw(t->name, b);
        }
        case TermKind::App: {
            Term f = close_var(t->left, x, depth);
            Term a = close_var(t->right, x, depth);
            return (f == t->left && a == t->right) ? t : mk_app(f, a);
        }
    }
    return t;
}

Term shift(const Term& t, std::int64_t by, std::uint32_t cutoff) {
    if (by == 0 || t->loose <= cutoff) return t;
    switch (t->kind) {
        case TermKind::Var:
            return mk_bound(static_cast<std::uint32_t>(static_cast<std::int64_t>(t->index) + by));
        case TermKind::Abs:
            return mk_abs_raw(t->name, shift(t->left, by, cutoff + 1));
        case TermKind::App:
            return mk_app(shift(t->left, by, cutoff), shift(t->right, by, cutoff));
    }
    return t;
}

namespace {

Term subst_index(const Term& t, std::uint32_t depth, const Term& arg) {
    if (t->loose <= depth) return t;
    switch (t->kind) {
        case TermKind::Var:
            if (t->index == depth) return shift(arg, depth, 0);
            return mk_bound(t->index - 1);
        case TermKind::Abs:
            return mk_abs_raw(t->name, subst_index(t->left, depth + 1, arg));
        case TermKind::App:
            return mk_app(subst_index(t->left, depth, arg), subst_index(t->right, depth, arg));
    }
    return t;
}

}  // namespace

Term instantiate(const Term& body, const Term& arg) { return subst_index(body, 0, arg); }

Term open_var(const Term& body, Symbol x) { return instantiate(body, mk_free(x)); }

Term var(const std::string& x) { return mk_free(x); }

Term lam(const std::string& x, const Term& body) {
    Symbol s = intern(x);
    return mk_abs_raw(s, close_var(body, s));
}

Term lam(const std::vector<std::string>& xs, const Term& body) {
    Term t = body;
    for (auto it = xs.rbegin(); it != xs.rend(); ++it) t = lam(*it, t);
    return t;
}

Term app(const Term& f, const Term& a) { return mk_app(f, a); }

Term app(const Term& f, const std::vector<Term>& args) {
    Term t = f;
    for (const auto& a : args) t = mk_app(t, a);
    return t;
}

namespace {

void collect_free(const Term& t, std::set<std::string>& out) {
    if (t->name_count == 0) return;
    if (t->name_count == 1) {
        out.insert(*t->one_name);
        return;
    }
    if (t->is_var()) {
        out.insert(*t->name);
    } else if (t->is_abs()) {
        collect_free(t->left, out);
    } else {
        collect_free(t->left, out);
        collect_free(t->right, out);
    }
}

}  // namespace

std::set<std::string> free_vars(const Term& m) {
    std::set<std::string> out;
    collect_free(m, out);
    return out;
}

std::size_t occurrences(const std::string& x, const Term& m) {
    Symbol s = intern(x);
    std::function<std::size_t(const Term&)> go = [&](const Term& t) -> std::size_t {
        if (t->name_count == 0) return 0;
        if (t->name_count == 1 && t->one_name != s) return 0;
        switch (t->kind) {
            case TermKind::Var:
                return (!t->bound && t->name == s) ? 1 : 0;
            case TermKind::Abs:
                return go(t->left);
            case TermKind::App:
                return go(t->left) + go(t->right);
        }
        return 0;
    };
    return go(m);
}

Term substitute(const Term& m, const std::map<std::string, Term>& bindings) {
    std::map<Symbol, Term> by_sym;
    for (const auto& [k, v] : bindings) {
        if (v->loose != 0) throw std::invalid_argument("substitute: replacement is not locally closed");
        by_sym[intern(k)] = v;
    }
    std::function<Term(const Term&)> go = [&](const Term& t) -> Term {
        if (t->name_count == 0) return t;
        if (t->name_count == 1 && !by_sym.count(t->one_name)) return t;
        switch (t->kind) {
            case TermKind::Var: {
                if (t->bound) return t;
                auto it = by_sym.find(t->name);
                return it == by_sym.end() ? t : it->second;
            }
            case TermKind::Abs: {
                Term b = go(t->left);
                return b == t->left ? t : mk_abs_raw(t->name, b);
            }
            case TermKind::App: {
                Term f = go(t->left);
                Term a = go(t->right);
                return (f == t->left && a == t->right) ? t : mk_app(f, a);
            }
        }
        return t;
    };
    return go(m);
}

std::uint64_t size(const Term& m) { return m->size; }

bool alpha_eq(const Term& a, const Term& b) {
    if (a == b) return true;
    if (a->hash != b->hash || a->size != b->size || a->kind != b->kind) return false;
    switch (a->kind) {
        case TermKind::Var:
            return a->bound == b->bound && (a->bound ? a->index == b->index : a->name == b->name);
        case TermKind::Abs:
            return alpha_eq(a->left, b->left);
        case TermKind::App:
            return alpha_eq(a->left, b->left) && alpha_eq(a->right, b->right);
    }
    return false;
}

bool is_value(const Term& m) { return m->is_value(); }

bool is_closed(const Term& m) { return m->loose == 0 && m->name_count == 0; }

std::string fresh_name(const std::string& base, const std::set<std::string>& avoid) {
    if (!avoid.count(base)) return base;
    for (std::size_t i = 1;; ++i) {
        std::string cand = base + std::to_string(i);
        if (!avoid.count(cand)) return cand;
    }
}

// ---------------------------------------------------------------- printing

namespace {

struct Namer {
    std::set<std::string> taken;  // free names plus binders in scope
    std::vector<std::string> scope;

    std::string bind(Symbol hint) {
        std::string base = hint ? *hint : std::string("x");
        if (base.empty()) base = "x";
        std::string n = fresh_name(base, taken);
        taken.insert(n);
        scope.push_back(n);
        return n;
    }
    void unbind() {
        taken.erase(scope.back());
        scope.pop_back();
    }
    const std::string& lookup(std::uint32_t index) const {
        if (index >= scope.size()) throw std::invalid_argument("print_term: term is not locally closed");
        return scope[scope.size() - 1 - index];
    }
};

void print_rec(const Term& t, Namer& nm, std::string& out) {
    switch (t->kind) {
        case TermKind::Var:
            out += t->bound ? nm.lookup(t->index) : *t->name;
            return;
        case TermKind::Abs: {
            out += '\\';
            Term cur = t;
            std::size_t pushed = 0;
            bool first = true;
            while (cur->is_abs()) {
                if (!first) out += ' ';
                first = false;
                out += nm.bind(cur->name);
                ++pushed;
                cur = cur->left;
            }
            out += '.';
            print_rec(cur, nm, out);
            for (std::size_t i = 0; i < pushed; ++i) nm.unbind();
            return;
        }
        case TermKind::App: {
            if (t->left->is_abs()) {
                out += '(';
                print_rec(t->left, nm, out);
                out += ')';
            } else {
                print_rec(t->left, nm, out);
            }
            out += ' ';
            if (t->right->is_var()) {
                print_rec(t->right, nm, out);
            } else {
                out += '(';
                print_rec(t->right, nm, out);
                out += ')';
            }
            return;
        }
    }
}

}  // namespace

std::string print_term(const Term& m) {
    Namer nm;
    nm.taken = free_vars(m);
    std::string out;
    print_rec(m, nm, out);
    return out;
}

// ----------------------------------------------------------------- parsing

namespace {

bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
}

class Parser {
public:
    explicit Parser(const std::string& s) : s_(s) {}

    Term parse_all() {
        Term t = term();
        skip();
        if (pos_ != s_.size()) throw ParseError("unexpected '" + std::string(1, s_[pos_]) + "'", pos_);
        return t;
    }

private:
    const std::string& s_;
    std::size_t pos_ = 0;
    std::vector<Symbol> scope_;

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool at_lambda() {
        skip();
        if (pos_ < s_.size() && s_[pos_] == '\\') return true;
        return s_.compare(pos_, 2, "\xCE\xBB") == 0;
    }
    void eat_lambda() {
        if (s_[pos_] == '\\')
            ++pos_;
        else
            pos_ += 2;
    }
    std::string ident() {
        skip();
        std::size_t start = pos_;
        while (pos_ < s_.size() && ident_char(s_[pos_])) ++pos_;
        if (start == pos_) throw ParseError("expected identifier", pos_);
        return s_.substr(start, pos_ - start);
    }
    bool at_atom() {
        skip();
        return pos_ < s_.size() && (s_[pos_] == '(' || ident_char(s_[pos_]));
    }

    Term term() {
        if (at_lambda()) return abstraction();
        Term t = atom();
        while (true) {
            if (at_atom()) {
                t = mk_app(t, atom());
            } else if (at_lambda()) {
                t = mk_app(t, abstraction());
                break;
            } else {
                break;
            }
        }
        return t;
    }

    Term abstraction() {
        eat_lambda();
        std::vector<Symbol> names;
        while (true) {
            skip();
            if (pos_ < s_.size() && s_[pos_] == '.') break;
            if (pos_ >= s_.size()) throw ParseError("unterminated abstraction", pos_);
            names.push_back(intern(ident()));
        }
        if (names.empty()) throw ParseError("abstraction without binder", pos_);
        ++pos_;
        for (Symbol n : names) scope_.push_back(n);
        Term body = term();
        for (std::size_t i = 0; i < names.size(); ++i) scope_.pop_back();
        for (auto it = names.rbegin(); it != names.rend(); ++it) body = mk_abs_raw(*it, body);
        return body;
    }

    Term atom() {
        skip();
        if (pos_ >= s_.size()) throw ParseError("unexpected end of input", pos_);
        if (s_[pos_] == '(') {
            ++pos_;
            Term t = term();
            skip();
            if (pos_ >= s_.size() || s_[pos_] != ')') throw ParseError("expected ')'", pos_);
            ++pos_;
            return t;
        }
        std::size_t at = pos_;
        std::string id = ident();
        (void)at;
        Symbol s = intern(id);
        for (std::size_t i = scope_.size(); i-- > 0;)
            if (scope_[i] == s) return mk_bound(static_cast<std::uint32_t>(scope_.size() - 1 - i));
        return mk_free(s);
    }
};

}  // namespace

Term parse_term(const std::string& text) { return Parser(text).parse_all(); }

// -------------------------------------------------------------------- JSON

namespace {

nlohmann::json to_json_rec(const Term& t, Namer& nm) {
    switch (t->kind) {
        case TermKind::Var:
            return {{"var", t->bound ? nm.lookup(t->index) : *t->name}};
        case TermKind::Abs: {
            std::string n = nm.bind(t->name);
            nlohmann::json body = to_json_rec(t->left, nm);
            nm.unbind();
            return {{"abs", nlohmann::json::array({n, body})}};
        }
        case TermKind::App:
            return {{"app", nlohmann::json::array({to_json_rec(t->left, nm), to_json_rec(t->right, nm)})}};
    }
    return nullptr;
}

Term from_json_rec(const nlohmann::json& j, std::vector<Symbol>& scope) {
    if (!j.is_object() || j.size() != 1) throw std::invalid_argument("term JSON: expected a one-key object");
    if (j.contains("var")) {
        Symbol s = intern(j.at("var").get<std::string>());
        for (std::size_t i = scope.size(); i-- > 0;)
            if (scope[i] == s) return mk_bound(static_cast<std::uint32_t>(scope.size() - 1 - i));
        return mk_free(s);
    }
    if (j.contains("abs")) {
        const auto& a = j.at("abs");
        Symbol s = intern(a.at(0).get<std::string>());
        scope.push_back(s);
        Term body = from_json_rec(a.at(1), scope);
        scope.pop_back();
        return mk_abs_raw(s, body);
    }
    if (j.contains("app")) {
        const auto& a = j.at("app");
        Term f = from_json_rec(a.at(0), scope);
        Term x = from_json_rec(a.at(1), scope);
        return mk_app(f, x);
    }
    throw std::invalid_argument("term JSON: unknown node " + j.dump());
}

}  // namespace

nlohmann::json term_to_json(const Term& m) {
    Namer nm;
    nm.taken = free_vars(m);
    return to_json_rec(m, nm);
}

Term term_from_json(const nlohmann::json& j) {
    std::vector<Symbol> scope;
    return from_json_rec(j, scope);
}

}  // namespace walt
