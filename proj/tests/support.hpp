#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "walt/combinators.hpp"
#include "walt/reducer.hpp"
#include "walt/term.hpp"

namespace support {

using walt::Term;
using walt::TypedTerm;

// Applies m to the words of args and decodes the normal form.
inline std::optional<std::uint64_t> run_words(const Term& m, const std::vector<std::uint64_t>& args,
                                              std::uint64_t* steps = nullptr) {
    Term t = m;
    for (auto a : args) t = walt::mk_app(t, walt::word_term(a));
    auto r = walt::normalize(t);
    if (steps) *steps = r.steps;
    if (!r.reached_nf) return std::nullopt;
    return walt::decode_word(r.term);
}

inline std::optional<std::uint64_t> run_words(const TypedTerm& m, const std::vector<std::uint64_t>& args,
                                              std::uint64_t* steps = nullptr) {
    return run_words(m.term, args, steps);
}

// \@x1..xn @y1..ys. y_k at safe_fn_type(n, s, m).
inline TypedTerm safe_projection(unsigned n, unsigned s, unsigned m, unsigned k) {
    std::string src = "\\";
    for (unsigned i = 1; i <= n; ++i) src += " @x" + std::to_string(i);
    for (unsigned i = 1; i <= s; ++i) src += " @y" + std::to_string(i);
    src += ". y" + std::to_string(k);
    return walt::elaborate(src, walt::safe_fn_type(n, s, m));
}

// Normal-argument projection: the i-th normal argument rebuilt at depth m.
inline TypedTerm normal_projection(unsigned n, unsigned s, unsigned m, unsigned i) {
    walt::ElabEnv env;
    env.embeds["C"] = walt::lembed(1, 1, walt::coerce(m - 1));
    std::string src = "\\";
    for (unsigned a = 1; a <= n; ++a) src += " @x" + std::to_string(a);
    for (unsigned a = 1; a <= s; ++a) src += " @y" + std::to_string(a);
    src += ". {C} x" + std::to_string(i);
    return walt::elaborate(src, walt::safe_fn_type(n, s, m), env);
}

// ------------------------------------------------------------ naive β

// Named terms with textbook capture-avoiding substitution.
struct Named;
using NamedP = std::shared_ptr<const Named>;
struct Named {
    enum Kind { Var, Lam, App } kind;
    std::string name;
    NamedP a, b;
};

inline NamedP nvar(std::string x) { return std::make_shared<Named>(Named{Named::Var, std::move(x), nullptr, nullptr}); }
inline NamedP nlam(std::string x, NamedP body) {
    return std::make_shared<Named>(Named{Named::Lam, std::move(x), std::move(body), nullptr});
}
inline NamedP napp(NamedP f, NamedP a) { return std::make_shared<Named>(Named{Named::App, "", std::move(f), std::move(a)}); }

inline NamedP to_named(const Term& t, std::vector<std::string>& binders, unsigned& counter) {
    switch (t->kind) {
        case walt::TermKind::Var:
            if (t->bound) return nvar(binders[binders.size() - 1 - t->index]);
            return nvar(*t->name);
        case walt::TermKind::Abs: {
            std::string x = "v" + std::to_string(counter++);
            binders.push_back(x);
            NamedP body = to_named(t->left, binders, counter);
            binders.pop_back();
            return nlam(x, body);
        }
        case walt::TermKind::App: {
            NamedP f = to_named(t->left, binders, counter);
            return napp(f, to_named(t->right, binders, counter));
        }
    }
    return nullptr;
}

inline NamedP to_named(const Term& t) {
    std::vector<std::string> b;
    unsigned c = 0;
    return to_named(t, b, c);
}

inline Term from_named(const NamedP& n) {
    switch (n->kind) {
        case Named::Var: return walt::var(n->name);
        case Named::Lam: return walt::lam(n->name, from_named(n->a));
        case Named::App: return walt::app(from_named(n->a), from_named(n->b));
    }
    return nullptr;
}

inline void nfree(const NamedP& n, std::set<std::string>& bound, std::set<std::string>& out) {
    switch (n->kind) {
        case Named::Var:
            if (!bound.count(n->name)) out.insert(n->name);
            break;
        case Named::Lam: {
            bool had = bound.count(n->name);
            bound.insert(n->name);
            nfree(n->a, bound, out);
            if (!had) bound.erase(n->name);
            break;
        }
        case Named::App:
            nfree(n->a, bound, out);
            nfree(n->b, bound, out);
            break;
    }
}

inline std::set<std::string> nfv(const NamedP& n) {
    std::set<std::string> b, out;
    nfree(n, b, out);
    return out;
}

inline std::size_t ncount(const NamedP& n, const std::string& x) {
    switch (n->kind) {
        case Named::Var: return n->name == x;
        case Named::Lam: return n->name == x ? 0 : ncount(n->a, x);
        case Named::App: return ncount(n->a, x) + ncount(n->b, x);
    }
    return 0;
}

inline NamedP nsubst(const NamedP& m, const std::string& x, const NamedP& n, const std::set<std::string>& fvn,
                     unsigned& counter) {
    switch (m->kind) {
        case Named::Var: return m->name == x ? n : m;
        case Named::App: return napp(nsubst(m->a, x, n, fvn, counter), nsubst(m->b, x, n, fvn, counter));
        case Named::Lam: {
            if (m->name == x) return m;
            if (fvn.count(m->name)) {
                std::string fresh = "r" + std::to_string(counter++);
                NamedP renamed = nsubst(m->a, m->name, nvar(fresh), {fresh}, counter);
                return nlam(fresh, nsubst(renamed, x, n, fvn, counter));
            }
            return nlam(m->name, nsubst(m->a, x, n, fvn, counter));
        }
    }
    return m;
}

struct NaiveStep {
    NamedP result;
    std::size_t occurrences = 0;
    bool arg_is_value = false;
    std::size_t arg_free = 0;
};

// Unrestricted β at the given path; nullopt if no β-redex sits there.
inline std::optional<NaiveStep> naive_beta(const NamedP& m, const std::vector<std::uint8_t>& path, std::size_t i = 0) {
    if (i == path.size()) {
        if (m->kind != Named::App || m->a->kind != Named::Lam) return std::nullopt;
        NaiveStep s;
        const NamedP& lam = m->a;
        s.occurrences = ncount(lam->a, lam->name);
        s.arg_is_value = m->b->kind != Named::App;
        auto fv = nfv(m->b);
        s.arg_free = fv.size();
        unsigned counter = 0;
        s.result = nsubst(lam->a, lam->name, m->b, fv, counter);
        return s;
    }
    if (m->kind == Named::Lam) {
        if (path[i] != 0) return std::nullopt;
        auto r = naive_beta(m->a, path, i + 1);
        if (r) r->result = nlam(m->name, r->result);
        return r;
    }
    if (m->kind == Named::App) {
        auto r = naive_beta(path[i] == 0 ? m->a : m->b, path, i + 1);
        if (r) r->result = path[i] == 0 ? napp(r->result, m->b) : napp(m->a, r->result);
        return r;
    }
    return std::nullopt;
}

// ------------------------------------------------------- random terms

inline Term random_term(std::mt19937_64& rng, unsigned depth, std::vector<std::string>& scope,
                        const std::vector<std::string>& frees = {"a", "b", "c"}) {
    std::uniform_int_distribution<int> pick(0, 9);
    int c = depth == 0 ? 0 : pick(rng);
    if (c < 3) {
        std::vector<std::string> pool = frees;
        pool.insert(pool.end(), scope.begin(), scope.end());
        std::uniform_int_distribution<std::size_t> v(0, pool.size() - 1);
        return walt::var(pool[v(rng)]);
    }
    if (c < 6) {
        std::string x = std::string(1, "xyzuvw"[scope.size() % 6]) + std::to_string(scope.size());
        if (pick(rng) < 3 && !scope.empty()) x = scope.front();
        scope.push_back(x);
        Term body = random_term(rng, depth - 1, scope, frees);
        scope.pop_back();
        return walt::lam(x, body);
    }
    Term f = random_term(rng, depth - 1, scope, frees);
    return walt::app(f, random_term(rng, depth - 1, scope, frees));
}

inline Term random_term(std::mt19937_64& rng, unsigned depth) {
    std::vector<std::string> scope;
    return random_term(rng, depth, scope);
}

// Random term with a supply of redexes: applications of abstractions.
inline Term random_redex_term(std::mt19937_64& rng, unsigned depth) {
    std::vector<std::string> scope;
    Term body = random_term(rng, depth, scope);
    Term arg = random_term(rng, depth - 1, scope);
    std::uniform_int_distribution<int> pick(0, 2);
    std::string x = pick(rng) == 0 ? "a" : "b";
    return walt::app(walt::lam(x, body), arg);
}

}  // namespace support
