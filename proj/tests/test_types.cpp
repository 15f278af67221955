#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unordered_set>

#include "support.hpp"
#include "walt/combinators.hpp"
#include "walt/derivation.hpp"
#include "walt/elaborate.hpp"
#include "walt/formula.hpp"

using namespace walt;

namespace {

Assign as(const std::string& x, Formula t) { return Assign{intern(x), std::move(t)}; }

Judgment judg(Zone g, Zone d, PdContext e, Term subject, Formula type) {
    for (auto* z : {&g, &d}) std::sort(z->begin(), z->end(), [](const Assign& a, const Assign& b) { return a.var < b.var; });
    for (auto& p : e) std::sort(p.theta.begin(), p.theta.end(), [](const Assign& a, const Assign& b) { return a.var < b.var; });
    canonicalize(e);
    return Judgment{std::move(g), std::move(d), std::move(e), std::move(subject), std::move(type)};
}

// ------------------------------------------------ System F checker oracle

struct FCheck {
    std::vector<std::pair<Symbol, Formula>> ctx;
    std::vector<Symbol> tvars;

    Formula lookup(Symbol x) const {
        for (auto it = ctx.rbegin(); it != ctx.rend(); ++it)
            if (it->first == x) return it->second;
        return nullptr;
    }

    // Type of t, or nullptr when ill-typed. Arrows are Lin nodes.
    Formula type_of(const FTerm& t) {
        switch (t->kind) {
            case FKindTerm::Var: return lookup(t->name);
            case FKindTerm::Lam: {
                ctx.emplace_back(t->name, t->type);
                Formula b = type_of(t->a);
                ctx.pop_back();
                return b ? lin(t->type, b) : nullptr;
            }
            case FKindTerm::App: {
                Formula f = type_of(t->a);
                Formula a = type_of(t->b);
                if (!f || !a || f->kind != FKind::Lin) return nullptr;
                return alpha_eq(f->a, a) ? f->b : nullptr;
            }
            case FKindTerm::TLam: {
                for (const auto& [x, ty] : ctx)
                    if (has_ftv(ty, t->name)) return nullptr;
                Formula b = type_of(t->a);
                return b ? forall(t->name, b) : nullptr;
            }
            case FKindTerm::TApp: {
                Formula f = type_of(t->a);
                if (!f || f->kind != FKind::Forall) return nullptr;
                return subst_type(f->a, f->name, t->type);
            }
        }
        return nullptr;
    }
};

bool modal_free(const Formula& f) {
    if (!f) return true;
    if (f->kind == FKind::Bang || f->kind == FKind::Par || f->kind == FKind::Eager) return false;
    return modal_free(f->a) && modal_free(f->b);
}

std::vector<TypedTerm> typed_corpus() {
    std::vector<TypedTerm> out;
    for (std::uint64_t n : {0, 1, 2, 5, 12}) out.push_back(word(n));
    out.push_back(ws0());
    out.push_back(ws1());
    out.push_back(pred_w());
    out.push_back(branch_w());
    out.push_back(coerce(1));
    out.push_back(coerce(2));
    out.push_back(diagonal(1, 2));
    out.push_back(bembed(1, ws0()));
    out.push_back(eembed(1, 1, 0, bembed(1, ws1())));
    out.push_back(rotate(1, 2, 1, support::safe_projection(1, 2, 1, 1)));
    return out;
}

std::set<Symbol> domain_of(const Judgment& j) {
    std::set<Symbol> s;
    for (const auto& a : j.gamma) s.insert(a.var);
    for (const auto& a : j.delta) s.insert(a.var);
    for (const auto& p : j.epsilon) {
        for (const auto& a : p.theta) s.insert(a.var);
        if (p.phi) s.insert(p.phi->var);
    }
    return s;
}

}  // namespace

TEST_CASE("formulas") {
    Formula a = tvar("a");
    CHECK(is_linear(a));
    CHECK_FALSE(is_linear(bang(a)));
    CHECK_FALSE(is_linear(par(a)));
    CHECK(is_linear(forall("a", lin(a, a))));
    CHECK(is_linear(eager(par(a), a)));
    CHECK_THROWS_AS(eager(a, a), FormulaError);
    CHECK_THROWS_AS(forall("a", bang(a)), FormulaError);

    CHECK(alpha_eq(subst_type(a, "a", word_type()), word_type()));
    Formula bound = forall("a", a);
    CHECK(alpha_eq(subst_type(bound, "a", tvar("b")), bound));
    CHECK(alpha_eq(subst_type(lin(a, a), "a", word_type()), lin(word_type(), word_type())));
    CHECK_THROWS_AS(subst_type(a, "a", bang(tvar("b"))), FormulaError);
    // capture avoidance: forall b. a -o b with a := b
    Formula cap = subst_type(forall("b", lin(a, tvar("b"))), "a", tvar("b"));
    REQUIRE(cap->kind == FKind::Forall);
    CHECK(cap->a->a->name == intern("b"));
    CHECK(cap->a->b->name != intern("b"));

    auto inst = match_instance(lin(a, a), intern("a"), lin(word_type(), word_type()));
    REQUIRE(inst);
    CHECK(alpha_eq(*inst, word_type()));

    CHECK(alpha_eq(parse_formula("forall a. !(a -o a) -o !(a -o a) -o $(a -o a)"), word_type()));
    CHECK(alpha_eq(parse_formula("W"), word_type()));
    CHECK(alpha_eq(parse_formula(print_formula(safe_fn_type(1, 2, 3))), safe_fn_type(1, 2, 3)));
    CHECK(print_formula(pars(word_type(), 2)) == "$$W");
    CHECK(par_depth(pars(word_type(), 3)) == 3);
}

TEST_CASE("System F erasure") {
    Formula a = tvar("a"), b = tvar("b");
    CHECK(alpha_eq(erase_to_F(par(a)), erase_to_F(a)));
    CHECK(alpha_eq(erase_to_F(bang(lin(a, b))), lin(a, b)));
    CHECK(alpha_eq(erase_to_F(eager(par(a), b)), lin(a, b)));
    Formula endo = lin(a, a);
    CHECK(alpha_eq(erase_to_F(word_type()), forall("a", lin(endo, lin(endo, endo)))));
    CHECK(print_ftype(erase_to_F(word_type())) == "forall a. (a -> a) -> (a -> a) -> a -> a");
}

TEST_CASE("merge_contexts") {
    Formula A = tvar("a"), B = tvar("b");
    PdContext e{{{as("t1", A)}, as("x", A)}};
    CHECK(pd_eq(merge_contexts(e, {}), e));
    CHECK(pd_eq(merge_contexts(e, {PdPair{}}), e));

    PdContext e2{{{as("t2", B)}, as("x", A)}};
    PdContext m = merge_contexts(e, e2);
    REQUIRE(m.size() == 1);
    CHECK(m[0].theta.size() == 2);

    PdContext e3{{{as("t3", B)}, as("y", B)}};
    CHECK(merge_contexts(e, e3).size() == 2);

    // Φ-less pairs merge too
    PdContext l1{{{as("u", A)}, std::nullopt}}, l2{{{as("v", A)}, std::nullopt}};
    PdContext lm = merge_contexts(l1, l2);
    REQUIRE(lm.size() == 1);
    CHECK(lm[0].theta.size() == 2);

    SUBCASE("commutative and associative where defined") {
        std::mt19937_64 rng(5);
        std::vector<std::string> phis = {"x", "y", "z"};
        auto random_ctx = [&](int tag) {
            PdContext c;
            std::uniform_int_distribution<int> coin(0, 1);
            for (std::size_t i = 0; i < phis.size() + 1; ++i) {
                if (!coin(rng)) continue;
                PdPair p;
                if (coin(rng)) p.theta.push_back(as("t" + std::to_string(tag) + "_" + std::to_string(i), A));
                if (i < phis.size()) p.phi = as(phis[i], A);
                c.push_back(p);
            }
            canonicalize(c);
            return c;
        };
        for (int i = 0; i < 200; ++i) {
            PdContext a = random_ctx(3 * i), b = random_ctx(3 * i + 1), c = random_ctx(3 * i + 2);
            PdContext ab = merge_contexts(a, b), ba = merge_contexts(b, a);
            CHECK(pd_eq(ab, ba));
            CHECK(pd_eq(merge_contexts(ab, c), merge_contexts(a, merge_contexts(b, c))));
        }
    }
}

TEST_CASE("check_rule examples") {
    Formula L = tvar("a");
    Term x = mk_free("x");

    SUBCASE("axiom") {
        Deriv ax = make_deriv(Rule::Ax, judg({as("x", L)}, {}, {}, x, L));
        CHECK_FALSE(check_rule(*ax).has_value());
        Deriv bad = make_deriv(Rule::Ax, judg({as("x", L)}, {}, {}, x, tvar("b")));
        CHECK(check_rule(*bad).has_value());
    }

    SUBCASE("identity derivation") {
        Deriv ax = make_deriv(Rule::Ax, judg({as("x", L)}, {}, {}, x, L));
        Deriv id = make_deriv(Rule::LinI, judg({}, {}, {}, lam("x", var("x")), lin(L, L)), {ax});
        CheckResult r = check_derivation(id);
        CHECK(r.ok);
        CHECK(depth(id) == 0);
        CHECK(depth(ax) == 0);
        CHECK(deriv_size(id) == 2);
    }

    Formula C = tvar("c");
    Deriv yax = make_deriv(Rule::Ax, judg({as("y", C)}, {}, {}, mk_free("y"), C));
    Deriv ybang = make_deriv(Rule::Bang, judg({}, {}, {PdPair{{}, as("y", C)}}, mk_free("y"), bang(C)), {yax});

    SUBCASE("-oE rejects a !-typed argument") {
        REQUIRE_FALSE(check_rule(*ybang).has_value());
        Formula ft = lin(bang(C), L);
        Deriv f = make_deriv(Rule::Ax, judg({as("f", ft)}, {}, {}, mk_free("f"), ft));
        Deriv e = make_deriv(Rule::LinE,
                             judg({as("f", ft)}, {}, {PdPair{{}, as("y", C)}}, app(mk_free("f"), mk_free("y")), L),
                             {f, ybang});
        auto v = check_rule(*e);
        REQUIRE(v);
        CHECK(v->rule == "-oE");
        CHECK(v->condition == "A ≢ !C, for any C");
        // the same premises under -oE! are fine
        Deriv eb = make_deriv(Rule::LinEBang,
                              judg({as("f", ft)}, {}, {PdPair{{}, as("y", C)}}, app(mk_free("f"), mk_free("y")), L),
                              {f, ybang});
        CHECK_FALSE(check_rule(*eb).has_value());
    }

    SUBCASE("! with Θ nonempty needs its Φ variable free in M") {
        Deriv uax = make_deriv(Rule::Ax, judg({as("u", L)}, {}, {}, mk_free("u"), L));
        Deriv box = make_deriv(Rule::Bang, judg({}, {}, {PdPair{{as("u", L)}, as("x", C)}}, mk_free("u"), bang(L)), {uax});
        auto v = check_rule(*box);
        REQUIRE(v);
        CHECK(v->rule == "!");
        CHECK(v->condition == "Θ ≠ ∅ ⇒ dom(Φ)∩FV(M) ≠ ∅");
        CHECK(v->zone == "Φ");
    }

    SUBCASE("modal type in Γ") {
        Deriv bad = make_deriv(Rule::Ax, judg({as("x", bang(L))}, {}, {}, x, bang(L)));
        auto r = check_derivation(bad);
        CHECK_FALSE(r.ok);
        REQUIRE(r.violation);
        CHECK(r.violation->zone == "Γ");
    }

    SUBCASE("=oE argument must have empty Γ") {
        Formula pa = par(L);
        Formula ft = eager(pa, L);
        Deriv f = make_deriv(Rule::Ax, judg({as("f", ft)}, {}, {}, mk_free("f"), ft));
        Deriv inner = make_deriv(Rule::Ax, judg({as("z", L)}, {}, {}, mk_free("z"), L));
        Deriv zbox = make_deriv(Rule::Par, judg({}, {as("z", L)}, {}, mk_free("z"), pa), {inner});
        REQUIRE_FALSE(check_rule(*zbox).has_value());
        Deriv e = make_deriv(Rule::EagerE, judg({as("f", ft)}, {as("z", L)}, {}, app(mk_free("f"), mk_free("z")), L),
                             {f, zbox});
        auto v = check_rule(*e);
        REQUIRE(v);
        CHECK(v->zone == "Δ");
    }
}

TEST_CASE("words and library derivations") {
    for (std::uint64_t n = 0; n <= 32; ++n) {
        const TypedTerm& w = word(n);
        CHECK(check_derivation(w.derivation).ok);
        CHECK(alpha_eq(w.formula, word_type()));
        CHECK(alpha_eq(w.derivation->judgment.subject, w.term));
    }
    CHECK(depth(word(0).derivation) == 1);
    std::uint64_t prev = 0;
    for (unsigned m = 1; m <= 4; ++m) {
        std::uint64_t d = depth(coerce(m).derivation);
        CHECK(d > prev);
        prev = d;
    }
}

TEST_CASE("derivation JSON round trip") {
    for (const auto& t : typed_corpus()) {
        nlohmann::json tree = derivation_to_json(t.derivation);
        Deriv back = derivation_from_json(tree);
        CHECK(check_derivation(back).ok);
        CHECK(alpha_eq(back->judgment.subject, t.term));
        Deriv dag = derivation_from_json(derivation_to_json(t.derivation, 0));
        CHECK(check_derivation(dag).ok);
        CHECK(deriv_size(dag) == deriv_size(t.derivation));
    }
}

TEST_CASE("free variables stay inside the zones") {
    for (const auto& t : typed_corpus()) {
        std::unordered_set<const DerivNode*> nodes;
        collect_nodes(t.derivation, nodes);
        for (const DerivNode* n : nodes) {
            auto dom = domain_of(n->judgment);
            for (const auto& v : free_vars(n->judgment.subject)) CHECK(dom.count(intern(v)));
        }
    }
}

TEST_CASE("erasure type-checks in System F") {
    for (const auto& t : typed_corpus()) {
        FTyping f = erase_derivation(t.derivation);
        CHECK(alpha_eq(strip_types(f.term), t.term));
        FCheck chk;
        for (const auto& a : f.context) chk.ctx.emplace_back(a.var, a.type);
        Formula ty = chk.type_of(f.term);
        REQUIRE_MESSAGE(ty, print_fterm(f.term).substr(0, 300));
        CHECK(alpha_eq(ty, f.type));
        CHECK(alpha_eq(ty, erase_to_F(t.formula)));
        CHECK(modal_free(ty));
    }
}

TEST_CASE("elaborator") {
    TypedTerm id = elaborate("\\x.x", "a -o a");
    CHECK(check_derivation(id.derivation).ok);
    TypedTerm twice = elaborate("\\(f : !(a -o a)). $[\\x. f (f x)]", "!(a -o a) -o $(a -o a)");
    CHECK(check_derivation(twice.derivation).ok);
    // a ! box may depend on one polynomial variable only
    CHECK_THROWS_AS(elaborate("\\(f : !(a -o a)). ![\\x. f (f x)]", "!(a -o a) -o !(a -o a)"), ElabError);
    // a linear variable cannot be used twice
    CHECK_THROWS_AS(elaborate("\\f x. f (f x)", "(a -o a) -o a -o a"), ElabError);
    CHECK_THROWS_AS(elaborate("\\x.", "a -o a"), ElabError);
    ElabEnv env;
    env.embeds["S"] = ws1();
    TypedTerm s = elaborate("\\w. {S} ({S} w)", "W -o W", env);
    CHECK(support::run_words(s, {2}) == 11u);
    CHECK_NOTHROW(verify(s));
}
