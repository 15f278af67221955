#include "walt/combinators.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <sstream>

namespace walt {

namespace {

Formula W() { return word_type(); }
Formula PW(unsigned n) { return pars(word_type(), n); }

std::string boxes(unsigned n, const std::string& inner, char kind = '$') {
    std::string r;
    for (unsigned i = 0; i < n; ++i) (r += kind) += '[';
    r += inner;
    r.append(n, ']');
    return r;
}

// " pre1 pre2 … preN" with an optional binder marker.
std::string names(const std::string& pre, unsigned n, const std::string& mark = "", unsigned from = 1) {
    std::string r;
    for (unsigned i = from; i < from + n; ++i) r += " " + mark + pre + std::to_string(i);
    return r;
}

std::string lam_head(const std::string& binders) { return binders.empty() ? "" : "\\" + binders + ". "; }

TypedTerm build(const std::string& src, const Formula& type, const ElabEnv& env, const std::string& what) {
    try {
        return elaborate(src, type, env);
    } catch (const ElabError& e) {
        throw CombinatorError(what + ": " + e.what());
    }
}

void expect_type(const TypedTerm& t, const Formula& f, const std::string& what) {
    if (!alpha_eq(t.formula, f))
        throw CombinatorError("type mismatch for " + what + ": expected " + print_formula(f) + ", got " +
                              print_formula(t.formula));
}

// Arguments of a chain of arrows.
struct Arrows {
    std::vector<Formula> doms;
    std::vector<bool> eager;
    Formula result;
};

Arrows arrows(const Formula& f, unsigned count) {
    Arrows a;
    Formula cur = f;
    for (unsigned i = 0; i < count; ++i) {
        if (cur->kind != FKind::Lin && cur->kind != FKind::Eager)
            throw CombinatorError("expected " + std::to_string(count) + " arguments in " + print_formula(f));
        a.doms.push_back(cur->a);
        a.eager.push_back(cur->kind == FKind::Eager);
        cur = cur->b;
    }
    a.result = cur;
    return a;
}

unsigned count_arrows(const Formula& f) {
    unsigned n = 0;
    for (Formula cur = f; cur->kind == FKind::Lin || cur->kind == FKind::Eager; cur = cur->b) ++n;
    return n;
}

std::string zero_at(unsigned m) { return boxes(m, "{w0}"); }

ElabEnv base_env() {
    ElabEnv env;
    env.embeds["w0"] = word(0);
    env.embeds["w1"] = word(1);
    return env;
}

std::mutex cache_mu;

}  // namespace

// ------------------------------------------------------------------ types

Formula safe_fn_type(unsigned k, unsigned l, unsigned m) {
    Formula t = PW(m);
    for (unsigned i = 0; i < l; ++i) t = eager(PW(m), t);
    for (unsigned i = 0; i < k; ++i) t = eager(PW(1), t);
    return t;
}

Formula iter_step_type(unsigned n, unsigned s, unsigned m) {
    Formula t = eager(PW(m), PW(m));
    for (unsigned i = 0; i < s; ++i) t = eager(PW(m), t);
    for (unsigned i = 0; i < n; ++i) t = eager(PW(1), t);
    return eager(PW(1), t);
}

Formula tensor_type(const std::vector<Formula>& comps) {
    Symbol a = intern("al");
    Formula t = tvar(a);
    for (auto it = comps.rbegin(); it != comps.rend(); ++it) t = eager(*it, t);
    return forall(a, lin(t, tvar(a)));
}

// ------------------------------------------------------------------ words

Term word_term(std::uint64_t n) {
    Term y = mk_bound(0);
    if (n == 0) return mk_abs_raw(intern("0"), mk_abs_raw(intern("1"), mk_abs_raw(intern("y"), y)));
    std::vector<int> bits;
    for (std::uint64_t v = n; v > 1; v >>= 1) bits.push_back(static_cast<int>(v & 1));
    Term body = mk_app(mk_bound(1), y);
    for (auto it = bits.rbegin(); it != bits.rend(); ++it) body = mk_app(mk_bound(*it ? 1 : 2), body);
    return mk_abs_raw(intern("0"), mk_abs_raw(intern("1"), mk_abs_raw(intern("y"), body)));
}

std::optional<std::uint64_t> decode_word(const Term& t) {
    Term b = t;
    for (int i = 0; i < 3; ++i) {
        if (!b->is_abs()) return std::nullopt;
        b = b->left;
    }
    std::vector<int> digits;  // outermost first
    while (b->is_app()) {
        const Term& f = b->left;
        if (!f->is_var() || !f->bound || (f->index != 1 && f->index != 2)) return std::nullopt;
        digits.push_back(f->index == 1 ? 1 : 0);
        b = b->right;
    }
    if (!b->is_var() || !b->bound || b->index != 0) return std::nullopt;
    if (digits.empty()) return 0;
    if (digits.back() != 1 || digits.size() > 64) return std::nullopt;
    std::uint64_t v = 0;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) v = (v << 1) | static_cast<std::uint64_t>(*it);
    return v;
}

const TypedTerm& word(std::uint64_t n) {
    static std::map<std::uint64_t, TypedTerm> cache;
    {
        std::lock_guard<std::mutex> lk(cache_mu);
        auto it = cache.find(n);
        if (it != cache.end()) return it->second;
    }
    std::string body = "y";
    if (n > 0) {
        body = "1 y";
        std::vector<int> bits;
        for (std::uint64_t v = n; v > 1; v >>= 1) bits.push_back(static_cast<int>(v & 1));
        for (auto it = bits.rbegin(); it != bits.rend(); ++it) body = std::string(*it ? "1" : "0") + " (" + body + ")";
    }
    TypedTerm t = build("\\0 1. $[\\y. " + body + "]", W(), {}, "word");
    std::lock_guard<std::mutex> lk(cache_mu);
    return cache.emplace(n, std::move(t)).first->second;
}

const TypedTerm& ws1() {
    static const TypedTerm t = build("\\n 0 1. (\\z. $[\\y. 1 (z y)]) (n[a] 0 1)", lin(W(), W()), {}, "Ws1");
    return t;
}

const TypedTerm& ws0() {
    static const TypedTerm t = [] {
        ElabEnv env;
        env.macros["S"] = parse_formula("((a -o a) -o (a -o a)) -o (a -o a)");
        return build(
            "\\n 0 1. (\\r. $[r (\\T x. x) (\\g x. 0 (g x))]) "
            "(n[%S] ![\\s T. T (\\x. 0 (s (\\g. g) x))] ![\\s T. T (\\x. 1 (s (\\g. g) x))])",
            lin(W(), W()), env, "Ws0");
    }();
    return t;
}

const TypedTerm& pred_w() {
    static const TypedTerm t = [] {
        ElabEnv env;
        env.macros["St"] = parse_formula("forall b. ((a -o a) -o (a -o a) -o b) -o b");
        return build(
            "\\n 0 1. (\\r. $[\\y. (r (\\z. z (\\x. x) (\\x. x)))[a -o a] (\\p q. q) y]) "
            "(n[%St] ![\\s. s[%St] (\\p f. \\z. z 0 (\\x. p (f x)))] "
            "![\\s. s[%St] (\\p f. \\z. z 1 (\\x. p (f x)))])",
            lin(W(), W()), env, "Pred");
    }();
    return t;
}

const TypedTerm& branch_w() {
    static const TypedTerm t = [] {
        ElabEnv env;
        env.macros["T"] = parse_formula("(a -o a) -o (a -o a) -o (a -o a)");
        return build(
            "\\n y0 y1 0 1. (\\r f0 f1. $[r (\\p q. p) f0 f1]) "
            "(n[%T] ![\\t p q. q] ![\\t p q. q]) (y0[a] 0 1) (y1[a] 0 1)",
            lin(W(), lin(W(), lin(W(), W()))), env, "B");
    }();
    return t;
}

// ---------------------------------------------------------------- tensors

Term tensor(const std::vector<Term>& ms) {
    if (ms.empty()) throw CombinatorError("tensor needs at least one component");
    for (std::size_t i = 0; i < ms.size(); ++i)
        if (!is_closed(ms[i]))
            throw CombinatorError("open-component: tensor component " + std::to_string(i + 1) + " " +
                                  print_term(ms[i]) + " has free variables");
    Symbol z = intern("z");
    Term body = mk_free(z);
    for (const auto& m : ms) body = mk_app(body, m);
    return mk_abs_raw(z, close_var(body, z));
}

Term tensor_match(const std::vector<std::string>& binders, const Term& body) {
    if (binders.empty()) throw CombinatorError("tensor destructor needs at least one binder");
    std::set<std::string> avoid = free_vars(body);
    for (const auto& b : binders) avoid.insert(b);
    std::string w = fresh_name("w", avoid);
    return lam(w, app(var(w), lam(binders, body)));
}

// -------------------------------------------------------------- embedding

TypedTerm bembed(unsigned n, const TypedTerm& m) {
    if (n == 0) throw CombinatorError("bembed needs n >= 1");
    if (m.formula->kind != FKind::Lin) throw CombinatorError("bembed of " + print_formula(m.formula));
    ElabEnv env;
    env.embeds["M"] = m;
    Formula t = eager(pars(m.formula->a, n), pars(m.formula->b, n));
    return build("\\@x. " + boxes(n, "{M} x"), t, env, "bembed");
}

TypedTerm lembed(unsigned n, unsigned p, const TypedTerm& m) {
    Arrows a = arrows(m.formula, p);
    Formula t = pars(a.result, n);
    for (unsigned i = p; i-- > 0;) {
        if (a.eager[i]) throw CombinatorError("lembed expects linear arrows in " + print_formula(m.formula));
        t = lin(pars(a.doms[i], n), t);
    }
    ElabEnv env;
    env.embeds["M"] = m;
    return build(lam_head(names("x", p)) + boxes(n, "{M}" + names("x", p)), t, env, "lembed");
}

TypedTerm lift(unsigned n, const TypedTerm& m, unsigned args) {
    Arrows a = arrows(m.formula, args);
    Formula t = pars(a.result, n);
    std::string binders;
    for (unsigned i = args; i-- > 0;) {
        if (a.eager[i])
            t = eager(pars(a.doms[i], n), t);
        else
            t = lin(pars(a.doms[i], n), t);
    }
    for (unsigned i = 0; i < args; ++i) binders += std::string(" ") + (a.eager[i] ? "@" : "") + "z" + std::to_string(i + 1);
    ElabEnv env;
    env.embeds["M"] = m;
    return build(lam_head(binders) + boxes(n, "{M}" + names("z", args)), t, env, "lift");
}

TypedTerm eembed(unsigned n, unsigned p, unsigned q, const TypedTerm& m) {
    Arrows a = arrows(m.formula, p + q);
    for (unsigned i = 0; i < p; ++i)
        if (!a.eager[i] || !alpha_eq(a.doms[i], PW(1)))
            throw CombinatorError("eembed: normal argument " + std::to_string(i + 1) + " of " +
                                  print_formula(m.formula) + " is not $W");
    for (unsigned i = p; i < p + q; ++i)
        if (!a.eager[i]) throw CombinatorError("eembed: safe argument of " + print_formula(m.formula) + " is not eager");
    Formula t = pars(a.result, n);
    for (unsigned i = p + q; i-- > p;) t = eager(pars(a.doms[i], n), t);
    for (unsigned i = p; i-- > 0;) t = eager(PW(1), t);
    if (p == 0) {
        ElabEnv env;
        env.embeds["M"] = m;
        return build(lam_head(names("z", q, "@")) + boxes(n, "{M}" + names("z", q)), t, env, "eembed");
    }
    ElabEnv env;
    env.embeds["M"] = m;
    env.embeds["BC"] = bembed(1, coerce(n));
    std::string src = "\\" + names("w", p, "@") + names("z", q, "@") + ". (\\" + names("v", p, "@") + ". " +
                      boxes(n, "{M}" + names("v", p) + names("z", q)) + ")";
    for (unsigned i = 1; i <= p; ++i) src += " ({BC} w" + std::to_string(i) + ")";
    return build(src, t, env, "eembed");
}

TypedTerm coerce(unsigned m) {
    static std::map<unsigned, TypedTerm> cache;
    {
        std::lock_guard<std::mutex> lk(cache_mu);
        auto it = cache.find(m);
        if (it != cache.end()) return it->second;
    }
    TypedTerm t;
    if (m == 0) {
        t = build("\\x. x", lin(W(), W()), {}, "Coerce0");
    } else if (m == 1) {
        ElabEnv env = base_env();
        env.embeds["Ws0"] = ws0();
        env.embeds["Ws1"] = ws1();
        t = build("\\n. (\\z. $[z {w0}]) (n[W] ![{Ws0}] ![{Ws1}])", lin(W(), PW(1)), env, "Coerce");
    } else {
        ElabEnv env;
        env.embeds["LC"] = lembed(1, 1, coerce(m - 1));
        env.embeds["C1"] = coerce(1);
        t = build("\\x. {LC} ({C1} x)", lin(W(), PW(m)), env, "Coerce^m");
    }
    std::lock_guard<std::mutex> lk(cache_mu);
    return cache.emplace(m, std::move(t)).first->second;
}

TypedTerm diagonal(unsigned m, unsigned n) {
    if (m == 0 || n == 0) throw CombinatorError("diagonal needs m, n >= 1");
    Formula d = tensor_type(std::vector<Formula>(n, PW(m)));
    ElabEnv env = base_env();
    env.macros["D"] = d;
    env.embeds["B0"] = bembed(m, ws0());
    env.embeds["B1"] = bembed(m, ws1());
    std::string zeros;
    for (unsigned i = 0; i < n; ++i) zeros += " " + zero_at(m);
    auto step = [&](const char* b) {
        std::string r = "![\\t. t[%D] (\\" + names("x", n, "@") + ". \\k. k";
        for (unsigned i = 1; i <= n; ++i) r += std::string(" ({") + b + "} x" + std::to_string(i) + ")";
        return r + ")]";
    };
    std::string src = "\\w. (\\z. $[z (\\k. k" + zeros + ")]) (w[%D] " + step("B0") + " " + step("B1") + ")";
    return build(src, lin(W(), par(d)), env, "diagonal");
}

// ------------------------------------------------------------- iteration

namespace {

// Prepends a digit at the most significant end: \0 1 y.ν0(…(1 y)) ↦ \0 1 y.ν0(…(1 (b y))).
const TypedTerm& prepend_msb(int b) {
    static const TypedTerm t0 = build(
        "\\w 0 1. (\\r. $[r (\\y. 0 y)]) (w[a -o a] ![\\f y. 0 (f y)] ![\\f y. 1 (f y)])", lin(W(), W()), {},
        "prepend0");
    static const TypedTerm t1 = build(
        "\\w 0 1. (\\r. $[r (\\y. 1 y)]) (w[a -o a] ![\\f y. 0 (f y)] ![\\f y. 1 (f y)])", lin(W(), W()), {},
        "prepend1");
    return b ? t1 : t0;
}

}  // namespace

TypedTerm iterator(unsigned n, unsigned s, unsigned m, const TypedTerm& g0, const TypedTerm& g1, const TypedTerm& g2) {
    if (m == 0) throw CombinatorError("iterator needs m >= 1");
    Formula gt = iter_step_type(n, s, m);
    expect_type(g0, gt, "iterator G0");
    expect_type(g1, gt, "iterator G1");
    expect_type(g2, gt, "iterator G2");

    ElabEnv env = base_env();
    Formula q = eager(PW(m), PW(m));
    Formula e = lin(q, q);
    for (unsigned i = 0; i < s; ++i) e = eager(PW(m), e);
    for (unsigned i = 0; i < n; ++i) e = eager(PW(1), e);
    Formula stepg = eager(PW(1), e);
    Symbol al = intern("al");
    Formula ep = forall(al, lin(lin(stepg, eager(PW(1), tvar(al))), tvar(al)));
    Symbol be = intern("be");
    Formula le = forall(be, lin(bang(lin(ep, lin(tvar(be), tvar(be)))), par(lin(tvar(be), tvar(be)))));
    Formula tt = lin(le, le);
    env.macros["Q"] = q;
    env.macros["EP"] = ep;
    env.macros["LE"] = le;
    env.macros["T"] = tt;

    env.embeds["G0"] = g0;
    env.embeds["G1"] = g1;
    env.embeds["G2"] = g2;
    env.embeds["NIL"] = build("\\c. $[\\r. r]", le, env, "iterator nil");
    for (int b = 0; b < 3; ++b) {
        std::string B = std::to_string(b);
        env.embeds["SG" + B] = build("\\@t" + names("k", n, "@") + names("j", s, "@") + " q @a. q ({G" + B + "} t" +
                                         names("k", n) + names("j", s) + " a)",
                                     stepg, env, "iterator step");
        env.embeds["EL" + B] = build("\\z. z {SG" + B + "} $[{w0}]", ep, env, "iterator element");
        env.embeds["CONS" + B] =
            build("\\l c. (\\h. $[\\r. c {EL" + B + "} (h r)]) (l[be] c)", tt, env, "iterator cons");
    }
    for (int b = 0; b < 2; ++b) {
        std::string B = std::to_string(b);
        env.embeds["PW" + B] = bembed(1, prepend_msb(b));
        env.embeds["MAPE" + B] =
            build("\\e. e[%EP] (\\g @t. \\z. z g ({PW" + B + "} t))", lin(ep, ep), env, "iterator map element");
        env.embeds["MAP" + B] = build("\\l c. l[be] ![\\e. c ({MAPE" + B + "} e)]", tt, env, "iterator map");
        env.embeds["F" + B] = build("\\l. {CONS" + B + "} ({MAP" + B + "} l)", tt, env, "iterator bit");
        env.embeds["STEP" + B] = build("\\f l. f ({F" + B + "} l)", lin(tt, tt), env, "iterator step");
    }
    env.embeds["C1"] = coerce(1);
    env.embeds["C4"] = coerce(4);

    std::string fold = "![\\e k. e[%Q] (\\g @t. g t" + names("m", n) + names("s", s) + " k)]";
    std::string level3 = "(\\h. $[h (\\@a. a) " + zero_at(m) + "]) (({CONS2} (r (\\l. l) {NIL}))[%Q] " + fold + ")";
    std::string level2 = "(\\r. $[" + level3 + "]) (xx[%T] ![{STEP0}] ![{STEP1}])";
    std::string src = "\\@x" + names("n", n, "@") + names("s", s, "@") + ". (\\@xx" + names("m", n, "@") + ". " +
                      boxes(2, level2) + ") $[{C1} x]";
    for (unsigned i = 1; i <= n; ++i) src += " $[{C4} n" + std::to_string(i) + "]";

    Formula t = pars(W(), m + 4);
    for (unsigned i = 0; i < s; ++i) t = eager(PW(m + 4), t);
    for (unsigned i = 0; i < n; ++i) t = eager(PW(1), t);
    t = eager(PW(1), t);
    return build(src, t, env, "iterator");
}

TypedTerm share(unsigned n, unsigned s, unsigned m, const TypedTerm& M) {
    if (s == 0) throw CombinatorError("share needs at least one safe argument");
    expect_type(M, safe_fn_type(n, s + 1, m), "share");
    ElabEnv env = base_env();
    env.embeds["M"] = M;
    Formula gt = iter_step_type(n, s, m);
    TypedTerm g0 = build("\\@w" + names("x", n, "@") + names("y", s + 1, "@") + ". " + zero_at(m), gt, env, "share G0");
    TypedTerm g1 = build("\\@w. {M}", gt, env, "share G1");
    TypedTerm g2 = build("\\@w" + names("x", n, "@") + names("y", s + 1, "@") + ". y" + std::to_string(s), gt, env,
                         "share G2");
    env.embeds["It"] = iterator(n, s, m, g0, g1, g2);
    return build("{It} $[{w1}]", safe_fn_type(n, s, m + 4), env, "share");
}

TypedTerm rotate(unsigned n, unsigned s, unsigned m, const TypedTerm& M) {
    expect_type(M, safe_fn_type(n, s, m), "rotate");
    if (s <= 1) return M;
    ElabEnv env;
    env.embeds["M"] = M;
    std::string src = "\\" + names("x", n, "@") + " @y" + std::to_string(s) + names("y", s - 1, "@") + ". {M}" +
                      names("x", n) + names("y", s);
    return build(src, safe_fn_type(n, s, m), env, "rotate");
}

TypedTerm mshare(unsigned n, unsigned p, unsigned q, unsigned m, const TypedTerm& M) {
    if (p == 0 || q == 0) return M;
    if (q == 1) return share(n, p, m, M);
    return share(n, p, m + 4 * (q - 1), mshare(n, p + 1, q - 1, m, M));
}

TypedTerm rmshare(unsigned n, unsigned p, unsigned q, unsigned m, const TypedTerm& M) {
    if (p == 0 || q == 0) return M;
    if (p == 1) return mshare(n, 1, q, m, M);
    return rotate(n, p, m + 4 * q, mshare(n, p, q, m, M));
}

TypedTerm mshsqcomp(unsigned n, unsigned p, unsigned i, unsigned m, const TypedTerm& M) {
    if (i > p) throw CombinatorError("mshsqcomp needs i <= p");
    expect_type(M, safe_fn_type(n, p * p, m), "mshsqcomp");
    if (p <= 1 || i == 0) return M;
    TypedTerm inner = mshsqcomp(n, p, i - 1, m, M);
    return rmshare(n, i + p * (p - i), p - 1, m + 4 * (p - 1) * (i - 1), inner);
}

// --------------------------------------------------------- composition

namespace {

struct Shape {
    unsigned args;
    unsigned depth;
};

Shape shape_of(const TypedTerm& t) {
    unsigned a = count_arrows(t.formula);
    Formula r = t.formula;
    for (unsigned i = 0; i < a; ++i) r = r->b;
    return {a, par_depth(r)};
}

// Distributes n normal arguments (copied by diagonals) to the normal components
// and, for each safe component, to its normal arguments; the safe component j
// receives the w binders listed in wargs[j]. All components have depth m.
TypedTerm compose_core(unsigned n, unsigned m, const TypedTerm& F, const std::vector<TypedTerm>& Gs,
                       const std::vector<TypedTerm>& Hs, unsigned nw, const std::vector<std::vector<unsigned>>& wargs) {
    const unsigned np = static_cast<unsigned>(Gs.size());
    const unsigned nh = static_cast<unsigned>(Hs.size());
    const unsigned width = np + nh;
    ElabEnv env;
    if (width == 0) {
        env.embeds["F"] = F;
        return build(lam_head(names("n", n, "@")) + boxes(m + 1, "{F}"), safe_fn_type(n, 0, 2 * m + 1), env,
                     "composition");
    }
    env.embeds["EF"] = lift(m - 1, F, np + nh);
    for (unsigned i = 0; i < np; ++i) env.embeds["G" + std::to_string(i + 1)] = Gs[i];
    for (unsigned j = 0; j < nh; ++j) env.embeds["EH" + std::to_string(j + 1)] = lift(m - 1, Hs[j], n + static_cast<unsigned>(wargs[j].size()));
    env.embeds["LC"] = lembed(1, 1, coerce(m - 1));

    // Inner term: destructs the n tuples, binds the safe arguments, calls F.
    auto xn = [](unsigned comp, unsigned arg) { return "x" + std::to_string(comp) + "_" + std::to_string(arg); };
    std::string call = "{EF}";
    for (unsigned i = 1; i <= np; ++i) {
        call += " ({G" + std::to_string(i) + "}";
        for (unsigned a = 1; a <= n; ++a) call += " " + xn(i, a);
        call += ")";
    }
    for (unsigned j = 1; j <= nh; ++j) {
        call += " ({EH" + std::to_string(j) + "}";
        for (unsigned a = 1; a <= n; ++a) call += " ({LC} " + xn(np + j, a) + ")";
        for (unsigned w : wargs[j - 1]) call += " w" + std::to_string(w);
        call += ")";
    }
    // A modal body cannot instantiate the tuple destructors, so without safe
    // arguments the body takes one unused argument, fed with 0 below.
    const bool dummy = nw == 0 && n > 0;
    Formula body_t = pars(W(), 2 * m - 1);
    for (unsigned i = 0; i < nw + dummy; ++i) body_t = eager(PW(2 * m - 1), body_t);
    std::string inner = lam_head(dummy ? " @w0" : names("w", nw, "@")) + call;
    Formula tup = tensor_type(std::vector<Formula>(width, PW(1)));
    std::vector<Formula> rest(n + 1);
    rest[n] = body_t;
    for (unsigned a = n; a-- > 0;) rest[a] = lin(tup, rest[a + 1]);
    for (unsigned a = n; a >= 1; --a) {
        env.macros["R" + std::to_string(a)] = rest[a];
        std::string bs;
        for (unsigned c = 1; c <= width; ++c) bs += " @" + xn(c, a);
        inner = "\\t" + std::to_string(a) + ". t" + std::to_string(a) + "[%R" + std::to_string(a) + "] (\\" + bs + ". " +
                inner + ")";
    }
    env.embeds["G"] = build(inner, rest[0], env, "composition body");
    env.embeds["EG"] = lift(2, env.embeds["G"], n + nw + dummy);
    env.embeds["LD"] = lembed(1, 1, diagonal(1, width));
    env.embeds["w0"] = word(0);
    std::string src = lam_head(names("n", n, "@")) + "{EG}";
    for (unsigned a = 1; a <= n; ++a) src += " ({LD} n" + std::to_string(a) + ")";
    if (dummy) src += " " + zero_at(2 * m + 1);
    Formula t = pars(W(), 2 * m + 1);
    for (unsigned i = 0; i < nw; ++i) t = eager(PW(2 * m + 1), t);
    for (unsigned i = 0; i < n; ++i) t = eager(PW(1), t);
    return build(src, t, env, "composition");
}

}  // namespace

SqcompInfo sqcomp_info(unsigned n, const TypedTerm& F, const std::vector<TypedTerm>& Gs,
                       const std::vector<TypedTerm>& Hs) {
    SqcompInfo info;
    info.n = n;
    Shape fs = shape_of(F);
    info.m = fs.depth;
    if (fs.args < Hs.size()) throw CombinatorError("sqcomp: F takes fewer arguments than there are safe components");
    info.nprime = fs.args - static_cast<unsigned>(Hs.size());
    if (Gs.size() != info.nprime) throw CombinatorError("sqcomp: F expects " + std::to_string(info.nprime) +
                                                        " normal components, got " + std::to_string(Gs.size()));
    info.s = static_cast<unsigned>(Hs.size());
    for (const auto& h : Hs) {
        Shape hs = shape_of(h);
        if (hs.args < n) throw CombinatorError("sqcomp: safe component with too few arguments");
        info.safe_arities.push_back(hs.args - n);
        info.s = std::max(info.s, hs.args - n);
    }
    return info;
}

TypedTerm sqcomp(unsigned n, unsigned s, unsigned nprime, const TypedTerm& F, const std::vector<TypedTerm>& Gs,
                 const std::vector<TypedTerm>& Hs) {
    SqcompInfo info = sqcomp_info(n, F, Gs, Hs);
    const unsigned m = info.m;
    const unsigned sp = static_cast<unsigned>(Hs.size());
    if (m == 0) throw CombinatorError("sqcomp needs components of depth >= 1");
    if (nprime != info.nprime) throw CombinatorError("sqcomp: F has normal arity " + std::to_string(info.nprime));
    if (s < info.s) throw CombinatorError("sqcomp: s must be at least " + std::to_string(info.s));
    expect_type(F, safe_fn_type(nprime, sp, m), "sqcomp F");
    for (const auto& g : Gs) expect_type(g, safe_fn_type(n, 0, m), "sqcomp normal component");
    for (unsigned j = 0; j < sp; ++j) expect_type(Hs[j], safe_fn_type(n, info.safe_arities[j], m), "sqcomp safe component");

    ElabEnv env = base_env();
    env.embeds["F"] = F;
    TypedTerm F2 = build("\\" + names("x", nprime, "@") + names("y", s, "@") + ". {F}" + names("x", nprime) +
                             names("y", sp),
                         safe_fn_type(nprime, s, m), env, "sqcomp F'");
    std::vector<TypedTerm> H2;
    for (unsigned j = 0; j < s; ++j) {
        std::string src = "\\" + names("z", n, "@") + names("w", s, "@") + ". ";
        if (j < sp) {
            env.embeds["H"] = Hs[j];
            src += "{H}" + names("z", n) + names("w", info.safe_arities[j]);
        } else {
            src += zero_at(m);
        }
        H2.push_back(build(src, safe_fn_type(n, s, m), env, "sqcomp H'"));
    }
    // The safe arguments arrive as s blocks of s copies: w_{(a-1)s+j} is the
    // j-th copy of the a-th value and goes to H'_j.
    std::vector<std::vector<unsigned>> wargs(s);
    for (unsigned j = 1; j <= s; ++j)
        for (unsigned a = 1; a <= s; ++a) wargs[j - 1].push_back((a - 1) * s + j);
    return compose_core(n, m, F2, Gs, H2, s * s, wargs);
}

TypedTerm lincomp(unsigned n, const TypedTerm& F, const std::vector<TypedTerm>& Gs, const std::vector<TypedTerm>& Hs) {
    SqcompInfo info = sqcomp_info(n, F, Gs, Hs);
    const unsigned m = info.m;
    if (m == 0) throw CombinatorError("lincomp needs components of depth >= 1");
    expect_type(F, safe_fn_type(info.nprime, static_cast<unsigned>(Hs.size()), m), "lincomp F");
    for (const auto& g : Gs) expect_type(g, safe_fn_type(n, 0, m), "lincomp normal component");
    std::vector<std::vector<unsigned>> wargs;
    unsigned next = 1;
    for (unsigned j = 0; j < Hs.size(); ++j) {
        expect_type(Hs[j], safe_fn_type(n, info.safe_arities[j], m), "lincomp safe component");
        wargs.emplace_back();
        for (unsigned a = 0; a < info.safe_arities[j]; ++a) wargs.back().push_back(next++);
    }
    return compose_core(n, m, F, Gs, Hs, next - 1, wargs);
}

// --------------------------------------------------------------- registry

std::vector<RegistryEntry> registry() {
    std::vector<RegistryEntry> out;
    auto add = [&](std::string name, nlohmann::json params, const TypedTerm& t, std::string contract) {
        out.push_back({std::move(name), std::move(params), print_formula(t.formula), std::move(contract)});
    };
    add("word", {{"n", 5}}, word(5), "binary numeral \\0 1 y.nu0(...(1 y)), least significant digit outermost");
    add("Ws0", nlohmann::json::object(), ws0(), "Ws0 word(n) ->* word(2n); word(0) ->* word(0)");
    add("Ws1", nlohmann::json::object(), ws1(), "Ws1 word(n) ->* word(2n+1)");
    add("Pred", nlohmann::json::object(), pred_w(), "Pred word(n) ->* word(n div 2)");
    add("B", nlohmann::json::object(), branch_w(), "B word(0) a b ->* a; B word(n>0) a b ->* b");
    add("coerce", {{"m", 2}}, coerce(2), "coerce(m) word(n) ->* word(n), rebuilt m boxes deep");
    add("bembed", {{"n", 1}, {"M", "Ws0"}}, bembed(1, ws0()), "\\x. M x with argument and result one box deeper");
    add("lembed", {{"n", 1}, {"p", 1}, {"M", "coerce(1)"}}, lembed(1, 1, coerce(1)), "\\x1..xp. M x1..xp shifted n boxes");
    add("eembed", {{"n", 1}, {"p", 1}, {"q", 0}, {"M", "bembed(1,Ws1)"}}, eembed(1, 1, 0, bembed(1, ws1())),
        "normal arguments coerced n boxes deeper, safe arguments and result shifted by n");
    add("diagonal", {{"m", 1}, {"n", 2}}, diagonal(1, 2), "diagonal(m,n) word(a) ->+ tuple of n copies of word(a)");
    TypedTerm proj = build("\\@x @y. y", safe_fn_type(1, 1, 1), {}, "projection");
    TypedTerm proj2 = build("\\@x @y1 @y2. y2", safe_fn_type(1, 2, 1), {}, "projection");
    add("share", {{"n", 1}, {"s", 1}, {"m", 1}, {"M", "\\x y1 y2. y2"}}, share(1, 1, 1, proj2),
        "share[M] n s1..ss ->+ M n s1..ss ss");
    add("rotate", {{"n", 1}, {"s", 2}, {"m", 1}, {"M", "\\x y1 y2. y2"}}, rotate(1, 2, 1, proj2),
        "rotate[M] n s1..ss ->+ M n s2..ss s1");
    add("mshare", {{"n", 1}, {"p", 1}, {"q", 1}, {"m", 1}, {"M", "\\x y1 y2. y2"}}, mshare(1, 1, 1, 1, proj2),
        "mshare[M] n s1..sp ->* M n s1..sp followed by q copies of sp");
    add("rmshare", {{"n", 1}, {"p", 1}, {"q", 1}, {"m", 1}, {"M", "\\x y1 y2. y2"}}, rmshare(1, 1, 1, 1, proj2),
        "rmshare[M] n s1..sp ->* M n s2..sp s1 followed by q copies of s1");
    add("sqcomp", {{"n", 1}, {"s", 1}, {"nprime", 0}, {"F", "\\y. y"}, {"H", "\\x y. y"}},
        sqcomp(1, 1, 0, build("\\@y. y", safe_fn_type(0, 1, 1), {}, "F"), {}, {proj}),
        "sqcomp n (s1 x s)..(ss x s) ->+ F g1..gn' h1..hs'");
    add("mshsqcomp", {{"n", 1}, {"p", 1}, {"i", 1}, {"m", 1}, {"M", "\\x y. y"}}, mshsqcomp(1, 1, 1, 1, proj),
        "blocks of p copies of each safe argument fed to M");
    return out;
}

nlohmann::json registry_json() {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : registry())
        arr.push_back({{"name", e.name}, {"params", e.params}, {"formula", e.formula}, {"contract", e.contract}});
    return {{"schema", 1}, {"combinators", arr}};
}

}  // namespace walt
