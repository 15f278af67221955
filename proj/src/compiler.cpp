#include "walt/compiler.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>

namespace walt {

namespace {

std::string names(const std::string& pre, unsigned n, const std::string& mark = "") {
    std::string r;
    for (unsigned i = 1; i <= n; ++i) r += " " + mark + pre + std::to_string(i);
    return r;
}

std::string boxes(unsigned n, const std::string& inner) {
    std::string r;
    for (unsigned i = 0; i < n; ++i) r += "$[";
    return r + inner + std::string(n, ']');
}

TypedTerm build(const std::string& src, const Formula& type, const ElabEnv& env, const std::string& what) {
    try {
        return elaborate(src, type, env);
    } catch (const std::exception& e) {
        throw CompileError(what + ": " + e.what());
    }
}

// Depth of the result formula of a compiled definition.
unsigned result_depth(const Formula& f) {
    Formula cur = f;
    while (cur->kind == FKind::Eager || cur->kind == FKind::Lin) cur = cur->b;
    return par_depth(cur);
}

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

// Bumped whenever the shape of compiled terms changes.
constexpr std::uint64_t kCacheSalt = 0x57a17'0003ULL;

}  // namespace

// ------------------------------------------------------------- compiler

Compiler::Compiler(CompilerOptions opts) : opts_(std::move(opts)) {}

std::size_t Compiler::memo_size() const {
    std::lock_guard<std::mutex> lk(mu_);
    std::size_t n = 0;
    for (const auto& [h, v] : memo_) n += v.size();
    return n;
}

void Compiler::check(const TypedTerm& t, const std::string& what, std::string* ref, std::uint64_t key) {
    if (!opts_.verify) return;
    std::filesystem::path file;
    if (!opts_.cache_dir.empty()) {
        file = std::filesystem::path(opts_.cache_dir) / ("deriv-" + hex(key ^ kCacheSalt) + ".json");
        std::ifstream in(file);
        if (in) {
            try {
                nlohmann::json j = nlohmann::json::parse(in);
                if (j.value("schema", 0) == 1 && j.value("checked", false) && j.value("term_hash", std::string()) == hex(t.term->hash) &&
                    j.value("formula", std::string()) == print_formula(t.formula, false)) {
                    if (ref) *ref = file.string();
                    std::lock_guard<std::mutex> lk(mu_);
                    ++cache_hits_;
                    return;
                }
            } catch (const std::exception&) {
            }
        }
    }
    CheckResult r = check_derivation(t.derivation);
    if (!r.ok) throw CompileError(what + ": derivation rejected: " + describe(*r.violation));
    if (!file.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(file.parent_path(), ec);
        nlohmann::json j = {{"schema", 1},
                            {"what", what},
                            {"checked", true},
                            {"term_hash", hex(t.term->hash)},
                            {"formula", print_formula(t.formula, false)},
                            {"derivation", derivation_to_json(t.derivation)}};
        std::filesystem::path tmp = file;
        tmp += ".tmp" + std::to_string(reinterpret_cast<std::uintptr_t>(&t));
        {
            std::ofstream out(tmp);
            out << j.dump();
        }
        std::filesystem::rename(tmp, file, ec);
        if (!ec && ref) *ref = file.string();
    }
}

CompiledDef Compiler::compile(const SrnDef& f) {
    {
        std::lock_guard<std::mutex> lk(mu_);
        auto it = memo_.find(f->hash);
        if (it != memo_.end())
            for (const auto& c : it->second)
                if (structural_eq(c.source, f)) return c;
    }
    CompiledDef c;
    c.source = f;
    c.target = compile_uncached(f);
    c.m = result_depth(c.target.formula);
    if (!alpha_eq(c.target.formula, safe_fn_type(f->k, f->l, c.m)))
        throw CompileError("compiled " + print_def(f) + " has formula " + print_formula(c.target.formula));
    check(c.target, print_def(f), &c.derivation_ref, f->hash);
    std::lock_guard<std::mutex> lk(mu_);
    auto& slot = memo_[f->hash];
    for (const auto& d : slot)
        if (structural_eq(d.source, f)) return d;
    slot.push_back(c);
    trust(c.target);
    return c;
}

void Compiler::trust(const TypedTerm& t) {
    std::unique_lock<std::shared_mutex> lk(trusted_mu_);
    collect_nodes(t.derivation, trusted_);
}

void Compiler::verify_term(const TypedTerm& t, const std::string& what) {
    if (!opts_.verify) return;
    std::shared_lock<std::shared_mutex> lk(trusted_mu_);
    CheckResult r = check_derivation(t.derivation, trusted_);
    if (!r.ok) throw CompileError(what + ": derivation rejected: " + describe(*r.violation));
}

TypedTerm Compiler::compile_uncached(const SrnDef& f) {
    ElabEnv env;
    switch (f->kind) {
        case SrnKind::Zero: {
            TypedTerm z = lembed(1, 0, word(0));
            if (f->k + f->l == 0) return z;
            env.embeds["Z"] = z;
            return build("\\" + names("n", f->k, "@") + names("s", f->l, "@") + ". {Z}", safe_fn_type(f->k, f->l, 1),
                         env, "zero");
        }
        case SrnKind::S0: return bembed(1, ws0());
        case SrnKind::S1: return bembed(1, ws1());
        case SrnKind::Pred: return bembed(1, pred_w());
        case SrnKind::Proj:
            return build("\\" + names("x", f->k + f->l, "@") + ". x" + std::to_string(f->index),
                         safe_fn_type(f->k, f->l, 1), env, "projection");
        case SrnKind::Branch:
            env.embeds["B"] = branch_w();
            return build("\\@x @y @z. $[{B} x y z]", safe_fn_type(0, 3, 1), env, "branch");
        case SrnKind::Comp:
        case SrnKind::LComp: return composition(f);
        case SrnKind::Rec: return recursion(f);
    }
    throw CompileError("unknown definition kind");
}

namespace {

// \x1..xk. EEmbed^{p-m}_{k,l}(M) (LEmbed^1_1 Coerce^0 x1) … (LEmbed^1_1 Coerce^0 xk)
TypedTerm normalize_depth(const CompiledDef& c, unsigned p) {
    const unsigned k = c.source->k, l = c.source->l;
    ElabEnv env;
    env.embeds["EE"] = eembed(p - c.m, k, l, c.target);
    env.embeds["LC"] = lembed(1, 1, coerce(0));
    std::string src = "{EE}";
    for (unsigned i = 1; i <= k; ++i) src += " ({LC} x" + std::to_string(i) + ")";
    if (k > 0) src = "\\" + names("x", k, "@") + ". " + src;
    return build(src, safe_fn_type(k, l, p), env, "depth normalization");
}

}  // namespace

TypedTerm Compiler::composition(const SrnDef& f) {
    CompiledDef F = compile(f->f());
    std::vector<CompiledDef> gs, hs;
    for (const auto& g : f->normals()) gs.push_back(compile(g));
    for (const auto& h : f->safes()) hs.push_back(compile(h));
    unsigned p = F.m;
    for (const auto& g : gs) p = std::max(p, g.m);
    for (const auto& h : hs) p = std::max(p, h.m);
    TypedTerm Fn = normalize_depth(F, p);
    std::vector<TypedTerm> Gn, Hn;
    for (const auto& g : gs) Gn.push_back(normalize_depth(g, p));
    for (const auto& h : hs) Hn.push_back(normalize_depth(h, p));
    const unsigned k = f->k;
    if (f->kind == SrnKind::LComp) return lincomp(k, Fn, Gn, Hn);

    unsigned s = f->lp;
    for (const auto& h : f->safes()) s = std::max(s, h->l);
    TypedTerm R = mshsqcomp(k, s, s, 2 * p + 1, sqcomp(k, s, f->kp, Fn, Gn, Hn));
    if (s == f->l) return R;
    const unsigned depth = 2 * p + 1 + 4 * s * (s > 0 ? s - 1 : 0);
    ElabEnv env;
    env.embeds["R"] = R;
    env.embeds["w0"] = word(0);
    std::string binders = names("n", k, "@") + names("y", f->l, "@");
    std::string src = (binders.empty() ? "" : "\\" + binders + ". ") + "{R}" + names("n", k);
    for (unsigned i = 1; i <= s; ++i) src += i <= f->l ? " y" + std::to_string(i) : " " + boxes(depth, "{w0}");
    return build(src, safe_fn_type(k, f->l, depth), env, "composition adapter");
}

TypedTerm Compiler::recursion(const SrnDef& f) {
    CompiledDef g = compile(f->g());
    CompiledDef h0 = compile(f->h0());
    CompiledDef h1 = compile(f->h1());
    const unsigned k = f->k - 1, l = f->l;
    const unsigned p = std::max({g.m, h0.m, h1.m});
    ElabEnv env;
    env.embeds["g"] = g.target;
    TypedTerm base = build("\\@n0" + names("n", k, "@") + names("s", l, "@") + " @r. {g}" + names("n", k) + names("s", l),
                           safe_fn_type(k + 1, l + 1, g.m), env, "recursion base");
    TypedTerm G = eembed(p - g.m, k + 1, l + 1, base);
    TypedTerm F0 = eembed(p - h0.m, k + 1, l + 1, h0.target);
    TypedTerm F1 = eembed(p - h1.m, k + 1, l + 1, h1.target);
    return iterator(k, l, p, F0, F1, G);
}

CompiledTerm Compiler::interpret_lit(Nat n) {
    {
        std::lock_guard<std::mutex> lk(mu_);
        auto it = lits_.find(n);
        if (it != lits_.end()) return it->second;
    }
    CompiledTerm c;
    if (n == 0) {
        c = interpret_apply(srn_zero(0, 0), {}, {});
    } else {
        c = interpret_apply(n & 1 ? srn_s1() : srn_s0(), {srn_lit(n >> 1)}, {});
    }
    c.source = srn_lit(n);
    verify_term(c.target, std::to_string(n));
    std::lock_guard<std::mutex> lk(mu_);
    auto [it, fresh] = lits_.emplace(n, std::move(c));
    if (fresh) trust(it->second.target);
    return it->second;
}

CompiledTerm Compiler::interpret_apply(const SrnDef& f, const std::vector<SrnTerm>& args, const Env& rho) {
    CompiledDef F = compile(f);
    if (f->k + f->l == 0) {
        CompiledTerm c;
        c.target = F.target;
        c.depth = F.m;
        return c;
    }
    std::vector<CompiledTerm> ts, us;
    for (std::size_t i = 0; i < args.size(); ++i) (i < f->k ? ts : us).push_back(interpret_node(args[i], rho));
    const unsigned m = F.m;
    unsigned u = m;
    for (const auto& t : ts) u = std::max(u, t.depth);
    unsigned v = u - 1 + m;
    for (const auto& q : us) v = std::max(v, q.depth);

    ElabEnv env;
    env.embeds["E1"] = eembed(u - 1, 0, f->k + f->l, F.target);
    std::string inner = "{E1}";
    for (std::size_t i = 0; i < ts.size(); ++i) {
        std::string name = "T" + std::to_string(i + 1);
        env.embeds[name] = lembed(u - ts[i].depth, 0, ts[i].target);
        inner += " {" + name + "}";
    }
    TypedTerm in = build(inner, safe_fn_type(0, f->l, m + u - 1), env, "interpretation");
    ElabEnv env2;
    env2.embeds["E2"] = eembed(v - u + 1 - m, 0, f->l, in);
    std::string outer = "{E2}";
    for (std::size_t j = 0; j < us.size(); ++j) {
        std::string name = "U" + std::to_string(j + 1);
        env2.embeds[name] = lembed(v - us[j].depth, 0, us[j].target);
        outer += " {" + name + "}";
    }
    CompiledTerm c;
    c.target = build(outer, safe_fn_type(0, 0, v), env2, "interpretation");
    c.depth = v;
    return c;
}

CompiledTerm Compiler::interpret(const SrnTerm& t, const Env& rho) {
    CompiledTerm c = interpret_node(t, rho);
    if (t->kind == SrnTermKind::Apply) verify_term(c.target, print_term(t));
    return c;
}

CompiledTerm Compiler::interpret_node(const SrnTerm& t, const Env& rho) {
    CompiledTerm c;
    switch (t->kind) {
        case SrnTermKind::Lit: c = interpret_lit(t->value); break;
        case SrnTermKind::Var: {
            auto it = rho.find(t->name);
            if (it == rho.end()) throw CompileError("unbound variable " + t->name);
            c = interpret_lit(it->second);
            break;
        }
        case SrnTermKind::Apply: c = interpret_apply(t->fn, t->args, rho); break;
    }
    c.source = t;
    c.env = rho;
    return c;
}

Compiler& default_compiler() {
    static Compiler c([] {
        CompilerOptions o;
        if (const char* dir = std::getenv("WALT_CACHE_DIR")) o.cache_dir = dir;
        return o;
    }());
    return c;
}

CompiledDef compile_def(const SrnDef& f) { return default_compiler().compile(f); }
CompiledTerm interpret(const SrnTerm& t, const Env& rho) { return default_compiler().interpret(t, rho); }

unsigned compiled_depth(const SrnDef& f) {
    switch (f->kind) {
        case SrnKind::Comp:
        case SrnKind::LComp: {
            unsigned p = 0;
            for (const auto& c : f->parts) p = std::max(p, compiled_depth(c));
            if (f->kind == SrnKind::LComp) return 2 * p + 1;
            unsigned s = f->lp;
            for (const auto& h : f->safes()) s = std::max(s, h->l);
            return 2 * p + 1 + 4 * s * (s > 0 ? s - 1 : 0);
        }
        case SrnKind::Rec:
            return std::max({compiled_depth(f->g()), compiled_depth(f->h0()), compiled_depth(f->h1())}) + 4;
        default: return 1;
    }
}

SrnTerm close_term(const SrnTerm& t, const Env& rho) {
    switch (t->kind) {
        case SrnTermKind::Lit: return t;
        case SrnTermKind::Var: {
            auto it = rho.find(t->name);
            if (it == rho.end()) throw SrnError("unbound variable " + t->name);
            return srn_lit(it->second);
        }
        case SrnTermKind::Apply: {
            std::vector<SrnTerm> args;
            for (const auto& a : t->args) args.push_back(close_term(a, rho));
            return srn_apply(t->fn, std::move(args));
        }
    }
    return t;
}

// ----------------------------------------------------------- soundness

nlohmann::json SoundnessReport::to_json() const {
    nlohmann::json j = {{"schema", 1},
                        {"term", term},
                        {"oracle", oracle},
                        {"compiled", compiled},
                        {"equal", equal},
                        {"reached_nf", reached_nf},
                        {"steps", steps},
                        {"depth", depth},
                        {"derivation_depth", derivation_depth},
                        {"weight", weight.str()},
                        {"depth_le_weight", depth_le_weight},
                        {"normal_form", normal_form}};
    if (normal_value) j["normal_value"] = *normal_value;
    if (!error.empty()) j["error"] = error;
    return j;
}

SoundnessReport check_soundness(const SrnTerm& t, const Env& rho, std::uint64_t max_steps, Compiler* compiler,
                                Strategy strategy) {
    SoundnessReport r;
    r.term = print_term(t);
    Compiler& comp = compiler ? *compiler : default_compiler();
    try {
        r.oracle = eval_term(t, rho);
        r.weight = weight(close_term(t, rho));
        CompiledTerm c = comp.interpret(t, rho);
        r.compiled = true;
        r.depth = c.depth;
        r.derivation_depth = walt::depth(c.target.derivation);
        r.depth_le_weight = Rational(c.depth) <= r.weight;
        NormalizeResult n = normalize(c.target.term, max_steps, strategy);
        r.steps = n.steps;
        r.reached_nf = n.reached_nf;
        std::string nf = walt::print_term(n.term);
        r.normal_form = nf.size() > 400 ? nf.substr(0, 400) + "..." : nf;
        r.normal_value = decode_word(n.term);
        r.equal = n.reached_nf && alpha_eq(n.term, word_term(r.oracle));
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    return r;
}

// ---------------------------------------------------------- routing

nlohmann::json LinearityReport::to_json() const {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : compositions) {
        nlohmann::json j = {{"path", c.path},       {"scheme", c.scheme}, {"k", c.k},
                            {"l", c.l},             {"kp", c.kp},         {"lp", c.lp},
                            {"safe_arities", c.safe_arities},             {"p", c.p},
                            {"s", c.s},             {"adapter", c.adapter}, {"linear", c.linear}};
        if (c.scheme == "sqcomp") {
            j["sqcomp"] = {c.k, c.s, c.kp};
            j["mshsqcomp"] = {c.k, c.s, c.s, 2 * c.p + 1};
        }
        comps.push_back(j);
    }
    return {{"schema", 1}, {"clsrn", clsrn}, {"compositions", comps}};
}

LinearityReport full_to_linear_report(const SrnDef& f) {
    LinearityReport r;
    r.clsrn = is_clsrn(f);
    std::function<void(const SrnDef&, const std::string&)> walk = [&](const SrnDef& d, const std::string& path) {
        if (d->kind == SrnKind::Comp || d->kind == SrnKind::LComp) {
            CompositionRoute c;
            c.path = path;
            c.scheme = d->kind == SrnKind::Comp ? "sqcomp" : "lincomp";
            c.k = d->k;
            c.l = d->l;
            c.kp = d->kp;
            c.lp = d->lp;
            for (const auto& part : d->parts) c.p = std::max(c.p, compiled_depth(part));
            c.s = d->kind == SrnKind::Comp ? d->lp : d->l;
            for (const auto& h : d->safes()) {
                c.safe_arities.push_back(h->l);
                if (d->kind == SrnKind::Comp) c.s = std::max(c.s, h->l);
            }
            c.adapter = c.s == c.l ? "none" : (c.s < c.l ? "erase" : "pad");
            unsigned readers = 0;
            for (const auto& h : d->safes()) readers += h->l > 0;
            c.linear = d->kind == SrnKind::LComp || readers <= 1;
            r.compositions.push_back(c);
        }
        for (std::size_t i = 0; i < d->parts.size(); ++i) walk(d->parts[i], path + "/" + std::to_string(i));
    };
    walk(f, "");
    return r;
}

}  // namespace walt
