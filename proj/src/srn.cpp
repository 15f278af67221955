#include "walt/srn.hpp"

#include <cctype>
#include <functional>
#include <numeric>
#include <sstream>

namespace walt {

// ------------------------------------------------------------ rationals

namespace {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_mul_overflow(a, b, &r)) throw SrnError("rational overflow");
    return r;
}

}  // namespace

Rational::Rational(std::int64_t n, std::int64_t d) {
    if (d == 0) throw SrnError("zero denominator");
    if (d < 0) n = -n, d = -d;
    std::int64_t g = std::gcd(n < 0 ? -n : n, d);
    if (g == 0) g = 1;
    num = n / g;
    den = d / g;
}

std::string Rational::str() const { return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den); }

Rational operator*(const Rational& a, const Rational& b) {
    std::int64_t g1 = std::gcd(a.num < 0 ? -a.num : a.num, b.den);
    std::int64_t g2 = std::gcd(b.num < 0 ? -b.num : b.num, a.den);
    if (g1 == 0) g1 = 1;
    if (g2 == 0) g2 = 1;
    return Rational(checked_mul(a.num / g1, b.num / g2), checked_mul(a.den / g2, b.den / g1));
}

bool operator==(const Rational& a, const Rational& b) { return a.num == b.num && a.den == b.den; }

bool operator<(const Rational& a, const Rational& b) {
    return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
}

Rational max(const Rational& a, const Rational& b) { return a < b ? b : a; }

// ---------------------------------------------------------- definitions

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

SrnDef finish(SrnDefNode n) {
    std::uint64_t h = mix(0x5151, static_cast<std::uint64_t>(n.kind));
    for (unsigned v : {n.k, n.l, n.index, n.kp, n.lp}) h = mix(h, v);
    for (const auto& p : n.parts) h = mix(h, p->hash);
    n.hash = h;
    return std::make_shared<const SrnDefNode>(std::move(n));
}

SrnDef base(SrnKind kind, unsigned k, unsigned l) {
    SrnDefNode n;
    n.kind = kind;
    n.k = k;
    n.l = l;
    return finish(std::move(n));
}

std::string arity(const SrnDef& d) { return "(" + std::to_string(d->k) + ";" + std::to_string(d->l) + ")"; }

std::string who(const SrnDef& d) { return d->label.empty() ? print_def(d) : d->label; }

SrnDef composition(SrnKind kind, unsigned k, unsigned l, SrnDef f, std::vector<SrnDef> gs, std::vector<SrnDef> hs) {
    const char* scheme = kind == SrnKind::Comp ? "comp" : "lcomp";
    if (f->k != gs.size())
        throw SrnError(std::string(scheme) + ": " + who(f) + " has normal arity " + std::to_string(f->k) + " but " +
                       std::to_string(gs.size()) + " normal components are given");
    if (f->l != hs.size())
        throw SrnError(std::string(scheme) + ": " + who(f) + " has safe arity " + std::to_string(f->l) + " but " +
                       std::to_string(hs.size()) + " safe components are given");
    for (const auto& g : gs)
        if (g->k != k || g->l != 0)
            throw SrnError(std::string(scheme) + ": normal component " + who(g) + " has arity " + arity(g) +
                           ", expected (" + std::to_string(k) + ";0)");
    unsigned total = 0;
    for (const auto& h : hs) {
        if (h->k != k)
            throw SrnError(std::string(scheme) + ": safe component " + who(h) + " has normal arity " +
                           std::to_string(h->k) + ", expected " + std::to_string(k));
        if (kind == SrnKind::Comp && h->l > l)
            throw SrnError("comp: safe component " + who(h) + " has safe arity " + std::to_string(h->l) +
                           " exceeding " + std::to_string(l));
        total += h->l;
    }
    if (kind == SrnKind::LComp && total != l)
        throw SrnError("lcomp: safe arities of the safe components sum to " + std::to_string(total) + ", expected " +
                       std::to_string(l));
    SrnDefNode n;
    n.kind = kind;
    n.k = k;
    n.l = l;
    n.kp = f->k;
    n.lp = f->l;
    n.parts.push_back(std::move(f));
    for (auto& g : gs) n.parts.push_back(std::move(g));
    for (auto& h : hs) n.parts.push_back(std::move(h));
    return finish(std::move(n));
}

}  // namespace

std::vector<SrnDef> SrnDefNode::normals() const {
    if (kind != SrnKind::Comp && kind != SrnKind::LComp) return {};
    return {parts.begin() + 1, parts.begin() + 1 + kp};
}

std::vector<SrnDef> SrnDefNode::safes() const {
    if (kind != SrnKind::Comp && kind != SrnKind::LComp) return {};
    return {parts.begin() + 1 + kp, parts.end()};
}

SrnDef srn_zero(unsigned k, unsigned l) { return base(SrnKind::Zero, k, l); }
SrnDef srn_s0() { return base(SrnKind::S0, 0, 1); }
SrnDef srn_s1() { return base(SrnKind::S1, 0, 1); }
SrnDef srn_pred() { return base(SrnKind::Pred, 0, 1); }
SrnDef srn_branch() { return base(SrnKind::Branch, 0, 3); }

SrnDef srn_proj(unsigned k, unsigned l, unsigned i) {
    if (i < 1 || i > k + l)
        throw SrnError("pi[" + std::to_string(k) + ";" + std::to_string(l) + ";" + std::to_string(i) +
                       "]: index out of range");
    SrnDefNode n;
    n.kind = SrnKind::Proj;
    n.k = k;
    n.l = l;
    n.index = i;
    return finish(std::move(n));
}

SrnDef srn_comp(unsigned k, unsigned l, SrnDef f, std::vector<SrnDef> gs, std::vector<SrnDef> hs) {
    return composition(SrnKind::Comp, k, l, std::move(f), std::move(gs), std::move(hs));
}

SrnDef srn_lcomp(unsigned k, unsigned l, SrnDef f, std::vector<SrnDef> gs, std::vector<SrnDef> hs) {
    return composition(SrnKind::LComp, k, l, std::move(f), std::move(gs), std::move(hs));
}

SrnDef srn_rec(unsigned k, unsigned l, SrnDef g, SrnDef h0, SrnDef h1) {
    if (k < 1) throw SrnError("rec needs normal arity at least 1");
    if (g->k != k - 1 || g->l != l)
        throw SrnError("rec: base " + who(g) + " has arity " + arity(g) + ", expected (" + std::to_string(k - 1) + ";" +
                       std::to_string(l) + ")");
    for (const auto& h : {h0, h1})
        if (h->k != k || h->l != l + 1)
            throw SrnError("rec: step " + who(h) + " has arity " + arity(h) + ", expected (" + std::to_string(k) + ";" +
                           std::to_string(l + 1) + ")");
    SrnDefNode n;
    n.kind = SrnKind::Rec;
    n.k = k;
    n.l = l;
    n.parts = {std::move(g), std::move(h0), std::move(h1)};
    return finish(std::move(n));
}

SrnDef with_label(const SrnDef& d, const std::string& label) {
    SrnDefNode n = *d;
    n.label = label;
    return std::make_shared<const SrnDefNode>(std::move(n));
}

bool structural_eq(const SrnDef& a, const SrnDef& b) {
    if (a == b) return true;
    if (a->hash != b->hash || a->kind != b->kind || a->k != b->k || a->l != b->l || a->index != b->index ||
        a->kp != b->kp || a->lp != b->lp || a->parts.size() != b->parts.size())
        return false;
    for (std::size_t i = 0; i < a->parts.size(); ++i)
        if (!structural_eq(a->parts[i], b->parts[i])) return false;
    return true;
}

std::size_t def_size(const SrnDef& d) {
    std::size_t n = 1;
    for (const auto& p : d->parts) n += def_size(p);
    return n;
}

// ---------------------------------------------------------------- terms

SrnTerm srn_var(const std::string& name) {
    auto t = std::make_shared<SrnTermNode>();
    t->kind = SrnTermKind::Var;
    t->name = name;
    return t;
}

SrnTerm srn_lit(Nat n) {
    auto t = std::make_shared<SrnTermNode>();
    t->kind = SrnTermKind::Lit;
    t->value = n;
    return t;
}

SrnTerm srn_apply(SrnDef f, std::vector<SrnTerm> args) {
    if (args.size() != f->k + f->l)
        throw SrnError(who(f) + " expects " + std::to_string(f->k + f->l) + " arguments, got " +
                       std::to_string(args.size()));
    auto t = std::make_shared<SrnTermNode>();
    t->kind = SrnTermKind::Apply;
    t->fn = std::move(f);
    t->args = std::move(args);
    return t;
}

// ----------------------------------------------------------- evaluation

unsigned bit_length(Nat n) {
    unsigned len = 0;
    for (; n; n >>= 1) ++len;
    return len;
}

namespace {

struct Evaluator {
    std::uint64_t fuel;

    Nat twice(Nat n, Nat bit) {
        if (n >> 63) throw SrnError("value exceeds 64 bits");
        return 2 * n + bit;
    }

    Nat run(const SrnDef& f, const std::vector<Nat>& ns, const std::vector<Nat>& ss) {
        if (fuel-- == 0) throw SrnError("evaluation fuel exhausted");
        switch (f->kind) {
            case SrnKind::Zero: return 0;
            case SrnKind::S0: return twice(ss[0], 0);
            case SrnKind::S1: return twice(ss[0], 1);
            case SrnKind::Pred: return ss[0] >> 1;
            case SrnKind::Proj: return f->index <= f->k ? ns[f->index - 1] : ss[f->index - f->k - 1];
            case SrnKind::Branch: return ss[0] == 0 ? ss[1] : ss[2];
            case SrnKind::Comp:
            case SrnKind::LComp: {
                std::vector<Nat> gv, hv;
                for (unsigned i = 0; i < f->kp; ++i) gv.push_back(run(f->parts[1 + i], ns, {}));
                std::size_t next = 0;
                for (unsigned j = 0; j < f->lp; ++j) {
                    const SrnDef& h = f->parts[1 + f->kp + j];
                    std::size_t from = f->kind == SrnKind::Comp ? 0 : next;
                    hv.push_back(run(h, ns, std::vector<Nat>(ss.begin() + from, ss.begin() + from + h->l)));
                    next += h->l;
                }
                return run(f->f(), gv, hv);
            }
            case SrnKind::Rec: {
                std::vector<Nat> rest(ns.begin() + 1, ns.end());
                return rec(f, ns[0], rest, ss);
            }
        }
        throw SrnError("unknown definition kind");
    }

    Nat rec(const SrnDef& f, Nat x, const std::vector<Nat>& rest, const std::vector<Nat>& ss) {
        if (x == 0) return run(f->g(), rest, ss);
        Nat y = x >> 1;
        Nat r = rec(f, y, rest, ss);
        std::vector<Nat> hn{y};
        hn.insert(hn.end(), rest.begin(), rest.end());
        std::vector<Nat> hs = ss;
        hs.push_back(r);
        return run((x & 1) ? f->h1() : f->h0(), hn, hs);
    }

    Nat term(const SrnTerm& t, const Env& rho) {
        switch (t->kind) {
            case SrnTermKind::Lit: return t->value;
            case SrnTermKind::Var: {
                auto it = rho.find(t->name);
                if (it == rho.end()) throw SrnError("unbound variable " + t->name);
                return it->second;
            }
            case SrnTermKind::Apply: {
                std::vector<Nat> ns, ss;
                for (std::size_t i = 0; i < t->args.size(); ++i)
                    (i < t->fn->k ? ns : ss).push_back(term(t->args[i], rho));
                return run(t->fn, ns, ss);
            }
        }
        throw SrnError("unknown term kind");
    }
};

}  // namespace

Nat eval_def(const SrnDef& f, const std::vector<Nat>& normals, const std::vector<Nat>& safes, const EvalLimits& limits) {
    if (normals.size() != f->k || safes.size() != f->l)
        throw SrnError(who(f) + " has arity " + arity(f) + ", got (" + std::to_string(normals.size()) + ";" +
                       std::to_string(safes.size()) + ")");
    Evaluator ev{limits.fuel};
    return ev.run(f, normals, safes);
}

Nat eval_term(const SrnTerm& t, const Env& rho, const EvalLimits& limits) {
    Evaluator ev{limits.fuel};
    return ev.term(t, rho);
}

bool is_clsrn(const SrnDef& f) {
    for (const auto& p : f->parts)
        if (!is_clsrn(p)) return false;
    if (f->kind != SrnKind::Comp) return true;
    // Full composition hands every h_j the same safe prefix; it is linear
    // only when at most one h_j reads safe arguments at all.
    unsigned readers = 0;
    for (const auto& h : f->safes())
        if (h->l > 0) ++readers;
    return readers <= 1;
}

bool is_closed(const SrnTerm& t) {
    if (t->kind == SrnTermKind::Var) return false;
    for (const auto& a : t->args)
        if (!is_closed(a)) return false;
    return true;
}

Rational weight(const SrnDef& f) {
    if (f->is_base()) return Rational(0);
    Rational w(0);
    for (const auto& p : f->parts) w = max(w, weight(p));
    if (f->kind == SrnKind::Rec) return Rational(2) * max(w, Rational(1, 2));
    return Rational(3) * max(w, Rational(1, 3));
}

Rational weight(const SrnTerm& t) {
    switch (t->kind) {
        case SrnTermKind::Var: throw SrnError("open-term: weight of a term containing variable " + t->name);
        case SrnTermKind::Lit: {
            // n as the numeral s_{ν0}(…(s1(0))…): one application per digit.
            Rational w(0);
            for (unsigned i = 0; i < bit_length(t->value); ++i) w = Rational(2) * max(w, Rational(1, 2));
            return w;
        }
        case SrnTermKind::Apply: {
            Rational w = weight(t->fn);
            for (const auto& a : t->args) w = max(w, weight(a));
            return Rational(2) * max(w, Rational(1, 2));
        }
    }
    throw SrnError("unknown term kind");
}

// -------------------------------------------------------------- syntax

const SrnDef* SrnProgram::find(const std::string& name) const {
    for (const auto& [n, d] : defs)
        if (n == name) return &d;
    return nullptr;
}

namespace {

class Parser {
public:
    Parser(const std::string& text, const SrnProgram* prog, std::size_t base = 0)
        : s_(text), prog_(prog), base_(base) {}

    void ws() {
        while (i_ < s_.size()) {
            if (std::isspace(static_cast<unsigned char>(s_[i_]))) {
                ++i_;
            } else if (s_[i_] == '#') {
                while (i_ < s_.size() && s_[i_] != '\n') ++i_;
            } else {
                break;
            }
        }
    }
    bool at(char c) {
        ws();
        return i_ < s_.size() && s_[i_] == c;
    }
    bool eat(char c) {
        if (!at(c)) return false;
        ++i_;
        return true;
    }
    void expect(char c) {
        if (!eat(c)) fail(std::string("expected '") + c + "'");
    }
    bool done() {
        ws();
        return i_ >= s_.size();
    }
    [[noreturn]] void fail(const std::string& msg) const { throw SrnError(msg, base_ + i_); }
    std::size_t pos() const { return i_; }
    void reset(std::size_t p) { i_ = p; }

    std::string ident() {
        ws();
        std::size_t b = i_;
        while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_' || s_[i_] == '\''))
            ++i_;
        if (b == i_ || std::isdigit(static_cast<unsigned char>(s_[b]))) {
            i_ = b;
            fail("expected identifier");
        }
        return s_.substr(b, i_ - b);
    }
    bool at_ident() {
        ws();
        return i_ < s_.size() && (std::isalpha(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_');
    }
    unsigned number() {
        ws();
        std::size_t b = i_;
        while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
        if (b == i_) fail("expected number");
        try {
            return static_cast<unsigned>(std::stoul(s_.substr(b, i_ - b)));
        } catch (const std::exception&) {
            i_ = b;
            fail("number out of range");
        }
    }
    Nat natural() {
        ws();
        std::size_t b = i_;
        while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
        try {
            return std::stoull(s_.substr(b, i_ - b));
        } catch (const std::exception&) {
            i_ = b;
            fail("numeral out of range");
        }
    }
    std::vector<unsigned> params(std::size_t count) {
        expect('[');
        std::vector<unsigned> r;
        for (std::size_t n = 0; n < count; ++n) {
            if (n) expect(';');
            r.push_back(number());
        }
        expect(']');
        return r;
    }

    SrnDef def() {
        ws();
        std::size_t start = i_;
        std::string id = ident();
        try {
            if (id == "z") {
                auto p = params(2);
                return srn_zero(p[0], p[1]);
            }
            if (id == "s0") return srn_s0();
            if (id == "s1") return srn_s1();
            if (id == "p") return srn_pred();
            if (id == "b") return srn_branch();
            if (id == "pi") {
                auto p = params(3);
                return srn_proj(p[0], p[1], p[2]);
            }
            if (id == "comp" || id == "lcomp") {
                auto p = params(4);
                expect('(');
                SrnDef f = def();
                std::vector<SrnDef> gs, hs;
                for (unsigned n = 0; n < p[2]; ++n) {
                    expect(';');
                    gs.push_back(def());
                }
                for (unsigned n = 0; n < p[3]; ++n) {
                    expect(';');
                    hs.push_back(def());
                }
                expect(')');
                if (f->k != p[2] || f->l != p[3])
                    throw SrnError(id + ": head " + who(f) + " has arity " + arity(f) + ", declared (" +
                                   std::to_string(p[2]) + ";" + std::to_string(p[3]) + ")");
                return id == "comp" ? srn_comp(p[0], p[1], f, gs, hs) : srn_lcomp(p[0], p[1], f, gs, hs);
            }
            if (id == "rec") {
                auto p = params(2);
                expect('(');
                SrnDef g = def();
                expect(';');
                SrnDef h0 = def();
                expect(';');
                SrnDef h1 = def();
                expect(')');
                return srn_rec(p[0], p[1], g, h0, h1);
            }
        } catch (const SrnError& e) {
            if (e.position()) throw;
            throw SrnError(e.what(), base_ + start);
        }
        if (prog_) {
            if (const SrnDef* d = prog_->find(id)) return *d;
        }
        i_ = start;
        fail("unknown definition '" + id + "'");
    }

    bool is_keyword(const std::string& id) const {
        return id == "z" || id == "s0" || id == "s1" || id == "p" || id == "b" || id == "pi" || id == "comp" ||
               id == "lcomp" || id == "rec";
    }

    SrnTerm term() {
        ws();
        std::size_t start = i_;
        if (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) return srn_lit(natural());
        std::string id = ident();
        bool known = is_keyword(id) || (prog_ && prog_->find(id));
        if (!at('(') && !at('[')) {
            if (known && !(prog_ && prog_->find(id))) {
                i_ = start;
                fail("definition '" + id + "' used without arguments");
            }
            if (!known) return srn_var(id);
        }
        i_ = start;
        SrnDef f = def();
        expect('(');
        std::vector<SrnTerm> args;
        std::optional<std::size_t> split;
        if (!at(')')) {
            args.push_back(term());
            while (true) {
                if (eat(',')) {
                    args.push_back(term());
                } else if (at(';')) {
                    if (split) fail("second ';' in argument list");
                    ++i_;
                    split = args.size();
                    if (at(')')) break;
                    args.push_back(term());
                } else {
                    break;
                }
            }
        } else if (eat(';')) {
            split = 0;
        }
        expect(')');
        if (split && *split != f->k)
            throw SrnError(who(f) + " has normal arity " + std::to_string(f->k) + " but " + std::to_string(*split) +
                               " normal arguments are given",
                           base_ + start);
        try {
            return srn_apply(f, std::move(args));
        } catch (const SrnError& e) {
            throw SrnError(e.what(), base_ + start);
        }
    }

private:
    const std::string& s_;
    const SrnProgram* prog_;
    std::size_t base_;
    std::size_t i_ = 0;
};

}  // namespace

SrnProgram parse_program(const std::string& text) {
    SrnProgram prog;
    std::size_t i = 0;
    while (i < text.size()) {
        // One statement: up to a newline at parenthesis depth 0.
        std::size_t b = i;
        int depth = 0;
        bool comment = false;
        while (i < text.size()) {
            char c = text[i];
            if (comment) {
                if (c == '\n') comment = false;
            } else if (c == '#') {
                comment = true;
            } else if (c == '(') {
                ++depth;
            } else if (c == ')') {
                --depth;
            }
            if (c == '\n' && depth <= 0 && !comment) break;
            ++i;
        }
        std::string stmt = text.substr(b, i - b);
        ++i;
        Parser p(stmt, &prog, b);
        if (p.done()) continue;
        std::string name = p.ident();
        p.ws();
        if (!(p.eat(':') && p.eat('='))) p.fail("expected ':='");
        if (prog.find(name)) p.fail("duplicate definition '" + name + "'");
        SrnDef d = p.def();
        if (!p.done()) p.fail("trailing input");
        prog.defs.emplace_back(name, with_label(d, name));
    }
    return prog;
}

SrnDef parse_def(const std::string& text, const SrnProgram* prog) {
    Parser p(text, prog);
    SrnDef d = p.def();
    if (!p.done()) p.fail("trailing input");
    return d;
}

SrnTerm parse_srn_term(const std::string& text, const SrnProgram* prog) {
    Parser p(text, prog);
    SrnTerm t = p.term();
    if (!p.done()) p.fail("trailing input");
    return t;
}

std::variant<SrnDef, SrnTerm> parse_srn(const std::string& text, const SrnProgram* prog) {
    try {
        return parse_def(text, prog);
    } catch (const SrnError&) {
    }
    return parse_srn_term(text, prog);
}

std::string print_def(const SrnDef& d) {
    auto ps = [](std::initializer_list<unsigned> v) {
        std::string r = "[";
        bool first = true;
        for (unsigned x : v) {
            if (!first) r += ";";
            r += std::to_string(x);
            first = false;
        }
        return r + "]";
    };
    switch (d->kind) {
        case SrnKind::Zero: return "z" + ps({d->k, d->l});
        case SrnKind::S0: return "s0";
        case SrnKind::S1: return "s1";
        case SrnKind::Pred: return "p";
        case SrnKind::Branch: return "b";
        case SrnKind::Proj: return "pi" + ps({d->k, d->l, d->index});
        case SrnKind::Comp:
        case SrnKind::LComp: {
            std::string r = std::string(d->kind == SrnKind::Comp ? "comp" : "lcomp") + ps({d->k, d->l, d->kp, d->lp}) + "(";
            for (std::size_t i = 0; i < d->parts.size(); ++i) r += (i ? "; " : "") + print_def(d->parts[i]);
            return r + ")";
        }
        case SrnKind::Rec:
            return "rec" + ps({d->k, d->l}) + "(" + print_def(d->g()) + "; " + print_def(d->h0()) + "; " +
                   print_def(d->h1()) + ")";
    }
    return "?";
}

std::string print_term(const SrnTerm& t) {
    switch (t->kind) {
        case SrnTermKind::Var: return t->name;
        case SrnTermKind::Lit: return std::to_string(t->value);
        case SrnTermKind::Apply: {
            std::string r = print_def(t->fn) + "(";
            for (std::size_t i = 0; i < t->args.size(); ++i) {
                if (i) r += (i == t->fn->k ? "; " : ", ");
                r += print_term(t->args[i]);
            }
            return r + ")";
        }
    }
    return "?";
}

namespace {

const char* kind_name(SrnKind k) {
    switch (k) {
        case SrnKind::Zero: return "zero";
        case SrnKind::S0: return "s0";
        case SrnKind::S1: return "s1";
        case SrnKind::Pred: return "pred";
        case SrnKind::Proj: return "proj";
        case SrnKind::Branch: return "branch";
        case SrnKind::Comp: return "comp";
        case SrnKind::LComp: return "lcomp";
        case SrnKind::Rec: return "rec";
    }
    return "?";
}

}  // namespace

nlohmann::json def_to_json(const SrnDef& d) {
    nlohmann::json j = {{"kind", kind_name(d->kind)}, {"k", d->k}, {"l", d->l}};
    if (!d->label.empty()) j["label"] = d->label;
    if (d->kind == SrnKind::Proj) j["index"] = d->index;
    if (d->kind == SrnKind::Comp || d->kind == SrnKind::LComp) {
        j["f"] = def_to_json(d->f());
        j["normals"] = nlohmann::json::array();
        j["safes"] = nlohmann::json::array();
        for (const auto& g : d->normals()) j["normals"].push_back(def_to_json(g));
        for (const auto& h : d->safes()) j["safes"].push_back(def_to_json(h));
    }
    if (d->kind == SrnKind::Rec) {
        j["g"] = def_to_json(d->g());
        j["h0"] = def_to_json(d->h0());
        j["h1"] = def_to_json(d->h1());
    }
    return j;
}

nlohmann::json term_to_json(const SrnTerm& t) {
    switch (t->kind) {
        case SrnTermKind::Var: return {{"kind", "var"}, {"name", t->name}};
        case SrnTermKind::Lit: return {{"kind", "lit"}, {"value", t->value}};
        case SrnTermKind::Apply: {
            nlohmann::json args = nlohmann::json::array();
            for (const auto& a : t->args) args.push_back(term_to_json(a));
            return {{"kind", "apply"}, {"fn", def_to_json(t->fn)}, {"args", args}};
        }
    }
    return nullptr;
}

}  // namespace walt
