// Acceptance run: one PASS/FAIL line per criterion, report lines start with '#'.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Dense>

#include "support.hpp"
#include "walt/compiler.hpp"

using namespace walt;

namespace {

// Pinned limits.
constexpr double kArithmeticSeconds = 5.0;
constexpr double kContractSeconds = 60.0;
constexpr std::uint64_t kStepBudget = 10'000'000;
constexpr Nat kInputBound = 32;
constexpr std::size_t kSampledTuples = 200;
constexpr std::size_t kMinPrograms = 12;
constexpr std::size_t kReducts = 1000;
constexpr unsigned kProbeMaxLen = 12;
constexpr unsigned kMaxDegree = 4;
constexpr double kMinRSquared = 0.99;
constexpr double kRatioSlack = 1.5;

struct Outcome {
    bool pass = true;
    std::string summary;
};

class Criterion {
public:
    void fail(const std::string& what) {
        if (failures_ < 5) std::cout << "#   failure: " << what << "\n";
        ++failures_;
    }
    void expect(bool ok, const std::string& what) {
        ++checks_;
        if (!ok) fail(what);
    }
    std::size_t checks() const { return checks_; }
    std::size_t failures() const { return failures_; }

private:
    std::size_t checks_ = 0;
    std::size_t failures_ = 0;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(prec) << v;
    return o.str();
}

SrnProgram load_corpus() {
    std::ifstream in(WALT_CORPUS_DIR "/programs.srn");
    if (!in) throw std::runtime_error("cannot read corpus");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_program(ss.str());
}

Term nf(const Term& t, std::uint64_t* steps = nullptr) {
    auto r = normalize(t, kStepBudget);
    if (steps) *steps = r.steps;
    return r.reached_nf ? r.term : nullptr;
}

bool nf_is(const Term& t, const Term& expected) {
    Term n = nf(t);
    return n && alpha_eq(n, expected);
}

// "$W =o … =o $^m W =o … $^m W" written out, independent of safe_fn_type.
std::string boxes_w(unsigned m) { return std::string(m, '$') + "W"; }
Formula stated(unsigned normals, unsigned safes, unsigned m) {
    std::string s;
    for (unsigned i = 0; i < normals; ++i) s += "$W =o ";
    for (unsigned i = 0; i < safes; ++i) s += boxes_w(m) + " =o ";
    return parse_formula(s + boxes_w(m));
}

// ----------------------------------------------------------------- 1

Outcome arithmetic() {
    Criterion c;
    auto t0 = Clock::now();
    for (Nat n = 0; n <= 64; ++n) {
        std::string at = " at n=" + std::to_string(n);
        if (n >= 1) c.expect(nf_is(app(ws0().term, word_term(n)), word_term(2 * n)), "Ws0" + at);
        c.expect(nf_is(app(ws1().term, word_term(n)), word_term(2 * n + 1)), "Ws1" + at);
        c.expect(nf_is(app(pred_w().term, word_term(n)), word_term(n / 2)), "Pred" + at);
        Term a = word_term(n + 3), b = word_term(2 * n + 1);
        c.expect(nf_is(app(branch_w().term, {word_term(n), a, b}), n == 0 ? a : b), "B" + at);
    }
    double s = seconds_since(t0);
    bool ok = c.failures() == 0 && s < kArithmeticSeconds;
    return {ok, std::to_string(c.checks()) + " exact alpha-equalities, " + std::to_string(c.failures()) +
                    " failures, " + fmt(s, 2) + " s (limit " + fmt(kArithmeticSeconds, 0) + " s)"};
}

// ----------------------------------------------------------------- 2

// Runs the combinator built around every projection of M and collects the
// normal arguments followed by the safe arguments M receives.
std::vector<Nat> observe(unsigned n, unsigned s_of_m, unsigned m,
                         const std::function<TypedTerm(const TypedTerm&)>& build, const std::vector<Nat>& inputs,
                         bool* ok) {
    std::vector<Nat> out;
    for (unsigned i = 1; i <= n; ++i) {
        auto r = support::run_words(build(support::normal_projection(n, s_of_m, m, i)), inputs);
        if (!r) *ok = false;
        out.push_back(r.value_or(~Nat{0}));
    }
    for (unsigned k = 1; k <= s_of_m; ++k) {
        auto r = support::run_words(build(support::safe_projection(n, s_of_m, m, k)), inputs);
        if (!r) *ok = false;
        out.push_back(r.value_or(~Nat{0}));
    }
    return out;
}

std::string show(const std::vector<Nat>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
    return s + "]";
}

Outcome contracts() {
    Criterion c;
    auto t0 = Clock::now();

    // eager tensor destruction
    for (unsigned m = 1; m <= 3; ++m) {
        std::vector<Term> comps;
        std::vector<std::string> binders;
        Term body = var("f");
        for (unsigned i = 0; i < m; ++i) {
            comps.push_back(word_term(i + 2));
            binders.push_back("x" + std::to_string(i));
        }
        for (const auto& b : binders) body = app(body, var(b));
        Term expected = var("f");
        for (const auto& t : comps) expected = app(expected, t);
        std::uint64_t steps = 0;
        Term r = nf(app(tensor_match(binders, body), tensor(comps)), &steps);
        c.expect(r && alpha_eq(r, expected) && steps >= 1, "tensor destruction m=" + std::to_string(m));
    }
    // coerce
    for (unsigned m = 0; m <= 3; ++m)
        for (Nat n = 0; n <= 32; ++n)
            c.expect(nf_is(app(coerce(m).term, word_term(n)), word_term(n)),
                     "coerce(" + std::to_string(m) + ") on " + std::to_string(n));
    // diagonal
    for (unsigned m = 1; m <= 3; ++m)
        for (unsigned n = 1; n <= 3; ++n) {
            TypedTerm d = diagonal(m, n);
            for (Nat a = 0; a < 16; ++a) {
                std::uint64_t steps = 0;
                Term r = nf(app(d.term, word_term(a)), &steps);
                c.expect(r && steps >= 1 && alpha_eq(r, tensor(std::vector<Term>(n, word_term(a)))),
                         "diagonal(" + std::to_string(m) + "," + std::to_string(n) + ") on " + std::to_string(a));
            }
        }

    auto inputs = [](unsigned n, unsigned s) {
        std::vector<Nat> normals, safes;
        for (unsigned i = 0; i < n; ++i) normals.push_back(20 + i);
        for (unsigned j = 0; j < s; ++j) safes.push_back(40 + j);
        return std::pair{normals, safes};
    };
    auto check_sharing = [&](const std::string& what, unsigned n, unsigned s_in, unsigned s_of_m,
                             const std::function<TypedTerm(const TypedTerm&)>& build,
                             const std::function<std::vector<Nat>(const std::vector<Nat>&)>& expected_safe) {
        auto [normals, safes] = inputs(n, s_in);
        std::vector<Nat> all(normals);
        all.insert(all.end(), safes.begin(), safes.end());
        std::vector<Nat> expect(normals);
        auto es = expected_safe(safes);
        expect.insert(expect.end(), es.begin(), es.end());
        bool ran = true;
        std::vector<Nat> got = observe(n, s_of_m, 1, build, all, &ran);
        c.expect(ran && got == expect, what + ": got " + show(got) + " expected " + show(expect));
    };

    for (unsigned n = 0; n <= 2; ++n)
        for (unsigned s = 1; s <= 3; ++s) {
            std::string tag = "(n=" + std::to_string(n) + ",s=" + std::to_string(s) + ")";
            // share: M n s1..ss ss
            check_sharing("share" + tag, n, s, s + 1, [&](const TypedTerm& m) { return share(n, s, 1, m); },
                          [](std::vector<Nat> v) {
                              v.push_back(v.back());
                              return v;
                          });
            // rotate: M n s2..ss s1
            check_sharing("rotate" + tag, n, s, s, [&](const TypedTerm& m) { return rotate(n, s, 1, m); },
                          [](std::vector<Nat> v) {
                              std::rotate(v.begin(), v.begin() + 1, v.end());
                              return v;
                          });
            for (unsigned q = 0; q <= 2; ++q) {
                std::string tq = "(n=" + std::to_string(n) + ",p=" + std::to_string(s) + ",q=" + std::to_string(q) + ")";
                // mshare: M n s1..sp (sp x q)
                check_sharing("mshare" + tq, n, s, s + q, [&](const TypedTerm& m) { return mshare(n, s, q, 1, m); },
                              [q](std::vector<Nat> v) {
                                  Nat last = v.back();
                                  for (unsigned i = 0; i < q; ++i) v.push_back(last);
                                  return v;
                              });
                // rmshare: M n s2..sp s1 (s1 x q); collapses to M when q = 0
                check_sharing("rmshare" + tq, n, s, s + q, [&](const TypedTerm& m) { return rmshare(n, s, q, 1, m); },
                              [q](std::vector<Nat> v) {
                                  if (q == 0) return v;
                                  Nat first = v.front();
                                  std::rotate(v.begin(), v.begin() + 1, v.end());
                                  for (unsigned i = 0; i < q; ++i) v.push_back(first);
                                  return v;
                              });
            }
        }

    // mshsqcomp: singles x_{p-i+1}..x_p, then p copies of each of x_1..x_{p-i};
    // M receives p copies of each of x_1..x_p
    for (unsigned p : {2u, 3u})
        for (unsigned i = 0; i <= p; ++i) {
            std::vector<Nat> x;
            for (unsigned a = 0; a < p; ++a) x.push_back(40 + a);
            std::vector<Nat> in = {20};
            for (unsigned a = p - i; a < p; ++a) in.push_back(x[a]);
            for (unsigned a = 0; a < p - i; ++a)
                for (unsigned k = 0; k < p; ++k) in.push_back(x[a]);
            std::vector<Nat> expect = {20};
            for (unsigned a = 0; a < p; ++a)
                for (unsigned k = 0; k < p; ++k) expect.push_back(x[a]);
            bool ran = true;
            std::vector<Nat> got =
                observe(1, p * p, 1, [&](const TypedTerm& m) { return mshsqcomp(1, p, i, 1, m); }, in, &ran);
            c.expect(ran && got == expect, "mshsqcomp(p=" + std::to_string(p) + ",i=" + std::to_string(i) +
                                               "): got " + show(got) + " expected " + show(expect));
        }

    double s = seconds_since(t0);
    bool ok = c.failures() == 0 && s < kContractSeconds;
    return {ok, std::to_string(c.checks()) + " contract checks, " + std::to_string(c.failures()) + " failures, " +
                    fmt(s, 2) + " s (limit " + fmt(kContractSeconds, 0) + " s)"};
}

// ----------------------------------------------------------------- 3

Outcome typing() {
    Criterion c;
    auto typed = [&](const std::string& what, const TypedTerm& t, const Formula& expected) {
        CheckResult r = check_derivation(t.derivation);
        bool ok = r.ok && r.judgment && r.judgment->gamma.empty() && r.judgment->delta.empty() &&
                  r.judgment->epsilon.empty() && alpha_eq(r.judgment->subject, t.term) &&
                  alpha_eq(r.judgment->type, expected) && alpha_eq(t.formula, expected);
        c.expect(ok, what + (r.ok ? " has formula " + print_formula(t.formula) + ", stated " + print_formula(expected)
                                  : " derivation rejected: " + describe(*r.violation)));
    };
    auto F = [](const std::string& s) { return parse_formula(s); };

    for (Nat n = 0; n <= 64; ++n) typed("word(" + std::to_string(n) + ")", word(n), F("W"));
    typed("Ws0", ws0(), F("W -o W"));
    typed("Ws1", ws1(), F("W -o W"));
    typed("Pred", pred_w(), F("W -o W"));
    typed("B", branch_w(), F("W -o W -o W -o W"));
    for (unsigned m = 0; m <= 3; ++m) typed("coerce(" + std::to_string(m) + ")", coerce(m), F("W -o " + boxes_w(m)));
    for (unsigned n = 1; n <= 3; ++n) {
        typed("bembed(n,Ws0)", bembed(n, ws0()), F(boxes_w(n) + " =o " + boxes_w(n)));
        typed("bembed(n,coerce(2))", bembed(n, coerce(2)), F(boxes_w(n) + " =o " + boxes_w(n + 2)));
        typed("lembed(n,1,coerce(1))", lembed(n, 1, coerce(1)), F(boxes_w(n) + " -o " + boxes_w(n + 1)));
        typed("lembed(n,0,word(3))", lembed(n, 0, word(3)), F(boxes_w(n)));
    }
    // eembed: normal arguments stay $W, safe arguments and the result shift by n
    for (unsigned n = 0; n <= 2; ++n)
        for (unsigned q = 0; q <= 2; ++q)
            typed("eembed(" + std::to_string(n) + ",1," + std::to_string(q) + ")",
                  eembed(n, 1, q, support::normal_projection(1, q, 1, 1)), stated(1, q, 1 + n));
    for (unsigned m = 1; m <= 3; ++m)
        for (unsigned n = 1; n <= 3; ++n) {
            std::string comps;
            for (unsigned i = 0; i < n; ++i) comps += boxes_w(m) + " =o ";
            typed("diagonal(" + std::to_string(m) + "," + std::to_string(n) + ")", diagonal(m, n),
                  F("W -o $(forall al. (" + comps + "al) -o al)"));
        }
    for (unsigned n = 0; n <= 1; ++n)
        for (unsigned s = 0; s <= 1; ++s)
            for (unsigned m = 1; m <= 2; ++m) {
                std::string src = "\\@w";
                for (unsigned i = 0; i < n; ++i) src += " @n" + std::to_string(i);
                for (unsigned j = 0; j < s; ++j) src += " @s" + std::to_string(j);
                TypedTerm g = elaborate(src + " @a. a", iter_step_type(n, s, m));
                typed("iter_step_type", g, stated(1 + n, s + 1, m));
                typed("iterator(" + std::to_string(n) + "," + std::to_string(s) + "," + std::to_string(m) + ")",
                      iterator(n, s, m, g, g, g), stated(1 + n, s, m + 4));
            }
    for (unsigned n = 0; n <= 2; ++n)
        for (unsigned s = 1; s <= 3; ++s) {
            typed("share", share(n, s, 1, support::safe_projection(n, s + 1, 1, 1)), stated(n, s, 5));
            typed("rotate", rotate(n, s, 1, support::safe_projection(n, s, 1, 1)), stated(n, s, 1));
            for (unsigned q = 0; q <= 2; ++q) {
                TypedTerm m = support::safe_projection(n, s + q, 1, 1);
                typed("mshare", mshare(n, s, q, 1, m), stated(n, s, 1 + 4 * q));
                typed("rmshare", rmshare(n, s, q, 1, m), stated(n, s, 1 + 4 * q));
            }
        }
    // sqcomp at the worked-example arities: F (1;2), G (1;0), H1 (1;3), H2 (1;1), s = 3
    TypedTerm f = support::safe_projection(1, 2, 1, 1);
    TypedTerm g = bembed(1, ws1());
    TypedTerm h1 = support::safe_projection(1, 3, 1, 2);
    TypedTerm h2 = support::safe_projection(1, 1, 1, 1);
    typed("sqcomp(1,3,1)", sqcomp(1, 3, 1, f, {g}, {h1, h2}), stated(1, 9, 3));
    typed("sqcomp(1,1,1)", sqcomp(1, 1, 1, support::safe_projection(1, 1, 1, 1), {g}, {h2}), stated(1, 1, 3));
    typed("lincomp", lincomp(1, f, {g}, {h1, h2}), stated(1, 4, 3));
    for (unsigned p : {2u, 3u})
        for (unsigned i = 0; i <= p; ++i)
            typed("mshsqcomp(1," + std::to_string(p) + "," + std::to_string(i) + ",1)",
                  mshsqcomp(1, p, i, 1, support::safe_projection(1, p * p, 1, 1)),
                  stated(1, i + p * (p - i), 1 + 4 * (p - 1) * i));
    return {c.failures() == 0, std::to_string(c.checks()) + " builder instances checked, " +
                                   std::to_string(c.failures()) + " failures"};
}

// ----------------------------------------------------------------- 4

Outcome theorem_points(const SrnProgram& prog) {
    Criterion formulas, numerals;
    for (const auto& [name, d] : prog.defs) {
        try {
            CompiledDef cd = compile_def(d);
            formulas.expect(cd.m >= 1 && alpha_eq(cd.target.formula, stated(d->k, d->l, cd.m)) &&
                                check_derivation(cd.target.derivation).ok,
                            name + " compiles to " + print_formula(cd.target.formula));
        } catch (const std::exception& e) {
            formulas.expect(false, name + ": " + e.what());
        }
    }
    for (Nat n = 0; n <= 32; ++n) {
        CompiledTerm c = interpret(srn_lit(n), {});
        std::uint64_t steps = 0;
        Term r = nf(c.target.term, &steps);
        numerals.expect(r && alpha_eq(r, word_term(n)),
                        "[[" + std::to_string(n) + "]] normalizes in " + std::to_string(steps) + " steps");
    }

    // Modal depth m of the interpretation against the weight, over numerals and
    // every corpus definition applied to small numerals.
    std::vector<SrnTerm> terms;
    for (Nat n = 0; n <= 32; ++n) terms.push_back(srn_lit(n));
    for (const auto& [name, d] : prog.defs)
        for (Nat v : {Nat{0}, Nat{1}, Nat{5}, Nat{31}}) {
            std::vector<SrnTerm> args(d->k + d->l, srn_lit(v));
            terms.push_back(srn_apply(d, args));
        }
    std::size_t within = 0, total = 0, zero_weight = 0;
    std::string worst;
    double worst_ratio = 0;
    for (const auto& t : terms) {
        CompiledTerm c = interpret(t, {});
        Rational w = weight(t);
        std::uint64_t dd = depth(c.target.derivation);
        ++total;
        if (Rational(static_cast<std::int64_t>(c.depth)) <= w && Rational(static_cast<std::int64_t>(dd)) <= w) ++within;
        if (w.num == 0) {
            ++zero_weight;
            continue;
        }
        double ratio = static_cast<double>(dd) / w.to_double();
        if (ratio > worst_ratio) {
            worst_ratio = ratio;
            worst = print_term(t) + ": m=" + std::to_string(c.depth) + ", derivation depth " + std::to_string(dd) +
                    ", weight " + w.str();
        }
    }
    CompiledTerm zero = interpret(srn_lit(0), {});
    std::cout << "# depth vs weight: [[0]] has m=" << zero.depth << ", derivation depth "
              << depth(zero.target.derivation) << ", weight " << weight(srn_lit(0)).str() << "; " << zero_weight
              << " terms have weight 0\n";
    std::cout << "# depth vs weight: largest derivation depth / weight " << fmt(worst_ratio, 2) << " at " << worst
              << "\n";
    bool depth_ok = within == total;
    bool ok = formulas.failures() == 0 && numerals.failures() == 0 && depth_ok;
    return {ok, "formulas " + std::to_string(formulas.checks() - formulas.failures()) + "/" +
                    std::to_string(formulas.checks()) + " with m >= 1; numerals " +
                    std::to_string(numerals.checks() - numerals.failures()) + "/" + std::to_string(numerals.checks()) +
                    " reach word(n); depth <= weight on " + std::to_string(within) + "/" + std::to_string(total) +
                    " corpus terms"};
}

// ----------------------------------------------------------------- 5

void clause_kinds(const SrnDef& d, std::set<SrnKind>& out) {
    out.insert(d->kind == SrnKind::LComp ? SrnKind::Comp : d->kind);
    for (const auto& p : d->parts) clause_kinds(p, out);
}

Outcome soundness(const SrnProgram& prog, bool full) {
    auto t0 = Clock::now();
    std::mt19937_64 rng(20241016);
    std::uniform_int_distribution<Nat> any(0, kInputBound - 1);
    std::size_t runs = 0, equal = 0, programs = 0, sampled_programs = 0;
    std::set<SrnKind> kinds;
    Criterion c;
    bool nonlinear_comp = false, rec_nest = false;
    for (const auto& [name, d] : prog.defs) {
        const unsigned arity = d->k + d->l;
        ++programs;
        clause_kinds(d, kinds);
        if (!is_clsrn(d)) nonlinear_comp = true;
        std::set<SrnKind> sub;
        for (const auto& p : d->parts) clause_kinds(p, sub);
        if ((d->kind == SrnKind::Comp || d->kind == SrnKind::LComp) && sub.count(SrnKind::Rec)) rec_nest = true;
        if (d->kind == SrnKind::Rec && sub.count(SrnKind::Comp)) rec_nest = true;

        std::vector<std::vector<Nat>> tuples;
        if (full || arity <= 2) {
            std::size_t count = 1;
            for (unsigned a = 0; a < arity; ++a) count *= kInputBound;
            for (std::size_t code = 0; code < count; ++code) {
                std::vector<Nat> t(arity);
                std::size_t v = code;
                for (unsigned a = 0; a < arity; ++a, v /= kInputBound) t[a] = v % kInputBound;
                tuples.push_back(t);
            }
        } else {
            ++sampled_programs;
            // corners from {0, 1, 31} in every position, then uniform samples
            std::size_t corners = 1;
            for (unsigned a = 0; a < arity; ++a) corners *= 3;
            const Nat corner[3] = {0, 1, kInputBound - 1};
            for (std::size_t code = 0; code < corners; ++code) {
                std::vector<Nat> t(arity);
                std::size_t v = code;
                for (unsigned a = 0; a < arity; ++a, v /= 3) t[a] = corner[v % 3];
                tuples.push_back(t);
            }
            for (std::size_t i = 0; i < kSampledTuples; ++i) {
                std::vector<Nat> t(arity);
                for (auto& x : t) x = any(rng);
                tuples.push_back(t);
            }
        }
        for (const auto& t : tuples) {
            std::vector<SrnTerm> args;
            Env rho;
            for (unsigned a = 0; a < arity; ++a) {
                std::string v = "x" + std::to_string(a);
                args.push_back(srn_var(v));
                rho[v] = t[a];
            }
            SoundnessReport r = check_soundness(srn_apply(d, args), rho, kStepBudget);
            ++runs;
            if (r.equal) ++equal;
            c.expect(r.equal, name + " " + show(t) + ": oracle " + std::to_string(r.oracle) + ", normal form " +
                                  r.normal_form + (r.error.empty() ? "" : " (" + r.error + ")"));
        }
    }
    bool clauses = kinds.size() == 8;  // Zero S0 S1 Pred Proj Branch Comp Rec
    bool ok = c.failures() == 0 && programs >= kMinPrograms && clauses && nonlinear_comp && rec_nest;
    std::cout << "# soundness: " << programs << " programs, " << kinds.size() << "/8 clauses, "
              << (full ? "exhaustive" : "exhaustive for total arity <= 2, " + std::to_string(sampled_programs) +
                                            " programs sampled (corners + " + std::to_string(kSampledTuples) + ")")
              << "\n";
    return {ok, std::to_string(equal) + "/" + std::to_string(runs) + " runs equal, inputs < " +
                    std::to_string(kInputBound) + ", " + fmt(seconds_since(t0), 1) + " s"};
}

// ----------------------------------------------------------------- 6

Outcome dynamics(const SrnProgram& prog) {
    Criterion c;
    std::mt19937_64 rng(77);
    // pool of reducts from typed programs
    std::vector<Term> pool;
    std::vector<Term> programs = {app(ws0().term, word_term(11)), app(pred_w().term, word_term(22)),
                                  app(branch_w().term, {word_term(3), word_term(1), word_term(2)}),
                                  app(coerce(2).term, word_term(9)), app(diagonal(1, 2).term, word_term(5))};
    for (const char* name : {"copy", "ifz", "lpair", "walk"}) {
        const SrnDef& d = *prog.find(name);
        std::vector<SrnTerm> args(d->k + d->l, srn_lit(3));
        programs.push_back(interpret(srn_apply(d, args), {}).target.term);
    }
    std::size_t fired = 0;
    auto clause_ok = [](const Redex& r, const support::NaiveStep& n) {
        if (n.occurrences >= 1 && !n.arg_is_value) return false;
        if (n.occurrences >= 2 && n.arg_free > 1) return false;
        switch (r.kind) {
            case RedexKind::Erase: return n.occurrences == 0;
            case RedexKind::LinearValue: return n.occurrences == 1;
            case RedexKind::SharedValue: return n.occurrences >= 2;
        }
        return false;
    };
    for (const auto& p : programs) {
        Trace tr = trace(p, kStepBudget);
        c.expect(tr.reached_normal_form, "trace of a typed program did not finish");
        Term prev = tr.initial;
        pool.push_back(prev);
        for (const auto& s : tr.steps) {
            // every fired step satisfies its clause and is an unrestricted β step
            auto naive = support::naive_beta(support::to_named(prev), s.redex.path);
            ++fired;
            c.expect(naive && clause_ok(s.redex, *naive) && alpha_eq(support::from_named(naive->result), s.term),
                     "fired step disagrees with naive beta");
            prev = s.term;
            pool.push_back(prev);
        }
    }
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::size_t redexes = 0;
    for (std::size_t i = 0; i < kReducts; ++i) {
        const Term& t = pool[pick(rng)];
        auto named = support::to_named(t);
        for (const auto& r : eligible_redexes(t)) {
            ++redexes;
            auto naive = support::naive_beta(named, r.path);
            c.expect(naive && clause_ok(r, *naive) && alpha_eq(support::from_named(naive->result), reduce_once(t, r)),
                     "eligible redex disagrees with naive beta");
        }
    }
    return {c.failures() == 0, std::to_string(fired) + " fired steps and " + std::to_string(redexes) +
                                   " eligible redexes in " + std::to_string(kReducts) +
                                   " sampled reducts agree with naive beta and the clause restrictions"};
}

// ----------------------------------------------------------------- 7

// R² of the least-squares polynomial of the given degree.
double poly_r_squared(const std::vector<double>& x, const std::vector<double>& y, unsigned degree) {
    const Eigen::Index n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd a(n, degree + 1);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (unsigned d = 0; d <= degree; ++d) a(i, d) = std::pow(x[i], d);
        b(i) = y[i];
    }
    Eigen::VectorXd coef = a.colPivHouseholderQr().solve(b);
    const double mean = b.mean();
    const double ss_res = (a * coef - b).squaredNorm();
    const double ss_tot = (b.array() - mean).square().sum();
    return ss_tot == 0 ? 1.0 : 1.0 - ss_res / ss_tot;
}

Outcome polytime(const SrnProgram& prog) {
    std::size_t probed = 0, good = 0;
    for (const auto& [name, d] : prog.defs) {
        if (d->k == 0) continue;
        ++probed;
        std::vector<double> len, steps;
        bool monotone = true, finished = true, sound = true;
        for (unsigned l = 1; l <= kProbeMaxLen; ++l) {
            std::vector<SrnTerm> args;
            for (unsigned a = 0; a < d->k + d->l; ++a) args.push_back(srn_lit(a == 0 ? (Nat{1} << l) - 1 : 1));
            SrnTerm t = srn_apply(d, args);
            CompiledTerm c = interpret(t, {});
            auto r = normalize(c.target.term, kStepBudget);
            if (!r.reached_nf) finished = false;
            // outputs wider than 64 bits are not checked against the oracle
            try {
                Nat o = eval_term(t, {});
                if (!alpha_eq(r.term, word_term(o))) sound = false;
            } catch (const SrnError&) {
            }
            if (!steps.empty() && static_cast<double>(r.steps) < steps.back()) monotone = false;
            len.push_back(l);
            steps.push_back(static_cast<double>(r.steps));
        }
        unsigned degree = 0;
        double r2 = 0;
        for (unsigned dg = 0; dg <= kMaxDegree; ++dg) {
            r2 = poly_r_squared(len, steps, dg);
            degree = dg;
            if (r2 >= kMinRSquared) break;
        }
        double worst = 0;
        bool ratio_ok = true;
        for (std::size_t i = 1; i < steps.size(); ++i) {
            double ratio = steps[i] / steps[i - 1];
            double bound = kRatioSlack * std::pow(len[i] / len[i - 1], static_cast<double>(kMaxDegree));
            worst = std::max(worst, ratio / bound);
            if (ratio > bound) ratio_ok = false;
        }
        bool ok = finished && sound && monotone && r2 >= kMinRSquared && ratio_ok;
        if (ok) ++good;
        std::cout << "# probe " << std::left << std::setw(9) << name << std::right << " steps " << std::setw(7)
                  << static_cast<long long>(steps.front()) << " .. " << std::setw(8)
                  << static_cast<long long>(steps.back()) << "  degree " << degree << "  R^2 " << fmt(r2, 5)
                  << "  max ratio/bound " << fmt(worst, 3) << (monotone ? "" : "  NOT MONOTONE")
                  << (sound ? "" : "  MISMATCH") << "\n";
    }
    return {good == probed, std::to_string(good) + "/" + std::to_string(probed) +
                                " programs monotone over lengths 1.." + std::to_string(kProbeMaxLen) +
                                ", degree <= " + std::to_string(kMaxDegree) + " fit with R^2 >= " +
                                fmt(kMinRSquared, 2) + ", ratio bounded"};
}

// ----------------------------------------------------------------- 8

Outcome routing(const SrnProgram& prog) {
    Criterion c;
    // labelled by reading each definition: non-linear iff some composition feeds
    // the same safe arguments to more than one safe component
    const std::map<std::string, bool> linear = {
        {"zero11", true}, {"succ0", true},  {"succ1", true},    {"half", true},   {"pick", true},
        {"branch", true}, {"double", true}, {"halve", true},    {"ifz", false},   {"ones", true},
        {"copy", true},   {"concat", true}, {"prefixes", true}, {"mix", true},    {"walk", true},
        {"lsel", true},   {"lpair", true},  {"sif", false},     {"route", false}};
    for (const auto& [name, d] : prog.defs) {
        auto it = linear.find(name);
        c.expect(it != linear.end() && is_clsrn(d) == it->second, "classification of " + name);
        c.expect(full_to_linear_report(d).clsrn == is_clsrn(d), "report classification of " + name);
    }
    LinearityReport r = full_to_linear_report(*prog.find("route"));
    c.expect(!r.compositions.empty(), "route has compositions");
    if (!r.compositions.empty()) {
        const auto& top = r.compositions.front();
        c.expect(top.scheme == "sqcomp" && top.s == 3 && top.k == 1 && top.kp == 1 &&
                     top.safe_arities == std::vector<unsigned>{3, 1},
                 "route is routed through sqcomp(1,3,1)");
        std::cout << "# routing: route -> " << r.to_json()["compositions"][0].dump() << "\n";
    }
    CompiledDef cd = compile_def(*prog.find("route"));
    c.expect(check_derivation(cd.target.derivation).ok, "route derivation");
    LinearityReport l = full_to_linear_report(*prog.find("lpair"));
    c.expect(l.clsrn && l.compositions.front().scheme == "lincomp" && l.compositions.front().adapter == "none",
             "lpair uses the linear scheme without padding");
    return {c.failures() == 0, std::to_string(c.checks()) + " routing checks, " + std::to_string(c.failures()) +
                                   " failures"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    bool full = false;
    std::vector<int> known_fail;
    std::vector<int> only;
    app.add_flag("--full", full, "Exhaustive input grid for every program in the soundness differential");
    app.add_option("--known-fail", known_fail, "Criteria whose failure is documented; exit status ignores them");
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);

    SrnProgram prog = load_corpus();
    std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"word arithmetic homomorphism", arithmetic},
        {"combinator contracts", contracts},
        {"typing contracts", typing},
        {"theorem points 1, 3, 4", [&] { return theorem_points(prog); }},
        {"soundness differential", [&] { return soundness(prog, full); }},
        {"dynamics restrictions", [&] { return dynamics(prog); }},
        {"polytime probe", [&] { return polytime(prog); }},
        {"ClSRN/SRN routing", [&] { return routing(prog); }},
    };
    int unexpected = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        int id = static_cast<int>(i + 1);
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        bool known = std::find(known_fail.begin(), known_fail.end(), id) != known_fail.end();
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << ": " << o.summary
                  << (!o.pass && known ? " [documented]" : "") << std::endl;
        if (!o.pass && !known) ++unexpected;
    }
    return unexpected == 0 ? 0 : 1;
}
