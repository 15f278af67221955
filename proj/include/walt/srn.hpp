#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace walt {

using Nat = std::uint64_t;

class SrnError : public std::runtime_error {
public:
    explicit SrnError(const std::string& msg) : std::runtime_error(msg) {}
    SrnError(const std::string& msg, std::size_t pos)
        : std::runtime_error(msg + " at offset " + std::to_string(pos)), pos_(pos) {}
    std::optional<std::size_t> position() const { return pos_; }

private:
    std::optional<std::size_t> pos_;
};

// ------------------------------------------------------------ rationals

struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Rational() = default;
    Rational(std::int64_t n, std::int64_t d = 1);
    std::string str() const;
    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
};

Rational operator*(const Rational& a, const Rational& b);
bool operator==(const Rational& a, const Rational& b);
bool operator<(const Rational& a, const Rational& b);
inline bool operator<=(const Rational& a, const Rational& b) { return !(b < a); }
Rational max(const Rational& a, const Rational& b);

// ---------------------------------------------------------- definitions

enum class SrnKind : std::uint8_t { Zero, S0, S1, Pred, Proj, Branch, Comp, LComp, Rec };

struct SrnDefNode;
using SrnDef = std::shared_ptr<const SrnDefNode>;

struct SrnDefNode {
    SrnKind kind;
    unsigned k = 0;       // normal arity
    unsigned l = 0;       // safe arity
    unsigned index = 0;   // Proj: 1-based position among the k+l arguments
    unsigned kp = 0;      // Comp/LComp: normal arity of f
    unsigned lp = 0;      // Comp/LComp: safe arity of f
    // Comp/LComp: f, g_1..g_kp, h_1..h_lp.  Rec: g, h0, h1.
    std::vector<SrnDef> parts;
    std::string label;    // name given in a program file, display only
    std::uint64_t hash = 0;

    const SrnDef& f() const { return parts.at(0); }
    std::vector<SrnDef> normals() const;
    std::vector<SrnDef> safes() const;
    const SrnDef& g() const { return parts.at(0); }
    const SrnDef& h0() const { return parts.at(1); }
    const SrnDef& h1() const { return parts.at(2); }
    bool is_base() const { return kind != SrnKind::Comp && kind != SrnKind::LComp && kind != SrnKind::Rec; }
};

SrnDef srn_zero(unsigned k, unsigned l);
SrnDef srn_s0();
SrnDef srn_s1();
SrnDef srn_pred();
SrnDef srn_proj(unsigned k, unsigned l, unsigned i);
SrnDef srn_branch();
// Full safe composition. Each h_j has normal arity k and safe arity l_j <= l;
// h_j reads the first l_j safe arguments.
SrnDef srn_comp(unsigned k, unsigned l, SrnDef f, std::vector<SrnDef> gs, std::vector<SrnDef> hs);
// Linear safe composition: the safe arguments are split into consecutive
// blocks of sizes l_1..l_lp, one per h_j.
SrnDef srn_lcomp(unsigned k, unsigned l, SrnDef f, std::vector<SrnDef> gs, std::vector<SrnDef> hs);
// k is the full normal arity, including the recursion argument (k >= 1).
SrnDef srn_rec(unsigned k, unsigned l, SrnDef g, SrnDef h0, SrnDef h1);
SrnDef with_label(const SrnDef& d, const std::string& label);

bool structural_eq(const SrnDef& a, const SrnDef& b);
std::size_t def_size(const SrnDef& d);

// ---------------------------------------------------------------- terms

enum class SrnTermKind : std::uint8_t { Var, Apply, Lit };

struct SrnTermNode;
using SrnTerm = std::shared_ptr<const SrnTermNode>;

struct SrnTermNode {
    SrnTermKind kind;
    std::string name;             // Var
    SrnDef fn;                    // Apply
    std::vector<SrnTerm> args;    // Apply: k normals then l safes
    Nat value = 0;                // Lit
};

SrnTerm srn_var(const std::string& name);
SrnTerm srn_lit(Nat n);
SrnTerm srn_apply(SrnDef f, std::vector<SrnTerm> args);

using Env = std::map<std::string, Nat>;

// ----------------------------------------------------------- evaluation

struct EvalLimits {
    std::uint64_t fuel = 100'000'000;  // definition-node visits
};

Nat eval_def(const SrnDef& f, const std::vector<Nat>& normals, const std::vector<Nat>& safes,
             const EvalLimits& limits = {});
Nat eval_term(const SrnTerm& t, const Env& rho, const EvalLimits& limits = {});

bool is_clsrn(const SrnDef& f);
bool is_closed(const SrnTerm& t);

Rational weight(const SrnDef& f);
// Throws SrnError("open-term …") when t has variables.
Rational weight(const SrnTerm& t);

// Binary length; 0 has length 0.
unsigned bit_length(Nat n);

// -------------------------------------------------------------- syntax

struct SrnProgram {
    std::vector<std::pair<std::string, SrnDef>> defs;
    const SrnDef* find(const std::string& name) const;
};

// One definition per statement, `name := expr`; `#` starts a comment.
// A statement may span lines while parentheses are open.
SrnProgram parse_program(const std::string& text);
SrnDef parse_def(const std::string& text, const SrnProgram* prog = nullptr);
// Terms: numerals, variables, and `f(t1, …, tk; u1, …, ul)`; the `;` is optional.
SrnTerm parse_srn_term(const std::string& text, const SrnProgram* prog = nullptr);
// A definition when the whole text is a definition expression, a term otherwise.
std::variant<SrnDef, SrnTerm> parse_srn(const std::string& text, const SrnProgram* prog = nullptr);

std::string print_def(const SrnDef& d);
std::string print_term(const SrnTerm& t);

nlohmann::json def_to_json(const SrnDef& d);
nlohmann::json term_to_json(const SrnTerm& t);

}  // namespace walt
