#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "walt/term.hpp"

namespace walt {

enum class FKind : std::uint8_t { TVar, Lin, Eager, Forall, Bang, Par };

struct FormulaNode;
using Formula = std::shared_ptr<const FormulaNode>;

struct FormulaNode {
    FKind kind;
    Symbol name = nullptr;  // TVar name, Forall binder
    Formula a;              // arrow domain, Forall body, modal body
    Formula b;              // arrow codomain
    std::vector<Symbol> ftv;  // free type variables, sorted by pointer
    std::size_t size = 1;
};

class FormulaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Formula tvar(const std::string& a);
Formula tvar(Symbol a);
Formula lin(Formula a, Formula b);     // A -o B
Formula eager(Formula a, Formula b);   // $A =o B, throws unless a is $-modal
Formula forall(const std::string& a, Formula body);  // throws unless body is linear
Formula forall(Symbol a, Formula body);
Formula bang(Formula a);
Formula par(Formula a);
Formula pars(Formula a, unsigned n);   // $^n A

// W = forall a. !(a -o a) -o !(a -o a) -o $(a -o a)
Formula word_type();

bool is_linear(const Formula& a);
bool has_ftv(const Formula& a, Symbol v);
bool alpha_eq(const Formula& a, const Formula& b);

// Capture-free L{L2/alpha}; throws FormulaError("non-linear-substituent") when L2 is modal.
Formula subst_type(const Formula& l, Symbol alpha, const Formula& l2);
Formula subst_type(const Formula& l, const std::string& alpha, const Formula& l2);
// Finds L2 with subst_type(l, alpha, L2) alpha-equal to target, if any.
std::optional<Formula> match_instance(const Formula& l, Symbol alpha, const Formula& target);

// Number of leading $ modalities and the formula below them.
unsigned par_depth(const Formula& a);
Formula strip_pars(const Formula& a);

// Erasure into System F: modalities vanish, both arrows become ->. The result
// only contains TVar, Lin (read as ->) and Forall.
Formula erase_to_F(const Formula& a);

std::string print_formula(const Formula& a, bool abbreviate_words = true);
std::string print_ftype(const Formula& a);  // System F display with "->"

// Formula syntax: !A, $A, A -o B, A =o B, forall a b. L, parentheses, W.
// `macros` maps %name to formulas.
Formula parse_formula(const std::string& text, const std::map<std::string, Formula>& macros = {});
// Parses a formula starting at pos; stops before an unmatched ')' or ']' or end.
Formula parse_formula_at(const std::string& text, std::size_t& pos,
                         const std::map<std::string, Formula>& macros = {});

std::string fresh_tvar(const std::string& base, const std::set<Symbol>& avoid);

}  // namespace walt
