#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "walt/elaborate.hpp"

namespace walt {

class CombinatorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ------------------------------------------------------------------ types

// (⊸•^k $W) ⊸• (⊸•^l $^m W) ⊸• $^m W
Formula safe_fn_type(unsigned k, unsigned l, unsigned m);
// $W ⊸• (⊸•^n $W) ⊸• (⊸•^s $^m W) ⊸• $^m W ⊸• $^m W
Formula iter_step_type(unsigned n, unsigned s, unsigned m);
// ⊙ A_i = ∀α.(A_1 ⊸• … ⊸• A_k ⊸• α) ⊸ α
Formula tensor_type(const std::vector<Formula>& comps);

// ------------------------------------------------------------------ words

// Cached; safe to call from several threads.
const TypedTerm& word(std::uint64_t n);
Term word_term(std::uint64_t n);
// Inverse of word_term on terms of the shape \0 1 y.ν0(…(1 y)…); nullopt otherwise.
std::optional<std::uint64_t> decode_word(const Term& t);

const TypedTerm& ws0();
const TypedTerm& ws1();
const TypedTerm& pred_w();
const TypedTerm& branch_w();

// ---------------------------------------------------------------- tensors

// \z. z M1 … Mm; throws CombinatorError("open-component: …") on open Mi.
Term tensor(const std::vector<Term>& ms);
// \w. w (\x1 … xm. body)
Term tensor_match(const std::vector<std::string>& binders, const Term& body);

// -------------------------------------------------------------- embedding

// \x. M x with M : L ⊸ $^m A, giving $^n L ⊸• $^{m+n} A (n ≥ 1).
TypedTerm bembed(unsigned n, const TypedTerm& m);
// \x1…xp. M x1…xp, giving (⊸^p $^n L_i) ⊸ $^{m+n} A.
TypedTerm lembed(unsigned n, unsigned p, const TypedTerm& m);
// Eager embedding: the first p (normal, $W) arguments are rebuilt n boxes deeper
// through BEmbed¹ Coerceⁿ, the other q arguments and the result shift by n.
TypedTerm eembed(unsigned n, unsigned p, unsigned q, const TypedTerm& m);
// Shifts every argument and the result of M by n boxes (eembed with p = 0);
// linear-arrow arguments become $ⁿ-linear ones.
TypedTerm lift(unsigned n, const TypedTerm& m, unsigned args);

TypedTerm coerce(unsigned m);
// ∇ᵐₙ : W ⊸ $(⊙ⁿ $ᵐ W)
TypedTerm diagonal(unsigned m, unsigned n);

// ------------------------------------------------------------- iteration

// G0, G1, G2 : iter_step_type(n, s, m); result $W ⊸• (⊸•ⁿ $W) ⊸• (⊸•ˢ $^{m+4}W) ⊸• $^{m+4}W.
TypedTerm iterator(unsigned n, unsigned s, unsigned m, const TypedTerm& g0, const TypedTerm& g1,
                   const TypedTerm& g2);

// M : safe_fn_type(n, s+1, m); result safe_fn_type(n, s, m+4).
TypedTerm share(unsigned n, unsigned s, unsigned m, const TypedTerm& M);
// M : safe_fn_type(n, s, m); result has the same type, first safe argument moved last.
TypedTerm rotate(unsigned n, unsigned s, unsigned m, const TypedTerm& M);
// M : safe_fn_type(n, p+q, m); result safe_fn_type(n, p, m+4q).
TypedTerm mshare(unsigned n, unsigned p, unsigned q, unsigned m, const TypedTerm& M);
TypedTerm rmshare(unsigned n, unsigned p, unsigned q, unsigned m, const TypedTerm& M);

// --------------------------------------------------------- composition

struct SqcompInfo {
    unsigned n = 0;        // normal arity of every component
    unsigned s = 0;        // max of safe arities and number of safe components
    unsigned nprime = 0;   // normal arity of F
    unsigned m = 0;        // common depth of the components
    std::vector<unsigned> safe_arities;
};

// F : safe_fn_type(n', s', m); Gs : safe_fn_type(n, 0, m); Hs[j] : safe_fn_type(n, s_j, m).
// Result safe_fn_type-shaped: (⊸•ⁿ $W) ⊸• (⊸•^{s²} $^{2m+1}W) ⊸• $^{2m+1}W.
TypedTerm sqcomp(unsigned n, unsigned s, unsigned nprime, const TypedTerm& F, const std::vector<TypedTerm>& Gs,
                 const std::vector<TypedTerm>& Hs);
SqcompInfo sqcomp_info(unsigned n, const TypedTerm& F, const std::vector<TypedTerm>& Gs,
                       const std::vector<TypedTerm>& Hs);

// Linear composition: Hs[j] consumes its own block of safe arguments. Result
// (⊸•ⁿ $W) ⊸• (⊸•^{Σ s_j} $^{2m+1}W) ⊸• $^{2m+1}W.
TypedTerm lincomp(unsigned n, const TypedTerm& F, const std::vector<TypedTerm>& Gs, const std::vector<TypedTerm>& Hs);

// M : safe_fn_type(n, p², m); result safe_fn_type(n, i + p(p-i), m + 4(p-1)i).
TypedTerm mshsqcomp(unsigned n, unsigned p, unsigned i, unsigned m, const TypedTerm& M);

// --------------------------------------------------------------- registry

struct RegistryEntry {
    std::string name;
    nlohmann::json params;
    std::string formula;
    std::string contract;
};

// Instances of every builder at small parameters.
std::vector<RegistryEntry> registry();
nlohmann::json registry_json();

}  // namespace walt
