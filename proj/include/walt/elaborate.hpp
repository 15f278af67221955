#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "walt/derivation.hpp"

namespace walt {

// A closed term together with a derivation of ∅;∅;∅ ⊢ term : formula.
struct TypedTerm {
    Term term;
    Deriv derivation;
    Formula formula;
};

class ElabError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ElabEnv {
    std::map<std::string, TypedTerm> embeds;   // {name}
    std::map<std::string, Formula> macros;     // %name inside types
};

// Builds a derivation from an annotated term. Syntax:
//   \x y. M          binders; the expected type decides the zone of x
//   \@x. M           eager binder (x : $A, arrow =o)
//   \(x : T). M      annotated binder, \(@x : T) for the eager arrow
//   $[M]  ![M]       boxes
//   {name}           closed typed term from env.embeds
//   /\a. M   M[T]    type abstraction and application
//   (M : T)          annotation
// Binder zones follow the type: L gives a linear variable, $A a partially
// discharged one (elementary when eager), !A a polynomial one.
TypedTerm elaborate(const std::string& source, const Formula& expected, const ElabEnv& env = {});
TypedTerm elaborate(const std::string& source, const std::string& expected, const ElabEnv& env = {});

// Runs check_derivation and verifies that the root is closed; throws ElabError otherwise.
const TypedTerm& verify(const TypedTerm& t);

}  // namespace walt
