#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "walt/formula.hpp"
#include "walt/term.hpp"

namespace walt {

struct Assign {
    Symbol var;
    Formula type;
};

// Assignment set, kept sorted by variable (pointer order).
using Zone = std::vector<Assign>;

// A partially discharged context (Θ; Φ) with Φ empty or a singleton.
struct PdPair {
    Zone theta;
    std::optional<Assign> phi;
};

// Canonical form: (∅;∅) pairs dropped, the Φ-less pair first, the rest sorted by Φ variable.
using PdContext = std::vector<PdPair>;

struct Judgment {
    Zone gamma;
    Zone delta;
    PdContext epsilon;
    Term subject;
    Formula type;
};

enum class Rule : std::uint8_t {
    Ax, Contr, LinI, LinIPar, LinE, LinIBang, LinEBang, EagerI, EagerE, Par, Bang, ForallI, ForallE
};

const char* rule_name(Rule r);
std::optional<Rule> parse_rule(const std::string& s);

struct DerivNode;
using Deriv = std::shared_ptr<const DerivNode>;

struct DerivNode {
    Rule rule;
    Judgment judgment;
    std::vector<Deriv> premises;
    Formula instance;  // optional witness L' of a ∀E node
};

Deriv make_deriv(Rule rule, Judgment j, std::vector<Deriv> premises = {}, Formula instance = nullptr);

struct Violation {
    std::string rule;
    std::string condition;
    std::string zone;
    std::string detail;
};

std::string describe(const Violation& v);

class StructureViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Zone helpers.
const Assign* zone_find(const Zone& z, Symbol x);
void zone_insert(Zone& z, Assign a);  // keeps order, replaces an existing entry
bool zone_erase(Zone& z, Symbol x);
bool zone_eq(const Zone& a, const Zone& b);

// The Φ-less pair of E, if any.
const PdPair* empty_phi_pair(const PdContext& e);
const PdPair* phi_pair(const PdContext& e, Symbol x);
void canonicalize(PdContext& e);
bool pd_eq(const PdContext& a, const PdContext& b);

// E1 ⊔ E2. Throws StructureViolation when the result is not a partially
// discharged context.
PdContext merge_contexts(const PdContext& e1, const PdContext& e2);

// Judgment invariants: linear Γ, Φ structure, disjoint domains.
std::optional<Violation> check_judgment(const Judgment& j);

// Verifies one node against its (unchecked) premises.
std::optional<Violation> check_rule(const DerivNode& node);

struct CheckResult {
    bool ok = false;
    std::optional<Judgment> judgment;
    std::optional<Violation> violation;
};

CheckResult check_derivation(const Deriv& d);
// Nodes in `trusted` count as checked; they must be kept alive by the caller.
CheckResult check_derivation(const Deriv& d, const std::unordered_set<const DerivNode*>& trusted);
void collect_nodes(const Deriv& d, std::unordered_set<const DerivNode*>& out);

// Number of $ and ! nodes on the deepest root-to-leaf path.
std::uint64_t depth(const Deriv& d);
// Number of nodes of the derivation tree (shared subderivations count once per use).
std::uint64_t deriv_size(const Deriv& d);
// Number of distinct nodes.
std::uint64_t deriv_dag_size(const Deriv& d);

std::string print_judgment(const Judgment& j);

// Tree form nests nodes; the dag form (selected automatically above
// `dag_threshold` tree nodes) stores tables of terms, formulas and nodes.
nlohmann::json derivation_to_json(const Deriv& d, std::uint64_t dag_threshold = 4000);
Deriv derivation_from_json(const nlohmann::json& j);
nlohmann::json judgment_to_json(const Judgment& j);
Judgment judgment_from_json(const nlohmann::json& j);

// Zone in which a variable can be added by weakening.
enum class ZoneKind : std::uint8_t { Gamma, Delta, Theta, Phi };

class WeakenError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Adds x:A to the conclusion of d (to the Θ of the pair owned by `owner`,
// or of the Φ-less pair when owner is null, for ZoneKind::Theta), pushing
// the assignment to a node whose rule admits it.
Deriv weaken(const Deriv& d, ZoneKind zone, const Assign& a, Symbol owner = nullptr);

// ---------------------------------------------------------------- System F

// Church-style System F terms obtained by erasing a derivation: binders carry
// erased types, ∀I/∀E become type abstraction/application.
enum class FKindTerm : std::uint8_t { Var, Lam, App, TLam, TApp };

struct FTermNode;
using FTerm = std::shared_ptr<const FTermNode>;

struct FTermNode {
    FKindTerm kind;
    Symbol name = nullptr;   // variable, binder, or type binder
    Formula type;            // binder type or type argument
    FTerm a, b;
};

struct FTyping {
    std::vector<Assign> context;  // erased types
    FTerm term;
    Formula type;                 // erased type
};

FTyping erase_derivation(const Deriv& d);
std::vector<Assign> erase_judgment_context(const Judgment& j);
// Untyped skeleton of an F term.
Term strip_types(const FTerm& t);
std::string print_fterm(const FTerm& t);

}  // namespace walt
