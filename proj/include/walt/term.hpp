#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace walt {

// Interned identifier. Pointer equality is name equality.
using Symbol = const std::string*;
Symbol intern(const std::string& name);

enum class TermKind : std::uint8_t { Var, Abs, App };

struct TermNode;
using Term = std::shared_ptr<const TermNode>;

// Locally nameless: bound variables are de Bruijn indices, free variables
// are names, binders keep a name hint for printing.
struct TermNode {
    TermKind kind;
    bool bound = false;          // Var only
    std::uint32_t index = 0;     // Var only, when bound
    Symbol name = nullptr;       // free Var name, or Abs hint
    Term left;                   // Abs body, App function
    Term right;                  // App argument

    std::uint64_t size = 1;
    std::uint64_t hash = 0;      // invariant under binder hints
    std::uint32_t loose = 0;     // 1 + largest loose index, 0 when locally closed
    std::vector<std::uint8_t> uses;  // capped (0,1,2) use counts per loose index
    std::uint8_t name_count = 0;     // distinct free names, capped at 2
    Symbol one_name = nullptr;       // the free name when name_count == 1
    bool has_redex = false;          // some ↦-eligible redex inside

    bool is_var() const { return kind == TermKind::Var; }
    bool is_abs() const { return kind == TermKind::Abs; }
    bool is_app() const { return kind == TermKind::App; }
    bool is_value() const { return kind != TermKind::App; }
    // Number of distinct free variables (free names plus loose indices), capped at 2.
    unsigned fv_count() const;
    unsigned uses_of(std::uint32_t i) const { return i < uses.size() ? uses[i] : 0; }
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t pos)
        : std::runtime_error(msg + " at offset " + std::to_string(pos)), pos_(pos) {}
    std::size_t position() const { return pos_; }

private:
    std::size_t pos_;
};

// Raw constructors.
Term mk_free(Symbol name);
Term mk_free(const std::string& name);
Term mk_bound(std::uint32_t index);
Term mk_abs_raw(Symbol hint, Term body);
Term mk_app(Term f, Term a);

// Named construction: abstracts the free variable x of body.
Term var(const std::string& x);
Term lam(const std::string& x, const Term& body);
Term lam(const std::vector<std::string>& xs, const Term& body);
Term app(const Term& f, const std::vector<Term>& args);
Term app(const Term& f, const Term& a);

// Locally nameless plumbing.
Term close_var(const Term& t, Symbol x, std::uint32_t depth = 0);
Term open_var(const Term& body, Symbol x);
Term shift(const Term& t, std::int64_t by, std::uint32_t cutoff = 0);
// Replaces index 0 of an abstraction body by arg and lowers the other loose indices.
Term instantiate(const Term& body, const Term& arg);

std::set<std::string> free_vars(const Term& m);
std::size_t occurrences(const std::string& x, const Term& m);
Term substitute(const Term& m, const std::map<std::string, Term>& bindings);
std::uint64_t size(const Term& m);
bool alpha_eq(const Term& a, const Term& b);
bool is_value(const Term& m);
bool is_closed(const Term& m);

Term parse_term(const std::string& text);
std::string print_term(const Term& m);

nlohmann::json term_to_json(const Term& m);
Term term_from_json(const nlohmann::json& j);

// Fresh name not in `avoid`, built as base followed by a counter.
std::string fresh_name(const std::string& base, const std::set<std::string>& avoid);

}  // namespace walt
