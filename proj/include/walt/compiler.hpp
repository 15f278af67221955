#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <unordered_set>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "walt/combinators.hpp"
#include "walt/reducer.hpp"
#include "walt/srn.hpp"

namespace walt {

class CompileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CompiledDef {
    SrnDef source;
    TypedTerm target;
    unsigned m = 0;             // result formula is $^m W
    std::string derivation_ref; // cache file holding the checked derivation, if any
};

struct CompiledTerm {
    SrnTerm source;
    Env env;
    TypedTerm target;
    unsigned depth = 0;         // target formula is $^depth W
};

struct CompilerOptions {
    bool verify = true;         // run check_derivation on every compiled definition and term
    std::string cache_dir;      // empty: no disk cache
};

// Compiles definitions clause by clause, memoized by structural hash.
// Safe to share between threads.
class Compiler {
public:
    explicit Compiler(CompilerOptions opts = {});

    CompiledDef compile(const SrnDef& f);
    CompiledTerm interpret(const SrnTerm& t, const Env& rho);

    std::size_t memo_size() const;
    std::size_t cache_hits() const { return cache_hits_; }

private:
    TypedTerm compile_uncached(const SrnDef& f);
    TypedTerm composition(const SrnDef& f);
    TypedTerm recursion(const SrnDef& f);
    CompiledTerm interpret_apply(const SrnDef& f, const std::vector<SrnTerm>& args, const Env& rho);
    CompiledTerm interpret_node(const SrnTerm& t, const Env& rho);
    CompiledTerm interpret_lit(Nat n);
    void verify_term(const TypedTerm& t, const std::string& what);
    void trust(const TypedTerm& t);
    void check(const TypedTerm& t, const std::string& what, std::string* ref, std::uint64_t key);

    CompilerOptions opts_;
    mutable std::mutex mu_;
    std::map<std::uint64_t, std::vector<CompiledDef>> memo_;
    std::map<Nat, CompiledTerm> lits_;
    std::size_t cache_hits_ = 0;
    // Derivation nodes already checked and owned by memo_ or lits_.
    mutable std::shared_mutex trusted_mu_;
    std::unordered_set<const DerivNode*> trusted_;
};

// Process-wide compiler with default options (WALT_CACHE_DIR enables the disk cache).
Compiler& default_compiler();
CompiledDef compile_def(const SrnDef& f);
CompiledTerm interpret(const SrnTerm& t, const Env& rho);

// Depth m of the compiled result formula $^m W, computed from the clauses
// without building terms.
unsigned compiled_depth(const SrnDef& f);

// Replaces variables by their values.
SrnTerm close_term(const SrnTerm& t, const Env& rho);

struct SoundnessReport {
    std::string term;
    Nat oracle = 0;
    bool compiled = false;
    std::string error;          // compilation or evaluation failure
    std::optional<Nat> normal_value;
    std::string normal_form;    // printed, truncated
    bool equal = false;         // normal form α-equal to word(oracle)
    bool reached_nf = false;
    std::uint64_t steps = 0;
    unsigned depth = 0;
    std::uint64_t derivation_depth = 0;
    Rational weight;
    bool depth_le_weight = false;

    nlohmann::json to_json() const;
};

SoundnessReport check_soundness(const SrnTerm& t, const Env& rho, std::uint64_t max_steps = 10'000'000,
                                Compiler* compiler = nullptr, Strategy strategy = Strategy::LeftmostOutermost);

struct CompositionRoute {
    std::string path;           // position of the composition inside the definition
    std::string scheme;         // "sqcomp" or "lincomp"
    unsigned k = 0, l = 0, kp = 0, lp = 0;
    std::vector<unsigned> safe_arities;
    unsigned p = 0;             // common depth of the normalized components
    unsigned s = 0;             // max{l_j, l'}
    std::string adapter;        // "none", "erase" or "pad"
    bool linear = false;        // is_clsrn of this node alone
};

struct LinearityReport {
    bool clsrn = false;
    std::vector<CompositionRoute> compositions;
    nlohmann::json to_json() const;
};

LinearityReport full_to_linear_report(const SrnDef& f);

}  // namespace walt
