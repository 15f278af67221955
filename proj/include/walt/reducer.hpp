#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "walt/term.hpp"

namespace walt {

enum class RedexKind { Erase, LinearValue, SharedValue };
enum class Strategy { LeftmostOutermost, RightmostInnermost };

const char* redex_kind_name(RedexKind k);
const char* strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(const std::string& s);

// Path entries: 0 selects the body of an abstraction or the function of an
// application, 1 selects the argument of an application.
struct Redex {
    std::vector<std::uint8_t> path;
    RedexKind kind;
    bool operator==(const Redex& o) const { return path == o.path && kind == o.kind; }
};

class InvalidRedex : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultMaxSteps = 10'000'000;

// Classifies App(Abs(x,M),N) under the three rewriting clauses; nullopt if none applies.
std::optional<RedexKind> classify_redex(const Term& app_node);

std::vector<Redex> eligible_redexes(const Term& m);
Term reduce_once(const Term& m, const Redex& r);

struct NormalizeResult {
    Term term;
    std::uint64_t steps = 0;
    bool reached_nf = false;
};

NormalizeResult normalize(const Term& m, std::uint64_t max_steps = kDefaultMaxSteps,
                          Strategy strategy = Strategy::LeftmostOutermost);

// Fires the first eligible redex under the strategy; nullopt on normal forms.
std::optional<Term> step(const Term& m, Strategy strategy = Strategy::LeftmostOutermost);

struct TraceStep {
    Redex redex;
    Term term;
};

struct Trace {
    Term initial;
    std::vector<TraceStep> steps;
    bool reached_normal_form = false;
};

Trace trace(const Term& m, std::uint64_t max_steps = kDefaultMaxSteps,
            Strategy strategy = Strategy::LeftmostOutermost);

// One JSON object per line: the initial term, one line per step, then a summary line.
void write_trace_jsonl(const Trace& t, std::ostream& out);

}  // namespace walt
