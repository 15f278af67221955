#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "walt/combinators.hpp"
#include "walt/compiler.hpp"
#include "walt/derivation.hpp"
#include "walt/reducer.hpp"
#include "walt/srn.hpp"

using namespace walt;
using nlohmann::json;

namespace {

enum Exit : int { kOk = 0, kIo = 1, kParse = 2, kType = 3, kBudget = 4, kMismatch = 5 };

struct Failure {
    int code;
    std::string message;
};

struct RunConfig {
    Strategy strategy = Strategy::LeftmostOutermost;
    std::uint64_t max_steps = kDefaultMaxSteps;
    std::string trace_file;
    std::string cache_dir;
    bool json = false;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Failure{kIo, "cannot read " + path};
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SrnProgram load_program(const std::string& path) {
    try {
        return parse_program(read_file(path));
    } catch (const SrnError& e) {
        throw Failure{kParse, path + ": " + e.what()};
    }
}

Compiler make_compiler(const RunConfig& cfg) {
    CompilerOptions o;
    o.cache_dir = cfg.cache_dir;
    if (o.cache_dir.empty())
        if (const char* dir = std::getenv("WALT_CACHE_DIR")) o.cache_dir = dir;
    return Compiler(o);
}

// Nat value from `x=5`; the range form `x=1..16` yields first and last.
std::pair<std::string, std::pair<Nat, Nat>> parse_binding(const std::string& s) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw Failure{kParse, "expected name=value, got " + s};
    std::string name = s.substr(0, eq), rest = s.substr(eq + 1);
    try {
        auto dots = rest.find("..");
        if (dots == std::string::npos) {
            Nat v = std::stoull(rest);
            return {name, {v, v}};
        }
        Nat lo = std::stoull(rest.substr(0, dots)), hi = std::stoull(rest.substr(dots + 2));
        if (hi < lo) throw Failure{kParse, "empty range " + s};
        return {name, {lo, hi}};
    } catch (const std::logic_error&) {
        throw Failure{kParse, "bad number in " + s};
    }
}

int cmd_compile(const RunConfig& cfg, const std::string& file, const std::string& def_name,
                const std::string& derivation_out) {
    SrnProgram prog = load_program(file);
    const SrnDef* d = prog.find(def_name);
    SrnDef def;
    if (d) {
        def = *d;
    } else {
        try {
            def = parse_def(def_name, &prog);
        } catch (const SrnError& e) {
            throw Failure{kParse, file + ": " + e.what()};
        }
    }
    Compiler comp = make_compiler(cfg);
    CompiledDef c;
    try {
        c = comp.compile(def);
    } catch (const SrnError& e) {
        throw Failure{kParse, e.what()};
    } catch (const std::exception& e) {
        throw Failure{kType, e.what()};
    }
    std::string ref = c.derivation_ref;
    if (!derivation_out.empty()) {
        std::ofstream out(derivation_out);
        if (!out) throw Failure{kIo, "cannot write " + derivation_out};
        out << json{{"schema", 1}, {"derivation", derivation_to_json(c.target.derivation)}}.dump();
        ref = derivation_out;
    }
    json j = {{"schema", 1},
              {"name", def_name},
              {"def", print_def(def)},
              {"source", def_to_json(def)},
              {"term", print_term(c.target.term)},
              {"k", def->k},
              {"l", def->l},
              {"m", c.m},
              {"formula", print_formula(c.target.formula)},
              {"clsrn", is_clsrn(def)},
              {"weight", weight(def).str()},
              {"term_size", size(c.target.term)},
              {"derivation_depth", depth(c.target.derivation)},
              {"derivation_nodes", deriv_dag_size(c.target.derivation)},
              {"routing", full_to_linear_report(def).to_json()},
              {"derivation_ref", ref.empty() ? json(nullptr) : json(ref)}};
    if (cfg.json) {
        std::cout << j.dump(2) << "\n";
    } else {
        j.erase("term");
        std::cout << j.dump() << "\n" << def_name << " : " << print_formula(c.target.formula) << "\n";
    }
    return kOk;
}

struct RunOutcome {
    json report;
    int code = kOk;
};

RunOutcome run_once(Compiler& comp, const RunConfig& cfg, const SrnTerm& t, const Env& rho, bool oracle,
                    bool compiled) {
    RunOutcome o;
    json& j = o.report;
    j["schema"] = 1;
    j["term"] = print_term(t);
    j["env"] = rho.empty() ? nlohmann::json::object() : nlohmann::json(rho);
    std::optional<Nat> expected;
    if (oracle || compiled) {
        try {
            expected = eval_term(t, rho);
            if (oracle) j["oracle"] = *expected;
        } catch (const SrnError& e) {
            if (oracle) throw Failure{kParse, e.what()};
        }
    }
    if (!compiled) return o;
    CompiledTerm c;
    try {
        c = comp.interpret(t, rho);
    } catch (const SrnError& e) {
        throw Failure{kParse, e.what()};
    } catch (const std::exception& e) {
        throw Failure{kType, e.what()};
    }
    j["depth"] = c.depth;
    NormalizeResult n;
    if (!cfg.trace_file.empty()) {
        Trace tr = trace(c.target.term, cfg.max_steps, cfg.strategy);
        std::ofstream out(cfg.trace_file);
        write_trace_jsonl(tr, out);
        n.term = tr.steps.empty() ? tr.initial : tr.steps.back().term;
        n.steps = tr.steps.size();
        n.reached_nf = tr.reached_normal_form;
    } else {
        n = normalize(c.target.term, cfg.max_steps, cfg.strategy);
    }
    j["steps"] = n.steps;
    j["strategy"] = strategy_name(cfg.strategy);
    j["reached_nf"] = n.reached_nf;
    std::string nf = print_term(n.term);
    j["normal_form"] = nf.size() > 400 ? nf.substr(0, 400) + "..." : nf;
    if (auto v = decode_word(n.term)) j["word"] = *v;
    if (!n.reached_nf) {
        o.code = kBudget;
        return o;
    }
    if (oracle && expected) {
        bool eq = alpha_eq(n.term, word_term(*expected));
        j["verdict"] = eq ? "EQUAL" : "MISMATCH";
        if (!eq) o.code = kMismatch;
    }
    return o;
}

void print_run(const RunConfig& cfg, const json& j) {
    if (cfg.json) {
        std::cout << j.dump() << "\n";
        return;
    }
    std::cout << "term: " << j["term"].get<std::string>() << "\n";
    if (j.contains("oracle")) std::cout << "oracle: " << j["oracle"] << "\n";
    if (j.contains("steps")) {
        std::cout << "compiled: ";
        if (j.contains("word"))
            std::cout << "word(" << j["word"] << ")";
        else
            std::cout << "not a word";
        std::cout << " depth " << j["depth"] << ", " << j["steps"] << " steps ("
                  << j["strategy"].get<std::string>() << ")\n";
        std::cout << "normal form: " << j["normal_form"].get<std::string>() << "\n";
        if (!j["reached_nf"].get<bool>()) std::cout << "step budget exhausted\n";
    }
    if (j.contains("verdict")) std::cout << j["verdict"].get<std::string>() << "\n";
}

int cmd_run(const RunConfig& cfg, const std::string& file, const std::string& expr, bool oracle, bool compiled,
            const std::vector<std::string>& vars, const std::string& sweep) {
    SrnProgram prog = load_program(file);
    SrnTerm t;
    try {
        t = parse_srn_term(expr, &prog);
    } catch (const SrnError& e) {
        throw Failure{kParse, e.what()};
    }
    Env rho;
    for (const auto& v : vars) {
        auto [name, range] = parse_binding(v);
        rho[name] = range.first;
    }
    Compiler comp = make_compiler(cfg);
    if (sweep.empty()) {
        try {
            (void)close_term(t, rho);
        } catch (const std::exception& e) {
            throw Failure{kParse, e.what()};
        }
        RunOutcome o = run_once(comp, cfg, t, rho, oracle, compiled);
        print_run(cfg, o.report);
        return o.code;
    }
    auto [name, range] = parse_binding(sweep);
    std::cout << name << ",len,steps,value\n";
    int code = kOk;
    for (Nat x = range.first; x <= range.second; ++x) {
        rho[name] = x;
        RunOutcome o = run_once(comp, cfg, t, rho, oracle, true);
        std::cout << x << "," << bit_length(x) << "," << o.report["steps"] << ",";
        if (o.report.contains("word")) std::cout << o.report["word"];
        std::cout << "\n";
        code = std::max(code, o.code);
    }
    return code;
}

int cmd_typecheck(const RunConfig& cfg, const std::string& file) {
    json j;
    try {
        j = json::parse(read_file(file));
    } catch (const json::exception& e) {
        throw Failure{kParse, file + ": " + e.what()};
    }
    if (j.contains("derivation")) j = j["derivation"];
    Deriv d;
    try {
        d = derivation_from_json(j);
    } catch (const std::exception& e) {
        throw Failure{kParse, file + ": malformed derivation: " + e.what()};
    }
    CheckResult r = check_derivation(d);
    json out = {{"schema", 1}, {"ok", r.ok}};
    if (r.ok) {
        out["judgment"] = print_judgment(*r.judgment);
        out["depth"] = depth(d);
    } else {
        const Violation& v = *r.violation;
        out["violation"] = {{"rule", v.rule}, {"condition", v.condition}, {"zone", v.zone}, {"detail", v.detail}};
    }
    if (cfg.json)
        std::cout << out.dump() << "\n";
    else if (r.ok) {
        std::string jt = print_judgment(*r.judgment);
        std::cout << "OK " << (jt.size() > 300 ? jt.substr(0, 300) + "..." : jt) << "\n";
    }
    else
        std::cout << "violation: " << describe(*r.violation) << "\n";
    return r.ok ? kOk : kType;
}

int cmd_list(const RunConfig& cfg) {
    json reg = registry_json();
    if (cfg.json) {
        std::cout << reg.dump(2) << "\n";
        return kOk;
    }
    for (const auto& e : reg["combinators"]) {
        std::cout << e["name"].get<std::string>() << " " << e["params"].dump() << "\n  : "
                  << e["formula"].get<std::string>() << "\n";
        if (!e["contract"].get<std::string>().empty()) std::cout << "  " << e["contract"].get<std::string>() << "\n";
    }
    return kOk;
}

// Step counts of every unary-normal definition on inputs 2^len - 1, one
// CSV row per (definition, length). Safe arguments are fixed to 1.
int cmd_sweep(const RunConfig& cfg, const std::string& file, std::vector<std::string> names, unsigned max_len,
              unsigned jobs) {
    SrnProgram prog = load_program(file);
    if (names.empty())
        for (const auto& [n, d] : prog.defs)
            if (d->k >= 1) names.push_back(n);
    for (const auto& n : names)
        if (!prog.find(n)) throw Failure{kParse, "no definition named " + n + " in " + file};
    Compiler comp = make_compiler(cfg);
    std::vector<std::vector<std::string>> rows(names.size());
    std::atomic<std::size_t> next{0};
    std::atomic<int> code{kOk};
    std::mutex err_mu;
    std::string first_error;
    auto worker = [&] {
        for (std::size_t i; (i = next++) < names.size();) {
            const SrnDef& d = *prog.find(names[i]);
            for (unsigned len = 1; len <= max_len; ++len) {
                Nat x = (Nat{1} << len) - 1;
                std::vector<SrnTerm> args;
                for (unsigned a = 0; a < d->k + d->l; ++a) args.push_back(srn_lit(a == 0 ? x : 1));
                std::ostringstream row;
                row << names[i] << "," << len << ",";
                int rc;
                try {
                    RunOutcome o = run_once(comp, cfg, srn_apply(d, args), {}, true, true);
                    row << o.report["steps"] << "," << o.report.value("verdict", std::string("BUDGET"));
                    rc = o.code;
                } catch (const Failure& f) {
                    std::lock_guard<std::mutex> lk(err_mu);
                    if (first_error.empty()) first_error = names[i] + " at length " + std::to_string(len) + ": " + f.message;
                    row << ",ERROR";
                    rc = f.code;
                }
                rows[i].push_back(row.str());
                int c = code.load();
                while (rc > c && !code.compare_exchange_weak(c, rc)) {
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < std::max(1u, jobs); ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    std::cout << "def,len,steps,verdict\n";
    for (const auto& r : rows)
        for (const auto& line : r) std::cout << line << "\n";
    if (!first_error.empty()) std::cerr << "walt: " << first_error << "\n";
    return code.load();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compile SRN programs to WALT terms, check derivations, and compare evaluations"};
    app.set_config("--config", "", "TOML/INI file with default flag values; flags on the command line win");
    app.require_subcommand(1);
    app.fallthrough();

    RunConfig cfg;
    std::string strategy = "lo";
    app.add_option("--strategy", strategy, "Reduction strategy: lo (leftmost-outermost) or ri (rightmost-innermost)")
        ->check(CLI::IsMember({"lo", "ri", "leftmost-outermost", "rightmost-innermost"}));
    app.add_option("--max-steps", cfg.max_steps, "Step budget for normalization")->check(CLI::PositiveNumber);
    app.add_option("--cache-dir", cfg.cache_dir, "Derivation cache directory (default: $WALT_CACHE_DIR)");
    app.add_flag("--json", cfg.json, "JSON output");

    std::string file, def_name, expr, derivation_out, sweep;
    std::vector<std::string> vars, names;
    bool want_oracle = false, want_compiled = false, want_both = false;
    unsigned max_len = 12, jobs = 1;

    auto* compile = app.add_subcommand("compile", "Compile a definition and print its result formula");
    compile->add_option("file", file, "SRN program")->required();
    compile->add_option("def", def_name, "Definition name or expression")->required();
    compile->add_option("--derivation-out", derivation_out, "Write the derivation JSON to this path");

    auto* run = app.add_subcommand("run", "Evaluate a term with the reference evaluator and/or the compiled term");
    run->add_option("file", file, "SRN program")->required();
    run->add_option("term", expr, "Term, e.g. \"concat(5; 3)\"")->required();
    auto* g = run->add_option_group("mode");
    g->add_flag("--oracle", want_oracle, "Reference evaluator only");
    g->add_flag("--compiled", want_compiled, "Compiled term only");
    g->add_flag("--both", want_both, "Both, with an equality verdict (default)");
    g->require_option(0, 1);
    run->add_option("--var", vars, "Variable binding name=value");
    run->add_option("--sweep", sweep, "Sweep a variable over a range, name=lo..hi; emits CSV");
    run->add_option("--trace", cfg.trace_file, "Write the reduction trace as JSON lines");

    auto* typecheck = app.add_subcommand("typecheck", "Check a derivation JSON file");
    typecheck->add_option("file", file, "Derivation JSON")->required();

    app.add_subcommand("list", "List the combinator registry");

    auto* sweep_cmd = app.add_subcommand("sweep", "Step counts of definitions over input lengths 1..max-len (CSV)");
    sweep_cmd->add_option("file", file, "SRN program")->required();
    sweep_cmd->add_option("defs", names, "Definitions (default: all with a normal argument)");
    sweep_cmd->add_option("--max-len", max_len, "Largest input length")->check(CLI::Range(1, 62));
    sweep_cmd->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);
    cfg.strategy = strategy.front() == 'r' ? Strategy::RightmostInnermost : Strategy::LeftmostOutermost;

    try {
        if (*compile) return cmd_compile(cfg, file, def_name, derivation_out);
        if (*run) {
            bool oracle = want_oracle || want_both || !want_compiled;
            bool compiled = want_compiled || want_both || !want_oracle;
            return cmd_run(cfg, file, expr, oracle, compiled, vars, sweep);
        }
        if (*typecheck) return cmd_typecheck(cfg, file);
        if (app.got_subcommand("list")) return cmd_list(cfg);
        if (*sweep_cmd) return cmd_sweep(cfg, file, names, max_len, jobs);
    } catch (const Failure& f) {
        std::cerr << "walt: " << f.message << "\n";
        return f.code;
    } catch (const std::exception& e) {
        std::cerr << "walt: " << e.what() << "\n";
        return kIo;
    }
    return kOk;
}
