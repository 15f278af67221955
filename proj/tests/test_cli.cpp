#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

namespace {

struct Result {
    int code = -1;
    std::string out;
};

// Runs the walt binary with the given arguments; stderr is merged when asked.
Result walt(const std::string& args, bool merge_stderr = false) {
    std::string cmd = std::string(WALT_BIN) + " " + args + (merge_stderr ? " 2>&1" : " 2>/dev/null");
    Result r;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
    int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

const std::string corpus = std::string(WALT_CORPUS_DIR) + "/programs.srn";

std::filesystem::path scratch_dir() {
    auto d = std::filesystem::temp_directory_path() / ("walt-cli-test-" + std::to_string(::getpid()));
    std::filesystem::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("run") {
    Result both = walt("run " + corpus + " \"b(z[0;0](), 2, 3)\" --both --json");
    REQUIRE(both.code == 0);
    nlohmann::json j = nlohmann::json::parse(both.out);
    CHECK(j["schema"] == 1);
    CHECK(j["oracle"] == 2);
    CHECK(j["word"] == 2);
    CHECK(j["verdict"] == "EQUAL");
    for (const char* key : {"term", "env", "depth", "steps", "strategy", "reached_nf", "normal_form"}) CHECK(j.contains(key));

    Result lit = walt("run " + corpus + " 9 --compiled --json");
    REQUIRE(lit.code == 0);
    CHECK(nlohmann::json::parse(lit.out)["word"] == 9);

    Result oracle = walt("run " + corpus + " \"concat(x; 5)\" --var x=3 --oracle --json");
    REQUIRE(oracle.code == 0);
    CHECK(nlohmann::json::parse(oracle.out)["oracle"] == 23);

    Result ri = walt("run " + corpus + " \"s1(s0(x))\" --var x=1 --strategy ri --json");
    REQUIRE(ri.code == 0);
    CHECK(nlohmann::json::parse(ri.out)["word"] == 5);

    Result text = walt("run " + corpus + " \"ifz(0; 4, 7)\"");
    CHECK(text.code == 0);
    CHECK(text.out.find("EQUAL") != std::string::npos);
}

TEST_CASE("run errors and exit codes") {
    CHECK(walt("run " + corpus + " \"nope(1)\"").code == 2);
    CHECK(walt("run " + corpus + " \"s0(1, 2)\"").code == 2);
    CHECK(walt("run " + corpus + " \"s0(x)\"").code != 0);
    CHECK(walt("run " + corpus + " \"copy(200)\" --max-steps 100").code == 4);
    CHECK(walt("run /nonexistent/file.srn 1").code == 1);
    CHECK(walt("run " + corpus + " 1 --max-steps 0").code != 0);
}

TEST_CASE("sweep mode") {
    Result r = walt("run " + corpus + " \"s0(x)\" --sweep x=1..6");
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "x,len,steps,value");
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 6);
}

TEST_CASE("trace output") {
    auto dir = scratch_dir();
    auto trace = (dir / "trace.jsonl").string();
    Result r = walt("run " + corpus + " \"s1(2)\" --compiled --trace " + trace);
    REQUIRE(r.code == 0);
    std::ifstream in(trace);
    std::string line, last;
    int lines = 0;
    while (std::getline(in, line)) {
        last = line;
        ++lines;
    }
    CHECK(lines >= 2);
    CHECK(nlohmann::json::parse(last)["reached_normal_form"] == true);
    std::filesystem::remove_all(dir);
}

TEST_CASE("compile") {
    Result r = walt("compile " + corpus + " copy --json");
    REQUIRE(r.code == 0);
    nlohmann::json j = nlohmann::json::parse(r.out);
    CHECK(j["schema"] == 1);
    CHECK(j["m"].get<unsigned>() >= 1);
    CHECK(j["k"] == 1);
    CHECK(j["l"] == 0);
    for (const char* key : {"source", "term", "formula", "derivation_ref", "routing", "weight", "clsrn"})
        CHECK(j.contains(key));

    Result missing = walt("compile " + corpus + " nothing_here", true);
    CHECK(missing.code == 2);
    CHECK(missing.out.find("nothing_here") != std::string::npos);

    Result arity = walt("compile " + corpus + " \"comp[1;0;0;1](s0; pi[2;0;1])\"", true);
    CHECK(arity.code == 2);
    CHECK(arity.out.find("arity") != std::string::npos);

    Result route = walt("compile " + corpus + " route --json");
    REQUIRE(route.code == 0);
    nlohmann::json rj = nlohmann::json::parse(route.out);
    CHECK(rj["routing"]["compositions"][0]["s"] == 3);
    CHECK(rj["routing"]["compositions"][0]["sqcomp"] == nlohmann::json::array({1, 3, 1}));
}

TEST_CASE("typecheck") {
    Result ok = walt("typecheck " + std::string(WALT_CORPUS_DIR) + "/word0.deriv.json");
    CHECK(ok.code == 0);
    CHECK(ok.out.rfind("OK", 0) == 0);

    Result bad = walt("typecheck " + std::string(WALT_CORPUS_DIR) + "/tampered_bang.deriv.json --json");
    CHECK(bad.code == 3);
    nlohmann::json j = nlohmann::json::parse(bad.out);
    CHECK(j["ok"] == false);
    CHECK(j["violation"]["rule"] == "!");

    // compile, write the derivation, check it again
    auto dir = scratch_dir();
    auto out = (dir / "ones.deriv.json").string();
    Result c = walt("compile " + corpus + " ones --derivation-out " + out);
    REQUIRE(c.code == 0);
    Result again = walt("typecheck " + out + " --json");
    CHECK(again.code == 0);
    CHECK(nlohmann::json::parse(again.out)["ok"] == true);

    std::ofstream(dir / "garbage.json") << "{ not json";
    CHECK(walt("typecheck " + (dir / "garbage.json").string()).code == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("cache directory") {
    auto dir = scratch_dir() / "cache";
    Result r = walt("compile " + corpus + " walk --json --cache-dir " + dir.string());
    REQUIRE(r.code == 0);
    nlohmann::json j = nlohmann::json::parse(r.out);
    REQUIRE(j["derivation_ref"].is_string());
    CHECK(std::filesystem::exists(j["derivation_ref"].get<std::string>()));
    CHECK(walt("typecheck " + j["derivation_ref"].get<std::string>()).code == 0);
    std::filesystem::remove_all(dir.parent_path());
}

TEST_CASE("list and sweep") {
    Result l = walt("list --json");
    REQUIRE(l.code == 0);
    nlohmann::json j = nlohmann::json::parse(l.out);
    CHECK(j["schema"] == 1);
    CHECK(j["combinators"].size() >= 10);

    Result s = walt("sweep " + corpus + " copy ones --max-len 4 --jobs 2");
    REQUIRE(s.code == 0);
    std::istringstream in(s.out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "def,len,steps,verdict");
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++rows;
        CHECK(line.find("EQUAL") != std::string::npos);
    }
    CHECK(rows == 8);
}
