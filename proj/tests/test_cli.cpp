#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace std::string_literals;
namespace fs = std::filesystem;

namespace {

const std::string kCli = MIJUDGE_CLI_PATH;

struct RunResult {
    int exit_code;
    std::string output;  // stdout + stderr
};

RunResult run(const std::string& args) {
    std::string command = kCli + " " + args + " 2>&1";
    std::array<char, 4096> buffer{};
    std::string output;
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    size_t n;
    while ((n = fread(buffer.data(), 1, buffer.size(), pipe)) > 0) {
        output.append(buffer.data(), n);
    }
    int status = pclose(pipe);
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return {code, output};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mijudge-cli-" + std::to_string(::getpid()) + "-" +
                std::to_string(reinterpret_cast<uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const char* kSmallDev = R"([
  {
    "conversation_id": "c1",
    "conversation_history": "Student: okey\nTutor: What is 25 minus 18?\nStudent: 8",
    "tutor_responses": {
      "Tutor_1": {"response": "Check the subtraction.", "annotation": {"Mistake_Identification": "Yes"}},
      "Tutor_2": {"response": "Great!", "annotation": {"Mistake_Identification": "No"}}
    }
  },
  {
    "conversation_id": "c2",
    "conversation_history": "Tutor: Half of ten?\nStudent: 4",
    "tutor_responses": {
      "Tutor_1": {"response": "Hmm, maybe re-check.", "annotation": {"Mistake_Identification": "To some extent"}}
    }
  },
  {
    "conversation_id": "c3",
    "conversation_history": "Tutor: 2 plus 2?\nStudent: 4",
    "tutor_responses": {
      "Tutor_1": {"response": "Right.", "annotation": {"Mistake_Identification": "No"}}
    }
  }
])";

}  // namespace

TEST_CASE("--help exits 0 for the app and every subcommand") {
    CHECK(run("--help").exit_code == 0);
    for (const char* sub : {"preprocess", "index", "predict", "evaluate", "run-all"}) {
        auto r = run(std::string(sub) + " --help");
        CHECK(r.exit_code == 0);
        CHECK(r.output.find("--") != std::string::npos);
    }
}

TEST_CASE("missing input files exit 2") {
    TempDir dir;
    auto r = run("preprocess --input " + dir.file("nope.json") + " --output " +
                 dir.file("out.json"));
    CHECK(r.exit_code == 2);
}

TEST_CASE("unknown flags exit 2") {
    CHECK(run("preprocess --banana").exit_code == 2);
}

TEST_CASE("preprocess cleans the file and logs actions") {
    TempDir dir;
    write_file(dir.file("dev.json"), kSmallDev);
    auto r = run("preprocess --input " + dir.file("dev.json") + " --output " +
                 dir.file("clean.json"));
    REQUIRE(r.exit_code == 0);

    auto cleaned = slurp(dir.file("clean.json"));
    CHECK(cleaned.find("okey") == std::string::npos);
    auto report = slurp(dir.file("clean.json.report.json"));
    CHECK(report.find("removed_greeting") != std::string::npos);

    // clean input: identical output, empty report
    auto r2 = run("preprocess --input " + dir.file("clean.json") + " --output " +
                  dir.file("clean2.json"));
    REQUIRE(r2.exit_code == 0);
    CHECK(slurp(dir.file("clean2.json")) == cleaned);
    CHECK(slurp(dir.file("clean2.json.report.json")) == "[]\n");
}

TEST_CASE("index and knn predictions run without a chat provider") {
    TempDir dir;
    write_file(dir.file("dev.json"), kSmallDev);
    auto indexed = run("index --input " + dir.file("dev.json") + " --store " +
                       dir.file("store.bin") + " --dim 64");
    REQUIRE(indexed.exit_code == 0);
    CHECK(indexed.output.find("indexed 4 examples") != std::string::npos);

    auto predicted = run("predict --input " + dir.file("dev.json") + " --store " +
                         dir.file("store.bin") + " --output " + dir.file("pred.json") +
                         " --labeled --provider knn --k 2 --dim 64");
    REQUIRE(predicted.exit_code == 0);
    CHECK(predicted.output.find("provider_calls=0") != std::string::npos);
    CHECK(slurp(dir.file("pred.json")).find("Mistake_Identification") != std::string::npos);
}

TEST_CASE("re-indexing produces byte-identical store files") {
    TempDir dir;
    write_file(dir.file("dev.json"), kSmallDev);
    auto first = run("index --input " + dir.file("dev.json") + " --store " +
                     dir.file("a.bin") + " --dim 64 --cache-dir " + dir.file("cache"));
    REQUIRE(first.exit_code == 0);
    auto second = run("index --input " + dir.file("dev.json") + " --store " +
                      dir.file("b.bin") + " --dim 64 --cache-dir " + dir.file("cache"));
    REQUIRE(second.exit_code == 0);
    CHECK(slurp(dir.file("a.bin")) == slurp(dir.file("b.bin")));

    // and a cold-cache rebuild matches too
    auto cold = run("index --input " + dir.file("dev.json") + " --store " + dir.file("c.bin") +
                    " --dim 64 --cache-dir " + dir.file("cache2"));
    REQUIRE(cold.exit_code == 0);
    CHECK(slurp(dir.file("c.bin")) == slurp(dir.file("a.bin")));
}

TEST_CASE("a custom lexicon file changes what gets stripped") {
    TempDir dir;
    write_file(dir.file("dev.json"), kSmallDev);
    write_file(dir.file("lex.txt"), "nothing-matches\n");
    auto r = run("preprocess --input " + dir.file("dev.json") + " --output " +
                 dir.file("clean.json") + " --lexicon " + dir.file("lex.txt"));
    REQUIRE(r.exit_code == 0);
    CHECK(slurp(dir.file("clean.json")).find("okey") != std::string::npos);
}

TEST_CASE("an unlabeled dev file cannot be indexed") {
    TempDir dir;
    write_file(dir.file("test.json"), R"([
      {
        "conversation_id": "c1",
        "conversation_history": "Tutor: Q?\nStudent: A",
        "tutor_responses": {"Tutor_1": {"response": "hm"}}
      }
    ])");
    auto r = run("index --input " + dir.file("test.json") + " --store " + dir.file("s.bin"));
    CHECK(r.exit_code == 3);
}

TEST_CASE("zero-shot prediction needs no store") {
    TempDir dir;
    write_file(dir.file("dev.json"), kSmallDev);
    auto r = run("predict --input " + dir.file("dev.json") + " --output " +
                 dir.file("pred.json") + " --labeled --provider echo-gold --k 0");
    REQUIRE(r.exit_code == 0);

    auto scored = run("evaluate --gold " + dir.file("dev.json") + " --pred " +
                      dir.file("pred.json"));
    REQUIRE(scored.exit_code == 0);
    CHECK(scored.output.find("1.000 1.000 1.000 1.000") != std::string::npos);
}

TEST_CASE("evaluate rejects predictions that do not join") {
    TempDir dir;
    write_file(dir.file("dev.json"), kSmallDev);
    write_file(dir.file("other.json"), R"([
      {
        "conversation_id": "c9",
        "conversation_history": "Tutor: Q?\nStudent: A",
        "tutor_responses": {"Tutor_1": {"response": "hm", "annotation": {"Mistake_Identification": "Yes"}}}
      }
    ])");
    auto r = run("evaluate --gold " + dir.file("dev.json") + " --pred " + dir.file("other.json"));
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("c9") != std::string::npos);
}

TEST_CASE("failure flags block scoring unless explicitly allowed") {
    TempDir dir;
    write_file(dir.file("dev.json"), kSmallDev);

    auto predicted = run("predict --input " + dir.file("dev.json") + " --output " +
                         dir.file("pred.json") + " --labeled --provider fixed:garbage --k 0 " +
                         "--max-retries 0 --allow-failures");
    REQUIRE(predicted.exit_code == 0);
    CHECK(predicted.output.find("failures=4") != std::string::npos);

    auto refused = run("evaluate --gold " + dir.file("dev.json") + " --pred " +
                       dir.file("pred.json"));
    CHECK(refused.exit_code == 3);

    auto allowed = run("evaluate --gold " + dir.file("dev.json") + " --pred " +
                       dir.file("pred.json") + " --allow-failures");
    CHECK(allowed.exit_code == 0);
    CHECK(allowed.output.find("n_failures=4") != std::string::npos);
}

TEST_CASE("predict without --allow-failures exits 1 when items fail") {
    TempDir dir;
    write_file(dir.file("dev.json"), kSmallDev);
    auto r = run("predict --input " + dir.file("dev.json") + " --output " + dir.file("p.json") +
                 " --labeled --provider fixed:garbage --k 0 --max-retries 0");
    CHECK(r.exit_code == 1);
}

TEST_CASE("run-all chains the pipeline on a labeled set") {
    TempDir dir;
    write_file(dir.file("dev.json"), kSmallDev);
    auto r = run("run-all --input " + dir.file("dev.json") + " --workdir " + dir.file("work") +
                 " --provider echo-gold --k 2 --dim 64");
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("1.000 1.000 1.000 1.000") != std::string::npos);
    CHECK(fs::exists(dir.file("work") + "/store.bin"));
    CHECK(fs::exists(dir.file("work") + "/predictions.json"));
    CHECK(fs::exists(dir.file("work") + "/report.json"));
}
