// Acceptance suite: runs every release criterion end to end and prints one
// PASS/FAIL line each. Usage: acceptance <cli-binary> <data-dir>

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "mijudge/corpus.hpp"
#include "mijudge/embedding.hpp"
#include "mijudge/error.hpp"
#include "mijudge/judge.hpp"
#include "mijudge/metrics.hpp"
#include "mijudge/preprocess.hpp"
#include "mijudge/prompt.hpp"
#include "mijudge/vectorstore.hpp"

using namespace mijudge;
namespace fs = std::filesystem;

namespace {

std::string g_cli;
std::string g_data_dir;
fs::path g_work;

int g_failures = 0;

void criterion(int number, const std::string& description, const std::function<void()>& body) {
    try {
        body();
        std::printf("[PASS] C%d: %s\n", number, description.c_str());
    } catch (const std::exception& e) {
        ++g_failures;
        std::printf("[FAIL] C%d: %s\n       %s\n", number, description.c_str(), e.what());
    }
}

void expect(bool condition, const std::string& message) {
    if (!condition) throw std::runtime_error(message);
}

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    std::string command = g_cli + " " + args + " 2>&1";
    std::array<char, 4096> buffer{};
    std::string output;
    FILE* pipe = popen(command.c_str(), "r");
    expect(pipe != nullptr, "popen failed");
    size_t n;
    while ((n = fread(buffer.data(), 1, buffer.size(), pipe)) > 0) {
        output.append(buffer.data(), n);
    }
    int status = pclose(pipe);
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return {code, output};
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    expect(in.good(), "cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

size_t line_count(const std::string& path) {
    std::ifstream in(path);
    size_t n = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) ++n;
    }
    return n;
}

// --- criterion 1-3 helpers: independent metric reference ---

struct RefScores {
    double macro_f1;
    double accuracy;
};

RefScores ref_score(const std::vector<int>& gold, const std::vector<int>& pred,
                    const std::vector<int>& classes) {
    int correct = 0;
    for (size_t i = 0; i < gold.size(); ++i) correct += gold[i] == pred[i] ? 1 : 0;
    double f1_sum = 0.0;
    for (int c : classes) {
        int tp = 0;
        int fp = 0;
        int fn = 0;
        for (size_t i = 0; i < gold.size(); ++i) {
            if (gold[i] == c && pred[i] == c) ++tp;
            if (gold[i] != c && pred[i] == c) ++fp;
            if (gold[i] == c && pred[i] != c) ++fn;
        }
        double p = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        double r = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        f1_sum += p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
    }
    return {f1_sum / static_cast<double>(classes.size()),
            static_cast<double>(correct) / static_cast<double>(gold.size())};
}

Label label_of(int code) {
    return code == 0 ? Label::No : code == 1 ? Label::Yes : Label::ToSomeExtent;
}

MetricsReport score_codes(const std::vector<int>& gold, const std::vector<int>& pred) {
    std::vector<DatasetRecord> gold_records;
    std::vector<PredictionRecord> predictions;
    for (size_t i = 0; i < gold.size(); ++i) {
        DatasetRecord record;
        record.dialogue = make_dialogue("c" + std::to_string(i), {{Speaker::Tutor, "t"}});
        TutorResponse response;
        response.tutor_id = "T";
        response.text = "r";
        response.gold_label = label_of(gold[i]);
        record.responses.push_back(response);
        gold_records.push_back(std::move(record));

        PredictionRecord p;
        p.conversation_id = "c" + std::to_string(i);
        p.tutor_id = "T";
        p.judgment.label = label_of(pred[i]);
        predictions.push_back(std::move(p));
    }
    return evaluate(gold_records, predictions);
}

// --- synthetic corpus for the end-to-end criteria ---

int gold_code_for(int i) {
    int slot = i % 10;               // per block of ten: 5 yes, 3 no, 2 tse
    if (slot < 5) return 1;
    if (slot < 8) return 0;
    return 2;
}

std::string synthetic_corpus_json(int n) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    const char* topics[] = {"fractions", "subtraction", "ratios", "percentages", "geometry"};
    for (int i = 0; i < n; ++i) {
        nlohmann::ordered_json conv;
        conv["conversation_id"] = "conv" + std::to_string(i);
        conv["conversation_history"] =
            "Tutor: Question " + std::to_string(i) + " about " + topics[i % 5] +
            ", what do you get?\nStudent: I computed " + std::to_string(i * 7 % 13) +
            " using " + topics[(i + 2) % 5];
        const char* label = gold_code_for(i) == 1   ? "Yes"
                            : gold_code_for(i) == 0 ? "No"
                                                    : "To some extent";
        conv["tutor_responses"] = {
            {"Tutor_1",
             {{"response", "Feedback " + std::to_string(i) + " mentioning " + topics[i % 5]},
              {"annotation", {{"Mistake_Identification", label}}}}}};
        doc.push_back(std::move(conv));
    }
    return doc.dump(2) + "\n";
}

std::string table_row(const std::string& output) {
    // the metrics row is the line after the header
    auto at = output.find("Strict F1 Strict Acc Lenient F1 Lenient Acc\n");
    expect(at != std::string::npos, "no metrics table in output:\n" + output);
    auto begin = at + std::string("Strict F1 Strict Acc Lenient F1 Lenient Acc\n").size();
    auto end = output.find('\n', begin);
    return output.substr(begin, end - begin);
}

// --- fuzz generators for criterion 6 ---

std::string random_case(const std::string& s, std::mt19937& rng) {
    std::string out = s;
    for (char& c : out) {
        if (rng() % 2 == 0) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        else c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::string random_ws(std::mt19937& rng) {
    static const char* choices[] = {"", " ", "  ", "\n", "\t", " \n "};
    return choices[rng() % 6];
}

std::string conforming_output(std::mt19937& rng, Label label) {
    std::string name(canonical_label(label));
    if (rng() % 3 == 0) name = random_case(name, rng);
    if (rng() % 2 == 0) {
        // the promised JSON object, with whitespace jitter
        return random_ws(rng) + "{" + random_ws(rng) + "\"label\"" + random_ws(rng) + ":" +
               random_ws(rng) + "\"" + name + "\"" + random_ws(rng) + "}" + random_ws(rng);
    }
    // the bare label the instructions also allow
    static const char* wrap[] = {"", "`", "\"", "'"};
    const char* w = wrap[rng() % 4];
    return random_ws(rng) + w + name + w + random_ws(rng);
}

std::string nonconforming_output(std::mt19937& rng) {
    const std::string labels[] = {"Yes", "No", "To some extent"};
    const std::string a = labels[rng() % 3];
    const std::string b = labels[rng() % 3];
    switch (rng() % 9) {
        case 0: return "The label is " + a + " or maybe " + b;
        case 1: return a + " " + b;
        case 2: return "I think " + a;
        case 3: return a + ".";
        case 4: return "banana";
        case 5: return "{\"label\": \"banana\"}";
        case 6: return "{\"verdict\": \"" + a + "\"}";
        case 7: return "{oops " + a;
        default: return "*" + a + "*";
    }
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::fprintf(stderr, "usage: acceptance <cli-binary> <data-dir>\n");
        return 2;
    }
    g_cli = argv[1];
    g_data_dir = argv[2];
    g_work = fs::temp_directory_path() / ("mijudge-acceptance-" + std::to_string(::getpid()));
    fs::create_directories(g_work);
    auto wf = [&](const std::string& name) { return (g_work / name).string(); };

    criterion(1, "strict and lenient metrics match a brute-force scorer on 1000 random lists",
              [&] {
                  auto start = std::chrono::steady_clock::now();
                  std::mt19937 rng(424242);
                  std::uniform_int_distribution<int> len_dist(1, 200);
                  for (int round = 0; round < 1000; ++round) {
                      int n = len_dist(rng);
                      std::vector<int> gold(n);
                      std::vector<int> pred(n);
                      for (int i = 0; i < n; ++i) {
                          gold[i] = static_cast<int>(rng() % 3);
                          pred[i] = static_cast<int>(rng() % 3);
                      }
                      auto report = score_codes(gold, pred);
                      auto strict = ref_score(gold, pred, {0, 1, 2});
                      std::vector<int> lg = gold;
                      std::vector<int> lp = pred;
                      for (int& g : lg) g = g == 2 ? 1 : g;
                      for (int& p : lp) p = p == 2 ? 1 : p;
                      auto lenient = ref_score(lg, lp, {0, 1});
                      expect(std::abs(report.strict.macro_f1 - strict.macro_f1) < 1e-9,
                             "strict macro f1 drifted");
                      expect(std::abs(report.strict.accuracy - strict.accuracy) < 1e-9,
                             "strict accuracy drifted");
                      expect(std::abs(report.lenient.macro_f1 - lenient.macro_f1) < 1e-9,
                             "lenient macro f1 drifted");
                      expect(std::abs(report.lenient.accuracy - lenient.accuracy) < 1e-9,
                             "lenient accuracy drifted");
                  }
                  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                     std::chrono::steady_clock::now() - start)
                                     .count();
                  expect(elapsed < 5000, "took " + std::to_string(elapsed) + "ms, budget 5000");
              });

    criterion(2, "the four-item fixture scores 0.5/0.5 strict and 1/3, 0.5 lenient", [&] {
        auto report = score_codes({1, 0, 2, 1}, {1, 1, 2, 0});
        expect(std::abs(report.strict.macro_f1 - 0.5) < 1e-9, "strict macro f1 != 0.5");
        expect(std::abs(report.strict.accuracy - 0.5) < 1e-9, "strict accuracy != 0.5");
        expect(std::abs(report.lenient.macro_f1 - 1.0 / 3.0) < 1e-9, "lenient macro f1 != 1/3");
        expect(std::abs(report.lenient.accuracy - 0.5) < 1e-9, "lenient accuracy != 0.5");
    });

    criterion(3, "lenient accuracy dominates strict accuracy over 500 random runs", [&] {
        std::mt19937 rng(777);
        std::uniform_int_distribution<int> len_dist(1, 120);
        for (int round = 0; round < 500; ++round) {
            int n = len_dist(rng);
            std::vector<int> gold(n);
            std::vector<int> pred(n);
            for (int i = 0; i < n; ++i) {
                gold[i] = static_cast<int>(rng() % 3);
                pred[i] = static_cast<int>(rng() % 3);
            }
            auto report = score_codes(gold, pred);
            expect(report.lenient.accuracy >= report.strict.accuracy,
                   "lenient accuracy fell below strict accuracy");
        }
    });

    criterion(4, "top-k retrieval equals the exhaustive-scan oracle on 500 random vectors", [&] {
        auto start = std::chrono::steady_clock::now();
        std::mt19937 rng(31415);
        std::normal_distribution<double> gauss(0.0, 1.0);
        auto random_vec = [&] {
            EmbeddingVector v;
            v.values.resize(256);
            for (float& x : v.values) x = static_cast<float>(gauss(rng));
            return v;
        };
        VectorStore store;
        for (int i = 0; i < 500; ++i) {
            FewShotExample e;
            char id[16];
            std::snprintf(id, sizeof(id), "v%03d", i);
            e.example_id = id;
            e.conversation_text = "c";
            e.response_text = "r";
            e.label = label_of(i % 3);
            e.vector = random_vec();
            store.upsert(std::move(e));
        }
        // a couple of exact duplicates to force tie-order checks
        for (int i = 0; i < 5; ++i) {
            FewShotExample e;
            e.example_id = "tie" + std::to_string(i);
            e.conversation_text = "c";
            e.response_text = "r";
            e.label = Label::Yes;
            e.vector = store.entries()[i].vector;
            store.upsert(std::move(e));
        }

        auto oracle = [&](const EmbeddingVector& query, int k) {
            std::vector<std::pair<std::string, double>> all;
            for (const auto& e : store.entries()) {
                double dot = 0.0;
                double nq = 0.0;
                double ne = 0.0;
                for (int i = 0; i < query.dim(); ++i) {
                    dot += static_cast<double>(query.values[i]) * e.vector.values[i];
                    nq += static_cast<double>(query.values[i]) * query.values[i];
                    ne += static_cast<double>(e.vector.values[i]) * e.vector.values[i];
                }
                all.emplace_back(e.example_id, dot / (std::sqrt(nq) * std::sqrt(ne)));
            }
            std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) {
                if (x.second != y.second) return x.second > y.second;
                return x.first < y.first;
            });
            if (all.size() > static_cast<size_t>(k)) all.resize(k);
            return all;
        };

        for (int q = 0; q < 25; ++q) {
            auto query = random_vec();
            for (int k : {1, 5, 50}) {
                auto got = store.top_k(query, k);
                auto want = oracle(query, k);
                expect(got.size() == want.size(), "result size mismatch");
                for (size_t i = 0; i < got.size(); ++i) {
                    expect(got[i].example.example_id == want[i].first,
                           "rank " + std::to_string(i) + " id mismatch");
                    expect(got[i].score == want[i].second,
                           "rank " + std::to_string(i) + " score mismatch");
                }
            }
        }
        auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
        expect(elapsed < 2000, "took " + std::to_string(elapsed) + "ms, budget 2000");
    });

    criterion(5, "the three cleanup fixtures transform exactly and the pipeline is idempotent",
              [&] {
                  PreprocessConfig config;
                  config.overrides.emplace("s1", 2);

                  auto greeting = make_dialogue("g1", {{Speaker::Student, "okey"},
                                                       {Speaker::Tutor, "What is 25 minus 18?"},
                                                       {Speaker::Student, "8"}});
                  auto self_reply = make_dialogue(
                      "s1",
                      {{Speaker::Tutor,
                        "Hi, could you please provide a step-by-step solution for the question "
                        "below? The question is ..."},
                       {Speaker::Student,
                        "Samantha buys 4 toys at $12.00 each. For each pair of toys..."},
                       {Speaker::Tutor,
                        "I added the two amounts together to get a total of $36.00 + $6.00 = "
                        "$42.00."}});
                  auto fragmented = make_dialogue(
                      "f1",
                      {{Speaker::Tutor,
                        "Hi, could you please provide a step-by-step solution for the question "
                        "below? The question is: Tyson decided to make muffaletta sandwiches "
                        "for ..."},
                       {Speaker::Tutor, "How many pounds of meat are needed for each sandwich?"},
                       {Speaker::Student,
                        "Each sandwich requires 1 pound of meat and 1 pound of cheese."},
                       {Speaker::Tutor, "What is the cost of 1 pound of meat?"},
                       {Speaker::Student, "The cost of 1 pound of meat is $7.00."}});

                  auto [g, gr] = preprocess_pipeline(greeting, config);
                  expect(g.turns.size() == 2, "greeting fixture should keep 2 turns");
                  expect(g.turns[0].speaker == Speaker::Tutor &&
                             g.turns[0].text == "What is 25 minus 18?",
                         "greeting fixture kept the wrong first turn");
                  expect(gr.actions.size() == 1 &&
                             gr.actions[0].kind == ActionKind::RemovedGreeting,
                         "greeting removal not logged");

                  auto [s, sr] = preprocess_pipeline(self_reply, config);
                  expect(s.turns.size() == 2, "self-reply fixture should keep 2 turns");
                  expect(s.turns.back().speaker == Speaker::Student,
                         "self-reply fixture should end on the student turn");

                  auto [f, fr] = preprocess_pipeline(fragmented, config);
                  expect(f.turns.size() == 4, "fragmented fixture should merge to 4 turns");
                  expect(f.turns[0].speaker == Speaker::Tutor &&
                             f.turns[0].text.find("How many pounds") != std::string::npos,
                         "tutor fragments were not merged");
                  expect(f.turns[0].text.find("sandwiches for ... How many") !=
                             std::string::npos,
                         "fragments must join with a single space");

                  for (const auto* fixture : {&greeting, &self_reply, &fragmented}) {
                      auto [once, r1] = preprocess_pipeline(*fixture, config);
                      auto [twice, r2] = preprocess_pipeline(once, config);
                      expect(twice.turns.size() == once.turns.size(),
                             "pipeline is not idempotent");
                      for (size_t i = 0; i < once.turns.size(); ++i) {
                          expect(twice.turns[i].text == once.turns[i].text &&
                                     twice.turns[i].speaker == once.turns[i].speaker,
                                 "pipeline is not idempotent");
                      }
                      expect(r2.actions.empty(), "second pass logged actions");
                  }
              });

    criterion(6, "prompts reproduce the vendored template and the parser survives 2000 fuzz "
                 "cases",
              [&] {
                  const std::string template_path = g_data_dir + "/prompt_template.txt";
                  auto tmpl = PromptTemplate::load(template_path);
                  auto raw = slurp(template_path);

                  auto conversation = make_dialogue(
                      "c1", {{Speaker::Tutor, "What is 25 minus 18?"}, {Speaker::Student, "8"}});
                  TutorResponse response;
                  response.tutor_id = "T";
                  response.text = "Check the subtraction.";

                  FewShotExample e;
                  e.example_id = "e1";
                  e.conversation_text = "Tutor: q\nStudent: a";
                  e.response_text = "r";
                  e.label = Label::ToSomeExtent;
                  auto bundle =
                      tmpl.build_prompt(conversation, response, {RetrievedExample{e, 0.9}});

                  std::string expected = raw;
                  auto substitute = [&expected](const std::string& token,
                                                const std::string& value) {
                      auto at = expected.find(token);
                      expect(at != std::string::npos, "template lost " + token);
                      expected.replace(at, token.size(), value);
                  };
                  substitute("{format_instructions}", format_instructions());
                  substitute("{examples}", render_example(e, 1));
                  substitute("{conversation}", "Tutor: What is 25 minus 18?\nStudent: 8");
                  substitute("{response}", "Check the subtraction.");
                  expect(bundle.full_text == expected,
                         "rendered prompt differs from the substituted template");

                  for (Label l : kAllLabels) {
                      std::string echoed =
                          "{\"label\": \"" + std::string(canonical_label(l)) + "\"}";
                      expect(parse_label(echoed) == l, "format round-trip failed");
                  }

                  std::mt19937 rng(987654);
                  for (int i = 0; i < 1000; ++i) {
                      Label l = label_of(static_cast<int>(rng() % 3));
                      std::string text = conforming_output(rng, l);
                      Label parsed;
                      try {
                          parsed = parse_label(text);
                      } catch (const Error& err) {
                          throw std::runtime_error("conforming output rejected: [" + text +
                                                   "]: " + err.what());
                      }
                      expect(parsed == l, "conforming output parsed to the wrong label: [" +
                                              text + "]");
                  }
                  for (int i = 0; i < 1000; ++i) {
                      std::string text = nonconforming_output(rng);
                      bool accepted = true;
                      try {
                          parse_label(text);
                      } catch (const Error&) {
                          accepted = false;
                      }
                      expect(!accepted, "non-conforming output accepted: [" + text + "]");
                  }
              });

    const std::string corpus_path = wf("corpus.json");
    {
        std::ofstream out(corpus_path, std::ios::binary);
        out << synthetic_corpus_json(60);
    }

    criterion(7, "offline end-to-end run is exact and byte-stable on 60 dialogues", [&] {
        auto indexed =
            run_cli("index --input " + corpus_path + " --store " + wf("store.bin") +
                    " --dim 128 --cache-dir " + wf("cache"));
        expect(indexed.exit_code == 0, "index failed:\n" + indexed.output);
        expect(indexed.output.find("indexed 60 examples") != std::string::npos,
               "expected 60 indexed examples:\n" + indexed.output);

        // echo-gold: perfect row
        auto echo = run_cli("predict --input " + corpus_path + " --store " + wf("store.bin") +
                            " --output " + wf("echo.json") + " --checkpoint " +
                            wf("echo.ckpt.jsonl") + " --labeled --provider echo-gold --k 5 "
                            "--dim 128 --cache-dir " + wf("cache"));
        expect(echo.exit_code == 0, "echo-gold predict failed:\n" + echo.output);
        auto echo_eval =
            run_cli("evaluate --gold " + corpus_path + " --pred " + wf("echo.json"));
        expect(echo_eval.exit_code == 0, "evaluate failed:\n" + echo_eval.output);
        expect(table_row(echo_eval.output) == "1.000 1.000 1.000 1.000",
               "echo-gold row should be perfect, got: " + table_row(echo_eval.output));

        // fixed:Yes on the 30/18/12 gold split
        auto fixed = run_cli("predict --input " + corpus_path + " --store " + wf("store.bin") +
                             " --output " + wf("fixed.json") + " --checkpoint " +
                             wf("fixed.ckpt.jsonl") + " --labeled --provider fixed:Yes --k 5 "
                             "--dim 128 --cache-dir " + wf("cache"));
        expect(fixed.exit_code == 0, "fixed:Yes predict failed:\n" + fixed.output);
        auto fixed_eval = run_cli("evaluate --gold " + corpus_path + " --pred " +
                                  wf("fixed.json") + " --json " + wf("fixed-report.json"));
        expect(fixed_eval.exit_code == 0, "evaluate failed:\n" + fixed_eval.output);
        auto row = table_row(fixed_eval.output);
        expect(row.substr(6) == "0.500 0.412 0.700", "fixed:Yes row wrong: " + row);

        auto report = metrics_from_json(slurp(wf("fixed-report.json")));
        expect(report.strict.accuracy == 30.0 / 60.0, "strict accuracy must be exactly 0.5");
        expect(report.lenient.accuracy == 42.0 / 60.0, "lenient accuracy must be exactly 0.7");

        // two fresh runs are byte-identical
        auto again = run_cli("predict --input " + corpus_path + " --store " + wf("store.bin") +
                             " --output " + wf("echo2.json") + " --checkpoint " +
                             wf("echo2.ckpt.jsonl") + " --labeled --provider echo-gold --k 5 "
                             "--dim 128 --cache-dir " + wf("cache"));
        expect(again.exit_code == 0, "second echo-gold predict failed:\n" + again.output);
        expect(slurp(wf("echo.json")) == slurp(wf("echo2.json")),
               "prediction files differ across identical runs");
    });

    criterion(8, "a killed batch resumes with exactly 35 calls and identical output", [&] {
        auto crashed =
            run_cli("predict --input " + corpus_path + " --store " + wf("store.bin") +
                    " --output " + wf("resumed.json") + " --checkpoint " + wf("crash.jsonl") +
                    " --labeled --provider abort-after:25:echo-gold --k 5 --dim 128 "
                    "--cache-dir " + wf("cache"));
        expect(crashed.exit_code != 0, "the aborted run should not exit 0");
        expect(line_count(wf("crash.jsonl")) == 25,
               "checkpoint should hold exactly the 25 completed items, has " +
                   std::to_string(line_count(wf("crash.jsonl"))));

        auto resumed =
            run_cli("predict --input " + corpus_path + " --store " + wf("store.bin") +
                    " --output " + wf("resumed.json") + " --checkpoint " + wf("crash.jsonl") +
                    " --resume --labeled --provider echo-gold --k 5 --dim 128 --cache-dir " +
                    wf("cache"));
        expect(resumed.exit_code == 0, "resume failed:\n" + resumed.output);
        expect(resumed.output.find("resumed=25") != std::string::npos,
               "expected 25 resumed items:\n" + resumed.output);
        expect(resumed.output.find("provider_calls=35") != std::string::npos,
               "expected exactly 35 provider calls:\n" + resumed.output);
        expect(line_count(wf("crash.jsonl")) == 60, "checkpoint should end at 60 lines");

        auto uninterrupted =
            run_cli("predict --input " + corpus_path + " --store " + wf("store.bin") +
                    " --output " + wf("full.json") + " --checkpoint " + wf("full.jsonl") +
                    " --labeled --provider echo-gold --k 5 --dim 128 --cache-dir " +
                    wf("cache"));
        expect(uninterrupted.exit_code == 0, "uninterrupted run failed");
        expect(slurp(wf("resumed.json")) == slurp(wf("full.json")),
               "resumed output differs from an uninterrupted run");
    });

    criterion(9, "reports render in the published table shape and a remote-provider run "
                 "completes hands-free",
              [&] {
                  MetricsReport sample;
                  sample.strict = {0.584, 0.827, {}};
                  sample.lenient = {0.814, 0.897, {}};
                  auto table = render_report(sample, ReportFormat::Table);
                  expect(table.find("0.584 0.827 0.814 0.897") != std::string::npos,
                         "table row must render at 3-decimal precision");

                  // a stub provider speaking the production wire contract
                  httplib::Server server;
                  server.Post("/v1/embeddings",
                              [](const httplib::Request& req, httplib::Response& res) {
                                  if (req.get_header_value("Authorization").empty()) {
                                      res.status = 401;
                                      return;
                                  }
                                  auto body = nlohmann::json::parse(req.body);
                                  nlohmann::json data = nlohmann::json::array();
                                  for (const auto& text : body.at("input")) {
                                      // deterministic projection of the text
                                      std::array<double, 8> v{};
                                      int i = 0;
                                      for (unsigned char c : text.get<std::string>()) {
                                          v[i++ % 8] += c / 255.0;
                                      }
                                      double norm = 0.0;
                                      for (double x : v) norm += x * x;
                                      norm = std::sqrt(std::max(norm, 1e-12));
                                      nlohmann::json vec = nlohmann::json::array();
                                      for (double x : v) vec.push_back(x / norm);
                                      data.push_back({{"embedding", vec}});
                                  }
                                  res.set_content(nlohmann::json{{"data", data}}.dump(),
                                                  "application/json");
                              });
                  server.Post("/v1/chat/completions",
                              [](const httplib::Request& req, httplib::Response& res) {
                                  if (req.get_header_value("Authorization").empty()) {
                                      res.status = 401;
                                      return;
                                  }
                                  nlohmann::json reply{
                                      {"choices",
                                       {{{"message",
                                          {{"content", "{\"label\": \"Yes\"}"}}}}}}};
                                  res.set_content(reply.dump(), "application/json");
                              });

                  int port = server.bind_to_any_port("127.0.0.1");
                  expect(port > 0, "could not bind the stub server");
                  std::thread listener([&server] { server.listen_after_bind(); });
                  server.wait_until_ready();

                  setenv("MIJUDGE_API_KEY", "acceptance-key", 1);
                  auto r = run_cli("run-all --input " + corpus_path + " --workdir " +
                                   wf("live") + " --provider http --embedder http "
                                   "--base-url http://127.0.0.1:" + std::to_string(port) +
                                   " --embed-dim 8 --k 3 --holdout 10");
                  server.stop();
                  listener.join();

                  expect(r.exit_code == 0, "remote-provider run-all failed:\n" + r.output);
                  expect(fs::exists(wf("live") + "/predictions.json"),
                         "predictions file missing");
                  expect(fs::exists(wf("live") + "/report.json"), "report file missing");
                  expect(line_count(wf("live") + "/checkpoint.jsonl") == 10,
                         "holdout run should checkpoint 10 items");
                  expect(r.output.find("Strict F1 Strict Acc Lenient F1 Lenient Acc") !=
                             std::string::npos,
                         "run-all should print the metrics table");
              });

    std::error_code ec;
    fs::remove_all(g_work, ec);

    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
