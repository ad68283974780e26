// mijudge: retrieval-augmented judging of tutor responses.
//
// Subcommands wire the pipeline stages together:
//   preprocess -> index -> predict -> evaluate, plus run-all for a
//   one-shot labeled-set run with self-query exclusion.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mijudge/corpus.hpp"
#include "mijudge/embedding.hpp"
#include "mijudge/error.hpp"
#include "mijudge/judge.hpp"
#include "mijudge/metrics.hpp"
#include "mijudge/preprocess.hpp"
#include "mijudge/prompt.hpp"
#include "mijudge/vectorstore.hpp"

namespace fs = std::filesystem;
using namespace mijudge;

namespace {

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::Config:
            return 2;
        case ErrorKind::Parse:
        case ErrorKind::Label:
        case ErrorKind::Validation:
        case ErrorKind::Format:
        case ErrorKind::Domain:
            return 3;
        default:
            return 1;
    }
}

void require_input(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) {
        throw Error(ErrorKind::Config, what + " not found: " + path);
    }
}

struct CommonOptions {
    std::string data_dir = MIJUDGE_DATA_DIR;
    std::string field_map_path;
    std::string lexicon_path;
    std::string overrides_path;

    std::string provider;  // echo-gold | fixed:<text> | script:<path> | flaky:<n>[:inner]
                           // | abort-after:<n>[:inner] | http | knn
    std::string embedder = "offline";  // offline | http
    int dim = 256;
    std::string base_url;
    std::string model = "gpt-4o";
    std::string embed_model = "text-embedding-3-small";
    int embed_dim = 1536;
    std::string chat_path = "/v1/chat/completions";
    std::string embed_path = "/v1/embeddings";
    double temperature = 0.0;
    int timeout_ms = 60000;
    std::string api_key_env = "MIJUDGE_API_KEY";

    int k = 5;
    int concurrency = 1;
    int embed_batch = 64;
    int char_budget = 0;
    int max_retries = 3;
    long backoff_base_ms = 200;
    double backoff_factor = 2.0;

    std::string cache_dir;
    std::string template_path;
};

void add_data_flags(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--data-dir", opt.data_dir, "Directory holding the shipped data files")
        ->capture_default_str();
    cmd->add_option("--field-map", opt.field_map_path,
                    "JSON descriptor renaming the dataset fields");
}

void add_preprocess_flags(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--lexicon", opt.lexicon_path,
                    "Greeting/closing phrase list (one per line); default built-in");
    cmd->add_option("--overrides", opt.overrides_path,
                    "JSON list of {conversation_id, turn_index} turns to drop");
}

void add_provider_flags(CLI::App* cmd, CommonOptions& opt, bool with_chat) {
    if (with_chat) {
        cmd->add_option("--provider", opt.provider,
                        "echo-gold | fixed:<text> | script:<path> | flaky:<n>[:inner] | "
                        "abort-after:<n>[:inner] | http | knn")
            ->required();
        cmd->add_option("--model", opt.model, "Chat model name")->capture_default_str();
        cmd->add_option("--chat-path", opt.chat_path, "Chat endpoint path")
            ->capture_default_str();
        cmd->add_option("--temperature", opt.temperature, "Sampling temperature")
            ->capture_default_str();
    }
    cmd->add_option("--embedder", opt.embedder, "offline | http")->capture_default_str();
    cmd->add_option("--dim", opt.dim, "Offline embedder dimension")->capture_default_str();
    cmd->add_option("--embed-model", opt.embed_model, "Remote embedding model name")
        ->capture_default_str();
    cmd->add_option("--embed-dim", opt.embed_dim, "Remote embedding dimension")
        ->capture_default_str();
    cmd->add_option("--embed-path", opt.embed_path, "Embeddings endpoint path")
        ->capture_default_str();
    cmd->add_option("--base-url", opt.base_url, "Provider base URL, e.g. https://api.openai.com");
    cmd->add_option("--timeout-ms", opt.timeout_ms, "HTTP timeout")->capture_default_str();
    cmd->add_option("--api-key-env", opt.api_key_env,
                    "Environment variable holding the provider credential")
        ->capture_default_str();
    cmd->add_option("--embed-batch", opt.embed_batch, "Texts per embedding request")
        ->capture_default_str();
    cmd->add_option("--cache-dir", opt.cache_dir,
                    "Embedding cache directory (default <store>.cache)");
}

FieldMap field_map_for(const CommonOptions& opt) {
    if (opt.field_map_path.empty()) return {};
    require_input(opt.field_map_path, "field map");
    return load_field_map(opt.field_map_path);
}

PreprocessConfig preprocess_config_for(const CommonOptions& opt) {
    PreprocessConfig config;
    if (!opt.lexicon_path.empty()) {
        require_input(opt.lexicon_path, "lexicon");
        config.lexicon = load_lexicon(opt.lexicon_path);
    }
    if (!opt.overrides_path.empty()) {
        require_input(opt.overrides_path, "override file");
        config.overrides = load_overrides(opt.overrides_path);
    }
    return config;
}

std::string api_key_for(const CommonOptions& opt) {
    const char* value = std::getenv(opt.api_key_env.c_str());
    return value ? value : "";
}

std::shared_ptr<EmbeddingProvider> make_embedder(const CommonOptions& opt) {
    if (opt.embedder == "offline") return std::make_shared<OfflineHashEmbedder>(opt.dim);
    if (opt.embedder == "http") {
        HttpEmbedderConfig config;
        config.base_url = opt.base_url;
        config.path = opt.embed_path;
        config.model = opt.embed_model;
        config.dim = opt.embed_dim;
        config.api_key = api_key_for(opt);
        config.timeout_ms = opt.timeout_ms;
        return std::make_shared<HttpEmbedder>(config);
    }
    throw Error(ErrorKind::Config, "unknown embedder \"" + opt.embedder + "\"");
}

std::shared_ptr<ChatProvider> make_chat_provider(const std::string& spec,
                                                 const CommonOptions& opt) {
    if (spec == "echo-gold") return std::make_shared<EchoGoldProvider>();
    if (spec.rfind("fixed:", 0) == 0) return std::make_shared<FixedProvider>(spec.substr(6));
    if (spec.rfind("script:", 0) == 0) {
        require_input(spec.substr(7), "script file");
        return ScriptProvider::from_file(spec.substr(7));
    }
    auto split_count = [&](const std::string& rest) -> std::pair<int, std::string> {
        size_t colon = rest.find(':');
        std::string count = colon == std::string::npos ? rest : rest.substr(0, colon);
        std::string inner = colon == std::string::npos ? "fixed:Yes" : rest.substr(colon + 1);
        try {
            return {std::stoi(count), inner};
        } catch (const std::exception&) {
            throw Error(ErrorKind::Config, "bad provider count in \"" + spec + "\"");
        }
    };
    if (spec.rfind("flaky:", 0) == 0) {
        auto [count, inner] = split_count(spec.substr(6));
        return std::make_shared<FlakyProvider>(count, make_chat_provider(inner, opt));
    }
    if (spec.rfind("abort-after:", 0) == 0) {
        auto [count, inner] = split_count(spec.substr(12));
        return std::make_shared<AbortAfterProvider>(count, make_chat_provider(inner, opt));
    }
    if (spec == "http") {
        HttpChatConfig config;
        config.base_url = opt.base_url;
        config.path = opt.chat_path;
        config.model = opt.model;
        config.temperature = opt.temperature;
        config.api_key = api_key_for(opt);
        config.timeout_ms = opt.timeout_ms;
        return std::make_shared<HttpChatProvider>(config);
    }
    throw Error(ErrorKind::Config, "unknown provider \"" + spec + "\"");
}

TextTables text_tables_for(const CommonOptions& opt) {
    return load_text_tables(opt.data_dir + "/stopwords_en.txt",
                            opt.data_dir + "/contractions.json");
}

PromptTemplate template_for(const CommonOptions& opt) {
    std::string path =
        opt.template_path.empty() ? opt.data_dir + "/prompt_template.txt" : opt.template_path;
    require_input(path, "prompt template");
    return PromptTemplate::load(path);
}

nlohmann::json report_to_json(const PreprocessReport& report) {
    nlohmann::json actions = nlohmann::json::array();
    for (const auto& a : report.actions) {
        actions.push_back(
            {{"kind", std::string(to_string(a.kind))}, {"turn_indices", a.turn_indices}});
    }
    return {{"dialogue_id", report.dialogue_id},
            {"actions", actions},
            {"warnings", report.warnings}};
}

struct PredictInputs {
    std::vector<DatasetRecord> records;   // as parsed (serialization base)
    std::vector<BatchItem> items;         // preprocessed dialogues
};

PredictInputs load_and_preprocess(const std::string& input, bool labeled,
                                  const CommonOptions& opt) {
    PredictInputs out;
    out.records = parse_dataset_file(input, labeled, field_map_for(opt));
    PreprocessConfig config = preprocess_config_for(opt);
    for (const auto& record : out.records) {
        auto [clean, report] = preprocess_pipeline(record.dialogue, config);
        for (const auto& response : record.responses) {
            out.items.push_back(BatchItem{clean, response});
        }
    }
    return out;
}

// --- subcommands ---

int cmd_preprocess(const std::string& input, const std::string& output,
                   const std::string& report_path, bool unlabeled, const CommonOptions& opt) {
    require_input(input, "input dataset");
    auto records = parse_dataset_file(input, !unlabeled, field_map_for(opt));
    PreprocessConfig config = preprocess_config_for(opt);

    nlohmann::json reports = nlohmann::json::array();
    size_t total_actions = 0;
    for (auto& record : records) {
        auto [clean, report] = preprocess_pipeline(record.dialogue, config);
        record.dialogue = std::move(clean);
        total_actions += report.actions.size();
        if (!report.actions.empty() || !report.warnings.empty()) {
            reports.push_back(report_to_json(report));
        }
    }

    std::ofstream out(output, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + output);
    write_dataset(records, out, field_map_for(opt));

    std::string sidecar = report_path.empty() ? output + ".report.json" : report_path;
    std::ofstream rep(sidecar, std::ios::binary | std::ios::trunc);
    if (!rep) throw Error(ErrorKind::Io, "cannot write " + sidecar);
    rep << reports.dump(2) << "\n";

    std::cout << "preprocessed " << records.size() << " conversations, " << total_actions
              << " actions -> " << output << "\n";
    return 0;
}

int cmd_index(const std::string& input, const std::string& store_path,
              const CommonOptions& opt) {
    require_input(input, "input dataset");
    auto inputs = load_and_preprocess(input, /*labeled=*/true, opt);

    auto embedder = make_embedder(opt);
    std::string cache_dir = opt.cache_dir.empty() ? store_path + ".cache" : opt.cache_dir;
    EmbeddingCache cache(cache_dir);
    TextTables tables = text_tables_for(opt);
    NormalizeOptions normalize_options;

    std::vector<std::string> texts;
    texts.reserve(inputs.items.size());
    for (const auto& item : inputs.items) {
        texts.push_back(
            normalize_text(make_query_text(item.dialogue, item.response), normalize_options,
                           tables));
    }

    std::vector<EmbeddingVector> vectors(texts.size());
    for (size_t at = 0; at < texts.size(); at += opt.embed_batch) {
        size_t end = std::min(texts.size(), at + opt.embed_batch);
        std::vector<std::string> chunk(texts.begin() + at, texts.begin() + end);
        auto embedded = cache.cached_embed(*embedder, chunk);
        std::move(embedded.begin(), embedded.end(), vectors.begin() + at);
    }

    VectorStore store;
    for (size_t i = 0; i < inputs.items.size(); ++i) {
        const auto& item = inputs.items[i];
        FewShotExample example;
        example.example_id =
            example_key(item.dialogue.conversation_id, item.response.tutor_id);
        example.conversation_text = render_dialogue(item.dialogue);
        example.response_text = item.response.text;
        example.label = *item.response.gold_label;
        example.vector = vectors[i];
        store.upsert(std::move(example));
    }
    store.persist(store_path);
    std::cout << "indexed " << store.size() << " examples (dim " << store.dim() << ") -> "
              << store_path << "\n";
    return 0;
}

int cmd_predict(const std::string& input, const std::string& store_path,
                const std::string& out_path, const std::string& checkpoint_path, bool labeled,
                bool resume, bool allow_failures, const CommonOptions& opt) {
    require_input(input, "input dataset");
    if (opt.k > 0 || opt.provider == "knn") require_input(store_path, "vector store");

    auto inputs = load_and_preprocess(input, labeled, opt);
    const bool needs_retrieval = opt.k > 0 || opt.provider == "knn";

    VectorStore store;
    auto embedder = make_embedder(opt);
    std::optional<EmbeddingCache> cache;
    if (needs_retrieval) {
        store = VectorStore::load(store_path);
        if (store.dim() != embedder->dim()) {
            throw Error(ErrorKind::Config,
                        "store " + store_path + " holds dim-" + std::to_string(store.dim()) +
                            " vectors but the embedder produces dim " +
                            std::to_string(embedder->dim()));
        }
        cache.emplace(opt.cache_dir.empty() ? store_path + ".cache" : opt.cache_dir);
    }
    TextTables tables = text_tables_for(opt);
    NormalizeOptions normalize_options;
    auto embed_transform = [&tables, normalize_options](const std::string& text) {
        return normalize_text(text, normalize_options, tables);
    };

    std::vector<PredictionRecord> records;
    int chat_calls = 0;
    size_t resumed = 0;

    if (opt.provider == "knn") {
        int k = std::max(opt.k, 1);
        for (const auto& item : inputs.items) {
            std::string query = embed_transform(make_query_text(item.dialogue, item.response));
            EmbeddingVector vector = cache->cached_embed(*embedder, {query})[0];
            std::set<std::string> exclude{
                example_key(item.dialogue.conversation_id, item.response.tutor_id)};
            Label label = knn_predict(store, vector, k, exclude);
            Judgment judgment;
            judgment.label = label;
            judgment.raw_text = "knn";
            judgment.provider_id = "knn";
            records.push_back(PredictionRecord{item.dialogue.conversation_id,
                                               item.response.tutor_id, item.response.text,
                                               std::move(judgment)});
        }
    } else {
        auto chat = make_chat_provider(opt.provider, opt);
        JudgeOptions judge_options;
        judge_options.k = opt.k;
        judge_options.retry.max_retries = opt.max_retries;
        judge_options.retry.backoff_base = std::chrono::milliseconds(opt.backoff_base_ms);
        judge_options.retry.backoff_factor = opt.backoff_factor;
        judge_options.prompt_char_budget = opt.char_budget;

        PromptTemplate prompt_template = template_for(opt);
        JudgePipeline pipeline(opt.k > 0 ? &store : nullptr, &prompt_template, embedder.get(),
                               cache ? &*cache : nullptr, chat.get(), judge_options,
                               embed_transform);

        std::string checkpoint =
            checkpoint_path.empty() ? out_path + ".checkpoint.jsonl" : checkpoint_path;
        if (resume && fs::exists(checkpoint)) {
            resumed = read_checkpoint(checkpoint).size();
        }
        records = pipeline.run_batch(inputs.items, checkpoint, resume, opt.concurrency);
        chat_calls = chat->call_count();
    }

    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + out_path);
    serialize_predictions(inputs.records, records, out, field_map_for(opt));

    long failures = 0;
    for (const auto& record : records) failures += record.judgment.failed ? 1 : 0;
    std::cout << "items=" << records.size() << " resumed=" << resumed
              << " provider_calls=" << chat_calls << " failures=" << failures << " -> "
              << out_path << "\n";
    if (failures > 0 && !allow_failures) {
        std::cerr << failures << " item(s) exhausted retries; re-run with --allow-failures to "
                     "keep going\n";
        return 1;
    }
    return 0;
}

int cmd_evaluate(const std::string& gold_path, const std::string& pred_path,
                 const std::string& json_out, bool allow_failures, const CommonOptions& opt) {
    require_input(gold_path, "gold dataset");
    require_input(pred_path, "predictions file");
    FieldMap fields = field_map_for(opt);
    auto gold = parse_dataset_file(gold_path, /*expect_labels=*/true, fields);
    auto predicted = parse_dataset_file(pred_path, /*expect_labels=*/true, fields);

    std::vector<PredictionRecord> records;
    long failures = 0;
    for (const auto& record : predicted) {
        for (const auto& r : record.responses) {
            PredictionRecord p;
            p.conversation_id = record.dialogue.conversation_id;
            p.tutor_id = r.tutor_id;
            p.response_text = r.text;
            p.judgment.label = *r.gold_label;  // the prediction file's annotation
            p.judgment.failed = r.prediction_failed;
            failures += r.prediction_failed ? 1 : 0;
            records.push_back(std::move(p));
        }
    }
    if (failures > 0 && !allow_failures) {
        throw Error(ErrorKind::Validation,
                    std::to_string(failures) +
                        " prediction(s) carry failure flags; pass --allow-failures to score "
                        "them anyway");
    }

    MetricsReport report = evaluate(gold, records);
    std::cout << render_report(report, ReportFormat::Table);
    std::cout << "n_items=" << report.n_items << " n_failures=" << report.n_failures << "\n";
    if (!json_out.empty()) {
        std::ofstream out(json_out, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + json_out);
        out << render_report(report, ReportFormat::Json) << "\n";
    }
    return 0;
}

int cmd_run_all(const std::string& input, const std::string& workdir, int holdout,
                bool allow_failures, CommonOptions& opt) {
    require_input(input, "input dataset");
    fs::create_directories(workdir);

    const std::string cleaned = workdir + "/cleaned.json";
    const std::string store_path = workdir + "/store.bin";
    const std::string predictions = workdir + "/predictions.json";
    const std::string checkpoint = workdir + "/checkpoint.jsonl";

    int rc = cmd_preprocess(input, cleaned, "", /*unlabeled=*/false, opt);
    if (rc != 0) return rc;

    // Manual overrides were applied by the preprocess step; the cleaned
    // file must not have them applied twice.
    CommonOptions downstream = opt;
    downstream.overrides_path.clear();

    rc = cmd_index(cleaned, store_path, downstream);
    if (rc != 0) return rc;

    std::string judged = cleaned;
    if (holdout > 0) {
        auto records = parse_dataset_file(cleaned, true, field_map_for(downstream));
        if (static_cast<size_t>(holdout) >= records.size()) {
            throw Error(ErrorKind::Config, "holdout must be smaller than the dataset");
        }
        std::vector<DatasetRecord> tail(records.end() - holdout, records.end());
        judged = workdir + "/holdout.json";
        std::ofstream out(judged, std::ios::binary | std::ios::trunc);
        write_dataset(tail, out, field_map_for(downstream));
    }

    rc = cmd_predict(judged, store_path, predictions, checkpoint, /*labeled=*/true,
                     /*resume=*/false, allow_failures, downstream);
    if (rc != 0) return rc;

    return cmd_evaluate(cleaned, predictions, workdir + "/report.json", allow_failures,
                        downstream);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Retrieval-augmented judging of tutor responses in math dialogues"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key=value config file; flags take precedence");

    CommonOptions opt;

    std::string input;
    std::string output;
    std::string store_path;
    std::string checkpoint_path;
    std::string report_path;
    std::string gold_path;
    std::string pred_path;
    std::string json_out;
    std::string workdir = "runall-out";
    bool unlabeled = false;
    bool labeled = false;
    bool resume = false;
    bool allow_failures = false;
    int holdout = 0;

    auto* preprocess = app.add_subcommand(
        "preprocess", "Clean dialogues (greetings, self-replies, fragmented turns)");
    preprocess->add_option("--input", input, "Raw dataset JSON")->required();
    preprocess->add_option("--output", output, "Cleaned dataset JSON")->required();
    preprocess->add_option("--report", report_path,
                           "Sidecar action report (default <output>.report.json)");
    preprocess->add_flag("--unlabeled", unlabeled, "Input carries no annotations");
    add_data_flags(preprocess, opt);
    add_preprocess_flags(preprocess, opt);

    auto* index = app.add_subcommand("index", "Embed a labeled set into the vector store");
    index->add_option("--input", input, "Labeled dataset JSON")->required();
    index->add_option("--store", store_path, "Vector store output path")->required();
    add_data_flags(index, opt);
    add_preprocess_flags(index, opt);
    add_provider_flags(index, opt, /*with_chat=*/false);

    auto* predict = app.add_subcommand("predict", "Judge every response in a dataset");
    predict->add_option("--input", input, "Dataset JSON")->required();
    predict->add_option("--store", store_path, "Vector store path");
    predict->add_option("--output", output, "Predictions JSON")->required();
    predict->add_option("--checkpoint", checkpoint_path,
                        "JSONL checkpoint (default <output>.checkpoint.jsonl)");
    predict->add_flag("--labeled", labeled, "Parse gold annotations (needed by echo-gold)");
    predict->add_flag("--resume", resume, "Skip items already in the checkpoint");
    predict->add_flag("--allow-failures", allow_failures,
                      "Exit 0 even when some items exhausted retries");
    predict->add_option("--k", opt.k, "Few-shot examples to retrieve (0 = zero-shot)")
        ->capture_default_str();
    predict->add_option("--concurrency", opt.concurrency, "Worker pool size")
        ->capture_default_str();
    predict->add_option("--max-retries", opt.max_retries, "Retries per item")
        ->capture_default_str();
    predict->add_option("--backoff-ms", opt.backoff_base_ms, "Base retry backoff")
        ->capture_default_str();
    predict->add_option("--backoff-factor", opt.backoff_factor, "Retry backoff multiplier")
        ->capture_default_str();
    predict->add_option("--char-budget", opt.char_budget,
                        "Max prompt characters; excess examples are dropped (0 = unlimited)")
        ->capture_default_str();
    predict->add_option("--template", opt.template_path, "Prompt template override");
    add_data_flags(predict, opt);
    add_preprocess_flags(predict, opt);
    add_provider_flags(predict, opt, /*with_chat=*/true);

    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score predictions against gold labels");
    evaluate_cmd->add_option("--gold", gold_path, "Gold dataset JSON")->required();
    evaluate_cmd->add_option("--pred", pred_path, "Predictions JSON")->required();
    evaluate_cmd->add_option("--json", json_out, "Also write the report as JSON here");
    evaluate_cmd->add_flag("--allow-failures", allow_failures,
                           "Score records carrying failure flags");
    add_data_flags(evaluate_cmd, opt);

    auto* run_all = app.add_subcommand(
        "run-all", "preprocess + index + predict + evaluate on one labeled set");
    run_all->add_option("--input", input, "Labeled dataset JSON")->required();
    run_all->add_option("--workdir", workdir, "Output directory")->capture_default_str();
    run_all->add_option("--holdout", holdout,
                        "Judge only the last N conversations (0 = all, self-excluded)")
        ->capture_default_str();
    run_all->add_flag("--allow-failures", allow_failures,
                      "Keep going when items exhaust retries");
    run_all->add_option("--k", opt.k, "Few-shot examples to retrieve")->capture_default_str();
    run_all->add_option("--concurrency", opt.concurrency, "Worker pool size")
        ->capture_default_str();
    run_all->add_option("--max-retries", opt.max_retries, "Retries per item")
        ->capture_default_str();
    run_all->add_option("--template", opt.template_path, "Prompt template override");
    add_data_flags(run_all, opt);
    add_preprocess_flags(run_all, opt);
    add_provider_flags(run_all, opt, /*with_chat=*/true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (preprocess->parsed()) {
            return cmd_preprocess(input, output, report_path, unlabeled, opt);
        }
        if (index->parsed()) {
            return cmd_index(input, store_path, opt);
        }
        if (predict->parsed()) {
            return cmd_predict(input, store_path, output, checkpoint_path, labeled, resume,
                               allow_failures, opt);
        }
        if (evaluate_cmd->parsed()) {
            return cmd_evaluate(gold_path, pred_path, json_out, allow_failures, opt);
        }
        if (run_all->parsed()) {
            return cmd_run_all(input, workdir, holdout, allow_failures, opt);
        }
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
