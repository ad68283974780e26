#include "mijudge/judge.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "mijudge/error.hpp"

namespace mijudge {

std::chrono::milliseconds RetryPolicy::delay_for_attempt(int attempt) const {
    double scale = std::pow(backoff_factor, attempt - 1);
    return std::chrono::milliseconds(
        static_cast<long long>(static_cast<double>(backoff_base.count()) * scale));
}

// --- label extraction ---

namespace {

// Balanced-brace candidate starting at `start`, respecting JSON strings.
std::optional<std::string> json_object_candidate(const std::string& raw, size_t start) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (size_t i = start; i < raw.size(); ++i) {
        char c = raw[i];
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}') {
            if (--depth == 0) return raw.substr(start, i - start + 1);
        }
    }
    return std::nullopt;
}

std::string strip_bare_wrappers(const std::string& raw) {
    size_t a = 0;
    size_t b = raw.size();
    auto is_wrapper = [](char c) {
        return c == '"' || c == '\'' || c == '`' || std::isspace(static_cast<unsigned char>(c));
    };
    while (a < b && is_wrapper(raw[a])) ++a;
    while (b > a && is_wrapper(raw[b - 1])) --b;
    return raw.substr(a, b - a);
}

}  // namespace

Label parse_label(const std::string& raw) {
    // JSON object with a "label" field wins, wherever it sits in the text.
    for (size_t pos = raw.find('{'); pos != std::string::npos; pos = raw.find('{', pos + 1)) {
        auto candidate = json_object_candidate(raw, pos);
        if (!candidate) continue;
        nlohmann::json doc = nlohmann::json::parse(*candidate, nullptr, false);
        if (doc.is_discarded() || !doc.is_object() || !doc.contains("label")) continue;
        const auto& value = doc.at("label");
        if (!value.is_string()) {
            throw Error(ErrorKind::Parse,
                        "label field is not a string in model output: " + raw);
        }
        auto matched = match_label(value.get<std::string>());
        if (!matched) {
            throw Error(ErrorKind::Parse, "unknown label \"" + value.get<std::string>() +
                                              "\" in model output: " + raw);
        }
        return *matched;
    }

    auto bare = match_label(strip_bare_wrappers(raw));
    if (bare) return *bare;
    throw Error(ErrorKind::Parse, "cannot extract a label from model output: " + raw);
}

// --- providers ---

std::string ChatProvider::complete(const std::string& prompt, const ChatContext& ctx) {
    calls_.fetch_add(1);
    return complete_impl(prompt, ctx);
}

std::string EchoGoldProvider::complete_impl(const std::string&, const ChatContext& ctx) {
    if (!ctx.gold_label) {
        throw Error(ErrorKind::Config,
                    "echo-gold provider needs gold labels (item " +
                        example_key(ctx.conversation_id, ctx.tutor_id) + " has none)");
    }
    return "{\"label\": \"" + std::string(canonical_label(*ctx.gold_label)) + "\"}";
}

ScriptProvider::ScriptProvider(std::vector<std::string> replies) : replies_(std::move(replies)) {}

std::shared_ptr<ScriptProvider> ScriptProvider::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open script file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Parse, std::string("bad script file: ") + e.what());
    }
    if (!doc.is_array()) throw Error(ErrorKind::Parse, "script file must be a JSON array");
    std::vector<std::string> replies;
    for (const auto& r : doc) replies.push_back(r.get<std::string>());
    return std::make_shared<ScriptProvider>(std::move(replies));
}

std::string ScriptProvider::complete_impl(const std::string&, const ChatContext&) {
    size_t i = next_.fetch_add(1);
    if (i >= replies_.size()) {
        throw Error(ErrorKind::State, "script provider ran out of canned replies");
    }
    return replies_[i];
}

std::string FlakyProvider::complete_impl(const std::string& prompt, const ChatContext& ctx) {
    if (failures_.fetch_sub(1) > 0) {
        throw Error(ErrorKind::Transport, "injected transport failure");
    }
    return inner_->complete(prompt, ctx);
}

std::string AbortAfterProvider::complete_impl(const std::string& prompt, const ChatContext& ctx) {
    if (allowed_.fetch_sub(1) <= 0) {
        std::_Exit(9);  // simulated crash; the checkpoint must already be durable
    }
    return inner_->complete(prompt, ctx);
}

HttpChatProvider::HttpChatProvider(HttpChatConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) {
        throw Error(ErrorKind::Config, "chat provider needs a base_url");
    }
}

std::string HttpChatProvider::id() const {
    return "http:" + config_.model;
}

std::string HttpChatProvider::complete_impl(const std::string& prompt, const ChatContext&) {
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
    client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);

    nlohmann::json body;
    body["model"] = config_.model;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = config_.temperature;

    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }

    auto res = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) {
        throw Error(ErrorKind::Transport,
                    "chat request failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 401 || res->status == 403) {
        throw Error(ErrorKind::Config,
                    "chat provider rejected credentials (HTTP " + std::to_string(res->status) +
                        ")");
    }
    if (res->status == 429 || res->status >= 500) {
        throw Error(ErrorKind::Transport,
                    "chat provider unavailable (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status != 200) {
        throw Error(ErrorKind::Protocol,
                    "chat provider answered HTTP " + std::to_string(res->status));
    }

    nlohmann::json doc = nlohmann::json::parse(res->body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") || !doc.at("choices").is_array() ||
        doc.at("choices").empty()) {
        throw Error(ErrorKind::Protocol, "chat response has no choices");
    }
    const auto& message = doc.at("choices")[0];
    if (!message.contains("message") || !message.at("message").contains("content")) {
        throw Error(ErrorKind::Protocol, "chat response has no message content");
    }
    return message.at("message").at("content").get<std::string>();
}

// --- orchestration ---

std::string make_query_text(const Dialogue& d, const TutorResponse& r) {
    return render_dialogue(d) + "\n### Response\n" + r.text;
}

JudgePipeline::JudgePipeline(const VectorStore* store, const PromptTemplate* prompt_template,
                             EmbeddingProvider* embedder, EmbeddingCache* cache,
                             ChatProvider* chat, JudgeOptions opts,
                             std::function<std::string(const std::string&)> embed_transform)
    : store_(store),
      template_(prompt_template),
      embedder_(embedder),
      cache_(cache),
      chat_(chat),
      opts_(opts),
      embed_transform_(std::move(embed_transform)) {
    if (opts_.k < 0) throw Error(ErrorKind::Config, "k must be >= 0");
    if (opts_.retry.max_retries < 0) {
        throw Error(ErrorKind::Config, "max_retries must be >= 0");
    }
    if (opts_.retry.backoff_factor < 1.0) {
        throw Error(ErrorKind::Config, "backoff_factor must be >= 1");
    }
    if (opts_.k > 0 && (store_ == nullptr || embedder_ == nullptr)) {
        throw Error(ErrorKind::Config, "retrieval needs a vector store and an embedder");
    }
    if (template_ == nullptr) throw Error(ErrorKind::Config, "prompt template is required");
    if (chat_ == nullptr) throw Error(ErrorKind::Config, "chat provider is required");
}

std::vector<RetrievedExample> JudgePipeline::retrieve(const Dialogue& d,
                                                      const TutorResponse& r) const {
    std::string query = make_query_text(d, r);
    if (embed_transform_) query = embed_transform_(query);

    EmbeddingVector vector;
    if (cache_ != nullptr) {
        vector = cache_->cached_embed(*embedder_, {query})[0];
    } else {
        EmbedRequest req;
        req.texts = {query};
        req.model_id = embedder_->model_id();
        vector = embedder_->embed_batch(req)[0];
    }

    std::set<std::string> exclude;
    if (opts_.exclude_self) exclude.insert(example_key(d.conversation_id, r.tutor_id));
    return store_->top_k(vector, opts_.k, exclude);
}

Judgment JudgePipeline::judge_one(const Dialogue& dialogue,
                                  const TutorResponse& response) const {
    std::vector<RetrievedExample> examples;
    if (opts_.k > 0) examples = retrieve(dialogue, response);

    PromptBundle bundle =
        template_->build_prompt(dialogue, response, examples, opts_.prompt_char_budget);

    ChatContext ctx{dialogue.conversation_id, response.tutor_id, response.gold_label};

    Judgment judgment;
    judgment.example_ids = bundle.example_ids;
    judgment.provider_id = chat_->id();

    std::string prompt = bundle.full_text;
    bool reminded = false;
    std::string last_raw;
    const int max_attempts = opts_.retry.max_retries + 1;

    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        if (attempt > 1) {
            auto delay = opts_.retry.delay_for_attempt(attempt - 1);
            if (delay.count() > 0) std::this_thread::sleep_for(delay);
        }
        std::string raw;
        try {
            raw = chat_->complete(prompt, ctx);
        } catch (const Error& e) {
            if (!e.retryable()) throw;  // config/protocol problems are not per-item noise
            last_raw = e.what();
            judgment.attempts = attempt;
            continue;
        }
        last_raw = raw;
        judgment.attempts = attempt;
        try {
            judgment.label = parse_label(raw);
            judgment.raw_text = raw;
            return judgment;
        } catch (const Error&) {
            if (!reminded) {
                prompt += "\n\nReminder:\n" + format_instructions();
                reminded = true;
            }
        }
    }

    judgment.failed = true;
    judgment.label = Label::No;  // conservative placeholder; never scored silently
    judgment.raw_text = last_raw;
    judgment.attempts = max_attempts;
    return judgment;
}

std::string prediction_to_jsonl(const PredictionRecord& record) {
    nlohmann::json line{{"conversation_id", record.conversation_id},
                        {"tutor_id", record.tutor_id},
                        {"response_text", record.response_text},
                        {"label", std::string(canonical_label(record.judgment.label))},
                        {"raw_text", record.judgment.raw_text},
                        {"attempts", record.judgment.attempts},
                        {"example_ids", record.judgment.example_ids},
                        {"provider_id", record.judgment.provider_id},
                        {"failed", record.judgment.failed}};
    return line.dump();
}

PredictionRecord prediction_from_jsonl(const std::string& line) {
    nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw Error(ErrorKind::Validation, "corrupt checkpoint line: " + line);
    }
    PredictionRecord record;
    try {
        record.conversation_id = doc.at("conversation_id").get<std::string>();
        record.tutor_id = doc.at("tutor_id").get<std::string>();
        record.response_text = doc.at("response_text").get<std::string>();
        auto label = match_label(doc.at("label").get<std::string>());
        if (!label) throw Error(ErrorKind::Label, "unknown label in checkpoint");
        record.judgment.label = *label;
        record.judgment.raw_text = doc.at("raw_text").get<std::string>();
        record.judgment.attempts = doc.at("attempts").get<int>();
        record.judgment.example_ids = doc.at("example_ids").get<std::vector<std::string>>();
        record.judgment.provider_id = doc.at("provider_id").get<std::string>();
        record.judgment.failed = doc.at("failed").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Validation,
                    std::string("corrupt checkpoint line (") + e.what() + "): " + line);
    }
    return record;
}

std::vector<PredictionRecord> read_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open checkpoint: " + path);
    std::vector<PredictionRecord> records;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            records.push_back(prediction_from_jsonl(line));
        } catch (const Error& e) {
            throw Error(ErrorKind::Validation, "checkpoint " + path + " line " +
                                                   std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

namespace {

class CheckpointWriter {
  public:
    explicit CheckpointWriter(const std::string& path, bool append) {
        file_ = std::fopen(path.c_str(), append ? "ab" : "wb");
        if (file_ == nullptr) {
            throw Error(ErrorKind::Io, "cannot open checkpoint for writing: " + path);
        }
    }
    ~CheckpointWriter() {
        if (file_ != nullptr) std::fclose(file_);
    }

    // One line per record, flushed and fsynced so a crash right after the
    // call can never lose it.
    void append(const PredictionRecord& record) {
        std::string line = prediction_to_jsonl(record) + "\n";
        if (std::fwrite(line.data(), 1, line.size(), file_) != line.size()) {
            throw Error(ErrorKind::Io, "checkpoint write failed");
        }
        std::fflush(file_);
        ::fsync(fileno(file_));
    }

  private:
    std::FILE* file_;
};

}  // namespace

std::vector<PredictionRecord> JudgePipeline::run_batch(const std::vector<BatchItem>& items,
                                                       const std::string& checkpoint_path,
                                                       bool resume, int concurrency) const {
    if (concurrency < 1) throw Error(ErrorKind::Config, "concurrency must be >= 1");

    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& item : items) {
        auto key = std::make_pair(item.dialogue.conversation_id, item.response.tutor_id);
        if (!keys.insert(key).second) {
            throw Error(ErrorKind::Validation,
                        "duplicate item " + example_key(key.first, key.second));
        }
    }

    std::map<std::pair<std::string, std::string>, PredictionRecord> done;

    if (resume && std::ifstream(checkpoint_path).good()) {
        for (auto& record : read_checkpoint(checkpoint_path)) {
            done[{record.conversation_id, record.tutor_id}] = std::move(record);
        }
    }

    CheckpointWriter writer(checkpoint_path, resume);
    std::mutex sink_mutex;

    std::vector<PredictionRecord> results(items.size());
    std::vector<char> from_checkpoint(items.size(), 0);
    for (size_t i = 0; i < items.size(); ++i) {
        auto it = done.find({items[i].dialogue.conversation_id, items[i].response.tutor_id});
        if (it != done.end()) {
            results[i] = it->second;
            from_checkpoint[i] = 1;
        }
    }

    std::atomic<size_t> next{0};
    std::exception_ptr fatal;
    std::mutex fatal_mutex;
    std::atomic<bool> aborted{false};

    auto worker = [&]() {
        while (!aborted.load()) {
            size_t i = next.fetch_add(1);
            if (i >= items.size()) return;
            if (from_checkpoint[i]) continue;
            try {
                Judgment judgment = judge_one(items[i].dialogue, items[i].response);
                PredictionRecord record{items[i].dialogue.conversation_id,
                                        items[i].response.tutor_id, items[i].response.text,
                                        std::move(judgment)};
                {
                    std::lock_guard<std::mutex> lock(sink_mutex);
                    writer.append(record);
                }
                results[i] = std::move(record);
            } catch (...) {
                std::lock_guard<std::mutex> lock(fatal_mutex);
                if (!fatal) fatal = std::current_exception();
                aborted.store(true);
                return;
            }
        }
    };

    if (concurrency == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(concurrency);
        for (int t = 0; t < concurrency; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (fatal) std::rethrow_exception(fatal);
    return results;
}

Label knn_predict(const VectorStore& store, const EmbeddingVector& query, int k,
                  const std::set<std::string>& exclude) {
    auto neighbors = store.top_k(query, k, exclude);

    std::map<Label, int> votes;
    std::map<Label, double> similarity;
    for (const auto& n : neighbors) {
        votes[n.example.label] += 1;
        similarity[n.example.label] += n.score;
    }

    // Ties: larger summed similarity, then the earlier of No < TSE < Yes.
    const Label order[] = {Label::No, Label::ToSomeExtent, Label::Yes};
    Label best = order[0];
    bool have = false;
    for (Label l : order) {
        if (!votes.count(l)) continue;
        if (!have) {
            best = l;
            have = true;
            continue;
        }
        if (votes[l] > votes[best] ||
            (votes[l] == votes[best] && similarity[l] > similarity[best])) {
            best = l;
        }
    }
    return best;
}

}  // namespace mijudge
