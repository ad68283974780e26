#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mijudge/corpus.hpp"
#include "mijudge/embedding.hpp"
#include "mijudge/prompt.hpp"
#include "mijudge/vectorstore.hpp"

namespace mijudge {

struct Judgment {
    Label label = Label::No;
    std::string raw_text;
    int attempts = 1;
    std::vector<std::string> example_ids;
    std::string provider_id;
    // Retries exhausted; label above is the conservative fallback and the
    // record must never be scored silently.
    bool failed = false;
};

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{0};
    double backoff_factor = 2.0;

    std::chrono::milliseconds delay_for_attempt(int attempt) const;  // attempt >= 1
};

struct PredictionRecord {
    std::string conversation_id;
    std::string tutor_id;
    std::string response_text;
    Judgment judgment;
};

// Extracts the label from a model answer. Priority: a JSON object anywhere
// in the text whose "label" field names a label (case-insensitive), else
// the whole text being exactly one label modulo whitespace, quotes and
// backticks. Anything else throws Error{Parse} with the raw text attached.
Label parse_label(const std::string& raw);

struct ChatContext {
    std::string conversation_id;
    std::string tutor_id;
    std::optional<Label> gold_label;  // only the echo-gold mock reads this
};

class ChatProvider {
  public:
    virtual ~ChatProvider() = default;

    virtual std::string id() const = 0;

    std::string complete(const std::string& prompt, const ChatContext& ctx);

    int call_count() const { return calls_.load(); }

  protected:
    virtual std::string complete_impl(const std::string& prompt, const ChatContext& ctx) = 0;

  private:
    std::atomic<int> calls_{0};
};

// --- mock providers (test and offline use) ---

// Answers with the item's gold label. Requires gold labels in the input.
class EchoGoldProvider : public ChatProvider {
  public:
    std::string id() const override { return "echo-gold"; }

  protected:
    std::string complete_impl(const std::string&, const ChatContext& ctx) override;
};

class FixedProvider : public ChatProvider {
  public:
    explicit FixedProvider(std::string reply) : reply_(std::move(reply)) {}
    std::string id() const override { return "fixed:" + reply_; }

  protected:
    std::string complete_impl(const std::string&, const ChatContext&) override { return reply_; }

  private:
    std::string reply_;
};

// Replays canned answers from a JSON array of strings, in order.
class ScriptProvider : public ChatProvider {
  public:
    static std::shared_ptr<ScriptProvider> from_file(const std::string& path);
    explicit ScriptProvider(std::vector<std::string> replies);
    std::string id() const override { return "script"; }

  protected:
    std::string complete_impl(const std::string&, const ChatContext&) override;

  private:
    std::vector<std::string> replies_;
    std::atomic<size_t> next_{0};
};

// Fails the first n calls with a transport error, then delegates.
class FlakyProvider : public ChatProvider {
  public:
    FlakyProvider(int failures, std::shared_ptr<ChatProvider> inner)
        : failures_(failures), inner_(std::move(inner)) {}
    std::string id() const override { return "flaky:" + inner_->id(); }

  protected:
    std::string complete_impl(const std::string& prompt, const ChatContext& ctx) override;

  private:
    std::atomic<int> failures_;
    std::shared_ptr<ChatProvider> inner_;
};

// Terminates the process after n successful calls; crash-recovery tests
// point this at a batch and then resume it.
class AbortAfterProvider : public ChatProvider {
  public:
    AbortAfterProvider(int allowed_calls, std::shared_ptr<ChatProvider> inner)
        : allowed_(allowed_calls), inner_(std::move(inner)) {}
    std::string id() const override { return inner_->id(); }

  protected:
    std::string complete_impl(const std::string& prompt, const ChatContext& ctx) override;

  private:
    std::atomic<int> allowed_;
    std::shared_ptr<ChatProvider> inner_;
};

struct HttpChatConfig {
    std::string base_url;
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4o";
    double temperature = 0.0;
    std::string api_key;
    int timeout_ms = 60000;
};

// POST {model, messages:[{role:"user",content}], temperature} ->
// {choices:[{message:{content:"..."}}]}.
class HttpChatProvider : public ChatProvider {
  public:
    explicit HttpChatProvider(HttpChatConfig config);
    std::string id() const override;

  protected:
    std::string complete_impl(const std::string& prompt, const ChatContext&) override;

  private:
    HttpChatConfig config_;
};

// --- orchestration ---

struct JudgeOptions {
    int k = 5;  // 0 = zero-shot, no retrieval
    RetryPolicy retry;
    int prompt_char_budget = 0;
    bool exclude_self = true;  // drop the item's own store entry from retrieval
};

struct BatchItem {
    Dialogue dialogue;  // preprocessed
    TutorResponse response;
};

inline std::string example_key(const std::string& conversation_id, const std::string& tutor_id) {
    return conversation_id + "::" + tutor_id;
}

// Query text fed to the embedder: rendered dialogue, then the response
// under a "### Response" separator.
std::string make_query_text(const Dialogue& d, const TutorResponse& r);

class JudgePipeline {
  public:
    // store may be null only when opts.k == 0. embed_transform runs on the
    // query text before embedding (the normalization used at index time);
    // identity when empty.
    JudgePipeline(const VectorStore* store, const PromptTemplate* prompt_template,
                  EmbeddingProvider* embedder, EmbeddingCache* cache, ChatProvider* chat,
                  JudgeOptions opts,
                  std::function<std::string(const std::string&)> embed_transform = {});

    // Retrieves, prompts, parses; retries transport and parse failures with
    // backoff (parse retries re-send the prompt with a format reminder).
    // Exhausted retries yield a failed Judgment; config errors propagate.
    Judgment judge_one(const Dialogue& dialogue, const TutorResponse& response) const;

    // Judges every item with a bounded worker pool, appending each finished
    // record to the JSONL checkpoint (fsynced per line). With resume=true,
    // items already in the checkpoint are skipped. Output order equals
    // input order. Duplicate (conversation, tutor) keys are a validation
    // error; an unreadable checkpoint at resume is a validation error.
    std::vector<PredictionRecord> run_batch(const std::vector<BatchItem>& items,
                                            const std::string& checkpoint_path, bool resume,
                                            int concurrency) const;

  private:
    std::vector<RetrievedExample> retrieve(const Dialogue& d, const TutorResponse& r) const;

    const VectorStore* store_;
    const PromptTemplate* template_;
    EmbeddingProvider* embedder_;
    EmbeddingCache* cache_;
    ChatProvider* chat_;
    JudgeOptions opts_;
    std::function<std::string(const std::string&)> embed_transform_;
};

// Majority label of the k nearest examples; ties go to the larger summed
// similarity, then to the first of No < To some extent < Yes.
Label knn_predict(const VectorStore& store, const EmbeddingVector& query, int k,
                  const std::set<std::string>& exclude = {});

// Checkpoint records round-trip as JSONL.
std::string prediction_to_jsonl(const PredictionRecord& record);
PredictionRecord prediction_from_jsonl(const std::string& line);
std::vector<PredictionRecord> read_checkpoint(const std::string& path);

}  // namespace mijudge
